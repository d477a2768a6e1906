#include "cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

#include "commands.hpp"

namespace docstormer::cli {

namespace {

void add_inference_flags(CLI::App& cmd, InferenceFlags& f) {
  cmd.add_option("--work-h", f.work_h, "PFILI / bicubic working height (multiple of 8)")->check(CLI::PositiveNumber);
  cmd.add_option("--work-w", f.work_w, "PFILI / bicubic working width (multiple of 8)")->check(CLI::PositiveNumber);
  cmd.add_option("--patch", f.patch, "crop-patches tile size (multiple of 8)")->check(CLI::PositiveNumber);
  cmd.add_option("--eps", f.eps, "PFILI division floor")->check(CLI::PositiveNumber);
}

const std::vector<std::string> kPresets = {"tiny", "small", "paper"};

// The environment supplies the thread count unless --threads is given.
int threads_from_env(int fallback) {
  const char* raw = std::getenv("DOCSTORMER_THREADS");
  if (raw == nullptr || *raw == '\0') return fallback;
  int value = 0;
  const char* end = raw + std::strlen(raw);
  const auto [ptr, ec] = std::from_chars(raw, end, value);
  if (ec != std::errc() || ptr != end || value < 1 || value > 256) {
    throw UsageError(std::string("DOCSTORMER_THREADS must be an integer in [1, 256], got '") + raw + "'");
  }
  return value;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Multi-degraded colour document restoration: data synthesis, training, inference and evaluation.",
               "docstormer"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "INI file with one [section] per command; command-line flags take precedence");
  int threads = 1;
  auto* threads_opt =
      app.add_option("--threads", threads, "worker threads for per-image work (eval); default from DOCSTORMER_THREADS")
          ->check(CLI::Range(1, 256));

  PagesOptions pages;
  auto* c_pages = app.add_subcommand("pages", "write synthetic clean document pages");
  c_pages->add_option("--out-dir", pages.out_dir, "output directory")->required();
  c_pages->add_option("--count", pages.count, "number of pages")->check(CLI::Range(1, 100000));
  c_pages->add_option("--height", pages.height, "page height in pixels")->check(CLI::Range(16, 16384));
  c_pages->add_option("--width", pages.width, "page width in pixels")->check(CLI::Range(16, 16384));
  c_pages->add_option("--seed", pages.seed, "random seed");

  SynthesizeOptions synth;
  auto* c_synth = app.add_subcommand("synthesize", "degrade clean pages into a training / test dataset");
  c_synth->add_option("--gt-dir", synth.gt_dir, "directory of clean PNG pages")->required();
  c_synth->add_option("--out-dir", synth.out_dir, "dataset output directory")->required();
  c_synth->add_option("--count", synth.count, "degraded variants per clean page")->check(CLI::Range(1, 100000));
  c_synth->add_option("--seed", synth.seed, "random seed");
  c_synth->add_option("--test-fraction", synth.test_fraction, "share of rows assigned to the test split")
      ->check(CLI::Range(0.0, 1.0));
  c_synth->add_option("--min-intensity", synth.min_intensity, "lower bound of sampled degradation intensity")
      ->check(CLI::Range(0.0, 1.0));

  InitOptions init;
  auto* c_init = app.add_subcommand("init", "write a freshly initialized model checkpoint");
  c_init->add_option("--preset", init.preset, "model size")->check(CLI::IsMember(kPresets));
  c_init->add_option("--seed", init.seed, "initialization seed");
  c_init->add_option("--out", init.out, "checkpoint path")->required();
  c_init->add_flag("--identity", init.identity, "zero the output projections so the model returns its input");

  TrainOptions train;
  auto* c_train = app.add_subcommand("train", "train the perception network, the joint model, or the GAN stage");
  c_train->add_option("--dataset", train.dataset, "manifest.csv written by synthesize")->required();
  c_train->add_option("--mode", train.mode, "dp, joint or gan")->check(CLI::IsMember({"dp", "joint", "gan"}));
  c_train->add_option("--preset", train.preset, "model size")->check(CLI::IsMember(kPresets));
  c_train->add_option("--steps", train.steps, "optimizer steps")->check(CLI::Range(1, 100000000));
  c_train->add_option("--out", train.out, "output checkpoint")->required();
  c_train->add_option("--curve", train.curve, "loss curve CSV (default: <out>.curve.csv)");
  c_train->add_option("--dp-checkpoint", train.dp_checkpoint, "pretrained perception network (joint mode)");
  c_train->add_option("--init", train.init, "full model checkpoint to start from (gan mode)");
  c_train->add_option("--clean-dir", train.clean_dir, "clean reference PNGs for the critic (gan mode)");
  c_train->add_option("--lr", train.lr, "initial learning rate (cosine decay to 1e-6)")->check(CLI::PositiveNumber);
  c_train->add_option("--patch", train.patch, "fixed patch size; 0 uses the progressive schedule")
      ->check(CLI::Range(0, 4096));
  c_train->add_option("--batch", train.batch, "batch size with a fixed patch")->check(CLI::Range(1, 4096));
  c_train->add_flag("--no-flips", train.no_flips, "disable random flips");
  c_train->add_option("--n-critic", train.n_critic, "critic updates per generator update (gan mode)")
      ->check(CLI::Range(1, 100));
  c_train->add_option("--critic-lr", train.critic_lr, "critic learning rate (gan mode)")->check(CLI::PositiveNumber);
  c_train->add_option("--seed", train.seed, "initialization and sampling seed");
  c_train->add_option("--log-every", train.log_every, "progress line interval in steps; 0 prints ten lines")
      ->check(CLI::NonNegativeNumber);

  EnhanceOptions enhance;
  auto* c_enhance = app.add_subcommand("enhance", "restore one image");
  c_enhance->add_option("--checkpoint", enhance.checkpoint, "model checkpoint")->required();
  c_enhance->add_option("--input", enhance.input, "input PNG")->required();
  c_enhance->add_option("--output", enhance.output, "output PNG")->required();
  c_enhance->add_option("--strategy", enhance.strategy, "full, bicubic, patches or pfili")
      ->check(CLI::IsMember({"full", "bicubic", "patches", "pfili"}));
  c_enhance->add_option("--preset", enhance.preset, "expected checkpoint preset (optional)")
      ->check(CLI::IsMember(kPresets));
  add_inference_flags(*c_enhance, enhance.inference);

  EvalOptions eval;
  auto* c_eval = app.add_subcommand("eval", "PSNR / SSIM of predictions against ground truths matched by filename");
  c_eval->add_option("--pred-dir", eval.pred_dir, "directory of predicted PNGs")->required();
  c_eval->add_option("--gt-dir", eval.gt_dir, "directory of ground-truth PNGs")->required();
  c_eval->add_option("--report", eval.report, "metrics table output");

  BenchOptions bench;
  auto* c_bench = app.add_subcommand("bench", "time inference strategies on large images");
  c_bench->add_option("--checkpoint", bench.checkpoint, "model checkpoint")->required();
  c_bench->add_option("--input", bench.inputs, "input PNGs")->required();
  c_bench->add_option("--gt-dir", bench.gt_dir, "ground truths matched by filename (metrics use the input otherwise)");
  c_bench->add_option("--strategies", bench.strategies, "strategies to time")
      ->delimiter(',')
      ->check(CLI::IsMember({"full", "bicubic", "patches", "pfili"}));
  c_bench->add_option("--runs", bench.runs, "timed runs per strategy and image")->check(CLI::Range(3, 1000));
  c_bench->add_option("--report", bench.report, "report output");
  c_bench->add_flag("--check-order", bench.check_order, "print whether pfili beats patches per image");
  add_inference_flags(*c_bench, bench.inference);

  GradcheckOptionsCli grad;
  auto* c_grad = app.add_subcommand("gradcheck", "compare every backward rule with central finite differences");
  c_grad->add_option("--preset", grad.preset, "model size (only tiny is supported)");
  c_grad->add_option("--tolerance", grad.tolerance, "maximum relative error");
  c_grad->add_option("--precision", grad.precision, "double or float")->check(CLI::IsMember({"double", "float"}));
  c_grad->add_option("--seeds", grad.seeds, "random inputs per case")->check(CLI::Range(1, 1000));
  c_grad->add_option("--only", grad.only, "run a single case by name");
  c_grad->add_option("--corrupt", grad.corrupt, "inject a wrong backward rule for this op (harness self-test)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  CLI::App* chosen = app.get_subcommands().front();
  try {
    if (threads_opt->count() == 0) threads = threads_from_env(threads);
    if (chosen == c_pages) return cmd_pages(pages);
    if (chosen == c_synth) return cmd_synthesize(synth);
    if (chosen == c_init) return cmd_init(init);
    if (chosen == c_train) return cmd_train(train);
    if (chosen == c_enhance) return cmd_enhance(enhance);
    if (chosen == c_eval) return cmd_eval(eval, threads);
    if (chosen == c_bench) return cmd_bench(bench);
    if (chosen == c_grad) return cmd_gradcheck(grad);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "docstormer %s: %s\n", chosen->get_name().c_str(), e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "docstormer %s: error: %s\n", chosen->get_name().c_str(), e.what());
    return kFailure;
  }
  return kUsage;
}

}  // namespace docstormer::cli
