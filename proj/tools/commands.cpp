#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>

#include "docstormer/checkpoint.hpp"
#include "docstormer/degrade.hpp"
#include "docstormer/image.hpp"
#include "docstormer/metrics.hpp"
#include "docstormer/pfili.hpp"
#include "docstormer/tape.hpp"
#include "docstormer/trainer.hpp"
#include "docstormer/verify.hpp"
#include "parallel.hpp"

namespace docstormer::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<fs::path> list_pngs(const fs::path& dir, const char* what) {
  if (!fs::is_directory(dir)) throw std::runtime_error(std::string(what) + " '" + dir.string() + "' is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (e.is_regular_file() && ext == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

struct LoadedModel {
  std::string preset;
  std::unique_ptr<DocStormer<float>> model;
};

LoadedModel load_model(const fs::path& checkpoint, const std::string& expected_preset = "") {
  const CheckpointInfo info = read_checkpoint_info(checkpoint);
  if (!expected_preset.empty() && expected_preset != info.preset) {
    throw CheckpointError("checkpoint '" + checkpoint.string() + "' holds preset '" + info.preset + "', not '" +
                          expected_preset + "'");
  }
  LoadedModel out{info.preset, std::make_unique<DocStormer<float>>(model_preset(info.preset))};
  auto params = out.model->params();
  load_checkpoint(checkpoint, params, info.preset);
  return out;
}

InferenceOptions to_inference(const InferenceFlags& f) {
  InferenceOptions o;
  o.work_h = f.work_h;
  o.work_w = f.work_w;
  o.patch = f.patch;
  o.eps = f.eps;
  o.validate();
  return o;
}

std::vector<Tensor<float>> read_pool(const fs::path& dir) {
  std::vector<Tensor<float>> pool;
  for (const auto& p : list_pngs(dir, "clean-patch directory")) pool.push_back(read_png_rgb(p));
  if (pool.empty()) throw std::runtime_error("no PNG files in clean-patch directory '" + dir.string() + "'");
  return pool;
}

}  // namespace

int cmd_pages(const PagesOptions& o) {
  fs::create_directories(o.out_dir);
  for (int i = 0; i < o.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "page_%04d.png", i);
    write_png(o.out_dir / name, synthetic_page(o.height, o.width, o.seed + static_cast<std::uint64_t>(i)));
  }
  std::printf("wrote %d pages (%lldx%lld) to %s\n", o.count, static_cast<long long>(o.width),
              static_cast<long long>(o.height), o.out_dir.string().c_str());
  return kOk;
}

int cmd_synthesize(const SynthesizeOptions& o) {
  const auto files = list_pngs(o.gt_dir, "gt directory");
  if (files.empty()) throw std::runtime_error("no PNG files in gt directory '" + o.gt_dir.string() + "'");
  std::vector<Tensor<float>> gts;
  for (const auto& f : files) gts.push_back(read_png_rgb(f));
  DatasetOptions opt;
  opt.count_per_gt = o.count;
  opt.seed = o.seed;
  opt.test_fraction = o.test_fraction;
  opt.min_intensity = o.min_intensity;
  const Manifest manifest = build_dataset(gts, o.out_dir, opt);
  const auto test = std::count_if(manifest.rows.begin(), manifest.rows.end(),
                                  [](const ManifestRow& r) { return r.split == "test"; });
  std::printf("wrote %zu triplets (train %zu, test %zu) from %zu ground truths to %s\n", manifest.rows.size(),
              manifest.rows.size() - static_cast<std::size_t>(test), static_cast<std::size_t>(test), gts.size(),
              (o.out_dir / "manifest.csv").string().c_str());
  return kOk;
}

int cmd_init(const InitOptions& o) {
  DocStormer<float> model(model_preset(o.preset), o.seed);
  if (o.identity) model.zero_output_projections();
  ensure_parent(o.out);
  const auto params = model.params();
  save_checkpoint(o.out, {&params}, o.preset);
  std::printf("wrote %s checkpoint (%lld parameters%s) to %s\n", o.preset.c_str(),
              static_cast<long long>(params.element_count()), o.identity ? ", identity output" : "",
              o.out.string().c_str());
  return kOk;
}

int cmd_train(const TrainOptions& o) {
  if (o.mode == "joint" && o.dp_checkpoint.empty()) {
    throw UsageError(
        "joint training starts from a pretrained perception network: pass --dp-checkpoint "
        "(produced by 'train --mode dp')");
  }
  if (o.mode == "gan" && o.clean_dir.empty()) {
    throw UsageError("adversarial training needs clean reference images: pass --clean-dir");
  }
  const Manifest manifest = read_manifest(o.dataset);
  const auto data = to_pairs(load_samples(manifest, std::string("train")));
  if (data.empty()) throw std::runtime_error("manifest '" + o.dataset.string() + "' has no training rows");

  const ModelConfig cfg = model_preset(o.preset);
  DocStormer<float> model(cfg, o.seed);
  TrainConfig tc;
  tc.steps = o.steps;
  tc.lr.initial = o.lr;
  if (o.patch > 0) tc.fixed_stage = TrainStage{o.patch, o.batch};
  tc.flips = !o.no_flips;
  tc.seed = o.seed;
  tc.n_critic = o.n_critic;
  tc.critic_lr = o.critic_lr;
  tc.log_every = o.log_every > 0 ? o.log_every : static_cast<int>(std::max<std::int64_t>(1, o.steps / 10));
  tc.log = [](const std::string& line) {
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
  };
  const fs::path curve_path = o.curve.empty() ? fs::path(o.out.string() + ".curve.csv") : o.curve;
  ensure_parent(o.out);
  ensure_parent(curve_path);

  const auto t0 = Clock::now();
  if (o.mode == "dp") {
    const auto curve = train_dp_net(model.dp(), data, tc);
    save_checkpoint(o.out, {&model.dp().params()}, o.preset);
    write_loss_curve(curve_path, curve);
  } else if (o.mode == "joint") {
    load_checkpoint(o.dp_checkpoint, model.dp().params(), o.preset);
    const auto curve = train_docstormer(model, data, tc);
    const auto params = model.params();
    save_checkpoint(o.out, {&params}, o.preset);
    write_loss_curve(curve_path, curve);
  } else {
    const auto pool = read_pool(o.clean_dir);
    if (!o.init.empty()) {
      auto params = model.params();
      load_checkpoint(o.init, params, o.preset);
    }
    Rng rng(o.seed + 1);
    Discriminator<float> critic(cfg.disc, rng);
    const auto curve = train_docstormer_gan(model, critic, data, pool, tc);
    const auto params = model.params();
    save_checkpoint(o.out, {&params}, o.preset);
    save_checkpoint(fs::path(o.out.string() + ".critic"), {&critic.params()}, o.preset);
    write_gan_curve(curve_path, curve);
  }
  std::printf("trained %s (%s, %lld steps) in %.1f s; checkpoint %s, curve %s\n", o.mode.c_str(), o.preset.c_str(),
              static_cast<long long>(o.steps), seconds_since(t0), o.out.string().c_str(),
              curve_path.string().c_str());
  return kOk;
}

int cmd_enhance(const EnhanceOptions& o) {
  const Strategy strategy = parse_strategy(o.strategy);
  const InferenceOptions inference = to_inference(o.inference);
  const LoadedModel loaded = load_model(o.checkpoint, o.preset);
  const Tensor<float> image = read_png_rgb(o.input);
  ImageModel model = [&](const Tensor<float>& x) { return loaded.model->forward(x).enhanced; };

  const std::size_t base = memory::current_bytes();
  memory::reset_peak();
  const auto t0 = Clock::now();
  const Tensor<float> out = run_strategy(strategy, model, image, inference);
  const double elapsed = seconds_since(t0);
  const std::size_t peak = memory::peak_bytes() - base;
  ensure_parent(o.output);
  write_png(o.output, out);
  std::printf("strategy=%s size=%lldx%lld time_s=%.3f peak_bytes=%zu output=%s\n", o.strategy.c_str(),
              static_cast<long long>(image.dim(2)), static_cast<long long>(image.dim(1)), elapsed, peak,
              o.output.string().c_str());
  return kOk;
}

int cmd_eval(const EvalOptions& o, int threads) {
  const auto preds = list_pngs(o.pred_dir, "prediction directory");
  const auto gts = list_pngs(o.gt_dir, "gt directory");
  std::set<std::string> pred_names, gt_names;
  for (const auto& p : preds) pred_names.insert(p.filename().string());
  for (const auto& g : gts) gt_names.insert(g.filename().string());

  std::vector<std::string> matched;
  bool partial = false;
  for (const auto& n : pred_names) {
    if (gt_names.count(n)) {
      matched.push_back(n);
    } else {
      std::fprintf(stderr, "unmatched: %s (no ground truth)\n", n.c_str());
      partial = true;
    }
  }
  for (const auto& n : gt_names) {
    if (!pred_names.count(n)) {
      std::fprintf(stderr, "unmatched: %s (no prediction)\n", n.c_str());
      partial = true;
    }
  }

  struct Row {
    bool ok = false;
    std::string error;
    MetricRecord metrics;
  };
  std::vector<Row> rows(matched.size());
  parallel_for(matched.size(), threads, [&](std::size_t i) {
    try {
      rows[i].metrics = evaluate(read_png_rgb(o.pred_dir / matched[i]), read_png_rgb(o.gt_dir / matched[i]));
      rows[i].ok = true;
    } catch (const std::exception& e) {
      rows[i].error = e.what();
    }
  });

  std::ostringstream table;
  table << "image\tpsnr_db\tssim\n";
  double psnr_sum = 0.0, ssim_sum = 0.0;
  std::size_t count = 0;
  char buf[512];
  for (std::size_t i = 0; i < matched.size(); ++i) {
    if (!rows[i].ok) {
      std::fprintf(stderr, "excluded: %s (%s)\n", matched[i].c_str(), rows[i].error.c_str());
      partial = true;
      continue;
    }
    std::snprintf(buf, sizeof buf, "%s\t%.4f\t%.6f\n", matched[i].c_str(), rows[i].metrics.psnr_db,
                  rows[i].metrics.ssim);
    table << buf;
    psnr_sum += rows[i].metrics.psnr_db;
    ssim_sum += rows[i].metrics.ssim;
    ++count;
  }
  if (count == 0) throw std::runtime_error("no matched image pairs to evaluate");
  std::snprintf(buf, sizeof buf, "# mean psnr_db=%.4f ssim=%.6f pairs=%zu\n", psnr_sum / count, ssim_sum / count,
                count);
  table << buf;
  ensure_parent(o.report);
  write_text(o.report, table.str());
  std::fputs(table.str().c_str(), stdout);
  return partial ? kPartial : kOk;
}

int cmd_bench(const BenchOptions& o) {
  std::vector<Strategy> strategies;
  for (const auto& s : o.strategies) strategies.push_back(parse_strategy(s));
  const InferenceOptions inference = to_inference(o.inference);
  const LoadedModel loaded = load_model(o.checkpoint);
  std::vector<BenchImage> images;
  for (const auto& p : o.inputs) {
    BenchImage img{p.filename().string(), read_png_rgb(p), Tensor<float>()};
    if (!o.gt_dir.empty() && fs::exists(o.gt_dir / p.filename())) img.ground_truth = read_png_rgb(o.gt_dir / p.filename());
    images.push_back(std::move(img));
  }
  ImageModel model = [&](const Tensor<float>& x) { return loaded.model->forward(x).enhanced; };
  const auto records = bench(model, images, strategies, o.runs, inference);
  ensure_parent(o.report);
  write_bench_report(o.report, records);
  for (const auto& r : records) {
    std::printf("%-8s %-24s time_s=%.3f peak_bytes=%zu psnr_db=%.4f ssim=%.6f\n", r.strategy.c_str(), r.image.c_str(),
                r.time_s, r.peak_bytes, r.psnr_db, r.ssim);
  }
  if (o.check_order) {
    std::map<std::string, std::map<std::string, double>> times;
    for (const auto& r : records) times[r.image][r.strategy] = r.time_s;
    for (const auto& [image, by] : times) {
      if (by.count("pfili") && by.count("patches")) {
        std::printf("order %s: pfili %s patches\n", image.c_str(), by.at("pfili") < by.at("patches") ? "<" : ">=");
      }
    }
  }
  std::printf("%zu records written to %s\n", records.size(), o.report.string().c_str());
  return kOk;
}

int cmd_gradcheck(const GradcheckOptionsCli& o) {
  if (o.preset != "tiny") throw UsageError("gradcheck runs on the tiny preset only");
  if (!(o.tolerance > 0.0)) throw UsageError("tolerance must be positive");
  GradcheckOptions opt;
  opt.precision = o.precision == "float" ? Precision::Single : Precision::Double;
  opt.seeds = o.seeds;
  opt.tolerance = o.tolerance;
  opt.only = o.only;
  set_backward_fault(o.corrupt);
  std::vector<GradcheckCaseResult> results;
  try {
    results = run_gradcheck_suite(opt);
  } catch (...) {
    set_backward_fault("");
    throw;
  }
  set_backward_fault("");
  if (results.empty()) throw UsageError("no gradient check case matches '" + o.only + "'");
  int failed = 0;
  for (const auto& r : results) {
    failed += !r.passed;
    std::printf("%-22s %-6s max_rel=%.3e checked=%zu %s\n", r.name.c_str(), r.group.c_str(), r.max_rel_error,
                r.checked, r.passed ? "PASS" : "FAIL");
  }
  std::printf("%zu/%zu cases within %.1e (%s, %d seeds)\n", results.size() - failed, results.size(), o.tolerance,
              o.precision.c_str(), o.seeds);
  return failed == 0 ? kOk : kFailure;
}

}  // namespace docstormer::cli
