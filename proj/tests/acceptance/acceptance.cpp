// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any fails. Optional arguments select criteria by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "docstormer/blocks.hpp"
#include "docstormer/degrade.hpp"
#include "docstormer/losses.hpp"
#include "docstormer/metrics.hpp"
#include "docstormer/ops.hpp"
#include "docstormer/pfili.hpp"
#include "docstormer/tape.hpp"
#include "docstormer/trainer.hpp"
#include "docstormer/verify.hpp"
#include "oracles.hpp"

using namespace docstormer;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failed conditions and a short measurement summary.
class Report {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass_ = false;
      note("failed: " + what);
    }
  }
  void note(const std::string& text) { detail_ += (detail_.empty() ? "" : "; ") + text; }
  Outcome outcome() const { return {pass_, detail_}; }

 private:
  bool pass_ = true;
  std::string detail_;
};

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

bool bit_identical(const Tensorf& a, const Tensorf& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

std::vector<TrainingPair> synthetic_pairs(int n, std::int64_t side, std::uint64_t spec_seed, std::uint64_t page_seed) {
  std::vector<SamplePair> pairs;
  for (int i = 0; i < n; ++i) {
    Rng rng(spec_seed + i);
    pairs.push_back(synthesize_sample(synthetic_page(side, side, page_seed + i), random_specs(rng)));
  }
  return to_pairs(pairs);
}

// ---------------------------------------------------------------- criterion 1

Outcome gradients() {
  Report r;
  const auto t0 = Clock::now();
  for (auto precision : {Precision::Double, Precision::Single}) {
    GradcheckOptions opt;
    opt.precision = precision;
    opt.seeds = 10;
    opt.tolerance = precision == Precision::Double ? 1e-5 : 1e-3;
    const auto results = run_gradcheck_suite(opt);
    const char* tag = precision == Precision::Double ? "double" : "float";
    double worst = 0.0;
    std::string worst_name;
    for (const auto& c : results) {
      r.expect(c.passed, std::string(tag) + " " + c.name + fmt(" rel %.2e", c.max_rel_error));
      r.expect(c.seeds >= 10, std::string(tag) + " " + c.name + " seed count");
      if (c.max_rel_error >= worst) {
        worst = c.max_rel_error;
        worst_name = c.name;
      }
    }
    r.expect(!results.empty(), std::string(tag) + " suite is empty");
    r.note(std::string(tag) + ": " + std::to_string(results.size()) + " cases, worst " + worst_name +
           fmt(" %.2e", worst));
  }
  const double elapsed = seconds_since(t0);
  r.note(fmt("%.1f s", elapsed));
  r.expect(elapsed < 300.0, "suite exceeded 5 minutes");
  return r.outcome();
}

// ---------------------------------------------------------------- criterion 2

Outcome astm_scaling() {
  Report r;
  Rng rng(1);
  ParameterSet<float> params;
  Astm<float> astm(AstmConfig{36, 1, 16, 16}, 1.0, params, "astm", rng);
  TapeScope no_tape(nullptr);

  std::vector<AttentionStats> reference;
  for (std::int64_t side : {32, 64, 128}) {
    Rng img_rng(side);
    std::vector<AttentionStats> stats;
    astm.forward(init::uniform<float>(Shape{36, side, side}, 0.f, 1.f, img_rng), &stats);
    r.expect(!stats.empty(), "no attention recorded");
    if (stats.empty()) return r.outcome();
    r.expect(stats[0].shape == (Shape{256, 256}), "attention is not 256 x 256 at " + std::to_string(side));
    if (reference.empty()) {
      reference = stats;
      continue;
    }
    r.expect(stats.size() == reference.size(), "head count changed");
    for (std::size_t h = 0; h < std::min(stats.size(), reference.size()); ++h) {
      r.expect(stats[h].shape == reference[h].shape && stats[h].bytes == reference[h].bytes,
               "attention storage changed at " + std::to_string(side));
    }
  }
  r.note("attention " + to_string(reference.at(0).shape) + ", " + std::to_string(reference.at(0).bytes) + " bytes");

  // Least-squares slope of log(time) against log(pixels), median of repeats.
  std::vector<double> xs, ys;
  for (std::int64_t side : {32, 64, 128, 256}) {
    Rng img_rng(side);
    const Tensorf x = init::uniform<float>(Shape{36, side, side}, 0.f, 1.f, img_rng);
    astm.forward(x);  // warm-up
    std::vector<double> times;
    for (int rep = 0; rep < 7; ++rep) {
      const auto t0 = Clock::now();
      astm.forward(x);
      times.push_back(seconds_since(t0));
    }
    std::nth_element(times.begin(), times.begin() + 3, times.end());
    xs.push_back(std::log(static_cast<double>(side * side)));
    ys.push_back(std::log(times[3]));
  }
  const double mx = (xs[0] + xs[1] + xs[2] + xs[3]) / 4, my = (ys[0] + ys[1] + ys[2] + ys[3]) / 4;
  double num = 0, den = 0;
  for (int i = 0; i < 4; ++i) {
    num += (xs[i] - mx) * (ys[i] - my);
    den += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = num / den;
  r.note(fmt("time exponent %.3f over 32..256 px", slope));
  r.expect(slope < 1.3, "time exponent >= 1.3");
  return r.outcome();
}

// ---------------------------------------------------------------- criterion 3

Outcome pfili_fixpoints() {
  Report r;
  ImageModel identity = [](const Tensorf& x) { return x; };
  double max_gain_err = 0.0, elapsed = 0.0;
  std::int64_t compared = 0, excluded = 0;
  Rng rng(3);
  std::uniform_int_distribution<std::int64_t> extent(128, 1024);
  std::uniform_real_distribution<float> gains(0.3f, 0.95f);
  for (int i = 0; i < 20; ++i) {
    const std::int64_t h = extent(rng), w = extent(rng);
    // g * pixel stays inside [0, 1].
    const Tensorf img = init::uniform<float>(Shape{3, h, w}, 0.05f, 1.f, rng);
    const float g = gains(rng);
    ImageModel gain = [g](const Tensorf& x) { return scale(x, g); };
    InferenceOptions opt;
    opt.work_h = 256;
    opt.work_w = 256;
    const auto t0 = Clock::now();
    const Tensorf same = pfili_infer(identity, img, opt);
    const Tensorf scaled = pfili_infer(gain, img, opt);
    elapsed += seconds_since(t0);
    r.expect(bit_identical(same, img), "identity output differs on image " + std::to_string(i));

    // Output pixels whose upscaled factor draws on a floored low-res sample
    // are excluded from the gain comparison.
    const Tensorf reach = oracle::pfili_floor_reach(img, opt.work_h, opt.work_w, opt.eps);
    for (std::int64_t k = 0; k < img.numel(); ++k) {
      if (reach.data()[k] != 0.f) {
        ++excluded;
        continue;
      }
      ++compared;
      max_gain_err = std::max(max_gain_err, static_cast<double>(std::abs(scaled.data()[k] - g * img.data()[k])));
    }
  }
  r.note(fmt("gain max error %.2e over %.0f pixels", max_gain_err, static_cast<double>(compared)) +
         fmt(" (%.0f near the eps floor skipped), 20 images in %.2f s", static_cast<double>(excluded), elapsed));
  r.expect(max_gain_err <= 1e-5, "gain model error above 1e-5");
  r.expect(elapsed < 10.0, "20 images took 10 s or more");
  return r.outcome();
}

// ---------------------------------------------------------------- criterion 4

Outcome pfili_vs_patches() {
  Report r;
  DocStormer<float> model(model_preset("small"), 1);
  ImageModel m = [&](const Tensorf& x) { return model.forward(x).enhanced; };
  const Tensorf img = synthetic_page(2048, 3072, 4);
  InferenceOptions opt;

  std::size_t pfili_peak = 0;
  std::string times;
  for (int run = 0; run < 5; ++run) {
    const std::size_t base = memory::current_bytes();
    memory::reset_peak();
    auto t0 = Clock::now();
    run_strategy(Strategy::Pfili, m, img, opt);
    const double tp = seconds_since(t0);
    pfili_peak = std::max(pfili_peak, memory::peak_bytes() - base);
    t0 = Clock::now();
    run_strategy(Strategy::Patches, m, img, opt);
    const double tc = seconds_since(t0);
    r.expect(tp < tc, "run " + std::to_string(run) + ": pfili not faster than patches");
    times += fmt(" %.1f/%.1f", tp, tc);
  }
  r.note("pfili/patches s:" + times);

  const std::size_t base = memory::current_bytes();
  memory::reset_peak();
  run_strategy(Strategy::Full, m, img, opt);
  const std::size_t full_peak = memory::peak_bytes() - base;
  r.note(fmt("peak MB pfili %.0f full %.0f", pfili_peak / 1e6, full_peak / 1e6));
  r.expect(pfili_peak < full_peak, "pfili peak memory not below the full-resolution forward");
  return r.outcome();
}

// ---------------------------------------------------------------- criterion 5

Outcome training() {
  Report r;
  {
    const auto data = synthetic_pairs(2, 64, 100, 10);
    DocStormer<float> model(model_preset("tiny"), 1);
    TrainConfig cfg;
    cfg.steps = 3000;
    cfg.lr.initial = 5e-3;
    cfg.fixed_stage = TrainStage{64, 2};
    cfg.flips = false;
    const auto t0 = Clock::now();
    train_docstormer(model, data, cfg);
    const double elapsed = seconds_since(t0);
    TapeScope no_tape(nullptr);
    std::string psnrs;
    for (const auto& p : data) {
      const double db = psnr(model.forward(p.degraded).enhanced, p.ground_truth);
      psnrs += fmt(" %.2f", db);
      r.expect(db > 30.0, fmt("overfit pair at %.2f dB", db));
    }
    r.note("overfit PSNR dB:" + psnrs + fmt(" in %.0f s", elapsed));
    r.expect(elapsed < 1800.0, "overfit took 30 min or more");
  }
  {
    const auto data = synthetic_pairs(4, 64, 200, 20);
    Rng rng(1);
    DpNet<float> net(model_preset("tiny").dp, rng);
    TrainConfig cfg;
    cfg.steps = 1000;
    cfg.lr.initial = 2e-3;
    cfg.fixed_stage = TrainStage{64, 4};
    cfg.flips = false;
    const auto curve = train_dp_net(net, data, cfg);
    const double ratio = curve.back().loss / curve.front().loss;
    r.note(fmt("prior loss %.4f -> %.5f", curve.front().loss, curve.back().loss));
    r.expect(ratio < 0.2, fmt("prior loss ratio %.3f", ratio));
  }
  return r.outcome();
}

// ---------------------------------------------------------------- criterion 6

class LinearCritic final : public Critic<double> {
 public:
  explicit LinearCritic(Tensord w) : w_(std::move(w)) {}
  Tensord score(const Tensord& image) const override { return sum(mul(image, w_)); }
  Tensord input_gradient(const Tensord&) const override { return scale(w_, 1.0); }

 private:
  Tensord w_;
};

Outcome losses() {
  Report r;
  double focal_err = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const Tensord p = init::uniform<double>(Shape{3, 16, 16}, 0.01, 0.99, rng);
    Tensord y(Shape{3, 16, 16});
    std::bernoulli_distribution coin(0.4);
    for (auto& v : y.mutable_data()) v = coin(rng) ? 1.0 : 0.0;
    double bce = 0.0;
    for (std::int64_t i = 0; i < p.numel(); ++i) {
      const double pi = p.data()[i], yi = y.data()[i];
      bce -= yi * std::log(pi) + (1 - yi) * std::log(1 - pi);
    }
    focal_err = std::max(focal_err, std::abs(focal_loss(p, y, 0.0, 1.0).item() - bce / p.numel()));
  }
  r.note(fmt("focal vs BCE %.1e", focal_err));
  r.expect(focal_err <= 1e-6, "focal loss at gamma 0 differs from BCE");

  // Equal per-type focal terms: contributions follow the type weights.
  FocalParams params;
  for (auto& t : params.types) t.alpha = 1.0;
  Tensord gt(Shape{3, 8, 8}, 1.0);
  std::vector<double> parts;
  for (int k = 0; k < 3; ++k) {
    Tensord pred = gt.clone();
    for (std::int64_t i = 0; i < 64; ++i) pred.mutable_data()[k * 64 + i] = 0.3;
    parts.push_back(l_dp(pred, gt, params).item());
  }
  r.note(fmt("prior-loss type ratio 1:%.6f:", parts[1] / parts[0]) + fmt("%.6f", parts[2] / parts[0]));
  r.expect(std::abs(parts[1] / parts[0] - 2.0) < 1e-9 && std::abs(parts[2] / parts[0] - 3.0) < 1e-9,
           "per-type ratio is not 1/2/3");

  double gp_err = 0.0;
  for (double norm : {0.25, 1.0, 3.0}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(40 + seed);
      Tensord w = init::uniform<double>(Shape{3, 8, 8}, -1.0, 1.0, rng);
      double n = 0;
      for (double v : w.data()) n += v * v;
      LinearCritic critic(scale(w, norm / std::sqrt(n)));
      std::vector<Tensord> real, fake;
      for (int b = 0; b < 3; ++b) {
        real.push_back(init::uniform<double>(Shape{3, 8, 8}, 0.0, 1.0, rng));
        fake.push_back(init::uniform<double>(Shape{3, 8, 8}, 0.0, 1.0, rng));
      }
      const double gp = gradient_penalty(critic, real, fake, rng).item();
      gp_err = std::max(gp_err, std::abs(gp - (norm - 1) * (norm - 1)));
    }
  }
  r.note(fmt("linear-critic penalty error %.1e", gp_err));
  r.expect(gp_err <= 1e-4, "gradient penalty differs from (|w| - 1)^2");
  return r.outcome();
}

// ---------------------------------------------------------------- criterion 7

std::uint64_t tree_checksum(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    all += fs::relative(f, root).string() + '\n';
    all.append(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return fnv1a(all);
}

Outcome degradations() {
  Report r;
  const DegradationKind kinds[] = {DegradationKind::Shadow, DegradationKind::Wrinkle, DegradationKind::Bleed};
  auto apply = [](const Tensorf& img, const DegradationSpec& s) {
    switch (s.kind) {
      case DegradationKind::Shadow:
        return apply_shadow(img, s).image;
      case DegradationKind::Wrinkle:
        return apply_wrinkle(img, s).image;
      case DegradationKind::Bleed:
        return apply_bleed(img, s).image;
    }
    return Tensorf();
  };

  int noops = 0, darkening = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensorf page = synthetic_page(72, 96, 300 + seed);
    for (auto kind : kinds) {
      Rng rng(seed * 3 + static_cast<int>(kind));
      DegradationSpec spec = DegradationSpec::random(kind, rng);
      const Tensorf out = apply(page, spec);
      if (kind != DegradationKind::Wrinkle) {
        bool darker = true;
        for (std::int64_t i = 0; i < page.numel(); ++i) darker = darker && out.data()[i] <= page.data()[i];
        r.expect(darker, std::string(kind_name(kind)) + " brightened a pixel, seed " + std::to_string(seed));
        ++darkening;
      }
      spec.intensity = 0.0;
      r.expect(bit_identical(apply(page, spec), page),
               std::string(kind_name(kind)) + " at intensity 0 changed the image, seed " + std::to_string(seed));
      ++noops;
    }
  }
  r.note(std::to_string(noops) + " zero-intensity and " + std::to_string(darkening) + " darkening checks");

  int prior_checks = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(500 + seed);
    const auto specs = random_specs(rng);
    const SamplePair s = synthesize_sample(synthetic_page(64, 80, 600 + seed), specs);
    for (int k = 0; k < kDegradationTypes; ++k) {
      const bool applied = std::any_of(specs.begin(), specs.end(),
                                       [&](const DegradationSpec& d) { return static_cast<int>(d.kind) == k; });
      auto channel = s.priors.data().subspan(static_cast<std::size_t>(k * 64 * 80), 64 * 80);
      const bool nonzero = std::any_of(channel.begin(), channel.end(), [](float v) { return v != 0.f; });
      r.expect(applied == nonzero, "prior channel " + std::to_string(k) + " mismatch, seed " + std::to_string(seed));
      ++prior_checks;
    }
  }
  r.note(std::to_string(prior_checks) + " prior-channel checks");

  const fs::path root = fs::temp_directory_path() / ("docstormer_acceptance_" + std::to_string(::getpid()));
  std::vector<Tensorf> gts;
  for (int i = 0; i < 3; ++i) gts.push_back(synthetic_page(64, 80, 700 + i));
  DatasetOptions opt;
  opt.count_per_gt = 2;
  opt.seed = 7;
  std::vector<std::uint64_t> sums;
  for (const char* run : {"a", "b"}) {
    const auto manifest = build_dataset(gts, root / run, opt);
    r.expect(manifest.rows.size() == 6, "dataset row count");
    sums.push_back(tree_checksum(root / run));
  }
  fs::remove_all(root);
  r.expect(sums[0] == sums[1], "dataset rebuild checksum differs");
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(sums[0]));
  r.note(std::string("dataset checksum ") + hex + " twice");
  return r.outcome();
}

// ---------------------------------------------------------------- criterion 8

Outcome metrics() {
  Report r;
  Tensorf x(Shape{1, 10, 10}, 0.25f), y(Shape{1, 10, 10}, 0.25f);
  for (int i : {3, 17, 58, 99}) y.mutable_data()[i] = 0.75f;  // MSE = 0.01
  const double db = psnr(x, y);
  r.note(fmt("PSNR at MSE 0.01 = %.17g dB", db));
  r.expect(db == 20.0, "PSNR is not exactly 20 dB");

  double oracle_err = 0.0, self_err = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const Tensorf a = init::uniform<float>(Shape{3, 32, 32}, 0.f, 1.f, rng);
    Tensorf b = init::uniform<float>(Shape{3, 32, 32}, 0.f, 1.f, rng);
    if (seed % 2) {
      for (std::int64_t i = 0; i < b.numel(); ++i) b.mutable_data()[i] = 0.7f * a.data()[i] + 0.3f * b.data()[i];
    }
    oracle_err = std::max(oracle_err, std::abs(ssim(a, b) - oracle::naive_ssim(a, b)));
    self_err = std::max(self_err, std::abs(ssim(a, a) - 1.0));
  }
  r.note(fmt("SSIM vs oracle %.1e, |ssim(a,a) - 1| %.1e", oracle_err, self_err));
  r.expect(oracle_err <= 1e-6, "SSIM differs from the naive oracle");
  r.expect(self_err <= 1e-12, "ssim(a, a) is not 1");
  return r.outcome();
}

// ---------------------------------------------------------------- criterion 9

Outcome critic() {
  Report r;
  const auto preset = model_preset("tiny");
  const auto data = synthetic_pairs(4, 64, 200, 20);
  DocStormer<float> generator(preset, 1);
  std::vector<Tensorf> real, fake;
  {
    TapeScope no_tape(nullptr);
    for (const auto& p : data) {
      real.push_back(p.ground_truth);
      fake.push_back(generator.forward(p.degraded).enhanced);
    }
  }
  Rng rng(3);
  Discriminator<float> disc(preset.disc, rng);
  const auto records = train_critic(disc, real, fake, 200, 4, TrainConfig{});
  r.expect(records.size() == 200, "critic step count");
  bool finite = true;
  for (const auto& rec : records) finite = finite && std::isfinite(rec.gradient_penalty) && std::isfinite(rec.surrogate);
  r.expect(finite, "non-finite penalty or score");
  std::vector<double> windows;
  for (std::size_t w = 0; w + 20 <= records.size(); w += 20) {
    double s = 0;
    for (std::size_t i = w; i < w + 20; ++i) s += records[i].surrogate;
    windows.push_back(s / 20);
  }
  for (std::size_t i = 1; i < windows.size(); ++i) {
    r.expect(windows[i] > windows[i - 1], "window " + std::to_string(i) + " did not increase");
  }
  r.note(fmt("mean(real) - mean(fake) per 20 steps: %.5f -> %.5f", windows.front(), windows.back()));
  return r.outcome();
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradients", gradients},         {2, "astm-scaling", astm_scaling}, {3, "pfili-fixpoints", pfili_fixpoints},
      {4, "pfili-vs-patches", pfili_vs_patches}, {5, "training", training}, {6, "losses", losses},
      {7, "degradations", degradations},   {8, "metrics", metrics},           {9, "critic", critic},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    failures += !out.pass;
    std::printf("criterion %d %-17s %s (%.1f s) %s\n", c.id, c.name, out.pass ? "PASS" : "FAIL", seconds_since(t0),
                out.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
