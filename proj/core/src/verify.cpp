#include "docstormer/verify.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "docstormer/losses.hpp"
#include "docstormer/networks.hpp"

namespace docstormer {

namespace {

template <class T>
struct Setup {
  std::vector<Tensor<T>> inputs;
  LossBuilder<T> build;
  bool in_place = false;       // inputs are module parameters captured by build
  std::size_t samples = 0;     // 0 probes every coordinate
  double single_step = 1e-2;   // finite-difference step in single precision
  std::shared_ptr<void> keep;  // owns modules referenced by build
};

template <class T>
Tensor<T> uniform(Shape shape, double lo, double hi, Rng& rng) {
  return init::uniform<T>(std::move(shape), static_cast<T>(lo), static_cast<T>(hi), rng);
}

// Uniform in [lo, hi] but at least `margin` away from every kink.
template <class T>
Tensor<T> away_from(Shape shape, double lo, double hi, std::vector<double> kinks, double margin, Rng& rng) {
  Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.mutable_data()) {
    double x;
    do {
      x = u(rng);
    } while (std::any_of(kinks.begin(), kinks.end(), [&](double k) { return std::abs(x - k) < margin; }));
    v = static_cast<T>(x);
  }
  return t;
}

// Scalar probe sum(out * r) with a fixed random r.
template <class T>
Tensor<T> project(const Tensor<T>& out, const Tensor<T>& r) {
  return sum(mul(out, r));
}

template <class T>
Tensor<T> weights_like(const Shape& shape, Rng& rng) {
  return uniform<T>(shape, -1.0, 1.0, rng);
}

// True when some DFT bin of `d` (per channel) has a real or imaginary part
// within `margin` of zero without being identically zero, i.e. near a kink
// of the magnitude-based frequency loss.
template <class T>
bool dft_near_zero(const Tensor<T>& d, double margin) {
  const std::int64_t c = d.dim(0), h = d.dim(1), w = d.dim(2);
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t ky = 0; ky < h; ++ky)
      for (std::int64_t kx = 0; kx < w; ++kx) {
        double re = 0, im = 0;
        for (std::int64_t y = 0; y < h; ++y)
          for (std::int64_t x = 0; x < w; ++x) {
            const double a = -2.0 * std::numbers::pi * (double(ky * y) / h + double(kx * x) / w);
            re += d.at({ch, y, x}) * std::cos(a);
            im += d.at({ch, y, x}) * std::sin(a);
          }
        // Bins of a real signal at DC / Nyquist have an exactly-zero imaginary part.
        const auto near = [&](double v) { return std::abs(v) < margin && std::abs(v) > 1e-9; };
        if (near(re) || near(im)) return true;
      }
  return false;
}

template <class Make>
GradcheckCase make_case(std::string name, std::string group, Make make) {
  auto run = [make]<class T>(std::uint64_t seed, double h) {
    Rng rng(seed * 7919 + 17);
    Setup<T> s = make.template operator()<T>(rng);
    return check_gradients<T>(s.build, s.inputs, static_cast<T>(h < 0 ? s.single_step : h), s.samples, seed,
                              s.in_place);
  };
  GradcheckCase c;
  c.name = std::move(name);
  c.group = std::move(group);
  c.run_double = [run](std::uint64_t seed) { return run.template operator()<double>(seed, 1e-5); };
  c.run_single = [run](std::uint64_t seed) { return run.template operator()<float>(seed, -1.0); };
  return c;
}

// Case whose output is a tensor, probed by a random projection.
template <class Fn>
GradcheckCase unary(std::string name, Shape shape, double lo, double hi, Fn fn, std::vector<double> kinks = {},
                    double margin = 0.0) {
  return make_case(name, "op", [=]<class T>(Rng& rng) {
    Setup<T> s;
    s.inputs = {away_from<T>(shape, lo, hi, kinks, margin, rng)};
    Tensor<T> probe = fn(s.inputs[0].detach());
    Tensor<T> r = weights_like<T>(probe.shape(), rng);
    s.build = [fn, r](const std::vector<Tensor<T>>& in) { return project(fn(in[0]), r); };
    return s;
  });
}

template <class Fn>
GradcheckCase binary(std::string name, Shape sa, Shape sb, Fn fn) {
  return make_case(name, "op", [=]<class T>(Rng& rng) {
    Setup<T> s;
    s.inputs = {uniform<T>(sa, -1.0, 1.0, rng), uniform<T>(sb, -1.0, 1.0, rng)};
    Tensor<T> probe = fn(s.inputs[0].detach(), s.inputs[1].detach());
    Tensor<T> r = weights_like<T>(probe.shape(), rng);
    s.build = [fn, r](const std::vector<Tensor<T>>& in) { return project(fn(in[0], in[1]), r); };
    return s;
  });
}

template <class T, class Module>
Setup<T> module_setup(std::shared_ptr<Module> module, const ParameterSet<T>& params, Tensor<T> x,
                      std::function<Tensor<T>(const Module&, const Tensor<T>&)> fn, Rng& rng,
                      std::size_t samples = 12) {
  Setup<T> s;
  x.set_requires_grad(true);
  s.inputs = {x};
  for (const auto& [name, t] : params.entries()) s.inputs.push_back(t);
  Tensor<T> probe;
  {
    TapeScope no_tape(nullptr);
    probe = fn(*module, x);
  }
  Tensor<T> r = weights_like<T>(probe.shape(), rng);
  s.build = [module, fn, r](const std::vector<Tensor<T>>& in) { return project(fn(*module, in[0]), r); };
  s.in_place = true;
  s.samples = samples;
  s.keep = module;
  return s;
}

std::vector<GradcheckCase> build_cases() {
  std::vector<GradcheckCase> cases;
  const Shape m34{3, 4};
  // ---------------------------------------------------------------- ops
  cases.push_back(binary("add", m34, m34, [](auto a, auto b) { return add(a, b); }));
  cases.push_back(binary("sub", m34, m34, [](auto a, auto b) { return sub(a, b); }));
  cases.push_back(binary("mul", m34, m34, [](auto a, auto b) { return mul(a, b); }));
  cases.push_back(unary("scale", m34, -1, 1, [](auto a) { return scale(a, static_cast<decltype(a.item())>(1.7)); }));
  cases.push_back(
      unary("add_scalar", m34, -1, 1, [](auto a) { return add_scalar(a, static_cast<decltype(a.item())>(0.3)); }));
  cases.push_back(binary("scale_by", m34, Shape{1}, [](auto a, auto s) { return scale_by(a, s); }));
  cases.push_back(unary("sqrt", m34, 0.5, 2.0, [](auto a) { return sqrt(a); }));
  cases.push_back(
      unary("inv_sqrt", m34, 0.5, 2.0, [](auto a) { return inv_sqrt(a, static_cast<decltype(a.item())>(1e-4)); }));
  cases.push_back(unary("sum", m34, -1, 1, [](auto a) {
    auto s = sum(a);
    return mul(s, s);
  }));
  cases.push_back(unary("mean", m34, -1, 1, [](auto a) {
    auto s = mean(a);
    return mul(s, s);
  }));
  cases.push_back(unary("reshape", m34, -1, 1, [](auto a) { return reshape(a, Shape{2, 6}); }));
  cases.push_back(unary("transpose", m34, -1, 1, [](auto a) { return transpose(a); }));
  cases.push_back(binary("concat", Shape{2, 3}, Shape{3, 3}, [](auto a, auto b) {
    return concat(std::vector<decltype(a)>{a, b});
  }));
  cases.push_back(unary("slice", Shape{4, 3}, -1, 1, [](auto a) { return slice(a, 1, 3); }));
  cases.push_back(binary("matmul", m34, Shape{4, 2}, [](auto a, auto b) { return matmul(a, b); }));
  cases.push_back(unary("softmax", Shape{3, 5}, -2, 2, [](auto a) { return softmax(a, 1); }));
  cases.push_back(make_case("layer_norm", "op", []<class T>(Rng& rng) {
    Setup<T> s;
    s.inputs = {uniform<T>({4, 3, 3}, -1, 1, rng), uniform<T>({4}, 0.5, 1.5, rng), uniform<T>({4}, -0.5, 0.5, rng)};
    Tensor<T> r = weights_like<T>({4, 3, 3}, rng);
    s.build = [r](const std::vector<Tensor<T>>& in) { return project(layer_norm(in[0], in[1], in[2]), r); };
    return s;
  }));
  cases.push_back(unary("l2_normalize_rows", Shape{3, 5}, -1, 1, [](auto a) { return l2_normalize_rows(a); }));
  cases.push_back(unary("gelu", m34, -2, 2, [](auto a) { return gelu(a); }));
  cases.push_back(unary("sigmoid", m34, -3, 3, [](auto a) { return sigmoid(a); }));
  cases.push_back(unary(
      "leaky_relu", m34, -1, 1, [](auto a) { return leaky_relu(a, static_cast<decltype(a.item())>(0.2)); }, {0.0},
      0.05));
  cases.push_back(unary(
      "clamp", m34, -1, 1,
      [](auto a) {
        using T = decltype(a.item());
        return clamp(a, T(-0.5), T(0.5));
      },
      {-0.5, 0.5}, 0.05));
  cases.push_back(binary("conv2d_depthwise", Shape{2, 5, 5}, Shape{2, 3, 3},
                         [](auto x, auto k) { return conv2d_depthwise(x, k); }));
  cases.push_back(binary("conv2d_pointwise", Shape{3, 4, 4}, Shape{2, 3},
                         [](auto x, auto w) { return conv2d_pointwise(x, w); }));
  cases.push_back(binary("add_channel_bias", Shape{3, 4, 4}, Shape{3},
                         [](auto x, auto b) { return add_channel_bias(x, b); }));
  cases.push_back(unary("flip_spatial", Shape{2, 3, 3}, -1, 1, [](auto k) { return flip_spatial(k); }));
  cases.push_back(
      unary("adaptive_avg_pool", Shape{2, 7, 6}, -1, 1, [](auto x) { return adaptive_avg_pool(x, 3, 4); }));
  cases.push_back(unary("resize_bilinear", Shape{2, 5, 4}, -1, 1, [](auto x) { return resize_bilinear(x, 7, 9); }));
  cases.push_back(unary("resize_bicubic", Shape{2, 6, 5}, -1, 1, [](auto x) { return resize_bicubic(x, 4, 8); }));
  cases.push_back(unary("pixel_unshuffle", Shape{2, 4, 6}, -1, 1, [](auto x) { return pixel_unshuffle(x, 2); }));
  cases.push_back(unary("pixel_shuffle", Shape{8, 3, 2}, -1, 1, [](auto x) { return pixel_shuffle(x, 2); }));
  cases.push_back(unary("reflect_pad", Shape{2, 5, 4}, -1, 1, [](auto x) { return reflect_pad(x, 2, 3); }));
  cases.push_back(unary("crop", Shape{2, 5, 6}, -1, 1, [](auto x) { return crop(x, 1, 2, 3, 3); }));
  cases.push_back(make_case("l1_loss", "op", []<class T>(Rng& rng) {
    Setup<T> s;
    Tensor<T> target = uniform<T>({3, 4, 4}, 0, 1, rng);
    Tensor<T> offset = away_from<T>({3, 4, 4}, -0.5, 0.5, {0.0}, 0.05, rng);
    s.inputs = {add(target, offset), target};
    s.build = [](const std::vector<Tensor<T>>& in) { return l1_loss(in[0], in[1]); };
    return s;
  }));
  cases.push_back(make_case("color_loss", "op", []<class T>(Rng& rng) {
    Setup<T> s;
    s.inputs = {uniform<T>({3, 4, 4}, 0.1, 1, rng), uniform<T>({3, 4, 4}, 0.1, 1, rng)};
    s.build = [](const std::vector<Tensor<T>>& in) { return color_loss(in[0], in[1]); };
    return s;
  }));
  cases.push_back(make_case("focal_loss", "op", []<class T>(Rng& rng) {
    Setup<T> s;
    Tensor<T> target({3, 4, 4});
    std::bernoulli_distribution coin(0.5);
    for (auto& v : target.mutable_data()) v = coin(rng) ? T(1) : T(0);
    s.inputs = {uniform<T>({3, 4, 4}, 0.05, 0.95, rng)};
    s.build = [target](const std::vector<Tensor<T>>& in) { return focal_loss(in[0], target, 2.0, 0.75); };
    s.single_step = 1e-3;
    return s;
  }));
  cases.push_back(make_case("freq_loss", "op", []<class T>(Rng& rng) {
    Setup<T> s;
    do {
      s.inputs = {uniform<T>({2, 4, 5}, 0, 1, rng), uniform<T>({2, 4, 5}, 0, 1, rng)};
    } while (dft_near_zero(sub(s.inputs[0], s.inputs[1]), 0.1));
    s.build = [](const std::vector<Tensor<T>>& in) { return freq_loss(in[0], in[1]); };
    return s;
  }));

  // ---------------------------------------------------------------- losses
  cases.push_back(make_case("l_dp", "loss", []<class T>(Rng& rng) {
    Setup<T> s;
    Tensor<T> gt = away_from<T>({kDegradationTypes, 4, 4}, 0, 1, {0.5}, 0.05, rng);
    s.inputs = {uniform<T>({kDegradationTypes, 4, 4}, 0.05, 0.95, rng)};
    s.build = [gt](const std::vector<Tensor<T>>& in) { return l_dp(in[0], gt); };
    s.single_step = 1e-3;
    return s;
  }));
  cases.push_back(make_case("l_ds", "loss", []<class T>(Rng& rng) {
    // Small extents keep per-element gradients of the averaged terms well
    // above single-precision rounding of the loss value.
    Setup<T> s;
    Tensor<T> gt = uniform<T>({3, 3, 3}, 0.2, 0.8, rng);
    Tensor<T> pgt = away_from<T>({kDegradationTypes, 3, 3}, 0, 1, {0.5}, 0.05, rng);
    Tensor<T> pred;
    do {
      pred = add(gt, away_from<T>({3, 3, 3}, -0.15, 0.15, {0.0}, 0.05, rng));
    } while (dft_near_zero(sub(pred, gt), 0.05));
    s.inputs = {pred, uniform<T>({kDegradationTypes, 3, 3}, 0.2, 0.8, rng)};
    s.build = [gt, pgt](const std::vector<Tensor<T>>& in) { return l_ds(in[0], gt, in[1], pgt); };
    s.single_step = 3e-3;
    return s;
  }));
  cases.push_back(make_case("gradient_penalty", "loss", []<class T>(Rng& rng) {
    DiscriminatorConfig dc;
    dc.widths = {3, 4};
    dc.input_size = 8;
    // The penalty jumps wherever a leaky-ReLU unit of the critic changes
    // side. A single-precision step is large enough to cross one, so that
    // variant uses a smooth critic.
    if constexpr (std::is_same_v<T, float>) dc.slope = 1.0;
    auto critic = std::make_shared<Discriminator<T>>(dc, rng);
    std::vector<Tensor<T>> real = {uniform<T>({3, 8, 8}, 0, 1, rng), uniform<T>({3, 8, 8}, 0, 1, rng)};
    std::vector<Tensor<T>> fake = {uniform<T>({3, 8, 8}, 0, 1, rng), uniform<T>({3, 8, 8}, 0, 1, rng)};
    const std::uint64_t mix_seed = rng();
    Setup<T> s;
    for (const auto& [name, t] : critic->params().entries()) s.inputs.push_back(t);
    s.build = [critic, real, fake, mix_seed](const std::vector<Tensor<T>>&) {
      Rng mix(mix_seed);
      return gradient_penalty<T>(*critic, real, fake, mix);
    };
    s.in_place = true;
    s.samples = 12;
    s.keep = critic;
    return s;
  }));
  cases.push_back(make_case("wgan_d_loss", "loss", []<class T>(Rng& rng) {
    Setup<T> s;
    s.inputs = {uniform<T>({4}, -2, 2, rng), uniform<T>({4}, -2, 2, rng), uniform<T>({1}, 0, 1, rng)};
    s.build = [](const std::vector<Tensor<T>>& in) { return wgan_d_loss(in[0], in[1], in[2], 10.0); };
    return s;
  }));
  cases.push_back(make_case("wgan_g_loss", "loss", []<class T>(Rng& rng) {
    Setup<T> s;
    s.inputs = {uniform<T>({4}, -2, 2, rng)};
    s.build = [](const std::vector<Tensor<T>>& in) { return wgan_g_loss(in[0]); };
    return s;
  }));
  cases.push_back(make_case("l_ds_gan", "loss", []<class T>(Rng& rng) {
    Setup<T> s;
    s.inputs = {uniform<T>({1}, 0, 3, rng), uniform<T>({1}, -2, 2, rng)};
    s.build = [](const std::vector<Tensor<T>>& in) {
      return l_ds_gan(mul(in[0], in[0]), mul(in[1], in[0]));
    };
    return s;
  }));

  // ---------------------------------------------------------------- blocks
  cases.push_back(make_case("stm", "block", []<class T>(Rng& rng) {
    struct M {
      ParameterSet<T> p;
      std::unique_ptr<Stm<T>> m;
    };
    auto mod = std::make_shared<M>();
    mod->m = std::make_unique<Stm<T>>(StmConfig{4, 2}, 1.0, mod->p, "stm", rng);
    return module_setup<T, M>(mod, mod->p, uniform<T>({4, 5, 6}, -1, 1, rng),
                              [](const M& m, const Tensor<T>& x) { return m.m->forward(x); }, rng);
  }));
  cases.push_back(make_case("astm", "block", []<class T>(Rng& rng) {
    struct M {
      ParameterSet<T> p;
      std::unique_ptr<Astm<T>> m;
    };
    auto mod = std::make_shared<M>();
    mod->m = std::make_unique<Astm<T>>(AstmConfig{4, 2, 3, 3}, 1.0, mod->p, "astm", rng);
    return module_setup<T, M>(mod, mod->p, uniform<T>({4, 7, 8}, -1, 1, rng),
                              [](const M& m, const Tensor<T>& x) { return m.m->forward(x); }, rng);
  }));
  cases.push_back(make_case("gdfn", "block", []<class T>(Rng& rng) {
    struct M {
      ParameterSet<T> p;
      std::unique_ptr<Gdfn<T>> m;
    };
    auto mod = std::make_shared<M>();
    mod->m = std::make_unique<Gdfn<T>>(4, 2.66, mod->p, "gdfn", rng);
    return module_setup<T, M>(mod, mod->p, uniform<T>({4, 5, 5}, -1, 1, rng),
                              [](const M& m, const Tensor<T>& x) { return m.m->forward(x); }, rng);
  }));
  cases.push_back(make_case("dual_block_stack", "block", []<class T>(Rng& rng) {
    struct M {
      ParameterSet<T> p;
      std::vector<DualBlock<T>> blocks;
    };
    auto mod = std::make_shared<M>();
    DualBlockConfig cfg;
    cfg.stm = StmConfig{4, 2};
    cfg.astm = AstmConfig{4, 2, 2, 3};
    for (int i = 0; i < 2; ++i) mod->blocks.emplace_back(cfg, mod->p, "block" + std::to_string(i), rng);
    return module_setup<T, M>(mod, mod->p, uniform<T>({4, 6, 6}, -1, 1, rng),
                              [](const M& m, const Tensor<T>& x) {
                                Tensor<T> y = x;
                                for (const auto& b : m.blocks) y = b.forward(y);
                                return y;
                              },
                              rng);
  }));
  cases.push_back(make_case("downsample_upsample", "block", []<class T>(Rng& rng) {
    struct M {
      ParameterSet<T> p;
      std::unique_ptr<Downsample<T>> down;
      std::unique_ptr<Upsample<T>> up;
    };
    auto mod = std::make_shared<M>();
    mod->down = std::make_unique<Downsample<T>>(3, 6, mod->p, "down", rng);
    mod->up = std::make_unique<Upsample<T>>(6, 3, mod->p, "up", rng);
    return module_setup<T, M>(mod, mod->p, uniform<T>({3, 4, 6}, -1, 1, rng),
                              [](const M& m, const Tensor<T>& x) { return m.up->forward(m.down->forward(x)); }, rng);
  }));
  cases.push_back(make_case("feature_fuse", "block", []<class T>(Rng& rng) {
    Setup<T> s;
    s.inputs = {uniform<T>({2, 3, 3}, -1, 1, rng), uniform<T>({2, 3, 3}, -1, 1, rng),
                uniform<T>({3, 3, 3}, -1, 1, rng), uniform<T>({2, 7}, -1, 1, rng)};
    Tensor<T> r = weights_like<T>({2, 3, 3}, rng);
    s.build = [r](const std::vector<Tensor<T>>& in) { return project(feature_fuse(in[0], in[1], in[2], in[3]), r); };
    return s;
  }));
  cases.push_back(make_case("dp_net", "block", []<class T>(Rng& rng) {
    auto net = std::make_shared<DpNet<T>>(model_preset("tiny").dp, rng);
    return module_setup<T, DpNet<T>>(net, net->params(), uniform<T>({3, 16, 16}, 0, 1, rng),
                                     [](const DpNet<T>& n, const Tensor<T>& x) {
                                       auto out = n.forward(x);
                                       return concat(std::vector<Tensor<T>>{
                                           reshape(out.priors, Shape{out.priors.numel()}),
                                           reshape(out.rep.features[3], Shape{out.rep.features[3].numel()})});
                                     },
                                     rng, 6);
  }));
  cases.push_back(make_case("dr_net", "block", []<class T>(Rng& rng) {
    struct M {
      std::unique_ptr<DrNet<T>> net;
      PerceptiveRepresentation<T> rep;
    };
    const ModelConfig cfg = model_preset("tiny");
    auto mod = std::make_shared<M>();
    mod->net = std::make_unique<DrNet<T>>(cfg.dr, cfg.dp, rng);
    for (int l = 0; l < kLevels; ++l) {
      const std::int64_t side = 16 / kScaleFactors[l];
      mod->rep.features[l] = uniform<T>({cfg.dp.channels[l], side, side}, -1, 1, rng);
    }
    // Keep the final clamp inactive: a small residual around a mid-grey input.
    for (const auto& [name, t] : mod->net->params().entries()) {
      if (!name.ends_with(".out_pw")) continue;
      Tensor<T> w = t;
      for (auto& v : w.mutable_data()) v *= T(0.02);
    }
    return module_setup<T, M>(mod, mod->net->params(), uniform<T>({3, 16, 16}, 0.4, 0.6, rng),
                              [](const M& m, const Tensor<T>& x) {
                                return m.net->forward(x, m.rep);
                              },
                              rng, 6);
  }));
  cases.push_back(make_case("discriminator", "block", []<class T>(Rng& rng) {
    DiscriminatorConfig dc;
    dc.widths = {3, 4};
    dc.input_size = 8;
    auto critic = std::make_shared<Discriminator<T>>(dc, rng);
    return module_setup<T, Discriminator<T>>(critic, critic->params(), uniform<T>({3, 8, 8}, 0, 1, rng),
                                             [](const Discriminator<T>& d, const Tensor<T>& x) { return d.score(x); },
                                             rng);
  }));
  // Composite modules stack many leaky-ReLU / normalization stages whose
  // curvature a single-precision step cannot resolve; they are checked in
  // double only.
  for (auto& c : cases)
    if (c.group == "block") c.run_single = nullptr;
  return cases;
}

}  // namespace

const std::vector<GradcheckCase>& gradcheck_cases() {
  static const std::vector<GradcheckCase> cases = build_cases();
  return cases;
}

std::vector<GradcheckCaseResult> run_gradcheck_suite(const GradcheckOptions& options) {
  if (!(options.tolerance > 0.0)) throw std::invalid_argument("gradcheck tolerance must be positive");
  if (options.seeds < 1) throw std::invalid_argument("gradcheck needs at least one seed");
  std::vector<GradcheckCaseResult> results;
  for (const auto& c : gradcheck_cases()) {
    if (!options.only.empty() && c.name != options.only) continue;
    if (std::find(options.groups.begin(), options.groups.end(), c.group) == options.groups.end()) continue;
    const auto& run = options.precision == Precision::Double ? c.run_double : c.run_single;
    if (!run) continue;
    GradcheckCaseResult r;
    r.name = c.name;
    r.group = c.group;
    for (int seed = 0; seed < options.seeds; ++seed) {
      const GradCheckReport rep = run(static_cast<std::uint64_t>(seed));
      r.max_rel_error = std::max(r.max_rel_error, rep.max_rel_error);
      r.max_abs_error = std::max(r.max_abs_error, rep.max_abs_error);
      r.checked += rep.checked;
      ++r.seeds;
    }
    r.passed = r.max_rel_error < options.tolerance;
    results.push_back(r);
  }
  return results;
}

}  // namespace docstormer
