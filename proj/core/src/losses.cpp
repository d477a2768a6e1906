#include "docstormer/losses.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace docstormer {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!a.defined() || !b.defined() || a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + (a.defined() ? to_string(a.shape()) : "undefined") +
                     " vs " + (b.defined() ? to_string(b.shape()) : "undefined"));
  }
}

template <class T>
T sign(T v) {
  return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

// cos / sin of 2 pi k n / N.
template <class T>
std::pair<RowMat<T>, RowMat<T>> dft_basis(std::int64_t n) {
  RowMat<T> c(n, n), s(n, n);
  for (std::int64_t k = 0; k < n; ++k) {
    for (std::int64_t j = 0; j < n; ++j) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>((k * j) % n) / static_cast<double>(n);
      c(k, j) = static_cast<T>(std::cos(angle));
      s(k, j) = static_cast<T>(std::sin(angle));
    }
  }
  return {c, s};
}

}  // namespace

void FocalParams::validate() const {
  for (const auto& t : types) {
    if (!(t.weight > 0.0) || !(t.gamma >= 0.0) || !(t.alpha > 0.0 && t.alpha <= 1.0)) {
      throw std::invalid_argument("focal parameters need weight > 0, gamma >= 0, alpha in (0, 1]");
    }
  }
}

void LossWeights::validate() const {
  for (double v : {freq, color, l1, dp, ds, adversarial}) {
    if (!(v >= 0.0)) throw std::invalid_argument("loss weights must be non-negative");
  }
}

template <class T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same(pred, target, "l1_loss");
  auto p = pred.data(), t = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(static_cast<double>(p[i]) - t[i]);
  const double n = static_cast<double>(p.size());
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / n));
  detail::attach<T>("l1_loss", out, {&pred, &target}, [pred, target, n](std::span<const T> g) mutable {
    auto p = pred.data(), t = target.data();
    const T k = g[0] / static_cast<T>(n);
    auto gp = detail::grad_of(pred);
    auto gt = detail::grad_of(target);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const T s = sign(p[i] - t[i]) * k;
      if (!gp.empty()) gp[i] += s;
      if (!gt.empty()) gt[i] -= s;
    }
  });
  return out;
}

template <class T>
Tensor<T> color_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same(pred, target, "color_loss");
  if (pred.ndim() != 3 || pred.dim(0) != 3) throw ShapeError("color_loss: expected a 3 x H x W image");
  const std::int64_t hw = pred.dim(1) * pred.dim(2);
  auto p = pred.data(), t = target.data();
  double acc = 0.0;
  for (std::int64_t i = 0; i < hw; ++i) {
    double dot = 0, pp = 0, tt = 0;
    for (int c = 0; c < 3; ++c) {
      const double a = p[c * hw + i], b = t[c * hw + i];
      dot += a * b;
      pp += a * a;
      tt += b * b;
    }
    if (pp > 0.0 && tt > 0.0) acc += 1.0 - dot / std::sqrt(pp * tt);
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(hw)));
  detail::attach<T>("color_loss", out, {&pred, &target}, [pred, target, hw](std::span<const T> g) mutable {
    auto p = pred.data(), t = target.data();
    auto gp = detail::grad_of(pred);
    auto gt = detail::grad_of(target);
    const double k = static_cast<double>(g[0]) / static_cast<double>(hw);
    for (std::int64_t i = 0; i < hw; ++i) {
      double dot = 0, pp = 0, tt = 0;
      for (int c = 0; c < 3; ++c) {
        const double a = p[c * hw + i], b = t[c * hw + i];
        dot += a * b;
        pp += a * a;
        tt += b * b;
      }
      if (pp <= 0.0 || tt <= 0.0) continue;
      const double np = std::sqrt(pp), nt = std::sqrt(tt);
      const double cosine = dot / (np * nt);
      for (int c = 0; c < 3; ++c) {
        const double a = p[c * hw + i], b = t[c * hw + i];
        // d(1 - cos)/da = -(b / (|a||b|) - cos a / |a|^2)
        if (!gp.empty()) gp[c * hw + i] += static_cast<T>(-k * (b / (np * nt) - cosine * a / pp));
        if (!gt.empty()) gt[c * hw + i] += static_cast<T>(-k * (a / (np * nt) - cosine * b / tt));
      }
    }
  });
  return out;
}

template <class T>
Tensor<T> freq_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same(pred, target, "freq_loss");
  if (pred.ndim() != 3) throw ShapeError("freq_loss: expected C x H x W");
  const std::int64_t c = pred.dim(0), h = pred.dim(1), w = pred.dim(2);
  auto [ch, sh] = dft_basis<T>(h);
  auto [cw, sw] = dft_basis<T>(w);
  const double bins = static_cast<double>(2 * c * h * w);
  std::vector<T> sign_re(static_cast<std::size_t>(c * h * w)), sign_im(sign_re.size());
  double acc = 0.0;
  auto p = pred.data(), t = target.data();
  RowMat<T> d(h, w);
  for (std::int64_t k = 0; k < c; ++k) {
    for (std::int64_t i = 0; i < h * w; ++i) d.data()[i] = p[k * h * w + i] - t[k * h * w + i];
    // F = (C - iS) D (C - iS): Re = C D C - S D S, Im = -(S D C + C D S).
    const RowMat<T> dc = d * cw, ds = d * sw;
    const RowMat<T> re = ch * dc - sh * ds;
    const RowMat<T> im = -(sh * dc + ch * ds);
    for (std::int64_t i = 0; i < h * w; ++i) {
      acc += std::abs(static_cast<double>(re.data()[i])) + std::abs(static_cast<double>(im.data()[i]));
      sign_re[k * h * w + i] = sign(re.data()[i]);
      sign_im[k * h * w + i] = sign(im.data()[i]);
    }
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / bins));
  detail::attach<T>("freq_loss", out, {&pred, &target},
                    [pred, target, c, h, w, bins, sign_re = std::move(sign_re), sign_im = std::move(sign_im), ch = ch,
                     sh = sh, cw = cw, sw = sw](std::span<const T> g) mutable {
                      auto gp = detail::grad_of(pred);
                      auto gt = detail::grad_of(target);
                      const T k = g[0] / static_cast<T>(bins);
                      RowMat<T> gr(h, w), gi(h, w);
                      for (std::int64_t ci = 0; ci < c; ++ci) {
                        for (std::int64_t i = 0; i < h * w; ++i) {
                          gr.data()[i] = sign_re[ci * h * w + i] * k;
                          gi.data()[i] = sign_im[ci * h * w + i] * k;
                        }
                        // Transpose of the forward map; the bases are symmetric.
                        const RowMat<T> gd = ch * gr * cw - sh * gr * sw - sh * gi * cw - ch * gi * sw;
                        for (std::int64_t i = 0; i < h * w; ++i) {
                          if (!gp.empty()) gp[ci * h * w + i] += gd.data()[i];
                          if (!gt.empty()) gt[ci * h * w + i] -= gd.data()[i];
                        }
                      }
                    });
  return out;
}

template <class T>
Tensor<T> focal_loss(const Tensor<T>& prob, const Tensor<T>& target, double gamma, double alpha) {
  require_same(prob, target, "focal_loss");
  if (gamma < 0.0 || !(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("focal_loss: need gamma >= 0 and alpha in (0, 1]");
  }
  auto p = prob.data(), y = target.data();
  for (T v : y) {
    if (v != T(0) && v != T(1)) throw std::invalid_argument("focal_loss: targets must be 0 or 1");
  }
  const bool balanced = alpha < 1.0;
  auto alpha_t = [=](bool positive) { return balanced ? (positive ? alpha : 1.0 - alpha) : 1.0; };
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(static_cast<double>(p[i]), kFocalEps, 1.0 - kFocalEps);
    const bool pos = y[i] == T(1);
    const double pt = pos ? pc : 1.0 - pc;
    acc += alpha_t(pos) * std::pow(1.0 - pt, gamma) * -std::log(pt);
  }
  const double n = static_cast<double>(p.size());
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / n));
  detail::attach<T>("focal_loss", out, {&prob}, [prob, target, gamma, n, alpha_t](std::span<const T> g) mutable {
    auto p = prob.data(), y = target.data();
    auto gp = detail::grad_of(prob);
    const double k = static_cast<double>(g[0]) / n;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double raw = p[i];
      if (raw < kFocalEps || raw > 1.0 - kFocalEps) continue;
      const bool pos = y[i] == T(1);
      const double pt = pos ? raw : 1.0 - raw;
      // d/dq of -(1 - q)^gamma log q
      double dq = -std::pow(1.0 - pt, gamma) / pt;
      if (gamma != 0.0) dq += gamma * std::pow(1.0 - pt, gamma - 1.0) * std::log(pt);
      gp[i] += static_cast<T>(k * alpha_t(pos) * dq * (pos ? 1.0 : -1.0));
    }
  });
  return out;
}

template <class T>
Tensor<T> l_dp(const Tensor<T>& priors_pred, const Tensor<T>& priors_gt, const FocalParams& params) {
  params.validate();
  require_same(priors_pred, priors_gt, "l_dp");
  if (priors_pred.ndim() != 3 || priors_pred.dim(0) != kDegradationTypes) {
    throw ShapeError("l_dp: expected " + std::to_string(kDegradationTypes) + " prior channels, got " +
                     to_string(priors_pred.shape()));
  }
  Tensor<T> binary(priors_gt.shape());
  {
    auto src = priors_gt.data();
    auto dst = binary.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] = static_cast<double>(src[i]) >= params.target_threshold ? T(1) : T(0);
    }
  }
  Tensor<T> total;
  for (int k = 0; k < kDegradationTypes; ++k) {
    const auto& tp = params.types[k];
    Tensor<T> term = scale(focal_loss(slice(priors_pred, k, k + 1), slice(binary, k, k + 1), tp.gamma, tp.alpha),
                           static_cast<T>(tp.weight));
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

template <class T>
Tensor<T> l_ds(const Tensor<T>& pred, const Tensor<T>& gt, const Tensor<T>& priors_pred, const Tensor<T>& priors_gt,
               const LossWeights& w, const FocalParams& focal) {
  w.validate();
  Tensor<T> total = scale(freq_loss(pred, gt), static_cast<T>(w.freq));
  total = add(total, scale(color_loss(pred, gt), static_cast<T>(w.color)));
  total = add(total, scale(l1_loss(pred, gt), static_cast<T>(w.l1)));
  return add(total, scale(l_dp(priors_pred, priors_gt, focal), static_cast<T>(w.dp)));
}

template <class T>
Tensor<T> stack_scores(const std::vector<Tensor<T>>& scores) {
  if (scores.empty()) throw ShapeError("stack_scores: no scores");
  std::vector<Tensor<T>> parts;
  parts.reserve(scores.size());
  for (const auto& s : scores) {
    if (s.numel() != 1) throw ShapeError("stack_scores: every score must be a scalar");
    parts.push_back(reshape(s, Shape{1}));
  }
  return concat(parts);
}

template <class T>
Tensor<T> gradient_penalty(const Critic<T>& critic, const std::vector<Tensor<T>>& real,
                           const std::vector<Tensor<T>>& fake, Rng& rng) {
  if (real.empty() || real.size() != fake.size()) throw ShapeError("gradient_penalty: need equally many real and fake");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Tensor<T>> terms;
  for (std::size_t i = 0; i < real.size(); ++i) {
    require_same(real[i], fake[i], "gradient_penalty");
    const T u = static_cast<T>(unit(rng));
    Tensor<T> mixed(real[i].shape());
    {
      auto r = real[i].data(), f = fake[i].data();
      auto m = mixed.mutable_data();
      for (std::size_t j = 0; j < m.size(); ++j) m[j] = u * r[j] + (T(1) - u) * f[j];
    }
    Tensor<T> g = critic.input_gradient(mixed);
    Tensor<T> norm = sqrt(sum(mul(g, g)));
    Tensor<T> dev = add_scalar(norm, T(-1));
    terms.push_back(mul(dev, dev));
  }
  return mean(stack_scores(terms));
}

template <class T>
Tensor<T> wgan_d_loss(const Tensor<T>& real_scores, const Tensor<T>& fake_scores, const Tensor<T>& gp,
                      double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("wgan_d_loss: lambda must be non-negative");
  Tensor<T> loss = sub(mean(fake_scores), mean(real_scores));
  return add(loss, scale(gp, static_cast<T>(lambda)));
}

template <class T>
Tensor<T> wgan_g_loss(const Tensor<T>& fake_scores) {
  return scale(mean(fake_scores), T(-1));
}

template <class T>
Tensor<T> l_ds_gan(const Tensor<T>& l_ds_value, const Tensor<T>& adversarial, const LossWeights& w) {
  w.validate();
  return add(scale(l_ds_value, static_cast<T>(w.ds)), scale(adversarial, static_cast<T>(w.adversarial)));
}

#define DOCSTORMER_INSTANTIATE_LOSSES(T)                                                                     \
  template Tensor<T> l1_loss(const Tensor<T>&, const Tensor<T>&);                                            \
  template Tensor<T> color_loss(const Tensor<T>&, const Tensor<T>&);                                         \
  template Tensor<T> freq_loss(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> focal_loss(const Tensor<T>&, const Tensor<T>&, double, double);                         \
  template Tensor<T> l_dp(const Tensor<T>&, const Tensor<T>&, const FocalParams&);                           \
  template Tensor<T> l_ds(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,            \
                          const LossWeights&, const FocalParams&);                                           \
  template Tensor<T> stack_scores(const std::vector<Tensor<T>>&);                                            \
  template Tensor<T> gradient_penalty(const Critic<T>&, const std::vector<Tensor<T>>&,                       \
                                      const std::vector<Tensor<T>>&, Rng&);                                  \
  template Tensor<T> wgan_d_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double);              \
  template Tensor<T> wgan_g_loss(const Tensor<T>&);                                                          \
  template Tensor<T> l_ds_gan(const Tensor<T>&, const Tensor<T>&, const LossWeights&);

DOCSTORMER_INSTANTIATE_LOSSES(float)
DOCSTORMER_INSTANTIATE_LOSSES(double)

}  // namespace docstormer
