#include "docstormer/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace docstormer {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapC = Eigen::Map<const RowMat<T>>;
template <class T>
using MapM = Eigen::Map<RowMat<T>>;

void require(bool ok, const std::string& message) {
  if (!ok) throw ShapeError(message);
}

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require(a.defined() && b.defined(), std::string(op) + ": undefined operand");
  require(a.shape() == b.shape(),
          std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

template <class T>
void require_chw(const Tensor<T>& x, const char* op) {
  require(x.defined() && x.ndim() == 3, std::string(op) + ": expected C x H x W, got " +
                                            (x.defined() ? to_string(x.shape()) : std::string("undefined")));
}

template <class T>
void require_finite_input(const Tensor<T>& x, const char* op) {
  for (T v : x.data()) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

// Separable resampling taps: output index -> (source index, weight) list.
template <class T>
struct Taps {
  std::int64_t in = 0;
  std::int64_t out = 0;
  int width = 0;
  std::vector<std::int64_t> index;  // out * width
  std::vector<T> weight;
};

template <class T>
Taps<T> bilinear_taps(std::int64_t in, std::int64_t out) {
  Taps<T> taps{in, out, 2, std::vector<std::int64_t>(out * 2), std::vector<T>(out * 2)};
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::int64_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    src = std::max(src, 0.0);
    auto i0 = static_cast<std::int64_t>(std::floor(src));
    i0 = std::min(i0, in - 1);
    const std::int64_t i1 = std::min(i0 + 1, in - 1);
    const double lambda = src - static_cast<double>(i0);
    taps.index[o * 2] = i0;
    taps.index[o * 2 + 1] = i1;
    taps.weight[o * 2] = static_cast<T>(1.0 - lambda);
    taps.weight[o * 2 + 1] = static_cast<T>(lambda);
  }
  return taps;
}

// Catmull-Rom (a = -0.5) cubic convolution kernel.
double cubic_weight(double d) {
  constexpr double a = -0.5;
  d = std::abs(d);
  if (d <= 1.0) return ((a + 2.0) * d - (a + 3.0)) * d * d + 1.0;
  if (d < 2.0) return ((a * d - 5.0 * a) * d + 8.0 * a) * d - 4.0 * a;
  return 0.0;
}

template <class T>
Taps<T> bicubic_taps(std::int64_t in, std::int64_t out) {
  Taps<T> taps{in, out, 4, std::vector<std::int64_t>(out * 4), std::vector<T>(out * 4)};
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::int64_t o = 0; o < out; ++o) {
    const double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    const double base = std::floor(src);
    const double t = src - base;
    for (int k = 0; k < 4; ++k) {
      auto idx = static_cast<std::int64_t>(base) - 1 + k;
      idx = std::clamp<std::int64_t>(idx, 0, in - 1);
      taps.index[o * 4 + k] = idx;
      taps.weight[o * 4 + k] = static_cast<T>(cubic_weight(t - static_cast<double>(k - 1)));
    }
  }
  return taps;
}

// x [C x H x W] -> [C x taps_h.out x taps_w.out]
template <class T>
void resample_forward(std::span<const T> x, std::int64_t channels, const Taps<T>& th, const Taps<T>& tw,
                      std::span<T> out) {
  const std::int64_t h = th.in, w = tw.in, oh = th.out, ow = tw.out;
  std::vector<T> rows(static_cast<std::size_t>(h * ow));
  for (std::int64_t c = 0; c < channels; ++c) {
    const T* src = x.data() + c * h * w;
    for (std::int64_t y = 0; y < h; ++y) {
      const T* line = src + y * w;
      T* dst = rows.data() + y * ow;
      for (std::int64_t o = 0; o < ow; ++o) {
        T acc = 0;
        for (int k = 0; k < tw.width; ++k) acc += tw.weight[o * tw.width + k] * line[tw.index[o * tw.width + k]];
        dst[o] = acc;
      }
    }
    T* dst = out.data() + c * oh * ow;
    std::fill(dst, dst + oh * ow, T(0));
    for (std::int64_t o = 0; o < oh; ++o) {
      T* drow = dst + o * ow;
      for (int k = 0; k < th.width; ++k) {
        const T wk = th.weight[o * th.width + k];
        const T* srow = rows.data() + th.index[o * th.width + k] * ow;
        for (std::int64_t j = 0; j < ow; ++j) drow[j] += wk * srow[j];
      }
    }
  }
}

template <class T>
void resample_backward(std::span<const T> g, std::int64_t channels, const Taps<T>& th, const Taps<T>& tw,
                       std::span<T> dx) {
  const std::int64_t h = th.in, w = tw.in, oh = th.out, ow = tw.out;
  std::vector<T> rows(static_cast<std::size_t>(h * ow));
  for (std::int64_t c = 0; c < channels; ++c) {
    std::fill(rows.begin(), rows.end(), T(0));
    const T* gsrc = g.data() + c * oh * ow;
    for (std::int64_t o = 0; o < oh; ++o) {
      const T* grow = gsrc + o * ow;
      for (int k = 0; k < th.width; ++k) {
        const T wk = th.weight[o * th.width + k];
        T* rrow = rows.data() + th.index[o * th.width + k] * ow;
        for (std::int64_t j = 0; j < ow; ++j) rrow[j] += wk * grow[j];
      }
    }
    T* dst = dx.data() + c * h * w;
    for (std::int64_t y = 0; y < h; ++y) {
      const T* rrow = rows.data() + y * ow;
      T* line = dst + y * w;
      for (std::int64_t o = 0; o < ow; ++o) {
        for (int k = 0; k < tw.width; ++k) line[tw.index[o * tw.width + k]] += tw.weight[o * tw.width + k] * rrow[o];
      }
    }
  }
}

template <class T>
Tensor<T> resample(const Tensor<T>& x, Taps<T> th, Taps<T> tw, const char* op) {
  const std::int64_t c = x.dim(0);
  Tensor<T> out(Shape{c, th.out, tw.out});
  resample_forward<T>(x.data(), c, th, tw, out.mutable_data());
  detail::attach<T>(op, out, {&x}, [x, th = std::move(th), tw = std::move(tw), c](std::span<const T> g) mutable {
    auto dx = detail::grad_of(x);
    if (!dx.empty()) resample_backward<T>(g, c, th, tw, dx);
  });
  return out;
}

std::int64_t reflect_index(std::int64_t i, std::int64_t n) {
  if (n == 1) return 0;
  const std::int64_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

template <class T>
T gelu_cdf(T x) {
  return T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

}  // namespace

std::pair<std::int64_t, std::int64_t> adaptive_bin(std::int64_t i, std::int64_t in, std::int64_t out) {
  const std::int64_t begin = (i * in) / out;
  const std::int64_t end = ((i + 1) * in + out - 1) / out;
  return {begin, end};
}

const std::vector<std::string>& differentiable_ops() {
  static const std::vector<std::string> ops = {
      "add",           "sub",          "mul",          "scale",         "add_scalar",
      "scale_by",      "sqrt",         "inv_sqrt",     "sum",           "mean",
      "reshape",       "transpose",    "concat",       "slice",         "matmul",
      "softmax",       "layer_norm",   "l2_normalize_rows", "gelu",     "sigmoid",
      "leaky_relu",    "clamp",        "conv2d_depthwise", "conv2d_pointwise", "add_channel_bias",
      "flip_spatial",  "adaptive_avg_pool", "resize_bilinear", "resize_bicubic", "pixel_unshuffle",
      "pixel_shuffle", "reflect_pad",  "crop",         "l1_loss",       "color_loss",
      "focal_loss",    "freq_loss",
  };
  return ops;
}

// ---------------------------------------------------------------- elementwise

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  auto o = out.mutable_data();
  auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = da[i] + db[i];
  detail::attach<T>("add", out, {&a, &b}, [a, b](std::span<const T> g) mutable {
    if (auto ga = detail::grad_of(a); !ga.empty())
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    if (auto gb = detail::grad_of(b); !gb.empty())
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
  });
  return out;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out(a.shape());
  auto o = out.mutable_data();
  auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = da[i] - db[i];
  detail::attach<T>("sub", out, {&a, &b}, [a, b](std::span<const T> g) mutable {
    if (auto ga = detail::grad_of(a); !ga.empty())
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    if (auto gb = detail::grad_of(b); !gb.empty())
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
  });
  return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  auto o = out.mutable_data();
  auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = da[i] * db[i];
  detail::attach<T>("mul", out, {&a, &b}, [a, b](std::span<const T> g) mutable {
    auto va = a.data(), vb = b.data();
    if (auto ga = detail::grad_of(a); !ga.empty())
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    if (auto gb = detail::grad_of(b); !gb.empty())
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
  });
  return out;
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  Tensor<T> out(a.shape());
  auto o = out.mutable_data();
  auto da = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = da[i] * factor;
  detail::attach<T>("scale", out, {&a}, [a, factor](std::span<const T> g) mutable {
    auto ga = detail::grad_of(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * factor;
  });
  return out;
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset) {
  Tensor<T> out(a.shape());
  auto o = out.mutable_data();
  auto da = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = da[i] + offset;
  detail::attach<T>("add_scalar", out, {&a}, [a](std::span<const T> g) mutable {
    auto ga = detail::grad_of(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
  });
  return out;
}

template <class T>
Tensor<T> scale_by(const Tensor<T>& a, const Tensor<T>& s) {
  require(s.numel() == 1, "scale_by: factor must have one element");
  const T factor = s.item();
  Tensor<T> out(a.shape());
  auto o = out.mutable_data();
  auto da = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = da[i] * factor;
  detail::attach<T>("scale_by", out, {&a, &s}, [a, s, factor](std::span<const T> g) mutable {
    if (auto ga = detail::grad_of(a); !ga.empty())
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
    if (auto gs = detail::grad_of(s); !gs.empty()) {
      auto va = a.data();
      T acc = 0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * va[i];
      gs[0] += acc;
    }
  });
  return out;
}

template <class T>
Tensor<T> sqrt(const Tensor<T>& a) {
  Tensor<T> out(a.shape());
  auto o = out.mutable_data();
  auto da = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::sqrt(da[i]);
  detail::attach<T>("sqrt", out, {&a}, [a, out](std::span<const T> g) mutable {
    auto ga = detail::grad_of(a);
    auto y = out.data();
    for (std::size_t i = 0; i < ga.size(); ++i) {
      if (y[i] > T(0)) ga[i] += g[i] * T(0.5) / y[i];
    }
  });
  return out;
}

template <class T>
Tensor<T> inv_sqrt(const Tensor<T>& a, T floor) {
  Tensor<T> out(a.shape());
  auto o = out.mutable_data();
  auto da = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = T(1) / std::sqrt(std::max(da[i], floor));
  detail::attach<T>("inv_sqrt", out, {&a}, [a, out, floor](std::span<const T> g) mutable {
    auto ga = detail::grad_of(a);
    auto va = a.data();
    auto y = out.data();
    for (std::size_t i = 0; i < ga.size(); ++i) {
      if (va[i] > floor) ga[i] += g[i] * T(-0.5) * y[i] * y[i] * y[i];
    }
  });
  return out;
}

template <class T>
Tensor<T> sum(const Tensor<T>& a) {
  T acc = 0;
  for (T v : a.data()) acc += v;
  Tensor<T> out = Tensor<T>::scalar(acc);
  detail::attach<T>("sum", out, {&a}, [a](std::span<const T> g) mutable {
    auto ga = detail::grad_of(a);
    for (auto& v : ga) v += g[0];
  });
  return out;
}

template <class T>
Tensor<T> mean(const Tensor<T>& a) {
  T acc = 0;
  for (T v : a.data()) acc += v;
  const T n = static_cast<T>(a.numel());
  Tensor<T> out = Tensor<T>::scalar(acc / n);
  detail::attach<T>("mean", out, {&a}, [a, n](std::span<const T> g) mutable {
    auto ga = detail::grad_of(a);
    for (auto& v : ga) v += g[0] / n;
  });
  return out;
}

// ------------------------------------------------------------------ structure

template <class T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  require(numel(shape) == a.numel(), "reshape: element count mismatch " + to_string(a.shape()) + " -> " +
                                         to_string(shape));
  Tensor<T> out(std::move(shape), a.data());
  detail::attach<T>("reshape", out, {&a}, [a](std::span<const T> g) mutable {
    auto ga = detail::grad_of(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
  });
  return out;
}

template <class T>
Tensor<T> transpose(const Tensor<T>& a) {
  require(a.ndim() == 2, "transpose: expected a 2-D tensor");
  const auto r = a.dim(0), c = a.dim(1);
  Tensor<T> out(Shape{c, r});
  MapM<T>(out.mutable_data().data(), c, r) = MapC<T>(a.data().data(), r, c).transpose();
  detail::attach<T>("transpose", out, {&a}, [a, r, c](std::span<const T> g) mutable {
    auto ga = detail::grad_of(a);
    if (!ga.empty()) MapM<T>(ga.data(), r, c) += MapC<T>(g.data(), c, r).transpose();
  });
  return out;
}

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts) {
  require(!parts.empty(), "concat: no operands");
  Shape shape = parts.front().shape();
  std::int64_t rows = 0;
  for (const auto& p : parts) {
    require(p.ndim() == static_cast<int>(shape.size()), "concat: rank mismatch");
    for (std::size_t a = 1; a < shape.size(); ++a) {
      require(p.shape()[a] == shape[a], "concat: trailing extents differ " + to_string(p.shape()) + " vs " +
                                            to_string(shape));
    }
    rows += p.dim(0);
  }
  shape[0] = rows;
  Tensor<T> out(shape);
  auto o = out.mutable_data();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), o.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += p.data().size();
  }
  // attach() takes a fixed list; handle the variadic case directly.
  detail::check_finite(out, "concat");
  Tape* tape = active_tape();
  bool track = false;
  for (const auto& p : parts) track = track || p.requires_grad();
  if (tape && track) {
    out.set_requires_grad(true);
    std::vector<const void*> ids;
    for (const auto& p : parts) ids.push_back(p.node().get());
    auto out_node = out.node();
    tape->record("concat", std::move(ids), out_node.get(), [out_node, parts]() mutable {
      if (out_node->grad.empty()) return;
      std::size_t off = 0;
      for (auto& p : parts) {
        const auto n = static_cast<std::size_t>(p.numel());
        if (auto gp = detail::grad_of(p); !gp.empty())
          for (std::size_t i = 0; i < n; ++i) gp[i] += out_node->grad[off + i];
        off += n;
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> slice(const Tensor<T>& a, std::int64_t begin, std::int64_t end) {
  require(begin >= 0 && end <= a.dim(0) && begin < end, "slice: invalid range");
  Shape shape = a.shape();
  shape[0] = end - begin;
  const std::int64_t inner = a.numel() / a.dim(0);
  Tensor<T> out(shape, a.data().subspan(static_cast<std::size_t>(begin * inner),
                                        static_cast<std::size_t>((end - begin) * inner)));
  detail::attach<T>("slice", out, {&a}, [a, begin, inner](std::span<const T> g) mutable {
    auto ga = detail::grad_of(a);
    if (ga.empty()) return;
    T* dst = ga.data() + begin * inner;
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  });
  return out;
}

// --------------------------------------------------------------------- linear

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.defined() && b.defined() && a.ndim() == 2 && b.ndim() == 2, "matmul: expected 2-D operands");
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(b.dim(0) == k, "matmul: inner dimensions differ " + to_string(a.shape()) + " x " + to_string(b.shape()));
  Tensor<T> out(Shape{m, n});
  MapM<T>(out.mutable_data().data(), m, n).noalias() = MapC<T>(a.data().data(), m, k) * MapC<T>(b.data().data(), k, n);
  detail::attach<T>("matmul", out, {&a, &b}, [a, b, m, k, n](std::span<const T> g) mutable {
    MapC<T> gm(g.data(), m, n);
    if (auto ga = detail::grad_of(a); !ga.empty())
      MapM<T>(ga.data(), m, k).noalias() += gm * MapC<T>(b.data().data(), k, n).transpose();
    if (auto gb = detail::grad_of(b); !gb.empty())
      MapM<T>(gb.data(), k, n).noalias() += MapC<T>(a.data().data(), m, k).transpose() * gm;
  });
  return out;
}

template <class T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  require_finite_input(x, "softmax");
  const int nd = x.ndim();
  if (axis < 0) axis += nd;
  require(axis >= 0 && axis < nd, "softmax: axis out of range");
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < nd; ++i) inner *= x.dim(i);
  const std::int64_t len = x.dim(axis);
  Tensor<T> out(x.shape());
  auto o = out.mutable_data();
  auto in = x.data();
  for (std::int64_t p = 0; p < outer; ++p) {
    for (std::int64_t q = 0; q < inner; ++q) {
      const std::int64_t base = p * len * inner + q;
      T mx = in[base];
      for (std::int64_t i = 1; i < len; ++i) mx = std::max(mx, in[base + i * inner]);
      T total = 0;
      for (std::int64_t i = 0; i < len; ++i) {
        const T e = std::exp(in[base + i * inner] - mx);
        o[base + i * inner] = e;
        total += e;
      }
      for (std::int64_t i = 0; i < len; ++i) o[base + i * inner] /= total;
    }
  }
  detail::attach<T>("softmax", out, {&x}, [x, out, outer, inner, len](std::span<const T> g) mutable {
    auto gx = detail::grad_of(x);
    if (gx.empty()) return;
    auto y = out.data();
    for (std::int64_t p = 0; p < outer; ++p) {
      for (std::int64_t q = 0; q < inner; ++q) {
        const std::int64_t base = p * len * inner + q;
        T dot = 0;
        for (std::int64_t i = 0; i < len; ++i) dot += g[base + i * inner] * y[base + i * inner];
        for (std::int64_t i = 0; i < len; ++i) {
          const auto idx = base + i * inner;
          gx[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
  return out;
}

template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const std::int64_t channels = x.dim(0);
  require(gamma.numel() == channels && beta.numel() == channels, "layer_norm: affine size must equal axis-0 extent");
  const std::int64_t inner = x.numel() / channels;
  std::vector<T> mu(static_cast<std::size_t>(inner), T(0));
  std::vector<T> rstd(static_cast<std::size_t>(inner), T(0));
  auto in = x.data();
  for (std::int64_t c = 0; c < channels; ++c) {
    const T* row = in.data() + c * inner;
    for (std::int64_t p = 0; p < inner; ++p) mu[p] += row[p];
  }
  for (auto& m : mu) m /= static_cast<T>(channels);
  for (std::int64_t c = 0; c < channels; ++c) {
    const T* row = in.data() + c * inner;
    for (std::int64_t p = 0; p < inner; ++p) {
      const T d = row[p] - mu[p];
      rstd[p] += d * d;
    }
  }
  for (auto& r : rstd) r = T(1) / std::sqrt(r / static_cast<T>(channels) + eps);
  Tensor<T> out(x.shape());
  auto o = out.mutable_data();
  auto gm = gamma.data(), bt = beta.data();
  for (std::int64_t c = 0; c < channels; ++c) {
    const T* row = in.data() + c * inner;
    T* dst = o.data() + c * inner;
    for (std::int64_t p = 0; p < inner; ++p) dst[p] = (row[p] - mu[p]) * rstd[p] * gm[c] + bt[c];
  }
  detail::attach<T>("layer_norm", out, {&x, &gamma, &beta},
                    [x, gamma, beta, mu = std::move(mu), rstd = std::move(rstd), channels, inner](
                        std::span<const T> g) mutable {
                      auto in = x.data();
                      auto gm = gamma.data();
                      auto ggamma = detail::grad_of(gamma);
                      auto gbeta = detail::grad_of(beta);
                      auto gx = detail::grad_of(x);
                      std::vector<T> mean_dxhat, mean_dxhat_xhat;
                      if (!gx.empty()) {
                        mean_dxhat.assign(static_cast<std::size_t>(inner), T(0));
                        mean_dxhat_xhat.assign(static_cast<std::size_t>(inner), T(0));
                      }
                      for (std::int64_t c = 0; c < channels; ++c) {
                        const T* row = in.data() + c * inner;
                        const T* grow = g.data() + c * inner;
                        T sg = 0, sgx = 0;
                        for (std::int64_t p = 0; p < inner; ++p) {
                          const T xhat = (row[p] - mu[p]) * rstd[p];
                          sg += grow[p];
                          sgx += grow[p] * xhat;
                          if (!gx.empty()) {
                            const T dxhat = grow[p] * gm[c];
                            mean_dxhat[p] += dxhat;
                            mean_dxhat_xhat[p] += dxhat * xhat;
                          }
                        }
                        if (!gbeta.empty()) gbeta[c] += sg;
                        if (!ggamma.empty()) ggamma[c] += sgx;
                      }
                      if (gx.empty()) return;
                      const T inv_c = T(1) / static_cast<T>(channels);
                      for (std::int64_t c = 0; c < channels; ++c) {
                        const T* row = in.data() + c * inner;
                        const T* grow = g.data() + c * inner;
                        T* dst = gx.data() + c * inner;
                        for (std::int64_t p = 0; p < inner; ++p) {
                          const T xhat = (row[p] - mu[p]) * rstd[p];
                          const T dxhat = grow[p] * gm[c];
                          dst[p] += rstd[p] * (dxhat - mean_dxhat[p] * inv_c - xhat * mean_dxhat_xhat[p] * inv_c);
                        }
                      }
                    });
  return out;
}

template <class T>
Tensor<T> l2_normalize_rows(const Tensor<T>& x, T eps) {
  require(x.ndim() == 2, "l2_normalize_rows: expected a 2-D tensor");
  const auto rows = x.dim(0), cols = x.dim(1);
  std::vector<T> norms(static_cast<std::size_t>(rows));
  Tensor<T> out(x.shape());
  auto in = x.data();
  auto o = out.mutable_data();
  for (std::int64_t r = 0; r < rows; ++r) {
    T ss = 0;
    for (std::int64_t j = 0; j < cols; ++j) ss += in[r * cols + j] * in[r * cols + j];
    norms[r] = std::max(std::sqrt(ss), eps);
    for (std::int64_t j = 0; j < cols; ++j) o[r * cols + j] = in[r * cols + j] / norms[r];
  }
  detail::attach<T>("l2_normalize_rows", out, {&x},
                    [x, out, norms = std::move(norms), rows, cols, eps](std::span<const T> g) mutable {
                      auto gx = detail::grad_of(x);
                      if (gx.empty()) return;
                      auto y = out.data();
                      for (std::int64_t r = 0; r < rows; ++r) {
                        const T n = norms[r];
                        if (n <= eps) {
                          for (std::int64_t j = 0; j < cols; ++j) gx[r * cols + j] += g[r * cols + j] / n;
                          continue;
                        }
                        T dot = 0;
                        for (std::int64_t j = 0; j < cols; ++j) dot += g[r * cols + j] * y[r * cols + j];
                        for (std::int64_t j = 0; j < cols; ++j)
                          gx[r * cols + j] += (g[r * cols + j] - y[r * cols + j] * dot) / n;
                      }
                    });
  return out;
}

// ---------------------------------------------------------------- activations

template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  auto o = out.mutable_data();
  auto in = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = in[i] * gelu_cdf(in[i]);
  detail::attach<T>("gelu", out, {&x}, [x](std::span<const T> g) mutable {
    auto gx = detail::grad_of(x);
    auto in = x.data();
    const T inv_sqrt_2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const T v = in[i];
      gx[i] += g[i] * (gelu_cdf(v) + v * inv_sqrt_2pi * std::exp(T(-0.5) * v * v));
    }
  });
  return out;
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  auto o = out.mutable_data();
  auto in = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = T(1) / (T(1) + std::exp(-in[i]));
  detail::attach<T>("sigmoid", out, {&x}, [x, out](std::span<const T> g) mutable {
    auto gx = detail::grad_of(x);
    auto y = out.data();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * y[i] * (T(1) - y[i]);
  });
  return out;
}

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  Tensor<T> out(x.shape());
  auto o = out.mutable_data();
  auto in = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = in[i] > T(0) ? in[i] : slope * in[i];
  detail::attach<T>("leaky_relu", out, {&x}, [x, slope](std::span<const T> g) mutable {
    auto gx = detail::grad_of(x);
    auto in = x.data();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += in[i] > T(0) ? g[i] : slope * g[i];
  });
  return out;
}

template <class T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  Tensor<T> out(x.shape());
  auto o = out.mutable_data();
  auto in = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::clamp(in[i], lo, hi);
  detail::attach<T>("clamp", out, {&x}, [x, lo, hi](std::span<const T> g) mutable {
    auto gx = detail::grad_of(x);
    auto in = x.data();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (in[i] >= lo && in[i] <= hi) gx[i] += g[i];
    }
  });
  return out;
}

// ------------------------------------------------------------- convolutions

template <class T>
Tensor<T> conv2d_depthwise(const Tensor<T>& x, const Tensor<T>& kernels) {
  require_chw(x, "conv2d_depthwise");
  require(kernels.ndim() == 3, "conv2d_depthwise: kernels must be C x k x k");
  const auto c = x.dim(0), h = x.dim(1), w = x.dim(2), k = kernels.dim(1);
  require(kernels.dim(0) == c, "conv2d_depthwise: kernel count " + std::to_string(kernels.dim(0)) +
                                   " does not match channel count " + std::to_string(c));
  require(kernels.dim(2) == k && k % 2 == 1, "conv2d_depthwise: kernels must be square with odd size");
  const std::int64_t r = k / 2;
  Tensor<T> out(x.shape());
  auto o = out.mutable_data();
  auto in = x.data();
  auto kv = kernels.data();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    const T* src = in.data() + ch * h * w;
    T* dst = o.data() + ch * h * w;
    for (std::int64_t a = 0; a < k; ++a) {
      const std::int64_t dy = a - r;
      const std::int64_t y0 = std::max<std::int64_t>(0, -dy), y1 = std::min(h, h - dy);
      for (std::int64_t b = 0; b < k; ++b) {
        const std::int64_t dx = b - r;
        const std::int64_t x0 = std::max<std::int64_t>(0, -dx), x1 = std::min(w, w - dx);
        const T kw = kv[(ch * k + a) * k + b];
        if (kw == T(0)) continue;
        for (std::int64_t y = y0; y < y1; ++y) {
          T* drow = dst + y * w;
          const T* srow = src + (y + dy) * w + dx;
          for (std::int64_t xx = x0; xx < x1; ++xx) drow[xx] += kw * srow[xx];
        }
      }
    }
  }
  detail::attach<T>("conv2d_depthwise", out, {&x, &kernels},
                    [x, kernels, c, h, w, k, r](std::span<const T> g) mutable {
                      auto gx = detail::grad_of(x);
                      auto gk = detail::grad_of(kernels);
                      auto in = x.data();
                      auto kv = kernels.data();
                      for (std::int64_t ch = 0; ch < c; ++ch) {
                        const T* src = in.data() + ch * h * w;
                        const T* gsrc = g.data() + ch * h * w;
                        for (std::int64_t a = 0; a < k; ++a) {
                          const std::int64_t dy = a - r;
                          const std::int64_t y0 = std::max<std::int64_t>(0, -dy), y1 = std::min(h, h - dy);
                          for (std::int64_t b = 0; b < k; ++b) {
                            const std::int64_t dx = b - r;
                            const std::int64_t x0 = std::max<std::int64_t>(0, -dx), x1 = std::min(w, w - dx);
                            const auto kidx = (ch * k + a) * k + b;
                            T acc = 0;
                            for (std::int64_t y = y0; y < y1; ++y) {
                              const T* grow = gsrc + y * w;
                              const T* srow = src + (y + dy) * w + dx;
                              if (!gk.empty())
                                for (std::int64_t xx = x0; xx < x1; ++xx) acc += grow[xx] * srow[xx];
                              if (!gx.empty()) {
                                T* drow = gx.data() + ch * h * w + (y + dy) * w + dx;
                                const T kw = kv[kidx];
                                for (std::int64_t xx = x0; xx < x1; ++xx) drow[xx] += kw * grow[xx];
                              }
                            }
                            if (!gk.empty()) gk[kidx] += acc;
                          }
                        }
                      }
                    });
  return out;
}

template <class T>
Tensor<T> conv2d_pointwise(const Tensor<T>& x, const Tensor<T>& weight) {
  require_chw(x, "conv2d_pointwise");
  require(weight.ndim() == 2, "conv2d_pointwise: weight must be C_out x C_in");
  const auto cin = x.dim(0), hw = x.dim(1) * x.dim(2), cout = weight.dim(0);
  require(weight.dim(1) == cin, "conv2d_pointwise: weight expects " + std::to_string(weight.dim(1)) +
                                    " input channels, got " + std::to_string(cin));
  Tensor<T> out(Shape{cout, x.dim(1), x.dim(2)});
  MapM<T>(out.mutable_data().data(), cout, hw).noalias() =
      MapC<T>(weight.data().data(), cout, cin) * MapC<T>(x.data().data(), cin, hw);
  detail::attach<T>("conv2d_pointwise", out, {&x, &weight},
                    [x, weight, cin, cout, hw](std::span<const T> g) mutable {
                      MapC<T> gm(g.data(), cout, hw);
                      if (auto gw = detail::grad_of(weight); !gw.empty())
                        MapM<T>(gw.data(), cout, cin).noalias() += gm * MapC<T>(x.data().data(), cin, hw).transpose();
                      if (auto gx = detail::grad_of(x); !gx.empty())
                        MapM<T>(gx.data(), cin, hw).noalias() +=
                            MapC<T>(weight.data().data(), cout, cin).transpose() * gm;
                    });
  return out;
}

template <class T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  require_chw(x, "add_channel_bias");
  const auto c = x.dim(0), hw = x.dim(1) * x.dim(2);
  require(bias.numel() == c, "add_channel_bias: bias size must equal channel count");
  Tensor<T> out(x.shape());
  auto o = out.mutable_data();
  auto in = x.data();
  auto bv = bias.data();
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t p = 0; p < hw; ++p) o[ch * hw + p] = in[ch * hw + p] + bv[ch];
  detail::attach<T>("add_channel_bias", out, {&x, &bias}, [x, bias, c, hw](std::span<const T> g) mutable {
    if (auto gx = detail::grad_of(x); !gx.empty())
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    if (auto gb = detail::grad_of(bias); !gb.empty()) {
      for (std::int64_t ch = 0; ch < c; ++ch) {
        T acc = 0;
        for (std::int64_t p = 0; p < hw; ++p) acc += g[ch * hw + p];
        gb[ch] += acc;
      }
    }
  });
  return out;
}

template <class T>
Tensor<T> flip_spatial(const Tensor<T>& k) {
  require(k.ndim() >= 2, "flip_spatial: need at least two axes");
  const auto kh = k.dim(-2), kw = k.dim(-1);
  const auto planes = k.numel() / (kh * kw);
  Tensor<T> out(k.shape());
  auto o = out.mutable_data();
  auto in = k.data();
  for (std::int64_t p = 0; p < planes; ++p)
    for (std::int64_t a = 0; a < kh; ++a)
      for (std::int64_t b = 0; b < kw; ++b)
        o[(p * kh + a) * kw + b] = in[(p * kh + (kh - 1 - a)) * kw + (kw - 1 - b)];
  detail::attach<T>("flip_spatial", out, {&k}, [k, planes, kh, kw](std::span<const T> g) mutable {
    auto gk = detail::grad_of(k);
    if (gk.empty()) return;
    for (std::int64_t p = 0; p < planes; ++p)
      for (std::int64_t a = 0; a < kh; ++a)
        for (std::int64_t b = 0; b < kw; ++b)
          gk[(p * kh + (kh - 1 - a)) * kw + (kw - 1 - b)] += g[(p * kh + a) * kw + b];
  });
  return out;
}

// ---------------------------------------------------------- spatial resampling

template <class T>
Tensor<T> adaptive_avg_pool(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w) {
  require_chw(x, "adaptive_avg_pool");
  const auto c = x.dim(0), h = x.dim(1), w = x.dim(2);
  require(out_h > 0 && out_w > 0 && out_h <= h && out_w <= w,
          "adaptive_avg_pool: output " + std::to_string(out_h) + "x" + std::to_string(out_w) +
              " larger than input " + std::to_string(h) + "x" + std::to_string(w));
  Tensor<T> out(Shape{c, out_h, out_w});
  auto o = out.mutable_data();
  auto in = x.data();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    const T* src = in.data() + ch * h * w;
    for (std::int64_t i = 0; i < out_h; ++i) {
      const auto [y0, y1] = adaptive_bin(i, h, out_h);
      for (std::int64_t j = 0; j < out_w; ++j) {
        const auto [x0, x1] = adaptive_bin(j, w, out_w);
        T acc = 0;
        for (std::int64_t y = y0; y < y1; ++y)
          for (std::int64_t xx = x0; xx < x1; ++xx) acc += src[y * w + xx];
        o[(ch * out_h + i) * out_w + j] = acc / static_cast<T>((y1 - y0) * (x1 - x0));
      }
    }
  }
  detail::attach<T>("adaptive_avg_pool", out, {&x}, [x, c, h, w, out_h, out_w](std::span<const T> g) mutable {
    auto gx = detail::grad_of(x);
    if (gx.empty()) return;
    for (std::int64_t ch = 0; ch < c; ++ch) {
      T* dst = gx.data() + ch * h * w;
      for (std::int64_t i = 0; i < out_h; ++i) {
        const auto [y0, y1] = adaptive_bin(i, h, out_h);
        for (std::int64_t j = 0; j < out_w; ++j) {
          const auto [x0, x1] = adaptive_bin(j, w, out_w);
          const T share = g[(ch * out_h + i) * out_w + j] / static_cast<T>((y1 - y0) * (x1 - x0));
          for (std::int64_t y = y0; y < y1; ++y)
            for (std::int64_t xx = x0; xx < x1; ++xx) dst[y * w + xx] += share;
        }
      }
    }
  });
  return out;
}

template <class T>
Tensor<T> resize_bilinear(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w) {
  require_chw(x, "resize_bilinear");
  require(out_h > 0 && out_w > 0, "resize_bilinear: target extents must be positive");
  return resample<T>(x, bilinear_taps<T>(x.dim(1), out_h), bilinear_taps<T>(x.dim(2), out_w), "resize_bilinear");
}

template <class T>
Tensor<T> resize_bicubic(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w) {
  require_chw(x, "resize_bicubic");
  require(out_h > 0 && out_w > 0, "resize_bicubic: target extents must be positive");
  return resample<T>(x, bicubic_taps<T>(x.dim(1), out_h), bicubic_taps<T>(x.dim(2), out_w), "resize_bicubic");
}

template <class T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, std::int64_t f) {
  require_chw(x, "pixel_unshuffle");
  const auto c = x.dim(0), h = x.dim(1), w = x.dim(2);
  require(f > 0 && h % f == 0 && w % f == 0,
          "pixel_unshuffle: extents " + std::to_string(h) + "x" + std::to_string(w) + " not divisible by " +
              std::to_string(f));
  const auto oh = h / f, ow = w / f;
  Tensor<T> out(Shape{c * f * f, oh, ow});
  auto o = out.mutable_data();
  auto in = x.data();
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t dy = 0; dy < f; ++dy)
      for (std::int64_t dx = 0; dx < f; ++dx) {
        T* dst = o.data() + ((ch * f + dy) * f + dx) * oh * ow;
        for (std::int64_t i = 0; i < oh; ++i)
          for (std::int64_t j = 0; j < ow; ++j) dst[i * ow + j] = in[(ch * h + i * f + dy) * w + j * f + dx];
      }
  detail::attach<T>("pixel_unshuffle", out, {&x}, [x, c, h, w, f, oh, ow](std::span<const T> g) mutable {
    auto gx = detail::grad_of(x);
    if (gx.empty()) return;
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t dy = 0; dy < f; ++dy)
        for (std::int64_t dx = 0; dx < f; ++dx) {
          const T* src = g.data() + ((ch * f + dy) * f + dx) * oh * ow;
          for (std::int64_t i = 0; i < oh; ++i)
            for (std::int64_t j = 0; j < ow; ++j) gx[(ch * h + i * f + dy) * w + j * f + dx] += src[i * ow + j];
        }
  });
  return out;
}

template <class T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, std::int64_t f) {
  require_chw(x, "pixel_shuffle");
  const auto cf = x.dim(0), h = x.dim(1), w = x.dim(2);
  require(f > 0 && cf % (f * f) == 0, "pixel_shuffle: channel count not divisible by factor^2");
  const auto c = cf / (f * f), oh = h * f, ow = w * f;
  Tensor<T> out(Shape{c, oh, ow});
  auto o = out.mutable_data();
  auto in = x.data();
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t dy = 0; dy < f; ++dy)
      for (std::int64_t dx = 0; dx < f; ++dx) {
        const T* src = in.data() + ((ch * f + dy) * f + dx) * h * w;
        for (std::int64_t i = 0; i < h; ++i)
          for (std::int64_t j = 0; j < w; ++j) o[(ch * oh + i * f + dy) * ow + j * f + dx] = src[i * w + j];
      }
  detail::attach<T>("pixel_shuffle", out, {&x}, [x, c, h, w, f, oh, ow](std::span<const T> g) mutable {
    auto gx = detail::grad_of(x);
    if (gx.empty()) return;
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t dy = 0; dy < f; ++dy)
        for (std::int64_t dx = 0; dx < f; ++dx) {
          T* dst = gx.data() + ((ch * f + dy) * f + dx) * h * w;
          for (std::int64_t i = 0; i < h; ++i)
            for (std::int64_t j = 0; j < w; ++j) dst[i * w + j] += g[(ch * oh + i * f + dy) * ow + j * f + dx];
        }
  });
  return out;
}

template <class T>
Tensor<T> reflect_pad(const Tensor<T>& x, std::int64_t bottom, std::int64_t right) {
  require_chw(x, "reflect_pad");
  require(bottom >= 0 && right >= 0, "reflect_pad: negative padding");
  const auto c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const auto oh = h + bottom, ow = w + right;
  Tensor<T> out(Shape{c, oh, ow});
  auto o = out.mutable_data();
  auto in = x.data();
  std::vector<std::int64_t> ys(static_cast<std::size_t>(oh)), xs(static_cast<std::size_t>(ow));
  for (std::int64_t i = 0; i < oh; ++i) ys[i] = reflect_index(i, h);
  for (std::int64_t j = 0; j < ow; ++j) xs[j] = reflect_index(j, w);
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t i = 0; i < oh; ++i)
      for (std::int64_t j = 0; j < ow; ++j) o[(ch * oh + i) * ow + j] = in[(ch * h + ys[i]) * w + xs[j]];
  detail::attach<T>("reflect_pad", out, {&x},
                    [x, c, h, w, oh, ow, ys = std::move(ys), xs = std::move(xs)](std::span<const T> g) mutable {
                      auto gx = detail::grad_of(x);
                      if (gx.empty()) return;
                      for (std::int64_t ch = 0; ch < c; ++ch)
                        for (std::int64_t i = 0; i < oh; ++i)
                          for (std::int64_t j = 0; j < ow; ++j)
                            gx[(ch * h + ys[i]) * w + xs[j]] += g[(ch * oh + i) * ow + j];
                    });
  return out;
}

template <class T>
Tensor<T> crop(const Tensor<T>& x, std::int64_t top, std::int64_t left, std::int64_t oh, std::int64_t ow) {
  require_chw(x, "crop");
  const auto c = x.dim(0), h = x.dim(1), w = x.dim(2);
  require(top >= 0 && left >= 0 && oh > 0 && ow > 0 && top + oh <= h && left + ow <= w, "crop: window out of bounds");
  Tensor<T> out(Shape{c, oh, ow});
  auto o = out.mutable_data();
  auto in = x.data();
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t i = 0; i < oh; ++i)
      std::copy_n(in.data() + (ch * h + top + i) * w + left, ow, o.data() + (ch * oh + i) * ow);
  detail::attach<T>("crop", out, {&x}, [x, c, h, w, top, left, oh, ow](std::span<const T> g) mutable {
    auto gx = detail::grad_of(x);
    if (gx.empty()) return;
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t i = 0; i < oh; ++i)
        for (std::int64_t j = 0; j < ow; ++j) gx[(ch * h + top + i) * w + left + j] += g[(ch * oh + i) * ow + j];
  });
  return out;
}

#define DOCSTORMER_INSTANTIATE_OPS(T)                                                          \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> scale(const Tensor<T>&, T);                                               \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                          \
  template Tensor<T> scale_by(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> sqrt(const Tensor<T>&);                                                   \
  template Tensor<T> inv_sqrt(const Tensor<T>&, T);                                            \
  template Tensor<T> sum(const Tensor<T>&);                                                    \
  template Tensor<T> mean(const Tensor<T>&);                                                   \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                         \
  template Tensor<T> transpose(const Tensor<T>&);                                              \
  template Tensor<T> concat(const std::vector<Tensor<T>>&);                                    \
  template Tensor<T> slice(const Tensor<T>&, std::int64_t, std::int64_t);                      \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> softmax(const Tensor<T>&, int);                                           \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);      \
  template Tensor<T> l2_normalize_rows(const Tensor<T>&, T);                                   \
  template Tensor<T> gelu(const Tensor<T>&);                                                   \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                          \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                                            \
  template Tensor<T> conv2d_depthwise(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> conv2d_pointwise(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> add_channel_bias(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> flip_spatial(const Tensor<T>&);                                           \
  template Tensor<T> adaptive_avg_pool(const Tensor<T>&, std::int64_t, std::int64_t);          \
  template Tensor<T> resize_bilinear(const Tensor<T>&, std::int64_t, std::int64_t);            \
  template Tensor<T> resize_bicubic(const Tensor<T>&, std::int64_t, std::int64_t);             \
  template Tensor<T> pixel_unshuffle(const Tensor<T>&, std::int64_t);                          \
  template Tensor<T> pixel_shuffle(const Tensor<T>&, std::int64_t);                            \
  template Tensor<T> reflect_pad(const Tensor<T>&, std::int64_t, std::int64_t);                \
  template Tensor<T> crop(const Tensor<T>&, std::int64_t, std::int64_t, std::int64_t, std::int64_t);

DOCSTORMER_INSTANTIATE_OPS(float)
DOCSTORMER_INSTANTIATE_OPS(double)

}  // namespace docstormer
