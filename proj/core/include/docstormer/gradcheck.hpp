#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "docstormer/tape.hpp"
#include "docstormer/tensor.hpp"

namespace docstormer {

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every element.
template <class T>
Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x, T h) {
  Tensor<T> probe = x.detach();
  Tensor<T> grad(x.shape());
  auto values = probe.mutable_data();
  auto out = grad.mutable_data();
  TapeScope no_tape(nullptr);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const T saved = values[i];
    values[i] = saved + h;
    const T up = f(probe);
    values[i] = saved - h;
    const T down = f(probe);
    values[i] = saved;
    out[i] = (up - down) / (T(2) * h);
  }
  return grad;
}

struct GradCheckReport {
  double max_rel_error = 0.0;  // max |analytic - numeric| / max(|analytic|, |numeric|), max over all checked
  double max_abs_error = 0.0;
  std::size_t checked = 0;
};

/// Error of `analytic` against `numeric`, relative to the larger of the two
/// gradients' infinity norms.
inline GradCheckReport compare_gradients(std::span<const double> analytic, std::span<const double> numeric) {
  GradCheckReport report;
  double scale = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]));
  }
  report.max_abs_error = worst;
  report.max_rel_error = scale > 0.0 ? worst / scale : worst;
  report.checked = analytic.size();
  return report;
}

template <class T>
using LossBuilder = std::function<Tensor<T>(const std::vector<Tensor<T>>&)>;

/// Compares tape gradients of `build(inputs)` with central differences
/// (fourth order for types narrower than double).
/// When `max_samples` is nonzero only that many random coordinates per input
/// are probed.
/// With `in_place` the inputs themselves are differentiated (module
/// parameters captured by `build`); otherwise detached copies are.
template <class T>
GradCheckReport check_gradients(const LossBuilder<T>& build, const std::vector<Tensor<T>>& inputs, T h,
                                std::size_t max_samples = 0, std::uint64_t seed = 0, bool in_place = false) {
  std::vector<Tensor<T>> leaves;
  leaves.reserve(inputs.size());
  for (const auto& in : inputs) {
    if (in_place) {
      Tensor<T> leaf = in;
      leaf.set_requires_grad(true);
      leaf.zero_grad();
      leaves.push_back(leaf);
    } else {
      leaves.push_back(in.detach().set_requires_grad(true));
    }
  }
  {
    Tape tape;
    TapeScope scope(&tape);
    Tensor<T> loss = build(leaves);
    backward(loss, tape);
  }
  std::mt19937_64 rng(seed);
  std::vector<double> analytic, numeric;
  TapeScope no_tape(nullptr);
  for (auto& leaf : leaves) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(leaf.numel()));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (max_samples && idx.size() > max_samples) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_samples);
    }
    const bool has = leaf.has_grad();
    auto values = leaf.mutable_data();
    for (auto i : idx) {
      const T saved = values[i];
      auto eval = [&](T offset) {
        values[i] = saved + offset;
        return static_cast<double>(build(leaves).item());
      };
      // Divide by the step actually taken after rounding to T.
      const double step = (static_cast<double>(T(saved + h)) - static_cast<double>(T(saved - h))) / 2.0;
      double d = (eval(h) - eval(-h)) / (2.0 * step);
      if constexpr (sizeof(T) < sizeof(double)) {
        // Single precision needs a large step to beat rounding noise, so
        // cancel the leading truncation term with a fourth-order stencil.
        const double step2 = (static_cast<double>(T(saved + 2 * h)) - static_cast<double>(T(saved - 2 * h))) / 4.0;
        const double d2 = (eval(2 * h) - eval(-2 * h)) / (4.0 * step2);
        d = (4.0 * d - d2) / 3.0;
      }
      values[i] = saved;
      numeric.push_back(d);
      analytic.push_back(has ? static_cast<double>(leaf.grad()[i]) : 0.0);
    }
  }
  return compare_gradients(analytic, numeric);
}

}  // namespace docstormer
