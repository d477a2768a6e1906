#pragma once

#include <array>
#include <vector>

#include "docstormer/networks.hpp"

namespace docstormer {

/// Per degradation type: loss weight, focusing exponent and class balance.
struct FocalTypeParams {
  double weight = 1.0;
  double gamma = 2.0;
  double alpha = 1.0;
};

struct FocalParams {
  // shadow, wrinkle, bleed
  std::array<FocalTypeParams, kDegradationTypes> types = {{{1.0, 2.0, 0.72}, {2.0, 2.0, 0.96}, {3.0, 2.0, 0.94}}};
  /// Continuous ground-truth priors are binarized at this level before the
  /// focal term, which only accepts {0, 1} targets.
  double target_threshold = 0.5;
  void validate() const;
};

struct LossWeights {
  double freq = 0.1;
  double color = 1.0;
  double l1 = 1.0;
  double dp = 1.0;
  double ds = 0.001;  // weight of the restoration objective under adversarial training
  double adversarial = 1.0;
  void validate() const;
};

struct GpConfig {
  double lambda = 10.0;
};

inline constexpr double kFocalEps = 1e-7;

/// Mean absolute difference.
template <class T> Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// Mean over pixels of 1 - cos(angle between RGB vectors); pixels where either
/// vector is zero contribute 0.
template <class T> Tensor<T> color_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// Mean absolute difference of the real and imaginary parts of the
/// unnormalized per-channel 2-D DFTs.
template <class T> Tensor<T> freq_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// Mean of alpha_t (1 - p_t)^gamma (-log p_t) with p clamped to
/// [eps, 1 - eps]. alpha = 1 disables class balancing (alpha_t = 1).
template <class T>
Tensor<T> focal_loss(const Tensor<T>& prob, const Tensor<T>& target, double gamma, double alpha);

/// Weighted sum of per-type focal losses over the T prior channels.
template <class T>
Tensor<T> l_dp(const Tensor<T>& priors_pred, const Tensor<T>& priors_gt, const FocalParams& params = {});

/// Batch-mean restoration objective for one sample.
template <class T>
Tensor<T> l_ds(const Tensor<T>& pred, const Tensor<T>& gt, const Tensor<T>& priors_pred, const Tensor<T>& priors_gt,
               const LossWeights& w = {}, const FocalParams& focal = {});

/// mean((|grad_x D(x_hat)| - 1)^2) over pairs, x_hat = u real + (1 - u) fake,
/// u ~ U(0, 1) per pair.
template <class T>
Tensor<T> gradient_penalty(const Critic<T>& critic, const std::vector<Tensor<T>>& real,
                           const std::vector<Tensor<T>>& fake, Rng& rng);

/// mean(fake) - mean(real) + lambda * gp.
template <class T>
Tensor<T> wgan_d_loss(const Tensor<T>& real_scores, const Tensor<T>& fake_scores, const Tensor<T>& gp, double lambda);

/// -mean(fake).
template <class T> Tensor<T> wgan_g_loss(const Tensor<T>& fake_scores);

/// w.ds * l_ds + w.adversarial * adversarial.
template <class T>
Tensor<T> l_ds_gan(const Tensor<T>& l_ds_value, const Tensor<T>& adversarial, const LossWeights& w = {});

/// Stacks scalar scores into a one-dimensional tensor (differentiable).
template <class T> Tensor<T> stack_scores(const std::vector<Tensor<T>>& scores);

}  // namespace docstormer
