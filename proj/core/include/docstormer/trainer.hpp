#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "docstormer/degrade.hpp"
#include "docstormer/losses.hpp"

namespace docstormer {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-4;
  double eps = 1e-8;
  void validate() const;
};

/// One decoupled-weight-decay Adam update on raw buffers. `step` is the
/// 1-based update count used for bias correction.
template <class T>
void adam_step(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v, std::int64_t step,
               double lr, const AdamConfig& cfg);

template <class T>
class Adam {
 public:
  Adam(const ParameterSet<T>& params, AdamConfig cfg = {});
  /// Applies one update using the accumulated grads (missing grads count as zero).
  void step(double lr);
  std::int64_t steps() const { return t_; }

 private:
  ParameterSet<T> params_;
  AdamConfig cfg_;
  std::vector<std::vector<T>> m_, v_;
  std::int64_t t_ = 0;
};

struct LrSchedule {
  double initial = 3e-4;
  double final = 1e-6;
  std::int64_t total_steps = 1;
};

/// final + (initial - final) (1 + cos(pi step / total)) / 2.
double cosine_lr(std::int64_t step, const LrSchedule& schedule);

struct TrainStage {
  std::int64_t patch = 192;
  int batch = 24;
};

/// Patch / batch pairs switched at fractions of the total step count.
struct ProgressiveSchedule {
  std::vector<TrainStage> stages = {{192, 24}, {256, 16}, {384, 8}};
  std::vector<double> switch_fractions = {1.0 / 3.0, 1.0 / 2.0};
  void validate() const;
  TrainStage at(std::int64_t step, std::int64_t total_steps) const;
  /// Absolute switch steps for a run of `total_steps`.
  std::vector<std::int64_t> switch_steps(std::int64_t total_steps) const;
};

struct TrainConfig {
  std::int64_t steps = 1000;
  LrSchedule lr;  // total_steps is overwritten with `steps`
  AdamConfig adam;
  ProgressiveSchedule progressive;
  std::optional<TrainStage> fixed_stage;  // overrides the progressive schedule
  bool flips = true;
  std::uint64_t seed = 0;
  LossWeights weights;
  FocalParams focal;
  // adversarial training
  int n_critic = 5;
  GpConfig gp;
  double critic_lr = 1e-4;
  AdamConfig critic_adam{0.5, 0.9, 0.0, 1e-8};
  int log_every = 0;  // 0 disables progress lines
  std::function<void(const std::string&)> log;
};

struct CurveRow {
  std::int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

void write_loss_curve(const std::filesystem::path& path, const std::vector<CurveRow>& curve);

struct TrainingPair {
  Tensor<float> degraded, ground_truth, priors;
};

std::vector<TrainingPair> to_pairs(const std::vector<Sample>& samples);
std::vector<TrainingPair> to_pairs(const std::vector<SamplePair>& samples);

/// Random patch (clamped to the image) with optional flips, same window on
/// every tensor of the pair.
TrainingPair sample_patch(const TrainingPair& pair, std::int64_t patch, bool flips, Rng& rng);

/// Minimizes the prior loss of the perception network alone.
std::vector<CurveRow> train_dp_net(DpNet<float>& net, const std::vector<TrainingPair>& data, const TrainConfig& cfg);

/// Minimizes the joint restoration objective over both subnetworks.
std::vector<CurveRow> train_docstormer(DocStormer<float>& model, const std::vector<TrainingPair>& data,
                                       const TrainConfig& cfg);

struct GanCurveRow {
  std::int64_t step = 0;
  double generator_loss = 0.0;
  double critic_loss = 0.0;
  double gradient_penalty = 0.0;
  double lr = 0.0;
};

/// CSV with columns step,generator_loss,critic_loss,gradient_penalty,lr.
void write_gan_curve(const std::filesystem::path& path, const std::vector<GanCurveRow>& curve);

/// Alternates n_critic critic updates with one generator update.
std::vector<GanCurveRow> train_docstormer_gan(DocStormer<float>& model, Discriminator<float>& critic,
                                              const std::vector<TrainingPair>& data,
                                              const std::vector<Tensor<float>>& clean_pool, const TrainConfig& cfg);

struct CriticStepRecord {
  double surrogate = 0.0;  // mean(real) - mean(fake) before the update
  double gradient_penalty = 0.0;
  double loss = 0.0;
};

/// Critic-only training against fixed fake samples (generator frozen).
std::vector<CriticStepRecord> train_critic(Discriminator<float>& critic, const std::vector<Tensor<float>>& real,
                                           const std::vector<Tensor<float>>& fake, std::int64_t steps, int batch,
                                           const TrainConfig& cfg);

/// Fits an image into the critic's square input: centre crop to a square,
/// then bilinear resize (differentiable).
Tensor<float> to_critic_input(const Tensor<float>& image, std::int64_t size);

}  // namespace docstormer
