#pragma once

#include <array>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "docstormer/blocks.hpp"

namespace docstormer {

inline constexpr int kDegradationTypes = 3;  // shadow, wrinkle, bleed
inline constexpr int kLevels = 4;
inline constexpr std::array<int, kLevels> kScaleFactors = {1, 2, 4, 8};

struct DpNetConfig {
  std::array<int, kLevels> blocks = {1, 1, 1, 2};
  std::array<int, kLevels> heads = {1, 1, 1, 2};
  std::array<int, kLevels> channels = {18, 36, 54, 72};
  int degradation_types = kDegradationTypes;
  double ffn_expansion = 2.66;
  void validate() const;
};

struct DrNetConfig {
  std::array<int, kLevels> blocks = {2, 2, 2, 3};
  std::array<int, kLevels> heads = {1, 2, 2, 3};
  std::array<int, kLevels> channels = {36, 72, 108, 144};
  /// Square ASTM pool side for levels 2..4; level 1 has no spatial attention.
  std::array<int, kLevels - 1> pool = {32, 16, 8};
  double ffn_expansion = 2.66;
  void validate() const;
};

struct DiscriminatorConfig {
  std::vector<int> widths = {64, 128, 256, 512};  // followed by a 1-channel stage
  int input_size = 256;
  double slope = 0.2;
  void validate() const;
};

struct ModelConfig {
  std::string preset = "paper";
  DpNetConfig dp;
  DrNetConfig dr;
  DiscriminatorConfig disc;
};

/// Named configurations: "tiny" (tests), "small" (desk-scale runs), "paper".
ModelConfig model_preset(std::string_view name);

/// Decoder features of the perception network at 1/1, 1/2, 1/4, 1/8 scale.
template <class T>
struct PerceptiveRepresentation {
  std::array<Tensor<T>, kLevels> features;  // index i holds scale 1/kScaleFactors[i]
};

/// 1x1 projection of the channel concatenation of its inputs.
template <class T>
class FeatureFusion {
 public:
  FeatureFusion(std::vector<int> in_channels, int out_channels, ParameterSet<T>& params, const std::string& prefix,
                Rng& rng);
  Tensor<T> forward(const std::vector<Tensor<T>>& parts) const;
  const Tensor<T>& weight() const { return weight_; }

 private:
  std::vector<int> in_channels_;
  Tensor<T> weight_;
};

/// Concatenate encoder, decoder and perceptive features along channels and
/// project with `weight` [C_out x (C_enc + C_dec + C_f)].
template <class T>
Tensor<T> feature_fuse(const Tensor<T>& enc, const Tensor<T>& dec, const Tensor<T>& f_l, const Tensor<T>& weight);

/// Degradation perception U-Net. Predicts per-type prior maps and exposes the
/// decoder trunk features as the perceptive representation.
template <class T>
class DpNet {
 public:
  struct Output {
    Tensor<T> priors;  // [T x H x W], sigmoid probabilities
    PerceptiveRepresentation<T> rep;
  };

  DpNet(const DpNetConfig& cfg, Rng& rng, const std::string& prefix = "dp");
  Output forward(const Tensor<T>& image) const;

  const DpNetConfig& config() const { return cfg_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

 private:
  DpNetConfig cfg_;
  ParameterSet<T> params_;
  Tensor<T> embed_pw_, embed_dw_;
  std::array<std::vector<DualBlock<T>>, kLevels> encoder_;
  std::array<std::vector<DualBlock<T>>, kLevels - 1> decoder_;
  std::vector<Downsample<T>> down_;
  std::vector<Upsample<T>> up_;
  std::vector<FeatureFusion<T>> fuse_;
  Tensor<T> head_pw_, head_bias_;
};

/// Restoration U-Net of Dual Transformer Blocks guided by the perceptive
/// representation. Predicts a residual added to the input, then clamps.
template <class T>
class DrNet {
 public:
  DrNet(const DrNetConfig& cfg, const DpNetConfig& dp_cfg, Rng& rng, const std::string& prefix = "dr");
  Tensor<T> forward(const Tensor<T>& image, const PerceptiveRepresentation<T>& rep,
                    std::vector<AttentionStats>* stats = nullptr) const;

  /// Zeroes the final projection: the network becomes clamp(input).
  void zero_final_projection();
  /// Additionally zeroes every residual-branch output projection.
  void zero_output_projections();

  const DrNetConfig& config() const { return cfg_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

 private:
  DrNetConfig cfg_;
  ParameterSet<T> params_;
  Tensor<T> embed_pw_, embed_dw_;
  std::array<std::vector<DualBlock<T>>, kLevels> encoder_;
  std::array<std::vector<DualBlock<T>>, kLevels - 1> decoder_;
  std::vector<Downsample<T>> down_;
  std::vector<Upsample<T>> up_;
  std::unique_ptr<FeatureFusion<T>> latent_fuse_;
  std::vector<FeatureFusion<T>> fuse_;
  Tensor<T> out_pw_;
};

/// Perceive-then-restore composite.
template <class T>
class DocStormer {
 public:
  struct Output {
    Tensor<T> enhanced;  // [3 x H x W] in [0, 1]
    Tensor<T> priors;    // [T x H x W]
  };

  explicit DocStormer(const ModelConfig& cfg, std::uint64_t seed = 0);

  /// Accepts any extents; pads reflectively to a multiple of 8 and crops back.
  Output forward(const Tensor<T>& image) const;

  DpNet<T>& dp() { return *dp_; }
  DrNet<T>& dr() { return *dr_; }
  const DpNet<T>& dp() const { return *dp_; }
  const DrNet<T>& dr() const { return *dr_; }
  /// All parameters, DP-Net first. Handles alias the subnet parameters.
  ParameterSet<T> params() const;
  const ModelConfig& config() const { return cfg_; }
  void zero_output_projections() { dr_->zero_output_projections(); }

 private:
  ModelConfig cfg_;
  std::unique_ptr<DpNet<T>> dp_;
  std::unique_ptr<DrNet<T>> dr_;
};

/// A scalar-valued image critic. `input_gradient` must return d score / d
/// image built from recorded operations, so that penalties on it can be
/// differentiated with respect to the critic's own parameters.
template <class T>
class Critic {
 public:
  virtual ~Critic() = default;
  virtual Tensor<T> score(const Tensor<T>& image) const = 0;
  virtual Tensor<T> input_gradient(const Tensor<T>& image) const;
};

/// WGAN critic: strided stages (depthwise 3x3, 2x space-to-depth, 1x1 + bias)
/// with leaky ReLU, no normalization, mean-pooled to one unbounded score.
template <class T>
class Discriminator final : public Critic<T> {
 public:
  Discriminator(const DiscriminatorConfig& cfg, Rng& rng, const std::string& prefix = "disc");

  Tensor<T> score(const Tensor<T>& image) const override;
  Tensor<T> input_gradient(const Tensor<T>& image) const override;

  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }
  const DiscriminatorConfig& config() const { return cfg_; }
  void zero_weights();

 private:
  struct Stage {
    Tensor<T> dw, pw, bias;
  };
  void check_input(const Tensor<T>& image) const;

  DiscriminatorConfig cfg_;
  ParameterSet<T> params_;
  std::vector<Stage> stages_;
};

}  // namespace docstormer
