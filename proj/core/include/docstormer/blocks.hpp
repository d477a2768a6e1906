#pragma once

#include <optional>
#include <string>
#include <vector>

#include "docstormer/ops.hpp"
#include "docstormer/params.hpp"

// Dual Transformer Block: spectrum (channel) attention, adaptive spatial
// attention on a fixed pooled grid, and the gated depthwise feed-forward
// network. Plus the pixel-(un)shuffle scale transitions of the U-Nets.

namespace docstormer {

struct AstmConfig {
  int channels = 0;
  int heads = 1;
  int pool_h = 0;
  int pool_w = 0;
  void validate() const;
};

struct StmConfig {
  int channels = 0;
  int heads = 1;
  void validate() const;
};

struct DualBlockConfig {
  StmConfig stm;
  std::optional<AstmConfig> astm;  // level-1 blocks run without spatial attention
  double ffn_expansion = 2.66;
  double d_k_init = 1.0;
  void validate() const;
};

/// Shape and storage of one attention matrix, captured during a forward pass.
struct AttentionStats {
  Shape shape;
  std::size_t bytes = 0;
};

/// softmax(q k^T * scale) v over token-major matrices q, k: [N x d], v: [N x e].
/// `scale` is a one-element tensor.
template <class T>
Tensor<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, const Tensor<T>& scale,
                               Tensor<T>* attention = nullptr);

/// Floor applied to the learnable d_k before taking 1/sqrt(d_k).
inline constexpr double kMinDk = 1e-4;

/// Spectrum Token Mixture: channel-to-channel attention, C/heads x C/heads per
/// head regardless of spatial size.
template <class T>
class Stm {
 public:
  Stm(const StmConfig& cfg, double d_k_init, ParameterSet<T>& params, const std::string& prefix, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, std::vector<AttentionStats>* stats = nullptr,
                    std::vector<Tensor<T>>* attention = nullptr) const;
  void zero_output_projection();
  const StmConfig& config() const { return cfg_; }

 private:
  StmConfig cfg_;
  Tensor<T> qkv_pw_, qkv_dw_, d_k_, proj_, ln_gamma_, ln_beta_;
};

/// Adaptive Spatial Token Mixture: attention among pool_h*pool_w tokens of an
/// adaptively pooled map, projected, upsampled, normalized and added back.
template <class T>
class Astm {
 public:
  Astm(const AstmConfig& cfg, double d_k_init, ParameterSet<T>& params, const std::string& prefix, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, std::vector<AttentionStats>* stats = nullptr) const;
  void zero_output_projection();
  const AstmConfig& config() const { return cfg_; }

 private:
  AstmConfig cfg_;
  Tensor<T> qkv_pw_, qkv_dw_, d_k_, proj_, ln_gamma_, ln_beta_;
};

/// Gated-Dconv feed-forward network with residual.
template <class T>
class Gdfn {
 public:
  Gdfn(int channels, double expansion, ParameterSet<T>& params, const std::string& prefix, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) const;
  void zero_output_projection();
  void zero_gate();
  int hidden() const { return hidden_; }

 private:
  int hidden_;
  Tensor<T> in_pw_, in_dw_, out_pw_;
};

template <class T>
class DualBlock {
 public:
  DualBlock(const DualBlockConfig& cfg, ParameterSet<T>& params, const std::string& prefix, Rng& rng);

  /// STM -> ASTM (when configured) -> GDFN; shape-preserving.
  Tensor<T> forward(const Tensor<T>& x, std::vector<AttentionStats>* stats = nullptr) const;
  void zero_output_projections();
  bool has_astm() const { return astm_.has_value(); }

 private:
  Stm<T> stm_;
  std::optional<Astm<T>> astm_;
  Gdfn<T> ffn_;
};

/// Pixel-unshuffle by 2 followed by a 1x1 projection to `out_channels`.
template <class T>
class Downsample {
 public:
  Downsample(int in_channels, int out_channels, ParameterSet<T>& params, const std::string& prefix, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;

 private:
  Tensor<T> proj_;
};

/// 1x1 projection to 4*out_channels followed by pixel-shuffle by 2.
template <class T>
class Upsample {
 public:
  Upsample(int in_channels, int out_channels, ParameterSet<T>& params, const std::string& prefix, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;

 private:
  Tensor<T> proj_;
};

}  // namespace docstormer
