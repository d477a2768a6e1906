#include "docstormer/networks.hpp"

#include <numeric>
#include <stdexcept>

namespace docstormer {

namespace {

void require_config(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

void check_divisible_by_8(std::int64_t h, std::int64_t w, const char* who) {
  if (h % 8 != 0 || w % 8 != 0) {
    throw ShapeError(std::string(who) + ": extents " + std::to_string(h) + "x" + std::to_string(w) +
                     " must be divisible by 8 (the composite model pads automatically)");
  }
}

template <class T>
Tensor<T> run_blocks(const std::vector<DualBlock<T>>& blocks, Tensor<T> x, std::vector<AttentionStats>* stats) {
  for (const auto& b : blocks) x = b.forward(x, stats);
  return x;
}

DualBlockConfig block_config(int channels, int heads, double expansion, int pool) {
  DualBlockConfig cfg;
  cfg.stm = StmConfig{channels, heads};
  if (pool > 0) cfg.astm = AstmConfig{channels, heads, pool, pool};
  cfg.ffn_expansion = expansion;
  return cfg;
}

template <class T>
void zero(Tensor<T>& t) {
  for (auto& v : t.mutable_data()) v = T(0);
}

}  // namespace

void DpNetConfig::validate() const {
  for (int l = 0; l < kLevels; ++l) {
    require_config(blocks[l] >= 1, "DP-Net needs at least one block per level");
    require_config(heads[l] >= 1 && channels[l] % heads[l] == 0, "DP-Net channels must be divisible by heads");
  }
  require_config(degradation_types >= 1, "DP-Net needs at least one degradation type");
}

void DrNetConfig::validate() const {
  for (int l = 0; l < kLevels; ++l) {
    require_config(blocks[l] >= 1, "DR-Net needs at least one block per level");
    require_config(heads[l] >= 1 && channels[l] % heads[l] == 0, "DR-Net channels must be divisible by heads");
  }
  for (int p : pool) require_config(p >= 1, "DR-Net pool sizes must be positive");
}

void DiscriminatorConfig::validate() const {
  require_config(!widths.empty(), "discriminator needs at least one stage width");
  for (int w : widths) require_config(w >= 1, "discriminator widths must be positive");
  const int reduction = 1 << (widths.size() + 1);
  require_config(input_size > 0 && input_size % reduction == 0, "discriminator input not divisible by its stride");
}

ModelConfig model_preset(std::string_view name) {
  ModelConfig cfg;
  cfg.preset = std::string(name);
  if (name == "paper") return cfg;
  if (name == "tiny") {
    cfg.dp.blocks = {1, 1, 1, 1};
    cfg.dp.heads = {1, 1, 1, 2};
    cfg.dp.channels = {4, 8, 12, 16};
    cfg.dr.blocks = {1, 1, 1, 1};
    cfg.dr.heads = {1, 1, 2, 2};
    cfg.dr.channels = {8, 16, 24, 32};
    cfg.dr.pool = {8, 4, 2};
    cfg.disc.widths = {8, 16, 32, 64};
    cfg.disc.input_size = 64;
    return cfg;
  }
  if (name == "small") {
    cfg.dp.blocks = {1, 1, 1, 2};
    cfg.dp.heads = {1, 1, 1, 2};
    cfg.dp.channels = {4, 8, 12, 16};
    cfg.dr.blocks = {2, 2, 2, 3};
    cfg.dr.heads = {1, 2, 2, 2};
    cfg.dr.channels = {8, 16, 24, 32};
    cfg.dr.pool = {32, 16, 8};
    cfg.disc.widths = {32, 64, 128, 256};
    return cfg;
  }
  throw std::invalid_argument("unknown model preset '" + std::string(name) + "' (expected tiny, small or paper)");
}

// ------------------------------------------------------------- FeatureFusion

template <class T>
FeatureFusion<T>::FeatureFusion(std::vector<int> in_channels, int out_channels, ParameterSet<T>& params,
                                const std::string& prefix, Rng& rng)
    : in_channels_(std::move(in_channels)) {
  const std::int64_t fan = std::accumulate(in_channels_.begin(), in_channels_.end(), std::int64_t{0});
  weight_ = params.add(prefix + ".proj", init::fan_in_uniform<T>(Shape{out_channels, fan}, fan, rng));
}

template <class T>
Tensor<T> FeatureFusion<T>::forward(const std::vector<Tensor<T>>& parts) const {
  if (parts.size() != in_channels_.size()) throw ShapeError("feature fusion: wrong number of inputs");
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].dim(0) != in_channels_[i]) throw ShapeError("feature fusion: unexpected channel count");
    if (parts[i].dim(1) != parts[0].dim(1) || parts[i].dim(2) != parts[0].dim(2)) {
      throw ShapeError("feature fusion: spatial extents differ");
    }
  }
  return conv2d_pointwise(concat(parts), weight_);
}

template <class T>
Tensor<T> feature_fuse(const Tensor<T>& enc, const Tensor<T>& dec, const Tensor<T>& f_l, const Tensor<T>& weight) {
  if (enc.dim(1) != dec.dim(1) || enc.dim(2) != dec.dim(2) || enc.dim(1) != f_l.dim(1) || enc.dim(2) != f_l.dim(2)) {
    throw ShapeError("feature_fuse: spatial extents differ");
  }
  return conv2d_pointwise(concat(std::vector<Tensor<T>>{enc, dec, f_l}), weight);
}

// --------------------------------------------------------------------- DP-Net

template <class T>
DpNet<T>::DpNet(const DpNetConfig& cfg, Rng& rng, const std::string& prefix) : cfg_(cfg) {
  cfg_.validate();
  const auto& ch = cfg_.channels;
  embed_pw_ = params_.add(prefix + ".embed_pw", init::fan_in_uniform<T>(Shape{ch[0], 3}, 3, rng));
  embed_dw_ = params_.add(prefix + ".embed_dw", init::fan_in_uniform<T>(Shape{ch[0], 3, 3}, 9, rng));
  for (int l = 0; l < kLevels; ++l) {
    const auto bc = block_config(ch[l], cfg_.heads[l], cfg_.ffn_expansion, 0);
    for (int b = 0; b < cfg_.blocks[l]; ++b) {
      encoder_[l].emplace_back(bc, params_, prefix + ".enc" + std::to_string(l + 1) + "." + std::to_string(b), rng);
    }
    if (l + 1 < kLevels) {
      down_.emplace_back(ch[l], ch[l + 1], params_, prefix + ".down" + std::to_string(l + 1), rng);
    }
  }
  for (int l = kLevels - 2; l >= 0; --l) {
    const std::string lv = std::to_string(l + 1);
    up_.emplace_back(ch[l + 1], ch[l], params_, prefix + ".up" + lv, rng);
    fuse_.emplace_back(std::vector<int>{ch[l], ch[l]}, ch[l], params_, prefix + ".fuse" + lv, rng);
    const auto bc = block_config(ch[l], cfg_.heads[l], cfg_.ffn_expansion, 0);
    for (int b = 0; b < cfg_.blocks[l]; ++b) {
      decoder_[l].emplace_back(bc, params_, prefix + ".dec" + lv + "." + std::to_string(b), rng);
    }
  }
  head_pw_ = params_.add(prefix + ".head_pw",
                         init::fan_in_uniform<T>(Shape{cfg_.degradation_types, ch[0]}, ch[0], rng));
  head_bias_ = params_.add(prefix + ".head_bias", Tensor<T>::zeros(Shape{cfg_.degradation_types}));
}

template <class T>
typename DpNet<T>::Output DpNet<T>::forward(const Tensor<T>& image) const {
  if (image.ndim() != 3 || image.dim(0) != 3) throw ShapeError("DP-Net: expected a 3 x H x W image");
  check_divisible_by_8(image.dim(1), image.dim(2), "DP-Net");
  std::array<Tensor<T>, kLevels> skips;
  Tensor<T> x = conv2d_depthwise(conv2d_pointwise(image, embed_pw_), embed_dw_);
  for (int l = 0; l < kLevels; ++l) {
    x = run_blocks(encoder_[l], x, nullptr);
    skips[l] = x;
    if (l + 1 < kLevels) x = down_[l].forward(x);
  }
  Output out;
  out.rep.features[kLevels - 1] = x;
  for (int i = 0, l = kLevels - 2; l >= 0; --l, ++i) {
    x = fuse_[i].forward({skips[l], up_[i].forward(x)});
    x = run_blocks(decoder_[l], x, nullptr);
    out.rep.features[l] = x;
  }
  out.priors = sigmoid(add_channel_bias(conv2d_pointwise(x, head_pw_), head_bias_));
  return out;
}

// --------------------------------------------------------------------- DR-Net

template <class T>
DrNet<T>::DrNet(const DrNetConfig& cfg, const DpNetConfig& dp_cfg, Rng& rng, const std::string& prefix)
    : cfg_(cfg) {
  cfg_.validate();
  dp_cfg.validate();
  const auto& ch = cfg_.channels;
  const auto& fch = dp_cfg.channels;
  auto pool_of = [&](int level) { return level == 0 ? 0 : cfg_.pool[level - 1]; };
  embed_pw_ = params_.add(prefix + ".embed_pw", init::fan_in_uniform<T>(Shape{ch[0], 3}, 3, rng));
  embed_dw_ = params_.add(prefix + ".embed_dw", init::fan_in_uniform<T>(Shape{ch[0], 3, 3}, 9, rng));
  for (int l = 0; l < kLevels; ++l) {
    if (l == kLevels - 1) {
      latent_fuse_ = std::make_unique<FeatureFusion<T>>(std::vector<int>{ch[l], fch[l]}, ch[l], params_,
                                                        prefix + ".fuse" + std::to_string(l + 1), rng);
    }
    const auto bc = block_config(ch[l], cfg_.heads[l], cfg_.ffn_expansion, pool_of(l));
    for (int b = 0; b < cfg_.blocks[l]; ++b) {
      encoder_[l].emplace_back(bc, params_, prefix + ".enc" + std::to_string(l + 1) + "." + std::to_string(b), rng);
    }
    if (l + 1 < kLevels) {
      down_.emplace_back(ch[l], ch[l + 1], params_, prefix + ".down" + std::to_string(l + 1), rng);
    }
  }
  for (int l = kLevels - 2; l >= 0; --l) {
    const std::string lv = std::to_string(l + 1);
    up_.emplace_back(ch[l + 1], ch[l], params_, prefix + ".up" + lv, rng);
    fuse_.emplace_back(std::vector<int>{ch[l], ch[l], fch[l]}, ch[l], params_, prefix + ".fuse" + lv, rng);
    const auto bc = block_config(ch[l], cfg_.heads[l], cfg_.ffn_expansion, pool_of(l));
    for (int b = 0; b < cfg_.blocks[l]; ++b) {
      decoder_[l].emplace_back(bc, params_, prefix + ".dec" + lv + "." + std::to_string(b), rng);
    }
  }
  out_pw_ = params_.add(prefix + ".out_pw", init::fan_in_uniform<T>(Shape{3, ch[0]}, ch[0], rng));
}

template <class T>
Tensor<T> DrNet<T>::forward(const Tensor<T>& image, const PerceptiveRepresentation<T>& rep,
                            std::vector<AttentionStats>* stats) const {
  if (image.ndim() != 3 || image.dim(0) != 3) throw ShapeError("DR-Net: expected a 3 x H x W image");
  const auto h = image.dim(1), w = image.dim(2);
  check_divisible_by_8(h, w, "DR-Net");
  for (int l = 0; l < kLevels; ++l) {
    const auto& f = rep.features[l];
    if (!f.defined() || f.dim(1) != h / kScaleFactors[l] || f.dim(2) != w / kScaleFactors[l]) {
      throw ShapeError("DR-Net: perceptive feature at scale 1/" + std::to_string(kScaleFactors[l]) +
                       " does not match the input extents");
    }
  }
  std::array<Tensor<T>, kLevels> skips;
  Tensor<T> x = conv2d_depthwise(conv2d_pointwise(image, embed_pw_), embed_dw_);
  for (int l = 0; l < kLevels; ++l) {
    if (l == kLevels - 1) x = latent_fuse_->forward({x, rep.features[l]});
    x = run_blocks(encoder_[l], x, stats);
    skips[l] = x;
    if (l + 1 < kLevels) x = down_[l].forward(x);
  }
  for (int i = 0, l = kLevels - 2; l >= 0; --l, ++i) {
    x = fuse_[i].forward({skips[l], up_[i].forward(x), rep.features[l]});
    skips[l] = Tensor<T>();
    x = run_blocks(decoder_[l], x, stats);
  }
  return clamp(add(conv2d_pointwise(x, out_pw_), image), T(0), T(1));
}

template <class T>
void DrNet<T>::zero_final_projection() {
  zero(out_pw_);
}

template <class T>
void DrNet<T>::zero_output_projections() {
  zero_final_projection();
  for (auto& level : encoder_)
    for (auto& b : level) b.zero_output_projections();
  for (auto& level : decoder_)
    for (auto& b : level) b.zero_output_projections();
}

// ------------------------------------------------------------------ DocStormer

template <class T>
DocStormer<T>::DocStormer(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  Rng rng(seed);
  dp_ = std::make_unique<DpNet<T>>(cfg_.dp, rng);
  dr_ = std::make_unique<DrNet<T>>(cfg_.dr, cfg_.dp, rng);
}

template <class T>
typename DocStormer<T>::Output DocStormer<T>::forward(const Tensor<T>& image) const {
  if (image.ndim() != 3 || image.dim(0) != 3) throw ShapeError("DocStormer: expected a 3 x H x W image");
  const auto h = image.dim(1), w = image.dim(2);
  const auto pad_h = (8 - h % 8) % 8, pad_w = (8 - w % 8) % 8;
  Tensor<T> input = (pad_h || pad_w) ? reflect_pad(image, pad_h, pad_w) : image;
  auto perceived = dp_->forward(input);
  Output out;
  out.enhanced = dr_->forward(input, perceived.rep);
  out.priors = perceived.priors;
  if (pad_h || pad_w) {
    out.enhanced = crop(out.enhanced, 0, 0, h, w);
    out.priors = crop(out.priors, 0, 0, h, w);
  }
  return out;
}

template <class T>
ParameterSet<T> DocStormer<T>::params() const {
  ParameterSet<T> all;
  all.merge(dp_->params());
  all.merge(dr_->params());
  return all;
}

// --------------------------------------------------------------------- critic

template <class T>
Tensor<T> Critic<T>::input_gradient(const Tensor<T>&) const {
  throw GraphError("critic does not provide a differentiable input gradient");
}

template <class T>
Discriminator<T>::Discriminator(const DiscriminatorConfig& cfg, Rng& rng, const std::string& prefix) : cfg_(cfg) {
  cfg_.validate();
  std::vector<int> widths = cfg_.widths;
  widths.push_back(1);
  int in = 3;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::string p = prefix + ".stage" + std::to_string(i + 1);
    Stage s;
    s.dw = params_.add(p + ".dw", init::fan_in_uniform<T>(Shape{in, 3, 3}, 9, rng));
    s.pw = params_.add(p + ".pw", init::fan_in_uniform<T>(Shape{widths[i], 4 * in}, 4 * in, rng));
    s.bias = params_.add(p + ".bias", Tensor<T>::zeros(Shape{widths[i]}));
    stages_.push_back(s);
    in = widths[i];
  }
}

template <class T>
void Discriminator<T>::check_input(const Tensor<T>& image) const {
  if (image.ndim() != 3 || image.dim(0) != 3 || image.dim(1) != cfg_.input_size || image.dim(2) != cfg_.input_size) {
    throw ShapeError("discriminator: expected a 3 x " + std::to_string(cfg_.input_size) + " x " +
                     std::to_string(cfg_.input_size) + " image, got " + to_string(image.shape()));
  }
}

template <class T>
Tensor<T> Discriminator<T>::score(const Tensor<T>& image) const {
  check_input(image);
  const T slope = static_cast<T>(cfg_.slope);
  Tensor<T> x = image;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const auto& s = stages_[i];
    x = add_channel_bias(conv2d_pointwise(pixel_unshuffle(conv2d_depthwise(x, s.dw), 2), s.pw), s.bias);
    if (i + 1 < stages_.size()) x = leaky_relu(x, slope);
  }
  return mean(x);
}

template <class T>
Tensor<T> Discriminator<T>::input_gradient(const Tensor<T>& image) const {
  check_input(image);
  const T slope = static_cast<T>(cfg_.slope);
  // Forward pass for the activation pattern only; it is piecewise constant in
  // the input, so it enters the backward chain as a constant mask.
  std::vector<Tensor<T>> masks;
  Shape last;
  {
    TapeScope no_tape(nullptr);
    Tensor<T> x = image;
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      const auto& s = stages_[i];
      x = add_channel_bias(conv2d_pointwise(pixel_unshuffle(conv2d_depthwise(x, s.dw), 2), s.pw), s.bias);
      if (i + 1 < stages_.size()) {
        Tensor<T> m(x.shape());
        auto md = m.mutable_data();
        auto xd = x.data();
        for (std::size_t j = 0; j < md.size(); ++j) md[j] = xd[j] > T(0) ? T(1) : slope;
        masks.push_back(m);
        x = leaky_relu(x, slope);
      }
    }
    last = x.shape();
  }
  // Reverse-mode chain written with recorded ops, differentiable in the weights.
  Tensor<T> g(last, T(1) / static_cast<T>(numel(last)));
  for (std::size_t i = stages_.size(); i-- > 0;) {
    const auto& s = stages_[i];
    if (i + 1 < stages_.size()) g = mul(g, masks[i]);
    const auto h = g.dim(1), w = g.dim(2);
    Tensor<T> flat = reshape(g, Shape{g.dim(0), h * w});
    Tensor<T> back = matmul(transpose(s.pw), flat);
    g = pixel_shuffle(reshape(back, Shape{back.dim(0), h, w}), 2);
    g = conv2d_depthwise(g, flip_spatial(s.dw));
  }
  return g;
}

template <class T>
void Discriminator<T>::zero_weights() {
  for (auto& [name, t] : params_.entries()) {
    Tensor<T> handle = t;
    zero(handle);
  }
}

template class FeatureFusion<float>;
template class FeatureFusion<double>;
template Tensor<float> feature_fuse(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                    const Tensor<float>&);
template Tensor<double> feature_fuse(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                     const Tensor<double>&);
template class DpNet<float>;
template class DpNet<double>;
template class DrNet<float>;
template class DrNet<double>;
template class DocStormer<float>;
template class DocStormer<double>;
template class Critic<float>;
template class Critic<double>;
template class Discriminator<float>;
template class Discriminator<double>;

}  // namespace docstormer
