#include "docstormer/blocks.hpp"

#include <cmath>
#include <stdexcept>

namespace docstormer {

void AstmConfig::validate() const {
  if (channels <= 0 || heads <= 0 || channels % heads != 0) {
    throw std::invalid_argument("ASTM channels must be a positive multiple of heads");
  }
  if (pool_h <= 0 || pool_w <= 0) throw std::invalid_argument("ASTM pool extents must be positive");
}

void StmConfig::validate() const {
  if (channels <= 0 || heads <= 0 || channels % heads != 0) {
    throw std::invalid_argument("STM channels must be a positive multiple of heads");
  }
}

void DualBlockConfig::validate() const {
  stm.validate();
  if (astm) {
    astm->validate();
    if (astm->channels != stm.channels) throw std::invalid_argument("ASTM and STM channel counts differ");
  }
  if (!(ffn_expansion > 1.0)) throw std::invalid_argument("ffn_expansion must exceed 1");
  if (!(d_k_init > 0.0)) throw std::invalid_argument("d_k_init must be positive");
}

template <class T>
Tensor<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, const Tensor<T>& scale,
                               Tensor<T>* attention) {
  Tensor<T> weights = softmax(scale_by(matmul(q, transpose(k)), scale), 1);
  if (attention) *attention = weights;
  return matmul(weights, v);
}

namespace {

template <class T>
Tensor<T> head_scale(const Tensor<T>& d_k, int head) {
  return inv_sqrt(slice(d_k, head, head + 1), static_cast<T>(kMinDk));
}

template <class T>
void record(std::vector<AttentionStats>* stats, const Tensor<T>& a) {
  if (stats) stats->push_back(AttentionStats{a.shape(), static_cast<std::size_t>(a.numel()) * sizeof(T)});
}

template <class T>
void zero(Tensor<T>& t) {
  for (auto& v : t.mutable_data()) v = T(0);
}

}  // namespace

// ------------------------------------------------------------------------ STM

template <class T>
Stm<T>::Stm(const StmConfig& cfg, double d_k_init, ParameterSet<T>& params, const std::string& prefix, Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  const std::int64_t c = cfg.channels;
  qkv_pw_ = params.add(prefix + ".qkv_pw", init::fan_in_uniform<T>(Shape{3 * c, c}, c, rng));
  qkv_dw_ = params.add(prefix + ".qkv_dw", init::fan_in_uniform<T>(Shape{3 * c, 3, 3}, 9, rng));
  d_k_ = params.add(prefix + ".d_k", Tensor<T>(Shape{cfg.heads}, static_cast<T>(d_k_init)));
  proj_ = params.add(prefix + ".proj", init::fan_in_uniform<T>(Shape{c, c}, c, rng));
  ln_gamma_ = params.add(prefix + ".ln_gamma", Tensor<T>::ones(Shape{c}));
  ln_beta_ = params.add(prefix + ".ln_beta", Tensor<T>::zeros(Shape{c}));
}

template <class T>
Tensor<T> Stm<T>::forward(const Tensor<T>& x, std::vector<AttentionStats>* stats,
                          std::vector<Tensor<T>>* attention) const {
  const std::int64_t c = cfg_.channels, h = x.dim(1), w = x.dim(2);
  if (x.dim(0) != c) throw ShapeError("STM: expected " + std::to_string(c) + " channels");
  const std::int64_t per_head = c / cfg_.heads;
  Tensor<T> qkv = reshape(conv2d_depthwise(conv2d_pointwise(x, qkv_pw_), qkv_dw_), Shape{3 * c, h * w});
  std::vector<Tensor<T>> heads;
  heads.reserve(static_cast<std::size_t>(cfg_.heads));
  for (int hd = 0; hd < cfg_.heads; ++hd) {
    const std::int64_t off = hd * per_head;
    // Channels are the tokens; unit-norm rows keep logits independent of H*W.
    Tensor<T> q = l2_normalize_rows(slice(qkv, off, off + per_head));
    Tensor<T> k = l2_normalize_rows(slice(qkv, c + off, c + off + per_head));
    Tensor<T> v = slice(qkv, 2 * c + off, 2 * c + off + per_head);
    Tensor<T> a;
    heads.push_back(scaled_dot_attention(q, k, v, head_scale(d_k_, hd), &a));
    record(stats, a);
    if (attention) attention->push_back(a);
  }
  Tensor<T> mixed = reshape(cfg_.heads == 1 ? heads.front() : concat(heads), Shape{c, h, w});
  return add(layer_norm(conv2d_pointwise(mixed, proj_), ln_gamma_, ln_beta_), x);
}

template <class T>
void Stm<T>::zero_output_projection() {
  zero(proj_);
}

// ----------------------------------------------------------------------- ASTM

template <class T>
Astm<T>::Astm(const AstmConfig& cfg, double d_k_init, ParameterSet<T>& params, const std::string& prefix, Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  const std::int64_t c = cfg.channels;
  qkv_pw_ = params.add(prefix + ".qkv_pw", init::fan_in_uniform<T>(Shape{3 * c, c}, c, rng));
  qkv_dw_ = params.add(prefix + ".qkv_dw", init::fan_in_uniform<T>(Shape{3 * c, 3, 3}, 9, rng));
  d_k_ = params.add(prefix + ".d_k", Tensor<T>(Shape{cfg.heads}, static_cast<T>(d_k_init)));
  proj_ = params.add(prefix + ".proj", init::fan_in_uniform<T>(Shape{c, c}, c, rng));
  ln_gamma_ = params.add(prefix + ".ln_gamma", Tensor<T>::ones(Shape{c}));
  ln_beta_ = params.add(prefix + ".ln_beta", Tensor<T>::zeros(Shape{c}));
}

template <class T>
Tensor<T> Astm<T>::forward(const Tensor<T>& x, std::vector<AttentionStats>* stats) const {
  const std::int64_t c = cfg_.channels, h = x.dim(1), w = x.dim(2);
  if (x.dim(0) != c) throw ShapeError("ASTM: expected " + std::to_string(c) + " channels");
  if (h < cfg_.pool_h || w < cfg_.pool_w) {
    throw ShapeError("ASTM: input " + std::to_string(h) + "x" + std::to_string(w) + " smaller than pool " +
                     std::to_string(cfg_.pool_h) + "x" + std::to_string(cfg_.pool_w));
  }
  const std::int64_t ph = cfg_.pool_h, pw = cfg_.pool_w, tokens = ph * pw;
  const std::int64_t per_head = c / cfg_.heads;
  Tensor<T> pooled = adaptive_avg_pool(x, ph, pw);
  Tensor<T> qkv = reshape(conv2d_depthwise(conv2d_pointwise(pooled, qkv_pw_), qkv_dw_), Shape{3 * c, tokens});
  std::vector<Tensor<T>> heads;
  heads.reserve(static_cast<std::size_t>(cfg_.heads));
  for (int hd = 0; hd < cfg_.heads; ++hd) {
    const std::int64_t off = hd * per_head;
    Tensor<T> q = transpose(slice(qkv, off, off + per_head));
    Tensor<T> k = transpose(slice(qkv, c + off, c + off + per_head));
    Tensor<T> v = transpose(slice(qkv, 2 * c + off, 2 * c + off + per_head));
    Tensor<T> a;
    heads.push_back(transpose(scaled_dot_attention(q, k, v, head_scale(d_k_, hd), &a)));
    record(stats, a);
  }
  Tensor<T> mixed = reshape(cfg_.heads == 1 ? heads.front() : concat(heads), Shape{c, ph, pw});
  Tensor<T> up = resize_bilinear(conv2d_pointwise(mixed, proj_), h, w);
  return add(layer_norm(up, ln_gamma_, ln_beta_), x);
}

template <class T>
void Astm<T>::zero_output_projection() {
  zero(proj_);
}

// ----------------------------------------------------------------------- GDFN

template <class T>
Gdfn<T>::Gdfn(int channels, double expansion, ParameterSet<T>& params, const std::string& prefix, Rng& rng)
    : hidden_(static_cast<int>(channels * expansion)) {
  if (hidden_ < 1) throw std::invalid_argument("GDFN hidden width must be positive");
  const std::int64_t c = channels, hid = hidden_;
  in_pw_ = params.add(prefix + ".in_pw", init::fan_in_uniform<T>(Shape{2 * hid, c}, c, rng));
  in_dw_ = params.add(prefix + ".in_dw", init::fan_in_uniform<T>(Shape{2 * hid, 3, 3}, 9, rng));
  out_pw_ = params.add(prefix + ".out_pw", init::fan_in_uniform<T>(Shape{c, hid}, hid, rng));
}

template <class T>
Tensor<T> Gdfn<T>::forward(const Tensor<T>& x) const {
  const std::int64_t hid = hidden_;
  // The two halves of the expansion are evaluated separately so that only one
  // hidden-width map is live at a time during inference.
  Tensor<T> gate = gelu(conv2d_depthwise(conv2d_pointwise(x, slice(in_pw_, 0, hid)), slice(in_dw_, 0, hid)));
  Tensor<T> value = conv2d_depthwise(conv2d_pointwise(x, slice(in_pw_, hid, 2 * hid)), slice(in_dw_, hid, 2 * hid));
  return add(conv2d_pointwise(mul(gate, value), out_pw_), x);
}

template <class T>
void Gdfn<T>::zero_output_projection() {
  zero(out_pw_);
}

template <class T>
void Gdfn<T>::zero_gate() {
  auto d = in_pw_.mutable_data();
  const auto cols = in_pw_.dim(1);
  std::fill(d.begin(), d.begin() + hidden_ * cols, T(0));
}

// ----------------------------------------------------------------- DualBlock

template <class T>
DualBlock<T>::DualBlock(const DualBlockConfig& cfg, ParameterSet<T>& params, const std::string& prefix, Rng& rng)
    : stm_((cfg.validate(), cfg.stm), cfg.d_k_init, params, prefix + ".stm", rng),
      ffn_(cfg.stm.channels, cfg.ffn_expansion, params, prefix + ".ffn", rng) {
  if (cfg.astm) astm_.emplace(*cfg.astm, cfg.d_k_init, params, prefix + ".astm", rng);
}

template <class T>
Tensor<T> DualBlock<T>::forward(const Tensor<T>& x, std::vector<AttentionStats>* stats) const {
  Tensor<T> y = stm_.forward(x, stats);
  if (astm_) y = astm_->forward(y, stats);
  return ffn_.forward(y);
}

template <class T>
void DualBlock<T>::zero_output_projections() {
  stm_.zero_output_projection();
  if (astm_) astm_->zero_output_projection();
  ffn_.zero_output_projection();
}

// ------------------------------------------------------------- scale changes

template <class T>
Downsample<T>::Downsample(int in_channels, int out_channels, ParameterSet<T>& params, const std::string& prefix,
                          Rng& rng) {
  const std::int64_t fan = 4 * static_cast<std::int64_t>(in_channels);
  proj_ = params.add(prefix + ".proj", init::fan_in_uniform<T>(Shape{out_channels, fan}, fan, rng));
}

template <class T>
Tensor<T> Downsample<T>::forward(const Tensor<T>& x) const {
  if (x.dim(1) % 2 || x.dim(2) % 2) throw ShapeError("downsample: extents must be even");
  return conv2d_pointwise(pixel_unshuffle(x, 2), proj_);
}

template <class T>
Upsample<T>::Upsample(int in_channels, int out_channels, ParameterSet<T>& params, const std::string& prefix,
                      Rng& rng) {
  proj_ = params.add(prefix + ".proj",
                     init::fan_in_uniform<T>(Shape{4 * static_cast<std::int64_t>(out_channels), in_channels},
                                             in_channels, rng));
}

template <class T>
Tensor<T> Upsample<T>::forward(const Tensor<T>& x) const {
  return pixel_shuffle(conv2d_pointwise(x, proj_), 2);
}

template Tensor<float> scaled_dot_attention(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                            const Tensor<float>&, Tensor<float>*);
template Tensor<double> scaled_dot_attention(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                             const Tensor<double>&, Tensor<double>*);
template class Stm<float>;
template class Stm<double>;
template class Astm<float>;
template class Astm<double>;
template class Gdfn<float>;
template class Gdfn<double>;
template class DualBlock<float>;
template class DualBlock<double>;
template class Downsample<float>;
template class Downsample<double>;
template class Upsample<float>;
template class Upsample<double>;

}  // namespace docstormer
