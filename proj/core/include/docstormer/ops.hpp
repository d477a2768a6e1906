#pragma once

#include <span>
#include <string>
#include <vector>

#include "docstormer/tape.hpp"
#include "docstormer/tensor.hpp"

// Differentiable tensor operations. Every function here records a backward
// rule on the active tape when one of its inputs requires a gradient.
// Image tensors are C x H x W.

namespace docstormer {

// Elementwise arithmetic on equal shapes.
template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <class T> Tensor<T> add_scalar(const Tensor<T>& a, T offset);
/// a * s where s is a single-element tensor (differentiable in s).
template <class T> Tensor<T> scale_by(const Tensor<T>& a, const Tensor<T>& s);
template <class T> Tensor<T> sqrt(const Tensor<T>& a);
/// 1 / sqrt(max(a, floor)); gradient is zero where the floor is active.
template <class T> Tensor<T> inv_sqrt(const Tensor<T>& a, T floor);

template <class T> Tensor<T> sum(const Tensor<T>& a);
template <class T> Tensor<T> mean(const Tensor<T>& a);

template <class T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
template <class T> Tensor<T> transpose(const Tensor<T>& a);  // 2-D only
/// Concatenation along axis 0 (channels for images, rows for matrices).
template <class T> Tensor<T> concat(const std::vector<Tensor<T>>& parts);
/// Rows/channels [begin, end) along axis 0.
template <class T> Tensor<T> slice(const Tensor<T>& a, std::int64_t begin, std::int64_t end);

template <class T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> softmax(const Tensor<T>& x, int axis);
/// Normalizes over axis 0 independently at every trailing position, then
/// applies per-channel gamma/beta (shape [C]).
template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5));
/// Scales every row of a 2-D tensor to unit L2 norm (norm floored at eps).
template <class T> Tensor<T> l2_normalize_rows(const Tensor<T>& x, T eps = T(1e-12));

template <class T> Tensor<T> gelu(const Tensor<T>& x);
template <class T> Tensor<T> sigmoid(const Tensor<T>& x);
template <class T> Tensor<T> leaky_relu(const Tensor<T>& x, T slope);
template <class T> Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);

/// Per-channel k x k convolution (odd k), zero same-padding.
template <class T> Tensor<T> conv2d_depthwise(const Tensor<T>& x, const Tensor<T>& kernels);
/// 1x1 convolution: weight [C_out x C_in].
template <class T> Tensor<T> conv2d_pointwise(const Tensor<T>& x, const Tensor<T>& weight);
template <class T> Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& bias);
/// Reverses the two trailing (spatial) axes.
template <class T> Tensor<T> flip_spatial(const Tensor<T>& k);

template <class T> Tensor<T> adaptive_avg_pool(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w);
template <class T> Tensor<T> resize_bilinear(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w);
template <class T> Tensor<T> resize_bicubic(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w);

/// [C x H x W] -> [C*f*f x H/f x W/f]; channel index c*f*f + dy*f + dx.
template <class T> Tensor<T> pixel_unshuffle(const Tensor<T>& x, std::int64_t factor);
template <class T> Tensor<T> pixel_shuffle(const Tensor<T>& x, std::int64_t factor);

template <class T>
Tensor<T> reflect_pad(const Tensor<T>& x, std::int64_t bottom, std::int64_t right);
template <class T>
Tensor<T> crop(const Tensor<T>& x, std::int64_t top, std::int64_t left, std::int64_t h, std::int64_t w);

/// Names of every op with a backward rule, including the fused loss ops.
const std::vector<std::string>& differentiable_ops();

/// Bin boundaries of adaptive pooling: [floor(i*n/o), ceil((i+1)*n/o)).
std::pair<std::int64_t, std::int64_t> adaptive_bin(std::int64_t i, std::int64_t in, std::int64_t out);

}  // namespace docstormer
