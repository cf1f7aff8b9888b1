#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lidsn/rng.hpp"
#include "lidsn/tensor.hpp"

// Differentiable primitives. Every function records itself on the active tape when
// any input requires a gradient, and throws DimensionError on shape mismatch.

namespace lidsn {

// ---- linear algebra and layout ----

/// [m x k] * [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// 2-D transpose.
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
/// Sub-tensor a[index] along axis 0; the axis is dropped.
Tensor select(const Tensor& a, std::size_t index);
/// Stack equally shaped tensors along a new leading axis.
Tensor stack(std::span<const Tensor> parts);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
/// Half-open range [begin, end) along `axis`.
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);

// ---- element-wise (numpy-style broadcasting for binary ops) ----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// Exact GELU, x * Phi(x).
Tensor gelu(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor cosine(const Tensor& a);

// ---- reductions ----

Tensor sum(const Tensor& a);
/// Sum over `axis`; the axis is dropped.
Tensor sum(const Tensor& a, std::size_t axis);
Tensor mean(const Tensor& a, std::size_t axis);
/// Euclidean norm over `axis`; the axis is dropped. The gradient at a zero vector is 0.
Tensor l2norm(const Tensor& a, std::size_t axis);

// ---- normalization and activation layers ----

/// Max-subtracted softmax along `axis`. Rejects non-finite inputs.
Tensor softmax(const Tensor& a, std::size_t axis);

/// Normalizes over the last axis, then applies gain and bias of extent D.
Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Running statistics of a batch-norm layer; updated only by train-mode calls.
struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;

  explicit BatchNormState(std::size_t features = 0)
      : running_mean(features, 0.0), running_var(features, 1.0) {}
};

/// Batch normalization over axis 1 of [N x F] or [N x F x L] input. Train mode uses
/// biased batch statistics over N (and L) and updates the running statistics with
/// `momentum` (unbiased variance); eval mode uses the running statistics.
Tensor batchnorm(const Tensor& x, const Tensor& gain, const Tensor& bias, BatchNormState& state,
                 Mode mode, double momentum = 0.1, double eps = 1e-5);

/// Inverted dropout. The mask is drawn once per call from `rng`; eval mode is identity.
Tensor dropout(const Tensor& x, double p, RngStream& rng, Mode mode);

// ---- temporal convolution ----

/// x [N x Cin x T], w [Cout x Cin x K] (K odd), bias [Cout]; zero "same" padding.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias);
/// x [N x Cin x T], w [Cout x Cin], bias [Cout].
Tensor conv1d_pointwise(const Tensor& x, const Tensor& w, const Tensor& bias);
/// x [N x C x T], w [C x K] (K odd), bias [C]; one temporal kernel per channel.
Tensor conv1d_depthwise(const Tensor& x, const Tensor& w, const Tensor& bias);
/// Average pooling over the last axis; output length floor((L - window) / stride) + 1.
Tensor avgpool1d(const Tensor& x, std::size_t window, std::size_t stride);

// ---- loss ----

/// -(1/B) sum_i w[y_i] log softmax(logits_i)[y_i] for logits [B x K].
Tensor weighted_cross_entropy(const Tensor& logits, std::span<const int> labels,
                              std::span<const double> class_weights);

}  // namespace lidsn
