#include <algorithm>

#include "lidsn/ops.hpp"
#include "ops_internal.hpp"

namespace lidsn {

using detail::grad_buffer;
using detail::record;

namespace {

void require_odd_kernel(std::size_t k, const char* op) {
  if (k % 2 == 0) {
    throw ConfigError(std::string(op) + ": kernel length must be odd, got " + std::to_string(k));
  }
}

// y[t] += sum_k w[k] * x[t + k - pad] with zero padding outside [0, len).
inline void correlate_same(const double* x, const double* w, double* y, std::size_t len,
                           std::size_t klen) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(klen / 2);
  const auto n = static_cast<std::ptrdiff_t>(len);
  for (std::size_t k = 0; k < klen; ++k) {
    const double wk = w[k];
    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
    const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
    const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(n, n - shift);
    for (std::ptrdiff_t t = t0; t < t1; ++t) y[t] += wk * x[t + shift];
  }
}

// Adjoint of correlate_same: accumulates dx and dw from dy.
inline void correlate_same_backward(const double* x, const double* w, const double* dy, double* dx,
                                    double* dw, std::size_t len, std::size_t klen) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(klen / 2);
  const auto n = static_cast<std::ptrdiff_t>(len);
  for (std::size_t k = 0; k < klen; ++k) {
    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
    const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
    const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(n, n - shift);
    if (dx != nullptr) {
      const double wk = w[k];
      for (std::ptrdiff_t t = t0; t < t1; ++t) dx[t + shift] += wk * dy[t];
    }
    if (dw != nullptr) {
      double acc = 0.0;
      for (std::ptrdiff_t t = t0; t < t1; ++t) acc += x[t + shift] * dy[t];
      dw[k] += acc;
    }
  }
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias) {
  detail::require_rank(x, 3, "conv1d", "input");
  detail::require_rank(w, 3, "conv1d", "weight");
  const std::size_t n = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const std::size_t cout = w.dim(0), klen = w.dim(2);
  if (w.dim(1) != cin || bias.numel() != cout) {
    throw DimensionError("conv1d: input " + shape_str(x.shape()) + ", weight " +
                         shape_str(w.shape()) + ", bias " + shape_str(bias.shape()));
  }
  require_odd_kernel(klen, "conv1d");
  const auto X = x.data();
  const auto W = w.data();
  const auto Bv = bias.data();
  std::vector<double> y(n * cout * len);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < cout; ++o) {
      double* yrow = y.data() + (b * cout + o) * len;
      std::fill(yrow, yrow + len, Bv[o]);
      for (std::size_t c = 0; c < cin; ++c) {
        correlate_same(X.data() + (b * cin + c) * len, W.data() + (o * cin + c) * klen, yrow, len,
                       klen);
      }
    }
  Tensor out = detail::make_result("conv1d", {n, cout, len}, std::move(y));
  if (detail::wants_grad({&x, &w, &bias})) {
    record("conv1d", {&x, &w, &bias}, out,
           [x, w, bias, n, cin, cout, len, klen](std::span<const double> dy) {
             const auto X = x.data();
             const auto W = w.data();
             double* dx = x.requires_grad() ? grad_buffer(x).data() : nullptr;
             double* dw = w.requires_grad() ? grad_buffer(w).data() : nullptr;
             for (std::size_t b = 0; b < n; ++b)
               for (std::size_t o = 0; o < cout; ++o) {
                 const double* drow = dy.data() + (b * cout + o) * len;
                 for (std::size_t c = 0; c < cin; ++c) {
                   correlate_same_backward(X.data() + (b * cin + c) * len,
                                           W.data() + (o * cin + c) * klen, drow,
                                           dx ? dx + (b * cin + c) * len : nullptr,
                                           dw ? dw + (o * cin + c) * klen : nullptr, len, klen);
                 }
               }
             if (bias.requires_grad()) {
               auto db = grad_buffer(bias);
               for (std::size_t b = 0; b < n; ++b)
                 for (std::size_t o = 0; o < cout; ++o)
                   for (std::size_t t = 0; t < len; ++t) db[o] += dy[(b * cout + o) * len + t];
             }
           });
  }
  return out;
}

Tensor conv1d_pointwise(const Tensor& x, const Tensor& w, const Tensor& bias) {
  detail::require_rank(x, 3, "conv1d_pointwise", "input");
  detail::require_rank(w, 2, "conv1d_pointwise", "weight");
  const std::size_t n = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const std::size_t cout = w.dim(0);
  if (w.dim(1) != cin || bias.numel() != cout) {
    throw DimensionError("conv1d_pointwise: input " + shape_str(x.shape()) + ", weight " +
                         shape_str(w.shape()) + ", bias " + shape_str(bias.shape()));
  }
  const auto X = x.data();
  const auto W = w.data();
  const auto Bv = bias.data();
  std::vector<double> y(n * cout * len);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < cout; ++o) {
      double* yrow = y.data() + (b * cout + o) * len;
      std::fill(yrow, yrow + len, Bv[o]);
      for (std::size_t c = 0; c < cin; ++c) {
        const double wc = W[o * cin + c];
        const double* xrow = X.data() + (b * cin + c) * len;
        for (std::size_t t = 0; t < len; ++t) yrow[t] += wc * xrow[t];
      }
    }
  Tensor out = detail::make_result("conv1d_pointwise", {n, cout, len}, std::move(y));
  if (detail::wants_grad({&x, &w, &bias})) {
    record("conv1d_pointwise", {&x, &w, &bias}, out,
           [x, w, bias, n, cin, cout, len](std::span<const double> dy) {
             const auto X = x.data();
             const auto W = w.data();
             double* dx = x.requires_grad() ? grad_buffer(x).data() : nullptr;
             double* dw = w.requires_grad() ? grad_buffer(w).data() : nullptr;
             double* db = bias.requires_grad() ? grad_buffer(bias).data() : nullptr;
             for (std::size_t b = 0; b < n; ++b)
               for (std::size_t o = 0; o < cout; ++o) {
                 const double* drow = dy.data() + (b * cout + o) * len;
                 if (db) {
                   double acc = 0.0;
                   for (std::size_t t = 0; t < len; ++t) acc += drow[t];
                   db[o] += acc;
                 }
                 for (std::size_t c = 0; c < cin; ++c) {
                   const double* xrow = X.data() + (b * cin + c) * len;
                   if (dw) {
                     double acc = 0.0;
                     for (std::size_t t = 0; t < len; ++t) acc += xrow[t] * drow[t];
                     dw[o * cin + c] += acc;
                   }
                   if (dx) {
                     const double wc = W[o * cin + c];
                     double* dxrow = dx + (b * cin + c) * len;
                     for (std::size_t t = 0; t < len; ++t) dxrow[t] += wc * drow[t];
                   }
                 }
               }
           });
  }
  return out;
}

Tensor conv1d_depthwise(const Tensor& x, const Tensor& w, const Tensor& bias) {
  detail::require_rank(x, 3, "conv1d_depthwise", "input");
  detail::require_rank(w, 2, "conv1d_depthwise", "weight");
  const std::size_t n = x.dim(0), ch = x.dim(1), len = x.dim(2);
  const std::size_t klen = w.dim(1);
  if (w.dim(0) != ch || bias.numel() != ch) {
    throw DimensionError("conv1d_depthwise: input " + shape_str(x.shape()) + ", weight " +
                         shape_str(w.shape()) + ", bias " + shape_str(bias.shape()));
  }
  require_odd_kernel(klen, "conv1d_depthwise");
  const auto X = x.data();
  const auto W = w.data();
  const auto Bv = bias.data();
  std::vector<double> y(n * ch * len);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t c = 0; c < ch; ++c) {
      double* yrow = y.data() + (b * ch + c) * len;
      std::fill(yrow, yrow + len, Bv[c]);
      correlate_same(X.data() + (b * ch + c) * len, W.data() + c * klen, yrow, len, klen);
    }
  Tensor out = detail::make_result("conv1d_depthwise", {n, ch, len}, std::move(y));
  if (detail::wants_grad({&x, &w, &bias})) {
    record("conv1d_depthwise", {&x, &w, &bias}, out,
           [x, w, bias, n, ch, len, klen](std::span<const double> dy) {
             const auto X = x.data();
             const auto W = w.data();
             double* dx = x.requires_grad() ? grad_buffer(x).data() : nullptr;
             double* dw = w.requires_grad() ? grad_buffer(w).data() : nullptr;
             double* db = bias.requires_grad() ? grad_buffer(bias).data() : nullptr;
             for (std::size_t b = 0; b < n; ++b)
               for (std::size_t c = 0; c < ch; ++c) {
                 const double* drow = dy.data() + (b * ch + c) * len;
                 correlate_same_backward(X.data() + (b * ch + c) * len, W.data() + c * klen, drow,
                                         dx ? dx + (b * ch + c) * len : nullptr,
                                         dw ? dw + c * klen : nullptr, len, klen);
                 if (db) {
                   double acc = 0.0;
                   for (std::size_t t = 0; t < len; ++t) acc += drow[t];
                   db[c] += acc;
                 }
               }
           });
  }
  return out;
}

Tensor avgpool1d(const Tensor& x, std::size_t window, std::size_t stride) {
  if (x.rank() == 0) throw DimensionError("avgpool1d: scalar input");
  const std::size_t len = x.shape().back();
  if (window == 0 || stride == 0 || window > len || stride > len) {
    throw ConfigError("avgpool1d: window " + std::to_string(window) + " / stride " +
                      std::to_string(stride) + " invalid for length " + std::to_string(len));
  }
  const std::size_t rows = x.numel() / len;
  const std::size_t out_len = (len - window) / stride + 1;
  const double inv = 1.0 / static_cast<double>(window);
  const auto X = x.data();
  std::vector<double> y(rows * out_len);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t p = 0; p < out_len; ++p) {
      double acc = 0.0;
      const double* src = X.data() + r * len + p * stride;
      for (std::size_t i = 0; i < window; ++i) acc += src[i];
      y[r * out_len + p] = acc * inv;
    }
  Shape shape = x.shape();
  shape.back() = out_len;
  Tensor out = detail::make_result("avgpool1d", std::move(shape), std::move(y));
  if (detail::wants_grad({&x})) {
    record("avgpool1d", {&x}, out,
           [x, rows, len, out_len, window, stride, inv](std::span<const double> dy) {
             auto dx = grad_buffer(x);
             for (std::size_t r = 0; r < rows; ++r)
               for (std::size_t p = 0; p < out_len; ++p) {
                 const double g = dy[r * out_len + p] * inv;
                 double* dst = dx.data() + r * len + p * stride;
                 for (std::size_t i = 0; i < window; ++i) dst[i] += g;
               }
           });
  }
  return out;
}

}  // namespace lidsn
