#include <algorithm>
#include <cmath>

#include "lidsn/ops.hpp"
#include "ops_internal.hpp"

namespace lidsn {

using detail::grad_buffer;
using detail::record;

Tensor softmax(const Tensor& a, std::size_t axis) {
  const auto s = detail::split_axis(a.shape(), axis, "softmax");
  const auto A = a.data();
  for (double v : A) {
    if (!std::isfinite(v)) throw NumericError("softmax: non-finite input");
  }
  std::vector<double> y(A.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double mx = A[base];
      for (std::size_t e = 1; e < s.extent; ++e) mx = std::max(mx, A[base + e * s.inner]);
      double z = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        const double v = std::exp(A[base + e * s.inner] - mx);
        y[base + e * s.inner] = v;
        z += v;
      }
      for (std::size_t e = 0; e < s.extent; ++e) y[base + e * s.inner] /= z;
    }
  }
  Tensor out = detail::make_result("softmax", a.shape(), std::move(y));
  if (detail::wants_grad({&a})) {
    record("softmax", {&a}, out, [a, s, Y = out.data()](std::span<const double> dy) {
      auto da = grad_buffer(a);
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t base = o * s.extent * s.inner + i;
          double dot = 0.0;
          for (std::size_t e = 0; e < s.extent; ++e) {
            dot += dy[base + e * s.inner] * Y[base + e * s.inner];
          }
          for (std::size_t e = 0; e < s.extent; ++e) {
            const std::size_t k = base + e * s.inner;
            da[k] += Y[k] * (dy[k] - dot);
          }
        }
      }
    });
  }
  return out;
}

Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (eps <= 0.0) throw ConfigError("layernorm: eps must be positive");
  if (x.rank() == 0) throw DimensionError("layernorm: scalar input");
  const std::size_t d = x.shape().back();
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError("layernorm: feature extent " + std::to_string(d) + " vs gain " +
                         shape_str(gain.shape()) + " and bias " + shape_str(bias.shape()));
  }
  const std::size_t rows = x.numel() / d;
  const auto X = x.data();
  const auto G = gain.data();
  const auto Bv = bias.data();
  std::vector<double> xhat(X.size()), y(X.size()), inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = X.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * inv_std[r];
      xhat[r * d + j] = h;
      y[r * d + j] = h * G[j] + Bv[j];
    }
  }
  Tensor out = detail::make_result("layernorm", x.shape(), std::move(y));
  if (detail::wants_grad({&x, &gain, &bias})) {
    record("layernorm", {&x, &gain, &bias}, out,
           [x, gain, bias, d, rows, xhat = std::move(xhat),
            inv_std = std::move(inv_std)](std::span<const double> dy) {
             const auto G = gain.data();
             if (gain.requires_grad() || bias.requires_grad()) {
               auto dg = gain.requires_grad() ? grad_buffer(gain) : std::span<double>{};
               auto db = bias.requires_grad() ? grad_buffer(bias) : std::span<double>{};
               for (std::size_t r = 0; r < rows; ++r)
                 for (std::size_t j = 0; j < d; ++j) {
                   if (!dg.empty()) dg[j] += dy[r * d + j] * xhat[r * d + j];
                   if (!db.empty()) db[j] += dy[r * d + j];
                 }
             }
             if (x.requires_grad()) {
               auto dx = grad_buffer(x);
               const double inv_d = 1.0 / static_cast<double>(d);
               for (std::size_t r = 0; r < rows; ++r) {
                 double m1 = 0.0, m2 = 0.0;
                 for (std::size_t j = 0; j < d; ++j) {
                   const double g = dy[r * d + j] * G[j];
                   m1 += g;
                   m2 += g * xhat[r * d + j];
                 }
                 m1 *= inv_d;
                 m2 *= inv_d;
                 for (std::size_t j = 0; j < d; ++j) {
                   const double g = dy[r * d + j] * G[j];
                   dx[r * d + j] += inv_std[r] * (g - m1 - xhat[r * d + j] * m2);
                 }
               }
             }
           });
  }
  return out;
}

Tensor batchnorm(const Tensor& x, const Tensor& gain, const Tensor& bias, BatchNormState& state,
                 Mode mode, double momentum, double eps) {
  if (x.rank() != 2 && x.rank() != 3) {
    throw DimensionError("batchnorm: expects [N x F] or [N x F x L], got " + shape_str(x.shape()));
  }
  const std::size_t n = x.dim(0), f = x.dim(1), l = x.rank() == 3 ? x.dim(2) : 1;
  if (gain.numel() != f || bias.numel() != f || state.running_mean.size() != f ||
      state.running_var.size() != f) {
    throw DimensionError("batchnorm: feature extent " + std::to_string(f) +
                         " does not match parameters");
  }
  if (mode == Mode::train && n * l < 2) {
    throw DimensionError("batchnorm: train mode needs at least 2 values per feature, got " +
                         std::to_string(n * l));
  }
  const auto X = x.data();
  const auto G = gain.data();
  const auto Bv = bias.data();
  std::vector<double> mu(f), inv_std(f);
  const double count = static_cast<double>(n * l);
  if (mode == Mode::train) {
    for (std::size_t c = 0; c < f; ++c) {
      double m = 0.0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t t = 0; t < l; ++t) m += X[(b * f + c) * l + t];
      m /= count;
      double v = 0.0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t t = 0; t < l; ++t) {
          const double dlt = X[(b * f + c) * l + t] - m;
          v += dlt * dlt;
        }
      v /= count;
      mu[c] = m;
      inv_std[c] = 1.0 / std::sqrt(v + eps);
      state.running_mean[c] = (1.0 - momentum) * state.running_mean[c] + momentum * m;
      state.running_var[c] =
          (1.0 - momentum) * state.running_var[c] + momentum * v * count / (count - 1.0);
    }
  } else {
    for (std::size_t c = 0; c < f; ++c) {
      mu[c] = state.running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + eps);
    }
  }
  std::vector<double> xhat(X.size()), y(X.size());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t c = 0; c < f; ++c)
      for (std::size_t t = 0; t < l; ++t) {
        const std::size_t k = (b * f + c) * l + t;
        xhat[k] = (X[k] - mu[c]) * inv_std[c];
        y[k] = xhat[k] * G[c] + Bv[c];
      }
  Tensor out = detail::make_result("batchnorm", x.shape(), std::move(y));
  if (detail::wants_grad({&x, &gain, &bias})) {
    record("batchnorm", {&x, &gain, &bias}, out,
           [x, gain, bias, n, f, l, mode, xhat = std::move(xhat),
            inv_std = std::move(inv_std)](std::span<const double> dy) {
             const auto G = gain.data();
             std::vector<double> sum_dy(f, 0.0), sum_dy_xhat(f, 0.0);
             for (std::size_t b = 0; b < n; ++b)
               for (std::size_t c = 0; c < f; ++c)
                 for (std::size_t t = 0; t < l; ++t) {
                   const std::size_t k = (b * f + c) * l + t;
                   sum_dy[c] += dy[k];
                   sum_dy_xhat[c] += dy[k] * xhat[k];
                 }
             if (gain.requires_grad()) {
               auto dg = grad_buffer(gain);
               for (std::size_t c = 0; c < f; ++c) dg[c] += sum_dy_xhat[c];
             }
             if (bias.requires_grad()) {
               auto db = grad_buffer(bias);
               for (std::size_t c = 0; c < f; ++c) db[c] += sum_dy[c];
             }
             if (!x.requires_grad()) return;
             auto dx = grad_buffer(x);
             const double inv_count = 1.0 / static_cast<double>(n * l);
             for (std::size_t b = 0; b < n; ++b)
               for (std::size_t c = 0; c < f; ++c) {
                 const double scale = G[c] * inv_std[c];
                 for (std::size_t t = 0; t < l; ++t) {
                   const std::size_t k = (b * f + c) * l + t;
                   if (mode == Mode::train) {
                     dx[k] += scale * (dy[k] - inv_count * sum_dy[c] -
                                       xhat[k] * inv_count * sum_dy_xhat[c]);
                   } else {
                     dx[k] += scale * dy[k];
                   }
                 }
               }
           });
  }
  return out;
}

Tensor dropout(const Tensor& x, double p, RngStream& rng, Mode mode) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: p must lie in [0, 1)");
  if (mode == Mode::eval || p == 0.0) return x;
  const auto X = x.data();
  std::vector<double> mask(X.size()), y(X.size());
  const double keep = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < X.size(); ++i) {
    mask[i] = rng.uniform() >= p ? keep : 0.0;
    y[i] = X[i] * mask[i];
  }
  Tensor out = detail::make_result("dropout", x.shape(), std::move(y));
  if (detail::wants_grad({&x})) {
    record("dropout", {&x}, out, [x, mask = std::move(mask)](std::span<const double> dy) {
      auto dx = grad_buffer(x);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * mask[i];
    });
  }
  return out;
}

Tensor weighted_cross_entropy(const Tensor& logits, std::span<const int> labels,
                              std::span<const double> class_weights) {
  detail::require_rank(logits, 2, "weighted_cross_entropy", "logits");
  const std::size_t b = logits.dim(0), k = logits.dim(1);
  if (labels.size() != b) {
    throw DimensionError("weighted_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(b) + " rows");
  }
  if (class_weights.size() != k) {
    throw DimensionError("weighted_cross_entropy: " + std::to_string(class_weights.size()) +
                         " class weights for " + std::to_string(k) + " classes");
  }
  const auto L = logits.data();
  std::vector<double> probs(b * k);
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw DataError("weighted_cross_entropy: label " + std::to_string(y) + " out of range [0, " +
                      std::to_string(k) + ")");
    }
    const double* row = L.data() + i * k;
    double mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < k; ++j) probs[i * k + j] = std::exp(row[j] - lse);
    loss -= class_weights[static_cast<std::size_t>(y)] * (row[y] - lse);
  }
  loss /= static_cast<double>(b);
  Tensor out = detail::make_result("weighted_cross_entropy", {1}, {loss});
  if (detail::wants_grad({&logits})) {
    std::vector<int> ys(labels.begin(), labels.end());
    std::vector<double> w(class_weights.begin(), class_weights.end());
    record("weighted_cross_entropy", {&logits}, out,
           [logits, b, k, ys = std::move(ys), w = std::move(w),
            probs = std::move(probs)](std::span<const double> dy) {
             auto dl = grad_buffer(logits);
             for (std::size_t i = 0; i < b; ++i) {
               const auto y = static_cast<std::size_t>(ys[i]);
               const double g = dy[0] * w[y] / static_cast<double>(b);
               for (std::size_t j = 0; j < k; ++j) {
                 dl[i * k + j] += g * (probs[i * k + j] - (j == y ? 1.0 : 0.0));
               }
             }
           });
  }
  return out;
}

}  // namespace lidsn
