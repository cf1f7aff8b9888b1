#include <algorithm>
#include <cmath>

#include "lidsn/ops.hpp"
#include "ops_internal.hpp"

namespace lidsn {

using detail::grad_buffer;
using detail::record;

Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_rank(a, 2, "matmul", "lhs");
  detail::require_rank(b, 2, "matmul", "rhs");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  Tensor out = detail::make_result("matmul", {m, n}, std::move(c));
  if (detail::wants_grad({&a, &b})) {
    record("matmul", {&a, &b}, out, [a, b, m, k, n](std::span<const double> dc) {
      if (a.requires_grad()) {
        auto da = grad_buffer(a);
        const auto B = b.data();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += dc[i * n + j] * B[p * n + j];
            da[i * k + p] += acc;
          }
        }
      }
      if (b.requires_grad()) {
        auto db = grad_buffer(b);
        const auto A = a.data();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = A[i * k + p];
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) db[p * n + j] += aip * dc[i * n + j];
          }
        }
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  detail::require_rank(a, 2, "transpose", "input");
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto A = a.data();
  std::vector<double> t(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t[j * m + i] = A[i * n + j];
  Tensor out = detail::make_result("transpose", {n, m}, std::move(t));
  if (detail::wants_grad({&a})) {
    record("transpose", {&a}, out, [a, m, n](std::span<const double> dt) {
      auto da = grad_buffer(a);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) da[i * n + j] += dt[j * m + i];
    });
  }
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                         shape_str(shape));
  }
  const auto A = a.data();
  Tensor out = detail::make_result("reshape", std::move(shape), {A.begin(), A.end()});
  if (detail::wants_grad({&a})) {
    record("reshape", {&a}, out, [a](std::span<const double> dy) {
      auto da = grad_buffer(a);
      for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
    });
  }
  return out;
}

Tensor select(const Tensor& a, std::size_t index) {
  if (a.rank() < 2) throw DimensionError("select: needs rank >= 2, got " + shape_str(a.shape()));
  if (index >= a.dim(0)) {
    throw DimensionError("select: index " + std::to_string(index) + " out of range for " +
                         shape_str(a.shape()));
  }
  Shape shape(a.shape().begin() + 1, a.shape().end());
  const std::size_t chunk = shape_numel(shape);
  const auto A = a.data().subspan(index * chunk, chunk);
  Tensor out = detail::make_result("select", std::move(shape), {A.begin(), A.end()});
  if (detail::wants_grad({&a})) {
    record("select", {&a}, out, [a, index, chunk](std::span<const double> dy) {
      auto da = grad_buffer(a).subspan(index * chunk, chunk);
      for (std::size_t i = 0; i < chunk; ++i) da[i] += dy[i];
    });
  }
  return out;
}

Tensor stack(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("stack: no inputs");
  const Shape& inner = parts[0].shape();
  for (const auto& p : parts) {
    if (p.shape() != inner) {
      throw DimensionError("stack: shape " + shape_str(p.shape()) + " differs from " +
                           shape_str(inner));
    }
  }
  const std::size_t chunk = shape_numel(inner);
  std::vector<double> data;
  data.reserve(chunk * parts.size());
  for (const auto& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
  Shape shape{parts.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  Tensor out = detail::make_result("stack", std::move(shape), std::move(data));
  if (detail::wants_grad(parts)) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    active_tape()->record("stack", parts, out, [inputs, chunk](std::span<const double> dy) {
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        if (!inputs[k].requires_grad()) continue;
        auto d = grad_buffer(inputs[k]);
        for (std::size_t i = 0; i < chunk; ++i) d[i] += dy[k * chunk + i];
      }
    });
  }
  return out;
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& ref = parts[0].shape();
  if (axis >= ref.size()) throw DimensionError("concat: axis out of range for " + shape_str(ref));
  Shape shape = ref;
  shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == ref[i];
    if (!ok) {
      throw DimensionError("concat: shape " + shape_str(s) + " incompatible with " +
                           shape_str(ref) + " along axis " + std::to_string(axis));
    }
    shape[axis] += s[axis];
  }
  const auto split = detail::split_axis(shape, axis, "concat");
  std::vector<double> data(shape_numel(shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t width = p.dim(axis) * split.inner;
    const auto src = p.data();
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(src.begin() + o * width, width,
                  data.begin() + o * split.extent * split.inner + offset * split.inner);
    }
    offset += p.dim(axis);
  }
  Tensor out = detail::make_result("concat", std::move(shape), std::move(data));
  if (detail::wants_grad(parts)) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    active_tape()->record(
        "concat", parts, out, [inputs, offsets, split, axis](std::span<const double> dy) {
          for (std::size_t k = 0; k < inputs.size(); ++k) {
            if (!inputs[k].requires_grad()) continue;
            auto d = grad_buffer(inputs[k]);
            const std::size_t width = inputs[k].dim(axis) * split.inner;
            for (std::size_t o = 0; o < split.outer; ++o) {
              const double* src = dy.data() + o * split.extent * split.inner + offsets[k] * split.inner;
              for (std::size_t i = 0; i < width; ++i) d[o * width + i] += src[i];
            }
          }
        });
  }
  return out;
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto split = detail::split_axis(a.shape(), axis, "slice");
  if (begin >= end || end > split.extent) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for axis " + std::to_string(axis) + " of " +
                         shape_str(a.shape()));
  }
  Shape shape = a.shape();
  shape[axis] = end - begin;
  const std::size_t width = (end - begin) * split.inner;
  const auto A = a.data();
  std::vector<double> data(split.outer * width);
  for (std::size_t o = 0; o < split.outer; ++o) {
    std::copy_n(A.begin() + o * split.extent * split.inner + begin * split.inner, width,
                data.begin() + o * width);
  }
  Tensor out = detail::make_result("slice", std::move(shape), std::move(data));
  if (detail::wants_grad({&a})) {
    record("slice", {&a}, out, [a, split, begin, width](std::span<const double> dy) {
      auto da = grad_buffer(a);
      for (std::size_t o = 0; o < split.outer; ++o) {
        double* dst = da.data() + o * split.extent * split.inner + begin * split.inner;
        for (std::size_t i = 0; i < width; ++i) dst[i] += dy[o * width + i];
      }
    });
  }
  return out;
}

// ---- reductions ----

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  Tensor out = detail::make_result("sum", {1}, {total});
  if (detail::wants_grad({&a})) {
    record("sum", {&a}, out, [a](std::span<const double> dy) {
      auto da = grad_buffer(a);
      for (double& g : da) g += dy[0];
    });
  }
  return out;
}

Tensor sum(const Tensor& a, std::size_t axis) {
  const auto s = detail::split_axis(a.shape(), axis, "sum");
  const auto A = a.data();
  std::vector<double> data(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = 0; e < s.extent; ++e)
      for (std::size_t i = 0; i < s.inner; ++i)
        data[o * s.inner + i] += A[(o * s.extent + e) * s.inner + i];
  Tensor out = detail::make_result("sum_axis", detail::drop_axis(a.shape(), axis), std::move(data));
  if (detail::wants_grad({&a})) {
    record("sum_axis", {&a}, out, [a, s](std::span<const double> dy) {
      auto da = grad_buffer(a);
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t e = 0; e < s.extent; ++e)
          for (std::size_t i = 0; i < s.inner; ++i)
            da[(o * s.extent + e) * s.inner + i] += dy[o * s.inner + i];
    });
  }
  return out;
}

Tensor mean(const Tensor& a, std::size_t axis) {
  const auto extent = a.dim(axis);
  return scale(sum(a, axis), 1.0 / static_cast<double>(extent));
}

Tensor l2norm(const Tensor& a, std::size_t axis) {
  const auto s = detail::split_axis(a.shape(), axis, "l2norm");
  const auto A = a.data();
  std::vector<double> norms(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = 0; e < s.extent; ++e)
      for (std::size_t i = 0; i < s.inner; ++i) {
        const double v = A[(o * s.extent + e) * s.inner + i];
        norms[o * s.inner + i] += v * v;
      }
  for (double& n : norms) n = std::sqrt(n);
  Tensor out = detail::make_result("l2norm", detail::drop_axis(a.shape(), axis), std::move(norms));
  if (detail::wants_grad({&a})) {
    record("l2norm", {&a}, out, [a, s, out_data = out.data()](std::span<const double> dy) {
      auto da = grad_buffer(a);
      const auto A = a.data();
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t i = 0; i < s.inner; ++i) {
          const double n = out_data[o * s.inner + i];
          if (n == 0.0) continue;
          const double g = dy[o * s.inner + i] / n;
          for (std::size_t e = 0; e < s.extent; ++e) {
            const std::size_t idx = (o * s.extent + e) * s.inner + i;
            da[idx] += g * A[idx];
          }
        }
    });
  }
  return out;
}

}  // namespace lidsn
