#include <cmath>
#include <numbers>

#include "lidsn/ops.hpp"
#include "ops_internal.hpp"

namespace lidsn {

using detail::grad_buffer;
using detail::record;

namespace {

// Flat source offsets of each output element for a broadcast binary op.
struct Broadcast {
  Shape shape;
  std::vector<std::size_t> ia;
  std::vector<std::size_t> ib;
  bool same = false;
};

Broadcast broadcast(const Shape& sa, const Shape& sb, const char* op) {
  Broadcast br;
  if (sa == sb) {
    br.shape = sa;
    br.same = true;
    return br;
  }
  const std::size_t rank = std::max(sa.size(), sb.size());
  auto extent = [rank](const Shape& s, std::size_t i) -> std::size_t {
    const std::size_t pad = rank - s.size();
    return i < pad ? 1 : s[i - pad];
  };
  br.shape.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const auto ea = extent(sa, i), eb = extent(sb, i);
    if (ea != eb && ea != 1 && eb != 1) {
      throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(sa) + " with " +
                           shape_str(sb));
    }
    br.shape[i] = std::max(ea, eb);
  }
  std::vector<std::size_t> stride_a(rank, 0), stride_b(rank, 0);
  std::size_t acc_a = 1, acc_b = 1;
  for (std::size_t i = rank; i-- > 0;) {
    const auto ea = extent(sa, i), eb = extent(sb, i);
    stride_a[i] = ea == 1 ? 0 : acc_a;
    stride_b[i] = eb == 1 ? 0 : acc_b;
    acc_a *= ea;
    acc_b *= eb;
  }
  const std::size_t n = shape_numel(br.shape);
  br.ia.resize(n);
  br.ib.resize(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t k = 0; k < n; ++k) {
    br.ia[k] = oa;
    br.ib[k] = ob;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      oa += stride_a[d];
      ob += stride_b[d];
      if (idx[d] < br.shape[d]) break;
      oa -= stride_a[d] * idx[d];
      ob -= stride_b[d] * idx[d];
      idx[d] = 0;
    }
  }
  return br;
}

enum class BinaryOp { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryOp kind, const char* name) {
  auto br = broadcast(a.shape(), b.shape(), name);
  const auto A = a.data();
  const auto B = b.data();
  const std::size_t n = shape_numel(br.shape);
  std::vector<double> c(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double x = A[br.same ? k : br.ia[k]];
    const double y = B[br.same ? k : br.ib[k]];
    switch (kind) {
      case BinaryOp::add: c[k] = x + y; break;
      case BinaryOp::sub: c[k] = x - y; break;
      case BinaryOp::mul: c[k] = x * y; break;
    }
  }
  Tensor out = detail::make_result(name, br.shape, std::move(c));
  if (detail::wants_grad({&a, &b})) {
    record(name, {&a, &b}, out, [a, b, kind, br = std::move(br)](std::span<const double> dc) {
      const std::size_t n = dc.size();
      if (a.requires_grad()) {
        auto da = grad_buffer(a);
        const auto B = b.data();
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t i = br.same ? k : br.ia[k];
          da[i] += kind == BinaryOp::mul ? dc[k] * B[br.same ? k : br.ib[k]] : dc[k];
        }
      }
      if (b.requires_grad()) {
        auto db = grad_buffer(b);
        const auto A = a.data();
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t j = br.same ? k : br.ib[k];
          switch (kind) {
            case BinaryOp::add: db[j] += dc[k]; break;
            case BinaryOp::sub: db[j] -= dc[k]; break;
            case BinaryOp::mul: db[j] += dc[k] * A[br.same ? k : br.ia[k]]; break;
          }
        }
      }
    });
  }
  return out;
}

// Applies f element-wise; df(x, y) gives the local derivative from input and output.
template <typename F, typename DF>
Tensor unary(const Tensor& a, const char* name, F f, DF df) {
  const auto A = a.data();
  std::vector<double> y(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) y[i] = f(A[i]);
  Tensor out = detail::make_result(name, a.shape(), std::move(y));
  if (detail::wants_grad({&a})) {
    record(name, {&a}, out, [a, Y = out.data(), df](std::span<const double> dy) {
      auto da = grad_buffer(a);
      const auto A = a.data();
      for (std::size_t i = 0; i < A.size(); ++i) da[i] += dy[i] * df(A[i], Y[i]);
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryOp::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryOp::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryOp::mul, "mul"); }

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, "scale", [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor gelu(const Tensor& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return unary(
      a, "gelu", [](double x) { return 0.5 * x * std::erfc(-x * kInvSqrt2); },
      [](double x, double) {
        return 0.5 * std::erfc(-x * kInvSqrt2) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
      });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor cosine(const Tensor& a) {
  return unary(
      a, "cosine", [](double x) { return std::cos(x); },
      [](double x, double) { return -std::sin(x); });
}

}  // namespace lidsn
