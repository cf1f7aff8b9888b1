#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "lidsn/rng.hpp"
#include "lidsn/tensor.hpp"

namespace lidsn::testing {

inline Tensor random_tensor(Shape shape, RngStream& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Finite-difference oracle kept separate from lidsn::grad_check: plain central differences
/// with step h = 1e-6 * max(1, |x|), compared to the reverse-mode gradient.
inline double fd_max_rel_error(const std::function<Tensor()>& fn, std::vector<Tensor> inputs) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  {
    Tape tape;
    TapeScope scope(tape);
    backward(fn(), tape);
  }
  double worst = 0.0;
  for (auto& t : inputs) {
    std::vector<double> analytic(t.numel(), 0.0);
    if (t.has_grad()) analytic.assign(t.grad().begin(), t.grad().end());
    auto values = t.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double x0 = values[i];
      const double h = 1e-6 * std::max(1.0, std::abs(x0));
      values[i] = x0 + h;
      const double fp = fn().item();
      values[i] = x0 - h;
      const double fm = fn().item();
      values[i] = x0;
      const double num = (fp - fm) / (2 * h);
      worst = std::max(worst, std::abs(analytic[i] - num) /
                                  std::max({1.0, std::abs(analytic[i]), std::abs(num)}));
    }
    t.zero_grad();
  }
  return worst;
}

}  // namespace lidsn::testing
