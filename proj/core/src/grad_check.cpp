#include "lidsn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lidsn/error.hpp"

namespace lidsn {

namespace {

double eval_scalar(const TensorFn& fn, std::span<const Tensor> inputs) {
  const Tensor y = fn(inputs);
  if (y.numel() != 1) {
    throw DimensionError("grad_check: function must return a scalar, got " + shape_str(y.shape()));
  }
  return y.item();
}

}  // namespace

GradCheckResult grad_check(const TensorFn& fn, std::span<Tensor> inputs,
                           const GradCheckOptions& options) {
  const double first = eval_scalar(fn, inputs);
  const double second = eval_scalar(fn, inputs);
  if (first != second) throw Error("grad_check: function is not deterministic");

  std::vector<bool> saved_flags;
  for (auto& t : inputs) {
    saved_flags.push_back(t.requires_grad());
    t.set_requires_grad(true);
    t.zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    const Tensor y = fn(inputs);
    backward(y, tape);
  }
  for (auto& t : inputs) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(t.numel(), 0.0);
    }
  }

  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].mutable_data();
    const std::size_t n = values.size();
    const std::size_t count =
        options.max_coords_per_input == 0 ? n : std::min(n, options.max_coords_per_input);
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t i = count == n ? c : (c * n) / count;
      const double x0 = values[i];
      const double h = options.eps_scale * std::max(1.0, std::abs(x0));
      values[i] = x0 + h;
      const double fp = eval_scalar(fn, inputs);
      values[i] = x0 - h;
      const double fm = eval_scalar(fn, inputs);
      values[i] = x0;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[k][i];
      const double err =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      ++result.coords_checked;
      if (err > result.max_rel_error || result.coords_checked == 1) {
        result.max_rel_error = err;
        result.worst_input = k;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    inputs[k].zero_grad();
    inputs[k].set_requires_grad(saved_flags[k]);
  }
  return result;
}

}  // namespace lidsn
