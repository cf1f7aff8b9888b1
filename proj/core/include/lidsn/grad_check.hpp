#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "lidsn/tensor.hpp"

namespace lidsn {

/// Scalar-valued function of a set of tensors. It must be deterministic.
using TensorFn = std::function<Tensor(std::span<const Tensor>)>;

struct GradCheckOptions {
  /// Step for coordinate x is eps_scale * max(1, |x|).
  double eps_scale = 1e-5;
  /// 0 checks every coordinate; otherwise an evenly strided subset of this size per input.
  std::size_t max_coords_per_input = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coords_checked = 0;
};

/// Compares reverse-mode gradients of `fn` against central differences.
///
/// The error of a coordinate is |analytic - numeric| / max(1, |analytic|, |numeric|); the
/// result reports the maximum. Throws Error if two evaluations at the same point differ.
/// Inputs are perturbed in place and restored before returning.
GradCheckResult grad_check(const TensorFn& fn, std::span<Tensor> inputs,
                           const GradCheckOptions& options = {});

}  // namespace lidsn
