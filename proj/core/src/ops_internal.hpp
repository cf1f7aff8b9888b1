#pragma once

#include <span>
#include <string>

#include "lidsn/error.hpp"
#include "lidsn/tensor.hpp"

namespace lidsn::detail {

/// Gradient buffer of `t` (allocated on demand). `t` must stay alive while the span is used.
inline std::span<double> grad_buffer(Tensor t) { return t.mutable_grad(); }

inline void record(const char* op, std::initializer_list<const Tensor*> inputs, const Tensor& out,
                   Tape::BackwardFn fn) {
  active_tape()->record(op, inputs, out, std::move(fn));
}

/// Splits `shape` around `axis` into (outer, extent, inner) for strided loops.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

inline AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for " + shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

inline Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

inline void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " +
                         std::to_string(rank) + ", got " + shape_str(t.shape()));
  }
}

}  // namespace lidsn::detail
