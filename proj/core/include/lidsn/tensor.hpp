#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lidsn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

enum class Mode { train, eval };

namespace detail {
struct TensorImpl {
  std::uint64_t id = 0;
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until the first gradient lands
  bool requires_grad = false;
};
}  // namespace detail

/// Dense row-major tensor of doubles with an optional gradient slot.
///
/// A Tensor is a shared handle: copies alias the same storage. Values produced by
/// operations are never modified afterwards; parameters (leaves) are updated in
/// place by the optimizer through mutable_data().
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const noexcept { return impl_ != nullptr; }
  std::uint64_t id() const;

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return data().size(); }

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t flat) const { return data()[flat]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);

  bool has_grad() const;
  std::span<const double> grad() const;
  /// Gradient buffer, allocated zero-filled on first access.
  std::span<double> mutable_grad();
  void zero_grad();

  /// Copy of the values with no gradient tracking.
  Tensor detach() const;

  const std::shared_ptr<detail::TensorImpl>& impl() const noexcept { return impl_; }
  static Tensor wrap(std::shared_ptr<detail::TensorImpl> impl) { return Tensor(std::move(impl)); }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Ordered record of primitive applications for reverse-mode differentiation.
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const double> out_grad)>;

  struct Entry {
    const char* op;
    std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
    std::uint64_t output_id;
    std::shared_ptr<detail::TensorImpl> output;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(const char* op, std::initializer_list<const Tensor*> inputs, const Tensor& output,
              BackwardFn backward);
  void record(const char* op, std::span<const Tensor> inputs, const Tensor& output,
              BackwardFn backward);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::span<const Entry> entries() const noexcept { return entries_; }
  void clear() noexcept { entries_.clear(); }

 private:
  std::vector<Entry> entries_;
};

/// Installs `tape` as the recording target of the current thread for its lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape() noexcept;

/// Leaves (tensors not produced on the tape) that received a gradient.
struct GradientMap {
  std::vector<Tensor> leaves;
};

/// Reverse sweep from a scalar `loss`. Gradients accumulate into every tensor that
/// requires them; the tape is cleared afterwards.
GradientMap backward(const Tensor& loss, Tape& tape);

namespace detail {

/// Result tensor for an op; throws NumericError if any value is non-finite.
Tensor make_result(const char* op, Shape shape, std::vector<double> data);

/// True when a tape is active and at least one input requires a gradient.
bool wants_grad(std::initializer_list<const Tensor*> inputs);
bool wants_grad(std::span<const Tensor> inputs);

}  // namespace detail

}  // namespace lidsn
