#include "lidsn/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "lidsn/error.hpp"

namespace lidsn {

namespace {

std::atomic<std::uint64_t> g_next_id{1};
thread_local Tape* t_active_tape = nullptr;

std::shared_ptr<detail::TensorImpl> new_impl(Shape shape, std::vector<double> data,
                                             bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return impl;
}

const detail::TensorImpl& checked(const std::shared_ptr<detail::TensorImpl>& impl) {
  if (!impl) throw Error("use of an undefined tensor");
  return *impl;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(new_impl(std::move(shape), std::move(data), requires_grad)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

std::uint64_t Tensor::id() const { return checked(impl_).id; }
const Shape& Tensor::shape() const { return checked(impl_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

std::span<const double> Tensor::data() const { return checked(impl_).data; }

std::span<double> Tensor::mutable_data() {
  checked(impl_);
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on non-scalar tensor " + shape_str(shape()));
  return data()[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw DimensionError("at(row, col) on tensor " + shape_str(shape()));
  return data()[row * shape()[1] + col];
}

bool Tensor::requires_grad() const { return checked(impl_).requires_grad; }

void Tensor::set_requires_grad(bool value) {
  checked(impl_);
  impl_->requires_grad = value;
}

bool Tensor::has_grad() const { return !checked(impl_).grad.empty(); }

std::span<const double> Tensor::grad() const { return checked(impl_).grad; }

std::span<double> Tensor::mutable_grad() {
  checked(impl_);
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  checked(impl_);
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  const auto& impl = checked(impl_);
  return Tensor(impl.shape, impl.data, false);
}

void Tape::record(const char* op, std::initializer_list<const Tensor*> inputs,
                  const Tensor& output, BackwardFn backward) {
  Entry entry{op, {}, output.id(), output.impl(), std::move(backward)};
  entry.inputs.reserve(inputs.size());
  for (const Tensor* t : inputs) {
    if (t->id() >= entry.output_id) throw Error(std::string("tape order violated by ") + op);
    entry.inputs.push_back(t->impl());
  }
  output.impl()->requires_grad = true;
  entries_.push_back(std::move(entry));
}

void Tape::record(const char* op, std::span<const Tensor> inputs, const Tensor& output,
                  BackwardFn backward) {
  Entry entry{op, {}, output.id(), output.impl(), std::move(backward)};
  entry.inputs.reserve(inputs.size());
  for (const Tensor& t : inputs) {
    if (t.id() >= entry.output_id) throw Error(std::string("tape order violated by ") + op);
    entry.inputs.push_back(t.impl());
  }
  output.impl()->requires_grad = true;
  entries_.push_back(std::move(entry));
}

TapeScope::TapeScope(Tape& tape) : previous_(t_active_tape) { t_active_tape = &tape; }
TapeScope::~TapeScope() { t_active_tape = previous_; }

Tape* active_tape() noexcept { return t_active_tape; }

GradientMap backward(const Tensor& loss, Tape& tape) {
  if (loss.numel() != 1) {
    throw DimensionError("backward needs a scalar loss, got " + shape_str(loss.shape()));
  }
  const auto entries = tape.entries();
  std::size_t end = entries.size();
  while (end > 0 && entries[end - 1].output_id != loss.id()) --end;
  if (end == 0) throw Error("backward: loss was not produced on this tape");

  Tensor seed = loss;
  seed.mutable_grad()[0] += 1.0;

  std::unordered_set<std::uint64_t> produced;
  produced.reserve(end);
  for (std::size_t k = 0; k < end; ++k) produced.insert(entries[k].output_id);

  for (std::size_t k = end; k-- > 0;) {
    const auto& entry = entries[k];
    if (entry.output->grad.empty()) continue;
    entry.backward(entry.output->grad);
  }

  GradientMap result;
  std::unordered_set<std::uint64_t> seen;
  for (std::size_t k = 0; k < end; ++k) {
    for (const auto& input : entries[k].inputs) {
      if (!input->requires_grad || produced.count(input->id) || !seen.insert(input->id).second) {
        continue;
      }
      result.leaves.push_back(Tensor::wrap(input));
    }
  }
  tape.clear();
  return result;
}

namespace detail {

Tensor make_result(const char* op, Shape shape, std::vector<double> data) {
  for (double v : data) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + " produced a non-finite value");
  }
  return Tensor(std::move(shape), std::move(data), false);
}

bool wants_grad(std::initializer_list<const Tensor*> inputs) {
  if (t_active_tape == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

bool wants_grad(std::span<const Tensor> inputs) {
  if (t_active_tape == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor& t) { return t.requires_grad(); });
}

}  // namespace detail

}  // namespace lidsn
