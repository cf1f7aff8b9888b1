#include "lidsn/train/optim.hpp"

#include <cmath>
#include <string>

#include "lidsn/error.hpp"

namespace lidsn::train {

std::vector<double> class_weights(std::span<const int> labels, std::size_t n_classes,
                                  ClassWeightMode mode) {
  if (n_classes == 0) throw DataError("class_weights: no classes");
  std::vector<std::size_t> counts(n_classes, 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes) {
      throw DataError("class_weights: label " + std::to_string(y) + " out of range");
    }
    ++counts[static_cast<std::size_t>(y)];
  }
  for (std::size_t k = 0; k < n_classes; ++k) {
    if (counts[k] == 0) throw DataError("class_weights: class " + std::to_string(k) + " has no trials");
  }
  std::vector<double> w(n_classes, 1.0);
  if (mode == ClassWeightMode::inverse_frequency) {
    const double n = static_cast<double>(labels.size());
    for (std::size_t k = 0; k < n_classes; ++k)
      w[k] = n / (static_cast<double>(n_classes) * static_cast<double>(counts[k]));
  }
  return w;
}

AdamState adam_init(std::span<const model::NamedTensor> params) {
  AdamState st;
  for (const auto& [name, t] : params) {
    st.m.emplace_back(t.numel(), 0.0);
    st.v.emplace_back(t.numel(), 0.0);
  }
  return st;
}

void adam_step(std::span<const model::NamedTensor> params, AdamState& state,
               const TrainConfig& cfg) {
  if (state.m.size() != params.size()) {
    throw DimensionError("adam_step: state tracks " + std::to_string(state.m.size()) +
                         " tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, t] = params[i];
    if (state.m[i].size() != t.numel()) throw DimensionError("adam_step: state size mismatch for " + name);
    if (!t.has_grad()) continue;
    for (double g : t.grad()) {
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in " + name);
    }
  }
  ++state.t;
  const double step = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, step);
  const double c2 = 1.0 - std::pow(cfg.beta2, step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].second;
    auto theta = t.mutable_data();
    const bool has = t.has_grad();
    const auto g = has ? t.grad() : std::span<const double>{};
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double gj = (has ? g[j] : 0.0) + cfg.weight_decay * theta[j];
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      theta[j] -= cfg.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg.eps);
    }
  }
}

}  // namespace lidsn::train
