#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace lidsn::train {

enum class ClassWeightMode { uniform, inverse_frequency };

const char* to_string(ClassWeightMode mode);
/// "uniform" or "inverse-frequency"; throws ConfigError otherwise.
ClassWeightMode parse_class_weight_mode(std::string_view text);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t patience = 20;  // epochs without validation-loss improvement
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2 term added to the gradient
  std::uint64_t seed = 0;
  ClassWeightMode class_weights = ClassWeightMode::inverse_frequency;
  double val_fraction = 0.1;  // chronological tail of each subject's training trials

  /// Throws ConfigError("invalid train config: ...").
  void validate() const;
};

}  // namespace lidsn::train
