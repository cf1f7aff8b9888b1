#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lidsn/model/params.hpp"
#include "lidsn/train/config.hpp"

namespace lidsn::train {

/// uniform: all ones. inverse-frequency: w_k = n / (K * n_k).
/// Throws DataError when a class has no trials or a label is out of range.
std::vector<double> class_weights(std::span<const int> labels, std::size_t n_classes,
                                  ClassWeightMode mode);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;
};

AdamState adam_init(std::span<const model::NamedTensor> params);

/// One bias-corrected Adam update from the gradients stored on `params`. A tensor that
/// received no gradient is treated as having a zero gradient. A non-finite gradient
/// throws NumericError naming the tensor before anything is modified.
void adam_step(std::span<const model::NamedTensor> params, AdamState& state,
               const TrainConfig& cfg);

}  // namespace lidsn::train
