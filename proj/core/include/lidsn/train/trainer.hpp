#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "lidsn/data/epochs.hpp"
#include "lidsn/model/network.hpp"
#include "lidsn/train/config.hpp"
#include "lidsn/train/metrics.hpp"

namespace lidsn::train {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

enum class StopReason { early_stop, max_epochs };
const char* to_string(StopReason reason);

struct TrainResult {
  std::vector<EpochRecord> curve;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::size_t stop_epoch = 0;
  StopReason stop_reason = StopReason::max_epochs;
  std::size_t steps = 0;  // optimizer updates, short final batches included
  std::vector<double> class_weights;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch training with early stopping on validation loss. On return the model
/// holds the parameters and batch-norm statistics of the best validation epoch.
TrainResult fit(model::LidsnModel& model, const data::EpochSet& train_set,
                const data::EpochSet& val_set, const TrainConfig& cfg,
                const EpochCallback& on_epoch = {});

struct Predictions {
  std::vector<int> predicted;
  double loss = 0.0;  // weighted cross-entropy averaged over trials
};

/// Eval-mode forward over `set` in batches; ties resolve to the lowest class index.
Predictions predict_set(model::LidsnModel& model, const data::EpochSet& set,
                        std::span<const double> class_weights, std::size_t batch_size = 64);

/// Eval-mode ACC, macro-F1 and confusion matrix. Throws DataError on an empty set.
Evaluation evaluate(model::LidsnModel& model, const data::EpochSet& set);

/// Stacks trials `indices` of `set` into [B x C x T].
Tensor batch_tensor(const data::EpochSet& set, std::span<const std::size_t> indices);

}  // namespace lidsn::train
