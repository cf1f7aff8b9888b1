#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lidsn/data/epochs.hpp"
#include "lidsn/data/preprocess.hpp"
#include "lidsn/data/split.hpp"
#include "lidsn/model/network.hpp"
#include "lidsn/train/trainer.hpp"

namespace lidsn::train {

struct Preprocessing {
  bool ea = true;
  bool ea_train_only = false;  // fit alignment on the fold's training trials only
  bool rpsd = false;
  data::RpsdParams rpsd_params;
};

struct FoldData {
  data::EpochSet train;
  data::EpochSet val;
  data::EpochSet test;
};

/// Validation indices: the last `fraction` of each subject's training trials (at least
/// one for subjects with two or more). Returns {train, val}, both sorted.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> validation_tail(
    const data::EpochSet& set, std::span<const std::size_t> train, double fraction);

/// Splits `raw` by `fold`, holds out the validation tail, then applies alignment and
/// rPSD features to each part.
FoldData prepare_fold(const data::EpochSet& raw, const data::Fold& fold,
                      const Preprocessing& prep, double val_fraction);

/// `cfg` with channel, sample and class counts taken from `set`.
model::ModelConfig fit_geometry(model::ModelConfig cfg, const data::EpochSet& set);

struct FoldReport {
  std::size_t fold = 0;
  std::vector<int> test_subjects;
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  TrainResult training;
  Evaluation train_eval;  // best snapshot rounded to f32, on the fold's training part
  Evaluation test_eval;
  double wall_seconds = 0.0;
};

struct ProtocolReport {
  data::Protocol protocol = data::Protocol::co;
  std::uint64_t seed = 0;
  std::vector<FoldReport> folds;
  Aggregate accuracy;
  Aggregate macro_f1;
  double wall_seconds = 0.0;
};

using FoldCallback = std::function<void(const FoldReport&, model::LidsnModel&)>;

/// Trains a freshly initialized model per fold and evaluates it on the fold's test
/// trials. Folds run on up to `threads` workers; results do not depend on the count.
/// `on_fold` is called once per finished fold, serialized.
ProtocolReport run_protocol(const data::EpochSet& set, const data::SplitPlan& plan,
                            const model::ModelConfig& model_cfg, const TrainConfig& train_cfg,
                            const Preprocessing& prep, std::size_t threads = 1,
                            const FoldCallback& on_fold = {});

/// Deterministic JSON for a report; wall-clock times are left out.
std::string report_json(const ProtocolReport& report);
/// "fold,epoch,train_loss,val_loss,val_acc" rows in fold then epoch order.
std::string curves_csv(const ProtocolReport& report);
/// Confusion matrix as CSV with a "true\\pred" header row.
std::string confusion_csv(const Evaluation& eval);

}  // namespace lidsn::train
