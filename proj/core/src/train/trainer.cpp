#include "lidsn/train/trainer.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <numeric>
#include <string>

#include "lidsn/error.hpp"
#include "lidsn/ops.hpp"
#include "lidsn/train/optim.hpp"

namespace lidsn::train {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348;
constexpr std::uint64_t kDropoutStream = 0x4452;

void check_geometry(const model::ModelConfig& cfg, const data::EpochSet& set, const char* role) {
  if (set.n_channels != cfg.n_channels || set.n_samples != cfg.n_samples ||
      set.n_classes != cfg.n_classes) {
    throw DimensionError(std::string(role) + " set is " + std::to_string(set.n_channels) + " channels x " +
                         std::to_string(set.n_samples) + " samples x " + std::to_string(set.n_classes) +
                         " classes, model expects " + std::to_string(cfg.n_channels) + " x " +
                         std::to_string(cfg.n_samples) + " x " + std::to_string(cfg.n_classes));
  }
}

void copy_params(model::LidsnParams& dst, model::LidsnParams& src) {
  const auto d = dst.named_parameters(), s = src.named_parameters();
  for (std::size_t i = 0; i < d.size(); ++i) {
    Tensor handle = d[i].second;
    std::ranges::copy(s[i].second.data(), handle.mutable_data().begin());
  }
  const auto db = dst.named_buffers(), sb = src.named_buffers();
  for (std::size_t i = 0; i < db.size(); ++i) *db[i].second = *sb[i].second;
}

}  // namespace

const char* to_string(StopReason reason) {
  return reason == StopReason::early_stop ? "early_stop" : "max_epochs";
}

Tensor batch_tensor(const data::EpochSet& set, std::span<const std::size_t> indices) {
  const std::size_t per = set.trial_size();
  std::vector<double> values(indices.size() * per);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto trial = set.trial(indices[b]);
    std::memcpy(values.data() + b * per, trial.data(), per * sizeof(double));
  }
  return Tensor({indices.size(), set.n_channels, set.n_samples}, std::move(values));
}

Predictions predict_set(model::LidsnModel& model, const data::EpochSet& set,
                        std::span<const double> class_weights, std::size_t batch_size) {
  check_geometry(model.config(), set, "evaluation");
  if (set.n_trials() == 0) throw DataError("evaluate: empty set");
  if (batch_size == 0) batch_size = 1;
  Predictions out;
  out.predicted.reserve(set.n_trials());
  RngStream unused(0);
  std::vector<std::size_t> idx;
  double total = 0.0;
  const std::size_t k = model.config().n_classes;
  for (std::size_t b0 = 0; b0 < set.n_trials(); b0 += batch_size) {
    idx.resize(std::min(batch_size, set.n_trials() - b0));
    std::iota(idx.begin(), idx.end(), b0);
    const Tensor logits = model.forward(batch_tensor(set, idx), Mode::eval, unused);
    const std::span<const int> labels(set.labels.data() + b0, idx.size());
    total += weighted_cross_entropy(logits, labels, class_weights).item() *
             static_cast<double>(idx.size());
    const auto v = logits.data();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto row = v.subspan(i * k, k);
      out.predicted.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
  }
  out.loss = total / static_cast<double>(set.n_trials());
  return out;
}

Evaluation evaluate(model::LidsnModel& model, const data::EpochSet& set) {
  const std::vector<double> ones(model.config().n_classes, 1.0);
  const Predictions p = predict_set(model, set, ones);
  return score_predictions(set.labels, p.predicted, model.config().n_classes);
}

TrainResult fit(model::LidsnModel& model, const data::EpochSet& train_set,
                const data::EpochSet& val_set, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  check_geometry(model.config(), train_set, "training");
  check_geometry(model.config(), val_set, "validation");
  if (train_set.n_trials() == 0) throw DataError("train: empty training set");
  if (val_set.n_trials() == 0) throw DataError("train: empty validation set");

  TrainResult result;
  result.class_weights = class_weights(train_set.labels, model.config().n_classes, cfg.class_weights);
  const auto params = model.params().named_parameters();
  AdamState adam = adam_init(params);
  RngStream order_rng(cfg.seed, kShuffleStream);
  RngStream dropout_rng(cfg.seed, kDropoutStream);

  const std::size_t n = train_set.n_trials();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> labels;
  model::LidsnParams best = model::clone_params(model.params());
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle(order, order_rng);
    double total = 0.0;
    for (std::size_t b0 = 0; b0 < n; b0 += cfg.batch_size) {
      const std::span<const std::size_t> idx(order.data() + b0, std::min(cfg.batch_size, n - b0));
      labels.clear();
      for (auto i : idx) labels.push_back(train_set.labels[i]);
      for (const auto& [name, t] : params) {
        Tensor handle = t;
        handle.zero_grad();
      }
      Tape tape;
      TapeScope scope(tape);
      const Tensor logits = model.forward(batch_tensor(train_set, idx), Mode::train, dropout_rng);
      const Tensor loss = weighted_cross_entropy(logits, labels, result.class_weights);
      backward(loss, tape);
      adam_step(params, adam, cfg);
      ++result.steps;
      total += loss.item() * static_cast<double>(idx.size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(n);
    const Predictions val = predict_set(model, val_set, result.class_weights);
    rec.val_loss = val.loss;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < val.predicted.size(); ++i) hits += val.predicted[i] == val_set.labels[i];
    rec.val_acc = static_cast<double>(hits) / static_cast<double>(val_set.n_trials());
    result.curve.push_back(rec);
    result.stop_epoch = epoch;
    if (on_epoch) on_epoch(rec);

    if (rec.val_loss < result.best_val_loss) {
      result.best_val_loss = rec.val_loss;
      result.best_epoch = epoch;
      best = model::clone_params(model.params());
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      result.stop_reason = StopReason::early_stop;
      break;
    }
  }
  for (const auto& [name, t] : params) {
    Tensor handle = t;
    handle.zero_grad();
  }
  copy_params(model.params(), best);
  return result;
}

}  // namespace lidsn::train
