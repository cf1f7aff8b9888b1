#include "lidsn/train/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <nlohmann/json.hpp>
#include <set>
#include <thread>

#include "lidsn/error.hpp"
#include "lidsn/train/snapshot.hpp"

namespace lidsn::train {

using json = nlohmann::ordered_json;

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> validation_tail(
    const data::EpochSet& set, std::span<const std::size_t> train, double fraction) {
  std::vector<std::size_t> keep, val;
  std::vector<int> subjects;
  for (auto i : train) subjects.push_back(set.subjects.at(i));
  std::ranges::sort(subjects);
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  for (int s : subjects) {
    std::vector<std::size_t> mine;
    for (auto i : train)
      if (set.subjects[i] == s) mine.push_back(i);
    std::ranges::sort(mine);
    std::size_t n_val = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(mine.size()) + 1e-9));
    if (n_val == 0 && mine.size() >= 2) n_val = 1;
    keep.insert(keep.end(), mine.begin(), mine.end() - static_cast<std::ptrdiff_t>(n_val));
    val.insert(val.end(), mine.end() - static_cast<std::ptrdiff_t>(n_val), mine.end());
  }
  std::ranges::sort(keep);
  std::ranges::sort(val);
  return {std::move(keep), std::move(val)};
}

FoldData prepare_fold(const data::EpochSet& raw, const data::Fold& fold, const Preprocessing& prep,
                      double val_fraction) {
  const auto [train_idx, val_idx] = validation_tail(raw, fold.train, val_fraction);
  data::EpochSet aligned;
  const data::EpochSet* source = &raw;
  if (prep.ea) {
    if (prep.ea_train_only) {
      std::unique_ptr<bool[]> mask(new bool[raw.n_trials()]());
      for (auto i : fold.train) mask[i] = true;
      aligned = data::euclidean_align(raw, std::span<const bool>(mask.get(), raw.n_trials()));
    } else {
      aligned = data::euclidean_align(raw);
    }
    source = &aligned;
  }
  FoldData d{source->subset(train_idx), source->subset(val_idx), source->subset(fold.test)};
  if (prep.rpsd) {
    d.train = data::rpsd_features(d.train, prep.rpsd_params);
    d.val = data::rpsd_features(d.val, prep.rpsd_params);
    d.test = data::rpsd_features(d.test, prep.rpsd_params);
  }
  return d;
}

model::ModelConfig fit_geometry(model::ModelConfig cfg, const data::EpochSet& set) {
  cfg.n_channels = set.n_channels;
  cfg.n_samples = set.n_samples;
  cfg.n_classes = set.n_classes;
  return cfg;
}

namespace {

FoldReport run_fold(const data::EpochSet& set, const data::Fold& fold, std::size_t index,
                    const model::ModelConfig& model_cfg, const TrainConfig& train_cfg,
                    const Preprocessing& prep, std::unique_ptr<model::LidsnModel>& model_out) {
  const auto t0 = std::chrono::steady_clock::now();
  FoldReport r;
  r.fold = index;
  std::set<int> subjects;
  for (auto i : fold.test) subjects.insert(set.subjects[i]);
  r.test_subjects.assign(subjects.begin(), subjects.end());

  const FoldData d = prepare_fold(set, fold, prep, train_cfg.val_fraction);
  r.n_train = d.train.n_trials();
  r.n_val = d.val.n_trials();
  r.n_test = d.test.n_trials();
  auto model = std::make_unique<model::LidsnModel>(fit_geometry(model_cfg, d.train), train_cfg.seed);
  r.training = fit(*model, d.train, d.val, train_cfg);
  round_to_f32(model->params());
  r.train_eval = evaluate(*model, d.train);
  r.test_eval = evaluate(*model, d.test);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  model_out = std::move(model);
  return r;
}

}  // namespace

ProtocolReport run_protocol(const data::EpochSet& set, const data::SplitPlan& plan,
                            const model::ModelConfig& model_cfg, const TrainConfig& train_cfg,
                            const Preprocessing& prep, std::size_t threads,
                            const FoldCallback& on_fold) {
  train_cfg.validate();
  set.validate();
  if (plan.folds.empty()) throw DataError("run_protocol: split plan has no folds");
  const auto t0 = std::chrono::steady_clock::now();
  ProtocolReport report;
  report.protocol = plan.protocol;
  report.seed = train_cfg.seed;
  report.folds.resize(plan.folds.size());

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t f = next++; f < plan.folds.size(); f = next++) {
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      try {
        std::unique_ptr<model::LidsnModel> model;
        FoldReport r = run_fold(set, plan.folds[f], f, model_cfg, train_cfg, prep, model);
        std::lock_guard lock(mu);
        report.folds[f] = std::move(r);
        if (on_fold) on_fold(report.folds[f], *model);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(threads, 1, plan.folds.size());
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<double> acc, f1;
  for (const auto& r : report.folds) {
    acc.push_back(r.test_eval.accuracy);
    f1.push_back(r.test_eval.macro_f1);
  }
  report.accuracy = aggregate(acc);
  report.macro_f1 = aggregate(f1);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

namespace {

json eval_json(const Evaluation& e) {
  json j;
  j["n"] = e.n;
  j["accuracy"] = e.accuracy;
  j["macro_f1"] = e.macro_f1;
  if (e.positive_f1) j["positive_f1"] = *e.positive_f1;
  j["confusion"] = e.confusion;
  json classes = json::array();
  for (const auto& c : e.per_class) {
    classes.push_back({{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}});
  }
  j["per_class"] = std::move(classes);
  return j;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string report_json(const ProtocolReport& report) {
  json j;
  j["protocol"] = data::to_string(report.protocol);
  j["seed"] = report.seed;
  json folds = json::array();
  for (const auto& r : report.folds) {
    json f;
    f["fold"] = r.fold;
    f["test_subjects"] = r.test_subjects;
    f["n_train"] = r.n_train;
    f["n_val"] = r.n_val;
    f["n_test"] = r.n_test;
    f["stop_epoch"] = r.training.stop_epoch;
    f["stop_reason"] = to_string(r.training.stop_reason);
    f["best_epoch"] = r.training.best_epoch;
    f["best_val_loss"] = r.training.best_val_loss;
    f["class_weights"] = r.training.class_weights;
    json epochs = json::array();
    for (const auto& e : r.training.curve) {
      epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss},
                        {"val_acc", e.val_acc}});
    }
    f["epochs"] = std::move(epochs);
    f["train"] = eval_json(r.train_eval);
    f["test"] = eval_json(r.test_eval);
    folds.push_back(std::move(f));
  }
  j["folds"] = std::move(folds);
  j["accuracy"] = {{"mean", report.accuracy.mean}, {"std", report.accuracy.std}};
  j["macro_f1"] = {{"mean", report.macro_f1.mean}, {"std", report.macro_f1.std}};
  return j.dump(2) + "\n";
}

std::string curves_csv(const ProtocolReport& report) {
  std::string out = "fold,epoch,train_loss,val_loss,val_acc\n";
  for (const auto& r : report.folds)
    for (const auto& e : r.training.curve) {
      out += std::to_string(r.fold) + "," + std::to_string(e.epoch) + "," + fmt(e.train_loss) + "," +
             fmt(e.val_loss) + "," + fmt(e.val_acc) + "\n";
    }
  return out;
}

std::string confusion_csv(const Evaluation& eval) {
  std::string out = "true\\pred";
  for (std::size_t k = 0; k < eval.confusion.size(); ++k) out += "," + std::to_string(k);
  out += "\n";
  for (std::size_t i = 0; i < eval.confusion.size(); ++i) {
    out += std::to_string(i);
    for (auto v : eval.confusion[i]) out += "," + std::to_string(v);
    out += "\n";
  }
  return out;
}

}  // namespace lidsn::train
