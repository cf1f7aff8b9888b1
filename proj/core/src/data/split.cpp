#include "lidsn/data/split.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lidsn/error.hpp"

namespace lidsn::data {

std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::co: return "CO";
    case Protocol::cv: return "CV";
    case Protocol::loso: return "LOSO";
  }
  return "?";
}

Protocol parse_protocol(std::string_view text) {
  if (text == "CO") return Protocol::co;
  if (text == "CV") return Protocol::cv;
  if (text == "LOSO") return Protocol::loso;
  throw ConfigError("unknown protocol '" + std::string(text) + "' (expected CO, CV or LOSO)");
}

std::vector<std::size_t> segment_sizes(std::size_t n, std::size_t n_segments) {
  if (n_segments == 0) throw ConfigError("segment_sizes: need at least one segment");
  std::vector<std::size_t> sizes(n_segments, n / n_segments);
  for (std::size_t i = 0; i < n % n_segments; ++i) ++sizes[i];
  return sizes;
}

SplitPlan make_split(const EpochSet& set, Protocol protocol, const SplitParams& params) {
  set.validate();
  if (set.n_trials() == 0) throw DataError("make_split: empty epoch set");
  SplitPlan plan;
  plan.protocol = protocol;
  const auto subjects = set.subject_ids();

  switch (protocol) {
    case Protocol::co: {
      if (!(params.train_fraction > 0.0 && params.train_fraction < 1.0)) {
        throw ConfigError("make_split: train_fraction must lie in (0, 1)");
      }
      Fold fold;
      for (int s : subjects) {
        const auto trials = set.trials_of(s);
        const auto n_train = static_cast<std::size_t>(
            std::floor(static_cast<double>(trials.size()) * params.train_fraction + 1e-9));
        fold.train.insert(fold.train.end(), trials.begin(), trials.begin() + n_train);
        fold.test.insert(fold.test.end(), trials.begin() + n_train, trials.end());
      }
      plan.folds.push_back(std::move(fold));
      break;
    }
    case Protocol::cv: {
      const std::size_t k = params.n_folds;
      if (k < 2) throw ConfigError("make_split: CV needs at least 2 folds");
      plan.folds.resize(k);
      for (int s : subjects) {
        const auto trials = set.trials_of(s);
        if (trials.size() < k) {
          throw DataError("make_split: subject " + std::to_string(s) + " has " +
                          std::to_string(trials.size()) + " trials, CV needs at least " +
                          std::to_string(k));
        }
        std::size_t begin = 0;
        const auto sizes = segment_sizes(trials.size(), k);
        for (std::size_t f = 0; f < k; ++f) {
          for (std::size_t j = 0; j < trials.size(); ++j) {
            auto& dst = (j >= begin && j < begin + sizes[f]) ? plan.folds[f].test : plan.folds[f].train;
            dst.push_back(trials[j]);
          }
          begin += sizes[f];
        }
      }
      break;
    }
    case Protocol::loso: {
      if (subjects.size() < 2) throw DataError("make_split: LOSO needs at least two subjects");
      for (int s : subjects) {
        Fold fold;
        for (std::size_t i = 0; i < set.n_trials(); ++i)
          (set.subjects[i] == s ? fold.test : fold.train).push_back(i);
        plan.folds.push_back(std::move(fold));
      }
      break;
    }
  }
  for (auto& f : plan.folds) {
    std::sort(f.train.begin(), f.train.end());
    std::sort(f.test.begin(), f.test.end());
  }
  return plan;
}

}  // namespace lidsn::data
