#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace lidsn::train {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct Evaluation {
  std::size_t n = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> positive_f1;  // binary tasks: F1 of class 1
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<ClassMetrics> per_class;
};

/// Metrics of a confusion matrix; 0/0 is taken as 0. Throws DataError when empty.
Evaluation metrics_from_confusion(std::vector<std::vector<std::size_t>> confusion);

/// Confusion matrix of `predicted` against `truth`, then metrics_from_confusion.
Evaluation score_predictions(std::span<const int> truth, std::span<const int> predicted,
                             std::size_t n_classes);

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
};

Aggregate aggregate(std::span<const double> values);

}  // namespace lidsn::train
