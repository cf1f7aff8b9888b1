#include "lidsn/train/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lidsn/error.hpp"

namespace lidsn::train {

Evaluation metrics_from_confusion(std::vector<std::vector<std::size_t>> confusion) {
  const std::size_t k = confusion.size();
  for (const auto& row : confusion) {
    if (row.size() != k) throw DimensionError("confusion matrix must be square");
  }
  Evaluation e;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      e.n += confusion[i][j];
      if (i == j) correct += confusion[i][j];
    }
  if (e.n == 0) throw DataError("evaluate: empty set");
  e.accuracy = static_cast<double>(correct) / static_cast<double>(e.n);
  e.per_class.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t tp = confusion[c][c], predicted = 0, actual = 0;
    for (std::size_t i = 0; i < k; ++i) {
      predicted += confusion[i][c];
      actual += confusion[c][i];
    }
    auto& m = e.per_class[c];
    m.support = actual;
    m.precision = predicted == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted);
    m.recall = actual == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(actual);
    const double denom = m.precision + m.recall;
    m.f1 = denom == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / denom;
    e.macro_f1 += m.f1;
  }
  e.macro_f1 /= static_cast<double>(k);
  if (k == 2) e.positive_f1 = e.per_class[1].f1;
  e.confusion = std::move(confusion);
  return e;
}

Evaluation score_predictions(std::span<const int> truth, std::span<const int> predicted,
                             std::size_t n_classes) {
  if (truth.size() != predicted.size()) {
    throw DimensionError("score_predictions: " + std::to_string(truth.size()) + " labels vs " +
                         std::to_string(predicted.size()) + " predictions");
  }
  std::vector<std::vector<std::size_t>> confusion(n_classes, std::vector<std::size_t>(n_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto y = static_cast<std::size_t>(truth[i]), p = static_cast<std::size_t>(predicted[i]);
    if (truth[i] < 0 || predicted[i] < 0 || y >= n_classes || p >= n_classes) {
      throw DataError("score_predictions: class index out of range at trial " + std::to_string(i));
    }
    ++confusion[y][p];
  }
  return metrics_from_confusion(std::move(confusion));
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  if (values.empty()) return a;
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; })) {
    a.mean = values[0];
    return a;
  }
  for (double v : values) a.mean += v;
  a.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return a;
}

}  // namespace lidsn::train
