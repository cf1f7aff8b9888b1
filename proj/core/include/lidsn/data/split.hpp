#pragma once

#include <string_view>
#include <vector>

#include "lidsn/data/epochs.hpp"

namespace lidsn::data {

enum class Protocol { co, cv, loso };

std::string_view to_string(Protocol p);
Protocol parse_protocol(std::string_view text);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct SplitPlan {
  Protocol protocol = Protocol::co;
  std::vector<Fold> folds;
};

struct SplitParams {
  double train_fraction = 0.8;  // CO: leading share of each subject's trials
  std::size_t n_folds = 5;      // CV
};

/// Sizes of `n_segments` contiguous segments covering `n` items; the remainder goes to
/// the earliest segments (12 into 5 -> 3,3,2,2,2).
std::vector<std::size_t> segment_sizes(std::size_t n, std::size_t n_segments);

/// CO: one fold, per subject the first train_fraction of its trials (file order) train.
/// CV: n_folds folds; fold k tests the k-th contiguous segment of every subject.
/// LOSO: one fold per subject (ascending id) testing all of that subject's trials.
/// Index lists are ascending.
SplitPlan make_split(const EpochSet& set, Protocol protocol, const SplitParams& params = {});

}  // namespace lidsn::data
