#pragma once

#include <array>
#include <span>
#include <vector>

#include "lidsn/data/epochs.hpp"

namespace lidsn::data {

/// Per-subject whitening: every trial of subject s becomes R_s^{-1/2} X with
/// R_s = mean_i X_i X_i^T / T. When `fit_mask` is given, R_s is estimated only from the
/// masked trials of s (falling back to all of its trials if none are masked).
/// Throws DataError naming the subject when R_s is not positive definite even after
/// adding 1e-10 I.
EpochSet euclidean_align(const EpochSet& set, std::span<const bool> fit_mask = {});

/// Mean trial covariance of one subject, row-major [C x C].
std::vector<double> mean_covariance(const EpochSet& set, int subject);

struct Band {
  double lo_hz;
  double hi_hz;  // half-open [lo, hi)
};

/// delta, theta, alpha, beta, low/mid/high gamma.
std::array<Band, 7> default_bands();

struct RpsdParams {
  double outer_seconds = 20.0;
  double outer_overlap = 0.8;
  double inner_seconds = 4.0;
  double inner_overlap = 0.75;
  std::vector<Band> bands;  // empty selects default_bands()
};

/// Window length and hop in samples for a window of `seconds` and fractional `overlap`.
struct Windowing {
  std::size_t length;
  std::size_t hop;
  std::size_t count;  // windows fitting in the span
};
Windowing windowing(std::size_t span, double fs, double seconds, double overlap);

/// Hann-windowed periodogram power summed per band, divided by the total over bands.
/// A segment with no power in any band yields the uniform vector.
std::vector<double> relative_band_power(std::span<const double> segment, double fs,
                                        std::span<const Band> bands);

/// Each outer window of each trial becomes one output trial of shape
/// [C x (n_inner * n_bands)]: inner sub-segment band vectors concatenated per channel, then
/// z-scored per channel (a constant row becomes zeros). Labels and subjects are inherited.
EpochSet rpsd_features(const EpochSet& set, const RpsdParams& params = {});

}  // namespace lidsn::data
