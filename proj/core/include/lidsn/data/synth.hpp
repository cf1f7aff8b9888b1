#pragma once

#include <cstdint>
#include <vector>

#include "lidsn/data/epochs.hpp"

namespace lidsn::data {

struct ClassRecipe {
  double freq_hz = 10.0;
  std::vector<std::size_t> channels;
  double amplitude = 1.0;
};

/// Synthetic oscillation-in-noise trials. Each class drives its carrier on its own
/// channel set; every channel carries 1/f^exponent noise plus white noise.
struct SynthSpec {
  std::size_t n_subjects = 4;
  std::size_t trials_per_subject = 50;  // split evenly across classes, order shuffled
  std::size_t n_channels = 8;
  std::size_t n_samples = 512;
  double fs = 128.0;
  std::vector<ClassRecipe> classes;
  double noise_exponent = 1.0;
  double pink_sigma = 1.0;
  double white_sigma = 0.5;
  double gain_spread = 0.3;     // subject channel gains drawn from 1 +/- spread
  double freq_jitter_hz = 1.0;  // subject carrier offsets drawn from +/- jitter

  std::size_t n_classes() const noexcept { return classes.size(); }
  /// Throws ConfigError on carriers at or above Nyquist, bad channel sets, or empty sizes.
  void validate() const;

  /// 8 channels, 4 s at 128 Hz, 10 Hz on {2,3} vs 22 Hz on {5,6}, 100 trials per class.
  static SynthSpec two_class_default();
};

EpochSet synth_generate(const SynthSpec& spec, std::uint64_t seed);

}  // namespace lidsn::data
