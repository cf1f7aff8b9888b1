#include "lidsn/data/synth.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "lidsn/error.hpp"
#include "lidsn/rng.hpp"

namespace lidsn::data {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Unit-variance 1/f^exponent noise by spectral shaping: random complex coefficients scaled
// by f^(-exponent/2) on bins 1..N/2, synthesized with a precomputed cosine table.
class PinkNoise {
 public:
  PinkNoise(std::size_t n, double exponent) : n_(n), cos_(n), sin_(n), scale_(n / 2 + 1, 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      cos_[i] = std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
      sin_[i] = std::sin(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
    }
    for (std::size_t k = 1; k < scale_.size(); ++k)
      scale_[k] = std::pow(static_cast<double>(k), -exponent / 2.0);
  }

  void fill(double* out, RngStream& rng, double sigma) const {
    std::vector<double> re(scale_.size()), im(scale_.size());
    for (std::size_t k = 1; k < scale_.size(); ++k) {
      re[k] = rng.normal() * scale_[k];
      im[k] = rng.normal() * scale_[k];
    }
    double energy = 0.0;
    for (std::size_t t = 0; t < n_; ++t) {
      double acc = 0.0;
      std::size_t idx = 0;  // k * t mod n
      for (std::size_t k = 1; k < scale_.size(); ++k) {
        idx += t;
        if (idx >= n_) idx -= n_;
        acc += re[k] * cos_[idx] - im[k] * sin_[idx];
      }
      out[t] = acc;
      energy += acc * acc;
    }
    const double rms = std::sqrt(energy / static_cast<double>(n_));
    const double gain = rms > 0.0 ? sigma / rms : 0.0;
    for (std::size_t t = 0; t < n_; ++t) out[t] *= gain;
  }

 private:
  std::size_t n_;
  std::vector<double> cos_, sin_, scale_;
};

}  // namespace

void SynthSpec::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid synth spec: " + what); };
  if (n_subjects == 0 || trials_per_subject == 0) fail("n_subjects and trials_per_subject must be >= 1");
  if (n_channels == 0 || n_samples < 2) fail("need at least one channel and two samples");
  if (!(fs > 0.0)) fail("fs must be positive");
  if (classes.size() < 2) fail("need at least two classes");
  if (classes.size() > 65535) fail("too many classes");
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const auto& c = classes[k];
    if (!(c.freq_hz > 0.0) || c.freq_hz + freq_jitter_hz >= fs / 2.0) {
      fail("class " + std::to_string(k) + " carrier " + std::to_string(c.freq_hz) +
           " Hz (with jitter) is not below Nyquist " + std::to_string(fs / 2.0) + " Hz");
    }
    for (std::size_t ch : c.channels)
      if (ch >= n_channels) fail("class " + std::to_string(k) + " uses channel " + std::to_string(ch));
  }
  if (noise_exponent < 0.0 || pink_sigma < 0.0 || white_sigma < 0.0) fail("noise parameters must be >= 0");
  if (gain_spread < 0.0 || gain_spread >= 1.0) fail("gain_spread must lie in [0, 1)");
  if (freq_jitter_hz < 0.0) fail("freq_jitter_hz must be >= 0");
}

SynthSpec SynthSpec::two_class_default() {
  SynthSpec s;
  s.classes = {ClassRecipe{10.0, {2, 3}, 1.0}, ClassRecipe{22.0, {5, 6}, 1.0}};
  return s;
}

EpochSet synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t c = spec.n_channels, t = spec.n_samples, k = spec.n_classes();
  EpochSet set;
  set.n_channels = c;
  set.n_samples = t;
  set.n_classes = k;
  set.fs = spec.fs;
  set.provenance = "synth seed=" + std::to_string(seed);
  set.data.assign(spec.n_subjects * spec.trials_per_subject * c * t, 0.0);
  const PinkNoise pink(t, spec.noise_exponent);
  std::vector<double> buf(t);

  std::size_t trial_index = 0;
  for (std::size_t s = 0; s < spec.n_subjects; ++s) {
    RngStream subject_rng(seed, 0x5000 + s);
    std::vector<double> gain(c), freq(k);
    for (auto& g : gain) g = 1.0 + spec.gain_spread * subject_rng.uniform(-1.0, 1.0);
    for (std::size_t j = 0; j < k; ++j)
      freq[j] = spec.classes[j].freq_hz + spec.freq_jitter_hz * subject_rng.uniform(-1.0, 1.0);
    std::vector<int> order(spec.trials_per_subject);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i % k);
    shuffle(order, subject_rng);

    for (std::size_t i = 0; i < spec.trials_per_subject; ++i, ++trial_index) {
      RngStream rng(seed, (static_cast<std::uint64_t>(s) << 32) | i);
      const int label = order[i];
      const auto& recipe = spec.classes[static_cast<std::size_t>(label)];
      const double phase = rng.uniform(0.0, kTwoPi);
      double* x = set.data.data() + trial_index * c * t;
      for (std::size_t ch : recipe.channels)
        for (std::size_t n = 0; n < t; ++n)
          x[ch * t + n] += recipe.amplitude *
                           std::sin(kTwoPi * freq[label] * static_cast<double>(n) / spec.fs + phase);
      for (std::size_t ch = 0; ch < c; ++ch) {
        double* row = x + ch * t;
        if (spec.pink_sigma > 0.0) {
          pink.fill(buf.data(), rng, spec.pink_sigma);
          for (std::size_t n = 0; n < t; ++n) row[n] += buf[n];
        }
        if (spec.white_sigma > 0.0)
          for (std::size_t n = 0; n < t; ++n) row[n] += rng.normal(0.0, spec.white_sigma);
        for (std::size_t n = 0; n < t; ++n) row[n] *= gain[ch];
      }
      set.labels.push_back(label);
      set.subjects.push_back(static_cast<int>(s));
    }
  }
  return set;
}

}  // namespace lidsn::data
