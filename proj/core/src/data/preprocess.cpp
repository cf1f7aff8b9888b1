#include "lidsn/data/preprocess.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lidsn/error.hpp"

namespace lidsn::data {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace {

Matrix covariance_of(const EpochSet& set, std::span<const std::size_t> trials) {
  const std::size_t c = set.n_channels, t = set.n_samples;
  Matrix r = Matrix::Zero(c, c);
  for (std::size_t i : trials) {
    Eigen::Map<const Matrix> x(set.trial(i).data(), c, t);
    r.noalias() += x * x.transpose() / static_cast<double>(t);
  }
  return r / static_cast<double>(trials.size());
}

Matrix inverse_sqrt(Matrix r, int subject) {
  if (!r.allFinite()) {
    throw DataError("euclidean_align: mean covariance of subject " + std::to_string(subject) +
                    " has non-finite entries");
  }
  r = (r + r.transpose()) * 0.5;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(r);
  if (eig.info() != Eigen::Success) {
    throw DataError("euclidean_align: eigendecomposition failed for subject " + std::to_string(subject));
  }
  Eigen::VectorXd values = eig.eigenvalues();
  if (values.minCoeff() <= 0.0) {
    eig.compute(r + 1e-10 * Matrix::Identity(r.rows(), r.cols()));
    values = eig.eigenvalues();
    if (eig.info() != Eigen::Success || values.minCoeff() <= 0.0) {
      throw DataError("euclidean_align: mean covariance of subject " + std::to_string(subject) +
                      " is not positive definite (smallest eigenvalue " +
                      std::to_string(values.minCoeff()) + ")");
    }
  }
  const Matrix& v = eig.eigenvectors();
  return v * values.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
}

}  // namespace

std::vector<double> mean_covariance(const EpochSet& set, int subject) {
  const auto trials = set.trials_of(subject);
  if (trials.empty()) throw DataError("mean_covariance: no trials for subject " + std::to_string(subject));
  const Matrix r = covariance_of(set, trials);
  return {r.data(), r.data() + r.size()};
}

EpochSet euclidean_align(const EpochSet& set, std::span<const bool> fit_mask) {
  set.validate();
  if (!fit_mask.empty() && fit_mask.size() != set.n_trials()) {
    throw DataError("euclidean_align: fit mask has " + std::to_string(fit_mask.size()) +
                    " entries for " + std::to_string(set.n_trials()) + " trials");
  }
  const std::size_t c = set.n_channels, t = set.n_samples;
  EpochSet out = set;
  for (int subject : set.subject_ids()) {
    const auto trials = set.trials_of(subject);
    std::vector<std::size_t> fit;
    if (!fit_mask.empty())
      for (std::size_t i : trials)
        if (fit_mask[i]) fit.push_back(i);
    if (fit.empty()) fit = trials;
    const Matrix w = inverse_sqrt(covariance_of(set, fit), subject);
    for (std::size_t i : trials) {
      Eigen::Map<const Matrix> x(set.trial(i).data(), c, t);
      Eigen::Map<Matrix> y(out.trial(i).data(), c, t);
      y.noalias() = w * x;
    }
  }
  out.provenance = set.provenance.empty() ? "aligned" : set.provenance + " | aligned";
  return out;
}

std::array<Band, 7> default_bands() {
  return {{{1, 3}, {4, 8}, {8, 12}, {12, 16}, {16, 20}, {20, 28}, {30, 45}}};
}

Windowing windowing(std::size_t span, double fs, double seconds, double overlap) {
  if (!(seconds > 0.0) || overlap < 0.0 || overlap >= 1.0) {
    throw ConfigError("window of " + std::to_string(seconds) + " s with overlap " +
                      std::to_string(overlap) + " is invalid");
  }
  const auto length = static_cast<std::size_t>(std::llround(seconds * fs));
  if (length < 2 || length > span) {
    throw ConfigError("window of " + std::to_string(seconds) + " s (" + std::to_string(length) +
                      " samples) does not fit a span of " + std::to_string(span) + " samples");
  }
  const auto hop = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(length) * (1.0 - overlap))));
  return {length, hop, (span - length) / hop + 1};
}

namespace {

/// Periodic Hann window, twiddle table and in-band bins for one segment length.
class BandPowerPlan {
 public:
  BandPowerPlan(std::size_t n, double fs, std::span<const Band> bands)
      : n_(n), n_bands_(bands.size()), window_(n), cos_(n), sin_(n) {
    for (std::size_t i = 0; i < n; ++i) {
      const double ang = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
      window_[i] = 0.5 * (1.0 - std::cos(ang));
      cos_[i] = std::cos(ang);
      sin_[i] = std::sin(ang);
    }
    for (std::size_t k = 0; k <= n / 2; ++k) {
      const double f = static_cast<double>(k) * fs / static_cast<double>(n);
      for (std::size_t b = 0; b < bands.size(); ++b)
        if (f >= bands[b].lo_hz && f < bands[b].hi_hz) {
          bins_.push_back({k, b});
          break;
        }
    }
  }

  void apply(std::span<const double> segment, double* out) {
    windowed_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) windowed_[i] = segment[i] * window_[i];
    std::fill(out, out + n_bands_, 0.0);
    for (const auto [k, band] : bins_) {
      double re = 0.0, im = 0.0;
      std::size_t m = 0;
      for (std::size_t i = 0; i < n_; ++i) {
        re += windowed_[i] * cos_[m];
        im -= windowed_[i] * sin_[m];
        m += k;
        if (m >= n_) m -= n_;
      }
      out[band] += re * re + im * im;
    }
    double total = 0.0;
    for (std::size_t b = 0; b < n_bands_; ++b) total += out[b];
    for (std::size_t b = 0; b < n_bands_; ++b)
      out[b] = total > 0.0 ? out[b] / total : 1.0 / static_cast<double>(n_bands_);
  }

 private:
  struct Bin {
    std::size_t k;
    std::size_t band;
  };
  std::size_t n_, n_bands_;
  std::vector<double> window_, cos_, sin_, windowed_;
  std::vector<Bin> bins_;
};

}  // namespace

std::vector<double> relative_band_power(std::span<const double> segment, double fs,
                                        std::span<const Band> bands) {
  std::vector<double> power(bands.size());
  BandPowerPlan(segment.size(), fs, bands).apply(segment, power.data());
  return power;
}

EpochSet rpsd_features(const EpochSet& set, const RpsdParams& params) {
  set.validate();
  std::vector<Band> bands = params.bands;
  if (bands.empty()) {
    const auto d = default_bands();
    bands.assign(d.begin(), d.end());
  }
  for (const auto& b : bands)
    if (!(b.lo_hz < b.hi_hz) || b.lo_hz < 0.0) throw ConfigError("rpsd: band bounds must satisfy 0 <= lo < hi");
  const Windowing outer = windowing(set.n_samples, set.fs, params.outer_seconds, params.outer_overlap);
  const Windowing inner = windowing(outer.length, set.fs, params.inner_seconds, params.inner_overlap);
  const std::size_t c = set.n_channels, nb = bands.size();
  const std::size_t width = inner.count * nb;
  BandPowerPlan plan(inner.length, set.fs, bands);

  EpochSet out;
  out.n_channels = c;
  out.n_samples = width;
  out.n_classes = set.n_classes;
  out.fs = set.fs;
  out.channel_names = set.channel_names;
  out.provenance = set.provenance.empty() ? "rpsd" : set.provenance + " | rpsd";
  for (std::size_t i = 0; i < set.n_trials(); ++i) {
    const auto x = set.trial(i);
    for (std::size_t o = 0; o < outer.count; ++o) {
      std::vector<double> feat(c * width);
      for (std::size_t ch = 0; ch < c; ++ch) {
        double* row = feat.data() + ch * width;
        for (std::size_t s = 0; s < inner.count; ++s) {
          const std::size_t start = o * outer.hop + s * inner.hop;
          plan.apply(x.subspan(ch * set.n_samples + start, inner.length), row + s * nb);
        }
        double mu = 0.0;
        for (std::size_t j = 0; j < width; ++j) mu += row[j];
        mu /= static_cast<double>(width);
        double var = 0.0;
        for (std::size_t j = 0; j < width; ++j) var += (row[j] - mu) * (row[j] - mu);
        const double sd = std::sqrt(var / static_cast<double>(width));
        for (std::size_t j = 0; j < width; ++j) row[j] = sd > 0.0 ? (row[j] - mu) / sd : 0.0;
      }
      out.data.insert(out.data.end(), feat.begin(), feat.end());
      out.labels.push_back(set.labels[i]);
      out.subjects.push_back(set.subjects[i]);
    }
  }
  return out;
}

}  // namespace lidsn::data
