#pragma once

#include <cstdint>
#include <vector>

namespace lidsn {

/// Counter-based random stream.
///
/// Value k of stream (seed, stream_id) is
///   key = mix(seed ^ mix(stream_id + kStreamSalt))
///   out = mix(key + (k + 1) * kGolden)
/// where mix() is the SplitMix64 finalizer
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   z =  z ^ (z >> 31)
/// kGolden = 0x9E3779B97F4A7C15, kStreamSalt = 0x632BE59BD9B4E019.
/// Only integer arithmetic is involved, so sequences are identical on every platform.
class RngStream {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kStreamSalt = 0x632BE59BD9B4E019ULL;

  explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream_id = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller; the spare variate is cached.
  double normal();
  double normal(double mean, double stddev);
  /// Uniform integer in [0, n). Uses rejection to stay unbiased.
  std::uint64_t below(std::uint64_t n);

  /// Independent stream derived from this one's seed.
  RngStream fork(std::uint64_t stream_id) const { return RngStream(seed_, stream_id); }

  static std::uint64_t mix(std::uint64_t z) noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Fisher-Yates shuffle of `values` driven by `rng`.
template <typename T>
void shuffle(std::vector<T>& values, RngStream& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace lidsn
