#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lidsn::data {

/// Labeled trials [n_trials x C x T] with per-trial subject ids.
struct EpochSet {
  std::size_t n_channels = 0;
  std::size_t n_samples = 0;
  std::size_t n_classes = 0;
  double fs = 0.0;
  std::vector<double> data;  // trial-major [trial][channel][sample]
  std::vector<int> labels;
  std::vector<int> subjects;
  std::vector<std::string> channel_names;  // optional, in-memory only
  std::string provenance;                  // free-form, in-memory only

  std::size_t n_trials() const noexcept { return labels.size(); }
  std::size_t trial_size() const noexcept { return n_channels * n_samples; }
  std::span<const double> trial(std::size_t i) const;
  std::span<double> trial(std::size_t i);

  /// Sorted distinct subject ids.
  std::vector<int> subject_ids() const;
  /// Trial indices of `subject` in file order.
  std::vector<std::size_t> trials_of(int subject) const;

  /// Copy restricted to `indices`, in the given order.
  EpochSet subset(std::span<const std::size_t> indices) const;

  /// Throws DataError when shapes, labels, subjects or fs are inconsistent.
  void validate() const;
};

/// EEGB v1, little-endian:
///   "EEGB" | u16 version=1 | u32 n_trials | u16 n_channels | u32 n_samples | f32 fs |
///   u16 n_classes | n_trials x u16 label | n_trials x u16 subject | f32 data (trial-major)
/// Samples are stored as 32-bit floats, so values round to the nearest float on save.
std::vector<std::uint8_t> encode_epochs(const EpochSet& set);
EpochSet decode_epochs(std::span<const std::uint8_t> bytes);

void save_epochs(const EpochSet& set, const std::filesystem::path& path);
EpochSet load_epochs(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace lidsn::data
