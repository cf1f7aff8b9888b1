#include "lidsn/data/epochs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>

#include "../byte_io.hpp"
#include "lidsn/error.hpp"

namespace lidsn::data {

namespace {

constexpr char kMagic[4] = {'E', 'E', 'G', 'B'};
constexpr std::uint16_t kVersion = 1;

}  // namespace

std::span<const double> EpochSet::trial(std::size_t i) const {
  return std::span<const double>(data).subspan(i * trial_size(), trial_size());
}

std::span<double> EpochSet::trial(std::size_t i) {
  return std::span<double>(data).subspan(i * trial_size(), trial_size());
}

std::vector<int> EpochSet::subject_ids() const {
  std::set<int> ids(subjects.begin(), subjects.end());
  return {ids.begin(), ids.end()};
}

std::vector<std::size_t> EpochSet::trials_of(int subject) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < subjects.size(); ++i)
    if (subjects[i] == subject) out.push_back(i);
  return out;
}

EpochSet EpochSet::subset(std::span<const std::size_t> indices) const {
  EpochSet out;
  out.n_channels = n_channels;
  out.n_samples = n_samples;
  out.n_classes = n_classes;
  out.fs = fs;
  out.channel_names = channel_names;
  out.provenance = provenance;
  out.data.reserve(indices.size() * trial_size());
  for (std::size_t i : indices) {
    if (i >= n_trials()) {
      throw DataError("subset: trial index " + std::to_string(i) + " out of range (" +
                      std::to_string(n_trials()) + " trials)");
    }
    const auto t = trial(i);
    out.data.insert(out.data.end(), t.begin(), t.end());
    out.labels.push_back(labels[i]);
    out.subjects.push_back(subjects[i]);
  }
  return out;
}

void EpochSet::validate() const {
  if (n_channels == 0 || n_samples == 0) throw DataError("epoch set: zero channels or samples");
  if (n_classes == 0) throw DataError("epoch set: n_classes must be >= 1");
  if (!(fs > 0.0) || !std::isfinite(fs)) throw DataError("epoch set: sampling rate must be positive");
  if (subjects.size() != labels.size()) {
    throw DataError("epoch set: " + std::to_string(labels.size()) + " labels but " +
                    std::to_string(subjects.size()) + " subject ids");
  }
  if (data.size() != labels.size() * trial_size()) {
    throw DataError("epoch set: data holds " + std::to_string(data.size()) + " values, expected " +
                    std::to_string(labels.size() * trial_size()));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes) {
      throw DataError("epoch set: trial " + std::to_string(i) + " label " + std::to_string(labels[i]) +
                      " outside [0, " + std::to_string(n_classes) + ")");
    }
    if (subjects[i] < 0) throw DataError("epoch set: trial " + std::to_string(i) + " has a negative subject id");
  }
  if (!channel_names.empty() && channel_names.size() != n_channels) {
    throw DataError("epoch set: " + std::to_string(channel_names.size()) + " channel names for " +
                    std::to_string(n_channels) + " channels");
  }
}

std::vector<std::uint8_t> encode_epochs(const EpochSet& set) {
  set.validate();
  constexpr auto u16max = std::numeric_limits<std::uint16_t>::max();
  constexpr auto u32max = std::numeric_limits<std::uint32_t>::max();
  if (set.n_trials() == 0) throw DataError("EEGB: cannot store an empty epoch set");
  if (set.n_trials() > u32max || set.n_channels > u16max || set.n_samples > u32max ||
      set.n_classes > u16max) {
    throw DataError("EEGB: dimensions exceed the header field widths");
  }
  for (int s : set.subjects)
    if (s > u16max) throw DataError("EEGB: subject id " + std::to_string(s) + " exceeds 65535");
  constexpr double fmax = std::numeric_limits<float>::max();
  for (double v : set.data)
    if (!std::isfinite(v) || std::abs(v) > fmax)
      throw DataError("EEGB: sample value not representable as a finite 32-bit float");

  detail::ByteWriter w;
  w.raw(kMagic, 4);
  w.uint<std::uint16_t>(kVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(set.n_trials()));
  w.uint<std::uint16_t>(static_cast<std::uint16_t>(set.n_channels));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(set.n_samples));
  w.f32(static_cast<float>(set.fs));
  w.uint<std::uint16_t>(static_cast<std::uint16_t>(set.n_classes));
  for (int l : set.labels) w.uint<std::uint16_t>(static_cast<std::uint16_t>(l));
  for (int s : set.subjects) w.uint<std::uint16_t>(static_cast<std::uint16_t>(s));
  for (double v : set.data) w.f32(static_cast<float>(v));
  return w.take();
}

EpochSet decode_epochs(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "EEGB");
  const auto magic = r.raw(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic)) {
    throw FormatError(FormatErrc::bad_magic, "expected \"EEGB\"");
  }
  const auto version = r.uint<std::uint16_t>("version");
  if (version != kVersion) {
    throw FormatError(FormatErrc::unsupported_version,
                      "EEGB version " + std::to_string(version) + ", this build reads version 1");
  }
  const std::uint64_t n = r.uint<std::uint32_t>("n_trials");
  const std::uint64_t c = r.uint<std::uint16_t>("n_channels");
  const std::uint64_t t = r.uint<std::uint32_t>("n_samples");
  const float fs = r.f32("fs");
  const std::uint64_t k = r.uint<std::uint16_t>("n_classes");
  if (n == 0 || c == 0 || t == 0 || k == 0) {
    throw FormatError(FormatErrc::invalid_dimensions,
                      "n_trials=" + std::to_string(n) + " n_channels=" + std::to_string(c) +
                          " n_samples=" + std::to_string(t) + " n_classes=" + std::to_string(k));
  }
  if (!std::isfinite(fs) || !(fs > 0.0f)) {
    throw FormatError(FormatErrc::invalid_sampling_rate, "fs=" + std::to_string(fs));
  }
  // n <= 2^32 and c*t < 2^48, so the product cannot overflow 2^64 before the size check.
  const long double payload = 4.0L * n + 4.0L * n * c * t;
  if (payload > static_cast<long double>(r.remaining())) {
    throw FormatError(FormatErrc::truncated, "payload needs " + std::to_string(static_cast<unsigned long long>(payload)) +
                                                 " bytes, file has " + std::to_string(r.remaining()));
  }
  if (payload < static_cast<long double>(r.remaining())) {
    throw FormatError(FormatErrc::trailing_bytes,
                      std::to_string(r.remaining() - static_cast<std::size_t>(payload)) +
                          " bytes after the sample block");
  }
  EpochSet set;
  set.n_channels = c;
  set.n_samples = t;
  set.n_classes = k;
  set.fs = fs;
  set.labels.resize(n);
  set.subjects.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = r.uint<std::uint16_t>("label");
    if (label >= k) {
      throw FormatError(FormatErrc::label_out_of_range, "trial " + std::to_string(i) + " label " +
                                                            std::to_string(label) + " with n_classes=" +
                                                            std::to_string(k));
    }
    set.labels[i] = label;
  }
  for (std::size_t i = 0; i < n; ++i) set.subjects[i] = r.uint<std::uint16_t>("subject");
  set.data.resize(n * c * t);
  for (auto& v : set.data) {
    const float f = r.f32("sample");
    if (!std::isfinite(f)) {
      throw FormatError(FormatErrc::non_finite_value,
                        "sample " + std::to_string(&v - set.data.data()) + " is not finite");
    }
    v = f;
  }
  return set;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError(FormatErrc::io_failure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw FormatError(FormatErrc::io_failure, "read failed for " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError(FormatErrc::io_failure, "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError(FormatErrc::io_failure, "write failed for " + path.string());
}

void save_epochs(const EpochSet& set, const std::filesystem::path& path) {
  write_file_bytes(path, encode_epochs(set));
}

EpochSet load_epochs(const std::filesystem::path& path) {
  try {
    return decode_epochs(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(e.code(), path.string() + ": " + e.detail());
  }
}

}  // namespace lidsn::data
