#include "lidsn/train/snapshot.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "byte_io.hpp"
#include "lidsn/data/epochs.hpp"
#include "lidsn/error.hpp"

namespace lidsn::train {

namespace {

constexpr char kMagic[4] = {'L', 'D', 'S', 'N'};
constexpr std::uint16_t kVersion = 1;

struct Entry {
  std::string name;
  Shape shape;
  std::span<double> values;
};

std::vector<Entry> entries(model::LidsnParams& params) {
  std::vector<Entry> out;
  for (auto& [name, t] : params.named_parameters()) {
    Tensor handle = t;
    out.push_back({name, t.shape(), handle.mutable_data()});
  }
  for (auto& [name, buf] : params.named_buffers()) out.push_back({name, {buf->size()}, *buf});
  return out;
}

float to_f32(double v, const std::string& name) {
  if (!std::isfinite(v) || std::abs(v) > static_cast<double>(std::numeric_limits<float>::max())) {
    throw NumericError("snapshot: value of " + name + " is not representable as a float");
  }
  return static_cast<float>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_snapshot(model::LidsnParams& params) {
  const auto list = entries(params);
  detail::ByteWriter w;
  w.raw(kMagic, 4);
  w.uint<std::uint16_t>(kVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(list.size()));
  for (const auto& e : list) {
    w.uint<std::uint16_t>(static_cast<std::uint16_t>(e.name.size()));
    w.raw(e.name.data(), e.name.size());
    w.uint<std::uint8_t>(static_cast<std::uint8_t>(e.shape.size()));
    for (auto d : e.shape) w.uint<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (double v : e.values) w.f32(to_f32(v, e.name));
  }
  return w.take();
}

void decode_snapshot(std::span<const std::uint8_t> bytes, model::LidsnParams& params) {
  detail::ByteReader r(bytes, "snapshot");
  const auto magic = r.raw(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic)) {
    throw FormatError(FormatErrc::bad_magic, "snapshot: expected \"LDSN\"");
  }
  const auto version = r.uint<std::uint16_t>("version");
  if (version != kVersion) {
    throw FormatError(FormatErrc::unsupported_version,
                      "snapshot: version " + std::to_string(version) + ", expected 1");
  }
  const auto list = entries(params);
  const auto count = r.uint<std::uint32_t>("entry count");
  if (count != list.size()) {
    throw DimensionError("snapshot holds " + std::to_string(count) + " tensors, model has " +
                         std::to_string(list.size()));
  }
  // Decode everything before touching the model so a bad file leaves it intact.
  std::vector<std::vector<double>> values(list.size());
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& e = list[i];
    const auto len = r.uint<std::uint16_t>("name length");
    const auto raw_name = r.raw(len, "name");
    const std::string name(raw_name.begin(), raw_name.end());
    if (name != e.name) {
      throw DimensionError("snapshot entry " + std::to_string(i) + " is '" + name + "', model expects '" +
                           e.name + "'");
    }
    const auto rank = r.uint<std::uint8_t>("rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.uint<std::uint32_t>("extent");
    if (shape != e.shape) {
      throw DimensionError("snapshot tensor " + name + " has shape " + shape_str(shape) +
                           ", model expects " + shape_str(e.shape));
    }
    r.need(4 * e.values.size(), "values");
    values[i].resize(e.values.size());
    for (auto& v : values[i]) {
      v = r.f32("value");
      if (!std::isfinite(v)) throw FormatError(FormatErrc::non_finite_value, "snapshot tensor " + name);
    }
  }
  if (r.remaining() != 0) {
    throw FormatError(FormatErrc::trailing_bytes,
                      "snapshot: " + std::to_string(r.remaining()) + " bytes after the last tensor");
  }
  for (std::size_t i = 0; i < list.size(); ++i) std::ranges::copy(values[i], list[i].values.begin());
}

void save_snapshot(model::LidsnParams& params, const std::filesystem::path& path) {
  data::write_file_bytes(path, encode_snapshot(params));
}

void load_snapshot(const std::filesystem::path& path, model::LidsnParams& params) {
  const auto bytes = data::read_file_bytes(path);
  try {
    decode_snapshot(bytes, params);
  } catch (const FormatError& e) {
    throw FormatError(e.code(), path.string() + ": " + e.detail());
  }
}

void round_to_f32(model::LidsnParams& params) {
  for (auto& e : entries(params))
    for (auto& v : e.values) v = static_cast<double>(to_f32(v, e.name));
}

}  // namespace lidsn::train
