#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lidsn/model/params.hpp"

namespace lidsn::train {

/// Snapshot v1, little-endian:
///   "LDSN" | u16 version=1 | u32 n_entries |
///   per entry: u16 name_len | name | u8 rank | rank x u32 dims | f32 values
/// Entries are the trainable tensors followed by the batch-norm running statistics,
/// both in canonical order.
std::vector<std::uint8_t> encode_snapshot(model::LidsnParams& params);

/// Copies a snapshot into `params`. FormatError for a malformed file; DimensionError
/// naming the tensor when names or extents differ from `params`.
void decode_snapshot(std::span<const std::uint8_t> bytes, model::LidsnParams& params);

void save_snapshot(model::LidsnParams& params, const std::filesystem::path& path);
void load_snapshot(const std::filesystem::path& path, model::LidsnParams& params);

/// Rounds every parameter and running statistic to the nearest float, so a model
/// behaves exactly as it will after a save/load cycle.
void round_to_f32(model::LidsnParams& params);

}  // namespace lidsn::train
