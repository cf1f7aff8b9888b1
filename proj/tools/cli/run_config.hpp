#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lidsn/data/split.hpp"
#include "lidsn/data/synth.hpp"
#include "lidsn/model/config.hpp"
#include "lidsn/train/config.hpp"
#include "lidsn/train/protocol.hpp"

namespace lidsn::cli {

struct DataSource {
  std::string path;  // EEGB file; empty selects the synthetic generator
  data::SynthSpec synth = data::SynthSpec::two_class_default();
  std::uint64_t synth_seed = 0;
};

/// Everything a run needs. Omitted JSON fields keep these defaults.
struct RunConfig {
  model::ModelConfig model;
  train::TrainConfig train;
  DataSource data;
  data::Protocol protocol = data::Protocol::co;
  data::SplitParams split;
  train::Preprocessing preprocessing;
  std::string output = "lidsn_out";
  std::vector<std::uint64_t> seeds{0};
};

/// Throws ConfigError naming the offending key for unknown keys or mistyped values.
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Every field, in a fixed order; parse_run_config(run_config_json(c)) reproduces c.
std::string run_config_json(const RunConfig& cfg);

}  // namespace lidsn::cli
