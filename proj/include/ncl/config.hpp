#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "ncl/trainer.hpp"

namespace ncl {

// Training settings plus the paths of one run.
struct RunConfig {
  std::string name = "run";
  std::filesystem::path snapshot;
  std::filesystem::path checkpoint;
  std::filesystem::path report_dir;
  TrainConfig train;
};

// Environment variable that replaces all seeds of a run.
inline constexpr const char* kSeedEnv = "NCL_SEED";

nlohmann::ordered_json to_json(const RunConfig& config);
// Keys missing from `doc` keep their defaults. Unknown keys and ill-typed
// values throw ConfigError.
RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

// Applies "key=value"; nested keys use dots (ipot.beta=2). The value is read
// as JSON when it parses, otherwise as a string.
void apply_override(RunConfig& config, std::string_view assignment);
// Derives init, batch and eval seeds from one value.
void apply_global_seed(RunConfig& config, std::uint64_t seed);

}  // namespace ncl
