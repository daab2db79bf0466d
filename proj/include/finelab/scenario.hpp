#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace finelab {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// A validated run description. `resolved` is the config with every
/// default filled in; it is what the manifest echoes.
struct ScenarioConfig {
  nlohmann::json space;    // null for operations that build their own grids
  nlohmann::json problem;
  nlohmann::json output;
  std::uint64_t seed = 1;
  nlohmann::json resolved;
};

/// Validates a raw config. Unknown keys and out-of-range values raise
/// ConfigError naming the key path, e.g. `problem.p`.
ScenarioConfig parse_scenario(const nlohmann::json& raw);
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Every default used by the runner, in one table.
nlohmann::json defaults_table();

struct FileRecord {
  std::string name;
  std::uintmax_t bytes = 0;
  std::string sha256;
};

struct RunManifest {
  nlohmann::json config;
  std::string version;
  std::vector<std::pair<std::string, double>> stage_seconds;
  std::vector<FileRecord> files;  // sorted by name; excludes the manifest and timings
  nlohmann::json defaults;
  nlohmann::json summary;  // small operation-specific digest
};

/// Runs the pipeline and writes artifacts, manifest.json and timings.json
/// into the output directory (`out` overrides output.directory).
RunManifest run_scenario(const ScenarioConfig& config, const std::optional<std::filesystem::path>& out = {});

/// Manifest without wall-clock data; byte-identical across reruns.
nlohmann::json manifest_json(const RunManifest& m);
nlohmann::json timings_json(const RunManifest& m);

std::string sha256_hex(std::string_view bytes);

}  // namespace finelab
