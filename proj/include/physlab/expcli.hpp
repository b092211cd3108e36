#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

// Experiment harness: named, seeded, configurable presets that bind the
// library modules into reproducible CSV artifacts.
namespace physlab::expcli {

enum class Tier { smoke, desk, full };
Tier tier_from_name(const std::string& name);
const char* tier_name(Tier tier);

struct ExperimentConfig {
  std::string preset;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> overrides;  // ordered; includes "tier"
  std::filesystem::path out_dir;
};

struct Violation {
  std::string key;
  std::string message;
  bool warning = false;  // warnings (resource estimates) do not block a run
};

struct PresetInfo {
  std::string name;
  std::string description;  // names its figure
  std::vector<std::string> keys;
};

std::vector<PresetInfo> list_presets();

/// Schema and range checks plus a runtime estimate; never executes the
/// experiment. Unknown presets throw ConfigError.
std::vector<Violation> validate(const ExperimentConfig& config);

struct OutputFile {
  std::string name;
  std::string sha256;
  std::uint64_t bytes = 0;
};

struct RunManifest {
  std::string preset;
  std::string tier;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> resolved;  // every consumed key
  std::string started_at;
  std::string finished_at;
  std::vector<OutputFile> outputs;
  std::string tool_version;
  std::filesystem::path path;  // where the manifest was written
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Executes the preset and writes its CSVs plus manifest.json (written
/// last). Identical configs produce byte-identical data files; timestamps
/// live only in the manifest.
RunManifest run(const ExperimentConfig& config);

/// Flat "key = value" file with '#' comments.
std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path);

}  // namespace physlab::expcli
