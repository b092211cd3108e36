#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "physlab/expcli.hpp"

namespace {

// Exit codes: 0 ok, 2 config error, 3 runtime divergence, 4 I/O error.
constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kDivergence = 3;
constexpr int kIoError = 4;

void apply_sets(physlab::expcli::ExperimentConfig& config,
                const std::vector<std::string>& sets) {
  for (const std::string& kv : sets) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw physlab::expcli::ConfigError("--set expects key=value, got '" + kv + "'");
    config.overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"physlab: seeded physical-layer learning experiments"};
  app.require_subcommand(1);

  std::string preset, out_dir, config_file;
  std::uint64_t seed = 0;
  std::vector<std::string> sets;

  CLI::App* run = app.add_subcommand("run", "Execute a preset and write CSV artifacts");
  run->add_option("--preset", preset, "Preset name (see `physlab list`)")->required();
  run->add_option("--seed", seed, "Root seed; all randomness derives from it")->required();
  run->add_option("--set", sets, "Override, key=value (repeatable)");
  run->add_option("--config", config_file, "key = value file applied before --set");
  run->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* list = app.add_subcommand("list", "List presets");

  std::string v_preset;
  std::uint64_t v_seed = 0;
  std::vector<std::string> v_sets;
  std::string v_config_file;
  CLI::App* validate = app.add_subcommand("validate", "Check a configuration without running");
  validate->add_option("--preset", v_preset, "Preset name")->required();
  validate->add_option("--seed", v_seed, "Root seed");
  validate->add_option("--set", v_sets, "Override, key=value (repeatable)");
  validate->add_option("--config", v_config_file, "key = value file applied before --set");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  using namespace physlab::expcli;
  try {
    if (list->parsed()) {
      for (const PresetInfo& info : list_presets())
        std::printf("%-22s %s\n", info.name.c_str(), info.description.c_str());
      return kOk;
    }
    if (validate->parsed()) {
      ExperimentConfig config;
      config.preset = v_preset;
      config.seed = v_seed;
      if (!v_config_file.empty())
        for (const auto& [k, v] : parse_config_file(v_config_file)) config.overrides[k] = v;
      apply_sets(config, v_sets);
      std::vector<Violation> violations = physlab::expcli::validate(config);
      if (violations.empty()) {
        std::printf("ok\n");
      } else {
        for (const Violation& v : violations)
          std::printf("%s %s: %s\n", v.warning ? "warning" : "violation", v.key.c_str(),
                      v.message.c_str());
      }
      return kOk;
    }
    // run
    ExperimentConfig config;
    config.preset = preset;
    config.seed = seed;
    config.out_dir = out_dir;
    if (!config_file.empty())
      for (const auto& [k, v] : parse_config_file(config_file)) config.overrides[k] = v;
    apply_sets(config, sets);
    RunManifest manifest = physlab::expcli::run(config);
    std::printf("wrote %zu file(s) + manifest to %s\n", manifest.outputs.size(),
                out_dir.c_str());
    for (const OutputFile& f : manifest.outputs)
      std::printf("  %s  (%llu bytes, sha256 %s)\n", f.name.c_str(),
                  static_cast<unsigned long long>(f.bytes), f.sha256.c_str());
    return kOk;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return kDivergence;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIoError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
