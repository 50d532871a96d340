#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nyosh/checker.hpp"
#include "nyosh/exec.hpp"

namespace nyosh::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CliConfig {
  std::vector<EnvironmentSourceSpec> design_sources;
  std::optional<std::filesystem::path> plugin_config_path;
  SdkTemplates sdk;
  std::filesystem::path job_dir = ".";
  std::string runner_path = "nyosh";
  ContractTable contracts = default_contracts();
};

/// Parses nyosh.json text. Relative paths are resolved against base_dir.
CliConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir);

/// --config, then $NYOSH_CONFIG, then ./nyosh.json; defaults when none exists.
CliConfig load_config(const std::optional<std::filesystem::path>& explicit_path);

}  // namespace nyosh::cli
