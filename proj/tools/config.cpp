#include "config.hpp"

#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace nyosh::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve_path(const std::string& p, const fs::path& base) {
  fs::path path(p);
  return path.is_relative() ? base / path : path;
}

EnvironmentSourceSpec parse_source(const json& j, const fs::path& base) {
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "Java Environment") return ProcessEnvSource{};
    if (s == "GobyWebSource") return PluginConfigSource{};
    throw ConfigError("unknown design source '" + s + "'");
  }
  if (j.is_object() && j.size() == 1) {
    const auto& [key, value] = *j.items().begin();
    if (key == "MapFile") return MapFileSource{make_literal_gstring(resolve_path(value.get<std::string>(), base).string())};
    if (key == "GobyWebSource") return PluginConfigSource{resolve_path(value.get<std::string>(), base).string(), {}};
  }
  throw ConfigError("design source must be \"Java Environment\", \"GobyWebSource\", {\"MapFile\": path} or {\"GobyWebSource\": dir}");
}

std::optional<ValueType> parse_type(const std::string& s) {
  for (ValueType t : {ValueType::String, ValueType::Int, ValueType::Boolean, ValueType::StringArray})
    if (type_name(t) == s) return t;
  return std::nullopt;
}

}  // namespace

CliConfig parse_config(const std::string& json_text, const fs::path& base_dir) {
  CliConfig cfg;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  try {
    if (j.contains("design_sources"))
      for (const auto& s : j.at("design_sources")) cfg.design_sources.push_back(parse_source(s, base_dir));
    if (j.contains("plugin_config")) cfg.plugin_config_path = resolve_path(j.at("plugin_config").get<std::string>(), base_dir);
    if (j.contains("job_dir")) cfg.job_dir = resolve_path(j.at("job_dir").get<std::string>(), base_dir);
    if (j.contains("runner_path")) cfg.runner_path = j.at("runner_path").get<std::string>();
    if (j.contains("sdk")) {
      const auto& sdk = j.at("sdk");
      if (sdk.contains("fetch_template")) cfg.sdk.fetch = sdk.at("fetch_template").get<std::string>();
      if (sdk.contains("push_template")) cfg.sdk.push = sdk.at("push_template").get<std::string>();
      for (const auto* t : {&cfg.sdk.fetch, &cfg.sdk.push})
        if (t->find("{slot}") == std::string::npos) throw ConfigError("sdk template lacks {slot}: " + *t);
    }
    if (j.contains("contracts")) {
      for (const auto& [kind_text, rule] : j.at("contracts").items()) {
        auto kind = parse_kind(kind_text);
        if (!kind) throw ConfigError("unknown plugin kind in contracts: " + kind_text);
        if (rule.is_null()) {
          cfg.contracts[*kind] = std::nullopt;
          continue;
        }
        ContractRule r;
        r.entry = rule.at("entry").get<std::string>();
        int n = 0;
        for (const auto& p : rule.value("params", json::array())) {
          auto t = parse_type(p.get<std::string>());
          if (!t) throw ConfigError("unknown parameter type " + p.get<std::string>());
          r.params.push_back(Parameter{"arg" + std::to_string(++n), *t});
        }
        cfg.contracts[*kind] = r;
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  return cfg;
}

CliConfig load_config(const std::optional<fs::path>& explicit_path) {
  std::optional<fs::path> path = explicit_path;
  if (!path) {
    if (const char* env = std::getenv("NYOSH_CONFIG"); env && *env) path = env;
  }
  if (!path) {
    if (fs::exists("nyosh.json")) path = "nyosh.json";
    else return CliConfig{};
  }
  std::ifstream in(*path);
  if (!in) throw ConfigError("cannot read configuration " + path->string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), fs::absolute(*path).parent_path());
}

}  // namespace nyosh::cli
