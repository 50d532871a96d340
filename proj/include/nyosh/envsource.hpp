#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nyosh/ast.hpp"
#include "nyosh/expected.hpp"

namespace nyosh {

struct ScriptVariable {
  std::string name;
  std::string value;

  friend bool operator==(const ScriptVariable&, const ScriptVariable&) = default;
};

struct ByName {
  using is_transparent = void;
  bool operator()(const ScriptVariable& a, const ScriptVariable& b) const { return a.name < b.name; }
  bool operator()(const ScriptVariable& a, std::string_view b) const { return a.name < b; }
  bool operator()(std::string_view a, const ScriptVariable& b) const { return a < b.name; }
};

/// Variables ordered by name, one entry per name.
using VariableSet = std::set<ScriptVariable, ByName>;

VariableSet to_variable_set(const std::map<std::string, std::string>& values);

/// Raised when a source cannot be loaded (missing map file, malformed line,
/// unreadable plugin configuration).
class LoadError : public std::runtime_error {
 public:
  LoadError(std::string path, int line, const std::string& message);
  const std::string& path() const { return path_; }
  int line() const { return line_; }  // 0 when not line-specific

 private:
  std::string path_;
  int line_;
};

/// Unbound name at run time.
class ResolutionError : public std::runtime_error {
 public:
  explicit ResolutionError(std::string name);
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

// ---------------------------------------------------------------------------
// Map files
//
//   line    := blank | comment | ["export" ws] KEY "=" VALUE [ws comment]
//   KEY     := [A-Za-z_][A-Za-z0-9_]*
//   VALUE   := one shell word: bare characters, '...' or "..." spans,
//              backslash escapes; no expansion of $ or backticks
//
// `export KEY` without an assignment is accepted and defines nothing.

struct MapFileError {
  int line = 0;
  std::string message;
};

expected<std::map<std::string, std::string>, MapFileError> parse_map_file_text(std::string_view text);

/// Reads and parses a map file; throws LoadError.
std::map<std::string, std::string> read_map_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Plugin configuration

struct PluginResource {
  std::string id;
  std::map<std::string, std::string> fields;
  friend bool operator==(const PluginResource&, const PluginResource&) = default;
};

struct PluginConfigModel {
  std::string id;
  PluginKind kind = PluginKind::Aligner;
  std::vector<std::pair<std::string, std::string>> options;  // (option id, default value)
  std::vector<PluginResource> resources;
  std::vector<std::string> input_slots;
  std::vector<std::string> output_slots;
  friend bool operator==(const PluginConfigModel&, const PluginConfigModel&) = default;
};

/// Uppercases and replaces characters outside [A-Z0-9_] with '_'.
std::string normalize_config_id(std::string_view id);

/// Parses plugin config XML (see docs/plugin-config.md); throws LoadError.
PluginConfigModel parse_plugin_config(std::string_view xml, const std::string& origin = "<config>");

/// Loads `<dir>/config.xml`, or the file itself when given a file path.
PluginConfigModel load_plugin_config(const std::filesystem::path& path);

/// A model carrying only the header identity (no options or resources).
PluginConfigModel model_from_header(const PluginHeader& header);

/// Writes the config XML that parse_plugin_config reads.
std::string plugin_config_xml(const PluginConfigModel& model);

/// Job variables the GobyWeb runtime sets for every plugin of the given kind.
std::vector<std::string> job_variables(PluginKind kind);

struct DerivedVariable {
  std::string name;
  std::string default_value;
};

/// All variables a plugin configuration contributes, sorted by name:
/// PLUGINS_<KIND>_<ID>_<OPTION>, RESOURCES_ARTIFACTS_<RESOURCE>_<FIELD> and
/// the job variables for the kind.
std::vector<DerivedVariable> derived_variables(const PluginConfigModel& model);

// ---------------------------------------------------------------------------
// Runtime environment

/// Lexical variables visible to GString evaluation.
class LexicalScope {
 public:
  virtual ~LexicalScope() = default;
  virtual std::optional<std::string> lookup(const std::string& name) const = 0;
};

class MapScope final : public LexicalScope {
 public:
  MapScope() = default;
  explicit MapScope(std::map<std::string, std::string> values) : values_(std::move(values)) {}
  void set(const std::string& name, std::string value) { values_[name] = std::move(value); }
  std::optional<std::string> lookup(const std::string& name) const override;

 private:
  std::map<std::string, std::string> values_;
};

struct EnvironmentLayer {
  std::string label;  // provenance, e.g. "MapFile: /opt/x/setup.sh"
  VariableSet variables;
};

class RuntimeEnvironment {
 public:
  /// Adds a layer on top; names in it shadow earlier layers.
  void push_layer(EnvironmentLayer layer, bool exported);

  /// Value from the latest layer that provides `name`.
  const std::string* lookup(std::string_view name) const;

  const std::vector<EnvironmentLayer>& layers() const { return layers_; }
  const std::set<std::string>& exported() const { return exported_; }

 private:
  std::vector<EnvironmentLayer> layers_;
  std::set<std::string> exported_;
};

/// Host-side context sources need in order to load.
struct SourceContext {
  /// Plugin used by `GobyWebSource` without an explicit directory.
  std::optional<PluginConfigModel> plugin;
  /// Base for relative map-file paths.
  std::filesystem::path base_dir = ".";
  /// Plugin variable values supplied by the runner. A source's own
  /// runtime_values win over these; these win over the host environment.
  std::map<std::string, std::string> runtime_values;
};

/// Snapshot of the host process environment.
std::map<std::string, std::string> process_environment();

std::string source_label(const EnvironmentSourceSpec& spec, const std::string& resolved_path = {});

/// Loads a source's variables at run time. MapFile paths are evaluated
/// against `scope` and `current`. Throws LoadError or ResolutionError.
VariableSet parse_at_run_time(const EnvironmentSourceSpec& spec, const RuntimeEnvironment& current,
                              const SourceContext& ctx, const LexicalScope* scope = nullptr);

struct DesignTimeNames {
  bool available = false;
  std::vector<std::string> names;  // sorted
  std::string reason;              // why unavailable
};

/// Names a source will provide, when knowable without running the script.
DesignTimeNames list_design_time_names(const EnvironmentSourceSpec& spec, const SourceContext& ctx);

/// Lexical binding first, then the latest layer providing the name.
std::string resolve(const std::string& name, const LexicalScope* scope, const RuntimeEnvironment& env);

/// Evaluates a GString now, against current bindings.
std::string eval_gstring(const GString& g, const LexicalScope* scope, const RuntimeEnvironment& env);

// ---------------------------------------------------------------------------
// Path patterns

bool has_glob_meta(std::string_view pattern);

/// Expands a wildcard pattern (`*`, `?`, `[...]`) against the filesystem, or a
/// `re:<dir>/<regex>` pattern against the entries of <dir>. Relative patterns
/// are resolved against base_dir and returned relative. Results are sorted;
/// no match yields an empty list.
expected<std::vector<std::string>, std::string> expand_path_pattern(
    std::string_view pattern, const std::filesystem::path& base_dir = ".");

}  // namespace nyosh
