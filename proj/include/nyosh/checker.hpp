#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nyosh/ast.hpp"
#include "nyosh/diagnostic.hpp"
#include "nyosh/envsource.hpp"

namespace nyosh {

struct ContractRule {
  std::string entry;
  std::vector<Parameter> params;  // names are documentation only; types are checked
};

/// Required designated entry point per plugin kind; nullopt means none.
using ContractTable = std::map<PluginKind, std::optional<ContractRule>>;

ContractTable default_contracts();

struct DesignConfig {
  SourceContext sources;
  /// Names `Java Environment` offers at design time. Unset means the
  /// checker's own process environment.
  std::optional<std::vector<std::string>> process_names;
  ContractTable contracts = default_contracts();
  /// Sources treated as loaded at the start of every entry point.
  std::vector<EnvironmentSourceSpec> preloaded;
};

struct Provenance {
  std::string source;  // "Java Environment", "GobyWebSource", "MapFile: setup.sh", ...
  SourceLocation loaded_at;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Environment names available at some point of a script.
struct DesignEnvironment {
  std::map<std::string, Provenance> available;
  /// Sources loaded so far whose names cannot be listed before run time.
  std::vector<Provenance> runtime_only;
};

/// All rules, sorted by location. Empty iff the script passes.
std::vector<Diagnostic> check(const Script& script, const DesignConfig& config = {});

std::vector<Diagnostic> rule_operator_placement(const ExecuteCommand& exec, const SourceLocation& at = {});
std::vector<Diagnostic> rule_env_access(const Script& script, const DesignConfig& config = {});
std::vector<Diagnostic> rule_entry_point_contract(const Script& script, const ContractTable& contracts = default_contracts());
/// Declarations, types and the error management policy.
std::vector<Diagnostic> rule_declarations(const Script& script);

struct Completion {
  enum class Kind { Lexical, Environment, Slot };
  std::string name;
  std::string provenance;
  Kind kind = Kind::Lexical;
  friend bool operator==(const Completion&, const Completion&) = default;
};

/// Names a reference could use at `position`: lexical variables in scope and
/// environment names loaded before the statement at that position, plus the
/// plugin's input and output slots. Sorted by name.
std::vector<Completion> list_completions(const Script& script, const SourceLocation& position,
                                         const DesignConfig& config = {});

/// Environment names available after the last statement of each entry point
/// (union over entry points), as used by `nyosh env`.
DesignEnvironment design_environment_at_end(const Script& script, const DesignConfig& config = {});

}  // namespace nyosh
