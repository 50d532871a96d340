#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "nyosh/ast.hpp"
#include "nyosh/checker.hpp"
#include "nyosh/envsource.hpp"
#include "nyosh/exec.hpp"

namespace nyosh {

class BuildError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PluginPackage {
  std::filesystem::path root_dir;
  /// Relative path to content, in emission order (sorted).
  std::map<std::string, std::string> files;
  PluginConfigModel manifest;
  /// Where the package was copied, when the header location exists.
  std::optional<std::filesystem::path> deployed_to;
};

struct BuildOptions {
  std::string runner_path = "nyosh";
  /// Full plugin configuration; the header identity is used when unset.
  std::optional<PluginConfigModel> config;
  ContractTable contracts = default_contracts();
  bool deploy = true;
};

/// Package layout:
///   script.sh      one shell function per required entry point
///   run_model.sh   runs `<runner> run script.nyosh <entry> <args...>`
///   script.nyosh   the script in canonical form
///   manifest.xml   plugin configuration
/// Written to out_dir and, when the header location is an existing
/// directory, copied to <location>/plugins/<kind>/<ID>/.
PluginPackage build_package(const Script& script, const std::filesystem::path& out_dir,
                            const BuildOptions& options = {});

/// Contents only; nothing is written.
PluginPackage render_package(const Script& script, const BuildOptions& options = {});

/// JSON rendering of the assembled plan of one execute statement.
std::string dump_plan(const ExecuteCommand& statement, const AssembleContext& ctx, int indent = 2);

}  // namespace nyosh
