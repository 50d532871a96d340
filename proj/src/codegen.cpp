#include "nyosh/codegen.hpp"

#include <fstream>

#include "nyosh/pretty.hpp"

namespace nyosh {

namespace fs = std::filesystem;

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

std::string wrapper_script(const Script& script, const std::optional<ContractRule>& rule) {
  std::string out = "#!/bin/bash\n";
  out += "# Entry points of plugin " + script.header->id + ". Source this file, then call a function.\n";
  if (!rule) return out;
  out += "\n";
  for (std::size_t i = 0; i < rule->params.size(); ++i)
    out += "# $" + std::to_string(i + 1) + ": " + rule->params[i].name + "\n";
  out += "function " + rule->entry + " {\n";
  out += "  . \"${JOB_DIR}/run_model.sh\" " + rule->entry + " \"$@\"\n";
  out += "}\n";
  return out;
}

std::string runner_script(const std::string& runner_path) {
  std::string out = "#!/bin/bash\n";
  out += "# Runs an entry point of script.nyosh: run_model.sh <entry> [args...]\n";
  out += shell_quote(runner_path) + " run \"${JOB_DIR}/script.nyosh\" \"$@\"\n";
  return out;
}

void write_file(const fs::path& path, const std::string& content, bool executable) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw BuildError("cannot write " + path.string());
  out << content;
  out.close();
  if (!out) throw BuildError("cannot write " + path.string());
  std::error_code ec;
  fs::permissions(path,
                  executable ? fs::perms::owner_all | fs::perms::group_read | fs::perms::group_exec |
                                   fs::perms::others_read | fs::perms::others_exec
                             : fs::perms::owner_read | fs::perms::owner_write | fs::perms::group_read |
                                   fs::perms::others_read,
                  ec);
}

void write_all(const PluginPackage& pkg, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw BuildError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& [name, content] : pkg.files)
    write_file(dir / name, content, name.size() > 3 && name.compare(name.size() - 3, 3, ".sh") == 0);
}

}  // namespace

PluginPackage render_package(const Script& script, const BuildOptions& options) {
  if (!script.header) throw BuildError("script has no plugin header; only plugin scripts can be packaged");
  const PluginHeader& header = *script.header;

  auto problems = rule_entry_point_contract(script, options.contracts);
  if (!problems.empty()) throw BuildError(problems.front().message);

  PluginPackage pkg;
  pkg.manifest = options.config ? *options.config : model_from_header(header);
  if (pkg.manifest.id != header.id || pkg.manifest.kind != header.kind)
    throw BuildError("plugin configuration is for " + pkg.manifest.id + " (" +
                     std::string(kind_name(pkg.manifest.kind)) + "), script header declares " + header.id + " (" +
                     std::string(kind_name(header.kind)) + ")");

  std::optional<ContractRule> rule;
  if (auto it = options.contracts.find(header.kind); it != options.contracts.end()) rule = it->second;

  pkg.files["manifest.xml"] = plugin_config_xml(pkg.manifest);
  pkg.files["run_model.sh"] = runner_script(options.runner_path);
  pkg.files["script.nyosh"] = pretty_print(script);
  pkg.files["script.sh"] = wrapper_script(script, rule);
  return pkg;
}

PluginPackage build_package(const Script& script, const fs::path& out_dir, const BuildOptions& options) {
  PluginPackage pkg = render_package(script, options);
  pkg.root_dir = out_dir;
  write_all(pkg, out_dir);

  const std::string& location = script.header->location;
  std::error_code ec;
  if (options.deploy && !location.empty() && fs::is_directory(location, ec)) {
    fs::path target = fs::path(location) / "plugins" / kind_directory(script.header->kind) / script.header->id;
    write_all(pkg, target);
    pkg.deployed_to = target;
  }
  return pkg;
}

std::string dump_plan(const ExecuteCommand& statement, const AssembleContext& ctx, int indent) {
  return plan_to_json(assemble(statement.elements, ctx), indent);
}

}  // namespace nyosh
