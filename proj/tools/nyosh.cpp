// nyosh: check, run, import and package NYoSh scripts.
//
// Exit status: 0 success, 1 semantic or runtime failure, 2 parse error,
// 3 missing input or bad usage. `run` passes the script's status through.

#include <unistd.h>

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "config.hpp"
#include "nyosh/checker.hpp"
#include "nyosh/codegen.hpp"
#include "nyosh/exec.hpp"
#include "nyosh/microparse.hpp"
#include "nyosh/parser.hpp"
#include "nyosh/pretty.hpp"

namespace fs = std::filesystem;
using namespace nyosh;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kParse = 2;
constexpr int kInput = 3;

struct Global {
  std::optional<fs::path> config_path;
  std::optional<fs::path> job_dir;
  bool json = false;
};

struct Loaded {
  cli::CliConfig config;
  Script script;
};

std::optional<std::string> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Reads config and script; returns an exit status on failure.
std::variant<Loaded, int> load(const Global& g, const std::string& file) {
  Loaded out;
  try {
    out.config = cli::load_config(g.config_path);
  } catch (const cli::ConfigError& e) {
    std::cerr << "nyosh: " << e.what() << "\n";
    return kInput;
  }
  if (g.job_dir) out.config.job_dir = *g.job_dir;
  auto text = read_file(file);
  if (!text) {
    std::cerr << "nyosh: cannot read " << file << "\n";
    return kInput;
  }
  ParseResult parsed = parse_script(*text, file);
  if (!parsed.ok()) {
    for (const auto& e : parsed.errors) std::cerr << format_parse_error(e) << "\n";
    return kParse;
  }
  out.script = std::move(*parsed.script);
  return out;
}

std::variant<DesignConfig, int> design_config(const Loaded& l) {
  DesignConfig dc;
  dc.contracts = l.config.contracts;
  dc.preloaded = l.config.design_sources;
  dc.sources.base_dir = l.config.job_dir;
  if (l.config.plugin_config_path) {
    try {
      dc.sources.plugin = load_plugin_config(*l.config.plugin_config_path);
    } catch (const LoadError& e) {
      std::cerr << "nyosh: " << e.what() << "\n";
      return kInput;
    }
  }
  return dc;
}

void print_diagnostics(const std::vector<Diagnostic>& diags, bool json, std::ostream& os) {
  if (json) {
    os << diagnostics_to_json(diags, 2) << "\n";
    return;
  }
  for (const auto& d : diags) os << format_diagnostic(d) << "\n";
}

int cmd_check(const Global& g, const std::string& file) {
  auto l = load(g, file);
  if (auto* code = std::get_if<int>(&l)) return *code;
  auto dc = design_config(std::get<Loaded>(l));
  if (auto* code = std::get_if<int>(&dc)) return *code;
  auto diags = check(std::get<Loaded>(l).script, std::get<DesignConfig>(dc));
  if (g.json || !diags.empty()) print_diagnostics(diags, g.json, std::cout);
  return has_errors(diags) ? kFailed : kOk;
}

InterpretOptions interpret_options(const Loaded& l, const DesignConfig& dc) {
  InterpretOptions opt;
  opt.job_dir = l.config.job_dir;
  opt.sources = dc.sources;
  opt.sdk = l.config.sdk;
  opt.preloaded = l.config.design_sources;
  return opt;
}

int cmd_run(const Global& g, const std::string& file, const std::vector<std::string>& args, bool dry_run) {
  auto l = load(g, file);
  if (auto* code = std::get_if<int>(&l)) return *code;
  const Loaded& loaded = std::get<Loaded>(l);
  auto dc = design_config(loaded);
  if (auto* code = std::get_if<int>(&dc)) return *code;
  auto diags = check(loaded.script, std::get<DesignConfig>(dc));
  if (has_errors(diags)) {
    print_diagnostics(diags, false, std::cerr);
    return kFailed;
  }
  InterpretOptions opt = interpret_options(loaded, std::get<DesignConfig>(dc));
  opt.dry_run = dry_run;
  return interpret(loaded.script, args, opt);
}

int cmd_env(const Global& g, const std::string& file) {
  auto l = load(g, file);
  if (auto* code = std::get_if<int>(&l)) return *code;
  auto dc = design_config(std::get<Loaded>(l));
  if (auto* code = std::get_if<int>(&dc)) return *code;
  DesignEnvironment env = design_environment_at_end(std::get<Loaded>(l).script, std::get<DesignConfig>(dc));
  for (const auto& [name, prov] : env.available) {
    std::cout << name << "\t" << prov.source;
    if (prov.loaded_at.line > 0) std::cout << " (line " << prov.loaded_at.line << ")";
    std::cout << "\n";
  }
  for (const auto& p : env.runtime_only)
    std::cerr << "nyosh: names of " << p.source << " (line " << p.loaded_at.line << ") are only known at run time\n";
  return kOk;
}

int cmd_complete(const Global& g, const std::string& file, int line, int col) {
  auto l = load(g, file);
  if (auto* code = std::get_if<int>(&l)) return *code;
  auto dc = design_config(std::get<Loaded>(l));
  if (auto* code = std::get_if<int>(&dc)) return *code;
  for (const auto& c : list_completions(std::get<Loaded>(l).script, SourceLocation{file, line, col},
                                        std::get<DesignConfig>(dc)))
    std::cout << c.name << "\t" << c.provenance << "\n";
  return kOk;
}

int cmd_build(const Global& g, const std::string& file, const fs::path& out_dir, bool deploy) {
  auto l = load(g, file);
  if (auto* code = std::get_if<int>(&l)) return *code;
  const Loaded& loaded = std::get<Loaded>(l);
  if (!loaded.script.header) {
    std::cerr << "nyosh: " << file << " has no plugin header; only plugin scripts can be built\n";
    return kFailed;
  }
  auto dc = design_config(loaded);
  if (auto* code = std::get_if<int>(&dc)) return *code;
  auto diags = check(loaded.script, std::get<DesignConfig>(dc));
  if (has_errors(diags)) {
    print_diagnostics(diags, false, std::cerr);
    return kFailed;
  }
  BuildOptions opt;
  opt.runner_path = loaded.config.runner_path;
  opt.config = std::get<DesignConfig>(dc).sources.plugin;
  opt.contracts = loaded.config.contracts;
  opt.deploy = deploy;
  try {
    PluginPackage pkg = build_package(loaded.script, out_dir, opt);
    for (const auto& [name, content] : pkg.files) std::cout << (out_dir / name).string() << "\n";
    if (pkg.deployed_to) std::cerr << "nyosh: deployed to " << pkg.deployed_to->string() << "\n";
  } catch (const BuildError& e) {
    std::cerr << "nyosh: " << e.what() << "\n";
    return kFailed;
  }
  return kOk;
}

std::string join_continuations(const std::string& text) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\\' && i + 1 < text.size() && text[i + 1] == '\n') {
      ++i;
      while (i + 1 < text.size() && (text[i + 1] == ' ' || text[i + 1] == '\t')) ++i;
      if (!out.empty() && out.back() != ' ') out += ' ';
      continue;
    }
    out += text[i];
  }
  return out;
}

int cmd_import_bash(const std::string& mode, const std::string& name) {
  std::string raw((std::istreambuf_iterator<char>(std::cin)), std::istreambuf_iterator<char>());
  std::string text = join_continuations(raw);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    std::cerr << "nyosh: nothing to import on standard input\n";
    return kFailed;
  }

  StatementList body;
  if (mode == "vars") {
    GString g;
    g.raw_text = text;
    body.push_back(Statement{VarDecl{name, ValueType::String, Expression{g, {}}}, {}});
  } else {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      GString g;
      g.raw_text = line;
      body.push_back(Statement{ExecuteCommand{{Command{g}}}, {}});
    }
  }

  std::set<std::string> scope;
  for (std::size_t i = 0; i < body.size(); ++i) {
    IntentionOutcome r = apply_intention(body, i, Intention::ExtractVariables, scope);
    for (const auto& d : r.diagnostics) std::cerr << d.code << ": " << d.message << "\n";
    if (!r.applied) {
      std::cerr << raw;
      return kFailed;
    }
    for (std::size_t k = i; k < i + r.inserted; ++k) scope.insert(std::get<VarDecl>(body[k].node).name);
    i += r.inserted;
  }
  std::cout << pretty_print(body);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NYoSh scripting language tools"};
  app.require_subcommand(1);
  Global g;
  std::string config_path, job_dir;
  app.add_option("--config", config_path, "Configuration file (JSON)");
  app.add_option("--job-dir", job_dir, "Job directory: working directory, steps.log location");
  app.add_flag("--json", g.json, "Diagnostics as JSON");

  std::string file;
  auto* check_cmd = app.add_subcommand("check", "Report diagnostics for a script");
  check_cmd->add_option("file", file, "Script")->required();
  check_cmd->add_flag("--json", g.json, "Diagnostics as JSON");

  auto* run_cmd = app.add_subcommand("run", "Run an entry point: run FILE [ENTRY [ARGS...]]");
  run_cmd->add_option("file", file, "Script")->required();
  run_cmd->prefix_command();

  auto* plan_cmd = app.add_subcommand("plan", "Print execution plans as JSON lines instead of running commands");
  plan_cmd->add_option("file", file, "Script")->required();
  plan_cmd->prefix_command();

  std::string mode = "vars", var_name = "bashCommand";
  auto* import_cmd = app.add_subcommand("import-bash", "Convert BASH text on standard input");
  import_cmd->add_option("--mode", mode, "vars: declaration with extracted variables; commands: execute statements")
      ->check(CLI::IsMember({"vars", "commands"}));
  import_cmd->add_option("--name", var_name, "Variable name in vars mode");

  auto* env_cmd = app.add_subcommand("env", "List environment names available at the end of the script");
  env_cmd->add_option("file", file, "Script")->required();

  int line = 1, col = 1;
  auto* complete_cmd = app.add_subcommand("complete", "List names available at a position");
  complete_cmd->add_option("file", file, "Script")->required();
  complete_cmd->add_option("--line", line, "Line (1-based)")->required();
  complete_cmd->add_option("--col", col, "Column (1-based)");

  std::string out_dir;
  bool no_deploy = false;
  auto* build_cmd = app.add_subcommand("build", "Write the plugin package");
  build_cmd->add_option("file", file, "Script")->required();
  build_cmd->add_option("-o,--out", out_dir, "Output directory")->required();
  build_cmd->add_flag("--no-deploy", no_deploy, "Do not copy into the plugin location");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }
  if (!config_path.empty()) g.config_path = config_path;
  if (!job_dir.empty()) g.job_dir = job_dir;

  if (*check_cmd) return cmd_check(g, file);
  if (*run_cmd) return cmd_run(g, file, run_cmd->remaining(), false);
  if (*plan_cmd) return cmd_run(g, file, plan_cmd->remaining(), true);
  if (*import_cmd) return cmd_import_bash(mode, var_name);
  if (*env_cmd) return cmd_env(g, file);
  if (*complete_cmd) return cmd_complete(g, file, line, col);
  if (*build_cmd) return cmd_build(g, file, out_dir, !no_deploy);
  return kInput;
}
