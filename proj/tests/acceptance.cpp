// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria (capped at 1).

#include <fcntl.h>

#include <chrono>
#include <functional>
#include <iostream>
#include <random>

#include "nyosh/checker.hpp"
#include "nyosh/codegen.hpp"
#include "nyosh/exec.hpp"
#include "nyosh/microparse.hpp"
#include "nyosh/pretty.hpp"
#include "support.hpp"

using namespace nyosh;
namespace ts = testing_support;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Interpreted {
  int status = 0;
  std::string out, err;
};

Interpreted interpret_text(const Script& s, const std::vector<std::string>& args, ErrorManagementPolicy* policy) {
  ts::Capture out, err;
  int null = open("/dev/null", O_RDONLY);
  InterpretOptions opt;
  opt.io = RunIo{null, out.fd(), err.fd(), {}};
  opt.policy = policy;
  Interpreted r;
  r.status = interpret(s, args, opt);
  r.out = out.text();
  r.err = err.text();
  close(null);
  return r;
}

Outcome shell_oracle() {
  std::mt19937 rng(2024);
  const std::vector<OperatorKind> ops = {OperatorKind::Pipe, OperatorKind::And, OperatorKind::Or, OperatorKind::Seq};
  auto start = std::chrono::steady_clock::now();
  int mismatches = 0;
  const int total = 200;
  int null = open("/dev/null", O_RDONLY);
  for (int i = 0; i < total; ++i) {
    std::vector<CommandElement> el;
    int n = std::uniform_int_distribution<int>(1, 6)(rng);
    for (int k = 0; k < n; ++k) {
      if (k) el.emplace_back(Operator{ops[rng() % ops.size()]});
      const std::string cmds[] = {"true", "false", "echo w" + std::to_string(rng() % 3), "exit " + std::to_string(rng() % 4),
                                  "cat"};
      el.emplace_back(Command{make_literal_gstring(cmds[rng() % 5])});
    }
    std::string line = print_elements(el);
    RuntimeEnvironment env;
    AssembleContext ctx;
    ctx.env = &env;
    ts::Capture out;
    RunResult r = run(assemble(el, ctx), RunIo{null, out.fd(), 2, {}});
    auto sh = ts::run_shell(line);
    if (out.text() != sh.out || r.last_exit_code != sh.status) ++mismatches;
  }
  close(null);
  auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {mismatches == 0 && secs < 60,
          std::to_string(total) + " sequences, " + std::to_string(mismatches) + " mismatches, " +
              std::to_string(static_cast<int>(secs)) + "s"};
}

Outcome bwa_aln_line() {
  auto r = extract_variables(
      "bwa aln -w 0 ${PARALLEL_OPTION} -f ${SAI_FILE_0} ${INDEX_DIRECTORY}/${INDEX_PREFIX} ${READS}");
  std::vector<std::string> names;
  for (const auto& d : r.new_declarations) names.push_back(d.name);
  bool names_ok = names == std::vector<std::string>{"PARALLEL_OPTION", "SAI_FILE_0", "INDEX_DIRECTORY", "INDEX_PREFIX",
                                                    "READS"};
  std::size_t comps = std::get<GString>(r.replacement).components.size();
  auto e = parse_command_literal("cat output-with-vep-info.vcf | vcf-annotate -f nonSynonymousFilter.pl");
  const auto& el = std::get<std::vector<CommandElement>>(e.replacement);
  bool split_ok = el.size() == 3 && std::holds_alternative<Command>(el[0]) && is_operator(el[1], OperatorKind::Pipe) &&
                  std::holds_alternative<Command>(el[2]);
  return {names_ok && comps == 9 && split_ok,
          "declarations " + std::string(names_ok ? "ok" : "wrong") + ", components " + std::to_string(comps) +
              " (expected 9), pipe split " + (split_ok ? "ok" : "wrong")};
}

Outcome greeting() {
  setenv("USER", "testuser", 1);
  auto a = interpret_text(ts::parse_or_die(ts::read_file(ts::data_dir() / "greeting.nyosh")), {}, nullptr);
  auto b = interpret_text(ts::parse_or_die(ts::read_file(ts::data_dir() / "greeting_concat.nyosh")), {}, nullptr);
  const std::string want = "This is the NYoSh workbench. You are logged in as testuser\n";
  return {a.out == want && b.out == want, "gstring [" + a.out.substr(0, a.out.size() - (a.out.empty() ? 0 : 1)) + "]"};
}

Outcome laziness() {
  std::mt19937 rng(99);
  int bad = 0;
  for (int i = 0; i < 100; ++i) {
    std::string v1 = "v" + std::to_string(rng() % 100000), v2 = "w" + std::to_string(rng() % 100000);
    Script s = ts::parse_or_die("script L error management: ConsoleErrorManagement {\n  entry point main() {\n"
                                "    string x = \"" + v1 + "\";\n    string g = \"<${x}>\";\n    x = \"" + v2 +
                                "\";\n    System.out.println(g);\n  }\n}\n");
    if (interpret_text(s, {}, nullptr).out != "<" + v2 + ">\n") ++bad;
  }
  return {bad == 0, "100 triples, " + std::to_string(bad) + " stale"};
}

Outcome diagnostics() {
  DesignConfig dc;
  dc.process_names = std::vector<std::string>{};
  auto wrap = [](const std::string& b) { return "script T {\n  entry point main() {\n    " + b + "\n  }\n}\n"; };
  auto only = [&](const std::string& text, std::string_view code) {
    auto ds = check(ts::parse_or_die(text), dc);
    return ds.size() == 1 && ds[0].code == code;
  };
  bool c1 = only(wrap("execute: a | | b"), code::ConsecutiveOperators);
  bool c2 = only(wrap("System.out.println(\"${USER}\");"), code::UnauthorizedEnvAccess);
  bool c3 = only(wrap("execute: sort x redirect to file y | wc"), code::RedirectNotTerminal);
  bool c4 = only("plugin system:\nid: P\nkind: ALIGNER\nlocation: /x\n\nscript S {\n  aligner entry point "
                 "plugin_align(string o) {\n  }\n}\n",
                 code::ContractViolation);
  DesignConfig bwa;
  bwa.process_names = std::vector<std::string>{};
  bwa.sources.plugin = load_plugin_config(ts::data_dir() / "bwa_plugin");
  auto ds = check(ts::parse_or_die(ts::read_file(ts::data_dir() / "bwa_aligner.nyosh")), bwa);
  int errors = static_cast<int>(std::count_if(ds.begin(), ds.end(), [](const auto& d) { return d.severity == Severity::Error; }));
  std::string detail = std::string("operators ") + (c1 ? "ok" : "bad") + ", env " + (c2 ? "ok" : "bad") + ", redirect " +
                       (c3 ? "ok" : "bad") + ", contract " + (c4 ? "ok" : "bad") + ", bwa script errors " +
                       std::to_string(errors);
  return {c1 && c2 && c3 && c4 && errors == 0, detail};
}

Outcome dispatch() {
  Script s = ts::parse_or_die("script D error management: ConsoleErrorManagement {\n  entry point main() {\n"
                              "    System.out.println(\"ok\");\n  }\n  entry point two(string a, string b) {\n"
                              "    System.out.println(\"${a}${b}\");\n  }\n}\n");
  auto valid = interpret_text(s, {"two", "x", "y"}, nullptr);
  auto count = interpret_text(s, {"two", "x"}, nullptr);
  auto unknown = interpret_text(s, {"zzz"}, nullptr);
  bool ok = valid.status == 0 && valid.out == "xy\n" && count.err == "Invalid number of arguments\n" &&
            unknown.status == 1 && unknown.err == "The entry point zzz name was not recognized";
  return {ok, "valid/count/unknown"};
}

Outcome round_trip() {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(ts::data_dir() / "corpus")) files.push_back(e.path());
  files.push_back(ts::data_dir() / "bwa_aligner.nyosh");
  int bad = 0;
  for (const auto& f : files) {
    Script s = ts::parse_or_die(ts::read_file(f));
    auto again = parse_script(pretty_print(s));
    if (!again.ok() || !(*again.script == s)) ++bad;
  }
  return {files.size() >= 20 && bad == 0, std::to_string(files.size()) + " scripts, " + std::to_string(bad) + " differ"};
}

Outcome step_logging() {
  auto wrap = [](const std::string& b) {
    return "script T error management: ConsoleErrorManagement {\n  entry point main() {\n" + b + "\n  }\n}\n";
  };
  MemoryStepsLogger log;
  DefaultErrorManagement policy(log, -1);
  interpret_text(ts::parse_or_die(wrap("step good {\n}\nstep bad {\n  execute: /nonexistent/cmd\n}")), {}, &policy);
  bool two = log.records.size() == 2 && log.records[0].status == StepStatus::Done &&
             log.records[1].status == StepStatus::Error && log.records[1].description == "step bad failed.";
  MemoryStepsLogger log2;
  DefaultErrorManagement policy2(log2, -1);
  auto r = interpret_text(ts::parse_or_die(wrap("fail \"r\" 7")), {}, &policy2);
  bool seven = r.status == 7 && log2.records.size() == 1 && log2.records[0].status == StepStatus::Error;
  return {two && seven, std::string("two steps ") + (two ? "ok" : "bad") + ", fail 7 " + (seven ? "ok" : "bad")};
}

Outcome environment() {
  ts::TempDir dir;
  std::mt19937 rng(50);
  int bad = 0;
  const std::vector<std::string> values = {"plain", "'q u o t e d'", "\"d \\\" q\"", "a\\ b", "", "x=y", "/p:/q"};
  for (int f = 0; f < 50; ++f) {
    std::string text;
    for (int l = 0; l < 6; ++l)
      text += (rng() % 2 ? "export " : "") + std::string("K") + std::to_string(rng() % 4) + "=" +
              values[rng() % values.size()] + (rng() % 3 ? "" : " # c") + "\n";
    fs::path file = dir / ("m" + std::to_string(f));
    ts::write_file(file, text);
    auto ours = parse_map_file_text(text);
    auto sh = ts::run_shell("env -i /bin/sh -c " + ts::sh_quote("set -a; . " + file.string() + "; env"));
    std::map<std::string, std::string> theirs;
    std::istringstream in(sh.out);
    for (std::string line; std::getline(in, line);)
      if (line.size() > 1 && line[0] == 'K' && line.find('=') != std::string::npos)
        theirs[line.substr(0, line.find('='))] = line.substr(line.find('=') + 1);
    if (!ours || *ours != theirs) ++bad;
  }
  ts::write_file(dir / "a.env", "T=1\n");
  ts::write_file(dir / "b.env", "T=2\n");
  SourceContext ctx;
  ctx.base_dir = dir.path();
  RuntimeEnvironment env;
  for (const char* n : {"a.env", "b.env"})
    env.push_layer({n, parse_at_run_time(MapFileSource{make_literal_gstring(n)}, env, ctx)}, true);
  bool shadow = *env.lookup("T") == "2";
  std::set<std::string> names;
  for (const auto& d : derived_variables(load_plugin_config(ts::data_dir() / "bwa_plugin"))) names.insert(d.name);
  bool naming = names.count("PLUGINS_ALIGNER_BWA_GOBY_ARTIFACT_NYOSH_SAMPE_SAMSE_OPTIONS") &&
                names.count("RESOURCES_ARTIFACTS_BWA_WITH_GOBY_ARTIFACT_EXECUTABLE");
  return {bad == 0 && shadow && naming, "50 map files, " + std::to_string(bad) + " differ; shadowing " +
                                            (shadow ? "ok" : "bad") + ", naming " + (naming ? "ok" : "bad")};
}

Outcome package() {
  Script s = ts::parse_or_die(ts::read_file(ts::data_dir() / "bwa_aligner.nyosh"));
  ts::TempDir dir;
  fs::path stub = dir / "stub";
  ts::write_file(stub, "#!/bin/sh\nprintf '%s|' \"$@\"\n");
  fs::permissions(stub, fs::perms::owner_all);
  BuildOptions opt;
  opt.runner_path = stub.string();
  opt.config = load_plugin_config(ts::data_dir() / "bwa_plugin");
  opt.deploy = false;
  build_package(s, dir / "a", opt);
  build_package(s, dir / "b", opt);
  bool same = true;
  for (const char* f : {"manifest.xml", "run_model.sh", "script.nyosh", "script.sh"})
    same = same && ts::read_file(dir / "a" / f) == ts::read_file(dir / "b" / f);
  fs::path a = dir / "a";
  auto r = ts::run_shell("JOB_DIR=" + ts::sh_quote(a.string()) + " bash -c " +
                         ts::sh_quote(". \"$JOB_DIR/script.sh\"; plugin_align 'o 1' b"));
  std::string want = "run|" + (a / "script.nyosh").string() + "|plugin_align|o 1|b|";
  return {same && r.out == want, std::string("deterministic ") + (same ? "yes" : "no") + ", wrapper [" + r.out + "]"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"shell-oracle equivalence", shell_oracle}, {"micro-parse fixture", bwa_aln_line},   {"GString vs concatenation", greeting},
      {"laziness", laziness},                     {"diagnostics", diagnostics},    {"entry dispatch", dispatch},
      {"round trip", round_trip},                 {"step logging", step_logging}, {"environment sources", environment},
      {"package build", package},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << "criterion " << i + 1 << " " << (o.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << ": "
              << o.detail << "\n";
  }
  std::cout << failed << " of " << criteria.size() << " criteria failing\n";
  return failed ? 1 : 0;
}
