#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <random>

#include "nyosh/checker.hpp"
#include "support.hpp"

using namespace nyosh;
namespace ts = testing_support;

namespace {

std::string wrap(const std::string& body) { return "script T {\n  entry point main() {\n" + body + "\n  }\n}\n"; }

DesignConfig no_host_env() {
  DesignConfig dc;
  dc.process_names = std::vector<std::string>{"HOME", "USER"};
  return dc;
}

std::vector<std::string_view> codes(const std::vector<Diagnostic>& ds) {
  std::vector<std::string_view> out;
  for (const auto& d : ds) out.push_back(d.code);
  return out;
}

DesignConfig bwa_config() {
  DesignConfig dc;
  dc.sources.plugin = load_plugin_config(ts::data_dir() / "bwa_plugin");
  dc.process_names = std::vector<std::string>{};
  return dc;
}

}  // namespace

TEST(Checker, ConsecutiveOperatorsFixture) {
  auto ds = check(ts::parse_or_die(wrap("execute: a | | b")), no_host_env());
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].code, code::ConsecutiveOperators);
  EXPECT_EQ(ds[0].severity, Severity::Error);
  EXPECT_EQ(ds[0].location.line, 3);
}

TEST(Checker, UnauthorizedEnvAccessFixture) {
  auto ds = check(ts::parse_or_die(wrap("System.out.println(\"${USER}\");")), no_host_env());
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].code, code::UnauthorizedEnvAccess);
  EXPECT_NE(ds[0].message.find("USER"), std::string::npos);
}

TEST(Checker, AccessAfterLoadIsFine) {
  auto ds = check(ts::parse_or_die(wrap("load environment sources { Java Environment }\nSystem.out.println(\"${USER}\");")),
                  no_host_env());
  EXPECT_TRUE(ds.empty()) << format_diagnostic(ds.at(0));
}

TEST(Checker, LoadAfterUseDoesNotCount) {
  auto ds = check(ts::parse_or_die(wrap("System.out.println(\"${USER}\");\nload environment sources { Java Environment }")),
                  no_host_env());
  EXPECT_EQ(codes(ds), std::vector<std::string_view>{code::UnauthorizedEnvAccess});
}

TEST(Checker, RedirectNotTerminalFixture) {
  auto ds = check(ts::parse_or_die(wrap("execute: sort x redirect to file out.txt | wc")), no_host_env());
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].code, code::RedirectNotTerminal);
}

TEST(Checker, OperatorPlacementRule) {
  auto exec_of = [](const std::string& line) {
    Script s = ts::parse_or_die(wrap("execute: " + line));
    return std::get<ExecuteCommand>(s.entry_points[0].body[0].node);
  };
  EXPECT_EQ(codes(rule_operator_placement(exec_of("| a"))), std::vector<std::string_view>{code::LeadingOperator});
  EXPECT_EQ(codes(rule_operator_placement(exec_of("a &&"))), std::vector<std::string_view>{code::TrailingOperator});
  EXPECT_TRUE(rule_operator_placement(exec_of("a ;")).empty());
  EXPECT_TRUE(rule_operator_placement(exec_of("a | b redirect to file f ; c")).empty());
  EXPECT_EQ(codes(rule_operator_placement(exec_of("a redirect to file f && b"))),
            std::vector<std::string_view>{code::RedirectNotTerminal});
}

TEST(Checker, ContractViolationFixture) {
  std::string text =
      "plugin system:\nid: X_ALIGNER\nkind: ALIGNER\nlocation: /nowhere\n\n"
      "script S {\n  aligner entry point plugin_align(string output) {\n    System.out.println(\"a\");\n  }\n}\n";
  auto ds = check(ts::parse_or_die(text), no_host_env());
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].code, code::ContractViolation);
}

TEST(Checker, ContractRule) {
  auto header = [](const std::string& kind, const std::string& entries) {
    return ts::parse_or_die("plugin system:\nid: P\nkind: " + kind + "\nlocation: /x\n\nscript S {\n" + entries + "}\n");
  };
  const std::string body = " {\n    System.out.println(\"a\");\n  }\n";
  EXPECT_TRUE(rule_entry_point_contract(header("ALIGNER", "  aligner entry point plugin_align(string o, string b)" + body)).empty());
  // Missing entry.
  EXPECT_EQ(rule_entry_point_contract(header("ALIGNER", "  entry point main()" + body)).size(), 1u);
  // Present but not designated.
  EXPECT_EQ(rule_entry_point_contract(header("ALIGNER", "  entry point plugin_align(string o, string b)" + body)).size(), 1u);
  // Designated entry outside the contract.
  EXPECT_EQ(rule_entry_point_contract(header("TASK", "  designated entry point plugin_task()\n  {\n  }\n"
                                                     "  designated entry point extra()" + body)).size(),
            1u);
  // Kinds without a contract accept anything.
  EXPECT_TRUE(rule_entry_point_contract(header("RESOURCE", "  designated entry point main()" + body)).empty());
  EXPECT_TRUE(rule_entry_point_contract(header("TASK", "  designated entry point plugin_task()" + body)).empty());
  // No header, no contract.
  EXPECT_TRUE(rule_entry_point_contract(ts::parse_or_die(wrap("System.out.println(\"a\");"))).empty());
}

TEST(Checker, BwaAlignerHasNoErrors) {
  Script s = ts::parse_or_die(ts::read_file(ts::data_dir() / "bwa_aligner.nyosh"));
  auto ds = check(s, bwa_config());
  EXPECT_FALSE(has_errors(ds));
  for (const auto& d : ds) ADD_FAILURE() << format_diagnostic(d);
}

TEST(Checker, BwaAlignerWithoutPluginConfigReportsPluginNames) {
  Script s = ts::parse_or_die(ts::read_file(ts::data_dir() / "bwa_aligner.nyosh"));
  DesignConfig dc;
  dc.process_names = std::vector<std::string>{};
  auto ds = check(s, dc);
  ASSERT_TRUE(has_errors(ds));
  EXPECT_EQ(ds.front().code, code::UnauthorizedEnvAccess);
  // Once a map file with a computed path is loaded, unknown names may come
  // from it, so later accesses are only warnings.
  for (const auto& d : ds)
    EXPECT_TRUE(d.code == code::UnauthorizedEnvAccess || d.code == code::RuntimeOnlySource) << format_diagnostic(d);
}

TEST(Checker, RuntimeOnlySourceDowngradesToWarning) {
  auto ds = check(ts::parse_or_die(wrap("string d = \"/tmp\";\nload environment sources { MapFile: \"${d}/x.env\" }\n"
                                        "System.out.println(\"${FROM_FILE}\");")),
                  no_host_env());
  EXPECT_EQ(codes(ds), std::vector<std::string_view>{code::RuntimeOnlySource});
  EXPECT_FALSE(has_errors(ds));
}

TEST(Checker, MapFileNamesAtDesignTime) {
  ts::TempDir dir;
  ts::write_file(dir / "a.env", "FROM_FILE=1\n");
  DesignConfig dc = no_host_env();
  dc.sources.base_dir = dir.path();
  auto ds = check(ts::parse_or_die(wrap("load environment sources { MapFile: \"a.env\" }\n"
                                        "System.out.println(\"${FROM_FILE} ${OTHER}\");")),
                  dc);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_NE(ds[0].message.find("OTHER"), std::string::npos);
}

TEST(Checker, DeclarationRules) {
  EXPECT_EQ(codes(check(ts::parse_or_die(wrap("string a = \"1\";\nstring a = \"2\";")), no_host_env())),
            std::vector<std::string_view>{code::DuplicateDeclaration});
  EXPECT_EQ(codes(check(ts::parse_or_die(wrap("b = \"2\";")), no_host_env())),
            std::vector<std::string_view>{code::UndefinedVariable});
  EXPECT_EQ(codes(check(ts::parse_or_die(wrap("int n = \"x\";")), no_host_env())),
            std::vector<std::string_view>{code::TypeMismatch});
  EXPECT_EQ(codes(check(ts::parse_or_die(wrap("if (\"x\") {\n}")), no_host_env())),
            std::vector<std::string_view>{code::TypeMismatch});
  EXPECT_EQ(codes(check(ts::parse_or_die("script T error management: Bogus {\n  entry point main() {\n  }\n}\n"),
                        no_host_env())),
            std::vector<std::string_view>{code::UnknownErrorPolicy});
  EXPECT_EQ(codes(check(ts::parse_or_die("script T {\n  entry point f(string a, string a) {\n  }\n}\n"), no_host_env())),
            std::vector<std::string_view>{code::DuplicateParameter});
  EXPECT_EQ(codes(check(ts::parse_or_die("script T {\n  entry point f() {\n  }\n  entry point f() {\n  }\n}\n"),
                        no_host_env())),
            std::vector<std::string_view>{code::DuplicateEntryPoint});
}

TEST(Checker, DiagnosticsSortedAndFormatted) {
  auto ds = check(ts::parse_or_die(wrap("execute: a | | b\nSystem.out.println(\"${NOPE}\");"), "x.nyosh"),
                  no_host_env());
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_LT(ds[0].location, ds[1].location);
  std::string line = format_diagnostic(ds[0]);
  EXPECT_EQ(line.rfind("x.nyosh:3:", 0), 0u) << line;
  EXPECT_NE(line.find("error E_CONSECUTIVE_OPERATORS: "), std::string::npos) << line;

  auto j = nlohmann::ordered_json::parse(diagnostics_to_json(ds));
  ASSERT_TRUE(j.is_array());
  EXPECT_EQ(j[1]["code"], "E_UNAUTHORIZED_ENV_ACCESS");
  EXPECT_EQ(j[1]["line"], 4);
  std::vector<std::string> keys;
  for (auto it = j[0].begin(); it != j[0].end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"file", "line", "col", "severity", "code", "message"}));
}

// A name is offered by completion at a statement exactly when a reference
// to it there passes the access rule.
TEST(Checker, CompletionAccessDuality) {
  ts::TempDir dir;
  ts::write_file(dir / "one.env", "ONE_A=1\nSHARED=1\n");
  ts::write_file(dir / "two.env", "TWO_A=2\nSHARED=2\n");
  const std::vector<std::string> loads = {"load environment sources { MapFile: \"one.env\" }",
                                          "load environment sources { MapFile: \"two.env\" }",
                                          "load environment sources { Java Environment }"};
  const std::vector<std::string> names = {"ONE_A", "TWO_A", "SHARED", "HOME", "USER", "MISSING", "local"};
  DesignConfig dc;
  dc.process_names = std::vector<std::string>{"HOME", "USER"};
  dc.sources.base_dir = dir.path();

  std::mt19937 rng(9);
  for (int iter = 0; iter < 60; ++iter) {
    std::string body;
    int n = std::uniform_int_distribution<int>(0, 4)(rng);
    for (int i = 0; i < n; ++i) body += loads[rng() % loads.size()] + "\n";
    if (rng() % 2) body += "string local = \"x\";\n";
    body += "System.out.println(\"probe\");";
    Script base = ts::parse_or_die(wrap(body));
    const Statement& probe = base.entry_points[0].body.back();
    auto completions = list_completions(base, probe.loc.value, dc);

    for (const auto& name : names) {
      std::string probe_body = body.substr(0, body.rfind("System")) + "System.out.println(\"${" + name + "}\");";
      Script s = ts::parse_or_die(wrap(probe_body));
      bool offered = std::any_of(completions.begin(), completions.end(), [&](const Completion& c) {
        return c.name == name && c.kind != Completion::Kind::Slot;
      });
      bool accepted = !has_errors(check(s, dc));
      EXPECT_EQ(offered, accepted) << name << " in\n" << probe_body;
    }
  }
}

TEST(Checker, CompletionsIncludeSlotsAndProvenance) {
  Script s = ts::parse_or_die(ts::read_file(ts::data_dir() / "bwa_aligner.nyosh"));
  const auto& step = std::get<StepBlock>(s.entry_points[0].body[0].node);
  auto cs = list_completions(s, step.body.back().loc.value, bwa_config());
  auto find = [&](const std::string& n) {
    return std::find_if(cs.begin(), cs.end(), [&](const Completion& c) { return c.name == n; });
  };
  ASSERT_NE(find("READS"), cs.end());
  EXPECT_EQ(find("READS")->kind, Completion::Kind::Slot);
  ASSERT_NE(find("SAMPLE_NAME"), cs.end());
  EXPECT_EQ(find("SAMPLE_NAME")->kind, Completion::Kind::Lexical);
  ASSERT_NE(find("PLUGINS_ALIGNER_BWA_GOBY_ARTIFACT_NYOSH_SAMPE_SAMSE_OPTIONS"), cs.end());
  // Map files with computed paths only reveal their names at run time.
  EXPECT_EQ(find("LD_LIBRARY_PATH"), cs.end());
}
