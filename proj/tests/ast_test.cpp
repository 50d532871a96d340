#include <gtest/gtest.h>

#include <random>

#include "nyosh/ast.hpp"
#include "nyosh/parser.hpp"
#include "nyosh/pretty.hpp"
#include "support.hpp"

using namespace nyosh;
namespace ts = testing_support;

namespace {

GString gs(std::vector<GStringComponent> c) { return GString{std::move(c), std::nullopt}; }

std::string flatten(const GString& g) {
  std::string out;
  for (const auto& c : g.components) {
    if (const auto* l = std::get_if<GLiteral>(&c)) out += l->text;
    else out += "${" + *reference_name(c) + "}";
  }
  return out;
}

}  // namespace

TEST(GString, NormalizeMergesAndDropsEmpty) {
  GString g = gs({GLiteral{"a"}, GLiteral{""}, GLiteral{"b"}, GVarReference{"x"}, GLiteral{""}});
  GString n = normalize_gstring(g);
  EXPECT_EQ(n, gs({GLiteral{"ab"}, GVarReference{"x"}}));
  EXPECT_TRUE(is_normal_form(n));
  EXPECT_FALSE(is_normal_form(g));
}

TEST(GString, EmptyKeepsOneLiteral) {
  GString n = normalize_gstring(gs({GLiteral{""}, GLiteral{""}}));
  ASSERT_EQ(n.components.size(), 1u);
  EXPECT_EQ(std::get<GLiteral>(n.components[0]).text, "");
}

TEST(GString, NormalizeProperty) {
  std::mt19937 rng(7);
  for (int iter = 0; iter < 500; ++iter) {
    GString g;
    int n = std::uniform_int_distribution<int>(0, 8)(rng);
    for (int i = 0; i < n; ++i) {
      switch (rng() % 3) {
        case 0: g.components.emplace_back(GLiteral{std::string(rng() % 3, 'a' + static_cast<char>(rng() % 3))}); break;
        case 1: g.components.emplace_back(GVarReference{"v" + std::to_string(rng() % 4)}); break;
        default: g.components.emplace_back(GEnvReader{"E" + std::to_string(rng() % 4)}); break;
      }
    }
    GString once = normalize_gstring(g);
    EXPECT_TRUE(is_normal_form(once));
    EXPECT_EQ(normalize_gstring(once), once);
    EXPECT_EQ(flatten(once), flatten(g));
  }
}

TEST(Ast, LocationsDoNotAffectEquality) {
  Expression a{IntLiteral{3}, NodeLocation{SourceLocation{"f", 1, 1}}};
  Expression b{IntLiteral{3}, NodeLocation{SourceLocation{"g", 9, 4}}};
  EXPECT_EQ(a, b);
}

TEST(Ast, BoxDeepCopies) {
  Ternary t{Expression{BoolLiteral{true}, {}}, Expression{IntLiteral{1}, {}}, Expression{IntLiteral{2}, {}}};
  Ternary copy = t;
  std::get<IntLiteral>(copy.then_value->node).value = 5;
  EXPECT_EQ(std::get<IntLiteral>(t.then_value->node).value, 1);
  EXPECT_NE(t, copy);
}

TEST(Ast, AlternationInvariant) {
  Command c{make_literal_gstring("x")};
  auto op = [](OperatorKind k) { return CommandElement{Operator{k}}; };
  EXPECT_TRUE(alternation_holds({c}));
  EXPECT_TRUE(alternation_holds({c, op(OperatorKind::Pipe), c}));
  EXPECT_TRUE(alternation_holds({c, op(OperatorKind::Seq)}));
  EXPECT_TRUE(alternation_holds({c, op(OperatorKind::Background)}));
  EXPECT_TRUE(alternation_holds({c, RedirectToFile{make_literal_gstring("f")}}));
  EXPECT_TRUE(alternation_holds({c, RedirectToFile{make_literal_gstring("f")}, op(OperatorKind::Seq), c}));
  EXPECT_TRUE(alternation_holds({FetchCommand{"IN"}, op(OperatorKind::Pipe), PushCommand{"OUT"}}));

  EXPECT_FALSE(alternation_holds({}));
  EXPECT_FALSE(alternation_holds({op(OperatorKind::Pipe), c}));
  EXPECT_FALSE(alternation_holds({c, op(OperatorKind::Pipe)}));
  EXPECT_FALSE(alternation_holds({c, op(OperatorKind::And)}));
  EXPECT_FALSE(alternation_holds({c, op(OperatorKind::Pipe), op(OperatorKind::Pipe), c}));
  EXPECT_FALSE(alternation_holds({c, c}));
  EXPECT_FALSE(alternation_holds({c, RedirectToFile{make_literal_gstring("f")}, op(OperatorKind::Pipe), c}));
  EXPECT_FALSE(alternation_holds({RedirectToFile{make_literal_gstring("f")}}));
}

TEST(Ast, KindNames) {
  for (auto k : {PluginKind::Aligner, PluginKind::AlignmentAnalysis, PluginKind::Resource,
                 PluginKind::ArtifactInstall, PluginKind::Task}) {
    EXPECT_EQ(parse_kind(kind_name(k)), k);
  }
  EXPECT_EQ(kind_name(PluginKind::AlignmentAnalysis), "ALIGNMENT_ANALYSIS");
  EXPECT_EQ(kind_directory(PluginKind::AlignmentAnalysis), "alignment_analysis");
  EXPECT_EQ(kind_phrase(PluginKind::Aligner), "aligner");
  EXPECT_FALSE(parse_kind("aligner").has_value());
}

TEST(Ast, PluginIds) {
  EXPECT_TRUE(is_valid_plugin_id("BWA_GOBY_ARTIFACT_NYOSH"));
  EXPECT_TRUE(is_valid_plugin_id("A1"));
  EXPECT_FALSE(is_valid_plugin_id(""));
  EXPECT_FALSE(is_valid_plugin_id("bwa"));
  EXPECT_FALSE(is_valid_plugin_id("BWA-GOBY"));
}

TEST(Ast, Identifiers) {
  EXPECT_TRUE(is_identifier("_a1"));
  EXPECT_FALSE(is_identifier("1a"));
  EXPECT_FALSE(is_identifier("a-b"));
  EXPECT_FALSE(is_identifier(""));
}

// ---------------------------------------------------------------------------
// Round trip

class Corpus : public ::testing::TestWithParam<std::string> {};

TEST_P(Corpus, PrettyPrintThenParseIsIdentity) {
  auto path = ts::data_dir() / GetParam();
  Script s = ts::parse_or_die(ts::read_file(path), path.string());
  std::string printed = pretty_print(s);
  Script again = ts::parse_or_die(printed, "<printed>");
  EXPECT_EQ(again, s) << printed;
  EXPECT_EQ(pretty_print(again), printed);
}

std::vector<std::string> corpus_files() {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(ts::data_dir() / "corpus"))
    out.push_back("corpus/" + e.path().filename().string());
  std::sort(out.begin(), out.end());
  out.push_back("bwa_aligner.nyosh");
  out.push_back("greeting.nyosh");
  out.push_back("greeting_concat.nyosh");
  return out;
}

INSTANTIATE_TEST_SUITE_P(Scripts, Corpus, ::testing::ValuesIn(corpus_files()),
                         [](const auto& info) {
                           std::string n = info.param;
                           for (char& c : n)
                             if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
                           return n;
                         });

TEST(RoundTrip, CorpusIsLargeEnough) { EXPECT_GE(corpus_files().size(), 20u); }

// Random GStrings with awkward literal text survive printing.
TEST(RoundTrip, RandomGStrings) {
  std::mt19937 rng(11);
  const std::string alphabet = "ab \"\\$}{\t\n%x";
  for (int iter = 0; iter < 300; ++iter) {
    GString g;
    int n = std::uniform_int_distribution<int>(1, 6)(rng);
    for (int i = 0; i < n; ++i) {
      if (rng() % 2) {
        std::string t;
        int len = std::uniform_int_distribution<int>(1, 5)(rng);
        for (int k = 0; k < len; ++k) t += alphabet[rng() % alphabet.size()];
        g.components.emplace_back(GLiteral{t});
      } else if (rng() % 2) {
        g.components.emplace_back(GVarReference{"local"});
      } else {
        g.components.emplace_back(GEnvReader{"HOME"});
      }
    }
    g = normalize_gstring(g);
    bool has_ref = std::any_of(g.components.begin(), g.components.end(),
                               [](const auto& c) { return reference_name(c) != nullptr; });
    if (!has_ref) continue;

    Script s;
    s.name = "R";
    EntryPoint ep;
    ep.name = "main";
    ep.body.push_back(Statement{VarDecl{"local", ValueType::String, Expression{StringLiteral{"v"}, {}}}, {}});
    ep.body.push_back(Statement{Println{Expression{g, {}}}, {}});
    s.entry_points.push_back(ep);
    std::string printed = pretty_print(s);
    auto parsed = parse_script(printed);
    ASSERT_TRUE(parsed.ok()) << printed;
    EXPECT_EQ(*parsed.script, s) << printed;
  }
}
