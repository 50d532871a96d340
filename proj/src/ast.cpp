#include "nyosh/ast.hpp"

#include <cctype>

namespace nyosh {

GString make_literal_gstring(std::string text) {
  GString g;
  g.components.emplace_back(GLiteral{std::move(text)});
  return g;
}

GString normalize_gstring(GString g) {
  std::vector<GStringComponent> out;
  out.reserve(g.components.size());
  for (auto& c : g.components) {
    if (auto* lit = std::get_if<GLiteral>(&c)) {
      if (lit->text.empty()) continue;
      if (!out.empty()) {
        if (auto* prev = std::get_if<GLiteral>(&out.back())) {
          prev->text += lit->text;
          continue;
        }
      }
    }
    out.push_back(std::move(c));
  }
  if (out.empty() && !g.raw_text) out.emplace_back(GLiteral{});
  g.components = std::move(out);
  return g;
}

bool is_normal_form(const GString& g) {
  if (g.components.size() == 1) return true;
  for (std::size_t i = 0; i < g.components.size(); ++i) {
    const auto* lit = std::get_if<GLiteral>(&g.components[i]);
    if (!lit) continue;
    if (lit->text.empty()) return false;
    if (i > 0 && std::holds_alternative<GLiteral>(g.components[i - 1])) return false;
  }
  return true;
}

const std::string* reference_name(const GStringComponent& c) {
  if (auto* v = std::get_if<GVarReference>(&c)) return &v->name;
  if (auto* e = std::get_if<GEnvReader>(&c)) return &e->name;
  return nullptr;
}

bool is_static_method(Method m) {
  switch (m) {
    case Method::Format:
    case Method::GetBaseName:
    case Method::GetFullPath:
    case Method::Getenv:
      return true;
    default:
      return false;
  }
}

std::string_view operator_symbol(OperatorKind k) {
  switch (k) {
    case OperatorKind::Pipe: return "|";
    case OperatorKind::And: return "&&";
    case OperatorKind::Or: return "||";
    case OperatorKind::Seq: return ";";
    case OperatorKind::Background: return "&";
  }
  return "?";
}

bool is_command_like(const CommandElement& e) { return !std::holds_alternative<Operator>(e); }

bool is_operator(const CommandElement& e) { return std::holds_alternative<Operator>(e); }

bool is_operator(const CommandElement& e, OperatorKind k) {
  const auto* op = std::get_if<Operator>(&e);
  return op && op->kind == k;
}

bool alternation_holds(const std::vector<CommandElement>& elements) {
  if (elements.empty()) return false;
  if (!std::holds_alternative<Command>(elements.front()) &&
      !std::holds_alternative<FetchCommand>(elements.front()) &&
      !std::holds_alternative<PushCommand>(elements.front()))
    return false;
  for (std::size_t i = 1; i < elements.size(); ++i) {
    const auto& prev = elements[i - 1];
    const auto& cur = elements[i];
    if (is_operator(prev) && is_operator(cur)) return false;
    if (std::holds_alternative<RedirectToFile>(cur)) {
      // A redirect consumes the output of the command right before it.
      if (!is_command_like(prev) || std::holds_alternative<RedirectToFile>(prev)) return false;
      continue;
    }
    if (std::holds_alternative<RedirectToFile>(prev) && !is_operator(cur, OperatorKind::Seq) &&
        !is_operator(cur, OperatorKind::Background))
      return false;
    if (is_command_like(prev) && is_command_like(cur)) return false;
  }
  const auto& last = elements.back();
  return !(is_operator(last, OperatorKind::Pipe) || is_operator(last, OperatorKind::And) ||
           is_operator(last, OperatorKind::Or));
}

std::string_view kind_name(PluginKind k) {
  switch (k) {
    case PluginKind::Aligner: return "ALIGNER";
    case PluginKind::AlignmentAnalysis: return "ALIGNMENT_ANALYSIS";
    case PluginKind::Resource: return "RESOURCE";
    case PluginKind::ArtifactInstall: return "ARTIFACT_INSTALL";
    case PluginKind::Task: return "TASK";
  }
  return "?";
}

std::optional<PluginKind> parse_kind(std::string_view s) {
  for (auto k : {PluginKind::Aligner, PluginKind::AlignmentAnalysis, PluginKind::Resource,
                 PluginKind::ArtifactInstall, PluginKind::Task})
    if (kind_name(k) == s) return k;
  return std::nullopt;
}

std::string_view kind_phrase(PluginKind k) {
  switch (k) {
    case PluginKind::Aligner: return "aligner";
    case PluginKind::AlignmentAnalysis: return "alignment analysis";
    case PluginKind::Resource: return "resource";
    case PluginKind::ArtifactInstall: return "artifact install";
    case PluginKind::Task: return "task";
  }
  return "?";
}

std::string kind_directory(PluginKind k) {
  std::string s{kind_name(k)};
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool is_valid_plugin_id(std::string_view id) {
  if (id.empty()) return false;
  for (char c : id)
    if (!(std::isupper(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) ||
          c == '_'))
      return false;
  return true;
}

std::string_view type_name(ValueType t) {
  switch (t) {
    case ValueType::String: return "string";
    case ValueType::Int: return "int";
    case ValueType::Boolean: return "boolean";
    case ValueType::StringArray: return "string[]";
  }
  return "?";
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::ToUpperCase: return "toUpperCase";
    case Method::Split: return "split";
    case Method::Equals: return "equals";
    case Method::Length: return "length";
    case Method::Index: return "indexOf";
    case Method::Format: return "format";
    case Method::GetBaseName: return "getBaseName";
    case Method::GetFullPath: return "getFullPath";
    case Method::Getenv: return "getenv";
  }
  return "?";
}

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto first = static_cast<unsigned char>(s.front());
  if (!(std::isalpha(first) || first == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  return true;
}

}  // namespace nyosh
