#include "nyosh/microparse.hpp"

#include <algorithm>

#include "nyosh/parser.hpp"

namespace nyosh {
namespace {

const SourceLocation kRawLocation{"<raw>", 1, 1};

SourceLocation at_column(SourceLocation base, std::size_t offset) {
  base.column += static_cast<int>(offset);
  return base;
}

bool blank(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

std::string trim(std::string_view s) {
  while (!s.empty() && blank(s.front())) s.remove_prefix(1);
  while (!s.empty() && blank(s.back())) s.remove_suffix(1);
  return std::string(s);
}

VarDecl empty_string_decl(const std::string& name) {
  return VarDecl{name, ValueType::String, Expression{StringLiteral{""}, {}}};
}

}  // namespace

MicroParseResult extract_variables(std::string_view raw, const std::set<std::string>& scope,
                                   const std::set<std::string>& env_names) {
  MicroParseResult result;
  GString g;
  std::string lit;
  std::set<std::string> declared;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    char c = raw[i];
    if (c == '\\' && i + 1 < raw.size()) {
      lit += c;
      lit += raw[++i];
      continue;
    }
    if (c != '$' || i + 1 >= raw.size() || raw[i + 1] != '{') {
      lit += c;
      continue;
    }
    std::size_t close = raw.find('}', i + 2);
    if (close == std::string_view::npos) {
      result.replacement = make_literal_gstring(std::string(raw));
      result.new_declarations.clear();
      result.diagnostics.push_back(
          make_error(code::UnterminatedReference, at_column(kRawLocation, i), "unterminated ${ reference"));
      return result;
    }
    std::string name(raw.substr(i + 2, close - i - 2));
    if (!is_identifier(name)) {
      // Not a reference; rescan from the next character so `${a ${B}` still
      // finds ${B}.
      lit += c;
      continue;
    }
    if (!lit.empty()) g.components.emplace_back(GLiteral{std::exchange(lit, {})});
    g.components.emplace_back(GVarReference{name});
    if (!scope.count(name) && declared.insert(name).second) {
      result.new_declarations.push_back(empty_string_decl(name));
      if (env_names.count(name))
        result.diagnostics.push_back(make_warning(code::ShadowsEnvironment, at_column(kRawLocation, i),
                                                  "local variable " + name + " shadows an environment variable"));
    }
    i = close;
  }
  if (!lit.empty()) g.components.emplace_back(GLiteral{lit});
  result.replacement = normalize_gstring(std::move(g));
  result.consumed = true;
  return result;
}

MicroParseResult parse_command_literal(std::string_view raw) {
  MicroParseResult result;
  result.replacement = std::vector<CommandElement>{};
  auto tokens = split_command_line(raw);
  if (!tokens) {
    result.diagnostics.push_back(make_error(code::MissingOperator, kRawLocation, tokens.error()));
    return result;
  }
  std::vector<CommandElement> out;
  bool expect_command = true;
  std::size_t pending_op = std::string_view::npos;  // operator awaiting a command
  for (const auto& tok : *tokens) {
    if (tok.kind == CommandToken::Kind::Text) {
      std::string text = trim(tok.text);
      if (text.empty()) continue;
      GString g;
      g.raw_text = std::move(text);
      out.emplace_back(Command{std::move(g)});
      expect_command = false;
      pending_op = std::string_view::npos;
      continue;
    }
    auto where = at_column(kRawLocation, tok.offset);
    if (out.empty()) {
      result.diagnostics.push_back(
          make_error(code::LeadingOperator, where, "operator '" + tok.text + "' without a preceding command"));
      return result;
    }
    if (expect_command) {
      result.diagnostics.push_back(
          make_error(code::ConsecutiveOperators, where, "two consecutive operators before '" + tok.text + "'"));
      return result;
    }
    out.emplace_back(Operator{tok.op});
    expect_command = true;
    pending_op = tok.offset;
  }
  if (out.empty()) {
    result.diagnostics.push_back(make_error(code::MissingOperator, kRawLocation, "no command in text"));
    return result;
  }
  if (pending_op != std::string_view::npos) {
    const auto& op = std::get<Operator>(out.back());
    if (op.kind == OperatorKind::Pipe || op.kind == OperatorKind::And || op.kind == OperatorKind::Or) {
      result.diagnostics.push_back(make_error(code::TrailingOperator, at_column(kRawLocation, pending_op),
                                              "operator '" + std::string(operator_symbol(op.kind)) +
                                                  "' has no right-hand command"));
      return result;
    }
  }
  result.replacement = std::move(out);
  result.consumed = true;
  return result;
}

namespace {

// Collects every staged GString in a statement so one pass can rewrite them.
struct StagedSlots {
  std::vector<GString*> slots;

  void expr(Expression& e) {
    std::visit(overloaded{
                   [&](GString& g) {
                     if (g.is_staged()) slots.push_back(&g);
                   },
                   [&](PathPattern& p) {
                     if (p.pattern.is_staged()) slots.push_back(&p.pattern);
                   },
                   [&](Ternary& t) {
                     expr(*t.condition);
                     expr(*t.then_value);
                     expr(*t.else_value);
                   },
                   [&](MethodCall& m) {
                     if (m.receiver) expr(**m.receiver);
                     for (auto& a : m.args) expr(a);
                   },
                   [&](ArrayIndex& a) {
                     expr(*a.array);
                     expr(*a.index);
                   },
                   [&](Binary& b) {
                     expr(*b.lhs);
                     expr(*b.rhs);
                   },
                   [](auto&) {},
               },
               e.node);
  }

  void gstring(GString& g) {
    if (g.is_staged()) slots.push_back(&g);
  }

  void statement(Statement& s) {
    std::visit(overloaded{
                   [&](VarDecl& d) { expr(d.initializer); },
                   [&](Assignment& a) { expr(a.value); },
                   [&](If& i) { expr(i.condition); },
                   [&](Println& p) { expr(p.value); },
                   [&](ExpressionStatement& e) { expr(e.expr); },
                   [&](ExecuteCommand& x) {
                     for (auto& el : x.elements) {
                       if (auto* c = std::get_if<Command>(&el)) gstring(c->text);
                       if (auto* r = std::get_if<RedirectToFile>(&el)) gstring(r->target);
                     }
                   },
                   [&](LoadEnvironmentSources& l) {
                     for (auto& src : l.sources)
                       if (auto* m = std::get_if<MapFileSource>(&src)) gstring(m->path);
                   },
                   [&](Fail& f) { gstring(f.message); },
                   [](StepBlock&) {},
               },
               s.node);
  }
};

void relocate(std::vector<Diagnostic>& diags, const SourceLocation& at) {
  for (auto& d : diags) {
    int col = d.location.column;
    d.location = at;
    d.location.column += col - 1;
  }
}

// An execute statement still holding one staged command line.
ExecuteCommand* unsplit_execute(Statement& s) {
  auto* x = std::get_if<ExecuteCommand>(&s.node);
  if (!x || x->elements.size() != 1) return nullptr;
  auto* c = std::get_if<Command>(&x->elements.front());
  if (!c || !c->text.is_staged()) return nullptr;
  return x;
}

bool split_commands(Statement& s, std::vector<Diagnostic>& diags) {
  ExecuteCommand* x = unsplit_execute(s);
  auto r = parse_command_literal(*std::get<Command>(x->elements.front()).text.raw_text);
  diags.insert(diags.end(), r.diagnostics.begin(), r.diagnostics.end());
  if (!r.consumed) return false;
  x->elements = std::get<std::vector<CommandElement>>(std::move(r.replacement));
  return true;
}

}  // namespace

IntentionOutcome apply_intention(StatementList& body, std::size_t index, Intention which,
                                 const std::set<std::string>& scope, const std::set<std::string>& env_names) {
  IntentionOutcome out;
  if (index >= body.size()) return out;
  Statement stmt = body[index];
  const SourceLocation at = stmt.loc.value;

  if (which == Intention::ParseCommands) {
    if (!unsplit_execute(stmt)) return out;
    bool ok = split_commands(stmt, out.diagnostics);
    relocate(out.diagnostics, at);
    if (!ok) return out;
    body[index] = std::move(stmt);
    out.applied = true;
    return out;
  }

  // Extracting from an unsplit command line would hide its operators inside
  // literal text, so split it first.
  if (unsplit_execute(stmt) && !split_commands(stmt, out.diagnostics)) {
    relocate(out.diagnostics, at);
    return out;
  }
  StagedSlots staged;
  staged.statement(stmt);
  if (staged.slots.empty()) return out;

  std::set<std::string> known = scope;
  std::vector<VarDecl> decls;
  for (GString* slot : staged.slots) {
    auto r = extract_variables(*slot->raw_text, known, env_names);
    out.diagnostics.insert(out.diagnostics.end(), r.diagnostics.begin(), r.diagnostics.end());
    if (!r.consumed) {
      relocate(out.diagnostics, at);
      return out;
    }
    for (auto& d : r.new_declarations) {
      known.insert(d.name);
      decls.push_back(std::move(d));
    }
    *slot = std::get<GString>(std::move(r.replacement));
  }
  relocate(out.diagnostics, at);

  std::vector<Statement> inserted;
  inserted.reserve(decls.size());
  for (auto& d : decls) inserted.push_back(Statement{std::move(d), stmt.loc});
  body[index] = std::move(stmt);
  body.insert(body.begin() + static_cast<std::ptrdiff_t>(index), std::make_move_iterator(inserted.begin()),
              std::make_move_iterator(inserted.end()));
  out.inserted = inserted.size();
  out.applied = true;
  return out;
}

}  // namespace nyosh
