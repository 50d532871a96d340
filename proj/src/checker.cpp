#include "nyosh/checker.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "nyosh/pretty.hpp"

namespace nyosh {

ContractTable default_contracts() {
  const Parameter out{"output", ValueType::String};
  const Parameter base{"basename", ValueType::String};
  return {
      {PluginKind::Aligner, ContractRule{"plugin_align", {out, base}}},
      {PluginKind::Task, ContractRule{"plugin_task", {}}},
      {PluginKind::Resource, std::nullopt},
      {PluginKind::ArtifactInstall,
       ContractRule{"plugin_install_artifact",
                    {Parameter{"artifact_id", ValueType::String}, Parameter{"install_dir", ValueType::String}}}},
      {PluginKind::AlignmentAnalysis, ContractRule{"plugin_alignment_analysis", {}}},
  };
}

// ---------------------------------------------------------------------------
// Operator placement

std::vector<Diagnostic> rule_operator_placement(const ExecuteCommand& exec, const SourceLocation& at) {
  std::vector<Diagnostic> out;
  const auto& el = exec.elements;
  auto sym = [](const CommandElement& e) {
    return "'" + std::string(operator_symbol(std::get<Operator>(e).kind)) + "'";
  };
  for (std::size_t i = 0; i < el.size(); ++i) {
    const auto& e = el[i];
    const CommandElement* prev = i ? &el[i - 1] : nullptr;
    if (is_operator(e)) {
      if (!prev) {
        out.push_back(make_error(code::LeadingOperator, at, "operator " + sym(e) + " without a preceding command"));
      } else if (is_operator(*prev)) {
        out.push_back(make_error(code::ConsecutiveOperators, at,
                                 "two consecutive operators " + sym(*prev) + " and " + sym(e)));
      } else if (std::holds_alternative<RedirectToFile>(*prev) && !is_operator(e, OperatorKind::Seq) &&
                 !is_operator(e, OperatorKind::Background)) {
        out.push_back(make_error(code::RedirectNotTerminal, at,
                                 "redirect to file must end its pipeline; found " + sym(e) + " after it"));
      }
      continue;
    }
    if (std::holds_alternative<RedirectToFile>(e)) {
      if (!prev || is_operator(*prev) || std::holds_alternative<RedirectToFile>(*prev))
        out.push_back(make_error(code::RedirectMisplaced, at, "redirect to file must directly follow a command"));
      continue;
    }
    if (prev && !is_operator(*prev)) {
      if (std::holds_alternative<RedirectToFile>(*prev))
        out.push_back(make_error(code::RedirectNotTerminal, at, "command follows a redirect in the same pipeline"));
      else
        out.push_back(make_error(code::MissingOperator, at, "two commands without an operator between them"));
    }
  }
  if (!el.empty()) {
    const auto& last = el.back();
    if (el.size() > 1 && !(el.size() >= 2 && is_operator(el[el.size() - 2])) &&
        (is_operator(last, OperatorKind::Pipe) || is_operator(last, OperatorKind::And) ||
         is_operator(last, OperatorKind::Or)))
      out.push_back(make_error(code::TrailingOperator, at, "operator " + sym(last) + " has no right-hand command"));
  }
  return out;
}

namespace {

// ---------------------------------------------------------------------------
// Walker shared by the scope-sensitive rules and completions.

std::optional<ValueType> type_of(const Expression& e, const std::function<std::optional<ValueType>(const std::string&)>& var) {
  return std::visit(
      overloaded{
          [](const StringLiteral&) -> std::optional<ValueType> { return ValueType::String; },
          [](const IntLiteral&) -> std::optional<ValueType> { return ValueType::Int; },
          [](const BoolLiteral&) -> std::optional<ValueType> { return ValueType::Boolean; },
          [&](const VarRef& v) { return var(v.name); },
          [](const GString&) -> std::optional<ValueType> { return ValueType::String; },
          [](const PathPattern&) -> std::optional<ValueType> { return std::nullopt; },
          [&](const Ternary& t) { return type_of(*t.then_value, var); },
          [](const MethodCall& m) -> std::optional<ValueType> {
            switch (m.method) {
              case Method::Equals: return ValueType::Boolean;
              case Method::Length:
              case Method::Index: return ValueType::Int;
              case Method::Split: return ValueType::StringArray;
              default: return ValueType::String;
            }
          },
          [](const ArrayIndex&) -> std::optional<ValueType> { return ValueType::String; },
          [](const Binary& b) -> std::optional<ValueType> {
            return b.op == BinaryOperator::Concat ? ValueType::String : ValueType::Boolean;
          },
      },
      e.node);
}

struct Binding {
  ValueType type = ValueType::String;
  bool parameter = false;
};

class Walker {
 public:
  Walker(const Script& script, const DesignConfig& config) : script_(script), config_(config) {
    ctx_ = config.sources;
    if (!ctx_.plugin && script.header) ctx_.plugin = model_from_header(*script.header);
  }

  bool emit_env = false;
  bool emit_decl = false;
  std::function<void(const Walker&, const SourceLocation&)> on_point;

  std::vector<Diagnostic> diags;

  void run_entry(const EntryPoint& entry) {
    env_ = DesignEnvironment{};
    scopes_.assign(1, {});
    std::set<std::string> seen;
    for (const auto& p : entry.params) {
      if (!seen.insert(p.name).second && emit_decl)
        diags.push_back(make_error(code::DuplicateParameter, entry.loc.value,
                                   "parameter " + p.name + " is declared twice in entry point " + entry.name));
      scopes_.back()[p.name] = Binding{p.type, true};
    }
    for (const auto& src : config_.preloaded) load(src, SourceLocation{entry.loc.value.file, 0, 0});
    if (on_point) on_point(*this, entry.loc.value);
    body(entry.body);
  }

  const DesignEnvironment& env() const { return env_; }

  std::vector<std::pair<std::string, Binding>> lexical() const {
    std::map<std::string, Binding> all;
    for (const auto& s : scopes_)
      for (const auto& [k, v] : s) all[k] = v;
    return {all.begin(), all.end()};
  }

 private:
  const Binding* find(const std::string& name) const {
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      auto f = it->find(name);
      if (f != it->end()) return &f->second;
    }
    return nullptr;
  }

  std::optional<ValueType> var_type(const std::string& name) const {
    const Binding* b = find(name);
    return b ? std::optional<ValueType>(b->type) : std::nullopt;
  }

  void body(const StatementList& list) {
    scopes_.emplace_back();
    for (const auto& s : list) statement(s);
    scopes_.pop_back();
  }

  // -- references ------------------------------------------------------------

  void env_name(const std::string& name, const SourceLocation& at) {
    if (!emit_env || find(name) || env_.available.count(name)) return;
    if (!reported_.insert(name).second) return;
    if (!env_.runtime_only.empty()) {
      const auto& src = env_.runtime_only.back();
      diags.push_back(make_warning(code::RuntimeOnlySource, at,
                                   name + " is not known at design time; it may come from " + src.source +
                                       " loaded at line " + std::to_string(src.loaded_at.line)));
    } else {
      diags.push_back(make_error(code::UnauthorizedEnvAccess, at,
                                 "environment variable " + name + " is not provided by any source loaded before this point"));
    }
  }

  void gstring(const GString& g, const SourceLocation& at) {
    if (g.is_staged()) return;
    for (const auto& c : g.components)
      if (const auto* n = reference_name(c)) env_name(*n, at);
  }

  void expr(const Expression& e, const SourceLocation& at) {
    std::visit(overloaded{
                   [&](const VarRef& v) {
                     if (emit_decl && !find(v.name) && reported_.insert(v.name).second)
                       diags.push_back(make_error(code::UndefinedVariable, at, "variable " + v.name + " is not declared"));
                   },
                   [&](const GString& g) { gstring(g, at); },
                   [&](const PathPattern& p) { gstring(p.pattern, at); },
                   [&](const Ternary& t) {
                     expr(*t.condition, at);
                     expr(*t.then_value, at);
                     expr(*t.else_value, at);
                   },
                   [&](const MethodCall& m) {
                     if (m.receiver) expr(**m.receiver, at);
                     for (const auto& a : m.args) expr(a, at);
                   },
                   [&](const ArrayIndex& a) {
                     expr(*a.array, at);
                     expr(*a.index, at);
                   },
                   [&](const Binary& b) {
                     expr(*b.lhs, at);
                     expr(*b.rhs, at);
                   },
                   [](const auto&) {},
               },
               e.node);
  }

  void expect_type(const Expression& e, ValueType want, const SourceLocation& at, const std::string& what) {
    if (!emit_decl) return;
    auto got = type_of(e, [this](const std::string& n) { return var_type(n); });
    if (got && *got != want)
      diags.push_back(make_error(code::TypeMismatch, at,
                                 what + " has type " + std::string(type_name(want)) + " but the value is " +
                                     std::string(type_name(*got))));
  }

  // -- statements ------------------------------------------------------------

  void load(const EnvironmentSourceSpec& src, const SourceLocation& at) {
    Provenance prov{source_label(src), at};
    if (const auto* m = std::get_if<MapFileSource>(&src)) gstring(m->path, at);
    DesignTimeNames names;
    if (std::holds_alternative<ProcessEnvSource>(src) && config_.process_names) {
      names.available = true;
      names.names = *config_.process_names;
    } else {
      names = list_design_time_names(src, ctx_);
    }
    if (!names.available) {
      env_.runtime_only.push_back(prov);
      return;
    }
    for (const auto& n : names.names) env_.available[n] = prov;
  }

  void statement(const Statement& s) {
    const SourceLocation& at = s.loc.value;
    if (on_point) on_point(*this, at);
    reported_.clear();
    std::visit(overloaded{
                   [&](const VarDecl& d) {
                     expr(d.initializer, at);
                     expect_type(d.initializer, d.type, at, "variable " + d.name);
                     if (emit_decl && find(d.name))
                       diags.push_back(make_error(code::DuplicateDeclaration, at,
                                                  "variable " + d.name + " is already declared in this scope"));
                     scopes_.back()[d.name] = Binding{d.type, false};
                   },
                   [&](const Assignment& a) {
                     expr(a.value, at);
                     if (const Binding* b = find(a.target)) {
                       expect_type(a.value, b->type, at, "variable " + a.target);
                     } else if (emit_decl) {
                       diags.push_back(make_error(code::UndefinedVariable, at, "variable " + a.target + " is not declared"));
                     }
                   },
                   [&](const If& i) {
                     expr(i.condition, at);
                     expect_type(i.condition, ValueType::Boolean, at, "if condition");
                     body(i.then_body);
                     if (i.else_body) body(*i.else_body);
                   },
                   [&](const Println& p) { expr(p.value, at); },
                   [&](const ExpressionStatement& e) { expr(e.expr, at); },
                   [&](const ExecuteCommand& x) {
                     for (const auto& el : x.elements) {
                       if (const auto* c = std::get_if<Command>(&el)) gstring(c->text, at);
                       if (const auto* r = std::get_if<RedirectToFile>(&el)) gstring(r->target, at);
                     }
                   },
                   [&](const LoadEnvironmentSources& l) {
                     for (const auto& src : l.sources) load(src, at);
                   },
                   [&](const StepBlock& b) { body(b.body); },
                   [&](const Fail& f) { gstring(f.message, at); },
               },
               s.node);
  }

  const Script& script_;
  const DesignConfig& config_;
  SourceContext ctx_;
  DesignEnvironment env_;
  std::vector<std::map<std::string, Binding>> scopes_;
  std::set<std::string> reported_;
};

SourceLocation script_location(const Script& script) {
  if (script.header) return script.header->loc.value;
  if (!script.entry_points.empty()) {
    SourceLocation at = script.entry_points.front().loc.value;
    at.line = 1;
    at.column = 1;
    return at;
  }
  return {};
}

void sort_diagnostics(std::vector<Diagnostic>& d) {
  std::stable_sort(d.begin(), d.end(), [](const Diagnostic& a, const Diagnostic& b) {
    return std::tie(a.location.line, a.location.column) < std::tie(b.location.line, b.location.column);
  });
}

}  // namespace

std::vector<Diagnostic> rule_env_access(const Script& script, const DesignConfig& config) {
  Walker w(script, config);
  w.emit_env = true;
  for (const auto& e : script.entry_points) w.run_entry(e);
  sort_diagnostics(w.diags);
  return std::move(w.diags);
}

std::vector<Diagnostic> rule_declarations(const Script& script) {
  DesignConfig config;
  config.process_names = std::vector<std::string>{};
  Walker w(script, config);
  w.emit_decl = true;
  std::set<std::string> entries;
  for (const auto& e : script.entry_points) {
    if (!entries.insert(e.name).second)
      w.diags.push_back(make_error(code::DuplicateEntryPoint, e.loc.value, "entry point " + e.name + " is defined twice"));
    w.run_entry(e);
  }
  if (!is_known_error_policy(script.error_management))
    w.diags.push_back(make_error(code::UnknownErrorPolicy, script_location(script),
                                 "unknown error management policy " + script.error_management));
  sort_diagnostics(w.diags);
  return std::move(w.diags);
}

std::vector<Diagnostic> rule_entry_point_contract(const Script& script, const ContractTable& contracts) {
  std::vector<Diagnostic> out;
  if (!script.header) return out;
  const auto& header = *script.header;
  auto it = contracts.find(header.kind);
  if (it == contracts.end() || !it->second) return out;
  const ContractRule& rule = *it->second;

  std::string signature = rule.entry + "(";
  for (std::size_t i = 0; i < rule.params.size(); ++i) {
    if (i) signature += ", ";
    signature += std::string(type_name(rule.params[i].type)) + " " + rule.params[i].name;
  }
  signature += ")";
  const std::string kind = std::string(kind_name(header.kind));

  const EntryPoint* found = nullptr;
  for (const auto& e : script.entry_points) {
    if (e.name == rule.entry) {
      found = &e;
    } else if (e.is_designated) {
      out.push_back(make_error(code::ContractViolation, e.loc.value,
                               "designated entry point " + e.name + " is not part of the " + kind +
                                   " contract; expected " + signature));
    }
  }
  if (!found) {
    out.push_back(make_error(code::ContractViolation, header.loc.value,
                             kind + " plugin must define entry point " + signature));
  } else {
    bool types_ok = found->params.size() == rule.params.size();
    for (std::size_t i = 0; types_ok && i < rule.params.size(); ++i)
      types_ok = found->params[i].type == rule.params[i].type;
    if (!types_ok)
      out.push_back(make_error(code::ContractViolation, found->loc.value,
                               "entry point " + found->name + " must have signature " + signature));
    else if (!found->is_designated)
      out.push_back(make_error(code::ContractViolation, found->loc.value,
                               "entry point " + found->name + " must be declared as " +
                                   std::string(kind_phrase(header.kind)) + " entry point"));
  }
  sort_diagnostics(out);
  return out;
}

std::vector<Diagnostic> check(const Script& script, const DesignConfig& config) {
  std::vector<Diagnostic> out;
  std::function<void(const StatementList&)> walk = [&](const StatementList& list) {
    for (const auto& s : list) {
      if (const auto* x = std::get_if<ExecuteCommand>(&s.node)) {
        auto d = rule_operator_placement(*x, s.loc.value);
        out.insert(out.end(), d.begin(), d.end());
      } else if (const auto* i = std::get_if<If>(&s.node)) {
        walk(i->then_body);
        if (i->else_body) walk(*i->else_body);
      } else if (const auto* b = std::get_if<StepBlock>(&s.node)) {
        walk(b->body);
      }
    }
  };
  for (const auto& e : script.entry_points) walk(e.body);
  for (auto&& part : {rule_env_access(script, config), rule_entry_point_contract(script, config.contracts),
                      rule_declarations(script)})
    out.insert(out.end(), part.begin(), part.end());
  sort_diagnostics(out);
  return out;
}

namespace {

std::string describe(const Provenance& p) {
  return p.source + " (line " + std::to_string(p.loaded_at.line) + ")";
}

}  // namespace

std::vector<Completion> list_completions(const Script& script, const SourceLocation& position,
                                         const DesignConfig& config) {
  const EntryPoint* entry = nullptr;
  for (const auto& e : script.entry_points)
    if (e.loc.value <= position) entry = &e;
  if (!entry) return {};

  std::map<std::string, Completion> found;
  bool done = false;
  Walker w(script, config);
  w.on_point = [&](const Walker& self, const SourceLocation& at) {
    if (done) return;
    if (position < at) {
      done = true;
      return;
    }
    found.clear();
    for (const auto& [name, prov] : self.env().available)
      found[name] = Completion{name, describe(prov), Completion::Kind::Environment};
    for (const auto& [name, b] : self.lexical())
      found[name] = Completion{name, b.parameter ? "parameter" : std::string(type_name(b.type)) + " variable",
                               Completion::Kind::Lexical};
  };
  w.run_entry(*entry);

  std::vector<Completion> out;
  for (auto& [k, c] : found) out.push_back(std::move(c));
  std::optional<PluginConfigModel> plugin = config.sources.plugin;
  if (plugin) {
    for (const auto& s : plugin->input_slots) out.push_back(Completion{s, "input slot", Completion::Kind::Slot});
    for (const auto& s : plugin->output_slots) out.push_back(Completion{s, "output slot", Completion::Kind::Slot});
  }
  std::stable_sort(out.begin(), out.end(), [](const Completion& a, const Completion& b) { return a.name < b.name; });
  return out;
}

DesignEnvironment design_environment_at_end(const Script& script, const DesignConfig& config) {
  DesignEnvironment out;
  Walker w(script, config);
  for (const auto& e : script.entry_points) {
    w.run_entry(e);
    for (const auto& [name, prov] : w.env().available) out.available.emplace(name, prov);
    out.runtime_only.insert(out.runtime_only.end(), w.env().runtime_only.begin(), w.env().runtime_only.end());
  }
  return out;
}

}  // namespace nyosh
