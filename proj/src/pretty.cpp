#include "nyosh/pretty.hpp"

namespace nyosh {
namespace {

std::string indent_str(int indent) { return std::string(static_cast<std::size_t>(indent) * 2, ' '); }

// `$` directly before `{` would reopen a reference on reparse.
bool dollar_needs_escape(const std::string& text, std::size_t i) {
  return i + 1 < text.size() && text[i + 1] == '{';
}

void append_quoted_literal(std::string& out, const std::string& text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      case '$':
        if (dollar_needs_escape(text, i)) out += '\\';
        out += '$';
        break;
      default: out += c;
    }
  }
}

std::string quote_raw(const std::string& raw) {
  std::string out = "raw\"";
  for (char c : raw) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

std::string quoted_gstring(const GString& g) {
  std::string out = "\"";
  for (const auto& c : g.components) {
    if (const auto* lit = std::get_if<GLiteral>(&c)) {
      append_quoted_literal(out, lit->text);
    } else {
      out += "${" + *reference_name(c) + "}";
    }
  }
  out += '"';
  return out;
}

void append_string_literal(std::string& out, const std::string& text) {
  out += '"';
  append_quoted_literal(out, text);
  out += '"';
}

// Binding strength, loosest first.
enum Level { kTernary = 0, kEquality = 1, kConcat = 2, kPostfix = 3 };

int level_of(const Expression& e) {
  return std::visit(overloaded{
                        [](const Ternary&) { return int{kTernary}; },
                        [](const Binary& b) {
                          return b.op == BinaryOperator::Concat ? int{kConcat} : int{kEquality};
                        },
                        [](const auto&) { return int{kPostfix}; },
                    },
                    e.node);
}

std::string print_expr(const Expression& e, int min_level);

std::string print_args(const std::vector<Expression>& args) {
  std::string out = "(";
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out += ", ";
    out += print_expr(args[i], kTernary);
  }
  return out + ")";
}

std::string print_node(const Expression& e) {
  return std::visit(
      overloaded{
          [](const StringLiteral& s) {
            std::string out;
            append_string_literal(out, s.text);
            return out;
          },
          [](const IntLiteral& i) { return std::to_string(i.value); },
          [](const BoolLiteral& b) { return std::string(b.value ? "true" : "false"); },
          [](const VarRef& v) { return v.name; },
          [](const GString& g) { return pretty_print(g); },
          [](const PathPattern& p) { return "path" + quoted_gstring(p.pattern); },
          [](const Ternary& t) {
            return print_expr(*t.condition, kEquality) + " ? " + print_expr(*t.then_value, kTernary) +
                   " : " + print_expr(*t.else_value, kTernary);
          },
          [](const Binary& b) {
            int lvl = b.op == BinaryOperator::Concat ? kConcat : kEquality;
            std::string_view sym = b.op == BinaryOperator::Concat ? " + "
                                   : b.op == BinaryOperator::Equal ? " == "
                                                                    : " != ";
            return print_expr(*b.lhs, lvl) + std::string(sym) + print_expr(*b.rhs, lvl + 1);
          },
          [](const ArrayIndex& a) {
            return print_expr(*a.array, kPostfix) + "[" + print_expr(*a.index, kTernary) + "]";
          },
          [](const MethodCall& m) {
            switch (m.method) {
              case Method::Format: return "String.format" + print_args(m.args);
              case Method::GetBaseName: return "FilenameUtils.getBaseName" + print_args(m.args);
              case Method::GetFullPath: return "FilenameUtils.getFullPath" + print_args(m.args);
              case Method::Getenv: return "System.getenv" + print_args(m.args);
              default: break;
            }
            std::string recv = m.receiver ? print_expr(**m.receiver, kPostfix) : std::string("this");
            if (m.method == Method::Length) return recv + ".length";
            return recv + "." + std::string(method_name(m.method)) + print_args(m.args);
          },
      },
      e.node);
}

std::string print_expr(const Expression& e, int min_level) {
  std::string s = print_node(e);
  if (level_of(e) < min_level) return "(" + s + ")";
  return s;
}

}  // namespace

std::string pretty_print(const GString& g) {
  if (g.is_staged()) return quote_raw(*g.raw_text);
  if (g.components.size() == 1) {
    if (const auto* name = reference_name(g.components.front())) return "${" + *name + "}";
  }
  return quoted_gstring(g);
}

std::string print_command_text(const GString& g) {
  if (g.is_staged()) return *g.raw_text;
  std::string out;
  for (const auto& c : g.components) {
    if (const auto* lit = std::get_if<GLiteral>(&c)) {
      for (std::size_t i = 0; i < lit->text.size(); ++i) {
        if (lit->text[i] == '$' && dollar_needs_escape(lit->text, i)) out += '\\';
        out += lit->text[i];
      }
    } else {
      out += "${" + *reference_name(c) + "}";
    }
  }
  return out;
}

std::string print_elements(const std::vector<CommandElement>& elements) {
  std::string out;
  for (const auto& e : elements) {
    if (!out.empty()) out += ' ';
    out += std::visit(overloaded{
                          [](const Command& c) { return print_command_text(c.text); },
                          [](const Operator& o) { return std::string(operator_symbol(o.kind)); },
                          [](const RedirectToFile& r) {
                            return "redirect to file " + print_command_text(r.target);
                          },
                          [](const FetchCommand& f) { return "fetch " + f.slot; },
                          [](const PushCommand& p) { return "push " + p.slot; },
                      },
                      e);
  }
  return out;
}

std::string print_source(const EnvironmentSourceSpec& source) {
  return std::visit(overloaded{
                        [](const ProcessEnvSource&) { return std::string("Java Environment"); },
                        [](const MapFileSource& m) { return "MapFile: " + pretty_print(m.path); },
                        [](const PluginConfigSource& p) {
                          if (p.plugin_dir.empty()) return std::string("GobyWebSource");
                          std::string out = "GobyWebSource: ";
                          append_string_literal(out, p.plugin_dir);
                          return out;
                        },
                    },
                    source);
}

std::string pretty_print(const Expression& expr) { return print_expr(expr, kTernary); }

std::string pretty_print(const StatementList& body, int indent) {
  std::string out;
  for (const auto& s : body) out += pretty_print(s, indent);
  return out;
}

std::string pretty_print(const Statement& stmt, int indent) {
  const std::string pad = indent_str(indent);
  return std::visit(
      overloaded{
          [&](const VarDecl& d) {
            return pad + std::string(type_name(d.type)) + " " + d.name + " = " +
                   pretty_print(d.initializer) + ";\n";
          },
          [&](const Assignment& a) { return pad + a.target + " = " + pretty_print(a.value) + ";\n"; },
          [&](const If& i) {
            std::string out = pad + "if (" + pretty_print(i.condition) + ") {\n";
            out += pretty_print(i.then_body, indent + 1);
            out += pad + "}";
            if (i.else_body) {
              out += " else {\n" + pretty_print(*i.else_body, indent + 1) + pad + "}";
            }
            return out + "\n";
          },
          [&](const Println& p) { return pad + "System.out.println(" + pretty_print(p.value) + ");\n"; },
          [&](const ExpressionStatement& e) { return pad + pretty_print(e.expr) + ";\n"; },
          [&](const ExecuteCommand& x) {
            if (x.elements.size() == 1) {
              if (const auto* c = std::get_if<Command>(&x.elements.front()); c && c->text.is_staged())
                return pad + "execute raw: " + *c->text.raw_text + "\n";
            }
            return pad + "execute: " + print_elements(x.elements) + "\n";
          },
          [&](const LoadEnvironmentSources& l) {
            std::string out = pad + "load environment sources {";
            for (std::size_t i = 0; i < l.sources.size(); ++i) {
              out += i ? ", " : " ";
              out += print_source(l.sources[i]);
            }
            return out + " }\n";
          },
          [&](const StepBlock& s) {
            return pad + "step " + s.description + " {\n" + pretty_print(s.body, indent + 1) + pad +
                   "}\n";
          },
          [&](const Fail& f) {
            return pad + "fail " + pretty_print(f.message) + " " + std::to_string(f.status_code) +
                   "\n";
          },
      },
      stmt.node);
}

std::string pretty_print(const PluginHeader& header) {
  std::string out = "plugin system:\n";
  out += "id: " + header.id + "\n";
  out += "kind: " + std::string(kind_name(header.kind)) + "\n";
  out += "location: " + header.location + "\n";
  return out;
}

std::string pretty_print(const EntryPoint& entry, const std::optional<PluginHeader>& header,
                         int indent) {
  std::string out = indent_str(indent);
  if (entry.is_designated) {
    out += header ? std::string(kind_phrase(header->kind)) : std::string("designated");
    out += ' ';
  }
  out += "entry point " + entry.name + "(";
  for (std::size_t i = 0; i < entry.params.size(); ++i) {
    if (i) out += ", ";
    out += std::string(type_name(entry.params[i].type)) + " " + entry.params[i].name;
  }
  out += ") {\n";
  out += pretty_print(entry.body, indent + 1);
  out += indent_str(indent) + "}\n";
  return out;
}

std::string pretty_print(const Script& script) {
  std::string out;
  if (script.header) out += pretty_print(*script.header) + "\n";
  if (script.name.empty() && script.entry_points.empty() && !script.header &&
      script.error_management == kDefaultErrorManagement)
    return out;
  out += "script " + script.name;
  if (script.header || script.error_management != kDefaultErrorManagement)
    out += " error management: " + script.error_management;
  out += " {\n";
  for (std::size_t i = 0; i < script.entry_points.size(); ++i) {
    if (i) out += "\n";
    out += pretty_print(script.entry_points[i], script.header, 1);
  }
  out += "}\n";
  return out;
}

}  // namespace nyosh
