#include "nyosh/diagnostic.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

namespace nyosh {

std::string_view severity_name(Severity s) { return s == Severity::Error ? "error" : "warning"; }

const std::vector<std::string_view>& all_codes() {
  static const std::vector<std::string_view> codes{
      code::ConsecutiveOperators, code::LeadingOperator,      code::TrailingOperator,
      code::RedirectNotTerminal,  code::RedirectMisplaced,    code::MissingOperator,
      code::UnauthorizedEnvAccess, code::RuntimeOnlySource,   code::ContractViolation,
      code::UndefinedVariable,    code::DuplicateDeclaration, code::DuplicateEntryPoint,
      code::DuplicateParameter,   code::TypeMismatch,         code::UnknownErrorPolicy,
      code::UnterminatedReference, code::ShadowsEnvironment,
  };
  return codes;
}

Diagnostic make_error(std::string_view c, SourceLocation at, std::string message) {
  return Diagnostic{Severity::Error, std::string(c), std::move(at), std::move(message)};
}

Diagnostic make_warning(std::string_view c, SourceLocation at, std::string message) {
  return Diagnostic{Severity::Warning, std::string(c), std::move(at), std::move(message)};
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

std::string format_diagnostic(const Diagnostic& d) {
  return d.location.file + ":" + std::to_string(d.location.line) + ":" + std::to_string(d.location.column) + ": " +
         std::string(severity_name(d.severity)) + " " + d.code + ": " + d.message;
}

std::string diagnostics_to_json(const std::vector<Diagnostic>& diags, int indent) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& d : diags) {
    arr.push_back({{"file", d.location.file},
                   {"line", d.location.line},
                   {"col", d.location.column},
                   {"severity", severity_name(d.severity)},
                   {"code", d.code},
                   {"message", d.message}});
  }
  return arr.dump(indent);
}

}  // namespace nyosh
