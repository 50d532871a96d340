#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "nyosh/ast.hpp"

namespace nyosh {

enum class Severity { Error, Warning };

std::string_view severity_name(Severity s);  // "error", "warning"

/// Codes reported by the checker and the micro-parse intentions.
namespace code {
inline constexpr std::string_view ConsecutiveOperators = "E_CONSECUTIVE_OPERATORS";
inline constexpr std::string_view LeadingOperator = "E_LEADING_OPERATOR";
inline constexpr std::string_view TrailingOperator = "E_TRAILING_OPERATOR";
inline constexpr std::string_view RedirectNotTerminal = "E_REDIRECT_NOT_TERMINAL";
inline constexpr std::string_view RedirectMisplaced = "E_REDIRECT_MISPLACED";
inline constexpr std::string_view MissingOperator = "E_MISSING_OPERATOR";
inline constexpr std::string_view UnauthorizedEnvAccess = "E_UNAUTHORIZED_ENV_ACCESS";
inline constexpr std::string_view RuntimeOnlySource = "W_RUNTIME_ONLY_SOURCE";
inline constexpr std::string_view ContractViolation = "E_CONTRACT_VIOLATION";
inline constexpr std::string_view UndefinedVariable = "E_UNDEFINED_VARIABLE";
inline constexpr std::string_view DuplicateDeclaration = "E_DUPLICATE_DECLARATION";
inline constexpr std::string_view DuplicateEntryPoint = "E_DUPLICATE_ENTRY_POINT";
inline constexpr std::string_view DuplicateParameter = "E_DUPLICATE_PARAMETER";
inline constexpr std::string_view TypeMismatch = "E_TYPE_MISMATCH";
inline constexpr std::string_view UnknownErrorPolicy = "E_UNKNOWN_ERROR_POLICY";
inline constexpr std::string_view UnterminatedReference = "E_UNTERMINATED_REFERENCE";
inline constexpr std::string_view ShadowsEnvironment = "W_SHADOWS_ENVIRONMENT";
}  // namespace code

/// Every code above.
const std::vector<std::string_view>& all_codes();

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string code;
  SourceLocation location;
  std::string message;

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

Diagnostic make_error(std::string_view code, SourceLocation at, std::string message);
Diagnostic make_warning(std::string_view code, SourceLocation at, std::string message);

bool has_errors(const std::vector<Diagnostic>& diags);

/// `<file>:<line>:<col>: <severity> <code>: <message>`
std::string format_diagnostic(const Diagnostic& d);

/// JSON array of objects with keys file, line, col, severity, code, message.
std::string diagnostics_to_json(const std::vector<Diagnostic>& diags, int indent = -1);

}  // namespace nyosh
