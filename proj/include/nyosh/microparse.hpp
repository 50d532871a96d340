#pragma once

#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nyosh/ast.hpp"
#include "nyosh/diagnostic.hpp"

namespace nyosh {

using Fragment = std::variant<GString, std::vector<CommandElement>>;

struct MicroParseResult {
  Fragment replacement;
  /// `string NAME = "";` for each newly referenced name, first appearance first.
  std::vector<VarDecl> new_declarations;
  /// True iff parsing succeeded and the staging slot may be cleared.
  bool consumed = false;
  std::vector<Diagnostic> diagnostics;
};

/// Splits raw text into literals and `${NAME}` references. Names outside
/// `scope` get a fresh declaration. `$NAME` without braces, `\${...}` and
/// `${` not followed by an identifier and `}` stay literal text.
/// Names in `env_names` still get a declaration, with a W_SHADOWS_ENVIRONMENT
/// warning.
MicroParseResult extract_variables(std::string_view raw, const std::set<std::string>& scope = {},
                                   const std::set<std::string>& env_names = {});

/// Splits one command line at unquoted `|`, `||`, `&&`, `;` and `&`. Each
/// command keeps its trimmed text staged (raw) so extract_variables can run
/// on it next.
MicroParseResult parse_command_literal(std::string_view raw);

enum class Intention { ExtractVariables, ParseCommands };

struct IntentionOutcome {
  bool applied = false;  // false when there was nothing staged or parsing failed
  std::size_t inserted = 0;
  std::vector<Diagnostic> diagnostics;
};

/// Runs an intention on the statement at body[index]:
///   ExtractVariables: every staged GString in the statement (initializer,
///     println argument, staged command texts) is replaced; declarations go
///     directly before the statement.
///   ParseCommands: an execute statement holding one staged command is split
///     into commands and operators.
/// On failure `body` is left untouched.
IntentionOutcome apply_intention(StatementList& body, std::size_t index, Intention which,
                                 const std::set<std::string>& scope = {},
                                 const std::set<std::string>& env_names = {});

}  // namespace nyosh
