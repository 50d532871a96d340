#pragma once

#include <string>

#include "nyosh/ast.hpp"

namespace nyosh {

// Canonical concrete syntax. parse_script(pretty_print(s)) reproduces s
// structurally for every script the parser produces.

std::string pretty_print(const Script& script);
std::string pretty_print(const EntryPoint& entry, const std::optional<PluginHeader>& header = {},
                         int indent = 0);
std::string pretty_print(const Statement& stmt, int indent = 0);
std::string pretty_print(const StatementList& body, int indent = 0);
std::string pretty_print(const Expression& expr);
std::string pretty_print(const PluginHeader& header);

/// GString in expression form: `${NAME}` for a lone reference, otherwise a
/// double-quoted string; staged GStrings render as `raw"..."`.
std::string pretty_print(const GString& g);

/// GString in command form (unquoted, as it appears after `execute:`).
std::string print_command_text(const GString& g);

/// Element list as it appears after `execute:`; also a valid POSIX shell line
/// when it contains only commands and operators.
std::string print_elements(const std::vector<CommandElement>& elements);

std::string print_source(const EnvironmentSourceSpec& source);

}  // namespace nyosh
