#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nyosh/ast.hpp"
#include "nyosh/expected.hpp"

namespace nyosh {

struct ParseError {
  SourceLocation location;
  std::string message;
  std::optional<std::string> expected;
};

std::string format_parse_error(const ParseError& e);

struct ParseResult {
  std::optional<Script> script;
  std::vector<ParseError> errors;

  bool ok() const { return script.has_value() && errors.empty(); }
};

/// Parses a whole `.nyosh` file. Never throws; failures come back as errors
/// (statement-level resynchronization collects more than one where possible).
ParseResult parse_script(std::string_view text, const std::string& file = "<input>");

/// Strict parse of one `execute:` line: the element list must satisfy
/// alternation_holds(). `${name}` references are classified as environment
/// readers unless listed in `scope`.
expected<ExecuteCommand, ParseError> parse_execute_line(std::string_view text,
                                                        const std::vector<std::string>& scope = {});

/// Parses command-form text (the body of an `execute:` command) into a
/// GString; references to names in `scope` become variable references.
expected<GString, ParseError> parse_command_gstring(std::string_view text,
                                                    const std::vector<std::string>& scope = {});

struct CommandToken {
  enum class Kind { Text, Op };
  Kind kind = Kind::Text;
  std::string text;             // Text: untrimmed segment
  OperatorKind op = OperatorKind::Pipe;
  std::size_t offset = 0;       // byte offset in the input
};

/// Splits a command line at unquoted `|`, `||`, `&&`, `;`, `&` (longest
/// match first). Single quotes, double quotes and backslash escapes protect
/// operator characters. Text tokens between adjacent operators may be empty.
expected<std::vector<CommandToken>, std::string> split_command_line(std::string_view line);

}  // namespace nyosh
