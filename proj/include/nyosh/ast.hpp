#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

namespace nyosh {

struct SourceLocation {
  std::string file;
  int line = 1;    // 1-based
  int column = 1;  // 1-based

  friend bool operator==(const SourceLocation&, const SourceLocation&) = default;
  friend auto operator<=>(const SourceLocation& a, const SourceLocation& b) {
    return std::tie(a.line, a.column) <=> std::tie(b.line, b.column);
  }
};

/// Location carried by AST nodes. Structural equality of trees ignores it, so
/// it always compares equal.
struct NodeLocation {
  SourceLocation value;

  friend bool operator==(const NodeLocation&, const NodeLocation&) { return true; }
};

/// Owning, deep-copying pointer used for recursive expression nodes.
template <class T>
class box {
 public:
  box(T value) : ptr_(std::make_unique<T>(std::move(value))) {}  // NOLINT(google-explicit-constructor)
  box(const box& other) : ptr_(std::make_unique<T>(*other.ptr_)) {}
  box(box&&) noexcept = default;
  box& operator=(const box& other) {
    if (this != &other) ptr_ = std::make_unique<T>(*other.ptr_);
    return *this;
  }
  box& operator=(box&&) noexcept = default;
  ~box() = default;

  T& operator*() { return *ptr_; }
  const T& operator*() const { return *ptr_; }
  T* operator->() { return ptr_.get(); }
  const T* operator->() const { return ptr_.get(); }

  friend bool operator==(const box& a, const box& b) { return *a == *b; }

 private:
  std::unique_ptr<T> ptr_;
};

// ---------------------------------------------------------------------------
// GString

struct GLiteral {
  std::string text;
  friend bool operator==(const GLiteral&, const GLiteral&) = default;
};

/// `${name}` bound to a script variable in lexical scope.
struct GVarReference {
  std::string name;
  friend bool operator==(const GVarReference&, const GVarReference&) = default;
};

/// `${name}` read from a loaded environment source.
struct GEnvReader {
  std::string name;
  friend bool operator==(const GEnvReader&, const GEnvReader&) = default;
};

using GStringComponent = std::variant<GLiteral, GVarReference, GEnvReader>;

struct GString {
  std::vector<GStringComponent> components;
  /// Staging slot for pasted text awaiting micro-parsing.
  std::optional<std::string> raw_text;

  bool is_staged() const { return raw_text.has_value(); }
  friend bool operator==(const GString&, const GString&) = default;
};

GString make_literal_gstring(std::string text);

/// Merges adjacent literals and drops empty ones. A GString that would become
/// empty keeps a single empty literal so the component list stays non-empty.
GString normalize_gstring(GString g);

bool is_normal_form(const GString& g);

/// Name carried by a reference component, or nullptr for literals.
const std::string* reference_name(const GStringComponent& c);

// ---------------------------------------------------------------------------
// Expressions

enum class ValueType { String, Int, Boolean, StringArray };

struct Expression;

struct StringLiteral {
  std::string text;
  friend bool operator==(const StringLiteral&, const StringLiteral&) = default;
};
struct IntLiteral {
  std::int64_t value = 0;
  friend bool operator==(const IntLiteral&, const IntLiteral&) = default;
};
struct BoolLiteral {
  bool value = false;
  friend bool operator==(const BoolLiteral&, const BoolLiteral&) = default;
};
struct VarRef {
  std::string name;
  friend bool operator==(const VarRef&, const VarRef&) = default;
};
/// Wildcard or `re:` pattern expanded against the filesystem when evaluated.
struct PathPattern {
  GString pattern;
  friend bool operator==(const PathPattern&, const PathPattern&) = default;
};
struct Ternary {
  box<Expression> condition;
  box<Expression> then_value;
  box<Expression> else_value;
  friend bool operator==(const Ternary&, const Ternary&) = default;
};

enum class Method {
  ToUpperCase,  // receiver.toUpperCase()
  Split,        // receiver.split(regex)
  Equals,       // receiver.equals(other)
  Length,       // receiver.length
  Index,        // receiver.indexOf(text)
  Format,       // String.format(fmt, args...)
  GetBaseName,  // FilenameUtils.getBaseName(path)
  GetFullPath,  // FilenameUtils.getFullPath(path)
  Getenv,       // System.getenv(name)
};

bool is_static_method(Method m);

struct MethodCall {
  std::optional<box<Expression>> receiver;  // empty for static methods
  Method method = Method::Equals;
  std::vector<Expression> args;
  friend bool operator==(const MethodCall&, const MethodCall&) = default;
};

struct ArrayIndex {
  box<Expression> array;
  box<Expression> index;
  friend bool operator==(const ArrayIndex&, const ArrayIndex&) = default;
};

enum class BinaryOperator { Concat, Equal, NotEqual };

struct Binary {
  BinaryOperator op = BinaryOperator::Concat;
  box<Expression> lhs;
  box<Expression> rhs;
  friend bool operator==(const Binary&, const Binary&) = default;
};

struct Expression {
  using Node = std::variant<StringLiteral, IntLiteral, BoolLiteral, VarRef, GString, PathPattern,
                            Ternary, MethodCall, ArrayIndex, Binary>;
  Node node;
  NodeLocation loc;

  friend bool operator==(const Expression&, const Expression&) = default;
};

// ---------------------------------------------------------------------------
// Commands

enum class OperatorKind { Pipe, And, Or, Seq, Background };

std::string_view operator_symbol(OperatorKind k);

struct Command {
  GString text;
  friend bool operator==(const Command&, const Command&) = default;
};
struct Operator {
  OperatorKind kind = OperatorKind::Pipe;
  friend bool operator==(const Operator&, const Operator&) = default;
};
struct RedirectToFile {
  GString target;
  friend bool operator==(const RedirectToFile&, const RedirectToFile&) = default;
};
struct FetchCommand {
  std::string slot;
  friend bool operator==(const FetchCommand&, const FetchCommand&) = default;
};
struct PushCommand {
  std::string slot;
  friend bool operator==(const PushCommand&, const PushCommand&) = default;
};

using CommandElement = std::variant<Command, Operator, RedirectToFile, FetchCommand, PushCommand>;

bool is_command_like(const CommandElement& e);
bool is_operator(const CommandElement& e, OperatorKind k);
bool is_operator(const CommandElement& e);

struct ExecuteCommand {
  std::vector<CommandElement> elements;
  friend bool operator==(const ExecuteCommand&, const ExecuteCommand&) = default;
};

/// The element-sequence invariant: starts with a command, operators and
/// commands alternate (a RedirectToFile directly follows the command whose
/// output it consumes), nothing but `;`/`&` follows a redirect, and the list
/// does not end in `|`, `&&` or `||`.
bool alternation_holds(const std::vector<CommandElement>& elements);

// ---------------------------------------------------------------------------
// Environment sources

/// The host process environment ("Java Environment").
struct ProcessEnvSource {
  friend bool operator==(const ProcessEnvSource&, const ProcessEnvSource&) = default;
};
/// A static KEY=VALUE file.
struct MapFileSource {
  GString path;
  friend bool operator==(const MapFileSource&, const MapFileSource&) = default;
};
/// Variables derived from a GobyWeb plugin configuration ("GobyWebSource").
/// An empty plugin_dir means "the plugin configured for this run".
struct PluginConfigSource {
  std::string plugin_dir;
  std::map<std::string, std::string> runtime_values;
  friend bool operator==(const PluginConfigSource&, const PluginConfigSource&) = default;
};

using EnvironmentSourceSpec = std::variant<ProcessEnvSource, MapFileSource, PluginConfigSource>;

// ---------------------------------------------------------------------------
// Statements

struct Statement;
using StatementList = std::vector<Statement>;

struct VarDecl {
  std::string name;
  ValueType type = ValueType::String;
  Expression initializer;
  friend bool operator==(const VarDecl&, const VarDecl&) = default;
};
struct Assignment {
  std::string target;
  Expression value;
  friend bool operator==(const Assignment&, const Assignment&) = default;
};
struct If {
  Expression condition;
  StatementList then_body;
  std::optional<StatementList> else_body;
  friend bool operator==(const If&, const If&) = default;
};
struct Println {
  Expression value;
  friend bool operator==(const Println&, const Println&) = default;
};
struct ExpressionStatement {
  Expression expr;
  friend bool operator==(const ExpressionStatement&, const ExpressionStatement&) = default;
};
struct LoadEnvironmentSources {
  std::vector<EnvironmentSourceSpec> sources;
  friend bool operator==(const LoadEnvironmentSources&, const LoadEnvironmentSources&) = default;
};
struct StepBlock {
  std::string description;
  StatementList body;
  friend bool operator==(const StepBlock&, const StepBlock&) = default;
};
struct Fail {
  GString message;
  std::int64_t status_code = 1;
  friend bool operator==(const Fail&, const Fail&) = default;
};

struct Statement {
  using Node = std::variant<VarDecl, Assignment, If, Println, ExpressionStatement, ExecuteCommand,
                            LoadEnvironmentSources, StepBlock, Fail>;
  Node node;
  NodeLocation loc;

  friend bool operator==(const Statement&, const Statement&) = default;
};

// ---------------------------------------------------------------------------
// Script

enum class PluginKind { Aligner, AlignmentAnalysis, Resource, ArtifactInstall, Task };

std::string_view kind_name(PluginKind k);                  // "ALIGNER"
std::optional<PluginKind> parse_kind(std::string_view s);  // inverse of kind_name
std::string_view kind_phrase(PluginKind k);                // "aligner" (entry point prefix)
std::string kind_directory(PluginKind k);                  // "aligner", "alignment_analysis"

/// Uppercase letters, digits and underscores, non-empty.
bool is_valid_plugin_id(std::string_view id);

struct PluginHeader {
  std::string id;
  PluginKind kind = PluginKind::Aligner;
  std::string location;
  NodeLocation loc;
  friend bool operator==(const PluginHeader&, const PluginHeader&) = default;
};

struct Parameter {
  std::string name;
  ValueType type = ValueType::String;
  friend bool operator==(const Parameter&, const Parameter&) = default;
};

struct EntryPoint {
  std::string name;
  std::vector<Parameter> params;
  StatementList body;
  bool is_designated = false;
  NodeLocation loc;
  friend bool operator==(const EntryPoint&, const EntryPoint&) = default;
};

inline constexpr std::string_view kDefaultErrorManagement = "GobyWebDefaultErrorManagement";
/// Writes step records to standard error instead of a steps log.
inline constexpr std::string_view kConsoleErrorManagement = "ConsoleErrorManagement";

inline bool is_known_error_policy(std::string_view name) {
  return name == kDefaultErrorManagement || name == kConsoleErrorManagement;
}

struct Script {
  std::string name;
  std::optional<PluginHeader> header;
  std::string error_management{kDefaultErrorManagement};
  std::vector<EntryPoint> entry_points;
  friend bool operator==(const Script&, const Script&) = default;
};

std::string_view type_name(ValueType t);  // "string", "int", "boolean", "string[]"
std::string_view method_name(Method m);   // "toUpperCase", ...

bool is_identifier(std::string_view s);

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace nyosh
