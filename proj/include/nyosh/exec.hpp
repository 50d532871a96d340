#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "nyosh/ast.hpp"
#include "nyosh/envsource.hpp"

namespace nyosh {

// ---------------------------------------------------------------------------
// Plans

struct SimpleCommand {
  std::vector<std::string> argv;
  std::set<std::string> env_exports;
  friend bool operator==(const SimpleCommand&, const SimpleCommand&) = default;
};

struct Pipeline {
  std::vector<SimpleCommand> commands;
  std::optional<std::string> redirect;  // final stage stdout, truncate-create
  friend bool operator==(const Pipeline&, const Pipeline&) = default;
};

enum class Connector { Start, And, Or };

struct AndOrList {
  std::vector<std::pair<Connector, Pipeline>> pipelines;
  bool background = false;  // terminated by `&`
  friend bool operator==(const AndOrList&, const AndOrList&) = default;
};

struct ExecutionPlan {
  std::vector<AndOrList> sequence;
  /// Values overlaid on the host environment of every child, by name.
  std::map<std::string, std::string> environment;
  /// Human readable command line, used in logs and error messages.
  std::string text;
  friend bool operator==(const ExecutionPlan&, const ExecutionPlan&) = default;
};

class AssembleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SdkTemplates {
  std::string fetch = "gobyweb-sdk fetch {slot}";
  std::string push = "gobyweb-sdk push {slot}";
};

struct AssembleContext {
  const LexicalScope* scope = nullptr;
  const RuntimeEnvironment* env = nullptr;
  std::filesystem::path base_dir = ".";  // glob root
  SdkTemplates sdk;
  /// Receives warnings such as an empty glob match.
  std::function<void(const std::string&)> warn;
};

/// Splits evaluated command text into words. Quote characters and
/// backslashes only act where `from_literal` is set; reference values are
/// split on whitespace but never unquoted. `globs` reports, per word, a
/// pattern (quoted metacharacters backslash-escaped) when the word carries an
/// unquoted `*`, `?` or `[`.
struct Word {
  std::string text;
  std::optional<std::string> glob;
  friend bool operator==(const Word&, const Word&) = default;
};
std::vector<Word> split_words(const std::string& text, const std::vector<bool>& from_literal);
std::vector<Word> split_words(const std::string& text);  // all literal

/// Throws AssembleError, ResolutionError.
ExecutionPlan assemble(const std::vector<CommandElement>& elements, const AssembleContext& ctx);

// ---------------------------------------------------------------------------
// Running

struct RunIo {
  int in = 0;
  int out = 1;
  int err = 2;
  std::filesystem::path cwd;  // empty: inherit
};

struct RunResult {
  int last_exit_code = 0;
  bool executed_completely = true;
  std::string assembled_text;
  /// Commands that could not be started.
  std::vector<std::string> spawn_failures;
  /// The plan stopped at an `exit` builtin.
  bool exited = false;
};

/// Runs a plan with POSIX shell semantics for `|`, `&&`, `||`, `;` and `&`.
/// `exit [n]` is a builtin: inside a multi-stage pipeline it ends that stage,
/// otherwise it stops the plan with status n.
RunResult run(const ExecutionPlan& plan, const RunIo& io = {});

// ---------------------------------------------------------------------------
// Steps and error management

enum class StepStatus { Done, Error };

struct StepRecord {
  std::string timestamp;  // ISO 8601, UTC
  StepStatus status = StepStatus::Done;
  int code = 0;
  std::string description;
};

std::string format_step_record(const StepRecord& r);  // one line, no newline
std::optional<StepRecord> parse_step_record(const std::string& line);
std::string utc_timestamp();

class StepsLogger {
 public:
  virtual ~StepsLogger() = default;
  virtual void step(const std::string& description, StepStatus status, int code) = 0;
  virtual void close() {}
};

/// Appends records to `<dir>/steps.log`.
class FileStepsLogger final : public StepsLogger {
 public:
  explicit FileStepsLogger(const std::filesystem::path& dir);
  void step(const std::string& description, StepStatus status, int code) override;
  void close() override;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class MemoryStepsLogger final : public StepsLogger {
 public:
  void step(const std::string& description, StepStatus status, int code) override;
  void close() override { closed = true; }
  std::vector<StepRecord> records;
  bool closed = false;
};

class ErrorManagementPolicy {
 public:
  virtual ~ErrorManagementPolicy() = default;
  virtual void record_step_done(const std::string& description) = 0;
  virtual void exception(const std::string& description, int status, const std::string& error) = 0;
  virtual void close() {}
};

/// Writes DONE/ERROR records through a steps logger; error details go to
/// the error descriptor.
class DefaultErrorManagement final : public ErrorManagementPolicy {
 public:
  DefaultErrorManagement(StepsLogger& logger, int err_fd = 2) : logger_(logger), err_fd_(err_fd) {}
  void record_step_done(const std::string& description) override;
  void exception(const std::string& description, int status, const std::string& error) override;
  void close() override;

 private:
  StepsLogger& logger_;
  int err_fd_;
};

/// Writes records as lines on the error descriptor.
class ConsoleErrorManagement final : public ErrorManagementPolicy {
 public:
  explicit ConsoleErrorManagement(int err_fd = 2) : err_fd_(err_fd) {}
  void record_step_done(const std::string& description) override;
  void exception(const std::string& description, int status, const std::string& error) override;

 private:
  int err_fd_;
};

/// A statement-level failure: unbound name, load error, spawn failure.
class ScriptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ends the script with a status (fail).
struct ScriptExit {
  int status = 0;
};

/// Runs `body`; ScriptError becomes an ERROR record "step <d> failed." and is
/// swallowed, ScriptExit records the same and propagates, success records
/// DONE with the description.
void run_step_block(const std::string& description, const std::function<void()>& body,
                    ErrorManagementPolicy& policy);

/// No effect when must_be_true; otherwise records ERROR(reason, status_code)
/// and throws ScriptExit{status_code}.
void fail(bool must_be_true, const std::string& reason, int status_code, ErrorManagementPolicy& policy);
inline void fail(bool must_be_true, const std::string& reason, ErrorManagementPolicy& policy) {
  fail(must_be_true, reason, 1, policy);
}

// ---------------------------------------------------------------------------
// Interpretation

struct InterpretOptions {
  RunIo io;
  std::filesystem::path job_dir = ".";
  SourceContext sources;
  SdkTemplates sdk;
  /// Sources loaded before the entry point body runs.
  std::vector<EnvironmentSourceSpec> preloaded;
  /// Overrides the script's policy (tests).
  ErrorManagementPolicy* policy = nullptr;
  /// Plan mode: execute statements print their plan as JSON instead of
  /// running; println goes to the error descriptor.
  bool dry_run = false;
};

/// Entry point selection: empty args mean ["main"]. An unknown name prints
/// "The entry point <x> name was not recognized" and yields 1; a wrong
/// argument count prints "Invalid number of arguments" and yields 0.
int dispatch_entry(const Script& script, std::vector<std::string> args, const InterpretOptions& options = {});

/// Alias of dispatch_entry; the process exit status of running the script.
int interpret(const Script& script, const std::vector<std::string>& args, const InterpretOptions& options = {});

/// Plan as JSON (ordered keys: sequence, environment, text).
std::string plan_to_json(const ExecutionPlan& plan, int indent = 2);

}  // namespace nyosh
