#include "nyosh/exec.hpp"

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <ctime>
#include <nlohmann/json.hpp>
#include <regex>

#include "nyosh/pretty.hpp"

extern char** environ;  // NOLINT

namespace nyosh {

namespace fs = std::filesystem;

namespace {

void write_fd(int fd, std::string_view s) {
  while (!s.empty()) {
    ssize_t n = ::write(fd, s.data(), s.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      return;
    }
    s.remove_prefix(static_cast<std::size_t>(n));
  }
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n'; }

}  // namespace

// ---------------------------------------------------------------------------
// Word splitting

std::vector<Word> split_words(const std::string& text, const std::vector<bool>& from_literal) {
  std::vector<Word> out;
  Word cur;
  std::string pattern;
  bool started = false;
  bool meta = false;
  bool open_bracket = false;
  char quote = 0;
  auto lit = [&](std::size_t i) { return i < from_literal.size() ? from_literal[i] : true; };
  auto add_quoted = [&](char c) {
    cur.text += c;
    if (c == '*' || c == '?' || c == '[' || c == ']' || c == '\\') pattern += '\\';
    pattern += c;
    started = true;
  };
  auto add_plain = [&](char c) {
    cur.text += c;
    if (c == '*' || c == '?') meta = true;
    if (c == '[') open_bracket = true;
    if (c == ']' && open_bracket) meta = true;
    pattern += c;
    started = true;
  };
  auto finish = [&]() {
    if (!started) return;
    if (meta) cur.glob = pattern;
    out.push_back(std::move(cur));
    cur = Word{};
    pattern.clear();
    started = meta = open_bracket = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quote == '\'') {
      if (c == '\'' && lit(i)) quote = 0;
      else add_quoted(c);
      continue;
    }
    if (quote == '"') {
      if (c == '"' && lit(i)) {
        quote = 0;
      } else if (c == '\\' && lit(i) && i + 1 < text.size() &&
                 std::string_view("\"\\$`").find(text[i + 1]) != std::string_view::npos) {
        add_quoted(text[++i]);
      } else {
        add_quoted(c);
      }
      continue;
    }
    if (is_space(c)) {
      finish();
      continue;
    }
    if (lit(i) && c == '\\' && i + 1 < text.size()) {
      add_quoted(text[++i]);
      continue;
    }
    if (lit(i) && (c == '\'' || c == '"')) {
      quote = c;
      started = true;
      continue;
    }
    if (!lit(i) && c == '\\') {
      add_quoted(c);
      continue;
    }
    add_plain(c);
  }
  if (quote) throw AssembleError(std::string("unterminated ") + (quote == '"' ? "double" : "single") + " quote");
  finish();
  return out;
}

std::vector<Word> split_words(const std::string& text) { return split_words(text, std::vector<bool>(text.size(), true)); }

// ---------------------------------------------------------------------------
// Assembly

namespace {

struct Evaluated {
  std::string text;
  std::vector<bool> literal;
};

Evaluated evaluate(const GString& g, const AssembleContext& ctx, std::map<std::string, std::string>& lexical_used) {
  Evaluated out;
  if (g.is_staged()) {
    out.text = *g.raw_text;
    out.literal.assign(out.text.size(), true);
    return out;
  }
  static const RuntimeEnvironment empty;
  const RuntimeEnvironment& env = ctx.env ? *ctx.env : empty;
  for (const auto& c : g.components) {
    if (const auto* l = std::get_if<GLiteral>(&c)) {
      out.text += l->text;
      out.literal.resize(out.text.size(), true);
      continue;
    }
    const std::string& name = *reference_name(c);
    if (ctx.scope) {
      if (auto v = ctx.scope->lookup(name)) lexical_used[name] = *v;
    }
    out.text += resolve(name, ctx.scope, env);
    out.literal.resize(out.text.size(), false);
  }
  return out;
}

std::vector<std::string> expand(const std::vector<Word>& words, const AssembleContext& ctx) {
  std::vector<std::string> argv;
  for (const auto& w : words) {
    if (!w.glob) {
      argv.push_back(w.text);
      continue;
    }
    auto matches = expand_path_pattern(*w.glob, ctx.base_dir);
    if (!matches || matches->empty()) {
      if (ctx.warn) ctx.warn("no files match " + w.text);
      continue;
    }
    argv.insert(argv.end(), matches->begin(), matches->end());
  }
  return argv;
}

std::string fill_template(const std::string& tmpl, const std::string& slot) {
  std::string out = tmpl;
  for (std::size_t p = out.find("{slot}"); p != std::string::npos; p = out.find("{slot}", p + slot.size()))
    out.replace(p, 6, slot);
  return out;
}

}  // namespace

ExecutionPlan assemble(const std::vector<CommandElement>& elements, const AssembleContext& ctx) {
  if (!alternation_holds(elements))
    throw AssembleError("malformed command sequence: " + print_elements(elements));

  ExecutionPlan plan;
  std::map<std::string, std::string> lexical_used;
  AndOrList list;
  Pipeline pipe;
  Connector next = Connector::Start;
  auto close_pipeline = [&]() {
    if (pipe.commands.empty()) return;
    list.pipelines.emplace_back(next, std::move(pipe));
    pipe = Pipeline{};
  };
  auto close_list = [&](bool background) {
    close_pipeline();
    if (list.pipelines.empty()) return;
    list.background = background;
    plan.sequence.push_back(std::move(list));
    list = AndOrList{};
    next = Connector::Start;
  };
  auto add_text = [&](const std::string& s) {
    if (!plan.text.empty()) plan.text += ' ';
    plan.text += s;
  };

  for (const auto& e : elements) {
    std::visit(overloaded{
                   [&](const Command& c) {
                     Evaluated ev = evaluate(c.text, ctx, lexical_used);
                     add_text(ev.text);
                     SimpleCommand cmd{expand(split_words(ev.text, ev.literal), ctx), {}};
                     if (cmd.argv.empty()) throw AssembleError("command is empty after expansion: " + ev.text);
                     pipe.commands.push_back(std::move(cmd));
                   },
                   [&](const FetchCommand& f) {
                     std::string line = fill_template(ctx.sdk.fetch, f.slot);
                     add_text(line);
                     SimpleCommand cmd{expand(split_words(line), ctx), {}};
                     if (cmd.argv.empty()) throw AssembleError("empty fetch command template");
                     pipe.commands.push_back(std::move(cmd));
                   },
                   [&](const PushCommand& p) {
                     std::string line = fill_template(ctx.sdk.push, p.slot);
                     add_text(line);
                     SimpleCommand cmd{expand(split_words(line), ctx), {}};
                     if (cmd.argv.empty()) throw AssembleError("empty push command template");
                     pipe.commands.push_back(std::move(cmd));
                   },
                   [&](const RedirectToFile& r) {
                     Evaluated ev = evaluate(r.target, ctx, lexical_used);
                     auto words = split_words(ev.text, ev.literal);
                     if (words.size() != 1) throw AssembleError("ambiguous redirect target: " + ev.text);
                     add_text("> " + ev.text);
                     pipe.redirect = words.front().text;
                   },
                   [&](const Operator& o) {
                     add_text(std::string(operator_symbol(o.kind)));
                     switch (o.kind) {
                       case OperatorKind::Pipe: break;
                       case OperatorKind::And:
                       case OperatorKind::Or:
                         close_pipeline();
                         next = o.kind == OperatorKind::And ? Connector::And : Connector::Or;
                         break;
                       case OperatorKind::Seq: close_list(false); break;
                       case OperatorKind::Background: close_list(true); break;
                     }
                   },
               },
               e);
  }
  close_list(false);

  if (ctx.env) {
    for (const auto& name : ctx.env->exported())
      if (const auto* v = ctx.env->lookup(name)) plan.environment[name] = *v;
  }
  for (auto& [k, v] : lexical_used) plan.environment[k] = v;
  std::set<std::string> names;
  for (const auto& [k, v] : plan.environment) names.insert(k);
  for (auto& l : plan.sequence)
    for (auto& [conn, p] : l.pipelines)
      for (auto& c : p.commands) c.env_exports = names;
  return plan;
}

// ---------------------------------------------------------------------------
// Running

namespace {

struct Runner {
  const ExecutionPlan& plan;
  RunIo io;
  RunResult& result;
  std::vector<std::string> env_storage;
  std::vector<char*> envp;

  Runner(const ExecutionPlan& p, const RunIo& i, RunResult& r) : plan(p), io(i), result(r) {
    std::map<std::string, std::string> merged;
    for (char** e = environ; e && *e; ++e) {
      std::string_view entry(*e);
      auto eq = entry.find('=');
      if (eq == std::string_view::npos) continue;
      merged[std::string(entry.substr(0, eq))] = std::string(entry.substr(eq + 1));
    }
    for (const auto& [k, v] : plan.environment) merged[k] = v;
    for (const auto& [k, v] : merged) env_storage.push_back(k + "=" + v);
    for (auto& s : env_storage) envp.push_back(s.data());
    envp.push_back(nullptr);
  }

  static std::optional<int> exit_argument(const SimpleCommand& c, int last, std::string& error) {
    if (c.argv.size() < 2) return last;
    const std::string& a = c.argv[1];
    if (a.empty() || !std::all_of(a.begin(), a.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
      error = "exit: Illegal number: " + a + "\n";
      return std::nullopt;
    }
    return std::stoi(a.substr(0, 9)) & 0xff;
  }

  int run_pipeline(const Pipeline& p, int last) {
    const auto& cmds = p.commands;
    if (cmds.size() == 1 && cmds.front().argv.front() == "exit") {
      std::string error;
      auto code = exit_argument(cmds.front(), last, error);
      write_fd(io.err, error);
      result.exited = true;
      return code.value_or(2);
    }

    int out_fd = io.out;
    int redirect_fd = -1;
    if (p.redirect) {
      fs::path target(*p.redirect);
      if (target.is_relative() && !io.cwd.empty()) target = io.cwd / target;
      redirect_fd = ::open(target.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0666);
      if (redirect_fd < 0) {
        write_fd(io.err, "nyosh: cannot create " + *p.redirect + ": " + std::strerror(errno) + "\n");
        result.executed_completely = false;
        result.spawn_failures.push_back(*p.redirect);
        return 1;
      }
      out_fd = redirect_fd;
    }

    std::vector<pid_t> pids;
    int in_fd = io.in;
    int owned_in = -1;
    for (std::size_t k = 0; k < cmds.size(); ++k) {
      const bool last_stage = k + 1 == cmds.size();
      int pipefd[2] = {-1, -1};
      if (!last_stage && ::pipe2(pipefd, O_CLOEXEC) != 0) {
        write_fd(io.err, std::string("nyosh: pipe: ") + std::strerror(errno) + "\n");
        break;
      }
      int stage_out = last_stage ? out_fd : pipefd[1];
      pid_t pid = spawn(cmds[k], in_fd, stage_out, last);
      if (pid > 0) pids.push_back(pid);
      if (owned_in >= 0) ::close(owned_in);
      if (!last_stage) {
        ::close(pipefd[1]);
        in_fd = owned_in = pipefd[0];
      }
    }
    if (owned_in >= 0) ::close(owned_in);
    if (redirect_fd >= 0) ::close(redirect_fd);

    int status = 0;
    for (std::size_t k = 0; k < pids.size(); ++k) {
      int ws = 0;
      while (::waitpid(pids[k], &ws, 0) < 0 && errno == EINTR) {
      }
      if (k + 1 == pids.size()) {
        if (WIFEXITED(ws)) status = WEXITSTATUS(ws);
        else if (WIFSIGNALED(ws)) status = 128 + WTERMSIG(ws);
      }
    }
    return status;
  }

  // Returns the child pid; records a spawn failure when exec fails.
  pid_t spawn(const SimpleCommand& cmd, int in_fd, int out_fd, int last) {
    std::vector<char*> argv;
    for (const auto& a : cmd.argv) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    std::optional<int> builtin_exit;
    std::string exit_error;
    if (cmd.argv.front() == "exit") builtin_exit = exit_argument(cmd, last, exit_error).value_or(2);

    int errpipe[2];
    if (::pipe2(errpipe, O_CLOEXEC) != 0) {
      write_fd(io.err, std::string("nyosh: pipe: ") + std::strerror(errno) + "\n");
      return -1;
    }
    pid_t pid = ::fork();
    if (pid < 0) {
      ::close(errpipe[0]);
      ::close(errpipe[1]);
      write_fd(io.err, std::string("nyosh: fork: ") + std::strerror(errno) + "\n");
      result.executed_completely = false;
      result.spawn_failures.push_back(cmd.argv.front());
      return -1;
    }
    if (pid == 0) {
      ::signal(SIGPIPE, SIG_DFL);
      if (in_fd != 0) ::dup2(in_fd, 0);
      if (out_fd != 1) ::dup2(out_fd, 1);
      if (io.err != 2) ::dup2(io.err, 2);
      if (builtin_exit) {
        write_fd(2, exit_error);
        ::_exit(*builtin_exit);
      }
      if (!io.cwd.empty() && ::chdir(io.cwd.c_str()) != 0) {
        int e = errno;
        (void)!::write(errpipe[1], &e, sizeof e);
        ::_exit(127);
      }
      ::execvpe(argv[0], argv.data(), envp.data());
      int e = errno;
      (void)!::write(errpipe[1], &e, sizeof e);
      ::_exit(127);
    }
    ::close(errpipe[1]);
    int child_errno = 0;
    ssize_t n;
    while ((n = ::read(errpipe[0], &child_errno, sizeof child_errno)) < 0 && errno == EINTR) {
    }
    ::close(errpipe[0]);
    if (n > 0) {
      write_fd(io.err, "nyosh: " + cmd.argv.front() + ": " +
                           (child_errno == ENOENT ? std::string("not found") : std::strerror(child_errno)) + "\n");
      result.executed_completely = false;
      result.spawn_failures.push_back(cmd.argv.front());
    }
    return pid;
  }

  int run_list(const AndOrList& list, int last) {
    for (const auto& [conn, p] : list.pipelines) {
      if (conn == Connector::And && last != 0) continue;
      if (conn == Connector::Or && last == 0) continue;
      last = run_pipeline(p, last);
      if (result.exited) break;
    }
    return last;
  }

  void run_all() {
    int last = 0;
    for (const auto& list : plan.sequence) {
      if (list.background) {
        pid_t pid = ::fork();
        if (pid == 0) {
          int devnull = ::open("/dev/null", O_RDONLY);
          if (devnull >= 0) io.in = devnull;
          RunResult sub;
          Runner child(plan, io, sub);
          int code = child.run_list(list, 0);
          ::_exit(code);
        }
        if (pid < 0) {
          result.executed_completely = false;
          result.spawn_failures.push_back("&");
        }
        continue;
      }
      last = run_list(list, last);
      if (result.exited) break;
    }
    result.last_exit_code = last;
  }
};

}  // namespace

RunResult run(const ExecutionPlan& plan, const RunIo& io) {
  RunResult result;
  result.assembled_text = plan.text;
  Runner(plan, io, result).run_all();
  return result;
}

// ---------------------------------------------------------------------------
// Steps

namespace {

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  return s;
}

}  // namespace

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  ::gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_step_record(const StepRecord& r) {
  return r.timestamp + "\t" + (r.status == StepStatus::Done ? "DONE" : "ERROR") + "\t" + std::to_string(r.code) +
         "\t" + one_line(r.description);
}

std::optional<StepRecord> parse_step_record(const std::string& line) {
  std::size_t a = line.find('\t');
  if (a == std::string::npos) return std::nullopt;
  std::size_t b = line.find('\t', a + 1);
  if (b == std::string::npos) return std::nullopt;
  std::size_t c = line.find('\t', b + 1);
  if (c == std::string::npos) return std::nullopt;
  StepRecord r;
  r.timestamp = line.substr(0, a);
  std::string status = line.substr(a + 1, b - a - 1);
  if (status == "DONE") r.status = StepStatus::Done;
  else if (status == "ERROR") r.status = StepStatus::Error;
  else return std::nullopt;
  try {
    r.code = std::stoi(line.substr(b + 1, c - b - 1));
  } catch (const std::exception&) {
    return std::nullopt;
  }
  r.description = line.substr(c + 1);
  return r;
}

FileStepsLogger::FileStepsLogger(const fs::path& dir) : path_(dir / "steps.log") {}

void FileStepsLogger::step(const std::string& description, StepStatus status, int code) {
  if (!out_.is_open()) {
    std::error_code ec;
    fs::create_directories(path_.parent_path(), ec);
    out_.open(path_, std::ios::app);
    if (!out_) throw std::runtime_error("cannot open steps log " + path_.string());
  }
  out_ << format_step_record(StepRecord{utc_timestamp(), status, code, description}) << '\n';
  out_.flush();
}

void FileStepsLogger::close() {
  if (!out_.is_open()) return;
  out_.close();
  if (out_.fail()) throw std::runtime_error("cannot close steps log " + path_.string());
}

void MemoryStepsLogger::step(const std::string& description, StepStatus status, int code) {
  records.push_back(StepRecord{utc_timestamp(), status, code, description});
}

void DefaultErrorManagement::record_step_done(const std::string& description) {
  logger_.step(description, StepStatus::Done, 0);
}

void DefaultErrorManagement::exception(const std::string& description, int status, const std::string& error) {
  logger_.step(description, StepStatus::Error, status);
  write_fd(err_fd_, description + (error.empty() ? "" : " " + error) + "\n");
}

void DefaultErrorManagement::close() {
  try {
    logger_.close();
  } catch (const std::exception& e) {
    write_fd(err_fd_, std::string("steps log could not be closed: ") + e.what() + "\n");
  }
}

void ConsoleErrorManagement::record_step_done(const std::string& description) {
  write_fd(err_fd_, format_step_record(StepRecord{utc_timestamp(), StepStatus::Done, 0, description}) + "\n");
}

void ConsoleErrorManagement::exception(const std::string& description, int status, const std::string& error) {
  write_fd(err_fd_, format_step_record(StepRecord{utc_timestamp(), StepStatus::Error, status, description}) + "\n");
  if (!error.empty()) write_fd(err_fd_, error + "\n");
}

void run_step_block(const std::string& description, const std::function<void()>& body,
                    ErrorManagementPolicy& policy) {
  const std::string failed = "step " + description + " failed.";
  try {
    body();
  } catch (const ScriptError& e) {
    policy.exception(failed, 0, e.what());
    return;
  } catch (const ScriptExit& x) {
    policy.exception(failed, x.status, "");
    throw;
  }
  policy.record_step_done(description);
}

void fail(bool must_be_true, const std::string& reason, int status_code, ErrorManagementPolicy& policy) {
  if (must_be_true) return;
  policy.exception(reason, status_code, "");
  throw ScriptExit{status_code};
}

// ---------------------------------------------------------------------------
// Plan JSON

std::string plan_to_json(const ExecutionPlan& plan, int indent) {
  using json = nlohmann::ordered_json;
  json seq = json::array();
  for (const auto& l : plan.sequence) {
    json pipes = json::array();
    for (const auto& [conn, p] : l.pipelines) {
      json cmds = json::array();
      for (const auto& c : p.commands) cmds.push_back(json{{"argv", c.argv}});
      pipes.push_back(json{{"connector", conn == Connector::Start ? "start" : conn == Connector::And ? "and" : "or"},
                           {"commands", cmds},
                           {"redirect", p.redirect ? json(*p.redirect) : json(nullptr)}});
    }
    seq.push_back(json{{"background", l.background}, {"pipelines", pipes}});
  }
  json env = json::object();
  for (const auto& [k, v] : plan.environment) env[k] = v;
  json out{{"sequence", seq}, {"environment", env}, {"text", plan.text}};
  return out.dump(indent);
}

// ---------------------------------------------------------------------------
// Interpreter

namespace {

using Value = std::variant<std::string, std::int64_t, bool, std::vector<std::string>>;

struct Frame;

struct Lazy {
  GString text;
  Frame* frame;
};

struct Slot {
  ValueType type = ValueType::String;
  std::variant<Value, Lazy> value;
  bool evaluating = false;
};

struct Frame {
  Frame* parent = nullptr;
  std::map<std::string, Slot> vars;

  Slot* find(const std::string& name) {
    for (Frame* f = this; f; f = f->parent) {
      auto it = f->vars.find(name);
      if (it != f->vars.end()) return &it->second;
    }
    return nullptr;
  }
};

std::string to_text(const Value& v) {
  return std::visit(overloaded{
                        [](const std::string& s) { return s; },
                        [](std::int64_t i) { return std::to_string(i); },
                        [](bool b) { return std::string(b ? "true" : "false"); },
                        [](const std::vector<std::string>& a) {
                          std::string out;
                          for (std::size_t i = 0; i < a.size(); ++i) out += (i ? " " : "") + a[i];
                          return out;
                        },
                    },
                    v);
}

class Interpreter;

class FrameScope final : public LexicalScope {
 public:
  FrameScope(Interpreter& in, Frame& f) : in_(in), frame_(f) {}
  std::optional<std::string> lookup(const std::string& name) const override;

 private:
  Interpreter& in_;
  Frame& frame_;
};

class Interpreter {
 public:
  Interpreter(const InterpretOptions& opt, ErrorManagementPolicy& policy) : opt_(opt), policy_(policy) {
    ctx_ = opt.sources;
    if (ctx_.base_dir.empty() || ctx_.base_dir == ".") ctx_.base_dir = opt.job_dir;
    if (!std::getenv("JOB_DIR") && !ctx_.runtime_values.count("JOB_DIR"))
      ctx_.runtime_values["JOB_DIR"] = fs::absolute(opt.job_dir).lexically_normal().string();
    io_ = opt.io;
    io_.cwd = opt.job_dir;
  }

  void preload(const std::vector<EnvironmentSourceSpec>& sources, Frame& frame) {
    exec(LoadEnvironmentSources{sources}, frame);
  }

  void set_plugin_fallback(const Script& script) {
    if (!ctx_.plugin && script.header) ctx_.plugin = model_from_header(*script.header);
  }

  void run_body(const StatementList& body, Frame& parent) {
    Frame frame{&parent, {}};
    for (const auto& s : body) statement(s, frame);
  }

  Value value_of(Slot& slot) {
    if (auto* v = std::get_if<Value>(&slot.value)) return *v;
    auto& lazy = std::get<Lazy>(slot.value);
    if (slot.evaluating) throw ScriptError("variable refers to itself: " + pretty_print(lazy.text));
    slot.evaluating = true;
    try {
      std::string s = eval_text(lazy.text, *lazy.frame);
      slot.evaluating = false;
      return s;
    } catch (...) {
      slot.evaluating = false;
      throw;
    }
  }

  std::string eval_text(const GString& g, Frame& frame) {
    if (g.is_staged()) return *g.raw_text;
    FrameScope scope(*this, frame);
    std::string out;
    for (const auto& c : g.components) {
      if (const auto* l = std::get_if<GLiteral>(&c)) {
        out += l->text;
      } else if (const auto* r = std::get_if<GEnvReader>(&c)) {
        // Bound to the environment when parsed; a later local of the same
        // name does not capture it.
        if (const auto* v = env_.lookup(r->name)) out += *v;
        else out += resolve(r->name, &scope, env_);
      } else {
        out += resolve(*reference_name(c), &scope, env_);
      }
    }
    return out;
  }

  void statement(const Statement& s, Frame& frame) {
    try {
      std::visit([&](const auto& node) { exec(node, frame); }, s.node);
    } catch (const ResolutionError& e) {
      throw ScriptError(e.what());
    } catch (const LoadError& e) {
      throw ScriptError(e.what());
    } catch (const AssembleError& e) {
      throw ScriptError(e.what());
    } catch (const std::regex_error& e) {
      throw ScriptError(std::string("invalid regular expression: ") + e.what());
    }
  }

  const InterpretOptions& opt_;
  ErrorManagementPolicy& policy_;
  SourceContext ctx_;
  RuntimeEnvironment env_;
  RunIo io_;

  Value coerce(Value v, ValueType t, const std::string& what) {
    switch (t) {
      case ValueType::String: return to_text(v);
      case ValueType::Int:
        if (auto* i = std::get_if<std::int64_t>(&v)) return *i;
        if (auto* s = std::get_if<std::string>(&v)) {
          try {
            std::size_t used = 0;
            long long n = std::stoll(*s, &used);
            if (used == s->size()) return static_cast<std::int64_t>(n);
          } catch (const std::exception&) {
          }
        }
        break;
      case ValueType::Boolean:
        if (auto* b = std::get_if<bool>(&v)) return *b;
        if (auto* s = std::get_if<std::string>(&v); s && (*s == "true" || *s == "false")) return *s == "true";
        break;
      case ValueType::StringArray:
        if (auto* a = std::get_if<std::vector<std::string>>(&v)) return *a;
        return std::vector<std::string>{to_text(v)};
    }
    throw ScriptError(what + " expects " + std::string(type_name(t)) + ", got '" + to_text(v) + "'");
  }

 private:
  bool as_bool(const Value& v, const std::string& what) {
    return std::get<bool>(coerce(v, ValueType::Boolean, what));
  }

  Value eval(const Expression& e, Frame& frame) {
    return std::visit(
        overloaded{
            [](const StringLiteral& s) -> Value { return s.text; },
            [](const IntLiteral& i) -> Value { return i.value; },
            [](const BoolLiteral& b) -> Value { return b.value; },
            [&](const VarRef& v) -> Value {
              Slot* slot = frame.find(v.name);
              if (!slot) throw ScriptError("variable " + v.name + " is not declared");
              return value_of(*slot);
            },
            [&](const GString& g) -> Value { return eval_text(g, frame); },
            [&](const PathPattern& p) -> Value {
              std::string pattern = eval_text(p.pattern, frame);
              auto r = expand_path_pattern(pattern, ctx_.base_dir);
              if (!r) throw ScriptError(r.error());
              return *r;
            },
            [&](const Ternary& t) -> Value {
              return as_bool(eval(*t.condition, frame), "condition") ? eval(*t.then_value, frame)
                                                                     : eval(*t.else_value, frame);
            },
            [&](const MethodCall& m) -> Value { return call(m, frame); },
            [&](const ArrayIndex& a) -> Value {
              auto arr = std::get<std::vector<std::string>>(coerce(eval(*a.array, frame), ValueType::StringArray, "index"));
              auto idx = std::get<std::int64_t>(coerce(eval(*a.index, frame), ValueType::Int, "index"));
              if (idx < 0 || static_cast<std::size_t>(idx) >= arr.size())
                throw ScriptError("index " + std::to_string(idx) + " out of bounds for length " +
                                  std::to_string(arr.size()));
              return arr[static_cast<std::size_t>(idx)];
            },
            [&](const Binary& b) -> Value {
              std::string l = to_text(eval(*b.lhs, frame));
              std::string r = to_text(eval(*b.rhs, frame));
              switch (b.op) {
                case BinaryOperator::Concat: return l + r;
                case BinaryOperator::Equal: return l == r;
                case BinaryOperator::NotEqual: return l != r;
              }
              return false;
            },
        },
        e.node);
  }

  std::string arg_text(const MethodCall& m, std::size_t i, Frame& frame) {
    if (i >= m.args.size()) throw ScriptError(std::string(method_name(m.method)) + ": missing argument");
    return to_text(eval(m.args[i], frame));
  }

  Value call(const MethodCall& m, Frame& frame) {
    switch (m.method) {
      case Method::Format: return format(m, frame);
      case Method::GetBaseName: {
        std::string p = arg_text(m, 0, frame);
        std::string name = p.substr(p.find_last_of("/\\") == std::string::npos ? 0 : p.find_last_of("/\\") + 1);
        auto dot = name.rfind('.');
        return dot == std::string::npos ? name : name.substr(0, dot);
      }
      case Method::GetFullPath: {
        std::string p = arg_text(m, 0, frame);
        auto slash = p.find_last_of("/\\");
        return slash == std::string::npos ? std::string() : p.substr(0, slash + 1);
      }
      case Method::Getenv: {
        std::string name = arg_text(m, 0, frame);
        if (const auto* v = env_.lookup(name)) return *v;
        const char* host = std::getenv(name.c_str());
        return std::string(host ? host : "");
      }
      default: break;
    }
    if (!m.receiver) throw ScriptError(std::string(method_name(m.method)) + " needs a receiver");
    Value recv = eval(**m.receiver, frame);
    switch (m.method) {
      case Method::ToUpperCase: {
        std::string s = to_text(recv);
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
        return s;
      }
      case Method::Split: {
        std::string s = to_text(recv);
        std::regex re(arg_text(m, 0, frame));
        std::vector<std::string> parts;
        if (s.empty()) return std::vector<std::string>{""};
        for (std::sregex_token_iterator it(s.begin(), s.end(), re, -1), end; it != end; ++it) parts.push_back(*it);
        while (!parts.empty() && parts.back().empty()) parts.pop_back();
        return parts;
      }
      case Method::Equals: return to_text(recv) == arg_text(m, 0, frame);
      case Method::Length:
        if (auto* a = std::get_if<std::vector<std::string>>(&recv)) return static_cast<std::int64_t>(a->size());
        return static_cast<std::int64_t>(to_text(recv).size());
      case Method::Index: {
        auto pos = to_text(recv).find(arg_text(m, 0, frame));
        return pos == std::string::npos ? std::int64_t{-1} : static_cast<std::int64_t>(pos);
      }
      default: break;
    }
    throw ScriptError("unsupported method");
  }

  Value format(const MethodCall& m, Frame& frame) {
    std::string fmt = arg_text(m, 0, frame);
    std::string out;
    std::size_t next = 1;
    for (std::size_t i = 0; i < fmt.size(); ++i) {
      if (fmt[i] != '%' || i + 1 >= fmt.size()) {
        out += fmt[i];
        continue;
      }
      char spec = fmt[++i];
      if (spec == '%') out += '%';
      else if (spec == 'n') out += '\n';
      else if (spec == 's' || spec == 'd') out += arg_text(m, next++, frame);
      else throw ScriptError(std::string("String.format: unsupported conversion %") + spec);
    }
    return out;
  }

  void print(const std::string& s) { write_fd(opt_.dry_run ? io_.err : io_.out, s + "\n"); }

  void exec(const VarDecl& d, Frame& frame) {
    Slot slot;
    slot.type = d.type;
    if (const auto* g = std::get_if<GString>(&d.initializer.node); g && d.type == ValueType::String) {
      slot.value = Lazy{*g, &frame};
    } else {
      slot.value = coerce(eval(d.initializer, frame), d.type, "variable " + d.name);
    }
    frame.vars[d.name] = std::move(slot);
  }

  void exec(const Assignment& a, Frame& frame) {
    Slot* slot = frame.find(a.target);
    if (!slot) throw ScriptError("variable " + a.target + " is not declared");
    Value v = coerce(eval(a.value, frame), slot->type, "variable " + a.target);
    slot->value = std::move(v);
  }

  void exec(const If& i, Frame& frame) {
    if (as_bool(eval(i.condition, frame), "if condition")) run_body(i.then_body, frame);
    else if (i.else_body) run_body(*i.else_body, frame);
  }

  void exec(const Println& p, Frame& frame) { print(to_text(eval(p.value, frame))); }

  void exec(const ExpressionStatement& e, Frame& frame) { eval(e.expr, frame); }

  void exec(const ExecuteCommand& x, Frame& frame) {
    FrameScope scope(*this, frame);
    AssembleContext actx;
    actx.scope = &scope;
    actx.env = &env_;
    actx.base_dir = opt_.job_dir;
    actx.sdk = opt_.sdk;
    actx.warn = [this](const std::string& w) { write_fd(io_.err, "nyosh: warning: " + w + "\n"); };
    ExecutionPlan plan = assemble(x.elements, actx);
    if (opt_.dry_run) {
      write_fd(io_.out, plan_to_json(plan, -1) + "\n");
      return;
    }
    RunResult r = run(plan, io_);
    if (!r.executed_completely) throw ScriptError("failed executing: " + r.assembled_text);
  }

  void exec(const LoadEnvironmentSources& l, Frame& frame) {
    FrameScope scope(*this, frame);
    for (const auto& src : l.sources) {
      std::string resolved;
      if (const auto* m = std::get_if<MapFileSource>(&src)) resolved = eval_text(m->path, frame);
      VariableSet vars = parse_at_run_time(src, env_, ctx_, &scope);
      env_.push_layer(EnvironmentLayer{source_label(src, resolved), std::move(vars)},
                      std::holds_alternative<MapFileSource>(src));
    }
  }

  void exec(const StepBlock& b, Frame& frame) {
    write_fd(opt_.dry_run ? io_.err : io_.out, "Executing step: " + b.description + "\n");
    run_step_block(b.description, [&] { run_body(b.body, frame); }, policy_);
  }

  void exec(const Fail& f, Frame& frame) {
    fail(false, eval_text(f.message, frame), static_cast<int>(f.status_code), policy_);
  }
};

std::optional<std::string> FrameScope::lookup(const std::string& name) const {
  Slot* slot = frame_.find(name);
  if (!slot) return std::nullopt;
  return to_text(in_.value_of(*slot));
}

}  // namespace

int dispatch_entry(const Script& script, std::vector<std::string> args, const InterpretOptions& options) {
  if (args.empty()) args.push_back("main");
  const EntryPoint* entry = nullptr;
  for (const auto& e : script.entry_points)
    if (e.name == args.front()) entry = &e;
  if (!entry) {
    write_fd(options.io.err, "The entry point " + args.front() + " name was not recognized");
    return 1;
  }
  if (args.size() - 1 != entry->params.size()) {
    write_fd(options.io.err, "Invalid number of arguments\n");
    return 0;
  }

  std::unique_ptr<StepsLogger> logger;
  std::unique_ptr<ErrorManagementPolicy> owned;
  ErrorManagementPolicy* policy = options.policy;
  if (!policy) {
    if (script.error_management == kConsoleErrorManagement) {
      owned = std::make_unique<ConsoleErrorManagement>(options.io.err);
    } else {
      logger = std::make_unique<FileStepsLogger>(options.job_dir);
      owned = std::make_unique<DefaultErrorManagement>(*logger, options.io.err);
    }
    policy = owned.get();
  }

  Interpreter in(options, *policy);
  in.set_plugin_fallback(script);
  Frame root;
  int status = 0;
  try {
    for (std::size_t i = 0; i < entry->params.size(); ++i) {
      const auto& p = entry->params[i];
      Slot slot;
      slot.type = p.type;
      try {
        slot.value = in.coerce(Value{args[i + 1]}, p.type, "parameter " + p.name);
      } catch (const ScriptError& e) {
        policy->exception(e.what(), 1, "");
        throw ScriptExit{1};
      }
      root.vars[p.name] = std::move(slot);
    }
    if (!options.preloaded.empty()) {
      try {
        in.preload(options.preloaded, root);
      } catch (const std::exception& e) {
        policy->exception(e.what(), 1, "");
        throw ScriptExit{1};
      }
    }
    for (const auto& s : entry->body) {
      try {
        in.statement(s, root);
      } catch (const ScriptError& e) {
        policy->exception(e.what(), 1, "");
        throw ScriptExit{1};
      }
    }
  } catch (const ScriptExit& x) {
    status = x.status;
  }
  policy->close();
  return status;
}

int interpret(const Script& script, const std::vector<std::string>& args, const InterpretOptions& options) {
  return dispatch_entry(script, args, options);
}

}  // namespace nyosh
