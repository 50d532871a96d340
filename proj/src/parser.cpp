#include "nyosh/parser.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <utility>

namespace nyosh {

std::string format_parse_error(const ParseError& e) {
  std::string out = e.location.file + ":" + std::to_string(e.location.line) + ":" +
                    std::to_string(e.location.column) + ": error: " + e.message;
  if (e.expected) out += " (expected " + *e.expected + ")";
  return out;
}

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r'; }

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (is_blank(s[b]) || s[b] == '\n')) ++b;
  while (e > b && (is_blank(s[e - 1]) || s[e - 1] == '\n')) --e;
  return std::string(s.substr(b, e - b));
}

bool in_scope(const std::vector<std::string>& names, const std::string& name) {
  return std::find(names.begin(), names.end(), name) != names.end();
}

struct Failure {
  ParseError error;
};

// Parses `${name}` references and `\$` escapes in command-form text.
class CommandTextParser {
 public:
  CommandTextParser(std::string_view text, const std::vector<std::string>& scope)
      : text_(text), scope_(scope) {}

  expected<GString, std::string> run() {
    GString g;
    std::string lit;
    for (std::size_t i = 0; i < text_.size(); ++i) {
      char c = text_[i];
      if (c == '\\' && i + 1 < text_.size()) {
        if (text_[i + 1] == '$') {
          lit += '$';
        } else {
          lit += c;
          lit += text_[i + 1];
        }
        ++i;
        continue;
      }
      if (c == '$' && i + 1 < text_.size() && text_[i + 1] == '{') {
        std::size_t close = text_.find('}', i + 2);
        std::size_t nested = text_.find("${", i + 2);
        if (close == std::string_view::npos) return unexpected<std::string>{"unterminated ${ reference"};
        if (nested != std::string_view::npos && nested < close)
          return unexpected<std::string>{"nested ${ reference is not allowed"};
        std::string name(text_.substr(i + 2, close - i - 2));
        if (!is_identifier(name)) return unexpected<std::string>{"malformed ${ reference: '" + name + "'"};
        if (!lit.empty()) g.components.emplace_back(GLiteral{std::exchange(lit, {})});
        if (in_scope(scope_, name))
          g.components.emplace_back(GVarReference{name});
        else
          g.components.emplace_back(GEnvReader{name});
        i = close;
        continue;
      }
      lit += c;
    }
    if (!lit.empty()) g.components.emplace_back(GLiteral{lit});
    return normalize_gstring(std::move(g));
  }

 private:
  std::string_view text_;
  const std::vector<std::string>& scope_;
};

// Finds an unquoted `redirect to file` phrase starting a word; returns the
// offset of "redirect" and the offset where the target starts.
std::optional<std::pair<std::size_t, std::size_t>> find_redirect(std::string_view s) {
  char quote = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (quote) {
      if (c == '\\' && quote == '"') ++i;
      else if (c == quote) quote = 0;
      continue;
    }
    if (c == '\\') {
      ++i;
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
      continue;
    }
    if (i > 0 && !is_blank(s[i - 1])) continue;
    std::size_t p = i;
    auto word = [&](std::string_view w, bool need_space_after) {
      if (s.substr(p, w.size()) != w) return false;
      std::size_t q = p + w.size();
      if (q < s.size() && !is_blank(s[q])) return false;
      if (need_space_after && q >= s.size()) return false;
      p = q;
      while (p < s.size() && is_blank(s[p])) ++p;
      return true;
    };
    if (word("redirect", true) && word("to", true) && word("file", false)) return std::pair{i, p};
  }
  return std::nullopt;
}

std::optional<std::string> slot_command(const std::string& text, std::string_view keyword) {
  if (text.size() <= keyword.size() + 1 || text.compare(0, keyword.size(), keyword) != 0 ||
      !is_blank(text[keyword.size()]))
    return std::nullopt;
  std::string rest = trim(std::string_view(text).substr(keyword.size()));
  if (!is_identifier(rest)) return std::nullopt;
  return rest;
}

// Converts command-line text into elements. Lenient mode keeps misplaced
// operators for the checker to report; strict mode rejects them.
expected<std::vector<CommandElement>, std::string> build_elements(std::string_view text,
                                                                  const std::vector<std::string>& scope,
                                                                  bool strict) {
  auto tokens = split_command_line(text);
  if (!tokens) return unexpected<std::string>{tokens.error()};
  std::vector<CommandElement> out;
  for (const auto& tok : *tokens) {
    if (tok.kind == CommandToken::Kind::Op) {
      out.emplace_back(Operator{tok.op});
      continue;
    }
    std::string seg = trim(tok.text);
    if (seg.empty()) continue;
    std::string cmd = seg;
    std::optional<std::string> target;
    if (auto r = find_redirect(seg)) {
      cmd = trim(std::string_view(seg).substr(0, r->first));
      target = trim(std::string_view(seg).substr(r->second));
      if (target->empty()) return unexpected<std::string>{"missing redirect target"};
    }
    if (!cmd.empty()) {
      if (auto slot = slot_command(cmd, "fetch")) {
        out.emplace_back(FetchCommand{*slot});
      } else if (auto pslot = slot_command(cmd, "push")) {
        out.emplace_back(PushCommand{*pslot});
      } else {
        auto g = CommandTextParser(cmd, scope).run();
        if (!g) return unexpected<std::string>{g.error()};
        out.emplace_back(Command{std::move(*g)});
      }
    }
    if (target) {
      auto g = CommandTextParser(*target, scope).run();
      if (!g) return unexpected<std::string>{g.error()};
      out.emplace_back(RedirectToFile{std::move(*g)});
    }
  }
  if (out.empty()) return unexpected<std::string>{"empty execute statement"};
  if (strict && !alternation_holds(out)) {
    if (!is_command_like(out.front())) return unexpected<std::string>{"operator without a preceding command"};
    const auto& last = out.back();
    if (is_operator(last, OperatorKind::Pipe) || is_operator(last, OperatorKind::And) ||
        is_operator(last, OperatorKind::Or))
      return unexpected<std::string>{"dangling trailing operator"};
    for (std::size_t i = 1; i < out.size(); ++i)
      if (is_operator(out[i - 1]) && is_operator(out[i]))
        return unexpected<std::string>{"empty command between operators"};
    return unexpected<std::string>{"operator in illegal position"};
  }
  return out;
}

class Parser {
 public:
  Parser(std::string_view src, std::string file) : src_(src), file_(std::move(file)) {}

  ParseResult run() {
    ParseResult result;
    try {
      Script script = parse_script();
      if (errors_.empty()) result.script = std::move(script);
    } catch (const Failure& f) {
      errors_.push_back(f.error);
    }
    result.errors = std::move(errors_);
    return result;
  }

 private:
  // ---- cursor -------------------------------------------------------------

  bool at_end() const { return pos_ >= src_.size(); }
  char peek(std::size_t k = 0) const { return pos_ + k < src_.size() ? src_[pos_ + k] : '\0'; }
  SourceLocation loc() const { return {file_, line_, col_}; }

  void advance(std::size_t n = 1) {
    while (n-- > 0 && !at_end()) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else if ((static_cast<unsigned char>(src_[pos_]) & 0xC0) != 0x80) {
        ++col_;
      }
      ++pos_;
    }
    // Continuation bytes of a UTF-8 sequence do not start a new column.
  }

  bool starts_with(std::string_view s) const { return src_.substr(pos_).substr(0, s.size()) == s; }

  bool at_keyword(std::string_view kw) const {
    return starts_with(kw) && !is_ident_char(peek(kw.size()));
  }

  bool consume_keyword(std::string_view kw) {
    if (!at_keyword(kw)) return false;
    advance(kw.size());
    return true;
  }

  [[noreturn]] void fail(std::string message, std::optional<std::string> expected = std::nullopt) const {
    throw Failure{ParseError{loc(), std::move(message), std::move(expected)}};
  }

  [[noreturn]] void fail_at(SourceLocation at, std::string message) const {
    throw Failure{ParseError{std::move(at), std::move(message), std::nullopt}};
  }

  void skip_spaces() {
    while (!at_end() && is_blank(peek())) advance();
    if (paren_depth_ > 0) {
      while (!at_end() && (is_blank(peek()) || peek() == '\n')) advance();
    }
  }

  void skip_spaces_and_newlines() {
    while (!at_end() && (is_blank(peek()) || peek() == '\n')) advance();
  }

  void skip_comment() {
    if (starts_with("//"))
      while (!at_end() && peek() != '\n') advance();
  }

  // Whitespace, newlines and `//` comments between statements.
  void skip_blank() {
    for (;;) {
      skip_spaces_and_newlines();
      if (starts_with("//")) {
        skip_comment();
        continue;
      }
      return;
    }
  }

  void expect(std::string_view s) {
    skip_spaces();
    if (!starts_with(s)) fail("unexpected " + describe_here(), "'" + std::string(s) + "'");
    advance(s.size());
  }

  std::string describe_here() const {
    if (at_end()) return "end of input";
    if (peek() == '\n') return "end of line";
    std::size_t n = 0;
    while (pos_ + n < src_.size() && n < 12 && src_[pos_ + n] != '\n') ++n;
    return "'" + std::string(src_.substr(pos_, n)) + "'";
  }

  std::string identifier(std::string_view what) {
    skip_spaces();
    if (!is_ident_start(peek())) fail("expected " + std::string(what) + ", found " + describe_here(), std::string(what));
    std::size_t start = pos_;
    while (is_ident_char(peek())) advance();
    return std::string(src_.substr(start, pos_ - start));
  }

  std::string rest_of_line() {
    std::size_t start = pos_;
    while (!at_end() && peek() != '\n') advance();
    return std::string(src_.substr(start, pos_ - start));
  }

  void skip_line() {
    while (!at_end() && peek() != '\n') advance();
  }

  // ---- scopes -------------------------------------------------------------

  std::vector<std::string> visible_names() const {
    std::vector<std::string> out;
    for (const auto& s : scopes_) out.insert(out.end(), s.begin(), s.end());
    return out;
  }

  bool is_lexical(const std::string& name) const {
    for (const auto& s : scopes_)
      if (in_scope(s, name)) return true;
    return false;
  }

  GStringComponent reference(const std::string& name) const {
    if (is_lexical(name)) return GVarReference{name};
    return GEnvReader{name};
  }

  struct ScopeGuard {
    Parser& p;
    explicit ScopeGuard(Parser& parser) : p(parser) { p.scopes_.emplace_back(); }
    ~ScopeGuard() { p.scopes_.pop_back(); }
  };

  // ---- script structure ----------------------------------------------------

  Script parse_script() {
    Script script;
    skip_blank();
    if (at_end()) return script;
    if (starts_with("plugin system:")) {
      script.header = parse_header();
      skip_blank();
      if (at_end()) return script;
    }
    if (!consume_keyword("script")) fail("unknown top-level keyword " + describe_here(), "'script'");
    script.name = identifier("script name");
    skip_spaces();
    if (consume_keyword("error")) {
      skip_spaces();
      if (!consume_keyword("management")) fail("expected 'management'");
      expect(":");
      script.error_management = identifier("error management policy");
    }
    skip_spaces();
    SourceLocation open = loc();
    expect("{");
    for (;;) {
      skip_blank();
      if (at_end()) fail_at(open, "unterminated block: missing '}' for script");
      if (peek() == '}') {
        advance();
        break;
      }
      script.entry_points.push_back(parse_entry_point());
    }
    skip_blank();
    if (!at_end()) fail("unexpected text after script body: " + describe_here(), "end of input");
    return script;
  }

  PluginHeader parse_header() {
    PluginHeader h;
    h.loc.value = loc();
    advance(std::string_view("plugin system:").size());
    rest_of_line();
    bool have_id = false;
    bool have_kind = false;
    for (;;) {
      skip_blank();
      SourceLocation at = loc();
      if (consume_keyword("id")) {
        expect(":");
        h.id = trim(rest_of_line());
        if (!is_valid_plugin_id(h.id)) fail_at(at, "invalid plugin id '" + h.id + "' (uppercase letters, digits and '_' only)");
        have_id = true;
      } else if (consume_keyword("kind")) {
        expect(":");
        std::string k = trim(rest_of_line());
        auto kind = parse_kind(k);
        if (!kind) fail_at(at, "unknown plugin kind '" + k + "'");
        h.kind = *kind;
        have_kind = true;
      } else if (consume_keyword("location")) {
        expect(":");
        h.location = trim(rest_of_line());
      } else {
        break;
      }
    }
    if (!have_id) fail_at(h.loc.value, "plugin header is missing 'id:'");
    if (!have_kind) fail_at(h.loc.value, "plugin header is missing 'kind:'");
    return h;
  }

  std::optional<ValueType> try_type() {
    if (starts_with("string[]")) {
      advance(8);
      return ValueType::StringArray;
    }
    if (consume_keyword("string")) return ValueType::String;
    if (consume_keyword("int")) return ValueType::Int;
    if (consume_keyword("boolean")) return ValueType::Boolean;
    return std::nullopt;
  }

  EntryPoint parse_entry_point() {
    EntryPoint ep;
    ep.loc.value = loc();
    static constexpr std::array<std::string_view, 6> kPhrases = {
        "alignment analysis", "artifact install", "aligner", "resource", "task", "designated"};
    for (auto phrase : kPhrases) {
      if (at_keyword(phrase)) {
        advance(phrase.size());
        skip_spaces();
        ep.is_designated = true;
        break;
      }
    }
    if (!consume_keyword("entry")) fail("expected entry point declaration, found " + describe_here(), "'entry point'");
    skip_spaces();
    if (!consume_keyword("point")) fail("expected 'point'", "'point'");
    ep.name = identifier("entry point name");
    expect("(");
    skip_spaces_and_newlines();
    if (peek() != ')') {
      for (;;) {
        skip_spaces_and_newlines();
        auto type = try_type();
        if (!type) fail("expected parameter type, found " + describe_here(), "string, int, boolean or string[]");
        Parameter p;
        p.type = *type;
        p.name = identifier("parameter name");
        ep.params.push_back(std::move(p));
        skip_spaces_and_newlines();
        if (peek() == ',') {
          advance();
          continue;
        }
        break;
      }
    }
    expect(")");
    skip_spaces_and_newlines();
    SourceLocation open = loc();
    expect("{");
    ScopeGuard scope(*this);
    for (const auto& p : ep.params) scopes_.back().push_back(p.name);
    ep.body = parse_block(open, "entry point " + ep.name);
    return ep;
  }

  // Parses statements up to and including the closing brace.
  StatementList parse_block(const SourceLocation& open, const std::string& what) {
    StatementList body;
    for (;;) {
      skip_blank();
      if (at_end()) fail_at(open, "unterminated block: missing '}' for " + what);
      if (peek() == '}') {
        advance();
        return body;
      }
      try {
        body.push_back(parse_statement());
      } catch (const Failure& f) {
        errors_.push_back(f.error);
        paren_depth_ = 0;
        skip_line();
      }
    }
  }

  // ---- statements -----------------------------------------------------------

  void end_statement(bool allow_semicolon = true) {
    skip_spaces();
    bool had_semicolon = false;
    if (allow_semicolon && peek() == ';') {
      advance();
      had_semicolon = true;
    }
    while (!at_end() && is_blank(peek())) advance();
    skip_comment();
    if (at_end() || peek() == '\n' || peek() == '}') return;
    if (had_semicolon) return;  // another statement follows on the same line
    fail("expected end of statement, found " + describe_here(), "';' or end of line");
  }

  Statement parse_statement() {
    Statement st;
    st.loc.value = loc();
    if (consume_keyword("step")) {
      st.node = parse_step();
    } else if (at_keyword("execute")) {
      st.node = parse_execute(st.loc.value);
    } else if (consume_keyword("load")) {
      st.node = parse_load();
      end_statement();
    } else if (consume_keyword("fail")) {
      st.node = parse_fail();
      end_statement();
    } else if (consume_keyword("if")) {
      st.node = parse_if();
    } else if (starts_with("System.out.println")) {
      advance(std::string_view("System.out.println").size());
      expect("(");
      ++paren_depth_;
      Println p{parse_expression()};
      --paren_depth_;
      expect(")");
      st.node = std::move(p);
      end_statement();
    } else if (auto decl = try_declaration()) {
      st.node = std::move(*decl);
      end_statement();
    } else if (auto assign = try_assignment()) {
      st.node = std::move(*assign);
      end_statement();
    } else if (peek() == '{' || at_end()) {
      fail("unknown statement " + describe_here());
    } else {
      std::size_t before = pos_;
      try {
        st.node = ExpressionStatement{parse_expression()};
      } catch (const Failure&) {
        if (pos_ == before || is_ident_start(src_[before])) {
          // Report the leading word: most likely a misspelled keyword.
          std::size_t n = 0;
          while (before + n < src_.size() && is_ident_char(src_[before + n])) ++n;
          if (n > 0)
            fail_at(st.loc.value, "unknown statement keyword '" + std::string(src_.substr(before, n)) + "'");
        }
        throw;
      }
      end_statement();
    }
    return st;
  }

  StepBlock parse_step() {
    StepBlock s;
    skip_spaces();
    std::size_t start = pos_;
    while (!at_end() && peek() != '{' && peek() != '\n') advance();
    if (peek() != '{') fail("expected '{' after step description", "'{'");
    s.description = trim(src_.substr(start, pos_ - start));
    if (s.description.empty()) fail("step description is empty");
    SourceLocation open = loc();
    advance();
    ScopeGuard scope(*this);
    s.body = parse_block(open, "step " + s.description);
    return s;
  }

  // Reads the remainder of an execute statement, joining backslash-newline
  // continuations (the break and the next line's indentation become one space).
  std::string execute_text() {
    std::string text;
    while (!at_end() && peek() != '\n') {
      if (peek() == '\\' && peek(1) == '\n') {
        advance(2);
        while (!at_end() && is_blank(peek())) advance();
        if (!text.empty() && !is_blank(text.back())) text += ' ';
        continue;
      }
      text += peek();
      advance();
    }
    return text;
  }

  ExecuteCommand parse_execute(const SourceLocation& at) {
    advance(std::string_view("execute").size());
    skip_spaces();
    bool staged = consume_keyword("raw");
    expect(":");
    skip_spaces();
    std::string text = execute_text();
    ExecuteCommand cmd;
    if (staged) {
      GString g;
      g.raw_text = trim(text);
      cmd.elements.emplace_back(Command{std::move(g)});
      return cmd;
    }
    auto elems = build_elements(text, visible_names(), /*strict=*/false);
    if (!elems) fail_at(at, elems.error());
    cmd.elements = std::move(*elems);
    return cmd;
  }

  LoadEnvironmentSources parse_load() {
    skip_spaces();
    if (!consume_keyword("environment")) fail("expected 'environment'", "'environment sources'");
    skip_spaces();
    if (!consume_keyword("sources")) fail("expected 'sources'", "'sources'");
    expect("{");
    LoadEnvironmentSources load;
    for (;;) {
      skip_spaces_and_newlines();
      if (peek() == '}' && load.sources.empty()) fail("empty source list", "an environment source");
      if (starts_with("Java Environment")) {
        advance(std::string_view("Java Environment").size());
        load.sources.emplace_back(ProcessEnvSource{});
      } else if (consume_keyword("GobyWebSource")) {
        PluginConfigSource src;
        skip_spaces();
        if (peek() == ':') {
          advance();
          skip_spaces();
          if (peek() != '"') fail("expected quoted plugin directory", "string literal");
          bool has_ref = false;
          GString g = parse_quoted(&has_ref);
          if (has_ref) fail("plugin directory cannot contain references");
          src.plugin_dir = g.components.empty() ? "" : std::get<GLiteral>(g.components.front()).text;
        }
        load.sources.emplace_back(std::move(src));
      } else if (consume_keyword("MapFile")) {
        expect(":");
        skip_spaces();
        load.sources.emplace_back(MapFileSource{parse_gstring_operand("map file path")});
      } else {
        fail("unknown environment source " + describe_here(), "Java Environment, GobyWebSource or MapFile:");
      }
      skip_spaces_and_newlines();
      if (peek() == ',') {
        advance();
        continue;
      }
      if (peek() == '}') {
        advance();
        break;
      }
      fail("unexpected " + describe_here() + " in source list", "',' or '}'");
    }
    return load;
  }

  // A GString written as `"..."` or `${NAME}`.
  GString parse_gstring_operand(std::string_view what) {
    skip_spaces();
    if (peek() == '"') {
      bool has_ref = false;
      return parse_quoted(&has_ref);
    }
    if (starts_with("${")) return parse_bare_reference();
    fail("expected " + std::string(what) + ", found " + describe_here(), "quoted string or ${NAME}");
  }

  Fail parse_fail() {
    Fail f;
    f.message = parse_gstring_operand("failure message");
    skip_spaces();
    if (std::isdigit(static_cast<unsigned char>(peek())) || (peek() == '-' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      f.status_code = parse_int();
    }
    return f;
  }

  If parse_if() {
    If node;
    expect("(");
    ++paren_depth_;
    node.condition = parse_expression();
    --paren_depth_;
    expect(")");
    skip_spaces_and_newlines();
    SourceLocation open = loc();
    expect("{");
    {
      ScopeGuard scope(*this);
      node.then_body = parse_block(open, "if");
    }
    std::size_t save_pos = pos_;
    int save_line = line_;
    int save_col = col_;
    skip_spaces_and_newlines();
    if (consume_keyword("else")) {
      skip_spaces_and_newlines();
      SourceLocation else_open = loc();
      expect("{");
      ScopeGuard scope(*this);
      node.else_body = parse_block(else_open, "else");
    } else {
      pos_ = save_pos;
      line_ = save_line;
      col_ = save_col;
    }
    return node;
  }

  std::optional<VarDecl> try_declaration() {
    std::size_t save_pos = pos_;
    int save_line = line_;
    int save_col = col_;
    auto type = try_type();
    if (!type) return std::nullopt;
    skip_spaces();
    if (!is_ident_start(peek())) {
      pos_ = save_pos;
      line_ = save_line;
      col_ = save_col;
      return std::nullopt;
    }
    VarDecl d;
    d.type = *type;
    d.name = identifier("variable name");
    expect("=");
    skip_spaces();
    d.initializer = parse_expression();
    scopes_.back().push_back(d.name);
    return d;
  }

  std::optional<Assignment> try_assignment() {
    if (!is_ident_start(peek())) return std::nullopt;
    std::size_t n = 0;
    while (is_ident_char(peek(n))) ++n;
    std::size_t k = n;
    while (is_blank(peek(k))) ++k;
    if (peek(k) != '=' || peek(k + 1) == '=') return std::nullopt;
    Assignment a;
    a.target = std::string(src_.substr(pos_, n));
    advance(k + 1);
    skip_spaces();
    a.value = parse_expression();
    return a;
  }

  // ---- expressions ----------------------------------------------------------

  Expression make(SourceLocation at, Expression::Node node) {
    Expression e;
    e.node = std::move(node);
    e.loc.value = std::move(at);
    return e;
  }

  Expression parse_expression() { return parse_ternary(); }

  Expression parse_ternary() {
    skip_spaces();
    SourceLocation at = loc();
    Expression cond = parse_equality();
    skip_spaces();
    if (peek() != '?') return cond;
    advance();
    skip_spaces_and_newlines();
    Expression then_value = parse_ternary();
    skip_spaces_and_newlines();
    if (peek() != ':') fail("expected ':' in conditional expression", "':'");
    advance();
    skip_spaces_and_newlines();
    Expression else_value = parse_ternary();
    return make(at, Ternary{std::move(cond), std::move(then_value), std::move(else_value)});
  }

  Expression parse_equality() {
    SourceLocation at = loc();
    Expression lhs = parse_concat();
    for (;;) {
      skip_spaces();
      BinaryOperator op;
      if (starts_with("==")) {
        op = BinaryOperator::Equal;
      } else if (starts_with("!=")) {
        op = BinaryOperator::NotEqual;
      } else {
        return lhs;
      }
      advance(2);
      skip_spaces_and_newlines();
      Expression rhs = parse_concat();
      lhs = make(at, Binary{op, std::move(lhs), std::move(rhs)});
    }
  }

  Expression parse_concat() {
    SourceLocation at = loc();
    Expression lhs = parse_postfix();
    for (;;) {
      skip_spaces();
      if (peek() != '+') return lhs;
      advance();
      skip_spaces_and_newlines();
      Expression rhs = parse_postfix();
      lhs = make(at, Binary{BinaryOperator::Concat, std::move(lhs), std::move(rhs)});
    }
  }

  std::vector<Expression> parse_args() {
    expect("(");
    ++paren_depth_;
    std::vector<Expression> args;
    skip_spaces();
    if (peek() != ')') {
      for (;;) {
        args.push_back(parse_expression());
        skip_spaces();
        if (peek() == ',') {
          advance();
          skip_spaces();
          continue;
        }
        break;
      }
    }
    --paren_depth_;
    expect(")");
    return args;
  }

  Expression parse_postfix() {
    SourceLocation at = loc();
    Expression e = parse_primary();
    for (;;) {
      if (peek() == '.') {
        advance();
        std::string name = identifier("method name");
        MethodCall call;
        call.receiver = std::move(e);
        if (name == "length") {
          call.method = Method::Length;
          if (peek() == '(' && peek(1) == ')') advance(2);
        } else {
          static constexpr std::array<std::pair<std::string_view, Method>, 4> kMethods = {{
              {"toUpperCase", Method::ToUpperCase},
              {"split", Method::Split},
              {"equals", Method::Equals},
              {"indexOf", Method::Index},
          }};
          auto it = std::find_if(kMethods.begin(), kMethods.end(), [&](const auto& m) { return m.first == name; });
          if (it == kMethods.end()) fail("unknown method '" + name + "'", "toUpperCase, split, equals, indexOf or length");
          call.method = it->second;
          call.args = parse_args();
        }
        e = make(at, std::move(call));
      } else if (peek() == '[') {
        advance();
        ++paren_depth_;
        skip_spaces();
        Expression index = parse_expression();
        --paren_depth_;
        expect("]");
        e = make(at, ArrayIndex{std::move(e), std::move(index)});
      } else {
        return e;
      }
    }
  }

  std::int64_t parse_int() {
    std::size_t start = pos_;
    if (peek() == '-') advance();
    if (!std::isdigit(static_cast<unsigned char>(peek()))) fail("expected integer", "integer");
    while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
    std::int64_t value = 0;
    auto text = src_.substr(start, pos_ - start);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) fail("integer out of range");
    return value;
  }

  GString parse_bare_reference() {
    SourceLocation at = loc();
    advance(2);
    std::size_t start = pos_;
    while (!at_end() && peek() != '}' && peek() != '\n' && peek() != '"') {
      if (starts_with("${")) fail_at(at, "nested ${ reference is not allowed");
      advance();
    }
    if (peek() != '}') fail_at(at, "malformed ${ reference: missing '}'");
    std::string name(src_.substr(start, pos_ - start));
    advance();
    if (!is_identifier(name)) fail_at(at, "malformed ${ reference: '" + name + "'");
    GString g;
    g.components.push_back(reference(name));
    return g;
  }

  // Double-quoted text. Sets *has_ref when an unescaped `${` occurs.
  GString parse_quoted(bool* has_ref) {
    SourceLocation at = loc();
    advance();  // opening quote
    GString g;
    std::string lit;
    for (;;) {
      if (at_end() || peek() == '\n') fail_at(at, "unterminated string literal");
      char c = peek();
      if (c == '"') {
        advance();
        break;
      }
      if (c == '\\') {
        char n = peek(1);
        switch (n) {
          case '"': lit += '"'; break;
          case '\\': lit += '\\'; break;
          case '$': lit += '$'; break;
          case 'n': lit += '\n'; break;
          case 't': lit += '\t'; break;
          case 'r': lit += '\r'; break;
          case '\n':
          case '\0': fail_at(at, "unterminated string literal");
          default:
            lit += '\\';
            lit += n;
        }
        advance(2);
        continue;
      }
      if (c == '$' && peek(1) == '{') {
        *has_ref = true;
        if (!lit.empty()) g.components.emplace_back(GLiteral{std::exchange(lit, {})});
        GString ref = parse_bare_reference();
        g.components.push_back(std::move(ref.components.front()));
        continue;
      }
      lit += c;
      advance();
    }
    if (!lit.empty()) g.components.emplace_back(GLiteral{std::move(lit)});
    return normalize_gstring(std::move(g));
  }

  GString parse_raw() {
    SourceLocation at = loc();
    advance();  // opening quote
    std::string text;
    for (;;) {
      if (at_end() || peek() == '\n') fail_at(at, "unterminated raw string");
      char c = peek();
      if (c == '"') {
        advance();
        break;
      }
      if (c == '\\' && (peek(1) == '"' || peek(1) == '\\')) {
        text += peek(1);
        advance(2);
        continue;
      }
      text += c;
      advance();
    }
    GString g;
    g.raw_text = std::move(text);
    return g;
  }

  Expression parse_primary() {
    skip_spaces();
    SourceLocation at = loc();
    char c = peek();
    if (c == '(') {
      advance();
      ++paren_depth_;
      Expression inner = parse_expression();
      --paren_depth_;
      expect(")");
      inner.loc.value = at;
      return inner;
    }
    if (c == '"') {
      bool has_ref = false;
      GString g = parse_quoted(&has_ref);
      if (!has_ref) {
        std::string text;
        for (const auto& comp : g.components) text += std::get<GLiteral>(comp).text;
        return make(at, StringLiteral{std::move(text)});
      }
      return make(at, std::move(g));
    }
    if (starts_with("raw\"")) {
      advance(3);
      return make(at, parse_raw());
    }
    if (starts_with("path\"")) {
      advance(4);
      bool has_ref = false;
      return make(at, PathPattern{parse_quoted(&has_ref)});
    }
    if (starts_with("${")) return make(at, parse_bare_reference());
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '-' && std::isdigit(static_cast<unsigned char>(peek(1)))))
      return make(at, IntLiteral{parse_int()});
    if (is_ident_start(c)) {
      static constexpr std::array<std::pair<std::string_view, Method>, 4> kStatic = {{
          {"String.format", Method::Format},
          {"FilenameUtils.getBaseName", Method::GetBaseName},
          {"FilenameUtils.getFullPath", Method::GetFullPath},
          {"System.getenv", Method::Getenv},
      }};
      for (const auto& [spelling, method] : kStatic) {
        if (starts_with(spelling) && !is_ident_char(peek(spelling.size()))) {
          advance(spelling.size());
          MethodCall call;
          call.method = method;
          call.args = parse_args();
          return make(at, std::move(call));
        }
      }
      std::string name = identifier("expression");
      if (name == "true") return make(at, BoolLiteral{true});
      if (name == "false") return make(at, BoolLiteral{false});
      return make(at, VarRef{std::move(name)});
    }
    fail("expected expression, found " + describe_here(), "expression");
  }

  std::string_view src_;
  std::string file_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  int paren_depth_ = 0;
  std::vector<ParseError> errors_;
  std::vector<std::vector<std::string>> scopes_{std::vector<std::string>{}};
};

}  // namespace

expected<std::vector<CommandToken>, std::string> split_command_line(std::string_view line) {
  std::vector<CommandToken> out;
  CommandToken cur;
  char quote = 0;
  auto flush = [&](std::size_t next_offset) {
    out.push_back(std::move(cur));
    cur = CommandToken{};
    cur.offset = next_offset;
  };
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quote) {
      cur.text += c;
      if (c == '\\' && quote == '"' && i + 1 < line.size()) {
        cur.text += line[++i];
      } else if (c == quote) {
        quote = 0;
      }
      continue;
    }
    if (c == '\\' && i + 1 < line.size()) {
      cur.text += c;
      cur.text += line[++i];
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
      cur.text += c;
      continue;
    }
    std::optional<OperatorKind> op;
    std::size_t width = 1;
    char n = i + 1 < line.size() ? line[i + 1] : '\0';
    if (c == '|') {
      op = n == '|' ? OperatorKind::Or : OperatorKind::Pipe;
      width = n == '|' ? 2 : 1;
    } else if (c == '&') {
      op = n == '&' ? OperatorKind::And : OperatorKind::Background;
      width = n == '&' ? 2 : 1;
    } else if (c == ';') {
      op = OperatorKind::Seq;
    }
    if (!op) {
      cur.text += c;
      continue;
    }
    flush(i);
    CommandToken optok;
    optok.kind = CommandToken::Kind::Op;
    optok.op = *op;
    optok.text = std::string(line.substr(i, width));
    optok.offset = i;
    out.push_back(std::move(optok));
    i += width - 1;
    cur.offset = i + 1;
  }
  if (quote) return unexpected<std::string>{std::string("unterminated ") + (quote == '"' ? "double" : "single") + " quote"};
  out.push_back(std::move(cur));
  return out;
}

ParseResult parse_script(std::string_view text, const std::string& file) {
  return Parser(text, file).run();
}

expected<ExecuteCommand, ParseError> parse_execute_line(std::string_view text,
                                                        const std::vector<std::string>& scope) {
  SourceLocation at{"<execute>", 1, 1};
  std::string_view body = text;
  while (!body.empty() && is_blank(body.front())) body.remove_prefix(1);
  if (body.substr(0, 8) != "execute:") {
    return unexpected<ParseError>{ParseError{at, "execute statement must begin with 'execute:'", "'execute:'"}};
  }
  body.remove_prefix(8);
  // Join continuations the same way the script parser does.
  std::string joined;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] == '\\' && i + 1 < body.size() && body[i + 1] == '\n') {
      i += 2;
      while (i < body.size() && is_blank(body[i])) ++i;
      --i;
      if (!joined.empty() && !is_blank(joined.back())) joined += ' ';
      continue;
    }
    if (body[i] == '\n') break;
    joined += body[i];
  }
  auto elems = build_elements(joined, scope, /*strict=*/true);
  if (!elems) return unexpected<ParseError>{ParseError{at, elems.error(), std::nullopt}};
  return ExecuteCommand{std::move(*elems)};
}

expected<GString, ParseError> parse_command_gstring(std::string_view text,
                                                    const std::vector<std::string>& scope) {
  auto g = CommandTextParser(text, scope).run();
  if (!g) return unexpected<ParseError>{ParseError{{"<command>", 1, 1}, g.error(), std::nullopt}};
  return std::move(*g);
}

}  // namespace nyosh
