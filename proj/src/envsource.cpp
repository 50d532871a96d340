#include "nyosh/envsource.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>
#include <system_error>

#include "nyosh/pretty.hpp"

extern char** environ;  // NOLINT

namespace nyosh {

namespace fs = std::filesystem;

VariableSet to_variable_set(const std::map<std::string, std::string>& values) {
  VariableSet out;
  for (const auto& [k, v] : values) out.insert(ScriptVariable{k, v});
  return out;
}

LoadError::LoadError(std::string path, int line, const std::string& message)
    : std::runtime_error(line > 0 ? path + ":" + std::to_string(line) + ": " + message
                                  : path + ": " + message),
      path_(std::move(path)),
      line_(line) {}

ResolutionError::ResolutionError(std::string name)
    : std::runtime_error("variable '" + name + "' is not defined in scope or any loaded environment source"),
      name_(std::move(name)) {}

// ---------------------------------------------------------------------------
// Map files

namespace {

bool blank(char c) { return c == ' ' || c == '\t'; }

struct WordResult {
  std::string value;
  std::size_t end = 0;
};

expected<WordResult, std::string> read_shell_word(std::string_view s, std::size_t i) {
  WordResult out;
  while (i < s.size() && !blank(s[i])) {
    char c = s[i];
    if (c == '\'') {
      std::size_t close = s.find('\'', i + 1);
      if (close == std::string_view::npos) return unexpected<std::string>{"unterminated single quote"};
      out.value.append(s.substr(i + 1, close - i - 1));
      i = close + 1;
    } else if (c == '"') {
      ++i;
      for (;;) {
        if (i >= s.size()) return unexpected<std::string>{"unterminated double quote"};
        char d = s[i];
        if (d == '"') {
          ++i;
          break;
        }
        if (d == '\\' && i + 1 < s.size() &&
            (s[i + 1] == '"' || s[i + 1] == '\\' || s[i + 1] == '$' || s[i + 1] == '`')) {
          out.value += s[i + 1];
          i += 2;
          continue;
        }
        out.value += d;
        ++i;
      }
    } else if (c == '\\') {
      if (i + 1 >= s.size()) return unexpected<std::string>{"trailing backslash"};
      out.value += s[i + 1];
      i += 2;
    } else if (std::string_view(";&|<>()`").find(c) != std::string_view::npos) {
      return unexpected<std::string>{std::string("unsupported character '") + c + "' in value"};
    } else {
      out.value += c;
      ++i;
    }
  }
  out.end = i;
  return out;
}

bool key_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool key_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

expected<std::map<std::string, std::string>, MapFileError> parse_map_file_text(std::string_view text) {
  std::map<std::string, std::string> out;
  int lineno = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    std::size_t i = 0;
    while (i < line.size() && blank(line[i])) ++i;
    if (i == line.size() || line[i] == '#') continue;
    auto bad = [&](std::string msg) { return unexpected<MapFileError>{MapFileError{lineno, std::move(msg)}}; };

    if (line.substr(i, 6) == "export" && i + 6 < line.size() && blank(line[i + 6])) {
      i += 6;
      while (i < line.size() && blank(line[i])) ++i;
    }
    std::size_t key_begin = i;
    if (i >= line.size() || !key_start(line[i])) return bad("expected KEY=VALUE");
    while (i < line.size() && key_char(line[i])) ++i;
    std::string key(line.substr(key_begin, i - key_begin));
    if (i == line.size() || blank(line[i])) {
      // `export KEY` marks an existing variable; it defines nothing here.
      std::size_t j = i;
      while (j < line.size() && blank(line[j])) ++j;
      if (key_begin > 0 && (j == line.size() || line[j] == '#')) continue;
      return bad("expected '=' after " + key);
    }
    if (line[i] != '=') return bad("expected '=' after " + key);
    ++i;
    auto word = read_shell_word(line, i);
    if (!word) return bad(word.error());
    i = word->end;
    while (i < line.size() && blank(line[i])) ++i;
    if (i < line.size() && line[i] != '#') return bad("unexpected text after value");
    out[key] = std::move(word->value);
  }
  return out;
}

std::map<std::string, std::string> read_map_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string(), 0, "cannot read map file");
  std::stringstream buf;
  buf << in.rdbuf();
  auto parsed = parse_map_file_text(buf.str());
  if (!parsed) throw LoadError(path.string(), parsed.error().line, parsed.error().message);
  return std::move(*parsed);
}

// ---------------------------------------------------------------------------
// Plugin configuration

std::string normalize_config_id(std::string_view id) {
  std::string out;
  out.reserve(id.size());
  for (char c : id) {
    auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      out += static_cast<char>(std::toupper(u));
    } else {
      out += '_';
    }
  }
  return out;
}

PluginConfigModel parse_plugin_config(std::string_view xml, const std::string& origin) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in{std::string(xml)};
    pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw LoadError(origin, static_cast<int>(e.line()), e.message());
  }
  if (tree.empty()) throw LoadError(origin, 0, "empty plugin configuration");
  const pt::ptree& root = tree.front().second;

  PluginConfigModel model;
  model.id = normalize_config_id(root.get<std::string>("id", ""));
  if (model.id.empty()) throw LoadError(origin, 0, "plugin configuration has no <id>");
  std::string kind = normalize_config_id(root.get<std::string>("kind", ""));
  auto parsed_kind = parse_kind(kind);
  if (!parsed_kind) throw LoadError(origin, 0, "unknown plugin kind '" + kind + "'");
  model.kind = *parsed_kind;

  auto attr = [](const pt::ptree& node, const char* name) {
    return node.get<std::string>(std::string("<xmlattr>.") + name, "");
  };
  for (const auto& [tag, node] : root) {
    if (tag == "option") {
      std::string id = normalize_config_id(attr(node, "id"));
      if (id.empty()) throw LoadError(origin, 0, "<option> without id");
      model.options.emplace_back(id, attr(node, "default"));
    } else if (tag == "resource") {
      PluginResource res;
      res.id = normalize_config_id(attr(node, "id"));
      if (res.id.empty()) throw LoadError(origin, 0, "<resource> without id");
      for (const auto& [ftag, field] : node) {
        if (ftag != "field") continue;
        std::string name = normalize_config_id(attr(field, "name"));
        if (name.empty()) throw LoadError(origin, 0, "<field> without name in resource " + res.id);
        res.fields[name] = attr(field, "value");
      }
      model.resources.push_back(std::move(res));
    } else if (tag == "inputSlot") {
      model.input_slots.push_back(normalize_config_id(attr(node, "name")));
    } else if (tag == "outputSlot") {
      model.output_slots.push_back(normalize_config_id(attr(node, "name")));
    }
  }
  return model;
}

PluginConfigModel load_plugin_config(const fs::path& path) {
  fs::path file = fs::is_directory(path) ? path / "config.xml" : path;
  std::ifstream in(file, std::ios::binary);
  if (!in) throw LoadError(file.string(), 0, "cannot read plugin configuration");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_plugin_config(buf.str(), file.string());
}

PluginConfigModel model_from_header(const PluginHeader& header) {
  PluginConfigModel model;
  model.id = header.id;
  model.kind = header.kind;
  return model;
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string plugin_config_xml(const PluginConfigModel& model) {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<plugin>\n";
  out += "  <id>" + xml_escape(model.id) + "</id>\n";
  out += "  <kind>" + std::string(kind_name(model.kind)) + "</kind>\n";
  for (const auto& [id, def] : model.options)
    out += "  <option id=\"" + xml_escape(id) + "\" default=\"" + xml_escape(def) + "\"/>\n";
  for (const auto& res : model.resources) {
    out += "  <resource id=\"" + xml_escape(res.id) + "\">\n";
    for (const auto& [name, value] : res.fields)
      out += "    <field name=\"" + xml_escape(name) + "\" value=\"" + xml_escape(value) + "\"/>\n";
    out += "  </resource>\n";
  }
  for (const auto& s : model.input_slots) out += "  <inputSlot name=\"" + xml_escape(s) + "\"/>\n";
  for (const auto& s : model.output_slots) out += "  <outputSlot name=\"" + xml_escape(s) + "\"/>\n";
  out += "</plugin>\n";
  return out;
}

std::vector<std::string> job_variables(PluginKind kind) {
  std::vector<std::string> out{"JOB_DIR"};
  switch (kind) {
    case PluginKind::Aligner:
      out.insert(out.end(), {"COLOR_SPACE", "END_POSITION", "GENOME_REFERENCE_ID", "INPUT_READ_LENGTH",
                             "ORGANISM", "READS_FILE", "READS_PLATFORM", "START_POSITION"});
      break;
    case PluginKind::AlignmentAnalysis:
      out.insert(out.end(), {"GENOME_REFERENCE_ID", "ORGANISM"});
      break;
    default:
      break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<DerivedVariable> derived_variables(const PluginConfigModel& model) {
  std::map<std::string, std::string> vars;
  for (const auto& name : job_variables(model.kind)) vars[name] = "";
  const std::string prefix = "PLUGINS_" + std::string(kind_name(model.kind)) + "_" + model.id + "_";
  for (const auto& [id, def] : model.options) vars[prefix + id] = def;
  for (const auto& res : model.resources)
    for (const auto& [field, value] : res.fields) vars["RESOURCES_ARTIFACTS_" + res.id + "_" + field] = value;
  std::vector<DerivedVariable> out;
  out.reserve(vars.size());
  for (auto& [name, def] : vars) out.push_back({name, def});
  return out;
}

// ---------------------------------------------------------------------------
// Runtime environment

std::optional<std::string> MapScope::lookup(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

void RuntimeEnvironment::push_layer(EnvironmentLayer layer, bool exported) {
  if (exported)
    for (const auto& v : layer.variables) exported_.insert(v.name);
  layers_.push_back(std::move(layer));
}

const std::string* RuntimeEnvironment::lookup(std::string_view name) const {
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    auto found = it->variables.find(name);
    if (found != it->variables.end()) return &found->value;
  }
  return nullptr;
}

std::map<std::string, std::string> process_environment() {
  std::map<std::string, std::string> out;
  for (char** e = environ; e && *e; ++e) {
    std::string_view entry(*e);
    auto eq = entry.find('=');
    if (eq == std::string_view::npos || eq == 0) continue;
    out.emplace(std::string(entry.substr(0, eq)), std::string(entry.substr(eq + 1)));
  }
  return out;
}

std::string source_label(const EnvironmentSourceSpec& spec, const std::string& resolved_path) {
  return std::visit(overloaded{
                        [](const ProcessEnvSource&) { return std::string("Java Environment"); },
                        [&](const MapFileSource& m) {
                          return "MapFile: " + (resolved_path.empty() ? pretty_print(m.path) : resolved_path);
                        },
                        [](const PluginConfigSource&) { return std::string("GobyWebSource"); },
                    },
                    spec);
}

namespace {

const PluginConfigModel& plugin_for(const PluginConfigSource& src, const SourceContext& ctx,
                                    std::optional<PluginConfigModel>& storage) {
  if (!src.plugin_dir.empty()) {
    storage = load_plugin_config(src.plugin_dir);
    return *storage;
  }
  if (!ctx.plugin) throw LoadError("GobyWebSource", 0, "no plugin configuration is available");
  return *ctx.plugin;
}

fs::path resolve_path(const std::string& p, const SourceContext& ctx) {
  fs::path path(p);
  if (path.is_relative()) path = ctx.base_dir / path;
  return path;
}

bool has_references(const GString& g) {
  return std::any_of(g.components.begin(), g.components.end(),
                     [](const auto& c) { return reference_name(c) != nullptr; });
}

}  // namespace

VariableSet parse_at_run_time(const EnvironmentSourceSpec& spec, const RuntimeEnvironment& current,
                              const SourceContext& ctx, const LexicalScope* scope) {
  return std::visit(overloaded{
                        [](const ProcessEnvSource&) { return to_variable_set(process_environment()); },
                        [&](const MapFileSource& m) {
                          std::string path = eval_gstring(m.path, scope, current);
                          return to_variable_set(read_map_file(resolve_path(path, ctx)));
                        },
                        [&](const PluginConfigSource& p) {
                          std::optional<PluginConfigModel> storage;
                          const auto& model = plugin_for(p, ctx, storage);
                          auto host = process_environment();
                          VariableSet out;
                          for (const auto& d : derived_variables(model)) {
                            std::string value = d.default_value;
                            if (auto it = p.runtime_values.find(d.name); it != p.runtime_values.end())
                              value = it->second;
                            else if (auto c = ctx.runtime_values.find(d.name); c != ctx.runtime_values.end())
                              value = c->second;
                            else if (auto h = host.find(d.name); h != host.end())
                              value = h->second;
                            out.insert(ScriptVariable{d.name, value});
                          }
                          return out;
                        },
                    },
                    spec);
}

DesignTimeNames list_design_time_names(const EnvironmentSourceSpec& spec, const SourceContext& ctx) {
  DesignTimeNames out;
  std::visit(overloaded{
                 [&](const ProcessEnvSource&) {
                   out.available = true;
                   for (const auto& [k, v] : process_environment()) out.names.push_back(k);
                 },
                 [&](const MapFileSource& m) {
                   if (m.path.is_staged() || has_references(m.path)) {
                     out.reason = "map file path is only known at run time";
                     return;
                   }
                   std::string path;
                   for (const auto& c : m.path.components) path += std::get<GLiteral>(c).text;
                   try {
                     for (const auto& [k, v] : read_map_file(resolve_path(path, ctx))) out.names.push_back(k);
                     out.available = true;
                   } catch (const LoadError& e) {
                     out.reason = e.what();
                   }
                 },
                 [&](const PluginConfigSource& p) {
                   try {
                     std::optional<PluginConfigModel> storage;
                     const auto& model = plugin_for(p, ctx, storage);
                     for (const auto& d : derived_variables(model)) out.names.push_back(d.name);
                     out.available = true;
                   } catch (const LoadError& e) {
                     out.reason = e.what();
                   }
                 },
             },
             spec);
  std::sort(out.names.begin(), out.names.end());
  return out;
}

std::string resolve(const std::string& name, const LexicalScope* scope, const RuntimeEnvironment& env) {
  if (scope) {
    if (auto v = scope->lookup(name)) return *v;
  }
  if (const auto* v = env.lookup(name)) return *v;
  throw ResolutionError(name);
}

std::string eval_gstring(const GString& g, const LexicalScope* scope, const RuntimeEnvironment& env) {
  if (g.is_staged()) return *g.raw_text;
  std::string out;
  for (const auto& c : g.components) {
    if (const auto* lit = std::get_if<GLiteral>(&c)) {
      out += lit->text;
    } else {
      out += resolve(*reference_name(c), scope, env);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Path patterns

bool has_glob_meta(std::string_view pattern) {
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    char c = pattern[i];
    if (c == '\\') {
      ++i;
      continue;
    }
    if (c == '*' || c == '?' || c == '[') return true;
  }
  return false;
}

namespace {

std::string unescape_glob(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) ++i;
    out += s[i];
  }
  return out;
}

std::vector<std::string> split_components(std::string_view pattern) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    std::size_t slash = pattern.find('/', start);
    parts.emplace_back(pattern.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start));
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return parts;
}

// `prefix` is the result text so far ("" or ending in '/'); `dir` is where it
// lives on disk.
void glob_walk(const std::vector<std::string>& parts, std::size_t idx, const std::string& prefix,
               const fs::path& dir, std::vector<std::string>& out) {
  const std::string& part = parts[idx];
  const bool last = idx + 1 == parts.size();
  if (last && part.empty()) {
    // Trailing slash: the walk so far must name a directory.
    std::error_code ec;
    if (fs::is_directory(dir, ec)) out.push_back(prefix);
    return;
  }
  if (part.empty()) {  // repeated slash
    glob_walk(parts, idx + 1, prefix + "/", dir, out);
    return;
  }
  if (!has_glob_meta(part)) {
    std::string name = unescape_glob(part);
    fs::path next = dir / name;
    std::error_code ec;
    auto st = fs::symlink_status(next, ec);
    if (ec || !fs::exists(st)) return;
    if (last) {
      out.push_back(prefix + name);
    } else if (fs::is_directory(next, ec)) {
      glob_walk(parts, idx + 1, prefix + name + "/", next, out);
    }
    return;
  }
  std::error_code ec;
  fs::directory_iterator it(dir.empty() ? fs::path(".") : dir, ec);
  if (ec) return;
  std::vector<std::string> names;
  for (const auto& entry : it) names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  for (const auto& name : names) {
    if (fnmatch(part.c_str(), name.c_str(), FNM_PERIOD) != 0) continue;
    fs::path next = dir / name;
    if (last) {
      out.push_back(prefix + name);
    } else if (fs::is_directory(next, ec)) {
      glob_walk(parts, idx + 1, prefix + name + "/", next, out);
    }
  }
}

}  // namespace

expected<std::vector<std::string>, std::string> expand_path_pattern(std::string_view pattern,
                                                                    const fs::path& base_dir) {
  if (pattern.empty()) return unexpected<std::string>{"empty path pattern"};
  std::vector<std::string> out;
  if (pattern.substr(0, 3) == "re:") {
    std::string_view rest = pattern.substr(3);
    std::size_t slash = rest.rfind('/');
    std::string dir_text = slash == std::string_view::npos ? "" : std::string(rest.substr(0, slash + 1));
    std::string expr(slash == std::string_view::npos ? rest : rest.substr(slash + 1));
    std::regex re;
    try {
      re = std::regex(expr, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      return unexpected<std::string>{"invalid regular expression '" + expr + "': " + e.what()};
    }
    fs::path dir = dir_text.empty() ? base_dir : (fs::path(dir_text).is_absolute() ? fs::path(dir_text) : base_dir / dir_text);
    std::error_code ec;
    fs::directory_iterator it(dir, ec);
    if (ec) return out;
    for (const auto& entry : it) {
      std::string name = entry.path().filename().string();
      if (std::regex_match(name, re)) out.push_back(dir_text + name);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  auto parts = split_components(pattern);
  if (pattern.front() == '/') {
    parts.erase(parts.begin());
    glob_walk(parts, 0, "/", fs::path("/"), out);
  } else {
    glob_walk(parts, 0, "", base_dir, out);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace nyosh
