#include "mvfr/configfile.hpp"

#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mvfr/errors.hpp"

namespace mvfr {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& what) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": " + what);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
      return false;
  }
  return true;
}

// strip a trailing comment that is not inside a quoted string
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

std::string parse_quoted(const std::string& v, const std::string& origin, int line) {
  if (v.size() < 2 || v.back() != '"') fail(origin, line, "unterminated string literal");
  std::string out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    if (v[i] == '\\' && i + 2 < v.size()) {
      ++i;
      switch (v[i]) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        default: fail(origin, line, std::string("unknown escape \\") + v[i]);
      }
    } else if (v[i] == '"') {
      fail(origin, line, "unexpected quote inside string");
    } else {
      out += v[i];
    }
  }
  return out;
}

// scalar token -> bool / int64 / double
ConfigTree::Value parse_scalar(const std::string& tok, const std::string& origin, int line) {
  if (tok == "true") return true;
  if (tok == "false") return false;
  if (!tok.empty() && tok.front() == '"') return parse_quoted(tok, origin, line);
  errno = 0;
  char* end = nullptr;
  const long long as_int = std::strtoll(tok.c_str(), &end, 10);
  if (errno == 0 && end && *end == '\0') return static_cast<std::int64_t>(as_int);
  errno = 0;
  const double as_dbl = std::strtod(tok.c_str(), &end);
  if (end && *end == '\0' && end != tok.c_str()) return as_dbl;
  fail(origin, line, "cannot parse value '" + tok + "'");
}

std::vector<std::string> split_array_items(const std::string& body, const std::string& origin,
                                           int line) {
  std::vector<std::string> items;
  std::string cur;
  bool quoted = false;
  for (char c : body) {
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  const std::string last = trim(cur);
  if (!last.empty()) items.push_back(last);
  for (const auto& it : items)
    if (it.empty()) fail(origin, line, "empty array element");
  return items;
}

ConfigTree::Value parse_array(const std::string& v, const std::string& origin, int line) {
  if (v.back() != ']') fail(origin, line, "array must close on the same line");
  const auto items = split_array_items(v.substr(1, v.size() - 2), origin, line);
  bool any_string = false, any_double = false, any_other = false;
  std::vector<ConfigTree::Value> parsed;
  for (const auto& it : items) {
    parsed.push_back(parse_scalar(it, origin, line));
    if (std::holds_alternative<std::string>(parsed.back())) any_string = true;
    else if (std::holds_alternative<double>(parsed.back())) any_double = true;
    else if (!std::holds_alternative<std::int64_t>(parsed.back())) any_other = true;
  }
  if (any_other || (any_string && parsed.size() != items.size()))
    fail(origin, line, "array elements must all be numbers or all strings");
  if (any_string) {
    for (const auto& p : parsed)
      if (!std::holds_alternative<std::string>(p))
        fail(origin, line, "array mixes strings and numbers");
    std::vector<std::string> out;
    for (auto& p : parsed) out.push_back(std::get<std::string>(p));
    return out;
  }
  if (any_double) {
    std::vector<double> out;
    for (const auto& p : parsed)
      out.push_back(std::holds_alternative<double>(p) ? std::get<double>(p)
                                                      : static_cast<double>(std::get<std::int64_t>(p)));
    return out;
  }
  std::vector<std::int64_t> out;
  for (const auto& p : parsed) out.push_back(std::get<std::int64_t>(p));
  return out;
}

std::string format_double(double d) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", d);
  std::string s(buf);
  // keep floats recognizably float-typed on re-parse
  if (s.find_first_of(".eE") == std::string::npos && s.find("inf") == std::string::npos &&
      s.find("nan") == std::string::npos)
    s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

std::string format_value(const ConfigTree::Value& v) {
  struct Fmt {
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const { return format_double(d); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(const std::string& s) const { return quote(s); }
    std::string operator()(const std::vector<std::int64_t>& a) const {
      std::string out = "[";
      for (std::size_t i = 0; i < a.size(); ++i) out += (i ? ", " : "") + std::to_string(a[i]);
      return out + "]";
    }
    std::string operator()(const std::vector<double>& a) const {
      std::string out = "[";
      for (std::size_t i = 0; i < a.size(); ++i) out += (i ? ", " : "") + format_double(a[i]);
      return out + "]";
    }
    std::string operator()(const std::vector<std::string>& a) const {
      std::string out = "[";
      for (std::size_t i = 0; i < a.size(); ++i) out += (i ? ", " : "") + quote(a[i]);
      return out + "]";
    }
  };
  return std::visit(Fmt{}, v);
}

}  // namespace

ConfigTree ConfigTree::parse_string(const std::string& text, const std::string& origin) {
  ConfigTree tree;
  std::istringstream in(text);
  std::string raw, section;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(origin, lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_key(section)) fail(origin, lineno, "bad section name '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(origin, lineno, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (!valid_key(key)) fail(origin, lineno, "bad key '" + key + "'");
    if (val.empty()) fail(origin, lineno, "missing value for '" + key + "'");
    const std::string full = section.empty() ? key : section + "." + key;
    if (tree.values_.count(full)) fail(origin, lineno, "duplicate key '" + full + "'");
    if (val.front() == '[')
      tree.values_[full] = parse_array(val, origin, lineno);
    else
      tree.values_[full] = parse_scalar(val, origin, lineno);
  }
  return tree;
}

ConfigTree ConfigTree::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path);
}

const ConfigTree::Value& ConfigTree::require(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

std::int64_t ConfigTree::get_int(const std::string& key) const {
  const auto& v = require(key);
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  throw ConfigError("config key '" + key + "' must be an integer");
}

double ConfigTree::get_double(const std::string& key) const {
  const auto& v = require(key);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  throw ConfigError("config key '" + key + "' must be a number");
}

bool ConfigTree::get_bool(const std::string& key) const {
  const auto& v = require(key);
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  throw ConfigError("config key '" + key + "' must be true/false");
}

std::string ConfigTree::get_string(const std::string& key) const {
  const auto& v = require(key);
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw ConfigError("config key '" + key + "' must be a string");
}

std::vector<std::int64_t> ConfigTree::get_int_array(const std::string& key) const {
  const auto& v = require(key);
  if (const auto* a = std::get_if<std::vector<std::int64_t>>(&v)) return *a;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return {*i};
  throw ConfigError("config key '" + key + "' must be an integer array");
}

std::vector<double> ConfigTree::get_double_array(const std::string& key) const {
  const auto& v = require(key);
  if (const auto* a = std::get_if<std::vector<double>>(&v)) return *a;
  if (const auto* ia = std::get_if<std::vector<std::int64_t>>(&v)) {
    std::vector<double> out(ia->begin(), ia->end());
    return out;
  }
  if (const auto* d = std::get_if<double>(&v)) return {*d};
  if (const auto* i = std::get_if<std::int64_t>(&v)) return {static_cast<double>(*i)};
  throw ConfigError("config key '" + key + "' must be a numeric array");
}

std::vector<std::string> ConfigTree::get_string_array(const std::string& key) const {
  const auto& v = require(key);
  if (const auto* a = std::get_if<std::vector<std::string>>(&v)) return *a;
  if (const auto* s = std::get_if<std::string>(&v)) return {*s};
  throw ConfigError("config key '" + key + "' must be a string array");
}

std::int64_t ConfigTree::get_int_or(const std::string& key, std::int64_t dflt) const {
  return has(key) ? get_int(key) : dflt;
}
double ConfigTree::get_double_or(const std::string& key, double dflt) const {
  return has(key) ? get_double(key) : dflt;
}
bool ConfigTree::get_bool_or(const std::string& key, bool dflt) const {
  return has(key) ? get_bool(key) : dflt;
}
std::string ConfigTree::get_string_or(const std::string& key, const std::string& dflt) const {
  return has(key) ? get_string(key) : dflt;
}

std::vector<std::string> ConfigTree::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

std::vector<std::string> ConfigTree::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  return out;
}

std::string ConfigTree::to_string() const {
  // two passes: bare keys first (they must precede any section header on
  // re-parse), then one block per section, everything sorted
  std::ostringstream out;
  bool wrote_any = false;
  for (const auto& [k, v] : values_) {
    if (k.rfind('.') != std::string::npos) continue;
    out << k << " = " << format_value(v) << "\n";
    wrote_any = true;
  }
  std::string section;
  for (const auto& [k, v] : values_) {
    const auto dot = k.rfind('.');
    if (dot == std::string::npos) continue;
    const std::string sec = k.substr(0, dot);
    if (sec != section) {
      if (wrote_any) out << "\n";
      out << "[" << sec << "]\n";
      section = sec;
    }
    out << k.substr(dot + 1) << " = " << format_value(v) << "\n";
    wrote_any = true;
  }
  return out.str();
}

void ConfigTree::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write config file: " + path);
  out << to_string();
}

}  // namespace mvfr
