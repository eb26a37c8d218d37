#pragma once

// Sectioned key-value configuration: parsing with line-numbered diagnostics,
// canonical serialization (parse -> serialize -> parse is the identity), and
// strict scalar readers.

#include <charconv>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace liftlab {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigEntry {
  std::string value;
  int line = 0;  // 0 when not read from a file
};

using ConfigMap = std::map<std::string, std::map<std::string, ConfigEntry>>;

inline std::string trim_ws(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Lines are `key = value` under `[section]` headers; `#` or `;` start a
// comment line. Values keep interior characters verbatim (no inline
// comments), so canonical text survives a parse round trip.
inline ConfigMap parse_config_text(const std::string& text,
                                   const std::string& origin) {
  ConfigMap cfg;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim_ws(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') fail("unterminated section header");
      section = trim_ws(t.substr(1, t.size() - 2));
      if (section.empty()) fail("empty section name");
      cfg[section];
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    if (section.empty()) fail("key outside any [section]");
    std::string key = trim_ws(t.substr(0, eq));
    std::string value = trim_ws(t.substr(eq + 1));
    if (key.empty()) fail("empty key");
    auto [it, fresh] = cfg[section].emplace(key, ConfigEntry{value, line_no});
    (void)it;
    if (!fresh) fail("duplicate key " + section + "." + key);
  }
  return cfg;
}

inline std::string serialize_config(const ConfigMap& cfg) {
  std::string out;
  bool first = true;
  for (const auto& [section, entries] : cfg) {
    if (!first) out += '\n';
    first = false;
    out += '[' + section + "]\n";
    for (const auto& [key, entry] : entries)
      out += key + " = " + entry.value + '\n';
  }
  return out;
}

inline std::string entry_where(const std::string& origin, const ConfigEntry& e,
                               const std::string& section,
                               const std::string& key) {
  std::string where = origin;
  if (e.line > 0) where += ":" + std::to_string(e.line);
  return where + ": " + section + "." + key;
}

inline long long parse_int64(const std::string& s, const std::string& where) {
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError(where + ": expected an integer, got '" + s + "'");
  return v;
}

inline std::uint64_t parse_uint64(const std::string& s, const std::string& where) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError(where + ": expected a non-negative integer, got '" + s + "'");
  return v;
}

inline double parse_real(const std::string& s, const std::string& where) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError(where + ": expected a number, got '" + s + "'");
  return v;
}

inline bool parse_bool(const std::string& s, const std::string& where) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError(where + ": expected true/false, got '" + s + "'");
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t comma = s.find(',', pos);
    std::string tok =
        trim_ws(s.substr(pos, (comma == std::string::npos ? s.size() : comma) - pos));
    if (!tok.empty()) out.push_back(std::move(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline std::vector<int> parse_int_list(const std::string& s,
                                       const std::string& where) {
  std::vector<int> out;
  for (const std::string& tok : split_list(s))
    out.push_back(static_cast<int>(parse_int64(tok, where)));
  return out;
}

inline std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace liftlab
