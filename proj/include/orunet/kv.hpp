#pragma once

#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace orunet::kv {

/// `key = value` text block helpers shared by the experiment config file and
/// checkpoint metadata. Doubles are written with 17 significant digits so a
/// parse -> serialize cycle is byte-stable.

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Parses `key = value` lines; '#' starts a comment; blank lines ignored.
inline std::map<std::string, std::string> parse_block(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw std::runtime_error("malformed key=value line: " + t);
    out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return out;
}

struct Reader {
  const std::map<std::string, std::string>& values;
  std::string context;

  const std::string& get(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw std::runtime_error(context + ": missing key '" + key + "'");
    return it->second;
  }
  std::string get_or(const std::string& key, const std::string& fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }
  int get_int(const std::string& key) const { return std::stoi(get(key)); }
  int get_int_or(const std::string& key, int fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : std::stoi(it->second);
  }
  double get_double(const std::string& key) const { return std::stod(get(key)); }
  double get_double_or(const std::string& key, double fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : std::stod(it->second);
  }
  bool get_bool_or(const std::string& key, bool fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw std::runtime_error(context + ": bad boolean for '" + key + "': " + it->second);
  }
};

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    const std::string t = trim(tok);
    if (!t.empty()) out.push_back(std::stoi(t));
  }
  return out;
}

inline std::string join_int_list(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

}  // namespace orunet::kv
