#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lqg/cli.hpp"

namespace lqg::cli {

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

bool looks_like_json(std::string_view text) {
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    return c == '{';
  }
  return false;
}

std::string scalar_text(const nlohmann::json& v, const std::string& where) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_number_float()) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v.get<double>());
    return std::string(buf, res.ptr);
  }
  throw ConfigError(where + ": expected a string, number or boolean");
}

Settings from_json(const nlohmann::json& doc, const std::string& source) {
  if (!doc.is_object()) throw ConfigError(source + ": top-level JSON value must be an object");
  const nlohmann::json& obj = doc.contains("config") && doc["config"].is_object() ? doc["config"] : doc;
  Settings out;
  for (const auto& [key, value] : obj.items()) {
    const std::string where = source + ": field '" + key + "'";
    if (value.is_array()) {
      std::string joined;
      for (const auto& item : value) {
        if (!joined.empty()) joined += ',';
        joined += scalar_text(item, where);
      }
      out[key] = joined;
    } else {
      out[key] = scalar_text(value, where);
    }
  }
  return out;
}

double parse_power_or_number(const std::string& key, const std::string& item) {
  const std::string s = trim(item);
  const auto caret = s.find('^');
  if (caret != std::string::npos) {
    const double base = parse_real(key, s.substr(0, caret));
    const double expo = parse_real(key, s.substr(caret + 1));
    return std::pow(base, expo);
  }
  return parse_real(key, s);
}

}  // namespace

Settings parse_settings(std::string_view text, const std::string& source) {
  if (looks_like_json(text)) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(source + ": invalid JSON (" + e.what() + ")");
    }
    return from_json(doc, source);
  }
  Settings out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key=value, got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (out.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    out[key] = trim(t.substr(eq + 1));
  }
  return out;
}

Settings load_settings_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_settings(ss.str(), path);
}

std::string manifest_command(std::string_view text) {
  if (!looks_like_json(text)) return {};
  try {
    const auto doc = nlohmann::json::parse(text);
    if (doc.is_object() && doc.contains("command") && doc["command"].is_string())
      return doc["command"].get<std::string>();
  } catch (const nlohmann::json::parse_error&) {
  }
  return {};
}

double parse_real(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("field '" + key + "': expected a number, got '" + text + "'");
  return v;
}

long long parse_integer(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("field '" + key + "': expected an integer, got '" + text + "'");
  return v;
}

std::uint64_t parse_seed(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("field '" + key + "': expected a non-negative integer, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("field '" + key + "': expected true or false, got '" + text + "'");
}

Point parse_point(const std::string& key, const std::string& text) {
  std::string s = text;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  std::string a, b, extra;
  if (!(in >> a >> b) || (in >> extra))
    throw ConfigError("field '" + key + "': expected a point 'x,y', got '" + text + "'");
  return {parse_real(key, a), parse_real(key, b)};
}

std::vector<double> parse_real_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) throw ConfigError("field '" + key + "': empty list item in '" + text + "'");
    const auto dots = t.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_power_or_number(key, t));
      continue;
    }
    const std::string lo = trim(t.substr(0, dots));
    const std::string hi = trim(t.substr(dots + 2));
    const auto c1 = lo.find('^');
    const auto c2 = hi.find('^');
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw ConfigError("field '" + key + "': ranges must be powers like 2^-3..2^-7, got '" + t + "'");
    const double base = parse_real(key, lo.substr(0, c1));
    if (base != parse_real(key, hi.substr(0, c2)))
      throw ConfigError("field '" + key + "': range ends must share a base in '" + t + "'");
    const long long e1 = parse_integer(key, lo.substr(c1 + 1));
    const long long e2 = parse_integer(key, hi.substr(c2 + 1));
    const long long step = e2 >= e1 ? 1 : -1;
    for (long long e = e1;; e += step) {
      out.push_back(std::pow(base, static_cast<double>(e)));
      if (e == e2) break;
    }
  }
  if (out.empty()) throw ConfigError("field '" + key + "': empty list");
  return out;
}

std::vector<std::string> parse_word_list(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

}  // namespace lqg::cli
