#ifndef KSLAB_CONFIG_HPP
#define KSLAB_CONFIG_HPP

// Flat key=value configuration. Files hold one `key = value` per line with
// '#' comments; command-line overrides replace individual keys. The hash is
// FNV-1a over the sorted canonical `key=value\n` lines, leaving out the
// execution-only keys (output location, worker count).

#include "kslab/core.hpp"

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace kslab::cfg {

class Config {
 public:
  Config() = default;

  static Config parse(std::istream& is, const std::string& origin = "<stream>") {
    Config c;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw InvalidInput(origin + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw InvalidInput(origin + ":" + std::to_string(lineno) + ": empty key");
      c.values_[key] = trim(line.substr(eq + 1));
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InvalidInput("cannot open config file " + path);
    return parse(is, path);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void erase(const std::string& key) { values_.erase(key); }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string str(const std::string& key, const std::string& def) const {
    const auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
  }

  double num(const std::string& key, double def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    return to_number(key, it->second);
  }

  int integer(const std::string& key, int def) const {
    const double v = num(key, def);
    if (v != std::floor(v)) throw InvalidInput("config key " + key + " must be an integer");
    return int(v);
  }

  bool flag(const std::string& key, bool def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw InvalidInput("config key " + key + " must be a boolean, got '" + v + "'");
  }

  /// Comma separated list; `a-b` expands integer ranges.
  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    const auto it = values_.find(key);
    if (it == values_.end()) return out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      const auto dash = item.find('-', 1);
      if (dash != std::string::npos && item.find_first_not_of("0123456789-") == std::string::npos) {
        const int a = std::stoi(item.substr(0, dash)), b = std::stoi(item.substr(dash + 1));
        for (int k = a; k <= b; ++k) out.push_back(std::to_string(k));
      } else {
        out.push_back(item);
      }
    }
    return out;
  }

  std::string canonical() const {
    std::string s;
    for (const auto& [k, v] : values_)
      if (k != "out" && k != "workers") s += k + "=" + v + "\n";
    return s;
  }

  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : canonical()) {
      h ^= ch;
      h *= 1099511628211ull;
    }
    return h;
  }

  std::string hash_hex() const {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << hash();
    return os.str();
  }

  static double to_number(const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw InvalidInput("config key " + key + " must be numeric, got '" + v + "'");
    }
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace kslab::cfg

#endif  // KSLAB_CONFIG_HPP
