#pragma once

#include <map>
#include <string>
#include <vector>

namespace agriperc::config {

// One `[name]` section of a plain-text key-value file.
struct Section {
  std::string name;
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback = "") const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
};

// Parses `key = value` lines grouped under `[section]` headers, in file
// order. `#` starts a comment. Sections may repeat.
std::vector<Section> parse_sections(std::istream& in);
std::vector<Section> parse_sections_file(const std::string& path);

}  // namespace agriperc::config
