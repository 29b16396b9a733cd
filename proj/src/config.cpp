#include "agriperc/config.hpp"

#include <cstdint>
#include <fstream>
#include <istream>
#include <stdexcept>

namespace agriperc::config {

std::string Section::get(const std::string& key, const std::string& fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

double Section::get_double(const std::string& key, double fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad numeric value for '" + key + "': " + it->second);
  }
}

int Section::get_int(const std::string& key, int fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad integer value for '" + key + "': " + it->second);
  }
}

std::uint64_t Section::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad integer value for '" + key + "': " + it->second);
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<Section> parse_sections(std::istream& in) {
  std::vector<Section> sections;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::runtime_error("config line " + std::to_string(line_no) +
                                 ": unterminated section header");
      }
      sections.push_back(Section{trim(line.substr(1, line.size() - 2)), {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key = value");
    }
    if (sections.empty()) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": key before any [section]");
    }
    sections.back().values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return sections;
}

std::vector<Section> parse_sections_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  return parse_sections(in);
}

}  // namespace agriperc::config
