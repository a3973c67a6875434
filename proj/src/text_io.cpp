#include "ktopo/text_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "ktopo/errors.hpp"

namespace ktopo {

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf.data(), end);
}

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

namespace {

int parse_int(std::string_view token) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size() || value < 0) {
    throw ParseError("invalid index '" + std::string(token) + "'");
  }
  return value;
}

}  // namespace

std::vector<int> parse_index_list(std::string_view text) {
  std::string normalized(text);
  std::replace(normalized.begin(), normalized.end(), ',', ' ');
  std::istringstream in(normalized);
  std::vector<int> out;
  std::string token;
  while (in >> token) {
    const auto dash = token.find('-', 1);
    if (dash == std::string::npos) {
      out.push_back(parse_int(token));
      continue;
    }
    const int lo = parse_int(std::string_view(token).substr(0, dash));
    const int hi = parse_int(std::string_view(token).substr(dash + 1));
    if (hi < lo) throw ParseError("descending range '" + token + "'");
    for (int i = lo; i <= hi; ++i) out.push_back(i);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void write_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
  std::ostringstream out;
  for (std::size_t e = 0; e < labels.size(); ++e) out << e << ' ' << int(labels[e]) << '\n';
  write_text_file(path, out.str());
}

std::vector<std::uint8_t> read_labels(const std::filesystem::path& path, int expected_count) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open label file " + path.string());
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(expected_count), 0);
  std::vector<std::uint8_t> seen(labels.size(), 0);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ls(t);
    long index = -1;
    double value = -1.0;
    if (!(ls >> index >> value)) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 'index value'");
    }
    if (index < 0 || index >= expected_count) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": element index " +
                        std::to_string(index) + " outside [0," + std::to_string(expected_count) +
                        ")");
    }
    if (value != 0.0 && value != 1.0) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": label must be 0 or 1");
    }
    labels[static_cast<std::size_t>(index)] = value == 1.0 ? 1 : 0;
    seen[static_cast<std::size_t>(index)] = 1;
  }
  if (std::count(seen.begin(), seen.end(), 1) != expected_count) {
    throw ConfigError("label file " + path.string() + " does not cover all " +
                      std::to_string(expected_count) + " elements");
  }
  return labels;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
}

}  // namespace ktopo

namespace ktopo {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

KeyValues parse_key_values(const std::string& text) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ParseError("line " + std::to_string(line_no) + ": bad section");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    auto sep = t.find('=');
    if (sep == std::string::npos) sep = t.find(':');
    if (sep == std::string::npos) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(t).substr(0, sep));
    const std::string value = trim(std::string_view(t).substr(sep + 1));
    if (key.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty key");
    out[section.empty() ? key : section + "." + key] = value;
  }
  return out;
}

double parse_number(const std::string& key, const std::string& value) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError("key '" + key + "': invalid number '" + value + "'");
  }
  return v;
}

long parse_integer(const std::string& key, const std::string& value) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError("key '" + key + "': invalid integer '" + value + "'");
  }
  return v;
}

}  // namespace ktopo
