#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ktopo {

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double value);

std::string trim(std::string_view text);

/// Parses "0-9, 12 14-15" into an ascending, de-duplicated index list. Ranges are inclusive.
std::vector<int> parse_index_list(std::string_view text);

/// `elementIndex value` per line.
void write_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels);
std::vector<std::uint8_t> read_labels(const std::filesystem::path& path, int expected_count);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

/// Flat `key = value` (or `key: value`) text with optional `[section]` headers; keys inside a
/// section are returned as "section.key". `#` starts a comment line.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(const std::string& text);

double parse_number(const std::string& key, const std::string& value);
long parse_integer(const std::string& key, const std::string& value);

}  // namespace ktopo
