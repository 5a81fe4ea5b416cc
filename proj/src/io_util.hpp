#pragma once
// Internal helpers shared by the library sources. Not installed.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "idcurate/error.hpp"
#include "json.hpp"

namespace idcurate::detail {

using ordered_json = nlohmann::ordered_json;

std::string read_text_file(const std::filesystem::path& path);
std::vector<char> read_binary_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename, creating parent directories.
void write_file(const std::filesystem::path& path, std::string_view bytes);

/// Parse JSON, converting parse failures to ParseError with line/column.
ordered_json parse_json(std::string_view text, const std::string& source);

/// Shortest round-trip decimal representation.
std::string format_double(double v);
std::string format_float(float v);

bool parse_double(std::string_view s, double& out);
bool parse_float(std::string_view s, float& out);

/// Minimal RFC 4180 field splitting (quotes and doubled quotes).
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);

std::vector<std::string> split_lines(std::string_view text);

// Field accessors that throw ValidationError naming the JSON path.
const ordered_json& require(const ordered_json& obj, const char* key, const std::string& path);
double require_number(const ordered_json& obj, const char* key, const std::string& path);
std::string require_string(const ordered_json& obj, const char* key, const std::string& path);

}  // namespace idcurate::detail
