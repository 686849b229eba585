#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace iohfuse {

/// Shortest decimal text that parses back to exactly `v` ("nan" for NaN).
std::string format_double(double v);
/// Strict full-string parse; throws ParseError.
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::string read_text(const std::filesystem::path& path);
/// Writes through a temporary file and rename, creating parent directories.
void write_text(const std::filesystem::path& path, std::string_view content);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);

std::vector<std::string_view> split(std::string_view s, char sep);

}  // namespace iohfuse
