#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gazealign::io {

/// Reads a whole file; gzip-compressed files are inflated transparently.
/// Throws InputError if the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes `content` atomically enough for our purposes (truncate + write).
void write_file(const std::filesystem::path& path, std::string_view content);

/// Writes gzip-compressed content.
void write_gzip_file(const std::filesystem::path& path, std::string_view content);

/// Splits on '\n', dropping a trailing '\r' per line. Keeps empty lines so
/// line numbers stay meaningful.
std::vector<std::string_view> split_lines(std::string_view text);

/// Splits one delimited row. No quoting: fields in our formats never contain
/// the delimiter.
std::vector<std::string_view> split_fields(std::string_view line, char delim);

/// Picks ',' or '\t' by looking at the first non-empty line.
char sniff_delimiter(std::string_view text);

std::string_view trim(std::string_view s);

/// Strict numeric parses; return false on trailing garbage or empty input.
bool parse_double(std::string_view s, double& out);
bool parse_int(std::string_view s, long long& out);
bool parse_bool(std::string_view s, bool& out);

/// Shortest decimal text that round-trips the double exactly.
std::string format_double(double v);

/// Hex SHA-256 of a file's raw bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view data);

}  // namespace gazealign::io
