#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dfcn::io {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// RFC 4180-ish: comma separated, double-quoted fields may contain commas and
// doubled quotes. A trailing '\r' is stripped. Fields are returned unquoted.
std::vector<std::string> split_csv_line(std::string_view line);

CsvTable read_csv(const std::filesystem::path& path);

// Quotes a field only when it needs it.
std::string csv_field(std::string_view field);

// Shortest representation that parses back to the identical double.
std::string format_double(double value);

// Writes `content` to a sibling temp file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace dfcn::io
