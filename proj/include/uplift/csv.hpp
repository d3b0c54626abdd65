#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "uplift/types.hpp"

namespace uplift {

// Shortest round-trip decimal rendering (std::to_chars). Reading a value
// back with parse_double recovers the exact same bits, which is what makes
// file-based pipeline stages reproducible.
std::string format_double(double v);

// Strict full-token parse; throws schema_error with `context` on failure.
// Accepts the forms std::from_chars does, including "nan" and "inf".
double parse_double(std::string_view token, const std::string& context);

// Strict integer parse for treatment flags and ids.
long long parse_int(std::string_view token, const std::string& context);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  Index find_column(const std::string& name) const;  // -1 when absent
};

// Plain comma-separated reader: no quoting or escaping, tolerant of CRLF
// and of a missing trailing newline. Every row must match the header width.
CsvTable read_csv_file(const std::filesystem::path& path);

// Writes via a sibling temp file plus rename so readers never observe a
// partially written artifact.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

}  // namespace uplift
