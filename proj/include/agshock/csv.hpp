#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace agshock {

// Header row plus string cells. Comma-delimited, optional double-quoted
// cells, `\n` or `\r\n` line endings; blank lines are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column_index(std::string_view name) const;
};

CsvTable parse_csv_table(std::string_view text);

std::string_view trim(std::string_view s);
std::optional<double> parse_double(std::string_view s);
// 12 significant digits, the precision used by every CSV artifact.
std::string format_number(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace agshock
