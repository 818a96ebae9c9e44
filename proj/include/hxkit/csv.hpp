#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hxkit::csv {

/// Comma-separated table. Blank lines and lines starting with '#' are skipped;
/// fields are whitespace-trimmed. No quoting support.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

Table parse(std::string_view text, bool has_header = true);
Table read(const std::filesystem::path& path, bool has_header = true);
std::string format(const Table& table);
void write(const std::filesystem::path& path, const Table& table);

/// Numeric field or Errc::InvalidArgument naming the row and column.
double number(const Table& table, std::size_t row, std::size_t col);

}  // namespace hxkit::csv
