#include "hxkit/csv.hpp"

#include <sstream>

#include "hxkit/detail/strings.hpp"
#include "hxkit/envi_io.hpp"
#include "hxkit/error.hpp"

namespace hxkit::csv {

Table parse(std::string_view text, bool has_header) {
  Table t;
  std::size_t pos = 0;
  bool header_pending = has_header;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = detail::trim(text.substr(pos, nl == std::string_view::npos ? nl : nl - pos));
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (line.empty() || line.front() == '#') continue;
    auto fields = detail::split(line, ',');
    if (header_pending) {
      t.columns = std::move(fields);
      header_pending = false;
      continue;
    }
    if (!t.columns.empty() && fields.size() != t.columns.size()) {
      throw Error(Errc::InvalidArgument, "CSV row " + std::to_string(t.rows.size() + 1) + " has " +
                                             std::to_string(fields.size()) + " fields, expected " +
                                             std::to_string(t.columns.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  return t;
}

Table read(const std::filesystem::path& path, bool has_header) {
  return parse(envi::read_file_text(path), has_header);
}

std::string format(const Table& table) {
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << fields[i];
    out << "\n";
  };
  if (!table.columns.empty()) line(table.columns);
  for (const auto& r : table.rows) line(r);
  return out.str();
}

void write(const std::filesystem::path& path, const Table& table) {
  envi::write_file_text(path, format(table));
}

double number(const Table& table, std::size_t row, std::size_t col) {
  const auto& field = table.rows.at(row).at(col);
  const auto v = detail::parse_double(field);
  if (!v) {
    throw Error(Errc::InvalidArgument, "CSV row " + std::to_string(row + 1) + " column " +
                                           std::to_string(col + 1) + ": '" + field + "' is not a number");
  }
  return *v;
}

}  // namespace hxkit::csv
