#pragma once

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace hxkit::report {

/// Cells are numbers or text.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<nlohmann::json>> rows;
};

struct AnalysisReport {
  std::string tool;
  nlohmann::json parameters = nlohmann::json::object();
  std::map<std::string, double> metrics;
  std::vector<Table> tables;
  std::map<std::string, std::string> input_digests;  // path -> sha256 hex
  std::optional<std::string> timestamp;              // only when requested

  nlohmann::json to_json() const;
  static AnalysisReport from_json(const nlohmann::json& j);
};

/// Sorted keys, no whitespace, floats as %.10g, non-finite numbers as null.
std::string canonical_json(const nlohmann::json& value);

/// Number formatting shared by the JSON and HTML outputs.
std::string format_number(double value);

/// Self-contained HTML: headings and tables only.
std::string render_html(const AnalysisReport& report);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// UTC ISO-8601 timestamp of the current time.
std::string utc_timestamp();

/// Writes <stem>.json and/or <stem>.html; returns the written paths.
std::vector<std::filesystem::path> emit_report(const AnalysisReport& report,
                                               const std::filesystem::path& stem, bool json,
                                               bool html);

}  // namespace hxkit::report
