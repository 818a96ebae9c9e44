#include "hxkit/report.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <sstream>

#include "hxkit/detail/strings.hpp"
#include "hxkit/envi_io.hpp"
#include "hxkit/error.hpp"

namespace hxkit::report {

std::string format_number(double value) { return detail::format_g10(value); }

namespace {

void emit(std::string& out, const nlohmann::json& v) {
  switch (v.type()) {
    case nlohmann::json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {  // std::map keeps keys sorted
        if (!first) out += ',';
        first = false;
        out += nlohmann::json(it.key()).dump();
        out += ':';
        emit(out, it.value());
      }
      out += '}';
      break;
    }
    case nlohmann::json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        emit(out, v[i]);
      }
      out += ']';
      break;
    }
    case nlohmann::json::value_t::number_float: {
      const double d = v.get<double>();
      // -0 would re-parse as the integer 0.
      out += !std::isfinite(d) ? "null" : d == 0.0 ? "0" : format_number(d);
      break;
    }
    default:
      out += v.dump();
  }
}

std::string escape_html(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string cell_text(const nlohmann::json& v) {
  if (v.is_string()) return escape_html(v.get<std::string>());
  if (v.is_number_float()) {
    const double d = v.get<double>();
    return std::isfinite(d) ? format_number(d) : "null";
  }
  std::string out;
  emit(out, v);
  return escape_html(out);
}

}  // namespace

std::string canonical_json(const nlohmann::json& value) {
  std::string out;
  emit(out, value);
  return out;
}

nlohmann::json AnalysisReport::to_json() const {
  nlohmann::json j;
  j["tool"] = tool;
  j["parameters"] = parameters;
  nlohmann::json m = nlohmann::json::object();
  for (const auto& [k, v] : metrics) m[k] = v;
  j["metrics"] = m;
  nlohmann::json ts = nlohmann::json::array();
  for (const auto& t : tables) {
    nlohmann::json jt;
    jt["name"] = t.name;
    jt["columns"] = t.columns;
    jt["rows"] = t.rows;
    ts.push_back(std::move(jt));
  }
  j["tables"] = ts;
  nlohmann::json d = nlohmann::json::object();
  for (const auto& [k, v] : input_digests) d[k] = v;
  j["inputs"] = d;
  if (timestamp) j["timestamp"] = *timestamp;
  return j;
}

AnalysisReport AnalysisReport::from_json(const nlohmann::json& j) {
  AnalysisReport r;
  try {
    r.tool = j.at("tool").get<std::string>();
    r.parameters = j.value("parameters", nlohmann::json::object());
    const nlohmann::json metrics = j.value("metrics", nlohmann::json::object());
    for (const auto& [k, v] : metrics.items())
      r.metrics[k] = v.is_null() ? std::nan("") : v.get<double>();
    for (const auto& jt : j.value("tables", nlohmann::json::array())) {
      Table t;
      t.name = jt.at("name").get<std::string>();
      t.columns = jt.at("columns").get<std::vector<std::string>>();
      for (const auto& row : jt.at("rows")) t.rows.push_back(row.get<std::vector<nlohmann::json>>());
      r.tables.push_back(std::move(t));
    }
    const nlohmann::json inputs = j.value("inputs", nlohmann::json::object());
    for (const auto& [k, v] : inputs.items())
      r.input_digests[k] = v.get<std::string>();
    if (j.contains("timestamp")) r.timestamp = j["timestamp"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("report JSON: ") + e.what());
  }
  return r;
}

std::string render_html(const AnalysisReport& r) {
  std::ostringstream os;
  os << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>" << escape_html(r.tool)
     << " report</title>\n<style>table{border-collapse:collapse;margin-bottom:1em}"
        "td,th{border:1px solid #999;padding:2px 6px;text-align:right}</style></head>\n<body>\n";
  os << "<h1>" << escape_html(r.tool) << "</h1>\n";
  if (r.timestamp) os << "<p>Generated " << escape_html(*r.timestamp) << "</p>\n";

  os << "<h2>Parameters</h2>\n<table>\n<tr><th>name</th><th>value</th></tr>\n";
  for (auto it = r.parameters.begin(); it != r.parameters.end(); ++it)
    os << "<tr><td>" << escape_html(it.key()) << "</td><td>" << cell_text(it.value()) << "</td></tr>\n";
  os << "</table>\n";

  os << "<h2>Metrics</h2>\n<table>\n<tr><th>metric</th><th>value</th></tr>\n";
  for (const auto& [k, v] : r.metrics)
    os << "<tr><td>" << escape_html(k) << "</td><td>" << cell_text(nlohmann::json(v)) << "</td></tr>\n";
  os << "</table>\n";

  for (const auto& t : r.tables) {
    os << "<h2>" << escape_html(t.name) << "</h2>\n<table>\n<tr>";
    for (const auto& c : t.columns) os << "<th>" << escape_html(c) << "</th>";
    os << "</tr>\n";
    for (const auto& row : t.rows) {
      os << "<tr>";
      for (const auto& cell : row) os << "<td>" << cell_text(cell) << "</td>";
      os << "</tr>\n";
    }
    os << "</table>\n";
  }

  os << "<h2>Inputs</h2>\n<table>\n<tr><th>path</th><th>sha256</th></tr>\n";
  for (const auto& [k, v] : r.input_digests)
    os << "<tr><td>" << escape_html(k) << "</td><td>" << escape_html(v) << "</td></tr>\n";
  os << "</table>\n</body></html>\n";
  return os.str();
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(Errc::Io, "sha256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  const std::vector<std::byte> bytes = envi::read_file_bytes(path);
  return sha256_hex({reinterpret_cast<const char*>(bytes.data()), bytes.size()});
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::filesystem::path> emit_report(const AnalysisReport& report,
                                               const std::filesystem::path& stem, bool json,
                                               bool html) {
  std::vector<std::filesystem::path> written;
  if (json) {
    std::filesystem::path p = stem;
    p += ".json";
    envi::write_file_text(p, canonical_json(report.to_json()) + "\n");
    written.push_back(p);
  }
  if (html) {
    std::filesystem::path p = stem;
    p += ".html";
    envi::write_file_text(p, render_html(report));
    written.push_back(p);
  }
  return written;
}

}  // namespace hxkit::report
