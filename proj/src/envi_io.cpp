#include "hxkit/envi_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "hxkit/detail/strings.hpp"

namespace hxkit::envi {

using detail::trim;

namespace {

constexpr const char* kIgnoreKey = "data ignore value";

struct RawEntry {
  std::string key;    // as written, trimmed
  std::string value;  // raw text; brace lists keep their braces
};

// Splits header text into key/value entries, joining brace lists that span lines.
std::vector<RawEntry> tokenize(std::string_view text, Warnings* warnings) {
  std::vector<RawEntry> entries;
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    const auto nl = text.find('\n', pos);
    line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    return true;
  };

  std::string_view line;
  if (!next_line(line) || trim(line).substr(0, 4) != "ENVI") {
    throw Error(Errc::InvalidHeader, "header text must begin with 'ENVI'");
  }
  // Anything after "ENVI" on the first line is ignored.
  while (next_line(line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == ';') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      warn(warnings, "ignoring header line without '=': " + std::string(t));
      continue;
    }
    RawEntry e{std::string(trim(t.substr(0, eq))), std::string(trim(t.substr(eq + 1)))};
    if (!e.value.empty() && e.value.front() == '{') {
      int depth = 0;
      auto count = [&](std::string_view s) {
        for (char ch : s) {
          if (ch == '{') ++depth;
          if (ch == '}') --depth;
        }
      };
      count(e.value);
      while (depth > 0) {
        std::string_view more;
        if (!next_line(more)) {
          throw Error(Errc::MalformedList, "unterminated brace list for key '" + e.key + "'");
        }
        e.value += '\n';
        e.value += std::string(trim(more));
        count(trim(more));
      }
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::string brace_inner(const std::string& value, const std::string& key) {
  const auto t = trim(value);
  if (t.size() < 2 || t.front() != '{' || t.back() != '}') {
    throw Error(Errc::MalformedList, "expected a {...} list for key '" + key + "'");
  }
  return std::string(trim(t.substr(1, t.size() - 2)));
}

std::vector<std::string> brace_items(const std::string& value, const std::string& key) {
  const std::string inner = brace_inner(value, key);
  if (inner.empty()) return {};
  auto items = detail::split(inner, ',');
  return items;
}

std::vector<double> brace_doubles(const std::string& value, const std::string& key) {
  std::vector<double> out;
  for (const auto& item : brace_items(value, key)) {
    const auto v = detail::parse_double(item);
    if (!v) throw Error(Errc::MalformedList, "non-numeric entry '" + item + "' in '" + key + "'");
    out.push_back(*v);
  }
  return out;
}

std::size_t parse_count(const std::string& value, const std::string& key, bool allow_zero) {
  const auto v = detail::parse_int(value);
  if (!v || *v < 0 || (!allow_zero && *v == 0)) {
    throw Error(Errc::InvalidHeader, "invalid value '" + value + "' for key '" + key + "'");
  }
  return static_cast<std::size_t>(*v);
}

DataType data_type_from_code(const std::string& value) {
  const auto code = detail::parse_int(value);
  if (!code) throw Error(Errc::InvalidHeader, "invalid data type '" + value + "'");
  switch (*code) {
    case 1: return DataType::u8;
    case 2: return DataType::i16;
    case 3: return DataType::i32;
    case 4: return DataType::f32;
    case 5: return DataType::f64;
    case 12: return DataType::u16;
    case 6:
    case 9:
    case 13:
    case 14:
    case 15:
      throw Error(Errc::Unsupported, "ENVI data type " + value + " is not supported");
    default:
      throw Error(Errc::UnknownDataType, "unknown ENVI data type code " + value);
  }
}

std::string join_numbers(const std::vector<double>& v) {
  std::string out = "{";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += detail::format_shortest(v[i]);
  }
  return out + "}";
}

std::size_t file_index(const HeaderInfo& h, Interleave il, std::size_t r, std::size_t c,
                       std::size_t b) {
  switch (il) {
    case Interleave::bsq: return (b * h.lines + r) * h.samples + c;
    case Interleave::bil: return (r * h.bands + b) * h.samples + c;
    case Interleave::bip: return (r * h.samples + c) * h.bands + b;
  }
  return 0;
}

bool host_matches(ByteOrder order) {
  return (order == ByteOrder::little) == (std::endian::native == std::endian::little);
}

template <typename T>
double decode(const std::byte* p, bool swap) {
  std::byte tmp[sizeof(T)];
  std::memcpy(tmp, p, sizeof(T));
  if (swap) std::reverse(tmp, tmp + sizeof(T));
  T v;
  std::memcpy(&v, tmp, sizeof(T));
  return static_cast<double>(v);
}

template <typename T>
void encode(double value, std::byte* p, bool swap) {
  const T v = static_cast<T>(value);
  std::memcpy(p, &v, sizeof(T));
  if (swap) std::reverse(p, p + sizeof(T));
}

double decode_value(DataType t, const std::byte* p, bool swap) {
  switch (t) {
    case DataType::u8: return decode<std::uint8_t>(p, swap);
    case DataType::i16: return decode<std::int16_t>(p, swap);
    case DataType::u16: return decode<std::uint16_t>(p, swap);
    case DataType::i32: return decode<std::int32_t>(p, swap);
    case DataType::f32: return decode<float>(p, swap);
    case DataType::f64: return decode<double>(p, swap);
  }
  return 0.0;
}

void encode_value(DataType t, double v, std::byte* p, bool swap) {
  switch (t) {
    case DataType::u8: encode<std::uint8_t>(v, p, swap); break;
    case DataType::i16: encode<std::int16_t>(v, p, swap); break;
    case DataType::u16: encode<std::uint16_t>(v, p, swap); break;
    case DataType::i32: encode<std::int32_t>(v, p, swap); break;
    case DataType::f32: encode<float>(v, p, swap); break;
    case DataType::f64: encode<double>(v, p, swap); break;
  }
}

std::pair<double, double> integer_range(DataType t) {
  switch (t) {
    case DataType::u8: return {0.0, 255.0};
    case DataType::i16: return {-32768.0, 32767.0};
    case DataType::u16: return {0.0, 65535.0};
    case DataType::i32: return {-2147483648.0, 2147483647.0};
    default: return {-std::numeric_limits<double>::infinity(),
                     std::numeric_limits<double>::infinity()};
  }
}

// Value as it will be stored in the target type, or OutOfRange.
double representable(double v, DataType t, bool quantize) {
  if (t == DataType::f64) return v;
  if (t == DataType::f32) {
    if (std::isfinite(v) && std::abs(v) > std::numeric_limits<float>::max()) {
      throw Error(Errc::OutOfRange, "value " + detail::format_shortest(v) + " overflows f32");
    }
    return v;
  }
  const auto [lo, hi] = integer_range(t);
  if (!std::isfinite(v)) {
    throw Error(Errc::OutOfRange, "non-finite value cannot be stored as " + to_string(t));
  }
  if (quantize) return std::clamp(std::nearbyint(v), lo, hi);
  if (v < lo || v > hi || v != std::nearbyint(v)) {
    throw Error(Errc::OutOfRange, "value " + detail::format_shortest(v) + " not representable as " +
                                      to_string(t) + " without quantization");
  }
  return v;
}

void check_payload(const HeaderInfo& h, std::span<const std::byte> payload) {
  const std::size_t need = h.header_offset + h.element_count() * byte_size(h.data_type);
  if (payload.size() < need) {
    throw Error(Errc::Truncated, "payload has " + std::to_string(payload.size()) +
                                     " bytes, header requires " + std::to_string(need));
  }
}

}  // namespace

HeaderInfo parse_header(std::string_view text, Warnings* warnings) {
  const auto entries = tokenize(text, warnings);

  // Last occurrence wins.
  std::map<std::string, std::size_t> last;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto key = normalize_key(entries[i].key);
    if (last.count(key)) warn(warnings, "duplicate header key '" + key + "', last value wins");
    last[key] = i;
  }
  auto get = [&](const char* key) -> const RawEntry* {
    const auto it = last.find(key);
    return it == last.end() ? nullptr : &entries[it->second];
  };
  auto require = [&](const char* key) -> const std::string& {
    const RawEntry* e = get(key);
    if (!e) throw Error(Errc::MissingKey, key);
    return e->value;
  };

  HeaderInfo h;
  h.samples = parse_count(require("samples"), "samples", false);
  h.lines = parse_count(require("lines"), "lines", false);
  h.bands = parse_count(require("bands"), "bands", false);
  h.data_type = data_type_from_code(require("data type"));
  h.interleave = parse_interleave_name(require("interleave"));
  {
    const auto& v = require("byte order");
    const auto code = detail::parse_int(v);
    if (!code || (*code != 0 && *code != 1)) {
      throw Error(Errc::InvalidHeader, "byte order must be 0 or 1, got '" + v + "'");
    }
    h.byte_order = *code == 0 ? ByteOrder::little : ByteOrder::big;
  }
  if (const auto* e = get("header offset")) h.header_offset = parse_count(e->value, "header offset", true);
  if (const auto* e = get("wavelength")) h.wavelengths = brace_doubles(e->value, "wavelength");
  if (const auto* e = get("fwhm")) h.fwhm = brace_doubles(e->value, "fwhm");
  if (const auto* e = get("bbl")) {
    std::vector<int> bbl;
    for (double v : brace_doubles(e->value, "bbl")) bbl.push_back(static_cast<int>(v));
    h.bbl = std::move(bbl);
  }
  if (const auto* e = get("band names")) h.band_names = brace_items(e->value, "band names");
  if (const auto* e = get("wavelength units")) h.wavelength_units = e->value;
  if (const auto* e = get("map info")) h.map_info = brace_inner(e->value, "map info");
  if (const auto* e = get("description")) {
    const auto t = trim(e->value);
    h.description = (t.size() >= 2 && t.front() == '{') ? brace_inner(e->value, "description")
                                                         : std::string(t);
  }

  static const char* known[] = {"samples",   "lines",       "bands",     "data type",
                                "interleave", "byte order", "header offset", "wavelength",
                                "fwhm",      "bbl",         "band names", "wavelength units",
                                "map info",  "description"};
  // Unknown keys keep file order of their winning occurrence.
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto key = normalize_key(entries[i].key);
    if (std::find(std::begin(known), std::end(known), key) != std::end(known)) continue;
    if (last[key] != i) continue;
    h.extra.emplace_back(entries[i].key, entries[i].value);
  }

  h.validate();
  return h;
}

std::string emit_header(const HeaderInfo& h) {
  std::ostringstream out;
  out << "ENVI\n";
  if (h.description) out << "description = {" << *h.description << "}\n";
  out << "samples = " << h.samples << "\n";
  out << "lines = " << h.lines << "\n";
  out << "bands = " << h.bands << "\n";
  out << "header offset = " << h.header_offset << "\n";
  out << "data type = " << envi_code(h.data_type) << "\n";
  out << "interleave = " << to_string(h.interleave) << "\n";
  out << "byte order = " << (h.byte_order == ByteOrder::little ? 0 : 1) << "\n";
  if (h.wavelength_units) out << "wavelength units = " << *h.wavelength_units << "\n";
  if (h.map_info) out << "map info = {" << *h.map_info << "}\n";
  if (h.band_names) {
    out << "band names = {";
    for (std::size_t i = 0; i < h.band_names->size(); ++i) {
      out << (i ? ", " : "") << (*h.band_names)[i];
    }
    out << "}\n";
  }
  if (h.wavelengths) out << "wavelength = " << join_numbers(*h.wavelengths) << "\n";
  if (h.fwhm) out << "fwhm = " << join_numbers(*h.fwhm) << "\n";
  if (h.bbl) {
    out << "bbl = {";
    for (std::size_t i = 0; i < h.bbl->size(); ++i) out << (i ? ", " : "") << (*h.bbl)[i];
    out << "}\n";
  }
  for (const auto& [key, value] : h.extra) out << key << " = " << value << "\n";
  return out.str();
}

HyperCube read_cube(const HeaderInfo& header, std::span<const std::byte> payload,
                    ReadSummary* summary) {
  header.validate();
  check_payload(header, payload);
  const bool swap = !host_matches(header.byte_order);
  const std::size_t size = byte_size(header.data_type);
  const std::byte* base = payload.data() + header.header_offset;

  std::vector<double> values(header.element_count());
  std::size_t nonfinite = 0;
  std::size_t out = 0;
  for (std::size_t r = 0; r < header.lines; ++r) {
    for (std::size_t c = 0; c < header.samples; ++c) {
      for (std::size_t b = 0; b < header.bands; ++b) {
        const double v =
            decode_value(header.data_type, base + file_index(header, header.interleave, r, c, b) * size, swap);
        if (!std::isfinite(v)) ++nonfinite;
        values[out++] = v;
      }
    }
  }
  if (summary) summary->nonfinite_values = nonfinite;

  HeaderInfo h = header;
  std::optional<double> nodata;
  if (const auto raw = h.extra_value(kIgnoreKey)) {
    nodata = detail::parse_double(*raw);
    if (!nodata) throw Error(Errc::InvalidHeader, "invalid data ignore value '" + *raw + "'");
    h.erase_extra(kIgnoreKey);
  }
  return HyperCube(std::move(h), std::move(values), nodata);
}

EnviFile write_cube(const HyperCube& cube, const WriteOptions& options) {
  HeaderInfo h = cube.header();
  h.interleave = options.interleave;
  h.data_type = options.data_type;
  h.byte_order = options.byte_order;
  h.header_offset = 0;
  h.erase_extra(kIgnoreKey);
  if (cube.nodata()) {
    const double nd = representable(*cube.nodata(), options.data_type, false);
    h.extra.emplace_back(kIgnoreKey, detail::format_shortest(nd));
  }

  const bool swap = !host_matches(options.byte_order);
  const std::size_t size = byte_size(options.data_type);
  std::vector<std::byte> payload(h.element_count() * size);
  for (std::size_t r = 0; r < h.lines; ++r) {
    for (std::size_t c = 0; c < h.samples; ++c) {
      const auto px = cube.pixel(r, c);
      for (std::size_t b = 0; b < h.bands; ++b) {
        const double v = representable(px[b], options.data_type, options.quantize);
        encode_value(options.data_type, v, payload.data() + file_index(h, h.interleave, r, c, b) * size,
                     swap);
      }
    }
  }
  return {emit_header(h), std::move(payload)};
}

std::vector<std::byte> convert_interleave(const HeaderInfo& header,
                                          std::span<const std::byte> payload, Interleave target) {
  header.validate();
  check_payload(header, payload);
  const std::size_t size = byte_size(header.data_type);
  std::vector<std::byte> out(header.header_offset + header.element_count() * size);
  std::copy_n(payload.begin(), header.header_offset, out.begin());
  const std::byte* src = payload.data() + header.header_offset;
  std::byte* dst = out.data() + header.header_offset;
  for (std::size_t r = 0; r < header.lines; ++r) {
    for (std::size_t c = 0; c < header.samples; ++c) {
      for (std::size_t b = 0; b < header.bands; ++b) {
        std::memcpy(dst + file_index(header, target, r, c, b) * size,
                    src + file_index(header, header.interleave, r, c, b) * size, size);
      }
    }
  }
  return out;
}

std::optional<std::vector<double>> wavelengths_nm(const HeaderInfo& header) {
  if (!header.wavelengths) return std::nullopt;
  auto w = *header.wavelengths;
  if (header.wavelength_units) {
    const auto u = normalize_key(*header.wavelength_units);
    if (u == "micrometers" || u == "micrometer" || u == "microns" || u == "um") {
      for (double& v : w) v *= 1000.0;
    }
  }
  return w;
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::byte> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw Error(Errc::Io, "failed reading " + path.string());
  return bytes;
}

std::string read_file_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::Io, "failed writing " + path.string());
}

void write_file_text(const std::filesystem::path& path, std::string_view text) {
  write_file_bytes(path, std::as_bytes(std::span(text.data(), text.size())));
}

std::filesystem::path infer_data_path(const std::filesystem::path& header_path) {
  std::filesystem::path stem = header_path;
  if (normalize_key(stem.extension().string()) == ".hdr") stem.replace_extension();
  for (const char* ext : {"", ".img", ".dat", ".raw", ".bsq", ".bil", ".bip"}) {
    std::filesystem::path candidate = stem;
    candidate += ext;
    if (std::filesystem::is_regular_file(candidate)) return candidate;
  }
  return stem;
}

HeaderInfo load_header(const std::filesystem::path& header_path, Warnings* warnings) {
  return parse_header(read_file_text(header_path), warnings);
}

HyperCube load_cube(const std::filesystem::path& header_path,
                    const std::optional<std::filesystem::path>& data_path, ReadSummary* summary,
                    Warnings* warnings) {
  const HeaderInfo h = load_header(header_path, warnings);
  const auto bytes = read_file_bytes(data_path ? *data_path : infer_data_path(header_path));
  return read_cube(h, bytes, summary);
}

std::filesystem::path save_cube(const std::filesystem::path& header_path, const HyperCube& cube,
                                const WriteOptions& options) {
  const EnviFile file = write_cube(cube, options);
  std::filesystem::path data = header_path;
  if (normalize_key(data.extension().string()) == ".hdr") data.replace_extension();
  data += ".img";
  write_file_text(header_path, file.header_text);
  write_file_bytes(data, file.payload);
  return data;
}

}  // namespace hxkit::envi
