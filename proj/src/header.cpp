#include "hxkit/header.hpp"

#include <algorithm>
#include <cctype>

#include "hxkit/error.hpp"

namespace hxkit {

int envi_code(DataType type) noexcept {
  switch (type) {
    case DataType::u8: return 1;
    case DataType::i16: return 2;
    case DataType::i32: return 3;
    case DataType::f32: return 4;
    case DataType::f64: return 5;
    case DataType::u16: return 12;
  }
  return 0;
}

std::size_t byte_size(DataType type) noexcept {
  switch (type) {
    case DataType::u8: return 1;
    case DataType::i16:
    case DataType::u16: return 2;
    case DataType::i32:
    case DataType::f32: return 4;
    case DataType::f64: return 8;
  }
  return 0;
}

bool is_integer(DataType type) noexcept {
  return type != DataType::f32 && type != DataType::f64;
}

std::string to_string(DataType type) {
  switch (type) {
    case DataType::u8: return "u8";
    case DataType::i16: return "i16";
    case DataType::u16: return "u16";
    case DataType::i32: return "i32";
    case DataType::f32: return "f32";
    case DataType::f64: return "f64";
  }
  return "?";
}

std::string to_string(Interleave interleave) {
  switch (interleave) {
    case Interleave::bsq: return "bsq";
    case Interleave::bil: return "bil";
    case Interleave::bip: return "bip";
  }
  return "?";
}

DataType parse_data_type_name(const std::string& name) {
  const std::string n = normalize_key(name);
  if (n == "u8" || n == "byte") return DataType::u8;
  if (n == "i16" || n == "int16") return DataType::i16;
  if (n == "u16" || n == "uint16") return DataType::u16;
  if (n == "i32" || n == "int32") return DataType::i32;
  if (n == "f32" || n == "float32" || n == "float") return DataType::f32;
  if (n == "f64" || n == "float64" || n == "double") return DataType::f64;
  throw Error(Errc::InvalidArgument, "unknown data type name '" + name + "'");
}

Interleave parse_interleave_name(const std::string& name) {
  const std::string n = normalize_key(name);
  if (n == "bsq") return Interleave::bsq;
  if (n == "bil") return Interleave::bil;
  if (n == "bip") return Interleave::bip;
  throw Error(Errc::InvalidArgument, "unknown interleave '" + name + "'");
}

std::string normalize_key(const std::string& key) {
  std::string out;
  out.reserve(key.size());
  bool pending_space = false;
  for (unsigned char ch : key) {
    if (std::isspace(ch)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(ch)));
  }
  return out;
}

std::optional<std::string> HeaderInfo::extra_value(const std::string& key) const {
  const std::string k = normalize_key(key);
  for (auto it = extra.rbegin(); it != extra.rend(); ++it) {
    if (normalize_key(it->first) == k) return it->second;
  }
  return std::nullopt;
}

void HeaderInfo::set_extra(const std::string& key, std::string value) {
  const std::string k = normalize_key(key);
  for (auto& [name, v] : extra) {
    if (normalize_key(name) == k) {
      v = std::move(value);
      return;
    }
  }
  extra.emplace_back(key, std::move(value));
}

void HeaderInfo::erase_extra(const std::string& key) {
  const std::string k = normalize_key(key);
  std::erase_if(extra, [&](const auto& kv) { return normalize_key(kv.first) == k; });
}

void HeaderInfo::validate() const {
  if (samples == 0 || lines == 0 || bands == 0) {
    throw Error(Errc::InvalidHeader, "samples, lines and bands must be positive");
  }
  auto check_len = [&](std::size_t n, const char* name) {
    if (n != bands) {
      throw Error(Errc::ListLength, std::string(name) + " has " + std::to_string(n) +
                                        " entries, expected " + std::to_string(bands));
    }
  };
  if (wavelengths) {
    check_len(wavelengths->size(), "wavelength");
    for (std::size_t i = 1; i < wavelengths->size(); ++i) {
      if (!((*wavelengths)[i] > (*wavelengths)[i - 1])) {
        throw Error(Errc::InvalidHeader, "wavelengths must be strictly increasing");
      }
    }
  }
  if (fwhm) check_len(fwhm->size(), "fwhm");
  if (band_names) check_len(band_names->size(), "band names");
  if (bbl) {
    check_len(bbl->size(), "bbl");
    for (int v : *bbl) {
      if (v != 0 && v != 1) throw Error(Errc::InvalidHeader, "bbl entries must be 0 or 1");
    }
  }
}

}  // namespace hxkit
