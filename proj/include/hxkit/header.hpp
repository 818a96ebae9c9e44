#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hxkit {

enum class DataType { u8, i16, u16, i32, f32, f64 };
enum class Interleave { bsq, bil, bip };
enum class ByteOrder { little, big };

/// ENVI "data type" code for each supported type: 1, 2, 12, 3, 4, 5.
int envi_code(DataType type) noexcept;
std::size_t byte_size(DataType type) noexcept;
bool is_integer(DataType type) noexcept;
std::string to_string(DataType type);
std::string to_string(Interleave interleave);
DataType parse_data_type_name(const std::string& name);
Interleave parse_interleave_name(const std::string& name);

/// Parsed ENVI header. Keys the toolkit does not interpret (map info aside)
/// live in `extra`, in file order, with their raw value text.
struct HeaderInfo {
  std::size_t samples = 0;
  std::size_t lines = 0;
  std::size_t bands = 0;
  DataType data_type = DataType::f32;
  Interleave interleave = Interleave::bsq;
  ByteOrder byte_order = ByteOrder::little;
  std::size_t header_offset = 0;

  std::optional<std::vector<double>> wavelengths;
  std::optional<std::vector<double>> fwhm;
  std::optional<std::vector<int>> bbl;
  std::optional<std::vector<std::string>> band_names;
  std::optional<std::string> wavelength_units;
  std::optional<std::string> map_info;
  std::optional<std::string> description;
  std::vector<std::pair<std::string, std::string>> extra;

  std::size_t element_count() const noexcept { return samples * lines * bands; }

  /// Raw (unparsed) value for a key from `extra`; key compared normalized.
  std::optional<std::string> extra_value(const std::string& key) const;
  void set_extra(const std::string& key, std::string value);
  void erase_extra(const std::string& key);

  /// Throws InvalidHeader/ListLength when an invariant is violated.
  void validate() const;

  bool operator==(const HeaderInfo&) const = default;
};

/// Lowercase, trim, and collapse internal whitespace runs to one space.
std::string normalize_key(const std::string& key);

}  // namespace hxkit
