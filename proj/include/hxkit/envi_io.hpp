#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hxkit/cube.hpp"
#include "hxkit/error.hpp"
#include "hxkit/header.hpp"

namespace hxkit::envi {

/// Parses ENVI header text. Keys are matched case-insensitively with
/// whitespace collapsed; brace lists may span lines; a repeated key keeps the
/// last value and records a warning.
HeaderInfo parse_header(std::string_view text, Warnings* warnings = nullptr);

/// Inverse of parse_header: parse_header(emit_header(h)) == h.
std::string emit_header(const HeaderInfo& header);

struct ReadSummary {
  std::size_t nonfinite_values = 0;
};

/// Decodes a flat payload to a cube. Honors header offset, interleave and
/// byte order. Non-finite floats are kept and counted in `summary`.
/// The "data ignore value" key, if present, becomes the cube's nodata.
HyperCube read_cube(const HeaderInfo& header, std::span<const std::byte> payload,
                    ReadSummary* summary = nullptr);

struct EnviFile {
  std::string header_text;
  std::vector<std::byte> payload;
};

struct WriteOptions {
  Interleave interleave = Interleave::bsq;
  DataType data_type = DataType::f32;
  ByteOrder byte_order = ByteOrder::little;
  /// Round and clamp into integer targets instead of failing with OutOfRange.
  bool quantize = false;
};

EnviFile write_cube(const HyperCube& cube, const WriteOptions& options);

inline EnviFile write_cube(const HyperCube& cube, Interleave interleave, DataType data_type) {
  return write_cube(cube, WriteOptions{interleave, data_type});
}

/// Pure element permutation of the payload into `target` interleave. The
/// header offset prefix is carried over unchanged.
std::vector<std::byte> convert_interleave(const HeaderInfo& header,
                                          std::span<const std::byte> payload, Interleave target);

/// Wavelengths in nanometers, converting from micrometers when the header
/// declares them so.
std::optional<std::vector<double>> wavelengths_nm(const HeaderInfo& header);

// File helpers.

/// "scene.hdr" -> first existing of "scene", "scene.img", "scene.dat",
/// "scene.raw", "scene.bsq", "scene.bil", "scene.bip"; falls back to "scene".
std::filesystem::path infer_data_path(const std::filesystem::path& header_path);

HeaderInfo load_header(const std::filesystem::path& header_path, Warnings* warnings = nullptr);

HyperCube load_cube(const std::filesystem::path& header_path,
                    const std::optional<std::filesystem::path>& data_path = std::nullopt,
                    ReadSummary* summary = nullptr, Warnings* warnings = nullptr);

/// Writes `<stem>.hdr` and the data file next to it (header path minus ".hdr",
/// plus ".img"). Returns the data path.
std::filesystem::path save_cube(const std::filesystem::path& header_path, const HyperCube& cube,
                                const WriteOptions& options = {});

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);
void write_file_text(const std::filesystem::path& path, std::string_view text);

}  // namespace hxkit::envi
