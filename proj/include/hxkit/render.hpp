#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hxkit/cube.hpp"

namespace hxkit::render {

enum class Stretch { minmax, stddev2 };

Stretch parse_stretch(std::string_view name);

/// 8-bit raster, row-major, channels interleaved.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;
};

/// Linear stretch of one band to [0, 255]. minmax maps [min, max]; stddev2
/// maps [mean - 2 sd, mean + 2 sd] and clamps. A zero range renders as 128 and
/// nodata renders as 0.
std::vector<std::uint8_t> stretch_band(const HyperCube& cube, std::size_t band, Stretch stretch);

/// One band gives grayscale; three bands give RGB in the order given.
Image render(const HyperCube& cube, const std::vector<std::size_t>& bands, Stretch stretch);

/// Binary PGM (P5) or PPM (P6).
std::string encode_pnm(const Image& image);

bool png_available();

/// Format from the extension: .pgm / .ppm / .pnm, or .png when available.
void write_image(const std::filesystem::path& path, const Image& image);

}  // namespace hxkit::render
