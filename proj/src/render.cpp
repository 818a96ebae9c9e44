#include "hxkit/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "hxkit/envi_io.hpp"
#include "hxkit/error.hpp"

#ifdef HXKIT_HAVE_PNG
#include <png.h>
#endif

namespace hxkit::render {

Stretch parse_stretch(std::string_view name) {
  if (name == "minmax") return Stretch::minmax;
  if (name == "stddev2") return Stretch::stddev2;
  throw Error(Errc::InvalidArgument, "unknown stretch '" + std::string(name) + "'");
}

std::vector<std::uint8_t> stretch_band(const HyperCube& cube, std::size_t band, Stretch stretch) {
  if (band >= cube.bands()) throw Error(Errc::OutOfRange, "band " + std::to_string(band) + " out of range");
  const std::size_t n = cube.pixel_count(), B = cube.bands();
  const auto& v = cube.values();
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = v[i * B + band];
    if (cube.is_nodata_value(x) || !std::isfinite(x)) continue;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    sum += x;
    ++count;
  }
  if (count && stretch == Stretch::stddev2) {
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = v[i * B + band];
      if (cube.is_nodata_value(x) || !std::isfinite(x)) continue;
      ss += (x - mean) * (x - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(count));
    lo = mean - 2.0 * sd;
    hi = mean + 2.0 * sd;
  }
  std::vector<std::uint8_t> out(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = v[i * B + band];
    if (cube.is_nodata_value(x) || !std::isfinite(x)) continue;
    if (!(hi > lo)) {
      out[i] = 128;
      continue;
    }
    const double t = std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
    out[i] = static_cast<std::uint8_t>(std::lround(t * 255.0));
  }
  return out;
}

Image render(const HyperCube& cube, const std::vector<std::size_t>& bands, Stretch stretch) {
  if (bands.size() != 1 && bands.size() != 3)
    throw Error(Errc::InvalidArgument, "render needs one band or an RGB triplet");
  Image img{cube.samples(), cube.lines(), bands.size(), {}};
  img.pixels.resize(img.width * img.height * img.channels);
  for (std::size_t c = 0; c < bands.size(); ++c) {
    const auto ch = stretch_band(cube, bands[c], stretch);
    for (std::size_t i = 0; i < ch.size(); ++i) img.pixels[i * img.channels + c] = ch[i];
  }
  return img;
}

std::string encode_pnm(const Image& image) {
  std::string out = (image.channels == 1 ? "P5\n" : "P6\n") + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

bool png_available() {
#ifdef HXKIT_HAVE_PNG
  return true;
#else
  return false;
#endif
}

namespace {

#ifdef HXKIT_HAVE_PNG
void write_png(const std::filesystem::path& path, const Image& image) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw Error(Errc::Io, "cannot open " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error(Errc::Io, "PNG encoding failed for " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < image.height; ++r)
    png_write_row(png, const_cast<png_bytep>(image.pixels.data() + r * image.width * image.channels));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}
#endif

}  // namespace

void write_image(const std::filesystem::path& path, const Image& image) {
  const std::string ext = path.extension().string();
  if (ext == ".png") {
#ifdef HXKIT_HAVE_PNG
    write_png(path, image);
    return;
#else
    throw Error(Errc::Unsupported, "PNG output not available in this build; use .pgm or .ppm");
#endif
  }
  if (ext != ".pgm" && ext != ".ppm" && ext != ".pnm")
    throw Error(Errc::InvalidArgument, "image extension must be .pgm, .ppm, .pnm or .png");
  if (ext == ".pgm" && image.channels != 1)
    throw Error(Errc::InvalidArgument, "PGM output needs a single band");
  if (ext == ".ppm" && image.channels != 3)
    throw Error(Errc::InvalidArgument, "PPM output needs an RGB triplet");
  envi::write_file_text(path, encode_pnm(image));
}

}  // namespace hxkit::render
