#pragma once

#include <Eigen/Dense>

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hxkit/cube.hpp"
#include "hxkit/error.hpp"

namespace hxkit {

/// Named spectra sharing one wavelength axis; spectra is n_spectra x n_wavelengths.
struct SpectralLibrary {
  std::vector<std::string> names;
  std::vector<double> wavelengths;
  Eigen::MatrixXd spectra;
  std::string units = "reflectance";

  void validate() const;
};

/// Per-pixel class labels, 0 = unlabeled.
struct LabelMask {
  std::size_t lines = 0;
  std::size_t samples = 0;
  std::vector<int> labels;
  std::map<int, std::string> class_names;

  LabelMask() = default;
  LabelMask(std::size_t lines, std::size_t samples)
      : lines(lines), samples(samples), labels(lines * samples, 0) {}

  int at(std::size_t row, std::size_t col) const { return labels[row * samples + col]; }
  int& at(std::size_t row, std::size_t col) { return labels[row * samples + col]; }

  /// Sorted distinct nonzero labels.
  std::vector<int> classes() const;
  std::size_t count(int label) const;

  /// Nonzero labels without a name get "class_<n>".
  void fill_missing_names();
  void validate() const;
  void check_matches(const HyperCube& cube) const;

  bool operator==(const LabelMask&) const = default;
};

}  // namespace hxkit

namespace hxkit::cube {

/// Half-open index range [begin, end).
struct Range {
  std::size_t begin = 0;
  std::size_t end = 0;
};

HyperCube spatial_subset(const HyperCube& cube, Range rows, Range cols);
HyperCube spectral_subset(const HyperCube& cube, std::span<const std::size_t> band_indices);

/// Multiplies every value by `factor`; nodata values stay unscaled.
HyperCube scale_cube(const HyperCube& cube, double factor);

struct BandStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t count = 0;
  std::size_t nodata_count = 0;
  std::array<std::size_t, 256> histogram{};  // equal-width bins over [min, max]
};

/// Per-band summary over non-nodata values.
std::vector<BandStats> band_stats(const HyperCube& cube);

/// arccos of the normalized inner product, in [0, pi]. ZeroNorm if either is 0.
double spectral_angle(std::span<const double> x, std::span<const double> y);

/// Two-pass Pearson correlation. DegenerateVariance if either side is constant.
double pearson(std::span<const double> x, std::span<const double> y);

struct ScatterStats {
  std::vector<double> first;
  std::vector<double> second;
  double pearson_r = 0.0;
};

/// Paired values of two bands over valid pixels plus their correlation.
ScatterStats scatter_stats(const HyperCube& cube, std::size_t band_i, std::size_t band_j);

// Interchange formats.

/// CSV: first column wavelength (nm), one column per spectrum, header row of names.
SpectralLibrary parse_library_csv(std::string_view text);
SpectralLibrary read_library_csv(const std::filesystem::path& path);
std::string format_library_csv(const SpectralLibrary& library);

/// Label raster (single-band ENVI cube) with optional JSON class table
/// {"1": "water", ...}.
LabelMask mask_from_cube(const HyperCube& cube);
HyperCube cube_from_mask(const LabelMask& mask);
LabelMask read_label_mask(const std::filesystem::path& header_path,
                          const std::optional<std::filesystem::path>& names_json = std::nullopt);
void write_label_mask(const std::filesystem::path& header_path, const LabelMask& mask);
std::string class_names_json(const LabelMask& mask);
std::map<int, std::string> parse_class_names_json(std::string_view text);

}  // namespace hxkit::cube
