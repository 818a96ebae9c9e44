#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

#include "hxkit/cube.hpp"
#include "hxkit/error.hpp"

namespace hxkit::sensor {

/// Band-averaging weights from a source wavelength grid to target bands.
/// weights is target_bands x source_bands, rows non-negative and summing to 1.
struct SpectralResponse {
  std::vector<double> source_wavelengths;
  Eigen::MatrixXd weights;
  std::vector<double> target_centers;
  std::vector<double> target_fwhm;
};

/// Gaussian sigma for a full width at half maximum: fwhm / (2 sqrt(2 ln 2)).
double fwhm_to_sigma(double fwhm);

/// Row k is exp(-(l - c_k)^2 / (2 sigma_k^2)) sampled on `grid`, with weights
/// under 1e-6 of the row maximum dropped, then normalized to unit sum.
/// EmptySupport when no grid point falls inside [c - 3 sigma, c + 3 sigma].
SpectralResponse gaussian_srf(const std::vector<double>& centers, const std::vector<double>& fwhm,
                              const std::vector<double>& grid);

/// out_band[k] = sum_j weights(k, j) * band[j]. Header wavelengths/fwhm take
/// the target definition.
HyperCube spectral_resample(const HyperCube& cube, const SpectralResponse& srf);

enum class Psf { block_mean, gaussian };

/// Reduces spatial resolution by an integer factor. Dimensions that are not
/// multiples of `factor` are cropped (with a warning). block_mean averages
/// factor x factor blocks; gaussian weights a sigma = factor/2 kernel centred
/// on each block, renormalized at image edges. Nodata values are skipped.
HyperCube spatial_downsample(const HyperCube& cube, std::size_t factor, Psf psf,
                             Warnings* warnings = nullptr);

/// Target sensor band definition.
struct SensorDefinition {
  std::string name;
  std::vector<double> centers;
  std::vector<double> fwhm;
};

/// CSV with columns center_nm, fwhm_nm.
SensorDefinition read_sensor_csv(const std::filesystem::path& path);
SensorDefinition parse_sensor_csv(std::string_view text, std::string name = "custom");

/// Bundled presets: "vnir4" (blue 490/65, green 560/35, red 665/30, NIR 842/115 nm).
SensorDefinition preset(const std::string& name);
std::vector<std::string> preset_names();

/// srf as CSV: header "target_nm,fwhm_nm,<source wavelengths...>", one row per target band.
std::string format_srf_csv(const SpectralResponse& srf);
SpectralResponse parse_srf_csv(std::string_view text);

}  // namespace hxkit::sensor
