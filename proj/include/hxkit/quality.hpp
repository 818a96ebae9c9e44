#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hxkit/cube.hpp"
#include "hxkit/cube_model.hpp"
#include "hxkit/error.hpp"

namespace hxkit::quality {

enum class NoiseMethod { spectral_decorrelation, spatial_spectral, homogeneous_roi };

struct NoiseProfile {
  NoiseMethod method = NoiseMethod::spectral_decorrelation;
  std::vector<double> sigma;   // per band, cube units
  std::vector<double> snr_db;  // per band
  std::size_t sample_count = 0;
};

/// Per-band noise standard deviation.
///  spectral_decorrelation: residual std of regressing band b on b-1, b+1
///    (one neighbour at the spectrum ends), intercept included.
///  spatial_spectral: inside block x block tiles, regress each value on its
///    left and upper neighbours and its spectral neighbours; residuals pooled
///    over tiles with per-tile degrees of freedom.
///  homogeneous_roi: std over the ROI pixels after removing each ROI class mean.
NoiseProfile estimate_noise(const HyperCube& cube, NoiseMethod method,
                            const LabelMask* roi = nullptr, std::size_t block = 8);

inline constexpr double kSnrCapDb = 120.0;

/// 20 log10(mean / sigma) per band, clamped to [-120, 120] dB; sigma == 0
/// reports +120.
std::vector<double> compute_snr(const HyperCube& cube, const NoiseProfile& noise);

enum class BadBandCriterion { snr_db, sigma };

/// bbl entry 0 for bands below the SNR threshold (or, with the sigma
/// criterion, above the sigma threshold) and for bands with non-finite sigma.
std::vector<int> detect_bad_bands(const NoiseProfile& noise, double threshold,
                                  BadBandCriterion criterion = BadBandCriterion::snr_db);

enum class StripeAxis { column, row };

/// Moment matching: every column (or row) of a band is rescaled to the band's
/// global mean and std. Columns with zero std are only shifted.
HyperCube destripe(const HyperCube& cube, StripeAxis axis);

/// y = Lambda^{-1/2} U^T (x - mean) from the band covariance, eigenvalues
/// floored at 1e-10 * lambda_max (warning when the floor is hit).
HyperCube whiten(const HyperCube& cube, Warnings* warnings = nullptr);

struct CibrBands {
  std::size_t absorption = 0, left = 0, right = 0;
  double w_left = 0.0, w_right = 0.0;
};

/// Band selection and interpolation weights from the actual band centres.
/// NoBandNear when a requested wavelength has no band within 15 nm.
CibrBands cibr_bands(const HyperCube& cube, double absorption_nm = 940.0, double left_nm = 865.0,
                     double right_nm = 1025.0);

/// L(abs) / (w1 L(left) + w2 L(right)); zero continuum -> nodata.
HyperCube cibr(const HyperCube& cube, double absorption_nm = 940.0, double left_nm = 865.0,
               double right_nm = 1025.0);

/// CSV columns band, wavelength, sigma, snr_db.
std::string format_noise_csv(const NoiseProfile& noise, const std::optional<std::vector<double>>& wavelengths);

std::string to_string(NoiseMethod method);

}  // namespace hxkit::quality
