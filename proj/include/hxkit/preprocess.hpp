#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hxkit/cube.hpp"
#include "hxkit/error.hpp"

namespace hxkit::prep {

/// How the half-window at each end of a spectrum is smoothed.
///  fit:    evaluate the least-squares polynomial of the first/last full window
///          at the edge sample's offset, so polynomials of degree <= order are
///          reproduced everywhere.
///  mirror: pad by even reflection about the end samples.
enum class EdgeMode { fit, mirror };

/// Weights that evaluate a degree-`order` least-squares fit over a window of
/// `window` samples at `offset` from the window centre.
Eigen::VectorXd savgol_coefficients(std::size_t window, std::size_t order, long offset = 0);

std::vector<double> savitzky_golay(std::span<const double> spectrum, std::size_t window,
                                   std::size_t order, EdgeMode edges = EdgeMode::fit);
HyperCube savitzky_golay(const HyperCube& cube, std::size_t window, std::size_t order,
                         EdgeMode edges = EdgeMode::fit);

/// Spectrum divided by its upper convex hull; hull vertices map to exactly 1.
std::vector<double> continuum_removal(std::span<const double> spectrum,
                                      std::span<const double> wavelengths);
/// Per pixel, using header wavelengths (band index when absent).
HyperCube continuum_removal(const HyperCube& cube);

enum class Scaling { standard, minmax, robust };

/// Per-band rescaling: standard (x-mean)/std, minmax (x-min)/(max-min),
/// robust (x-median)/IQR. A zero denominator yields an all-zero band and a warning.
HyperCube fit_transform(const HyperCube& cube, Scaling kind, Warnings* warnings = nullptr);

enum class TransformKind { pca, mnf };

/// Linear projection y = basis^T (x - mean), columns ordered by decreasing
/// eigenvalue. inverse_basis maps component scores back to band space.
struct LinearTransformModel {
  TransformKind kind = TransformKind::pca;
  Eigen::VectorXd mean;
  Eigen::MatrixXd basis;          // bands x k
  Eigen::VectorXd eigenvalues;    // k, non-increasing
  double total_variance = 0.0;    // trace of the band covariance
  std::optional<Eigen::MatrixXd> noise_cov;  // MNF only, regularized
  Eigen::MatrixXd inverse_basis;  // bands x k
  std::optional<std::vector<double>> wavelengths;

  std::size_t bands() const { return static_cast<std::size_t>(basis.rows()); }
  std::size_t components() const { return static_cast<std::size_t>(basis.cols()); }
  /// PCA: eigenvalue / total variance (sums to 1 at k = bands).
  std::vector<double> explained_variance_ratio() const;
};

LinearTransformModel fit_pca(const HyperCube& cube, std::size_t k);

enum class NoiseEstimator { shift_difference, provided };

/// Noise covariance of horizontal neighbour differences (x[r,c]-x[r,c+1])/sqrt(2).
Eigen::MatrixXd shift_difference_noise_cov(const HyperCube& cube);

/// Generalized eigenproblem Sigma v = lambda Sigma_n v with Sigma_n regularized
/// by 1e-10 * trace / bands. Eigenvalues (SNR + 1) sorted descending.
LinearTransformModel fit_mnf(const HyperCube& cube, std::size_t k,
                             NoiseEstimator estimator = NoiseEstimator::shift_difference,
                             const std::optional<Eigen::MatrixXd>& noise_cov = std::nullopt);

HyperCube apply(const LinearTransformModel& model, const HyperCube& cube);
HyperCube inverse(const LinearTransformModel& model, const HyperCube& scores);

std::string model_to_json(const LinearTransformModel& model);
LinearTransformModel model_from_json(std::string_view text);

/// Flips each column so its largest-magnitude entry (first on ties) is positive.
void fix_signs(Eigen::MatrixXd& columns);

}  // namespace hxkit::prep
