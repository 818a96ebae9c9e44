#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hxkit/cube.hpp"
#include "hxkit/cube_model.hpp"
#include "hxkit/error.hpp"
#include "hxkit/preprocess.hpp"

namespace hxkit::unmix {

struct PixelRef {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const PixelRef&) const = default;
};

/// Endmember spectra as columns of E (bands x p).
struct EndmemberSet {
  Eigen::MatrixXd E;
  std::vector<PixelRef> source_pixels;
  std::string algorithm;
  std::vector<double> wavelengths;
  std::vector<std::string> names;

  std::size_t count() const { return static_cast<std::size_t>(E.cols()); }
  /// "em1".."emp" when names were not assigned.
  std::vector<std::string> labels() const;
};

enum class Constraint { none, nonneg, nonneg_sum1 };

/// values is p x pixels; invalid source pixels carry `nodata` in every row.
struct AbundanceMap {
  std::size_t lines = 0;
  std::size_t samples = 0;
  Eigen::MatrixXd values;
  Constraint constraint = Constraint::none;
  std::vector<std::string> names;
  std::optional<double> nodata;

  std::size_t count() const { return static_cast<std::size_t>(values.rows()); }
  /// ENVI-ready cube, band names = endmember labels.
  HyperCube to_cube() const;
};

/// Pairwise interaction coefficients, gamma(pair, pixel) with pairs (i<j) in
/// row-major order (0,1), (0,2), ..., (p-2,p-1).
struct GbmCoefficients {
  std::size_t p = 0;
  Eigen::MatrixXd gamma;
};

struct GbmResult {
  AbundanceMap abundances;
  GbmCoefficients coefficients;
  std::vector<double> residual;          // per-pixel RMS residual
  std::vector<double> residual_history;  // total squared residual after each alternation
};

// Material count.

struct HfcResult {
  std::size_t count = 0;
  Eigen::VectorXd correlation_eigenvalues;  // descending
  Eigen::VectorXd covariance_eigenvalues;   // descending
  Eigen::VectorXd thresholds;
};

/// Harsanyi-Farrand-Chang: per band, Neyman-Pearson test on
/// z = lambda_R - lambda_K with variance 2 (lambda_R^2 + lambda_K^2) / N.
HfcResult hfc(const HyperCube& cube, double pfa);
std::size_t material_count_hfc(const HyperCube& cube, double pfa);

// Endmember extraction. Every extractor returns actual image pixels and breaks
// ties by lowest linear pixel index.

EndmemberSet extract_atgp(const HyperCube& cube, std::size_t p);

struct NfindrInfo {
  double volume = 0.0;
  std::vector<double> volume_history;  // of the kept restart, one entry per accepted swap pass
};

/// N-FINDR on the first p-1 components of `model` (a PCA fit of the cube).
EndmemberSet extract_nfindr(const HyperCube& cube, std::size_t p,
                            const prep::LinearTransformModel& model, std::uint64_t seed,
                            std::size_t restarts = 3, NfindrInfo* info = nullptr);
/// Fits the PCA reduction internally.
EndmemberSet extract_nfindr(const HyperCube& cube, std::size_t p, std::uint64_t seed,
                            NfindrInfo* info = nullptr);

/// Simplex volume |det [1; points]| / (p-1)! of p points in p-1 dims (columns).
double simplex_volume(const Eigen::MatrixXd& reduced_points);

EndmemberSet extract_ppi(const HyperCube& cube, std::size_t p, std::size_t n_skewers,
                         std::uint64_t seed, std::vector<std::size_t>* hit_counts = nullptr);

struct VcaInfo {
  double snr_db = 0.0;
  bool snr_estimated = false;
  bool projective = false;  // high-SNR branch (projection onto y / u^T y)
};

EndmemberSet extract_vca(const HyperCube& cube, std::size_t p, std::uint64_t seed,
                         std::optional<double> snr_db = std::nullopt, VcaInfo* info = nullptr);

// Per-spectrum solvers.

/// Lawson-Hanson active set for min ||E a - y|| s.t. a >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& E, const Eigen::VectorXd& y, double tol = 1e-10);

/// NNLS on E scaled to unit max and augmented with a sum-to-one row of 1/delta.
Eigen::VectorXd fcls(const Eigen::MatrixXd& E, const Eigen::VectorXd& y, double delta = 1e-3);

/// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v);

// Abundance maps.

AbundanceMap abundance_ucls(const HyperCube& cube, const Eigen::MatrixXd& E);
AbundanceMap abundance_nnls(const HyperCube& cube, const Eigen::MatrixXd& E);
AbundanceMap abundance_fcls(const HyperCube& cube, const Eigen::MatrixXd& E, double delta = 1e-3);
GbmResult abundance_gbm(const HyperCube& cube, const Eigen::MatrixXd& E, std::size_t iterations = 20);

struct SparseOptions {
  double lambda = 0.0;
  Constraint constraint = Constraint::nonneg;  // nonneg or nonneg_sum1
  std::size_t max_iter = 200;
  double tol = 1e-6;
  double mu = 0.1;
};

/// ADMM (SUnSAL) for min 1/2 ||A x - y||^2 + lambda ||x||_1, x >= 0 (and
/// 1^T x = 1 with nonneg_sum1). `iterations` receives the count used.
Eigen::VectorXd sunsal(const Eigen::MatrixXd& A, const Eigen::VectorXd& y,
                       const SparseOptions& options, std::size_t* iterations = nullptr);

AbundanceMap sparse_unmix(const HyperCube& cube, const Eigen::MatrixXd& library,
                          const SparseOptions& options);

/// Per-pixel sqrt(mean_b (y - E a)^2).
HyperCube rmse_map(const HyperCube& cube, const Eigen::MatrixXd& E, const AbundanceMap& A);

// Interchange.

SpectralLibrary to_library(const EndmemberSet& set);
EndmemberSet from_library(const SpectralLibrary& library);
std::string to_string(Constraint constraint);

}  // namespace hxkit::unmix
