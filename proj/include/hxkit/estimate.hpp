#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hxkit/cube.hpp"
#include "hxkit/error.hpp"

namespace hxkit::estimate {

enum class Kind { plsr, ridge };

std::string to_string(Kind kind);
Kind parse_kind(std::string_view name);

/// prediction = coefficients . x + intercept on raw spectra.
struct RegressionModel {
  Kind kind = Kind::plsr;
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  double hyperparameter = 0.0;  // n_components or alpha
  Eigen::VectorXd x_mean;
  Eigen::VectorXd x_std;        // ones when standardization is off
  double y_mean = 0.0;

  std::size_t bands() const { return static_cast<std::size_t>(coefficients.size()); }
  double predict(const Eigen::VectorXd& x) const { return coefficients.dot(x) + intercept; }
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;  // X is samples x bands
};

struct PlsrOptions {
  bool standardize = true;
};

/// NIPALS PLS1. X is samples x bands.
RegressionModel plsr_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         std::size_t n_components, const PlsrOptions& options = {});

struct RidgeOptions {
  bool fit_intercept = true;  // false solves on the raw (uncentered) data
};

RegressionModel ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha,
                          const RidgeOptions& options = {});

RegressionModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Kind kind,
                    double hyperparameter);

double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& prediction);
double rmse(const Eigen::VectorXd& y, const Eigen::VectorXd& prediction);

struct CvRow {
  double hyperparameter = 0.0;
  double mean_r2 = 0.0;
  double mean_rmse = 0.0;
};

struct CvResult {
  Kind kind = Kind::plsr;
  std::vector<CvRow> table;
  double best_hyperparameter = 0.0;
  RegressionModel best_model;  // refit on all samples
  std::vector<std::size_t> fold_of;  // fold index per sample
};

/// Seeded fold assignment: sample order shuffled, fold = position mod k.
std::vector<std::size_t> assign_folds(std::size_t n, std::size_t k_folds, std::uint64_t seed);

CvResult cross_validate(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Kind kind,
                        const std::vector<double>& hyper_grid, std::size_t k_folds,
                        std::uint64_t seed);

HyperCube predict_map(const RegressionModel& model, const HyperCube& cube);

std::string model_to_json(const RegressionModel& model);
RegressionModel model_from_json(std::string_view text);

struct TrainingData {
  Eigen::MatrixXd X;  // samples x bands
  Eigen::VectorXd y;
};

/// CSV with columns row,col,target (pixels of `cube`) or spectrum...,target.
TrainingData parse_training_csv(std::string_view text, const HyperCube* cube);
TrainingData read_training_csv(const std::filesystem::path& path, const HyperCube* cube);

// Spectral indices.

enum class IndexFormula { normalized_difference, ratio };

/// normalized_difference: (R(a) - R(b)) / (R(a) + R(b)); ratio: R(a) / R(b).
struct IndexDefinition {
  std::string name;
  IndexFormula formula = IndexFormula::normalized_difference;
  double a_nm = 0.0;
  double b_nm = 0.0;
  double tolerance_nm = 10.0;

  void validate() const;
};

/// NDVI, SR, NDWI, RENDVI.
std::vector<IndexDefinition> builtin_indices();
IndexDefinition find_index(const std::vector<IndexDefinition>& table, std::string_view name);

/// CSV columns: name,formula,a_nm,b_nm[,tolerance_nm] with formula nd or ratio.
std::vector<IndexDefinition> parse_index_csv(std::string_view text);

/// Nearest bands within tolerance; |denominator| < 1e-12 gives nodata.
HyperCube compute_index(const HyperCube& cube, const IndexDefinition& def);

}  // namespace hxkit::estimate
