#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hxkit/cube.hpp"
#include "hxkit/cube_model.hpp"
#include "hxkit/error.hpp"

namespace hxkit::classify {

enum class Kind { sam, gaussian_ml, knn };

std::string to_string(Kind kind);
Kind parse_kind(std::string_view name);

struct TrainOptions {
  std::size_t k = 5;                         // knn, must be odd
  std::optional<double> sam_threshold_rad;   // none = always assign nearest class
};

/// Row c of class_means belongs to labels[c]; labels ascending.
struct ClassifierModel {
  Kind kind = Kind::sam;
  std::vector<int> labels;
  std::map<int, std::string> class_names;
  Eigen::MatrixXd class_means;               // classes x bands
  std::vector<Eigen::MatrixXd> class_covs;   // gaussian_ml, regularized
  Eigen::VectorXd priors;
  Eigen::MatrixXd training_samples;          // knn, bands x n
  std::vector<int> training_labels;          // knn
  std::size_t k = 5;
  std::optional<double> sam_threshold_rad;

  std::size_t bands() const { return static_cast<std::size_t>(class_means.cols()); }
};

struct Split {
  LabelMask train;
  LabelMask test;
};

/// Per class, ceil(fraction * n) pixels go to train after a seeded shuffle.
Split stratified_split(const LabelMask& mask, double train_fraction, std::uint64_t seed);

/// Regularization added to a covariance diagonal: 1e-6 * trace / bands, or 1e-6
/// when the trace vanishes.
double covariance_ridge(const Eigen::MatrixXd& cov);

ClassifierModel train(const HyperCube& cube, const LabelMask& mask, Kind kind,
                      const TrainOptions& options = {});

/// Label 0 marks unclassified and invalid pixels.
LabelMask predict(const ClassifierModel& model, const HyperCube& cube);

/// Per-class discriminants g_c for one spectrum (gaussian_ml only).
Eigen::VectorXd ml_discriminants(const ClassifierModel& model, const Eigen::VectorXd& x);

struct AccuracyReport {
  std::vector<int> labels;                 // class order for rows and columns
  std::map<int, std::string> class_names;
  Eigen::MatrixXd confusion;               // rows = reference
  double overall_accuracy = 0.0;
  double kappa = 0.0;
  std::vector<double> producer_accuracy;   // per reference class
  std::vector<double> user_accuracy;       // per predicted class
  std::vector<std::size_t> support;        // reference counts
  std::size_t total = 0;
  std::size_t unclassified = 0;            // reference labeled, prediction 0
};

AccuracyReport evaluate(const LabelMask& predicted, const LabelMask& reference);

/// Kappa for a precomputed confusion matrix.
double kappa_from_confusion(const Eigen::MatrixXd& confusion);

struct PairSeparability {
  int class_a = 0;
  int class_b = 0;
  double bhattacharyya = 0.0;
  double jeffries_matusita = 0.0;
};

struct BandSeparability {
  std::size_t band = 0;
  double min_jm = 0.0;
};

struct SeparabilityReport {
  std::vector<int> labels;
  std::map<int, std::string> class_names;
  std::vector<PairSeparability> pairs;
  std::vector<BandSeparability> band_ranking;  // min pairwise JM descending
  Eigen::MatrixXd class_means;                 // classes x bands
  Eigen::MatrixXd class_stds;
  std::vector<double> wavelengths;
};

double bhattacharyya(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& s1,
                     const Eigen::VectorXd& mu2, const Eigen::MatrixXd& s2);
double jeffries_matusita(double bhattacharyya_distance);

SeparabilityReport separability(const HyperCube& cube, const LabelMask& mask);

/// wavelength,<class>_mean,<class>_std,... one row per band.
std::string class_spectra_csv(const SeparabilityReport& report);

struct GridPoint {
  double value = 0.0;  // k or threshold in radians
  double overall_accuracy = 0.0;
  double kappa = 0.0;
};

struct GridSearchResult {
  Kind kind = Kind::knn;
  std::vector<GridPoint> points;
  double best_value = 0.0;  // highest OA; ties go to the earlier grid value
};

GridSearchResult grid_search(const HyperCube& cube, const LabelMask& train_mask,
                             const LabelMask& validation_mask, Kind kind,
                             const std::vector<double>& grid);

std::string model_to_json(const ClassifierModel& model);
ClassifierModel model_from_json(std::string_view text);

}  // namespace hxkit::classify
