#pragma once

// Brute-force reference solvers. Each one is written independently of the
// library code it checks: exhaustive support enumeration instead of active
// sets, closed forms instead of iterations.

#include <Eigen/Dense>

#include <vector>

namespace hxtest::oracle {

struct QpSolution {
  Eigen::VectorXd x;
  double objective = 0.0;
};

/// min 1/2 ||A x - y||^2 + lambda * sum(x) over x >= 0 (and sum(x) = 1 when
/// sum_to_one), by enumerating every support and keeping the best feasible
/// stationary point.
QpSolution constrained_qp(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double lambda,
                          bool sum_to_one);

double qp_objective(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                    double lambda);

struct Triple {
  std::size_t i = 0, j = 0, k = 0;
  double volume = 0.0;
};

/// Largest triangle over all point triples (points are 2 x n).
Triple max_volume_triple(const Eigen::MatrixXd& points);

/// PLS1 fitted values as the least-squares projection of y onto the span of
/// X K, K the Krylov basis {s, G s, G^2 s, ...} with s = X^T y, G = X^T X, on
/// column-standardized (sample std) X and centered y.
Eigen::VectorXd pls_krylov_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               std::size_t components, bool standardize);

/// Least-squares polynomial of `order` through (t, v), evaluated at t0, solved
/// with a Vandermonde QR.
double polyfit_eval(const std::vector<double>& t, const std::vector<double>& v, std::size_t order,
                    double t0);

/// Kappa from marginals written out longhand.
double kappa(const std::vector<std::vector<double>>& confusion);

/// Gaussian response of one band sampled on `grid`, relative weights under
/// 1e-6 dropped, normalized.
std::vector<double> gaussian_band_weights(const std::vector<double>& grid, double center,
                                          double fwhm);

}  // namespace hxtest::oracle
