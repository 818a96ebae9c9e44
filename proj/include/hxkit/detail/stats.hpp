#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace hxkit::detail {

struct MeanCov {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Column samples (variables x observations), unbiased covariance.
inline MeanCov mean_cov(const Eigen::MatrixXd& x) {
  MeanCov mc;
  mc.mean = x.rowwise().mean();
  const Eigen::MatrixXd centered = x.colwise() - mc.mean;
  const double denom = x.cols() > 1 ? static_cast<double>(x.cols() - 1) : 1.0;
  mc.cov = (centered * centered.transpose()) / denom;
  return mc;
}

/// Linear-interpolated quantile (numpy "linear"), q in [0, 1]. Sorts `v`.
inline double quantile(std::vector<double>& v, double q) {
  std::sort(v.begin(), v.end());
  if (v.empty()) return 0.0;
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace hxkit::detail
