#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "hxkit/cube.hpp"
#include "hxkit/error.hpp"
#include "hxkit/sensor_resample.hpp"

namespace hxkit::fusion {

/// Known degradation from a high-resolution hyperspectral scene to the
/// observed pair. R is mx_bands x hx_bands with non-negative rows summing to 1.
struct DegradationPair {
  Eigen::MatrixXd R;
  std::size_t spatial_factor = 1;
  std::vector<double> mx_centers;  // optional header metadata
  std::vector<double> mx_fwhm;

  void validate() const;
};

DegradationPair from_response(const sensor::SpectralResponse& srf, std::size_t spatial_factor);

struct Observed {
  HyperCube hx_low;
  HyperCube mx_high;
};

/// hx_low = block-mean downsample, mx_high = R applied per pixel.
Observed simulate_degradation(const HyperCube& reference, const DegradationPair& deg);

struct CnmfOptions {
  std::size_t p = 3;
  std::size_t outer_iters = 3;
  std::size_t inner_iters = 100;
  std::uint64_t seed = 42;
};

struct CnmfInfo {
  // One vector per outer pass, one entry per multiplicative iteration: ||X - W H||_F.
  std::vector<std::vector<double>> hx_objective;
  std::vector<std::vector<double>> mx_objective;
  // ||blockmean(fused) - hx_low||_F / ||hx_low||_F after each outer pass.
  std::vector<double> low_res_error;
};

/// Coupled NMF. The fused cube has the spatial grid of mx_high and the bands of hx_low.
HyperCube cnmf_fuse(const HyperCube& hx_low, const HyperCube& mx_high, const DegradationPair& deg,
                    const CnmfOptions& options = {}, CnmfInfo* info = nullptr);

/// Per-pixel spectral angle in radians; pixels invalid in either cube or with a
/// zero spectrum carry nodata.
HyperCube sam_error_map(const HyperCube& fused, const HyperCube& reference);

struct SamSummary {
  double mean = 0.0;
  double median = 0.0;
  std::size_t count = 0;
};
SamSummary summarize_sam(const HyperCube& sam_map);

/// Nearest-neighbour upsample by an integer factor (baseline fusion).
HyperCube upsample_nearest(const HyperCube& cube, std::size_t factor);

}  // namespace hxkit::fusion
