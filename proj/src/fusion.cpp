#include "hxkit/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "hxkit/detail/stats.hpp"
#include "hxkit/parallel.hpp"
#include "hxkit/unmix.hpp"

namespace hxkit::fusion {

namespace {

constexpr double kEps = 1e-12;

// p x (lines*samples) high grid -> p x (lines/f * samples/f) block means.
Eigen::MatrixXd block_mean(const Eigen::MatrixXd& H, std::size_t lines, std::size_t samples,
                           std::size_t f) {
  const std::size_t nl = lines / f, ns = samples / f;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(H.rows(), static_cast<Eigen::Index>(nl * ns));
  const double w = 1.0 / static_cast<double>(f * f);
  for (std::size_t r = 0; r < nl * f; ++r)
    for (std::size_t c = 0; c < ns * f; ++c)
      out.col(static_cast<Eigen::Index>((r / f) * ns + c / f)) += w * H.col(static_cast<Eigen::Index>(r * samples + c));
  return out;
}

Eigen::MatrixXd nearest_up(const Eigen::MatrixXd& H, std::size_t nl, std::size_t ns, std::size_t f) {
  Eigen::MatrixXd out(H.rows(), static_cast<Eigen::Index>(nl * ns * f * f));
  const std::size_t samples = ns * f;
  for (std::size_t r = 0; r < nl * f; ++r)
    for (std::size_t c = 0; c < samples; ++c)
      out.col(static_cast<Eigen::Index>(r * samples + c)) = H.col(static_cast<Eigen::Index>((r / f) * ns + c / f));
  return out;
}

// Data matrix with nodata pixels replaced by the per-band mean of valid
// pixels, and values in [-1e-6, 0) clipped to zero.
Eigen::MatrixXd nonneg_data(const HyperCube& cube, const char* what) {
  Eigen::MatrixXd X = cube.matrix();
  const std::vector<std::size_t> valid = cube.valid_pixels();
  if (valid.empty()) throw Error(Errc::InsufficientData, std::string(what) + " has no valid pixels");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(X.rows());
  for (std::size_t i : valid) mean += X.col(static_cast<Eigen::Index>(i));
  mean /= static_cast<double>(valid.size());
  std::vector<bool> ok(cube.pixel_count(), false);
  for (std::size_t i : valid) ok[i] = true;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (!ok[static_cast<std::size_t>(j)]) {
      X.col(j) = mean;
      continue;
    }
    for (Eigen::Index b = 0; b < X.rows(); ++b) {
      const double v = X(b, j);
      if (!(v >= -1e-6))
        throw Error(Errc::NonPositiveInput, std::string(what) + " contains negative values");
      if (v < 0.0) X(b, j) = 0.0;
    }
  }
  return X;
}

void update_H(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W, Eigen::MatrixXd& H) {
  const Eigen::MatrixXd num = W.transpose() * X;
  const Eigen::MatrixXd den = (W.transpose() * W) * H;
  H = H.cwiseProduct(num.cwiseQuotient((den.array() + kEps).matrix()));
}

void update_W(const Eigen::MatrixXd& X, Eigen::MatrixXd& W, const Eigen::MatrixXd& H) {
  const Eigen::MatrixXd num = X * H.transpose();
  const Eigen::MatrixXd den = W * (H * H.transpose());
  W = W.cwiseProduct(num.cwiseQuotient((den.array() + kEps).matrix()));
}

}  // namespace

void DegradationPair::validate() const {
  if (spatial_factor == 0) throw Error(Errc::InvalidArgument, "spatial factor must be positive");
  if (R.size() == 0) throw Error(Errc::InvalidArgument, "spectral response is empty");
  if ((R.array() < 0.0).any()) throw Error(Errc::InvalidArgument, "spectral response has negative weights");
  for (Eigen::Index k = 0; k < R.rows(); ++k)
    if (std::abs(R.row(k).sum() - 1.0) > 1e-9)
      throw Error(Errc::InvalidArgument, "spectral response rows must sum to 1");
}

DegradationPair from_response(const sensor::SpectralResponse& srf, std::size_t spatial_factor) {
  DegradationPair d{srf.weights, spatial_factor, srf.target_centers, srf.target_fwhm};
  d.validate();
  return d;
}

Observed simulate_degradation(const HyperCube& reference, const DegradationPair& deg) {
  deg.validate();
  Observed out;
  out.hx_low = sensor::spatial_downsample(reference, deg.spatial_factor, sensor::Psf::block_mean);
  sensor::SpectralResponse srf{{}, deg.R, deg.mx_centers, deg.mx_fwhm};
  out.mx_high = sensor::spectral_resample(reference, srf);
  if (deg.mx_centers.size() != static_cast<std::size_t>(deg.R.rows())) out.mx_high.header().wavelengths.reset();
  if (deg.mx_fwhm.size() != static_cast<std::size_t>(deg.R.rows())) out.mx_high.header().fwhm.reset();
  return out;
}

HyperCube cnmf_fuse(const HyperCube& hx_low, const HyperCube& mx_high, const DegradationPair& deg,
                    const CnmfOptions& o, CnmfInfo* info) {
  deg.validate();
  const std::size_t f = deg.spatial_factor;
  if (static_cast<std::size_t>(deg.R.cols()) != hx_low.bands() ||
      static_cast<std::size_t>(deg.R.rows()) != mx_high.bands())
    throw Error(Errc::InvalidArgument, "spectral response does not match the cube band counts");
  if (hx_low.lines() * f != mx_high.lines() || hx_low.samples() * f != mx_high.samples())
    throw Error(Errc::InvalidArgument, "hx dimensions times the spatial factor must equal mx dimensions");
  if (o.p == 0) throw Error(Errc::InvalidArgument, "cnmf: p must be >= 1");
  if (o.p > hx_low.bands()) throw Error(Errc::InvalidArgument, "cnmf: p exceeds hx band count");
  if (o.outer_iters == 0) throw Error(Errc::InvalidArgument, "cnmf: outer_iters must be >= 1");

  const Eigen::MatrixXd Xh = nonneg_data(hx_low, "hx_low");
  const Eigen::MatrixXd Xm = nonneg_data(mx_high, "mx_high");
  const Eigen::Index p = static_cast<Eigen::Index>(o.p);

  HyperCube hx_clean = hx_low;
  hx_clean.set_nodata(std::nullopt);
  std::copy(Xh.data(), Xh.data() + Xh.size(), hx_clean.values().begin());
  Eigen::MatrixXd W = unmix::extract_vca(hx_clean, o.p, o.seed).E;
  W = W.cwiseMax(kEps);
  Eigen::MatrixXd H_low = Eigen::MatrixXd::Constant(p, Xh.cols(), 1.0 / static_cast<double>(p));
  Eigen::MatrixXd H_high;

  CnmfInfo local;
  const double hx_norm = std::max(Xh.norm(), 1e-300);
  for (std::size_t outer = 0; outer < o.outer_iters; ++outer) {
    if (outer > 0) H_low = block_mean(H_high, mx_high.lines(), mx_high.samples(), f).cwiseMax(kEps);

    std::vector<double> hx_obj;
    for (std::size_t it = 0; it < o.inner_iters; ++it) {
      update_H(Xh, W, H_low);
      update_W(Xh, W, H_low);
      hx_obj.push_back((Xh - W * H_low).norm());
    }

    const Eigen::MatrixXd Wm = deg.R * W;
    H_high = nearest_up(H_low, hx_low.lines(), hx_low.samples(), f);
    std::vector<double> mx_obj;
    for (std::size_t it = 0; it < o.inner_iters; ++it) {
      update_H(Xm, Wm, H_high);
      mx_obj.push_back((Xm - Wm * H_high).norm());
    }
    local.hx_objective.push_back(std::move(hx_obj));
    local.mx_objective.push_back(std::move(mx_obj));
    const Eigen::MatrixXd low = block_mean(W * H_high, mx_high.lines(), mx_high.samples(), f);
    local.low_res_error.push_back((low - Xh).norm() / hx_norm);
  }

  HyperCube out = HyperCube::zeros_like(hx_low.header(), mx_high.lines(), mx_high.samples(), hx_low.bands());
  out.header().map_info = mx_high.header().map_info;
  auto dst = out.matrix();
  dst = W * H_high;
  // Pixels invalid in either input stay invalid.
  if (hx_low.nodata() || mx_high.nodata()) {
    const double nd = mx_high.nodata() ? *mx_high.nodata() : *hx_low.nodata();
    out.set_nodata(nd);
    for (std::size_t r = 0; r < mx_high.lines(); ++r)
      for (std::size_t c = 0; c < mx_high.samples(); ++c) {
        const std::size_t i = r * mx_high.samples() + c;
        const std::size_t lo = (r / f) * hx_low.samples() + c / f;
        if (!mx_high.pixel_valid(i) || !hx_low.pixel_valid(lo)) dst.col(static_cast<Eigen::Index>(i)).setConstant(nd);
      }
  }
  if (info) *info = std::move(local);
  return out;
}

HyperCube sam_error_map(const HyperCube& fused, const HyperCube& reference) {
  if (fused.lines() != reference.lines() || fused.samples() != reference.samples() ||
      fused.bands() != reference.bands())
    throw Error(Errc::InvalidArgument, "sam_error_map: cube shapes differ");
  const double nodata = reference.nodata().value_or(kDefaultNodata);
  std::vector<double> out(fused.pixel_count());
  const auto A = fused.matrix();
  const auto B = reference.matrix();
  parallel_for(fused.pixel_count(), [&](std::size_t i) {
    const Eigen::Index col = static_cast<Eigen::Index>(i);
    const double na = A.col(col).norm(), nb = B.col(col).norm();
    if (!fused.pixel_valid(i) || !reference.pixel_valid(i) || na == 0.0 || nb == 0.0) {
      out[i] = nodata;
      return;
    }
    out[i] = std::acos(std::clamp(A.col(col).dot(B.col(col)) / (na * nb), -1.0, 1.0));
  });
  HyperCube m = single_band_like(reference, std::move(out), nodata);
  m.header().band_names = std::vector<std::string>{"sam_rad"};
  return m;
}

SamSummary summarize_sam(const HyperCube& sam_map) {
  std::vector<double> v;
  for (std::size_t i = 0; i < sam_map.pixel_count(); ++i)
    if (sam_map.pixel_valid(i)) v.push_back(sam_map.values()[i * sam_map.bands()]);
  SamSummary s;
  s.count = v.size();
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  s.median = detail::quantile(v, 0.5);
  return s;
}

HyperCube upsample_nearest(const HyperCube& cube, std::size_t factor) {
  if (factor == 0) throw Error(Errc::InvalidArgument, "upsample factor must be positive");
  const std::size_t L = cube.lines() * factor, S = cube.samples() * factor;
  HyperCube out = HyperCube::zeros_like(cube.header(), L, S, cube.bands());
  out.set_nodata(cube.nodata());
  for (std::size_t r = 0; r < L; ++r)
    for (std::size_t c = 0; c < S; ++c) {
      const auto src = cube.pixel(r / factor, c / factor);
      std::copy(src.begin(), src.end(), out.pixel(r, c).begin());
    }
  return out;
}

}  // namespace hxkit::fusion
