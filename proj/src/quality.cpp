#include "hxkit/quality.hpp"

#include <cmath>
#include <limits>

#include "hxkit/csv.hpp"
#include "hxkit/detail/stats.hpp"
#include "hxkit/detail/strings.hpp"
#include "hxkit/envi_io.hpp"
#include "hxkit/preprocess.hpp"

namespace hxkit::quality {

namespace {

struct Fit {
  double sse = 0.0;
  double dof = 0.0;
};

// Least squares of y on [1, regressors]; rank-deficient designs are handled
// by the complete orthogonal decomposition.
Fit regress(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  Fit f;
  if (design.rows() == 0) return f;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  const Eigen::VectorXd beta = cod.solve(y);
  f.sse = (y - design * beta).squaredNorm();
  f.dof = static_cast<double>(design.rows()) - static_cast<double>(cod.rank());
  return f;
}

std::vector<std::size_t> spectral_neighbours(std::size_t b, std::size_t bands) {
  std::vector<std::size_t> n;
  if (b > 0) n.push_back(b - 1);
  if (b + 1 < bands) n.push_back(b + 1);
  return n;
}

NoiseProfile spectral_decorrelation(const HyperCube& cube) {
  const auto idx = cube.valid_pixels();
  const auto n = static_cast<Eigen::Index>(idx.size());
  if (n < 4) throw Error(Errc::InsufficientData, "too few valid pixels for noise regression");
  NoiseProfile p;
  p.method = NoiseMethod::spectral_decorrelation;
  p.sample_count = idx.size();
  for (std::size_t b = 0; b < cube.bands(); ++b) {
    const auto nb = spectral_neighbours(b, cube.bands());
    Eigen::MatrixXd design(n, static_cast<Eigen::Index>(nb.size() + 1));
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto px = cube.pixel(idx[static_cast<std::size_t>(i)]);
      y(i) = px[b];
      design(i, 0) = 1.0;
      for (std::size_t k = 0; k < nb.size(); ++k) design(i, static_cast<Eigen::Index>(k + 1)) = px[nb[k]];
    }
    const Fit f = regress(design, y);
    p.sigma.push_back(f.dof > 0.0 ? std::sqrt(f.sse / f.dof) : 0.0);
  }
  return p;
}

NoiseProfile spatial_spectral(const HyperCube& cube, std::size_t block) {
  if (block < 3) throw Error(Errc::InvalidArgument, "spatial-spectral block must be >= 3");
  NoiseProfile p;
  p.method = NoiseMethod::spatial_spectral;
  const std::size_t bands = cube.bands();
  std::vector<double> sse(bands, 0.0), dof(bands, 0.0);
  std::size_t samples_used = 0;
  for (std::size_t r0 = 0; r0 + block <= cube.lines(); r0 += block) {
    for (std::size_t c0 = 0; c0 + block <= cube.samples(); c0 += block) {
      // Pixels with a left and an upper neighbour inside the tile.
      std::vector<std::size_t> rows;
      for (std::size_t r = r0 + 1; r < r0 + block; ++r) {
        for (std::size_t c = c0 + 1; c < c0 + block; ++c) {
          const std::size_t i = r * cube.samples() + c;
          if (cube.pixel_valid(i) && cube.pixel_valid(i - 1) && cube.pixel_valid(i - cube.samples())) {
            rows.push_back(i);
          }
        }
      }
      if (rows.size() < 8) continue;
      samples_used += rows.size();
      for (std::size_t b = 0; b < bands; ++b) {
        const auto nb = spectral_neighbours(b, bands);
        const auto n = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd design(n, static_cast<Eigen::Index>(3 + nb.size()));
        Eigen::VectorXd y(n);
        for (Eigen::Index k = 0; k < n; ++k) {
          const std::size_t i = rows[static_cast<std::size_t>(k)];
          y(k) = cube.pixel(i)[b];
          design(k, 0) = 1.0;
          design(k, 1) = cube.pixel(i - 1)[b];
          design(k, 2) = cube.pixel(i - cube.samples())[b];
          for (std::size_t s = 0; s < nb.size(); ++s) {
            design(k, static_cast<Eigen::Index>(3 + s)) = cube.pixel(i)[nb[s]];
          }
        }
        const Fit f = regress(design, y);
        sse[b] += f.sse;
        dof[b] += f.dof;
      }
    }
  }
  if (samples_used == 0) {
    throw Error(Errc::InsufficientData, "image smaller than one spatial-spectral block");
  }
  p.sample_count = samples_used;
  for (std::size_t b = 0; b < bands; ++b) p.sigma.push_back(dof[b] > 0 ? std::sqrt(sse[b] / dof[b]) : 0.0);
  return p;
}

NoiseProfile homogeneous_roi(const HyperCube& cube, const LabelMask* roi) {
  if (!roi) throw Error(Errc::InvalidArgument, "homogeneous_roi noise estimation requires an ROI");
  roi->check_matches(cube);
  NoiseProfile p;
  p.method = NoiseMethod::homogeneous_roi;
  const std::size_t bands = cube.bands();
  std::vector<double> ss(bands, 0.0);
  std::size_t total = 0, groups = 0;
  for (int label : roi->classes()) {
    std::vector<std::size_t> px;
    for (std::size_t i = 0; i < cube.pixel_count(); ++i) {
      if (roi->labels[i] == label && cube.pixel_valid(i)) px.push_back(i);
    }
    if (px.empty()) continue;
    ++groups;
    total += px.size();
    for (std::size_t b = 0; b < bands; ++b) {
      double mean = 0.0;
      for (std::size_t i : px) mean += cube.pixel(i)[b];
      mean /= static_cast<double>(px.size());
      for (std::size_t i : px) ss[b] += (cube.pixel(i)[b] - mean) * (cube.pixel(i)[b] - mean);
    }
  }
  if (total < 16) throw Error(Errc::InsufficientData, "ROI needs at least 16 valid pixels");
  p.sample_count = total;
  for (std::size_t b = 0; b < bands; ++b) {
    p.sigma.push_back(std::sqrt(ss[b] / static_cast<double>(total - groups)));
  }
  return p;
}

std::size_t nearest_band(const std::vector<double>& wl, double target) {
  std::size_t best = 0;
  for (std::size_t b = 1; b < wl.size(); ++b) {
    if (std::abs(wl[b] - target) < std::abs(wl[best] - target)) best = b;
  }
  if (wl.empty() || std::abs(wl[best] - target) > 15.0) {
    throw Error(Errc::NoBandNear, detail::format_shortest(target) + " nm");
  }
  return best;
}

}  // namespace

std::string to_string(NoiseMethod method) {
  switch (method) {
    case NoiseMethod::spectral_decorrelation: return "spectral_decorrelation";
    case NoiseMethod::spatial_spectral: return "spatial_spectral";
    case NoiseMethod::homogeneous_roi: return "homogeneous_roi";
  }
  return "?";
}

NoiseProfile estimate_noise(const HyperCube& cube, NoiseMethod method, const LabelMask* roi,
                            std::size_t block) {
  NoiseProfile p;
  switch (method) {
    case NoiseMethod::spectral_decorrelation: p = spectral_decorrelation(cube); break;
    case NoiseMethod::spatial_spectral: p = spatial_spectral(cube, block); break;
    case NoiseMethod::homogeneous_roi: p = homogeneous_roi(cube, roi); break;
  }
  p.snr_db = compute_snr(cube, p);
  return p;
}

std::vector<double> compute_snr(const HyperCube& cube, const NoiseProfile& noise) {
  if (noise.sigma.size() != cube.bands()) {
    throw Error(Errc::InvalidArgument, "noise profile length does not match cube bands");
  }
  std::vector<double> snr(cube.bands());
  for (std::size_t b = 0; b < cube.bands(); ++b) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < cube.pixel_count(); ++i) {
      const double v = cube.pixel(i)[b];
      if (cube.is_nodata_value(v)) continue;
      sum += v;
      ++n;
    }
    const double mean = n ? sum / static_cast<double>(n) : 0.0;
    const double sigma = noise.sigma[b];
    double db;
    if (!std::isfinite(sigma)) {
      db = std::numeric_limits<double>::quiet_NaN();
    } else if (sigma == 0.0) {
      db = kSnrCapDb;
    } else if (mean == 0.0) {
      db = -kSnrCapDb;
    } else {
      db = std::clamp(20.0 * std::log10(std::abs(mean) / sigma), -kSnrCapDb, kSnrCapDb);
    }
    snr[b] = db;
  }
  return snr;
}

std::vector<int> detect_bad_bands(const NoiseProfile& noise, double threshold,
                                  BadBandCriterion criterion) {
  std::vector<int> bbl(noise.sigma.size(), 1);
  for (std::size_t b = 0; b < bbl.size(); ++b) {
    if (!std::isfinite(noise.sigma[b])) {
      bbl[b] = 0;
      continue;
    }
    if (criterion == BadBandCriterion::snr_db) {
      if (b >= noise.snr_db.size()) throw Error(Errc::InvalidArgument, "noise profile lacks SNR");
      // NaN SNR compares false and is flagged too.
      if (!(noise.snr_db[b] >= threshold)) bbl[b] = 0;
    } else if (noise.sigma[b] > threshold) {
      bbl[b] = 0;
    }
  }
  return bbl;
}

HyperCube destripe(const HyperCube& cube, StripeAxis axis) {
  HyperCube out = cube;
  const bool by_column = axis == StripeAxis::column;
  const std::size_t groups = by_column ? cube.samples() : cube.lines();
  const std::size_t length = by_column ? cube.lines() : cube.samples();
  auto index = [&](std::size_t g, std::size_t k) {
    return by_column ? k * cube.samples() + g : g * cube.samples() + k;
  };
  for (std::size_t b = 0; b < cube.bands(); ++b) {
    double gsum = 0.0;
    std::size_t gn = 0;
    for (std::size_t i = 0; i < cube.pixel_count(); ++i) {
      const double v = cube.pixel(i)[b];
      if (cube.is_nodata_value(v)) continue;
      gsum += v;
      ++gn;
    }
    if (gn == 0) continue;
    const double gmean = gsum / static_cast<double>(gn);
    double gss = 0.0;
    for (std::size_t i = 0; i < cube.pixel_count(); ++i) {
      const double v = cube.pixel(i)[b];
      if (!cube.is_nodata_value(v)) gss += (v - gmean) * (v - gmean);
    }
    const double gstd = std::sqrt(gss / static_cast<double>(gn));
    for (std::size_t g = 0; g < groups; ++g) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t k = 0; k < length; ++k) {
        const double v = cube.pixel(index(g, k))[b];
        if (cube.is_nodata_value(v)) continue;
        sum += v;
        ++n;
      }
      if (n == 0) continue;
      const double mean = sum / static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t k = 0; k < length; ++k) {
        const double v = cube.pixel(index(g, k))[b];
        if (!cube.is_nodata_value(v)) ss += (v - mean) * (v - mean);
      }
      const double std = std::sqrt(ss / static_cast<double>(n));
      const double gain = std > 0.0 ? gstd / std : 1.0;
      for (std::size_t k = 0; k < length; ++k) {
        double& v = out.pixel(index(g, k))[b];
        if (cube.is_nodata_value(v)) continue;
        v = (v - mean) * gain + gmean;
      }
    }
  }
  return out;
}

HyperCube whiten(const HyperCube& cube, Warnings* warnings) {
  const Eigen::MatrixXd x = cube.valid_matrix();
  if (x.cols() < 2) throw Error(Errc::InsufficientData, "whitening needs at least two valid pixels");
  const auto mc = detail::mean_cov(x);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mc.cov);
  const auto bands = mc.cov.rows();
  Eigen::VectorXd lambda(bands);
  Eigen::MatrixXd u(bands, bands);
  for (Eigen::Index j = 0; j < bands; ++j) {
    lambda(j) = eig.eigenvalues()(bands - 1 - j);
    u.col(j) = eig.eigenvectors().col(bands - 1 - j);
  }
  Eigen::MatrixXd us = u;
  prep::fix_signs(us);
  const double floor = 1e-10 * std::max(lambda(0), 0.0);
  std::size_t floored = 0;
  for (Eigen::Index j = 0; j < bands; ++j) {
    if (lambda(j) < floor || lambda(j) <= 0.0) {
      lambda(j) = floor > 0.0 ? floor : 1.0;
      ++floored;
    }
  }
  if (floored) {
    warn(warnings, std::to_string(floored) + " covariance eigenvalue(s) floored; input is rank deficient");
  }
  const Eigen::MatrixXd transform = lambda.cwiseSqrt().cwiseInverse().asDiagonal() * us.transpose();
  HyperCube out = HyperCube::zeros_like(cube.header(), cube.lines(), cube.samples(), cube.bands());
  out.header().wavelengths.reset();
  out.header().fwhm.reset();
  out.set_nodata(cube.nodata());
  const auto in = cube.matrix();
  auto dst = out.matrix();
  for (std::size_t i = 0; i < cube.pixel_count(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    if (!cube.pixel_valid(i)) {
      dst.col(col).setConstant(*cube.nodata());
      continue;
    }
    dst.col(col).noalias() = transform * (in.col(col) - mc.mean);
  }
  return out;
}

CibrBands cibr_bands(const HyperCube& cube, double absorption_nm, double left_nm, double right_nm) {
  const auto wl = envi::wavelengths_nm(cube.header());
  if (!wl) throw Error(Errc::NoBandNear, "cube has no wavelength metadata");
  CibrBands sel;
  sel.absorption = nearest_band(*wl, absorption_nm);
  sel.left = nearest_band(*wl, left_nm);
  sel.right = nearest_band(*wl, right_nm);
  const double la = (*wl)[sel.absorption], l1 = (*wl)[sel.left], l2 = (*wl)[sel.right];
  if (!(l2 > l1)) throw Error(Errc::InvalidArgument, "CIBR window bands must satisfy left < right");
  sel.w_left = (l2 - la) / (l2 - l1);
  sel.w_right = (la - l1) / (l2 - l1);
  return sel;
}

HyperCube cibr(const HyperCube& cube, double absorption_nm, double left_nm, double right_nm) {
  const CibrBands sel = cibr_bands(cube, absorption_nm, left_nm, right_nm);
  const double nodata = cube.nodata().value_or(kDefaultNodata);
  std::vector<double> ratio(cube.pixel_count(), nodata);
  for (std::size_t i = 0; i < cube.pixel_count(); ++i) {
    if (!cube.pixel_valid(i)) continue;
    const auto px = cube.pixel(i);
    const double continuum = sel.w_left * px[sel.left] + sel.w_right * px[sel.right];
    if (std::abs(continuum) < 1e-12) continue;
    ratio[i] = px[sel.absorption] / continuum;
  }
  HyperCube out = single_band_like(cube, std::move(ratio), nodata);
  out.header().band_names = std::vector<std::string>{"cibr"};
  return out;
}

std::string format_noise_csv(const NoiseProfile& noise,
                             const std::optional<std::vector<double>>& wavelengths) {
  csv::Table t;
  t.columns = {"band", "wavelength", "sigma", "snr_db"};
  for (std::size_t b = 0; b < noise.sigma.size(); ++b) {
    t.rows.push_back({std::to_string(b),
                      wavelengths && b < wavelengths->size() ? detail::format_g10((*wavelengths)[b]) : "",
                      detail::format_g10(noise.sigma[b]),
                      b < noise.snr_db.size() ? detail::format_g10(noise.snr_db[b]) : ""});
  }
  return csv::format(t);
}

}  // namespace hxkit::quality
