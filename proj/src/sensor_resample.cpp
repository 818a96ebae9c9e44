#include "hxkit/sensor_resample.hpp"

#include <cmath>

#include "hxkit/csv.hpp"
#include "hxkit/detail/strings.hpp"
#include "hxkit/envi_io.hpp"

namespace hxkit::sensor {

double fwhm_to_sigma(double fwhm) { return fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0))); }

SpectralResponse gaussian_srf(const std::vector<double>& centers, const std::vector<double>& fwhm,
                              const std::vector<double>& grid) {
  if (centers.size() != fwhm.size() || centers.empty()) {
    throw Error(Errc::InvalidArgument, "centers and fwhm must be nonempty and of equal length");
  }
  if (grid.empty()) throw Error(Errc::InvalidArgument, "wavelength grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw Error(Errc::InvalidArgument, "wavelength grid must be strictly increasing");
    }
  }
  SpectralResponse srf;
  srf.source_wavelengths = grid;
  srf.target_centers = centers;
  srf.target_fwhm = fwhm;
  srf.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(centers.size()),
                                      static_cast<Eigen::Index>(grid.size()));
  for (std::size_t k = 0; k < centers.size(); ++k) {
    if (!(fwhm[k] > 0.0)) throw Error(Errc::InvalidArgument, "fwhm must be positive");
    const double sigma = fwhm_to_sigma(fwhm[k]);
    const double lo = centers[k] - 3.0 * sigma, hi = centers[k] + 3.0 * sigma;
    bool covered = false;
    for (double l : grid) covered = covered || (l >= lo && l <= hi);
    if (!covered) {
      throw Error(Errc::EmptySupport, "no source band within 3 sigma of target center " +
                                          detail::format_shortest(centers[k]) + " nm");
    }
    auto row = srf.weights.row(static_cast<Eigen::Index>(k));
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double d = grid[j] - centers[k];
      row(static_cast<Eigen::Index>(j)) = std::exp(-d * d / (2.0 * sigma * sigma));
    }
    const double cutoff = 1e-6 * row.maxCoeff();
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      if (row(j) < cutoff) row(j) = 0.0;
    }
    row /= row.sum();
  }
  return srf;
}

HyperCube spectral_resample(const HyperCube& cube, const SpectralResponse& srf) {
  if (static_cast<std::size_t>(srf.weights.cols()) != cube.bands()) {
    throw Error(Errc::InvalidArgument, "response has " + std::to_string(srf.weights.cols()) +
                                           " source bands, cube has " + std::to_string(cube.bands()));
  }
  const auto target = static_cast<std::size_t>(srf.weights.rows());
  HyperCube out = HyperCube::zeros_like(cube.header(), cube.lines(), cube.samples(), target);
  out.header().wavelengths = srf.target_centers;
  out.header().fwhm = srf.target_fwhm;
  out.set_nodata(cube.nodata());
  const auto in = cube.matrix();
  auto dst = out.matrix();
  for (std::size_t i = 0; i < cube.pixel_count(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    if (!cube.pixel_valid(i)) {
      dst.col(col).setConstant(*cube.nodata());
      continue;
    }
    dst.col(col).noalias() = srf.weights * in.col(col);
  }
  return out;
}

HyperCube spatial_downsample(const HyperCube& cube, std::size_t factor, Psf psf,
                             Warnings* warnings) {
  if (factor == 0) throw Error(Errc::InvalidArgument, "downsample factor must be positive");
  if (factor > cube.lines() || factor > cube.samples()) {
    throw Error(Errc::InvalidArgument, "downsample factor exceeds image size");
  }
  const std::size_t nl = cube.lines() / factor, ns = cube.samples() / factor;
  if (nl * factor != cube.lines() || ns * factor != cube.samples()) {
    warn(warnings, "image cropped to " + std::to_string(nl * factor) + "x" +
                       std::to_string(ns * factor) + " before downsampling");
  }
  HyperCube out = HyperCube::zeros_like(cube.header(), nl, ns, cube.bands());
  out.set_nodata(cube.nodata());
  const std::size_t bands = cube.bands();
  const double nodata = cube.nodata().value_or(0.0);

  if (psf == Psf::block_mean) {
    for (std::size_t r = 0; r < nl; ++r) {
      for (std::size_t c = 0; c < ns; ++c) {
        auto dst = out.pixel(r, c);
        for (std::size_t b = 0; b < bands; ++b) {
          double sum = 0.0;
          std::size_t n = 0;
          for (std::size_t i = 0; i < factor; ++i) {
            for (std::size_t j = 0; j < factor; ++j) {
              const double v = cube.at(r * factor + i, c * factor + j, b);
              if (cube.is_nodata_value(v)) continue;
              sum += v;
              ++n;
            }
          }
          dst[b] = n ? sum / static_cast<double>(n) : nodata;
        }
      }
    }
    return out;
  }

  // Gaussian kernel evaluated around the (possibly fractional) block centre.
  const double sigma = static_cast<double>(factor) / 2.0;
  const auto radius = static_cast<long>(std::ceil(3.0 * sigma));
  const auto crop_l = static_cast<long>(nl * factor), crop_s = static_cast<long>(ns * factor);
  for (std::size_t r = 0; r < nl; ++r) {
    const double cr = static_cast<double>(r * factor) + (static_cast<double>(factor) - 1.0) / 2.0;
    for (std::size_t c = 0; c < ns; ++c) {
      const double cc = static_cast<double>(c * factor) + (static_cast<double>(factor) - 1.0) / 2.0;
      auto dst = out.pixel(r, c);
      std::vector<double> sum(bands, 0.0), wsum(bands, 0.0);
      const long r0 = static_cast<long>(std::floor(cr)) - radius, r1 = static_cast<long>(std::ceil(cr)) + radius;
      const long c0 = static_cast<long>(std::floor(cc)) - radius, c1 = static_cast<long>(std::ceil(cc)) + radius;
      for (long i = std::max(0L, r0); i <= std::min(crop_l - 1, r1); ++i) {
        for (long j = std::max(0L, c0); j <= std::min(crop_s - 1, c1); ++j) {
          const double di = static_cast<double>(i) - cr, dj = static_cast<double>(j) - cc;
          const double w = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
          const auto px = cube.pixel(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
          for (std::size_t b = 0; b < bands; ++b) {
            if (cube.is_nodata_value(px[b])) continue;
            sum[b] += w * px[b];
            wsum[b] += w;
          }
        }
      }
      for (std::size_t b = 0; b < bands; ++b) dst[b] = wsum[b] > 0.0 ? sum[b] / wsum[b] : nodata;
    }
  }
  return out;
}

SensorDefinition parse_sensor_csv(std::string_view text, std::string name) {
  const auto t = csv::parse(text, true);
  if (t.columns.size() < 2) throw Error(Errc::InvalidArgument, "sensor CSV needs center_nm,fwhm_nm");
  SensorDefinition s;
  s.name = std::move(name);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    s.centers.push_back(csv::number(t, r, 0));
    s.fwhm.push_back(csv::number(t, r, 1));
  }
  if (s.centers.empty()) throw Error(Errc::InvalidArgument, "sensor CSV has no bands");
  return s;
}

SensorDefinition read_sensor_csv(const std::filesystem::path& path) {
  return parse_sensor_csv(envi::read_file_text(path), path.stem().string());
}

SensorDefinition preset(const std::string& name) {
  if (name == "vnir4") return {"vnir4", {490.0, 560.0, 665.0, 842.0}, {65.0, 35.0, 30.0, 115.0}};
  throw Error(Errc::InvalidArgument, "unknown sensor preset '" + name + "'");
}

std::vector<std::string> preset_names() { return {"vnir4"}; }

std::string format_srf_csv(const SpectralResponse& srf) {
  csv::Table t;
  t.columns = {"target_nm", "fwhm_nm"};
  for (double w : srf.source_wavelengths) t.columns.push_back(detail::format_shortest(w));
  for (Eigen::Index k = 0; k < srf.weights.rows(); ++k) {
    std::vector<std::string> row{detail::format_shortest(srf.target_centers[static_cast<std::size_t>(k)]),
                                 detail::format_shortest(srf.target_fwhm[static_cast<std::size_t>(k)])};
    for (Eigen::Index j = 0; j < srf.weights.cols(); ++j) {
      row.push_back(detail::format_shortest(srf.weights(k, j)));
    }
    t.rows.push_back(std::move(row));
  }
  return csv::format(t);
}

SpectralResponse parse_srf_csv(std::string_view text) {
  const auto t = csv::parse(text, true);
  if (t.columns.size() < 3) throw Error(Errc::InvalidArgument, "SRF CSV has no source columns");
  SpectralResponse srf;
  for (std::size_t j = 2; j < t.columns.size(); ++j) {
    const auto w = detail::parse_double(t.columns[j]);
    if (!w) throw Error(Errc::InvalidArgument, "SRF CSV header must list source wavelengths");
    srf.source_wavelengths.push_back(*w);
  }
  srf.weights.resize(static_cast<Eigen::Index>(t.rows.size()),
                     static_cast<Eigen::Index>(srf.source_wavelengths.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    srf.target_centers.push_back(csv::number(t, r, 0));
    srf.target_fwhm.push_back(csv::number(t, r, 1));
    for (std::size_t j = 0; j < srf.source_wavelengths.size(); ++j) {
      srf.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = csv::number(t, r, j + 2);
    }
  }
  return srf;
}

}  // namespace hxkit::sensor
