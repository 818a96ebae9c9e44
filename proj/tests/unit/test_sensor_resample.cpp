#include <doctest.h>

#include <cmath>

#include "hxkit/rng.hpp"
#include "hxkit/sensor_resample.hpp"
#include "support/oracles.hpp"

using namespace hxkit;

namespace {

std::vector<double> grid(double first, double last, double step) {
  std::vector<double> g;
  for (double x = first; x <= last + 1e-9; x += step) g.push_back(x);
  return g;
}

HyperCube with_wavelengths(HyperCube c, const std::vector<double>& wl) {
  c.header().wavelengths = wl;
  return c;
}

}  // namespace

TEST_CASE("fwhm to sigma") {
  CHECK(sensor::fwhm_to_sigma(10.0) == doctest::Approx(4.24661).epsilon(1e-6));
}

TEST_CASE("srf rows match the independent weight oracle") {
  const auto g = grid(400, 1000, 5);
  const std::vector<double> centers = {490, 560, 665, 842}, fwhm = {65, 35, 30, 115};
  const auto srf = sensor::gaussian_srf(centers, fwhm, g);
  REQUIRE(srf.weights.rows() == 4);
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const auto w = hxtest::oracle::gaussian_band_weights(g, centers[k], fwhm[k]);
    double sum = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double v = srf.weights(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
      CHECK(v >= 0.0);
      CHECK(v == doctest::Approx(w[j]).epsilon(1e-12));
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("srf is symmetric on a symmetric grid and a single point is a delta") {
  const auto g = grid(500, 600, 2);
  const auto srf = sensor::gaussian_srf({550}, {20}, g);
  const Eigen::Index n = srf.weights.cols();
  for (Eigen::Index j = 0; j < n; ++j) {
    CHECK(srf.weights(0, j) == doctest::Approx(srf.weights(0, n - 1 - j)).epsilon(1e-14));
  }
  const auto one = sensor::gaussian_srf({550}, {20}, {550});
  CHECK(one.weights(0, 0) == 1.0);
}

TEST_CASE("srf preconditions") {
  CHECK_THROWS_AS(sensor::gaussian_srf({550}, {0}, {540, 550}), Error);
  CHECK_THROWS_AS(sensor::gaussian_srf({550}, {10}, {550, 540}), Error);
  try {
    sensor::gaussian_srf({900}, {10}, grid(400, 800, 10));
    FAIL("expected EmptySupport");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptySupport);
  }
}

TEST_CASE("resampling a constant spectrum is exact") {
  const auto g = grid(400, 1000, 10);
  HyperCube c = with_wavelengths(HyperCube::zeros(2, 3, g.size()), g);
  for (auto& v : c.values()) v = 0.37;
  const auto mx = sensor::preset("vnir4");
  const auto srf = sensor::gaussian_srf(mx.centers, mx.fwhm, g);
  const HyperCube out = sensor::spectral_resample(c, srf);
  CHECK(out.bands() == 4);
  for (double v : out.values()) CHECK(std::abs(v - 0.37) <= 1e-12);
  CHECK(*out.header().wavelengths == mx.centers);
  CHECK(*out.header().fwhm == mx.fwhm);
}

TEST_CASE("indicator rows pick out bands") {
  HyperCube c = HyperCube::zeros(2, 2, 3);
  Rng rng(1);
  for (auto& v : c.values()) v = rng.uniform();
  sensor::SpectralResponse srf;
  srf.source_wavelengths = {1, 2, 3};
  srf.target_centers = {2};
  srf.target_fwhm = {1};
  srf.weights = Eigen::MatrixXd::Zero(1, 3);
  srf.weights(0, 1) = 1.0;
  const HyperCube out = sensor::spectral_resample(c, srf);
  for (std::size_t n = 0; n < 4; ++n) CHECK(out.pixel(n)[0] == c.pixel(n)[1]);
}

TEST_CASE("Gaussian average of a linear spectrum equals the centre value") {
  // Oracle: trapezoid quadrature of the Gaussian-weighted integral on a much
  // finer grid than the resampler sees.
  const double c0 = 700.0, fwhm = 40.0, a = 0.2, b = 3e-4;
  auto f = [&](double l) { return a + b * l; };
  const double sigma = fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  double num = 0.0, den = 0.0;
  const double h = 0.01;
  for (double l = c0 - 10 * sigma; l <= c0 + 10 * sigma; l += h) {
    const double w = std::exp(-0.5 * std::pow((l - c0) / sigma, 2));
    num += w * f(l) * h;
    den += w * h;
  }
  const double quadrature = num / den;

  const auto g = grid(500, 900, 1);
  HyperCube cube = with_wavelengths(HyperCube::zeros(1, 1, g.size()), g);
  for (std::size_t j = 0; j < g.size(); ++j) cube.at(0, 0, j) = f(g[j]);
  const auto srf = sensor::gaussian_srf({c0}, {fwhm}, g);
  const double v = sensor::spectral_resample(cube, srf).at(0, 0, 0);
  CHECK(std::abs(v - quadrature) <= 1e-6);
  CHECK(std::abs(v - f(c0)) <= 1e-6);
}

TEST_CASE("resampling commutes with positive scaling") {
  const auto g = grid(400, 1000, 10);
  HyperCube c = with_wavelengths(HyperCube::zeros(3, 3, g.size()), g);
  Rng rng(2);
  for (auto& v : c.values()) v = rng.uniform();
  HyperCube scaled = c;
  for (auto& v : scaled.values()) v *= 7.5;
  const auto srf = sensor::gaussian_srf({500, 800}, {30, 60}, g);
  const HyperCube a = sensor::spectral_resample(c, srf), b = sensor::spectral_resample(scaled, srf);
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    CHECK(b.values()[i] == doctest::Approx(7.5 * a.values()[i]).epsilon(1e-12));
  }
}

TEST_CASE("block mean downsampling") {
  HyperCube c = HyperCube::zeros(2, 2, 1);
  c.values() = {1, 2, 3, 4};
  CHECK(sensor::spatial_downsample(c, 2, sensor::Psf::block_mean).values()[0] == 2.5);
  CHECK(sensor::spatial_downsample(c, 1, sensor::Psf::block_mean) == c);

  HyperCube big = HyperCube::zeros(8, 12, 3);
  Rng rng(4);
  for (auto& v : big.values()) v = rng.uniform();
  const HyperCube small = sensor::spatial_downsample(big, 4, sensor::Psf::block_mean);
  CHECK(small.lines() == 2);
  CHECK(small.samples() == 3);
  for (std::size_t b = 0; b < 3; ++b) {
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t n = 0; n < big.pixel_count(); ++n) m1 += big.pixel(n)[b];
    for (std::size_t n = 0; n < small.pixel_count(); ++n) m2 += small.pixel(n)[b];
    CHECK(m1 / big.pixel_count() == doctest::Approx(m2 / small.pixel_count()).epsilon(1e-12));
  }
}

TEST_CASE("constant images stay constant under both point spread functions") {
  HyperCube c = HyperCube::zeros(9, 9, 2);
  for (auto& v : c.values()) v = 5.0;
  Warnings w;
  for (auto psf : {sensor::Psf::block_mean, sensor::Psf::gaussian}) {
    const HyperCube d = sensor::spatial_downsample(c, 2, psf, &w);
    CHECK(d.lines() == 4);
    for (double v : d.values()) CHECK(v == doctest::Approx(5.0).epsilon(1e-12));
  }
  CHECK_FALSE(w.empty());
}

TEST_CASE("sensor csv and presets") {
  const auto def = sensor::parse_sensor_csv("center_nm,fwhm_nm\n450,20\n550,25\n");
  CHECK(def.centers == std::vector<double>{450, 550});
  CHECK(def.fwhm == std::vector<double>{20, 25});
  const auto vnir = sensor::preset("vnir4");
  CHECK(vnir.centers.size() == 4);
  CHECK_THROWS_AS(sensor::preset("nope"), Error);
}

TEST_CASE("srf csv round trip") {
  const auto g = grid(400, 700, 25);
  const auto srf = sensor::gaussian_srf({500, 600}, {40, 50}, g);
  const auto back = sensor::parse_srf_csv(sensor::format_srf_csv(srf));
  CHECK(back.source_wavelengths == srf.source_wavelengths);
  CHECK(back.target_centers == srf.target_centers);
  CHECK((back.weights - srf.weights).cwiseAbs().maxCoeff() <= 1e-15);
}
