#include <doctest.h>

#include <cmath>
#include <limits>

#include "hxkit/quality.hpp"
#include "hxkit/rng.hpp"
#include "support/synthetic.hpp"

using namespace hxkit;
using quality::NoiseMethod;

namespace {

std::vector<double> column_means(const HyperCube& c, std::size_t band) {
  std::vector<double> m(c.samples(), 0.0);
  for (std::size_t r = 0; r < c.lines(); ++r)
    for (std::size_t s = 0; s < c.samples(); ++s) m[s] += c.at(r, s, band) / c.lines();
  return m;
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd centered = x.colwise() - x.rowwise().mean();
  return centered * centered.transpose() / static_cast<double>(x.cols() - 1);
}

}  // namespace

TEST_CASE("noise estimators recover a known sigma") {
  std::vector<double> sigma(20);
  for (std::size_t b = 0; b < 20; ++b) sigma[b] = 0.5 + 0.1 * b;
  const HyperCube c = hxtest::noise_cube(64, 64, 20, 100.0, sigma, 101);
  for (auto m : {NoiseMethod::spectral_decorrelation, NoiseMethod::spatial_spectral}) {
    const auto np = quality::estimate_noise(c, m);
    REQUIRE(np.sigma.size() == 20);
    for (std::size_t b = 0; b < 20; ++b) CHECK(std::abs(np.sigma[b] / sigma[b] - 1.0) <= 0.1);
  }
}

TEST_CASE("noiseless gradients estimate near-zero noise") {
  const HyperCube c = hxtest::gradient_cube(32, 32, 10);
  for (auto m : {NoiseMethod::spectral_decorrelation, NoiseMethod::spatial_spectral}) {
    for (double s : quality::estimate_noise(c, m).sigma) CHECK(s <= 1e-6);
  }
}

TEST_CASE("noise estimates ignore per-band offsets") {
  const HyperCube c = hxtest::noise_cube(32, 32, 6, 1.0, std::vector<double>(6, 1.0), 3);
  HyperCube shifted = c;
  for (std::size_t n = 0; n < c.pixel_count(); ++n)
    for (std::size_t b = 0; b < 6; ++b) shifted.pixel(n)[b] += 10.0 * b;
  for (auto m : {NoiseMethod::spectral_decorrelation, NoiseMethod::spatial_spectral}) {
    const auto a = quality::estimate_noise(c, m), b = quality::estimate_noise(shifted, m);
    for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(a.sigma[k] - b.sigma[k]) <= 1e-9);
  }
}

TEST_CASE("homogeneous roi noise") {
  const HyperCube c = hxtest::noise_cube(40, 40, 4, 50.0, std::vector<double>(4, 2.0), 77);
  LabelMask roi(40, 40);
  for (std::size_t r = 5; r < 35; ++r)
    for (std::size_t s = 5; s < 35; ++s) roi.at(r, s) = 1;
  const auto np = quality::estimate_noise(c, NoiseMethod::homogeneous_roi, &roi);
  for (double s : np.sigma) CHECK(std::abs(s / 2.0 - 1.0) <= 0.1);

  CHECK_THROWS_AS(quality::estimate_noise(c, NoiseMethod::homogeneous_roi), Error);
  LabelMask tiny(40, 40);
  for (std::size_t s = 0; s < 15; ++s) tiny.at(0, s) = 1;
  CHECK_THROWS_AS(quality::estimate_noise(c, NoiseMethod::homogeneous_roi, &tiny), Error);
}

TEST_CASE("snr arithmetic and cap") {
  HyperCube c = HyperCube::zeros(1, 2, 3);
  for (std::size_t n = 0; n < 2; ++n) {
    c.pixel(n)[0] = 100.0;
    c.pixel(n)[1] = 1.0;
    c.pixel(n)[2] = 5.0;
  }
  quality::NoiseProfile np;
  np.sigma = {1.0, 1.0, 0.0};
  const auto snr = quality::compute_snr(c, np);
  CHECK(snr[0] == doctest::Approx(40.0));
  CHECK(snr[1] == doctest::Approx(0.0));
  CHECK(snr[2] == quality::kSnrCapDb);
}

TEST_CASE("snr is scale invariant") {
  const HyperCube c = hxtest::noise_cube(32, 32, 5, 20.0, std::vector<double>(5, 1.0), 4);
  HyperCube k = c;
  for (auto& v : k.values()) v *= 3.7;
  const auto a = quality::compute_snr(c, quality::estimate_noise(c, NoiseMethod::spectral_decorrelation));
  const auto b = quality::compute_snr(k, quality::estimate_noise(k, NoiseMethod::spectral_decorrelation));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-9);
}

TEST_CASE("bad band thresholds") {
  quality::NoiseProfile np;
  np.sigma = {1, 1, 1};
  np.snr_db = {40, 5, 35};
  CHECK(quality::detect_bad_bands(np, 10.0) == std::vector<int>{1, 0, 1});
  CHECK(quality::detect_bad_bands(np, -std::numeric_limits<double>::infinity()) ==
        std::vector<int>{1, 1, 1});
  np.snr_db = {120, 120, 120};
  CHECK(quality::detect_bad_bands(np, 200.0) == std::vector<int>{0, 0, 0});
  np.snr_db = {40, 40, 40};
  np.sigma = {1, std::numeric_limits<double>::quiet_NaN(), 1};
  CHECK(quality::detect_bad_bands(np, 10.0) == std::vector<int>{1, 0, 1});
  np.sigma = {0.5, 2.0, 1.0};
  CHECK(quality::detect_bad_bands(np, 1.5, quality::BadBandCriterion::sigma) ==
        std::vector<int>{1, 0, 1});
}

TEST_CASE("destripe removes column offsets") {
  HyperCube c = hxtest::noise_cube(30, 12, 2, 10.0, {1.0, 1.0}, 6);
  for (std::size_t r = 0; r < 30; ++r)
    for (std::size_t s = 0; s < 12; ++s) c.at(r, s, 0) += 0.5 * s;
  const HyperCube d = quality::destripe(c, quality::StripeAxis::column);
  const auto m = column_means(d, 0);
  for (double v : m) CHECK(std::abs(v - m[0]) <= 1e-9);
}

TEST_CASE("destripe leaves a constant band alone") {
  HyperCube c = HyperCube::zeros(5, 6, 1);
  for (auto& v : c.values()) v = 3.0;
  CHECK(quality::destripe(c, quality::StripeAxis::row) == c);
}

TEST_CASE("destripe removes gain stripes") {
  // Stripe generator: smooth scene plus noise, column 4 scaled by 1.1.
  HyperCube c = hxtest::noise_cube(60, 10, 1, 0.0, {0.5}, 8);
  for (std::size_t r = 0; r < 60; ++r)
    for (std::size_t s = 0; s < 10; ++s) {
      c.at(r, s, 0) += 100.0 + 5.0 * std::sin(0.1 * r);
      if (s == 4) c.at(r, s, 0) *= 1.1;
    }
  const auto m = column_means(quality::destripe(c, quality::StripeAxis::column), 0);
  const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
  CHECK(*hi - *lo <= 0.01 * 100.0);
}

TEST_CASE("whitening yields identity covariance") {
  HyperCube c = HyperCube::zeros(20, 20, 5);
  Rng rng(31);
  Eigen::MatrixXd mix = Eigen::MatrixXd::Random(5, 5) + 3.0 * Eigen::MatrixXd::Identity(5, 5);
  for (std::size_t n = 0; n < c.pixel_count(); ++n) {
    Eigen::VectorXd z(5);
    for (int i = 0; i < 5; ++i) z(i) = rng.normal();
    const Eigen::VectorXd x = mix * z;
    for (int i = 0; i < 5; ++i) c.pixel(n)[i] = x(i) + 7.0;
  }
  const HyperCube w = quality::whiten(c);
  const Eigen::MatrixXd cov = covariance(w.matrix());
  CHECK((cov - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-6);

  const Eigen::MatrixXd cov2 = covariance(quality::whiten(w).matrix());
  CHECK((cov2 - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("whitening a rank-deficient cube warns") {
  HyperCube c = HyperCube::zeros(10, 10, 3);
  Rng rng(2);
  for (std::size_t n = 0; n < c.pixel_count(); ++n) {
    const double a = rng.normal(), b = rng.normal();
    c.pixel(n)[0] = a;
    c.pixel(n)[1] = b;
    c.pixel(n)[2] = a + b;
  }
  Warnings w;
  quality::whiten(c, &w);
  CHECK_FALSE(w.empty());
}

TEST_CASE("cibr weights and ratios") {
  HyperCube c = HyperCube::zeros(1, 3, 3);
  c.header().wavelengths = std::vector<double>{865.0, 940.0, 1025.0};
  const auto bands = quality::cibr_bands(c);
  CHECK(bands.w_left == doctest::Approx(0.53125));
  CHECK(bands.w_right == doctest::Approx(0.46875));
  // flat, linear, half-depth absorption
  const double px[3][3] = {{2, 2, 2}, {1.0, 1.0 + 0.001 * 75, 1.0 + 0.001 * 160}, {4, 2, 4}};
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t b = 0; b < 3; ++b) c.pixel(n)[b] = px[n][b];
  const HyperCube r = quality::cibr(c);
  CHECK(r.bands() == 1);
  CHECK(r.values()[0] == doctest::Approx(1.0));
  CHECK(r.values()[1] == doctest::Approx(1.0));
  CHECK(r.values()[2] == doctest::Approx(0.5));

  HyperCube far = c;
  far.header().wavelengths = std::vector<double>{865.0, 900.0, 1025.0};
  try {
    quality::cibr(far);
    FAIL("expected NoBandNear");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NoBandNear);
  }
}

TEST_CASE("noise csv lists every band") {
  quality::NoiseProfile np;
  np.sigma = {0.1, 0.2};
  np.snr_db = {30, 20};
  const std::string csv = quality::format_noise_csv(np, std::vector<double>{500, 600});
  CHECK(csv.find("band,wavelength,sigma,snr_db") == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
