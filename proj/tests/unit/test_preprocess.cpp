#include <doctest.h>

#include <cmath>

#include "hxkit/preprocess.hpp"
#include "hxkit/rng.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace hxkit;

namespace {

HyperCube random_cube(std::size_t lines, std::size_t samples, std::size_t bands, std::uint64_t seed) {
  HyperCube c = HyperCube::zeros(lines, samples, bands);
  Rng rng(seed);
  for (auto& v : c.values()) v = rng.uniform();
  return c;
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd centered = x.colwise() - x.rowwise().mean();
  return centered * centered.transpose() / static_cast<double>(x.cols() - 1);
}

}  // namespace

TEST_CASE("savgol window 5 order 2 weights from the local least-squares system") {
  const Eigen::VectorXd w = prep::savgol_coefficients(5, 2);
  const std::vector<double> t = {-2, -1, 0, 1, 2};
  for (int j = 0; j < 5; ++j) {
    std::vector<double> e(5, 0.0);
    e[j] = 1.0;
    CHECK(w(j) == doctest::Approx(hxtest::oracle::polyfit_eval(t, e, 2, 0.0)).epsilon(1e-12));
  }
  const double expect[] = {-3, 12, 17, 12, -3};
  for (int j = 0; j < 5; ++j) CHECK(w(j) == doctest::Approx(expect[j] / 35.0).epsilon(1e-12));
}

TEST_CASE("savgol off-centre weights match the oracle") {
  const std::vector<double> t = {-3, -2, -1, 0, 1, 2, 3};
  for (long off : {-3L, -1L, 2L}) {
    const Eigen::VectorXd w = prep::savgol_coefficients(7, 3, off);
    for (int j = 0; j < 7; ++j) {
      std::vector<double> e(7, 0.0);
      e[j] = 1.0;
      CHECK(w(j) == doctest::Approx(hxtest::oracle::polyfit_eval(t, e, 3, off)).epsilon(1e-10));
    }
  }
}

TEST_CASE("savgol reproduces polynomials up to its order") {
  Rng rng(9);
  for (std::size_t order = 0; order <= 4; ++order) {
    for (std::size_t deg = 0; deg <= order; ++deg) {
      std::vector<double> coef(deg + 1);
      for (auto& c : coef) c = rng.normal();
      std::vector<double> s(40);
      for (std::size_t i = 0; i < s.size(); ++i) {
        const double x = static_cast<double>(i) / 10.0;
        double v = 0.0;
        for (std::size_t k = deg + 1; k-- > 0;) v = v * x + coef[k];
        s[i] = v;
      }
      const std::size_t window = 2 * order + 3;
      const auto out = prep::savitzky_golay(s, window, order);
      for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(out[i] - s[i]) <= 1e-9);
    }
  }
}

TEST_CASE("savgol mirror edges keep constants and interior polynomials") {
  std::vector<double> s(20);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = 1.0 + 0.5 * i - 0.01 * i * i;
  const auto out = prep::savitzky_golay(s, 7, 3, prep::EdgeMode::mirror);
  for (std::size_t i = 3; i + 3 < s.size(); ++i) CHECK(std::abs(out[i] - s[i]) <= 1e-9);
  const std::vector<double> flat(10, 2.5);
  for (double v : prep::savitzky_golay(flat, 5, 2, prep::EdgeMode::mirror)) {
    CHECK(v == doctest::Approx(2.5));
  }
}

TEST_CASE("savgol preconditions") {
  const std::vector<double> s(10, 1.0);
  CHECK_THROWS_AS(prep::savitzky_golay(s, 4, 2), Error);
  CHECK_THROWS_AS(prep::savitzky_golay(s, 5, 5), Error);
  CHECK_THROWS_AS(prep::savitzky_golay(s, 11, 2), Error);
  CHECK_THROWS_AS(prep::savitzky_golay(s, 1, 0), Error);
}

TEST_CASE("continuum removal fixtures") {
  const std::vector<double> wl = {1, 2, 3, 4, 5};
  const std::vector<double> lin = {1, 2, 3, 4, 5};
  for (double v : prep::continuum_removal(lin, wl)) CHECK(v == doctest::Approx(1.0));
  const std::vector<double> s = {1, 0.6, 0.9, 0.7, 1};
  const auto cr = prep::continuum_removal(s, wl);
  for (int i = 0; i < 5; ++i) CHECK(cr[i] == doctest::Approx(s[i]).epsilon(1e-14));
  CHECK(cr[0] == 1.0);
  CHECK(cr[4] == 1.0);
  CHECK(1.0 - *std::min_element(cr.begin(), cr.end()) == doctest::Approx(0.4));
  const std::vector<double> bad = {1, 0, 1, 1, 1};
  try {
    prep::continuum_removal(bad, wl);
    FAIL("expected NonPositiveInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonPositiveInput);
  }
}

TEST_CASE("continuum removal is bounded and idempotent") {
  Rng rng(21);
  std::vector<double> wl(60);
  for (std::size_t i = 0; i < wl.size(); ++i) wl[i] = 400.0 + 7.0 * i;
  for (int t = 0; t < 30; ++t) {
    std::vector<double> s(wl.size());
    for (auto& v : s) v = 0.05 + rng.uniform();
    const auto cr = prep::continuum_removal(s, wl);
    for (double v : cr) {
      CHECK(v > 0.0);
      CHECK(v <= 1.0 + 1e-12);
    }
    const auto again = prep::continuum_removal(cr, wl);
    for (std::size_t i = 0; i < cr.size(); ++i) CHECK(std::abs(again[i] - cr[i]) <= 1e-9);
  }
}

TEST_CASE("per-band scalers") {
  HyperCube c = HyperCube::zeros(1, 3, 3);
  c.values() = {1, 2, 5, 2, 4, 5, 3, 6, 5};
  Warnings w;
  const HyperCube st = prep::fit_transform(c, prep::Scaling::standard, &w);
  double mean = 0, var = 0;
  for (std::size_t n = 0; n < 3; ++n) mean += st.pixel(n)[0] / 3.0;
  for (std::size_t n = 0; n < 3; ++n) var += std::pow(st.pixel(n)[0] - mean, 2) / 3.0;
  CHECK(mean == doctest::Approx(0.0));
  CHECK(std::sqrt(var) == doctest::Approx(1.0));
  CHECK(w.size() == 1);  // constant third band
  for (std::size_t n = 0; n < 3; ++n) CHECK(st.pixel(n)[2] == 0.0);

  const HyperCube mm = prep::fit_transform(c, prep::Scaling::minmax);
  CHECK(mm.pixel(0)[1] == 0.0);
  CHECK(mm.pixel(1)[1] == 0.5);
  CHECK(mm.pixel(2)[1] == 1.0);

  const HyperCube rb = prep::fit_transform(c, prep::Scaling::robust);
  CHECK(rb.pixel(1)[0] == doctest::Approx(0.0));
}

TEST_CASE("PCA basics") {
  const HyperCube c = random_cube(10, 12, 6, 3);
  const auto m = prep::fit_pca(c, 6);
  const Eigen::MatrixXd gram = m.basis.transpose() * m.basis;
  CHECK((gram - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-8);
  for (Eigen::Index i = 1; i < m.eigenvalues.size(); ++i) CHECK(m.eigenvalues(i) <= m.eigenvalues(i - 1));
  double total = 0.0;
  for (double r : m.explained_variance_ratio()) total += r;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  const HyperCube scores = prep::apply(m, c);
  const Eigen::MatrixXd cov = covariance(scores.matrix());
  const double maxvar = cov.diagonal().maxCoeff();
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 6; ++j)
      if (i != j) CHECK(std::abs(cov(i, j)) <= 1e-8 * maxvar);

  const HyperCube back = prep::inverse(m, scores);
  CHECK((back.matrix() - c.matrix()).cwiseAbs().maxCoeff() <= 1e-8);

  // sign convention: largest-magnitude loading positive
  for (Eigen::Index k = 0; k < m.basis.cols(); ++k) {
    Eigen::Index arg;
    m.basis.col(k).cwiseAbs().maxCoeff(&arg);
    CHECK(m.basis(arg, k) > 0.0);
  }
}

TEST_CASE("PCA of perfectly correlated bands is rank one") {
  HyperCube c = HyperCube::zeros(5, 5, 2);
  Rng rng(8);
  for (std::size_t n = 0; n < 25; ++n) {
    const double v = rng.normal();
    c.pixel(n)[0] = v;
    c.pixel(n)[1] = 3.0 * v + 1.0;
  }
  const auto m = prep::fit_pca(c, 2);
  CHECK(m.eigenvalues(1) <= 1e-10 * m.total_variance);
}

TEST_CASE("MNF on pure noise has eigenvalues near one") {
  const HyperCube c = hxtest::noise_cube(100, 100, 20, 0.0, std::vector<double>(20, 1.0), 17);
  const auto m = prep::fit_mnf(c, 20);
  for (Eigen::Index i = 0; i < m.eigenvalues.size(); ++i) {
    CHECK(std::abs(m.eigenvalues(i) - 1.0) <= 0.1);
    if (i > 0) CHECK(m.eigenvalues(i) <= m.eigenvalues(i - 1));
  }
}

TEST_CASE("MNF separates a rank-one signal from weak noise") {
  HyperCube c = hxtest::noise_cube(40, 40, 8, 0.0, std::vector<double>(8, 0.05), 5);
  for (std::size_t r = 0; r < 40; ++r)
    for (std::size_t col = 0; col < 40; ++col) {
      const double s = std::sin(0.2 * r) + std::cos(0.15 * col);
      for (std::size_t b = 0; b < 8; ++b) c.at(r, col, b) += s * (1.0 + 0.1 * b);
    }
  const auto m = prep::fit_mnf(c, 8);
  CHECK(m.eigenvalues(0) > 50.0 * m.eigenvalues(1));
}

TEST_CASE("MNF with identity noise equals PCA") {
  const HyperCube c = random_cube(9, 9, 5, 6);
  const auto pca = prep::fit_pca(c, 5);
  const auto mnf = prep::fit_mnf(c, 5, prep::NoiseEstimator::provided, Eigen::MatrixXd::Identity(5, 5));
  // Eigenvalues agree up to the regularization of the identity.
  const double reg = 1.0 + 1e-10;
  for (Eigen::Index i = 0; i < 5; ++i) {
    CHECK(mnf.eigenvalues(i) * reg == doctest::Approx(pca.eigenvalues(i)).epsilon(1e-8));
    const double dot = std::abs(mnf.basis.col(i).normalized().dot(pca.basis.col(i)));
    CHECK(dot == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("MNF needs two columns") {
  const HyperCube c = random_cube(10, 1, 3, 1);
  CHECK_THROWS_AS(prep::fit_mnf(c, 3), Error);
}

TEST_CASE("transform models survive json") {
  const HyperCube c = random_cube(6, 7, 4, 12);
  const auto m = prep::fit_mnf(c, 3);
  const auto back = prep::model_from_json(prep::model_to_json(m));
  CHECK(back.kind == prep::TransformKind::mnf);
  CHECK((back.basis - m.basis).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.mean - m.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK(prep::apply(back, c) == prep::apply(m, c));
}
