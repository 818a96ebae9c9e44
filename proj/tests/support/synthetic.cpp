#include "synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hxkit/rng.hpp"

namespace hxtest {

Eigen::MatrixXd random_endmembers(std::size_t bands, std::size_t p, std::uint64_t seed) {
  hxkit::Rng rng(seed);
  Eigen::MatrixXd e(bands, p);
  for (std::size_t k = 0; k < p; ++k) {
    // Baseline plus a few Gaussian bumps on a normalized axis.
    const double base = 0.1 + 0.3 * rng.uniform();
    const double tilt = 0.3 * (rng.uniform() - 0.5);
    std::vector<double> centers(3), widths(3), heights(3);
    for (int j = 0; j < 3; ++j) {
      centers[j] = rng.uniform();
      widths[j] = 0.05 + 0.15 * rng.uniform();
      heights[j] = 0.5 * (rng.uniform() - 0.3);
    }
    for (std::size_t b = 0; b < bands; ++b) {
      const double t = bands > 1 ? static_cast<double>(b) / static_cast<double>(bands - 1) : 0.0;
      double v = base + tilt * t;
      for (int j = 0; j < 3; ++j) {
        const double d = (t - centers[j]) / widths[j];
        v += heights[j] * std::exp(-0.5 * d * d);
      }
      e(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) = std::clamp(v, 0.05, 0.95);
    }
  }
  return e;
}

std::vector<double> linear_wavelengths(std::size_t bands, double first, double last) {
  std::vector<double> w(bands);
  for (std::size_t b = 0; b < bands; ++b) {
    w[b] = bands > 1 ? first + (last - first) * static_cast<double>(b) / static_cast<double>(bands - 1)
                     : first;
  }
  return w;
}

hxkit::HyperCube cube_from_matrix(const Eigen::MatrixXd& m, std::size_t lines, std::size_t samples) {
  hxkit::HeaderInfo h;
  h.lines = lines;
  h.samples = samples;
  h.bands = static_cast<std::size_t>(m.rows());
  h.wavelengths = linear_wavelengths(h.bands);
  std::vector<double> values(m.data(), m.data() + m.size());
  return hxkit::HyperCube(std::move(h), std::move(values));
}

Mixture linear_mixture_with(const Eigen::MatrixXd& endmembers, std::size_t lines,
                            std::size_t samples, double snr_db, std::uint64_t seed) {
  hxkit::Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const auto p = static_cast<std::size_t>(endmembers.cols());
  const std::size_t n = lines * samples;
  Eigen::MatrixXd a(p, n);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t k = 0; k < p; ++k) {
      double u;
      do {
        u = rng.uniform();
      } while (u <= 0.0);
      a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = -std::log(u);
      total += -std::log(u);
    }
    a.col(static_cast<Eigen::Index>(i)) /= total;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::size_t> pure(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(p));
  for (std::size_t k = 0; k < p; ++k) {
    a.col(static_cast<Eigen::Index>(pure[k])).setZero();
    a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(pure[k])) = 1.0;
  }
  Eigen::MatrixXd x = endmembers * a;
  double sigma = 0.0;
  if (snr_db > 0.0) {
    const double signal_power = x.squaredNorm() / static_cast<double>(x.size());
    sigma = std::sqrt(signal_power / std::pow(10.0, snr_db / 10.0));
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] += sigma * rng.normal();
  }
  Mixture out{cube_from_matrix(x, lines, samples), endmembers, a, pure, sigma};
  return out;
}

Mixture linear_mixture(std::size_t lines, std::size_t samples, std::size_t bands, std::size_t p,
                       double snr_db, std::uint64_t seed) {
  return linear_mixture_with(random_endmembers(bands, p, seed), lines, samples, snr_db, seed);
}

hxkit::HyperCube noise_cube(std::size_t lines, std::size_t samples, std::size_t bands,
                            double level, const std::vector<double>& sigma, std::uint64_t seed) {
  hxkit::Rng rng(seed);
  Eigen::MatrixXd x(bands, lines * samples);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (std::size_t b = 0; b < bands; ++b) {
      x(static_cast<Eigen::Index>(b), j) = level + sigma[b] * rng.normal();
    }
  }
  return cube_from_matrix(x, lines, samples);
}

namespace {
double angle_deg(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double c = std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0);
  return std::acos(c) * 180.0 / 3.14159265358979323846;
}
}  // namespace

std::vector<double> matched_angles_deg(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate) {
  const auto p = static_cast<std::size_t>(truth.cols());
  std::vector<std::size_t> perm(p);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> best;
  double best_sum = 1e300;
  do {
    std::vector<double> angles(p);
    double sum = 0.0;
    for (std::size_t k = 0; k < p; ++k) {
      angles[k] = angle_deg(truth.col(static_cast<Eigen::Index>(k)),
                            estimate.col(static_cast<Eigen::Index>(perm[k])));
      sum += angles[k];
    }
    if (sum < best_sum) {
      best_sum = sum;
      best = angles;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

hxkit::HyperCube gradient_cube(std::size_t lines, std::size_t samples, std::size_t bands) {
  hxkit::HyperCube c = hxkit::HyperCube::zeros(lines, samples, bands);
  for (std::size_t r = 0; r < lines; ++r)
    for (std::size_t s = 0; s < samples; ++s)
      for (std::size_t b = 0; b < bands; ++b)
        c.at(r, s, b) = 10.0 + 0.5 * b + (1.0 + 0.05 * b) * (0.3 * r + 0.2 * s);
  return c;
}

hxkit::HyperCube smooth_scene(std::size_t size, std::size_t bands, std::uint64_t seed) {
  const Eigen::MatrixXd E = random_endmembers(bands, 3, seed);
  Eigen::MatrixXd A(3, static_cast<Eigen::Index>(size * size));
  for (std::size_t r = 0; r < size; ++r)
    for (std::size_t c = 0; c < size; ++c) {
      const double u = static_cast<double>(r) / size, v = static_cast<double>(c) / size;
      Eigen::Vector3d a(1.0 + std::sin(6.0 * u) * std::cos(5.0 * v), 1.0 + std::cos(7.0 * u + 1.0),
                        1.0 + std::sin(4.0 * v + 2.0 * u));
      a = a.cwiseMax(0.0);
      A.col(static_cast<Eigen::Index>(r * size + c)) = a / a.sum();
    }
  return cube_from_matrix(E * A, size, size);
}

Eigen::MatrixXd band_average_response(std::size_t mx, std::size_t hx) {
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(mx), static_cast<Eigen::Index>(hx));
  const std::size_t width = hx / mx;
  for (std::size_t k = 0; k < mx; ++k)
    for (std::size_t j = k * width; j < (k + 1) * width; ++j)
      R(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = 1.0 / static_cast<double>(width);
  return R;
}

LabelledScene two_classes(std::size_t lines, std::size_t samples, std::size_t bands, double sigma,
                          std::uint64_t seed) {
  LabelledScene s{hxkit::HyperCube::zeros(lines, samples, bands), hxkit::LabelMask(lines, samples)};
  hxkit::Rng rng(seed);
  for (std::size_t r = 0; r < lines; ++r)
    for (std::size_t c = 0; c < samples; ++c) {
      const int label = c < samples / 2 ? 1 : 2;
      s.mask.at(r, c) = label;
      for (std::size_t b = 0; b < bands; ++b) {
        const double mean = label == 1 ? 0.2 + 0.05 * b : 0.8 - 0.04 * b;
        s.cube.at(r, c, b) = mean + sigma * rng.normal();
      }
    }
  s.mask.class_names = {{1, "left"}, {2, "right"}};
  return s;
}

double mean_angle_deg_matched(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate) {
  const auto a = matched_angles_deg(truth, estimate);
  return std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
}

}  // namespace hxtest
