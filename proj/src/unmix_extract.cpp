#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hxkit/parallel.hpp"
#include "hxkit/rng.hpp"
#include "hxkit/unmix.hpp"

namespace hxkit::unmix {

namespace {

struct ValidData {
  std::vector<std::size_t> index;
  Eigen::MatrixXd X;  // bands x n
};

ValidData valid_data(const HyperCube& cube) {
  ValidData d{cube.valid_pixels(), cube.valid_matrix()};
  return d;
}

void check_p(std::size_t p, std::size_t n, const char* who) {
  if (p == 0) throw Error(Errc::InvalidArgument, std::string(who) + ": p must be >= 1");
  if (n < p)
    throw Error(Errc::InsufficientData, std::string(who) + ": fewer valid pixels than endmembers");
}

// First index of the maximum; NaN never wins.
std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

EndmemberSet make_set(const HyperCube& cube, const ValidData& d,
                      const std::vector<std::size_t>& chosen, std::string algorithm) {
  EndmemberSet set;
  set.algorithm = std::move(algorithm);
  set.E.resize(static_cast<Eigen::Index>(cube.bands()), static_cast<Eigen::Index>(chosen.size()));
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    const std::size_t linear = d.index[chosen[k]];
    set.E.col(static_cast<Eigen::Index>(k)) = d.X.col(static_cast<Eigen::Index>(chosen[k]));
    set.source_pixels.push_back({linear / cube.samples(), linear % cube.samples()});
  }
  if (cube.header().wavelengths) set.wavelengths = *cube.header().wavelengths;
  return set;
}

Eigen::VectorXd sorted_eigenvalues(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  Eigen::VectorXd ev = es.eigenvalues();
  std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
  return ev;
}

// Top-k eigenvectors of a symmetric matrix, descending, sign-normalized.
Eigen::MatrixXd top_eigenvectors(const Eigen::MatrixXd& sym, std::size_t k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::Index n = sym.rows();
  Eigen::MatrixXd out(n, static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j) out.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(n - 1 - static_cast<Eigen::Index>(j));
  prep::fix_signs(out);
  return out;
}

}  // namespace

std::vector<std::string> EndmemberSet::labels() const {
  if (names.size() == count()) return names;
  std::vector<std::string> out;
  for (std::size_t k = 0; k < count(); ++k) out.push_back("em" + std::to_string(k + 1));
  return out;
}

HfcResult hfc(const HyperCube& cube, double pfa) {
  if (!(pfa > 0.0 && pfa < 1.0)) throw Error(Errc::InvalidArgument, "hfc: pfa must lie in (0, 1)");
  const ValidData d = valid_data(cube);
  const double n = static_cast<double>(d.X.cols());
  if (d.X.cols() < 2) throw Error(Errc::InsufficientData, "hfc: need at least 2 valid pixels");

  const Eigen::MatrixXd R = d.X * d.X.transpose() / n;
  const Eigen::VectorXd mean = d.X.rowwise().mean();
  const Eigen::MatrixXd Xc = d.X.colwise() - mean;
  const Eigen::MatrixXd K = Xc * Xc.transpose() / n;

  HfcResult out;
  out.correlation_eigenvalues = sorted_eigenvalues(R);
  out.covariance_eigenvalues = sorted_eigenvalues(K);
  const double q = boost::math::quantile(boost::math::normal(), 1.0 - pfa);
  const Eigen::Index bands = R.rows();
  out.thresholds.resize(bands);
  for (Eigen::Index b = 0; b < bands; ++b) {
    const double lr = out.correlation_eigenvalues[b];
    const double lk = out.covariance_eigenvalues[b];
    const double sigma = std::sqrt(2.0 * (lr * lr + lk * lk) / n);
    out.thresholds[b] = sigma * q;
    if (lr - lk > out.thresholds[b]) ++out.count;
  }
  return out;
}

std::size_t material_count_hfc(const HyperCube& cube, double pfa) { return hfc(cube, pfa).count; }

EndmemberSet extract_atgp(const HyperCube& cube, std::size_t p) {
  const ValidData d = valid_data(cube);
  const std::size_t n = static_cast<std::size_t>(d.X.cols());
  check_p(p, n, "atgp");

  Eigen::MatrixXd Q(d.X.rows(), 0);  // orthonormal basis of the chosen spectra
  std::vector<std::size_t> chosen;
  std::vector<double> score(n);
  for (std::size_t k = 0; k < p; ++k) {
    parallel_for(n, [&](std::size_t i) {
      const Eigen::VectorXd x = d.X.col(static_cast<Eigen::Index>(i));
      const Eigen::VectorXd r = Q.cols() ? Eigen::VectorXd(x - Q * (Q.transpose() * x)) : x;
      score[i] = r.squaredNorm();
    });
    for (std::size_t c : chosen) score[c] = -1.0;
    const std::size_t best = argmax(score);
    chosen.push_back(best);
    Eigen::VectorXd q = d.X.col(static_cast<Eigen::Index>(best));
    // Two Gram-Schmidt passes keep Q orthonormal to machine precision.
    for (int pass = 0; pass < 2 && Q.cols(); ++pass) q -= Q * (Q.transpose() * q);
    const double norm = q.norm();
    Q.conservativeResize(Eigen::NoChange, Q.cols() + 1);
    Q.col(Q.cols() - 1) = norm > 0 ? Eigen::VectorXd(q / norm) : Eigen::VectorXd::Zero(q.size());
  }
  return make_set(cube, d, chosen, "atgp");
}

double simplex_volume(const Eigen::MatrixXd& points) {
  const Eigen::Index p = points.cols();
  if (points.rows() != p - 1)
    throw Error(Errc::InvalidArgument, "simplex_volume: need p points in p-1 dimensions");
  Eigen::MatrixXd M(p, p);
  M.row(0).setOnes();
  M.bottomRows(p - 1) = points;
  return std::abs(M.determinant()) / std::tgamma(static_cast<double>(p));
}

namespace {

// Cofactors of column `col` in M, so det(M with column col = v) = c . v.
Eigen::VectorXd column_cofactors(const Eigen::MatrixXd& M, Eigen::Index col) {
  const Eigen::Index p = M.rows();
  Eigen::VectorXd c(p);
  if (p == 1) {
    c[0] = 1.0;
    return c;
  }
  for (Eigen::Index r = 0; r < p; ++r) {
    Eigen::MatrixXd minor(p - 1, p - 1);
    for (Eigen::Index i = 0, mi = 0; i < p; ++i) {
      if (i == r) continue;
      for (Eigen::Index j = 0, mj = 0; j < p; ++j) {
        if (j == col) continue;
        minor(mi, mj++) = M(i, j);
      }
      ++mi;
    }
    c[r] = (((r + col) % 2) ? -1.0 : 1.0) * minor.determinant();
  }
  return c;
}

struct NfindrRun {
  std::vector<std::size_t> chosen;
  double det = 0.0;
  std::vector<double> history;
};

NfindrRun nfindr_run(const Eigen::MatrixXd& Y, std::size_t p, Rng& rng) {
  // Y is (p x n): a row of ones over the reduced coordinates.
  const std::size_t n = static_cast<std::size_t>(Y.cols());
  const double fact = std::tgamma(static_cast<double>(p));
  NfindrRun run;
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t k = 0; k < p; ++k) {
    const std::size_t j = k + static_cast<std::size_t>(rng.below(n - k));
    std::swap(pool[k], pool[j]);
    run.chosen.push_back(pool[k]);
  }
  Eigen::MatrixXd M(p, p);
  for (std::size_t k = 0; k < p; ++k)
    M.col(static_cast<Eigen::Index>(k)) = Y.col(static_cast<Eigen::Index>(run.chosen[k]));
  run.det = std::abs(M.determinant());
  run.history.push_back(run.det / fact);

  std::vector<double> score(n);
  const std::size_t max_passes = 10 * p + 100;
  for (std::size_t pass = 0; pass < max_passes; ++pass) {
    bool improved = false;
    for (std::size_t k = 0; k < p; ++k) {
      const Eigen::VectorXd c = column_cofactors(M, static_cast<Eigen::Index>(k));
      parallel_for(n, [&](std::size_t j) {
        score[j] = std::abs(c.dot(Y.col(static_cast<Eigen::Index>(j))));
      });
      const std::size_t best = argmax(score);
      if (score[best] > run.det * (1.0 + 1e-12) && score[best] > 0.0) {
        run.chosen[k] = best;
        M.col(static_cast<Eigen::Index>(k)) = Y.col(static_cast<Eigen::Index>(best));
        run.det = score[best];
        improved = true;
      }
    }
    if (!improved) break;
    run.history.push_back(run.det / fact);
  }
  return run;
}

}  // namespace

EndmemberSet extract_nfindr(const HyperCube& cube, std::size_t p,
                            const prep::LinearTransformModel& model, std::uint64_t seed,
                            std::size_t restarts, NfindrInfo* info) {
  if (p < 2) throw Error(Errc::InvalidArgument, "nfindr: p must be >= 2");
  if (restarts == 0) throw Error(Errc::InvalidArgument, "nfindr: restarts must be >= 1");
  const ValidData d = valid_data(cube);
  const std::size_t n = static_cast<std::size_t>(d.X.cols());
  check_p(p, n, "nfindr");
  if (model.bands() != cube.bands())
    throw Error(Errc::InvalidArgument, "nfindr: model band count does not match cube");
  if (model.components() < p - 1)
    throw Error(Errc::InvalidArgument, "nfindr: model needs at least p-1 components");

  const Eigen::MatrixXd W = model.basis.leftCols(static_cast<Eigen::Index>(p - 1));
  Eigen::MatrixXd Y(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(n));
  Y.row(0).setOnes();
  Y.bottomRows(static_cast<Eigen::Index>(p - 1)) = W.transpose() * (d.X.colwise() - model.mean);

  Rng rng(seed);
  NfindrRun best;
  for (std::size_t r = 0; r < restarts; ++r) {
    NfindrRun run = nfindr_run(Y, p, rng);
    if (r == 0 || run.det > best.det) best = std::move(run);
  }
  EndmemberSet set = make_set(cube, d, best.chosen, "nfindr");
  if (info) {
    info->volume = best.det / std::tgamma(static_cast<double>(p));
    info->volume_history = best.history;
  }
  return set;
}

EndmemberSet extract_nfindr(const HyperCube& cube, std::size_t p, std::uint64_t seed,
                            NfindrInfo* info) {
  if (p < 2) throw Error(Errc::InvalidArgument, "nfindr: p must be >= 2");
  const prep::LinearTransformModel model = prep::fit_pca(cube, p - 1);
  return extract_nfindr(cube, p, model, seed, 3, info);
}

EndmemberSet extract_ppi(const HyperCube& cube, std::size_t p, std::size_t n_skewers,
                         std::uint64_t seed, std::vector<std::size_t>* hit_counts) {
  const ValidData d = valid_data(cube);
  const std::size_t n = static_cast<std::size_t>(d.X.cols());
  check_p(p, n, "ppi");
  if (n_skewers == 0) throw Error(Errc::InvalidArgument, "ppi: n_skewers must be >= 1");

  const Eigen::Index bands = d.X.rows();
  Rng rng(seed);
  Eigen::MatrixXd S(bands, static_cast<Eigen::Index>(n_skewers));
  for (Eigen::Index s = 0; s < S.cols(); ++s) {
    double norm = 0.0;
    while (norm == 0.0) {
      for (Eigen::Index b = 0; b < bands; ++b) S(b, s) = rng.normal();
      norm = S.col(s).norm();
    }
    S.col(s) /= norm;
  }
  const Eigen::VectorXd mean = d.X.rowwise().mean();
  const Eigen::MatrixXd Xc = d.X.colwise() - mean;

  std::vector<std::size_t> lo(n_skewers), hi(n_skewers);
  parallel_for(n_skewers, [&](std::size_t s) {
    const Eigen::RowVectorXd proj = S.col(static_cast<Eigen::Index>(s)).transpose() * Xc;
    std::size_t a = 0, b = 0;
    for (Eigen::Index j = 1; j < proj.size(); ++j) {
      if (proj[j] < proj[static_cast<Eigen::Index>(a)]) a = static_cast<std::size_t>(j);
      if (proj[j] > proj[static_cast<Eigen::Index>(b)]) b = static_cast<std::size_t>(j);
    }
    lo[s] = a;
    hi[s] = b;
  });
  std::vector<std::size_t> hits(n, 0);
  for (std::size_t s = 0; s < n_skewers; ++s) {
    ++hits[lo[s]];
    if (hi[s] != lo[s]) ++hits[hi[s]];
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return hits[a] > hits[b]; });
  order.resize(p);
  if (hit_counts) {
    hit_counts->assign(cube.pixel_count(), 0);
    for (std::size_t j = 0; j < n; ++j) (*hit_counts)[d.index[j]] = hits[j];
  }
  return make_set(cube, d, order, "ppi");
}

EndmemberSet extract_vca(const HyperCube& cube, std::size_t p, std::uint64_t seed,
                         std::optional<double> snr_db, VcaInfo* info) {
  const ValidData d = valid_data(cube);
  const std::size_t n_pix = static_cast<std::size_t>(d.X.cols());
  check_p(p, n_pix, "vca");
  const Eigen::Index L = d.X.rows();
  const Eigen::Index pp = static_cast<Eigen::Index>(p);
  if (pp > L) throw Error(Errc::InvalidArgument, "vca: p exceeds band count");
  const double N = static_cast<double>(n_pix);
  const Eigen::MatrixXd& R = d.X;

  const Eigen::VectorXd r_m = R.rowwise().mean();
  const Eigen::MatrixXd R_o = R.colwise() - r_m;

  VcaInfo local;
  if (snr_db) {
    local.snr_db = *snr_db;
  } else {
    local.snr_estimated = true;
    const Eigen::MatrixXd Ud = top_eigenvectors(R_o * R_o.transpose() / N, p);
    const Eigen::MatrixXd x_p = Ud.transpose() * R_o;
    const double P_y = R.squaredNorm() / N;
    const double P_x = x_p.squaredNorm() / N + r_m.squaredNorm();
    const double signal = P_x - static_cast<double>(p) / static_cast<double>(L) * P_y;
    const double noise = P_y - P_x;
    local.snr_db = (noise > 0.0 && signal > 0.0) ? 10.0 * std::log10(signal / noise)
                   : (noise <= 0.0)             ? std::numeric_limits<double>::infinity()
                                                : -std::numeric_limits<double>::infinity();
  }
  const double snr_th = 15.0 + 10.0 * std::log10(static_cast<double>(p));

  Eigen::MatrixXd y;
  if (local.snr_db < snr_th) {
    local.projective = false;
    const Eigen::Index dim = pp - 1;
    Eigen::MatrixXd x;
    if (dim > 0) {
      const Eigen::MatrixXd Ud = top_eigenvectors(R_o * R_o.transpose() / N, static_cast<std::size_t>(dim));
      x = Ud.transpose() * R_o;
    } else {
      x.resize(0, R.cols());
    }
    const double c = dim > 0 ? x.colwise().norm().maxCoeff() : 1.0;
    y.resize(pp, R.cols());
    y.topRows(dim) = x;
    y.row(dim).setConstant(c);
  } else {
    local.projective = true;
    const Eigen::MatrixXd Ud = top_eigenvectors(R * R.transpose() / N, p);
    const Eigen::MatrixXd x = Ud.transpose() * R;
    const Eigen::VectorXd u = x.rowwise().mean();
    y = x;
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      const double den = u.dot(x.col(j));
      y.col(j) = den != 0.0 ? Eigen::VectorXd(x.col(j) / den) : Eigen::VectorXd::Zero(pp);
    }
  }

  Rng rng(seed);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(pp, pp);
  A(pp - 1, 0) = 1.0;
  std::vector<std::size_t> chosen;
  std::vector<double> score(n_pix);
  for (Eigen::Index i = 0; i < pp; ++i) {
    Eigen::VectorXd w(pp);
    for (Eigen::Index k = 0; k < pp; ++k) w[k] = rng.uniform();
    const Eigen::MatrixXd pinv = A.completeOrthogonalDecomposition().pseudoInverse();
    Eigen::VectorXd f = w - A * (pinv * w);
    const double fn = f.norm();
    if (fn > 0.0) f /= fn;
    parallel_for(n_pix, [&](std::size_t j) {
      score[j] = std::abs(f.dot(y.col(static_cast<Eigen::Index>(j))));
    });
    const std::size_t best = argmax(score);
    chosen.push_back(best);
    A.col(i) = y.col(static_cast<Eigen::Index>(best));
  }
  if (info) *info = local;
  return make_set(cube, d, chosen, "vca");
}

SpectralLibrary to_library(const EndmemberSet& set) {
  SpectralLibrary lib;
  lib.names = set.labels();
  lib.spectra = set.E.transpose();
  if (set.wavelengths.size() == static_cast<std::size_t>(set.E.rows())) {
    lib.wavelengths = set.wavelengths;
  } else {
    for (Eigen::Index b = 0; b < set.E.rows(); ++b) lib.wavelengths.push_back(static_cast<double>(b + 1));
  }
  return lib;
}

EndmemberSet from_library(const SpectralLibrary& library) {
  library.validate();
  EndmemberSet set;
  set.E = library.spectra.transpose();
  set.names = library.names;
  set.wavelengths = library.wavelengths;
  set.algorithm = "library";
  return set;
}

std::string to_string(Constraint constraint) {
  switch (constraint) {
    case Constraint::none: return "none";
    case Constraint::nonneg: return "nonneg";
    case Constraint::nonneg_sum1: return "nonneg_sum1";
  }
  return "none";
}

}  // namespace hxkit::unmix
