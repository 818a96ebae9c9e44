#include <algorithm>
#include <cmath>
#include <numeric>

#include "hxkit/parallel.hpp"
#include "hxkit/unmix.hpp"

namespace hxkit::unmix {

namespace {

void check_E(const HyperCube& cube, const Eigen::MatrixXd& E, const char* who) {
  if (E.cols() < 1) throw Error(Errc::InvalidArgument, std::string(who) + ": no endmembers");
  if (static_cast<std::size_t>(E.rows()) != cube.bands())
    throw Error(Errc::InvalidArgument, std::string(who) + ": endmember band count does not match cube");
  for (Eigen::Index k = 0; k < E.cols(); ++k)
    if (E.col(k).squaredNorm() == 0.0)
      throw Error(Errc::ZeroNorm, std::string(who) + ": endmember column is zero");
}

AbundanceMap empty_map(const HyperCube& cube, Eigen::Index p, Constraint c) {
  AbundanceMap map;
  map.lines = cube.lines();
  map.samples = cube.samples();
  map.values = Eigen::MatrixXd::Zero(p, static_cast<Eigen::Index>(cube.pixel_count()));
  map.constraint = c;
  map.nodata = cube.nodata();
  for (Eigen::Index k = 0; k < p; ++k) map.names.push_back("em" + std::to_string(k + 1));
  return map;
}

template <typename Solve>
AbundanceMap solve_map(const HyperCube& cube, Eigen::Index p, Constraint c, Solve solve) {
  AbundanceMap map = empty_map(cube, p, c);
  const auto X = cube.matrix();
  parallel_for(cube.pixel_count(), [&](std::size_t i) {
    const Eigen::Index col = static_cast<Eigen::Index>(i);
    if (!cube.pixel_valid(i)) {
      map.values.col(col).setConstant(*cube.nodata());
      return;
    }
    map.values.col(col) = solve(Eigen::VectorXd(X.col(col)));
  });
  return map;
}

double condition_number(const Eigen::MatrixXd& E) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(E);
  const auto& s = svd.singularValues();
  const double smin = s[s.size() - 1];
  return smin > 0.0 ? s[0] / smin : std::numeric_limits<double>::infinity();
}

}  // namespace

Eigen::VectorXd nnls(const Eigen::MatrixXd& E, const Eigen::VectorXd& y, double tol) {
  const Eigen::Index p = E.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
  std::vector<bool> passive(static_cast<std::size_t>(p), false);
  const double scale = std::max(1.0, (E.transpose() * y).cwiseAbs().maxCoeff());
  const double wtol = tol * scale;

  auto solve_passive = [&](Eigen::VectorXd& s) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < p; ++j)
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    Eigen::MatrixXd Ep(E.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) Ep.col(static_cast<Eigen::Index>(k)) = E.col(idx[k]);
    const Eigen::VectorXd sp = Ep.colPivHouseholderQr().solve(y);
    s.setZero(p);
    for (std::size_t k = 0; k < idx.size(); ++k) s[idx[k]] = sp[static_cast<Eigen::Index>(k)];
  };

  const std::size_t max_outer = static_cast<std::size_t>(3 * p + 30);
  Eigen::VectorXd s(p);
  for (std::size_t outer = 0; outer < max_outer; ++outer) {
    const Eigen::VectorXd w = E.transpose() * (y - E * x);
    Eigen::Index t = -1;
    for (Eigen::Index j = 0; j < p; ++j)
      if (!passive[static_cast<std::size_t>(j)] && w[j] > wtol && (t < 0 || w[j] > w[t])) t = j;
    if (t < 0) break;
    passive[static_cast<std::size_t>(t)] = true;

    for (std::size_t inner = 0; inner < static_cast<std::size_t>(3 * p + 30); ++inner) {
      solve_passive(s);
      bool feasible = true;
      for (Eigen::Index j = 0; j < p; ++j)
        if (passive[static_cast<std::size_t>(j)] && s[j] <= 0.0) feasible = false;
      if (feasible) {
        x = s;
        break;
      }
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < p; ++j)
        if (passive[static_cast<std::size_t>(j)] && s[j] <= 0.0)
          alpha = std::min(alpha, x[j] / (x[j] - s[j]));
      x += alpha * (s - x);
      for (Eigen::Index j = 0; j < p; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x[j] <= tol * 1e-2) {
          passive[static_cast<std::size_t>(j)] = false;
          x[j] = 0.0;
        }
      }
    }
  }
  return x.cwiseMax(0.0);
}

Eigen::VectorXd fcls(const Eigen::MatrixXd& E, const Eigen::VectorXd& y, double delta) {
  if (!(delta > 0.0)) throw Error(Errc::InvalidArgument, "fcls: delta must be positive");
  const double s = E.cwiseAbs().maxCoeff();
  if (s == 0.0) throw Error(Errc::ZeroNorm, "fcls: endmember matrix is zero");
  const Eigen::Index L = E.rows(), p = E.cols();
  Eigen::MatrixXd Ea(L + 1, p);
  Ea.topRows(L) = E / s;
  Ea.row(L).setConstant(1.0 / delta);
  Eigen::VectorXd ya(L + 1);
  ya.head(L) = y / s;
  ya[L] = 1.0 / delta;
  Eigen::VectorXd a = nnls(Ea, ya);
  // The penalty leaves an O(delta^2) gap in the sum; close it exactly.
  const double sum = a.sum();
  if (sum > 0.0) a /= sum;
  return a;
}

Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0, theta = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cumulative += u[static_cast<std::size_t>(k)];
    const double t = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (u[static_cast<std::size_t>(k)] - t > 0.0) theta = t;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

AbundanceMap abundance_ucls(const HyperCube& cube, const Eigen::MatrixXd& E) {
  check_E(cube, E, "ucls");
  if (E.cols() > E.rows() || condition_number(E) > 1e12)
    throw Error(Errc::RankDeficient, "ucls: endmember matrix condition number exceeds 1e12");
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(E);
  return solve_map(cube, E.cols(), Constraint::none,
                   [&](const Eigen::VectorXd& y) { return Eigen::VectorXd(qr.solve(y)); });
}

AbundanceMap abundance_nnls(const HyperCube& cube, const Eigen::MatrixXd& E) {
  check_E(cube, E, "nnls");
  return solve_map(cube, E.cols(), Constraint::nonneg,
                   [&](const Eigen::VectorXd& y) { return nnls(E, y); });
}

AbundanceMap abundance_fcls(const HyperCube& cube, const Eigen::MatrixXd& E, double delta) {
  check_E(cube, E, "fcls");
  if (!(delta > 0.0)) throw Error(Errc::InvalidArgument, "fcls: delta must be positive");
  return solve_map(cube, E.cols(), Constraint::nonneg_sum1,
                   [&](const Eigen::VectorXd& y) { return fcls(E, y, delta); });
}

namespace {

struct GbmPixel {
  Eigen::VectorXd a;
  Eigen::VectorXd gamma;
  std::vector<double> history;
};

// Columns e_i .* e_j for i < j, row-major pair order.
Eigen::MatrixXd interaction_columns(const Eigen::MatrixXd& E) {
  const Eigen::Index p = E.cols();
  Eigen::MatrixXd P(E.rows(), p * (p - 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = i + 1; j < p; ++j) P.col(k++) = E.col(i).cwiseProduct(E.col(j));
  return P;
}

Eigen::VectorXd gbm_model(const Eigen::MatrixXd& E, const Eigen::MatrixXd& P,
                          const Eigen::VectorXd& a, const Eigen::VectorXd& g) {
  Eigen::VectorXd f = E * a;
  const Eigen::Index p = E.cols();
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = i + 1; j < p; ++j, ++k) f += g[k] * a[i] * a[j] * P.col(k);
  return f;
}

double gbm_cost(const Eigen::MatrixXd& E, const Eigen::MatrixXd& P, const Eigen::VectorXd& y,
                const Eigen::VectorXd& a, const Eigen::VectorXd& g) {
  return 0.5 * (y - gbm_model(E, P, a, g)).squaredNorm();
}

// Projected gradient on the simplex with Armijo backtracking; never increases the cost.
void gbm_update_a(const Eigen::MatrixXd& E, const Eigen::MatrixXd& P, const Eigen::VectorXd& y,
                  Eigen::VectorXd& a, const Eigen::VectorXd& g) {
  const Eigen::Index p = E.cols();
  double cost = gbm_cost(E, P, y, a, g);
  double step = 1.0 / std::max(E.squaredNorm(), 1e-300);
  for (int it = 0; it < 50; ++it) {
    const Eigen::VectorXd r = y - gbm_model(E, P, a, g);
    Eigen::MatrixXd J = E;
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = i + 1; j < p; ++j, ++k) {
        J.col(i) += g[k] * a[j] * P.col(k);
        J.col(j) += g[k] * a[i] * P.col(k);
      }
    const Eigen::VectorXd grad = -J.transpose() * r;
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      const Eigen::VectorXd cand = project_simplex(a - step * grad);
      const double c = gbm_cost(E, P, y, cand, g);
      const double decrease = grad.dot(a - cand) - 0.5 / step * (cand - a).squaredNorm();
      if (c <= cost - 1e-4 * std::max(decrease, 0.0) && c <= cost) {
        const double change = (cand - a).lpNorm<Eigen::Infinity>();
        a = cand;
        accepted = change > 0.0;
        cost = c;
        step *= 2.0;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
}

// Exact box-constrained least squares for gamma by cyclic coordinate descent.
void gbm_update_gamma(const Eigen::MatrixXd& E, const Eigen::MatrixXd& P, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& a, Eigen::VectorXd& g) {
  const Eigen::Index p = E.cols();
  Eigen::MatrixXd C(P.rows(), P.cols());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = i + 1; j < p; ++j, ++k) C.col(k) = a[i] * a[j] * P.col(k);
  Eigen::VectorXd r = y - E * a - C * g;
  for (int sweep = 0; sweep < 500; ++sweep) {
    double change = 0.0;
    for (Eigen::Index q = 0; q < C.cols(); ++q) {
      const double cc = C.col(q).squaredNorm();
      if (cc <= 0.0) continue;
      const double next = std::clamp(g[q] + C.col(q).dot(r) / cc, 0.0, 1.0);
      const double d = next - g[q];
      if (d != 0.0) {
        r -= d * C.col(q);
        g[q] = next;
        change = std::max(change, std::abs(d));
      }
    }
    if (change < 1e-12) break;
  }
}

}  // namespace

GbmResult abundance_gbm(const HyperCube& cube, const Eigen::MatrixXd& E, std::size_t iterations) {
  check_E(cube, E, "gbm");
  const Eigen::Index p = E.cols();
  const Eigen::Index pairs = p * (p - 1) / 2;
  const Eigen::MatrixXd P = interaction_columns(E);
  const std::size_t n = cube.pixel_count();
  const auto X = cube.matrix();

  GbmResult out;
  out.abundances = empty_map(cube, p, Constraint::nonneg_sum1);
  out.coefficients.p = static_cast<std::size_t>(p);
  out.coefficients.gamma = Eigen::MatrixXd::Zero(pairs, static_cast<Eigen::Index>(n));
  out.residual.assign(n, 0.0);
  std::vector<std::vector<double>> history(n);

  parallel_for(n, [&](std::size_t i) {
    const Eigen::Index col = static_cast<Eigen::Index>(i);
    if (!cube.pixel_valid(i)) {
      out.abundances.values.col(col).setConstant(*cube.nodata());
      out.coefficients.gamma.col(col).setZero();
      out.residual[i] = *cube.nodata();
      return;
    }
    const Eigen::VectorXd y = X.col(col);
    Eigen::VectorXd a = fcls(E, y);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(pairs);
    auto& h = history[i];
    h.reserve(iterations + 1);
    h.push_back(2.0 * gbm_cost(E, P, y, a, g));
    for (std::size_t it = 0; it < iterations; ++it) {
      gbm_update_a(E, P, y, a, g);
      gbm_update_gamma(E, P, y, a, g);
      h.push_back(2.0 * gbm_cost(E, P, y, a, g));
    }
    out.abundances.values.col(col) = a;
    out.coefficients.gamma.col(col) = g;
    out.residual[i] = std::sqrt(h.back() / static_cast<double>(y.size()));
  });

  out.residual_history.assign(iterations + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < history[i].size(); ++t) out.residual_history[t] += history[i][t];
  return out;
}

Eigen::VectorXd sunsal(const Eigen::MatrixXd& A, const Eigen::VectorXd& y,
                       const SparseOptions& o, std::size_t* iterations) {
  if (o.lambda < 0.0) throw Error(Errc::InvalidArgument, "sparse_unmix: lambda must be >= 0");
  if (!(o.mu > 0.0)) throw Error(Errc::InvalidArgument, "sparse_unmix: mu must be positive");
  if (o.constraint == Constraint::none)
    throw Error(Errc::InvalidArgument, "sparse_unmix: constraint must be nonneg or nonneg_sum1");
  const Eigen::Index m = A.cols();
  const bool sum1 = o.constraint == Constraint::nonneg_sum1;

  const Eigen::MatrixXd G = A.transpose() * A + o.mu * Eigen::MatrixXd::Identity(m, m);
  const Eigen::LLT<Eigen::MatrixXd> llt(G);
  const Eigen::VectorXd B1 = llt.solve(Eigen::VectorXd::Ones(m));
  const double s1 = B1.sum();
  const Eigen::VectorXd Aty = A.transpose() * y;

  auto x_update = [&](const Eigen::VectorXd& w) {
    Eigen::VectorXd x = llt.solve(w);
    if (sum1) x -= B1 * ((x.sum() - 1.0) / s1);
    return x;
  };

  Eigen::VectorXd z = x_update(Aty).cwiseMax(0.0);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(m);
  const double shrink = o.lambda / o.mu;
  std::size_t it = 0;
  for (; it < o.max_iter; ++it) {
    const Eigen::VectorXd x = x_update(Aty + o.mu * (z + d));
    const Eigen::VectorXd z_old = z;
    z = (x - d).array().unaryExpr([&](double u) { return std::max(u - shrink, 0.0); }).matrix();
    d -= x - z;
    const double primal = (x - z).norm();
    const double dual = o.mu * (z - z_old).norm();
    if (primal <= o.tol && dual <= o.tol) {
      ++it;
      break;
    }
  }
  if (iterations) *iterations = it;
  // z carries the sign constraint; snap it onto the simplex for the sum-to-one case.
  if (sum1) z = project_simplex(z);
  return z;
}

AbundanceMap sparse_unmix(const HyperCube& cube, const Eigen::MatrixXd& library,
                          const SparseOptions& options) {
  check_E(cube, library, "sparse_unmix");
  if (options.constraint == Constraint::none)
    throw Error(Errc::InvalidArgument, "sparse_unmix: constraint must be nonneg or nonneg_sum1");
  return solve_map(cube, library.cols(), options.constraint,
                   [&](const Eigen::VectorXd& y) { return sunsal(library, y, options); });
}

HyperCube rmse_map(const HyperCube& cube, const Eigen::MatrixXd& E, const AbundanceMap& A) {
  check_E(cube, E, "rmse_map");
  if (A.values.cols() != static_cast<Eigen::Index>(cube.pixel_count()) || A.values.rows() != E.cols())
    throw Error(Errc::InvalidArgument, "rmse_map: abundance map does not match cube and endmembers");
  const auto X = cube.matrix();
  const double nodata = cube.nodata().value_or(kDefaultNodata);
  std::vector<double> out(cube.pixel_count());
  parallel_for(cube.pixel_count(), [&](std::size_t i) {
    const Eigen::Index col = static_cast<Eigen::Index>(i);
    if (!cube.pixel_valid(i)) {
      out[i] = nodata;
      return;
    }
    const Eigen::VectorXd r = X.col(col) - E * A.values.col(col);
    out[i] = std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
  });
  HyperCube m = single_band_like(cube, std::move(out), cube.nodata() ? cube.nodata() : std::optional<double>(nodata));
  m.header().band_names = std::vector<std::string>{"rmse"};
  return m;
}

HyperCube AbundanceMap::to_cube() const {
  const Eigen::Index p = values.rows();
  HyperCube c = HyperCube::zeros(lines, samples, static_cast<std::size_t>(p));
  std::copy(values.data(), values.data() + values.size(), c.values().begin());
  c.set_nodata(nodata);
  std::vector<std::string> labels = names;
  if (labels.size() != static_cast<std::size_t>(p)) {
    labels.clear();
    for (Eigen::Index k = 0; k < p; ++k) labels.push_back("em" + std::to_string(k + 1));
  }
  c.header().band_names = labels;
  c.header().description = "abundance (" + to_string(constraint) + ")";
  return c;
}

}  // namespace hxkit::unmix
