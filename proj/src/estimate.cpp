#include "hxkit/estimate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "hxkit/csv.hpp"
#include "hxkit/detail/json_eigen.hpp"
#include "hxkit/detail/strings.hpp"
#include "hxkit/envi_io.hpp"
#include "hxkit/parallel.hpp"
#include "hxkit/rng.hpp"

namespace hxkit::estimate {

std::string to_string(Kind kind) { return kind == Kind::plsr ? "plsr" : "ridge"; }

Kind parse_kind(std::string_view name) {
  if (name == "plsr" || name == "pls") return Kind::plsr;
  if (name == "ridge") return Kind::ridge;
  throw Error(Errc::InvalidArgument, "unknown regression kind '" + std::string(name) + "'");
}

Eigen::VectorXd RegressionModel::predict(const Eigen::MatrixXd& X) const {
  return (X * coefficients).array() + intercept;
}

namespace {

void check_xy(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw Error(Errc::InvalidArgument, "X rows and y length differ");
  if (X.rows() < 2) throw Error(Errc::InsufficientData, "regression needs at least 2 samples");
  if (X.cols() < 1) throw Error(Errc::InvalidArgument, "regression needs at least 1 band");
}

}  // namespace

RegressionModel plsr_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         std::size_t n_components, const PlsrOptions& options) {
  check_xy(X, y);
  const Eigen::Index n = X.rows(), b = X.cols();
  const std::size_t bound = static_cast<std::size_t>(std::min(n - 1, b));
  if (n_components < 1 || n_components > bound)
    throw Error(Errc::InvalidArgument, "n_components must lie in [1, " + std::to_string(bound) + "]");

  RegressionModel m;
  m.kind = Kind::plsr;
  m.hyperparameter = static_cast<double>(n_components);
  m.x_mean = X.colwise().mean().transpose();
  m.y_mean = y.mean();
  m.x_std = Eigen::VectorXd::Ones(b);
  if (options.standardize) {
    for (Eigen::Index j = 0; j < b; ++j) {
      const double sd = std::sqrt((X.col(j).array() - m.x_mean[j]).square().sum() / static_cast<double>(n - 1));
      m.x_std[j] = sd > 0.0 ? sd : 1.0;
    }
  }
  Eigen::MatrixXd Xr = (X.rowwise() - m.x_mean.transpose()).array().rowwise() / m.x_std.transpose().array();
  Eigen::VectorXd yr = y.array() - m.y_mean;
  if (yr.squaredNorm() == 0.0) throw Error(Errc::DegenerateVariance, "plsr: target has zero variance");

  const Eigen::Index A = static_cast<Eigen::Index>(n_components);
  Eigen::MatrixXd W(b, A), P(b, A);
  Eigen::VectorXd q(A);
  Eigen::Index used = 0;
  const double scale = std::max(1.0, (Xr.transpose() * yr).norm());
  for (Eigen::Index a = 0; a < A; ++a) {
    Eigen::VectorXd w = Xr.transpose() * yr;
    const double wn = w.norm();
    if (wn <= 1e-14 * scale) break;  // target already explained
    w /= wn;
    const Eigen::VectorXd t = Xr * w;
    const double tt = t.squaredNorm();
    if (tt <= 0.0) break;
    const Eigen::VectorXd p = Xr.transpose() * t / tt;
    const double qa = yr.dot(t) / tt;
    Xr -= t * p.transpose();
    yr -= qa * t;
    W.col(a) = w;
    P.col(a) = p;
    q[a] = qa;
    ++used;
  }
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(b);
  if (used > 0) {
    const Eigen::MatrixXd Wu = W.leftCols(used), Pu = P.leftCols(used);
    const Eigen::MatrixXd PtW = Pu.transpose() * Wu;
    beta = Wu * PtW.fullPivLu().solve(q.head(used));
  }
  m.coefficients = beta.cwiseQuotient(m.x_std);
  m.intercept = m.y_mean - m.x_mean.dot(m.coefficients);
  return m;
}

RegressionModel ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha,
                          const RidgeOptions& options) {
  check_xy(X, y);
  if (!(alpha >= 0.0)) throw Error(Errc::InvalidArgument, "ridge: alpha must be >= 0");
  const Eigen::Index b = X.cols();
  RegressionModel m;
  m.kind = Kind::ridge;
  m.hyperparameter = alpha;
  m.x_std = Eigen::VectorXd::Ones(b);
  if (options.fit_intercept) {
    m.x_mean = X.colwise().mean().transpose();
    m.y_mean = y.mean();
  } else {
    m.x_mean = Eigen::VectorXd::Zero(b);
    m.y_mean = 0.0;
  }
  const Eigen::MatrixXd Xc = X.rowwise() - m.x_mean.transpose();
  const Eigen::VectorXd yc = y.array() - m.y_mean;
  if (alpha == 0.0) {
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xc);
    if (qr.rank() < b) throw Error(Errc::RankDeficient, "ridge: alpha = 0 needs full column rank");
    m.coefficients = qr.solve(yc);
  } else {
    const Eigen::MatrixXd G = Xc.transpose() * Xc + alpha * Eigen::MatrixXd::Identity(b, b);
    m.coefficients = G.llt().solve(Xc.transpose() * yc);
  }
  m.intercept = m.y_mean - m.x_mean.dot(m.coefficients);
  return m;
}

RegressionModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Kind kind, double h) {
  if (kind == Kind::plsr) {
    if (h < 1.0 || h != std::floor(h))
      throw Error(Errc::InvalidArgument, "plsr: n_components must be a positive integer");
    return plsr_fit(X, y, static_cast<std::size_t>(h));
  }
  return ridge_fit(X, y, h);
}

double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& pred) {
  const double sse = (y - pred).squaredNorm();
  const double sst = (y.array() - y.mean()).square().sum();
  if (sst == 0.0) return sse == 0.0 ? 1.0 : 0.0;
  return 1.0 - sse / sst;
}

double rmse(const Eigen::VectorXd& y, const Eigen::VectorXd& pred) {
  return std::sqrt((y - pred).squaredNorm() / static_cast<double>(y.size()));
}

std::vector<std::size_t> assign_folds(std::size_t n, std::size_t k_folds, std::uint64_t seed) {
  if (k_folds < 2) throw Error(Errc::InvalidArgument, "k_folds must be >= 2");
  if (k_folds > n) throw Error(Errc::InvalidArgument, "k_folds exceeds the number of samples");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::size_t> fold(n);
  for (std::size_t pos = 0; pos < n; ++pos) fold[order[pos]] = pos % k_folds;
  return fold;
}

CvResult cross_validate(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Kind kind,
                        const std::vector<double>& grid, std::size_t k_folds, std::uint64_t seed) {
  check_xy(X, y);
  if (grid.empty()) throw Error(Errc::InvalidArgument, "cross_validate: empty hyperparameter grid");
  const std::size_t n = static_cast<std::size_t>(X.rows());
  CvResult out;
  out.kind = kind;
  out.fold_of = assign_folds(n, k_folds, seed);

  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  for (double h : sorted) {
    CvRow row{h, 0.0, 0.0};
    for (std::size_t f = 0; f < k_folds; ++f) {
      std::vector<Eigen::Index> tr, te;
      for (std::size_t i = 0; i < n; ++i) (out.fold_of[i] == f ? te : tr).push_back(static_cast<Eigen::Index>(i));
      const Eigen::MatrixXd Xtr = X(tr, Eigen::all), Xte = X(te, Eigen::all);
      const Eigen::VectorXd ytr = y(tr), yte = y(te);
      const RegressionModel m = fit(Xtr, ytr, kind, h);
      const Eigen::VectorXd pred = m.predict(Xte);
      row.mean_r2 += r_squared(yte, pred);
      row.mean_rmse += rmse(yte, pred);
    }
    row.mean_r2 /= static_cast<double>(k_folds);
    row.mean_rmse /= static_cast<double>(k_folds);
    out.table.push_back(row);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < out.table.size(); ++i)
    if (out.table[i].mean_r2 > out.table[best].mean_r2) best = i;
  out.best_hyperparameter = out.table[best].hyperparameter;
  out.best_model = fit(X, y, kind, out.best_hyperparameter);
  return out;
}

HyperCube predict_map(const RegressionModel& model, const HyperCube& cube) {
  if (cube.bands() != model.bands())
    throw Error(Errc::InvalidArgument, "regression model band count does not match cube");
  const double nodata = cube.nodata().value_or(kDefaultNodata);
  std::vector<double> out(cube.pixel_count());
  const auto X = cube.matrix();
  parallel_for(cube.pixel_count(), [&](std::size_t i) {
    out[i] = cube.pixel_valid(i) ? model.coefficients.dot(X.col(static_cast<Eigen::Index>(i))) + model.intercept
                                 : nodata;
  });
  HyperCube m = single_band_like(cube, std::move(out), nodata);
  m.header().band_names = std::vector<std::string>{"prediction"};
  return m;
}

std::string model_to_json(const RegressionModel& m) {
  nlohmann::json j;
  j["kind"] = to_string(m.kind);
  j["coefficients"] = detail::vector_json(m.coefficients);
  j["intercept"] = m.intercept;
  j["hyperparameter"] = m.hyperparameter;
  j["x_mean"] = detail::vector_json(m.x_mean);
  j["x_std"] = detail::vector_json(m.x_std);
  j["y_mean"] = m.y_mean;
  return j.dump(1) + "\n";
}

RegressionModel model_from_json(std::string_view text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    RegressionModel m;
    m.kind = parse_kind(j.at("kind").get<std::string>());
    m.coefficients = detail::json_vector(j.at("coefficients"));
    m.intercept = j.at("intercept").get<double>();
    m.hyperparameter = j.at("hyperparameter").get<double>();
    m.x_mean = detail::json_vector(j.at("x_mean"));
    m.x_std = detail::json_vector(j.at("x_std"));
    m.y_mean = j.at("y_mean").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("regression model JSON: ") + e.what());
  }
}

TrainingData parse_training_csv(std::string_view text, const HyperCube* cube) {
  const csv::Table t = csv::parse(text);
  if (t.rows.empty()) throw Error(Errc::InsufficientData, "training CSV has no rows");
  TrainingData d;
  const std::size_t n = t.rows.size();
  const bool pixel_refs = t.columns.size() == 3 && t.columns[0] == "row" && t.columns[1] == "col";
  if (pixel_refs) {
    if (!cube) throw Error(Errc::InvalidArgument, "training CSV references pixels but no cube was given");
    d.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cube->bands()));
    d.y.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double r = csv::number(t, i, 0), c = csv::number(t, i, 1);
      if (r < 0 || c < 0 || r != std::floor(r) || c != std::floor(c) || r >= static_cast<double>(cube->lines()) ||
          c >= static_cast<double>(cube->samples()))
        throw Error(Errc::OutOfRange, "training pixel (" + t.rows[i][0] + ", " + t.rows[i][1] + ") outside cube");
      const auto px = cube->pixel(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
      for (std::size_t b = 0; b < px.size(); ++b) d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) = px[b];
      d.y[static_cast<Eigen::Index>(i)] = csv::number(t, i, 2);
    }
    return d;
  }
  const std::size_t cols = t.columns.size();
  if (cols < 2) throw Error(Errc::InvalidArgument, "training CSV needs spectrum columns and a target");
  d.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols - 1));
  d.y.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 0; b + 1 < cols; ++b) d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) = csv::number(t, i, b);
    d.y[static_cast<Eigen::Index>(i)] = csv::number(t, i, cols - 1);
  }
  if (cube && static_cast<std::size_t>(d.X.cols()) != cube->bands())
    throw Error(Errc::InvalidArgument, "training spectra band count does not match cube");
  return d;
}

TrainingData read_training_csv(const std::filesystem::path& path, const HyperCube* cube) {
  return parse_training_csv(envi::read_file_text(path), cube);
}

void IndexDefinition::validate() const {
  if (!(tolerance_nm > 0.0)) throw Error(Errc::InvalidArgument, "index " + name + ": tolerance must be positive");
  if (a_nm == b_nm) throw Error(Errc::InvalidArgument, "index " + name + ": wavelengths must differ");
}

std::vector<IndexDefinition> builtin_indices() {
  return {
      {"NDVI", IndexFormula::normalized_difference, 800.0, 670.0, 10.0},
      {"SR", IndexFormula::ratio, 800.0, 670.0, 10.0},
      {"NDWI", IndexFormula::normalized_difference, 860.0, 1240.0, 10.0},
      {"RENDVI", IndexFormula::normalized_difference, 750.0, 705.0, 10.0},
  };
}

IndexDefinition find_index(const std::vector<IndexDefinition>& table, std::string_view name) {
  for (const auto& d : table) {
    if (d.name.size() != name.size()) continue;
    bool same = true;
    for (std::size_t i = 0; i < name.size(); ++i)
      if (std::tolower(static_cast<unsigned char>(d.name[i])) != std::tolower(static_cast<unsigned char>(name[i])))
        same = false;
    if (same) return d;
  }
  throw Error(Errc::InvalidArgument, "unknown index '" + std::string(name) + "'");
}

std::vector<IndexDefinition> parse_index_csv(std::string_view text) {
  const csv::Table t = csv::parse(text);
  if (t.columns.size() < 4) throw Error(Errc::InvalidArgument, "index CSV needs name,formula,a_nm,b_nm");
  std::vector<IndexDefinition> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    IndexDefinition d;
    d.name = t.rows[i].at(0);
    const std::string& f = t.rows[i].at(1);
    if (f == "nd" || f == "normalized_difference") {
      d.formula = IndexFormula::normalized_difference;
    } else if (f == "ratio") {
      d.formula = IndexFormula::ratio;
    } else {
      throw Error(Errc::InvalidArgument, "index " + d.name + ": unknown formula '" + f + "'");
    }
    d.a_nm = csv::number(t, i, 2);
    d.b_nm = csv::number(t, i, 3);
    if (t.columns.size() > 4 && t.rows[i].size() > 4 && !t.rows[i][4].empty()) d.tolerance_nm = csv::number(t, i, 4);
    d.validate();
    out.push_back(d);
  }
  return out;
}

namespace {

std::size_t band_near(const std::vector<double>& wl, double target, double tol) {
  if (wl.empty()) throw Error(Errc::NoBandNear, detail::format_shortest(target) + " nm");
  std::size_t best = 0;
  for (std::size_t b = 1; b < wl.size(); ++b)
    if (std::abs(wl[b] - target) < std::abs(wl[best] - target)) best = b;
  if (std::abs(wl[best] - target) > tol)
    throw Error(Errc::NoBandNear, detail::format_shortest(target) + " nm (nearest band " +
                                      detail::format_shortest(wl[best]) + " nm)");
  return best;
}

}  // namespace

HyperCube compute_index(const HyperCube& cube, const IndexDefinition& def) {
  def.validate();
  const auto wl = envi::wavelengths_nm(cube.header());
  if (!wl) throw Error(Errc::NoBandNear, "cube has no wavelength metadata");
  const std::size_t a = band_near(*wl, def.a_nm, def.tolerance_nm);
  const std::size_t b = band_near(*wl, def.b_nm, def.tolerance_nm);
  const double nodata = cube.nodata().value_or(kDefaultNodata);
  std::vector<double> out(cube.pixel_count());
  parallel_for(cube.pixel_count(), [&](std::size_t i) {
    if (!cube.pixel_valid(i)) {
      out[i] = nodata;
      return;
    }
    const auto px = cube.pixel(i);
    const double ra = px[a], rb = px[b];
    const double num = def.formula == IndexFormula::ratio ? ra : ra - rb;
    const double den = def.formula == IndexFormula::ratio ? rb : ra + rb;
    out[i] = std::abs(den) < 1e-12 ? nodata : num / den;
  });
  HyperCube m = single_band_like(cube, std::move(out), nodata);
  m.header().band_names = std::vector<std::string>{def.name};
  return m;
}

}  // namespace hxkit::estimate
