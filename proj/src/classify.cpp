#include "hxkit/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "hxkit/detail/json_eigen.hpp"
#include "hxkit/detail/stats.hpp"
#include "hxkit/detail/strings.hpp"
#include "hxkit/parallel.hpp"
#include "hxkit/rng.hpp"

namespace hxkit::classify {

std::string to_string(Kind kind) {
  switch (kind) {
    case Kind::sam: return "sam";
    case Kind::gaussian_ml: return "gaussian_ml";
    case Kind::knn: return "knn";
  }
  return "sam";
}

Kind parse_kind(std::string_view name) {
  if (name == "sam") return Kind::sam;
  if (name == "gaussian_ml" || name == "ml") return Kind::gaussian_ml;
  if (name == "knn") return Kind::knn;
  throw Error(Errc::InvalidArgument, "unknown classifier '" + std::string(name) + "'");
}

Split stratified_split(const LabelMask& mask, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0))
    throw Error(Errc::InvalidArgument, "train fraction must lie in (0, 1]");
  mask.validate();
  Split out{LabelMask(mask.lines, mask.samples), LabelMask(mask.lines, mask.samples)};
  out.train.class_names = mask.class_names;
  out.test.class_names = mask.class_names;
  Rng rng(seed);
  for (int c : mask.classes()) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < mask.labels.size(); ++i)
      if (mask.labels[i] == c) members.push_back(i);
    rng.shuffle(members);
    const double want = train_fraction * static_cast<double>(members.size());
    const std::size_t n_train =
        std::min(members.size(), static_cast<std::size_t>(std::ceil(want - 1e-9)));
    for (std::size_t k = 0; k < members.size(); ++k)
      (k < n_train ? out.train : out.test).labels[members[k]] = c;
  }
  return out;
}

double covariance_ridge(const Eigen::MatrixXd& cov) {
  const double trace = cov.trace();
  return trace > 0.0 ? 1e-6 * trace / static_cast<double>(cov.rows()) : 1e-6;
}

namespace {

struct ClassSamples {
  std::vector<int> labels;
  std::vector<Eigen::MatrixXd> X;  // per class, bands x n_c
};

ClassSamples gather(const HyperCube& cube, const LabelMask& mask) {
  mask.check_matches(cube);
  ClassSamples out;
  out.labels = mask.classes();
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < mask.labels.size(); ++i)
    if (mask.labels[i] != 0 && cube.pixel_valid(i)) members[mask.labels[i]].push_back(i);
  const auto X = cube.matrix();
  std::vector<int> kept;
  for (int c : out.labels) {
    const auto& idx = members[c];
    if (idx.empty()) continue;
    Eigen::MatrixXd m(X.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = X.col(static_cast<Eigen::Index>(idx[k]));
    out.X.push_back(std::move(m));
    kept.push_back(c);
  }
  out.labels = kept;
  if (out.labels.empty()) throw Error(Errc::InsufficientData, "no labeled valid pixels");
  return out;
}

Eigen::MatrixXd regularized_cov(const Eigen::MatrixXd& X) {
  auto [mean, cov] = detail::mean_cov(X);
  (void)mean;
  cov.diagonal().array() += covariance_ridge(cov);
  return cov;
}

double log_det_spd(const Eigen::MatrixXd& m) {
  const Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw Error(Errc::DegenerateVariance, "covariance is not positive definite");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

ClassifierModel train(const HyperCube& cube, const LabelMask& mask, Kind kind,
                      const TrainOptions& options) {
  const ClassSamples s = gather(cube, mask);
  ClassifierModel m;
  m.kind = kind;
  m.labels = s.labels;
  for (int c : m.labels) {
    auto it = mask.class_names.find(c);
    m.class_names[c] = it != mask.class_names.end() ? it->second : "class_" + std::to_string(c);
  }
  const Eigen::Index bands = static_cast<Eigen::Index>(cube.bands());
  const Eigen::Index nc = static_cast<Eigen::Index>(m.labels.size());
  m.class_means.resize(nc, bands);
  m.priors.resize(nc);
  double total = 0.0;
  for (Eigen::Index c = 0; c < nc; ++c) {
    m.class_means.row(c) = s.X[static_cast<std::size_t>(c)].rowwise().mean().transpose();
    m.priors[c] = static_cast<double>(s.X[static_cast<std::size_t>(c)].cols());
    total += m.priors[c];
  }
  m.priors /= total;
  m.k = options.k;
  m.sam_threshold_rad = options.sam_threshold_rad;

  switch (kind) {
    case Kind::sam:
      if (options.sam_threshold_rad && *options.sam_threshold_rad < 0.0)
        throw Error(Errc::InvalidArgument, "sam threshold must be >= 0");
      break;
    case Kind::gaussian_ml:
      for (std::size_t c = 0; c < s.X.size(); ++c) {
        if (s.X[c].cols() < 2)
          throw Error(Errc::InsufficientData, "gaussian_ml: class " + std::to_string(m.labels[c]) +
                                                  " has fewer than 2 samples");
        m.class_covs.push_back(regularized_cov(s.X[c]));
      }
      break;
    case Kind::knn: {
      if (options.k == 0 || options.k % 2 == 0) throw Error(Errc::InvalidArgument, "knn: k must be odd");
      Eigen::Index n = 0;
      for (const auto& x : s.X) n += x.cols();
      if (static_cast<Eigen::Index>(options.k) > n)
        throw Error(Errc::InsufficientData, "knn: k exceeds the number of training samples");
      m.training_samples.resize(bands, n);
      Eigen::Index pos = 0;
      // Training order follows pixel order so distance ties resolve by pixel index.
      std::vector<std::pair<std::size_t, int>> order;
      for (std::size_t i = 0; i < mask.labels.size(); ++i)
        if (mask.labels[i] != 0 && cube.pixel_valid(i)) order.emplace_back(i, mask.labels[i]);
      const auto X = cube.matrix();
      for (const auto& [i, label] : order) {
        m.training_samples.col(pos++) = X.col(static_cast<Eigen::Index>(i));
        m.training_labels.push_back(label);
      }
      break;
    }
  }
  return m;
}

Eigen::VectorXd ml_discriminants(const ClassifierModel& model, const Eigen::VectorXd& x) {
  const Eigen::Index nc = static_cast<Eigen::Index>(model.labels.size());
  Eigen::VectorXd g(nc);
  for (Eigen::Index c = 0; c < nc; ++c) {
    const auto& cov = model.class_covs[static_cast<std::size_t>(c)];
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const Eigen::VectorXd d = x - model.class_means.row(c).transpose();
    const Eigen::VectorXd z = llt.matrixL().solve(d);
    g[c] = std::log(model.priors[c]) - 0.5 * log_det_spd(cov) - 0.5 * z.squaredNorm();
  }
  return g;
}

LabelMask predict(const ClassifierModel& model, const HyperCube& cube) {
  if (cube.bands() != model.bands())
    throw Error(Errc::InvalidArgument, "classifier band count does not match cube");
  LabelMask out(cube.lines(), cube.samples());
  out.class_names = model.class_names;
  const auto X = cube.matrix();
  const Eigen::Index nc = static_cast<Eigen::Index>(model.labels.size());

  // Per-class factors for gaussian_ml.
  std::vector<Eigen::LLT<Eigen::MatrixXd>> factors;
  Eigen::VectorXd offsets(nc);
  if (model.kind == Kind::gaussian_ml) {
    if (model.class_covs.size() != model.labels.size())
      throw Error(Errc::InvalidArgument, "gaussian_ml model lacks covariances");
    for (Eigen::Index c = 0; c < nc; ++c) {
      factors.emplace_back(model.class_covs[static_cast<std::size_t>(c)]);
      offsets[c] = std::log(model.priors[c]) - 0.5 * log_det_spd(model.class_covs[static_cast<std::size_t>(c)]);
    }
  }
  Eigen::VectorXd mean_norms(nc);
  for (Eigen::Index c = 0; c < nc; ++c) mean_norms[c] = model.class_means.row(c).norm();

  parallel_for(cube.pixel_count(), [&](std::size_t i) {
    if (!cube.pixel_valid(i)) return;
    const Eigen::VectorXd x = X.col(static_cast<Eigen::Index>(i));
    int label = 0;
    switch (model.kind) {
      case Kind::sam: {
        const double xn = x.norm();
        if (xn == 0.0) return;
        double best = std::numeric_limits<double>::infinity();
        Eigen::Index arg = -1;
        for (Eigen::Index c = 0; c < nc; ++c) {
          if (mean_norms[c] == 0.0) continue;
          const double cosv = std::clamp(model.class_means.row(c).dot(x) / (xn * mean_norms[c]), -1.0, 1.0);
          const double angle = std::acos(cosv);
          if (angle < best) {
            best = angle;
            arg = c;
          }
        }
        if (arg >= 0 && (!model.sam_threshold_rad || best <= *model.sam_threshold_rad))
          label = model.labels[static_cast<std::size_t>(arg)];
        break;
      }
      case Kind::gaussian_ml: {
        double best = -std::numeric_limits<double>::infinity();
        Eigen::Index arg = 0;
        for (Eigen::Index c = 0; c < nc; ++c) {
          const Eigen::VectorXd d = x - model.class_means.row(c).transpose();
          const double g = offsets[c] - 0.5 * factors[static_cast<std::size_t>(c)].matrixL().solve(d).squaredNorm();
          if (g > best) {
            best = g;
            arg = c;
          }
        }
        label = model.labels[static_cast<std::size_t>(arg)];
        break;
      }
      case Kind::knn: {
        const Eigen::Index n = model.training_samples.cols();
        std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
        for (Eigen::Index j = 0; j < n; ++j)
          dist[static_cast<std::size_t>(j)] = {(model.training_samples.col(j) - x).squaredNorm(), j};
        const std::size_t k = std::min<std::size_t>(model.k, dist.size());
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
        std::map<int, std::size_t> votes;
        for (std::size_t q = 0; q < k; ++q) ++votes[model.training_labels[static_cast<std::size_t>(dist[q].second)]];
        std::size_t best = 0;
        for (const auto& [c, v] : votes)
          if (v > best) {
            best = v;
            label = c;
          }
        break;
      }
    }
    out.labels[i] = label;
  });
  return out;
}

double kappa_from_confusion(const Eigen::MatrixXd& confusion) {
  const double total = confusion.sum();
  if (total <= 0.0) return 0.0;
  const double po = confusion.trace() / total;
  const double pe = (confusion.rowwise().sum().array() * confusion.colwise().sum().transpose().array()).sum() /
                    (total * total);
  if (pe >= 1.0) return po >= 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1.0 - pe);
}

AccuracyReport evaluate(const LabelMask& predicted, const LabelMask& reference) {
  if (predicted.lines != reference.lines || predicted.samples != reference.samples)
    throw Error(Errc::InvalidArgument, "predicted and reference masks differ in size");
  AccuracyReport r;
  std::set<int> classes;
  for (int c : reference.classes()) classes.insert(c);
  for (std::size_t i = 0; i < reference.labels.size(); ++i)
    if (reference.labels[i] != 0 && predicted.labels[i] != 0) classes.insert(predicted.labels[i]);
  r.labels.assign(classes.begin(), classes.end());
  for (int c : r.labels) {
    std::string name = "class_" + std::to_string(c);
    if (auto it = reference.class_names.find(c); it != reference.class_names.end()) {
      name = it->second;
    } else if (auto jt = predicted.class_names.find(c); jt != predicted.class_names.end()) {
      name = jt->second;
    }
    r.class_names[c] = name;
  }
  std::map<int, Eigen::Index> pos;
  for (std::size_t k = 0; k < r.labels.size(); ++k) pos[r.labels[k]] = static_cast<Eigen::Index>(k);
  const Eigen::Index nc = static_cast<Eigen::Index>(r.labels.size());
  r.confusion = Eigen::MatrixXd::Zero(nc, nc);
  for (std::size_t i = 0; i < reference.labels.size(); ++i) {
    const int ref = reference.labels[i];
    if (ref == 0) continue;
    const int pred = predicted.labels[i];
    if (pred == 0) {
      ++r.unclassified;
      continue;
    }
    r.confusion(pos[ref], pos[pred]) += 1.0;
  }
  const double total = r.confusion.sum();
  r.total = static_cast<std::size_t>(total);
  r.overall_accuracy = total > 0.0 ? r.confusion.trace() / total : 0.0;
  r.kappa = kappa_from_confusion(r.confusion);
  for (Eigen::Index c = 0; c < nc; ++c) {
    const double row = r.confusion.row(c).sum();
    const double col = r.confusion.col(c).sum();
    r.producer_accuracy.push_back(row > 0.0 ? r.confusion(c, c) / row : 0.0);
    r.user_accuracy.push_back(col > 0.0 ? r.confusion(c, c) / col : 0.0);
    r.support.push_back(static_cast<std::size_t>(row));
  }
  return r;
}

double bhattacharyya(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& s1,
                     const Eigen::VectorXd& mu2, const Eigen::MatrixXd& s2) {
  const Eigen::MatrixXd s = 0.5 * (s1 + s2);
  const Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success)
    throw Error(Errc::DegenerateVariance, "bhattacharyya: pooled covariance is not positive definite");
  const Eigen::VectorXd d = mu1 - mu2;
  const double mahal = llt.matrixL().solve(d).squaredNorm();
  const double b = mahal / 8.0 + 0.5 * (log_det_spd(s) - 0.5 * (log_det_spd(s1) + log_det_spd(s2)));
  return std::max(b, 0.0);
}

double jeffries_matusita(double b) { return 2.0 * (1.0 - std::exp(-b)); }

SeparabilityReport separability(const HyperCube& cube, const LabelMask& mask) {
  const ClassSamples s = gather(cube, mask);
  SeparabilityReport r;
  r.labels = s.labels;
  for (int c : r.labels) {
    auto it = mask.class_names.find(c);
    r.class_names[c] = it != mask.class_names.end() ? it->second : "class_" + std::to_string(c);
  }
  if (cube.header().wavelengths) r.wavelengths = *cube.header().wavelengths;
  const std::size_t nc = s.labels.size();
  const Eigen::Index bands = static_cast<Eigen::Index>(cube.bands());
  r.class_means.resize(static_cast<Eigen::Index>(nc), bands);
  r.class_stds.resize(static_cast<Eigen::Index>(nc), bands);

  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;
  for (std::size_t c = 0; c < nc; ++c) {
    if (s.X[c].cols() < 2)
      throw Error(Errc::InsufficientData, "separability: class " + std::to_string(s.labels[c]) +
                                              " has fewer than 2 samples");
    auto [mean, cov] = detail::mean_cov(s.X[c]);
    r.class_means.row(static_cast<Eigen::Index>(c)) = mean.transpose();
    r.class_stds.row(static_cast<Eigen::Index>(c)) = cov.diagonal().cwiseMax(0.0).cwiseSqrt().transpose();
    cov.diagonal().array() += covariance_ridge(cov);
    means.push_back(mean);
    covs.push_back(cov);
  }
  for (std::size_t a = 0; a < nc; ++a)
    for (std::size_t b = a + 1; b < nc; ++b) {
      const double bd = bhattacharyya(means[a], covs[a], means[b], covs[b]);
      r.pairs.push_back({s.labels[a], s.labels[b], bd, jeffries_matusita(bd)});
    }

  for (Eigen::Index band = 0; band < bands; ++band) {
    double min_jm = nc > 1 ? std::numeric_limits<double>::infinity() : 0.0;
    for (std::size_t a = 0; a < nc; ++a)
      for (std::size_t b = a + 1; b < nc; ++b) {
        Eigen::MatrixXd va(1, 1), vb(1, 1);
        va(0, 0) = covs[a](band, band);
        vb(0, 0) = covs[b](band, band);
        const double bd = bhattacharyya(means[a].segment(band, 1), va, means[b].segment(band, 1), vb);
        min_jm = std::min(min_jm, jeffries_matusita(bd));
      }
    r.band_ranking.push_back({static_cast<std::size_t>(band), min_jm});
  }
  std::stable_sort(r.band_ranking.begin(), r.band_ranking.end(),
                   [](const BandSeparability& x, const BandSeparability& y) { return x.min_jm > y.min_jm; });
  return r;
}

std::string class_spectra_csv(const SeparabilityReport& r) {
  std::ostringstream os;
  os << "wavelength";
  for (int c : r.labels) os << ',' << r.class_names.at(c) << "_mean," << r.class_names.at(c) << "_std";
  os << '\n';
  for (Eigen::Index b = 0; b < r.class_means.cols(); ++b) {
    const double wl = static_cast<std::size_t>(b) < r.wavelengths.size() ? r.wavelengths[static_cast<std::size_t>(b)]
                                                                         : static_cast<double>(b + 1);
    os << detail::format_shortest(wl);
    for (Eigen::Index c = 0; c < r.class_means.rows(); ++c)
      os << ',' << detail::format_shortest(r.class_means(c, b)) << ',' << detail::format_shortest(r.class_stds(c, b));
    os << '\n';
  }
  return os.str();
}

GridSearchResult grid_search(const HyperCube& cube, const LabelMask& train_mask,
                             const LabelMask& validation_mask, Kind kind,
                             const std::vector<double>& grid) {
  if (grid.empty()) throw Error(Errc::InvalidArgument, "grid search needs at least one value");
  if (kind == Kind::gaussian_ml) throw Error(Errc::InvalidArgument, "grid search supports knn and sam");
  GridSearchResult out;
  out.kind = kind;
  double best_oa = -1.0;
  for (double v : grid) {
    TrainOptions opt;
    if (kind == Kind::knn) {
      if (v < 1.0 || v != std::floor(v)) throw Error(Errc::InvalidArgument, "knn grid values must be positive integers");
      opt.k = static_cast<std::size_t>(v);
    } else {
      opt.sam_threshold_rad = v;
    }
    const ClassifierModel m = train(cube, train_mask, kind, opt);
    const AccuracyReport rep = evaluate(predict(m, cube), validation_mask);
    out.points.push_back({v, rep.overall_accuracy, rep.kappa});
    if (rep.overall_accuracy > best_oa) {
      best_oa = rep.overall_accuracy;
      out.best_value = v;
    }
  }
  return out;
}

std::string model_to_json(const ClassifierModel& m) {
  nlohmann::json j;
  j["kind"] = to_string(m.kind);
  j["labels"] = m.labels;
  nlohmann::json names = nlohmann::json::object();
  for (const auto& [c, n] : m.class_names) names[std::to_string(c)] = n;
  j["class_names"] = names;
  j["class_means"] = detail::matrix_json(m.class_means);
  j["priors"] = detail::vector_json(m.priors);
  j["k"] = m.k;
  if (m.sam_threshold_rad) j["sam_threshold_rad"] = *m.sam_threshold_rad;
  if (!m.class_covs.empty()) {
    nlohmann::json covs = nlohmann::json::array();
    for (const auto& c : m.class_covs) covs.push_back(detail::matrix_json(c));
    j["class_covs"] = covs;
  }
  if (m.training_samples.size()) {
    j["training_samples"] = detail::matrix_json(m.training_samples);
    j["training_labels"] = m.training_labels;
  }
  return j.dump(1) + "\n";
}

ClassifierModel model_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    ClassifierModel m;
    m.kind = parse_kind(j.at("kind").get<std::string>());
    m.labels = j.at("labels").get<std::vector<int>>();
    for (const auto& [k, v] : j.at("class_names").items()) m.class_names[std::stoi(k)] = v.get<std::string>();
    m.class_means = detail::json_matrix(j.at("class_means"));
    m.priors = detail::json_vector(j.at("priors"));
    m.k = j.at("k").get<std::size_t>();
    if (j.contains("sam_threshold_rad")) m.sam_threshold_rad = j["sam_threshold_rad"].get<double>();
    if (j.contains("class_covs"))
      for (const auto& c : j["class_covs"]) m.class_covs.push_back(detail::json_matrix(c));
    if (j.contains("training_samples")) {
      m.training_samples = detail::json_matrix(j["training_samples"]);
      m.training_labels = j.at("training_labels").get<std::vector<int>>();
    }
    if (static_cast<std::size_t>(m.class_means.rows()) != m.labels.size())
      throw Error(Errc::InvalidArgument, "classifier model: class count mismatch");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("classifier model JSON: ") + e.what());
  }
}

}  // namespace hxkit::classify
