#include "hxkit/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "hxkit/detail/json_eigen.hpp"
#include "hxkit/detail/stats.hpp"
#include "hxkit/parallel.hpp"

namespace hxkit::prep {

using detail::json_matrix;
using detail::json_vector;
using detail::matrix_json;

namespace {

void check_sg_args(std::size_t window, std::size_t order) {
  if (window < 3 || window % 2 == 0) {
    throw Error(Errc::InvalidArgument, "Savitzky-Golay window must be odd and >= 3");
  }
  if (order >= window) throw Error(Errc::InvalidArgument, "Savitzky-Golay order must be < window");
}

std::vector<std::size_t> sorted_components(const Eigen::VectorXd& ascending) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(ascending.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = idx.size() - 1 - i;
  return idx;
}

std::vector<std::string> component_names(const char* prefix, std::size_t k) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < k; ++i) names.push_back(std::string(prefix) + std::to_string(i + 1));
  return names;
}

}  // namespace

Eigen::VectorXd savgol_coefficients(std::size_t window, std::size_t order, long offset) {
  check_sg_args(window, order);
  const long half = static_cast<long>(window / 2);
  if (offset < -half || offset > half) throw Error(Errc::InvalidArgument, "offset outside window");
  const auto w = static_cast<Eigen::Index>(window);
  const auto q = static_cast<Eigen::Index>(order + 1);
  // Positions scaled to [-1, 1] for conditioning; the polynomial space is unchanged.
  const double scale = static_cast<double>(half);
  Eigen::MatrixXd a(w, q);
  for (Eigen::Index i = 0; i < w; ++i) {
    const double x = static_cast<double>(i - half) / scale;
    double p = 1.0;
    for (Eigen::Index j = 0; j < q; ++j, p *= x) a(i, j) = p;
  }
  Eigen::VectorXd t(q);
  {
    const double x = static_cast<double>(offset) / scale;
    double p = 1.0;
    for (Eigen::Index j = 0; j < q; ++j, p *= x) t(j) = p;
  }
  // h = pinv(A)^T t = Q R^{-T} t.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd qthin = qr.householderQ() * Eigen::MatrixXd::Identity(w, q);
  const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>();
  const Eigen::VectorXd z = r.transpose().triangularView<Eigen::Lower>().solve(t);
  return qthin * z;
}

std::vector<double> savitzky_golay(std::span<const double> spectrum, std::size_t window,
                                   std::size_t order, EdgeMode edges) {
  check_sg_args(window, order);
  const std::size_t n = spectrum.size();
  if (n < window) throw Error(Errc::InvalidArgument, "spectrum shorter than the SG window");
  const std::size_t half = window / 2;
  const Eigen::VectorXd centre = savgol_coefficients(window, order, 0);
  std::vector<double> out(n);

  auto sample = [&](long i) {
    // Even reflection for mirror mode.
    const long last = static_cast<long>(n) - 1;
    if (i < 0) i = -i;
    if (i > last) i = 2 * last - i;
    return spectrum[static_cast<std::size_t>(i)];
  };

  for (std::size_t i = 0; i < n; ++i) {
    const bool interior = i >= half && i + half < n;
    if (interior || edges == EdgeMode::mirror) {
      double acc = 0.0;
      for (std::size_t j = 0; j < window; ++j) {
        acc += centre(static_cast<Eigen::Index>(j)) *
               sample(static_cast<long>(i) + static_cast<long>(j) - static_cast<long>(half));
      }
      out[i] = acc;
      continue;
    }
    const std::size_t c = std::clamp(i, half, n - 1 - half);
    const Eigen::VectorXd h =
        savgol_coefficients(window, order, static_cast<long>(i) - static_cast<long>(c));
    double acc = 0.0;
    for (std::size_t j = 0; j < window; ++j) {
      acc += h(static_cast<Eigen::Index>(j)) * spectrum[c - half + j];
    }
    out[i] = acc;
  }
  return out;
}

HyperCube savitzky_golay(const HyperCube& cube, std::size_t window, std::size_t order,
                         EdgeMode edges) {
  check_sg_args(window, order);
  if (cube.bands() < window) throw Error(Errc::InvalidArgument, "cube has fewer bands than the SG window");
  HyperCube out = cube;
  parallel_for(cube.pixel_count(), [&](std::size_t i) {
    if (!cube.pixel_valid(i)) return;
    const auto s = savitzky_golay(cube.pixel(i), window, order, edges);
    std::copy(s.begin(), s.end(), out.pixel(i).begin());
  });
  return out;
}

std::vector<double> continuum_removal(std::span<const double> spectrum,
                                      std::span<const double> wavelengths) {
  const std::size_t n = spectrum.size();
  if (n != wavelengths.size() || n == 0) {
    throw Error(Errc::InvalidArgument, "spectrum and wavelengths must be nonempty and equal length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(spectrum[i] > 0.0)) {
      throw Error(Errc::NonPositiveInput, "continuum removal requires positive values");
    }
    if (i > 0 && !(wavelengths[i] > wavelengths[i - 1])) {
      throw Error(Errc::InvalidArgument, "wavelengths must be strictly increasing");
    }
  }
  // Upper hull, monotone chain, left to right; collinear points dropped.
  std::vector<std::size_t> hull;
  for (std::size_t i = 0; i < n; ++i) {
    while (hull.size() >= 2) {
      const std::size_t o = hull[hull.size() - 2], a = hull.back();
      const double cross = (wavelengths[a] - wavelengths[o]) * (spectrum[i] - spectrum[o]) -
                           (spectrum[a] - spectrum[o]) * (wavelengths[i] - wavelengths[o]);
      if (cross >= 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(i);
  }
  std::vector<double> out(n);
  std::size_t seg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (seg + 1 < hull.size() && hull[seg + 1] < i) ++seg;
    if (hull[seg] == i || (seg + 1 < hull.size() && hull[seg + 1] == i)) {
      out[i] = 1.0;
      continue;
    }
    const std::size_t a = hull[seg], b = hull[seg + 1];
    const double t = (wavelengths[i] - wavelengths[a]) / (wavelengths[b] - wavelengths[a]);
    const double h = spectrum[a] + t * (spectrum[b] - spectrum[a]);
    out[i] = std::min(spectrum[i] / h, 1.0);
  }
  return out;
}

HyperCube continuum_removal(const HyperCube& cube) {
  std::vector<double> wl;
  if (cube.header().wavelengths) {
    wl = *cube.header().wavelengths;
  } else {
    for (std::size_t b = 0; b < cube.bands(); ++b) wl.push_back(static_cast<double>(b));
  }
  HyperCube out = cube;
  parallel_for(cube.pixel_count(), [&](std::size_t i) {
    if (!cube.pixel_valid(i)) return;
    const auto s = continuum_removal(cube.pixel(i), wl);
    std::copy(s.begin(), s.end(), out.pixel(i).begin());
  });
  return out;
}

HyperCube fit_transform(const HyperCube& cube, Scaling kind, Warnings* warnings) {
  HyperCube out = cube;
  for (std::size_t b = 0; b < cube.bands(); ++b) {
    std::vector<double> v;
    v.reserve(cube.pixel_count());
    for (std::size_t i = 0; i < cube.pixel_count(); ++i) {
      const double x = cube.pixel(i)[b];
      if (!cube.is_nodata_value(x)) v.push_back(x);
    }
    if (v.empty()) continue;
    double centre = 0.0, denom = 0.0;
    switch (kind) {
      case Scaling::standard: {
        double sum = 0.0;
        for (double x : v) sum += x;
        centre = sum / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - centre) * (x - centre);
        denom = std::sqrt(ss / static_cast<double>(v.size()));
        break;
      }
      case Scaling::minmax: {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        centre = *lo;
        denom = *hi - *lo;
        break;
      }
      case Scaling::robust: {
        centre = detail::quantile(v, 0.5);
        denom = detail::quantile(v, 0.75) - detail::quantile(v, 0.25);
        break;
      }
    }
    const bool degenerate = denom == 0.0;
    if (degenerate) warn(warnings, "band " + std::to_string(b) + " has zero spread; output set to 0");
    for (std::size_t i = 0; i < cube.pixel_count(); ++i) {
      double& x = out.pixel(i)[b];
      if (cube.is_nodata_value(x)) continue;
      x = degenerate ? 0.0 : (x - centre) / denom;
    }
  }
  return out;
}

std::vector<double> LinearTransformModel::explained_variance_ratio() const {
  std::vector<double> r;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    r.push_back(total_variance > 0.0 ? eigenvalues(i) / total_variance : 0.0);
  }
  return r;
}

void fix_signs(Eigen::MatrixXd& columns) {
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < columns.rows(); ++i) {
      if (std::abs(columns(i, j)) > std::abs(columns(best, j))) best = i;
    }
    if (columns(best, j) < 0.0) columns.col(j) = -columns.col(j);
  }
}

LinearTransformModel fit_pca(const HyperCube& cube, std::size_t k) {
  if (k == 0 || k > cube.bands()) throw Error(Errc::InvalidArgument, "PCA k must be in [1, bands]");
  const Eigen::MatrixXd x = cube.valid_matrix();
  if (x.cols() < 2) throw Error(Errc::InsufficientData, "PCA needs at least two valid pixels");
  const auto mc = detail::mean_cov(x);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mc.cov);
  const auto order = sorted_components(eig.eigenvalues());

  LinearTransformModel m;
  m.kind = TransformKind::pca;
  m.mean = mc.mean;
  m.total_variance = mc.cov.trace();
  m.basis.resize(mc.cov.rows(), static_cast<Eigen::Index>(k));
  m.eigenvalues.resize(static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j) {
    const auto src = static_cast<Eigen::Index>(order[j]);
    m.basis.col(static_cast<Eigen::Index>(j)) = eig.eigenvectors().col(src);
    m.eigenvalues(static_cast<Eigen::Index>(j)) = std::max(0.0, eig.eigenvalues()(src));
  }
  fix_signs(m.basis);
  m.inverse_basis = m.basis;
  m.wavelengths = cube.header().wavelengths;
  return m;
}

Eigen::MatrixXd shift_difference_noise_cov(const HyperCube& cube) {
  if (cube.samples() < 2) {
    throw Error(Errc::InsufficientData, "shift-difference noise needs at least two columns");
  }
  std::vector<double> diffs;
  const std::size_t bands = cube.bands();
  for (std::size_t r = 0; r < cube.lines(); ++r) {
    for (std::size_t c = 0; c + 1 < cube.samples(); ++c) {
      const std::size_t a = r * cube.samples() + c;
      if (!cube.pixel_valid(a) || !cube.pixel_valid(a + 1)) continue;
      const auto pa = cube.pixel(a), pb = cube.pixel(a + 1);
      for (std::size_t b = 0; b < bands; ++b) diffs.push_back((pa[b] - pb[b]) / std::sqrt(2.0));
    }
  }
  const auto n = static_cast<Eigen::Index>(diffs.size() / bands);
  if (n < 2) throw Error(Errc::InsufficientData, "too few valid neighbour pairs");
  const Eigen::Map<const Eigen::MatrixXd> d(diffs.data(), static_cast<Eigen::Index>(bands), n);
  return detail::mean_cov(d).cov;
}

LinearTransformModel fit_mnf(const HyperCube& cube, std::size_t k, NoiseEstimator estimator,
                             const std::optional<Eigen::MatrixXd>& noise_cov) {
  if (k == 0 || k > cube.bands()) throw Error(Errc::InvalidArgument, "MNF k must be in [1, bands]");
  const auto bands = static_cast<Eigen::Index>(cube.bands());
  Eigen::MatrixXd sn;
  if (estimator == NoiseEstimator::provided) {
    if (!noise_cov || noise_cov->rows() != bands || noise_cov->cols() != bands) {
      throw Error(Errc::InvalidArgument, "provided noise covariance must be bands x bands");
    }
    sn = *noise_cov;
  } else {
    sn = shift_difference_noise_cov(cube);
  }
  const double trace = sn.trace();
  if (!(trace > 0.0)) throw Error(Errc::DegenerateVariance, "noise covariance has zero trace");
  sn += (1e-10 * trace / static_cast<double>(bands)) * Eigen::MatrixXd::Identity(bands, bands);

  const Eigen::MatrixXd x = cube.valid_matrix();
  if (x.cols() < 2) throw Error(Errc::InsufficientData, "MNF needs at least two valid pixels");
  const auto mc = detail::mean_cov(x);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(mc.cov, sn);
  if (eig.info() != Eigen::Success) {
    throw Error(Errc::DegenerateVariance, "MNF generalized eigenproblem failed");
  }
  const auto order = sorted_components(eig.eigenvalues());
  LinearTransformModel m;
  m.kind = TransformKind::mnf;
  m.mean = mc.mean;
  m.total_variance = mc.cov.trace();
  m.basis.resize(bands, static_cast<Eigen::Index>(k));
  m.eigenvalues.resize(static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j) {
    const auto src = static_cast<Eigen::Index>(order[j]);
    m.basis.col(static_cast<Eigen::Index>(j)) = eig.eigenvectors().col(src);
    m.eigenvalues(static_cast<Eigen::Index>(j)) = eig.eigenvalues()(src);
  }
  fix_signs(m.basis);
  m.inverse_basis = sn * m.basis;
  m.noise_cov = std::move(sn);
  m.wavelengths = cube.header().wavelengths;
  return m;
}

HyperCube apply(const LinearTransformModel& model, const HyperCube& cube) {
  if (cube.bands() != model.bands()) {
    throw Error(Errc::InvalidArgument, "model expects " + std::to_string(model.bands()) +
                                           " bands, cube has " + std::to_string(cube.bands()));
  }
  const std::size_t k = model.components();
  HyperCube out = HyperCube::zeros_like(cube.header(), cube.lines(), cube.samples(), k);
  out.header().band_names =
      component_names(model.kind == TransformKind::pca ? "PC" : "MNF", k);
  out.set_nodata(cube.nodata());
  const Eigen::MatrixXd bt = model.basis.transpose();
  const auto in = cube.matrix();
  auto dst = out.matrix();
  parallel_for(cube.pixel_count(), [&](std::size_t i) {
    const auto col = static_cast<Eigen::Index>(i);
    if (!cube.pixel_valid(i)) {
      dst.col(col).setConstant(*cube.nodata());
      return;
    }
    dst.col(col).noalias() = bt * (in.col(col) - model.mean);
  });
  return out;
}

HyperCube inverse(const LinearTransformModel& model, const HyperCube& scores) {
  if (scores.bands() != model.components()) {
    throw Error(Errc::InvalidArgument, "score cube band count does not match model components");
  }
  HyperCube out = HyperCube::zeros_like(scores.header(), scores.lines(), scores.samples(), model.bands());
  out.header().band_names.reset();
  if (model.wavelengths && model.wavelengths->size() == model.bands()) {
    out.header().wavelengths = model.wavelengths;
  }
  out.set_nodata(scores.nodata());
  const auto in = scores.matrix();
  auto dst = out.matrix();
  parallel_for(scores.pixel_count(), [&](std::size_t i) {
    const auto col = static_cast<Eigen::Index>(i);
    if (!scores.pixel_valid(i)) {
      dst.col(col).setConstant(*scores.nodata());
      return;
    }
    dst.col(col).noalias() = model.mean + model.inverse_basis * in.col(col);
  });
  return out;
}


std::string model_to_json(const LinearTransformModel& model) {
  nlohmann::json j;
  j["kind"] = model.kind == TransformKind::pca ? "pca" : "mnf";
  j["mean"] = std::vector<double>(model.mean.data(), model.mean.data() + model.mean.size());
  j["basis"] = matrix_json(model.basis);
  j["eigenvalues"] =
      std::vector<double>(model.eigenvalues.data(), model.eigenvalues.data() + model.eigenvalues.size());
  j["total_variance"] = model.total_variance;
  if (model.noise_cov) j["noise_cov"] = matrix_json(*model.noise_cov);
  if (model.wavelengths) j["wavelengths"] = *model.wavelengths;
  return j.dump(1) + "\n";
}

LinearTransformModel model_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    LinearTransformModel m;
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "pca" && kind != "mnf") throw Error(Errc::InvalidArgument, "unknown model kind " + kind);
    m.kind = kind == "pca" ? TransformKind::pca : TransformKind::mnf;
    m.mean = json_vector(j.at("mean"));
    m.basis = json_matrix(j.at("basis"));
    m.eigenvalues = json_vector(j.at("eigenvalues"));
    m.total_variance = j.value("total_variance", 0.0);
    if (j.contains("noise_cov")) m.noise_cov = json_matrix(j.at("noise_cov"));
    if (j.contains("wavelengths")) m.wavelengths = j.at("wavelengths").get<std::vector<double>>();
    if (m.basis.rows() != m.mean.size() || m.basis.cols() != m.eigenvalues.size()) {
      throw Error(Errc::InvalidArgument, "model JSON dimensions are inconsistent");
    }
    if (m.kind == TransformKind::mnf) {
      if (!m.noise_cov) throw Error(Errc::InvalidArgument, "MNF model JSON lacks noise_cov");
      m.inverse_basis = *m.noise_cov * m.basis;
    } else {
      m.inverse_basis = m.basis;
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("malformed model JSON: ") + e.what());
  }
}

}  // namespace hxkit::prep
