#include <algorithm>
#include <cmath>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "hxkit/classify.hpp"
#include "hxkit/cube_model.hpp"
#include "hxkit/detail/strings.hpp"
#include "hxkit/envi_io.hpp"
#include "hxkit/estimate.hpp"
#include "hxkit/fusion.hpp"
#include "hxkit/ops.hpp"
#include "hxkit/preprocess.hpp"
#include "hxkit/quality.hpp"
#include "hxkit/render.hpp"
#include "hxkit/report.hpp"
#include "hxkit/sensor_resample.hpp"
#include "hxkit/unmix.hpp"

namespace hxkit::ops {

namespace fs = std::filesystem;
using detail::format_shortest;

// Params

const Value& Params::get(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw UsageError("missing parameter '" + name + "'");
  return it->second;
}

std::string Params::text(const std::string& name) const {
  const Value& v = get(name);
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw UsageError("parameter '" + name + "' is not text");
}

std::int64_t Params::integer(const std::string& name) const {
  const Value& v = get(name);
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  throw UsageError("parameter '" + name + "' is not an integer");
}

std::size_t Params::count(const std::string& name) const {
  const std::int64_t v = integer(name);
  if (v < 0) throw UsageError("parameter '" + name + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

double Params::real(const std::string& name) const {
  const Value& v = get(name);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  throw UsageError("parameter '" + name + "' is not a number");
}

bool Params::flag(const std::string& name) const {
  const Value& v = get(name);
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  throw UsageError("parameter '" + name + "' is not a flag");
}

std::vector<double> Params::reals(const std::string& name) const {
  const Value& v = get(name);
  if (const auto* d = std::get_if<std::vector<double>>(&v)) return *d;
  if (const auto* i = std::get_if<std::vector<std::int64_t>>(&v)) return {i->begin(), i->end()};
  throw UsageError("parameter '" + name + "' is not a list of numbers");
}

std::vector<std::int64_t> Params::integers(const std::string& name) const {
  const Value& v = get(name);
  if (const auto* i = std::get_if<std::vector<std::int64_t>>(&v)) return *i;
  throw UsageError("parameter '" + name + "' is not a list of integers");
}

const ParamSpec* Operation::find(const std::string& param) const {
  for (const auto& p : params)
    if (p.name == param) return &p;
  return nullptr;
}

std::string cli_flag(const std::string& name) {
  std::string out = "--" + name;
  std::replace(out.begin(), out.end(), '_', '-');
  return out;
}

Value parse_value(const ParamSpec& spec, const std::string& text) {
  const std::string t(detail::trim(text));
  auto bad = [&](const char* what) {
    return UsageError(cli_flag(spec.name) + ": expected " + what + ", got '" + text + "'");
  };
  switch (spec.type) {
    case ParamType::text:
    case ParamType::input:
    case ParamType::output:
      return text;
    case ParamType::integer: {
      const auto v = detail::parse_int(t);
      if (!v) throw bad("an integer");
      return static_cast<std::int64_t>(*v);
    }
    case ParamType::real: {
      const auto v = detail::parse_double(t);
      if (!v) throw bad("a number");
      return *v;
    }
    case ParamType::flag:
      if (t == "true" || t == "1" || t == "yes") return true;
      if (t == "false" || t == "0" || t == "no") return false;
      throw bad("true or false");
    case ParamType::reals: {
      std::vector<double> out;
      for (const auto& part : detail::split(t, ',')) {
        const auto v = detail::parse_double(detail::trim(part));
        if (!v) throw bad("a comma-separated list of numbers");
        out.push_back(*v);
      }
      return out;
    }
    case ParamType::integers: {
      std::vector<std::int64_t> out;
      for (const auto& part : detail::split(t, ',')) {
        const auto v = detail::parse_int(detail::trim(part));
        if (!v) throw bad("a comma-separated list of integers");
        out.push_back(static_cast<std::int64_t>(*v));
      }
      return out;
    }
  }
  throw bad("a value");
}

Params resolve(const Operation& op, std::map<std::string, Value> given) {
  Params p;
  for (auto& [k, v] : given) {
    const ParamSpec* spec = op.find(k);
    if (!spec) throw UsageError(op.name + ": unknown parameter '" + k + "'");
    if (!spec->choices.empty()) {
      const auto* s = std::get_if<std::string>(&v);
      if (!s || std::find(spec->choices.begin(), spec->choices.end(), *s) == spec->choices.end()) {
        std::string list;
        for (const auto& c : spec->choices) list += (list.empty() ? "" : ", ") + c;
        throw UsageError(op.name + ": " + k + " must be one of " + list);
      }
    }
    p.set(k, std::move(v));
  }
  for (const auto& spec : op.params) {
    if (p.has(spec.name)) continue;
    if (spec.default_value) {
      p.set(spec.name, parse_value(spec, *spec.default_value));
    } else if (spec.required) {
      throw UsageError(op.name + ": missing required parameter " + cli_flag(spec.name));
    }
  }
  return p;
}

namespace {

std::ostream& out(Context& ctx) { return ctx.out ? *ctx.out : std::cout; }
std::ostream& err(Context& ctx) { return ctx.err ? *ctx.err : std::cerr; }

fs::path header_path(fs::path p) {
  if (normalize_key(p.extension().string()) != ".hdr") p += ".hdr";
  return p;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

HyperCube load(const Params& p, const std::string& name, Context& ctx) {
  return envi::load_cube(p.path(name), std::nullopt, nullptr, &ctx.warnings);
}

void save(const fs::path& path, const HyperCube& cube) {
  const fs::path h = header_path(path);
  ensure_parent(h);
  envi::save_cube(h, cube, envi::WriteOptions{Interleave::bsq, DataType::f32});
}

void save_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  envi::write_file_text(path, text);
}

LabelMask load_mask(const Params& p, const std::string& name) { return cube::read_label_mask(p.path(name)); }

void save_mask(const fs::path& path, const LabelMask& mask) {
  const fs::path h = header_path(path);
  ensure_parent(h);
  cube::write_label_mask(h, mask);
}

cube::Range parse_range(const std::string& text, std::size_t full, const char* what) {
  if (text.empty()) return {0, full};
  const auto parts = detail::split(text, ':');
  if (parts.size() != 2) throw UsageError(std::string(what) + ": expected begin:end");
  const auto b = parts[0].empty() ? std::optional<long long>(0) : detail::parse_int(detail::trim(parts[0]));
  const auto e = parts[1].empty() ? std::optional<long long>(static_cast<long long>(full))
                                  : detail::parse_int(detail::trim(parts[1]));
  if (!b || !e || *b < 0 || *e < 0) throw UsageError(std::string(what) + ": expected begin:end");
  return {static_cast<std::size_t>(*b), static_cast<std::size_t>(*e)};
}

std::vector<std::size_t> to_indices(const std::vector<std::int64_t>& v) {
  std::vector<std::size_t> out;
  for (auto x : v) {
    if (x < 0) throw UsageError("band indices must be >= 0");
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

std::uint64_t seed_of(const Params& p, Context& ctx) {
  const std::uint64_t s = p.has("seed") ? static_cast<std::uint64_t>(p.integer("seed")) : ctx.seed;
  err(ctx) << "seed: " << s << "\n";
  return s;
}

report::AnalysisReport new_report(const Operation& op) {
  report::AnalysisReport r;
  r.tool = "hxkit " + op.name;
  return r;
}

nlohmann::json value_json(const Value& v) {
  return std::visit([](const auto& x) { return nlohmann::json(x); }, v);
}

// SpectralResponse from --srf, --sensor-csv or --sensor and a source grid.
sensor::SpectralResponse response_for(const Params& p, const std::vector<double>& grid) {
  if (p.has("srf")) return sensor::parse_srf_csv(envi::read_file_text(p.path("srf")));
  sensor::SensorDefinition def;
  if (p.has("sensor_csv")) {
    def = sensor::read_sensor_csv(p.path("sensor_csv"));
  } else {
    def = sensor::preset(p.text("sensor"));
  }
  return sensor::gaussian_srf(def.centers, def.fwhm, grid);
}

std::vector<double> grid_nm(const HyperCube& cube) {
  auto wl = envi::wavelengths_nm(cube.header());
  if (!wl) throw Error(Errc::InvalidHeader, "cube has no wavelength metadata");
  return *wl;
}

ParamSpec input(std::string name, std::string help, bool positional = false) {
  return {std::move(name), ParamType::input, true, std::nullopt, std::move(help), positional, {}};
}
ParamSpec optional_input(std::string name, std::string help) {
  return {std::move(name), ParamType::input, false, std::nullopt, std::move(help), false, {}};
}
ParamSpec output(std::string name, std::string help, bool required = true) {
  return {std::move(name), ParamType::output, required, std::nullopt, std::move(help), false, {}};
}
ParamSpec value(std::string name, ParamType type, std::optional<std::string> def, std::string help) {
  return {std::move(name), type, false, std::move(def), std::move(help), false, {}};
}
ParamSpec required(std::string name, ParamType type, std::string help) {
  return {std::move(name), type, true, std::nullopt, std::move(help), false, {}};
}
ParamSpec choice(std::string name, std::vector<std::string> choices, std::optional<std::string> def,
                 std::string help) {
  return {std::move(name), ParamType::text, false, std::move(def), std::move(help), false, std::move(choices)};
}
ParamSpec in_cube() { return input("in", "input cube header (.hdr)", true); }
ParamSpec report_param() { return output("report", "report stem; writes <stem>.json and <stem>.html", false); }

std::vector<ParamSpec> sensor_params() {
  return {choice("sensor", sensor::preset_names(), "vnir4", "bundled sensor preset"),
          optional_input("sensor_csv", "sensor CSV (center_nm,fwhm_nm)"),
          optional_input("srf", "precomputed response CSV")};
}

template <typename... Lists>
std::vector<ParamSpec> join(std::vector<ParamSpec> first, Lists... rest) {
  (first.insert(first.end(), rest.begin(), rest.end()), ...);
  return first;
}

// Operations.

void op_info(const Params& p, Context& ctx) {
  const HeaderInfo h = envi::load_header(p.path("in"), &ctx.warnings);
  auto& os = out(ctx);
  os << "samples: " << h.samples << "\nlines: " << h.lines << "\nbands: " << h.bands
     << "\ninterleave: " << to_string(h.interleave) << "\ndata type: " << to_string(h.data_type) << " ("
     << envi_code(h.data_type) << ")\nbyte order: " << (h.byte_order == ByteOrder::little ? "little" : "big")
     << "\n";
  if (const auto wl = envi::wavelengths_nm(h); wl && !wl->empty()) {
    os << "wavelengths: " << format_shortest(wl->front()) << " - " << format_shortest(wl->back()) << " nm\n";
  } else {
    os << "wavelengths: none\n";
  }
  if (const auto nd = h.extra_value("data ignore value")) os << "data ignore value: " << *nd << "\n";
}

void op_subset(const Params& p, Context& ctx) {
  HyperCube c = load(p, "in", ctx);
  c = cube::spatial_subset(c, parse_range(p.text("rows"), c.lines(), "rows"),
                           parse_range(p.text("cols"), c.samples(), "cols"));
  if (p.has("bands")) {
    const auto idx = to_indices(p.integers("bands"));
    c = cube::spectral_subset(c, idx);
  }
  save(p.path("out"), c);
}

void op_scale(const Params& p, Context& ctx) {
  save(p.path("out"), cube::scale_cube(load(p, "in", ctx), p.real("factor")));
}

void op_stats(const Params& p, Context& ctx) {
  const HyperCube c = load(p, "in", ctx);
  const auto stats = cube::band_stats(c);
  const auto wl = envi::wavelengths_nm(c.header());
  std::ostringstream csv;
  csv << "band,wavelength,min,max,mean,std,count,nodata_count\n";
  report::Table table{"band statistics", {"band", "wavelength", "min", "max", "mean", "std", "count"}, {}};
  for (std::size_t b = 0; b < stats.size(); ++b) {
    const auto& s = stats[b];
    const double w = wl ? (*wl)[b] : static_cast<double>(b + 1);
    csv << b << ',' << format_shortest(w) << ',' << format_shortest(s.min) << ',' << format_shortest(s.max) << ','
        << format_shortest(s.mean) << ',' << format_shortest(s.std) << ',' << s.count << ',' << s.nodata_count << "\n";
    table.rows.push_back({b, w, s.min, s.max, s.mean, s.std, s.count});
  }
  if (p.has("out")) {
    save_text(p.path("out"), csv.str());
  } else {
    out(ctx) << csv.str();
  }
  auto r = new_report(*find("stats"));
  r.metrics["bands"] = static_cast<double>(stats.size());
  r.tables.push_back(std::move(table));
  finish_report(*find("stats"), p, ctx, r);
}

void op_srf(const Params& p, Context& ctx) {
  const HyperCube c = load(p, "in", ctx);
  const auto srf = response_for(p, grid_nm(c));
  save_text(p.path("out"), sensor::format_srf_csv(srf));
}

void op_resample_spectral(const Params& p, Context& ctx) {
  const HyperCube c = load(p, "in", ctx);
  save(p.path("out"), sensor::spectral_resample(c, response_for(p, grid_nm(c))));
}

void op_resample_spatial(const Params& p, Context& ctx) {
  const sensor::Psf psf = p.text("psf") == "gaussian" ? sensor::Psf::gaussian : sensor::Psf::block_mean;
  save(p.path("out"), sensor::spatial_downsample(load(p, "in", ctx), p.count("factor"), psf, &ctx.warnings));
}

void op_sg(const Params& p, Context& ctx) {
  const prep::EdgeMode edge = p.text("edge") == "mirror" ? prep::EdgeMode::mirror : prep::EdgeMode::fit;
  save(p.path("out"), prep::savitzky_golay(load(p, "in", ctx), p.count("window"), p.count("order"), edge));
}

void op_continuum(const Params& p, Context& ctx) {
  save(p.path("out"), prep::continuum_removal(load(p, "in", ctx)));
}

void op_prep_scale(const Params& p, Context& ctx) {
  const std::string m = p.text("method");
  const prep::Scaling s = m == "minmax" ? prep::Scaling::minmax : m == "robust" ? prep::Scaling::robust : prep::Scaling::standard;
  save(p.path("out"), prep::fit_transform(load(p, "in", ctx), s, &ctx.warnings));
}

void write_transform(const Params& p, Context& ctx, const HyperCube& c, const prep::LinearTransformModel& m) {
  if (p.has("model")) save_text(p.path("model"), prep::model_to_json(m));
  if (p.has("out")) save(p.path("out"), prep::apply(m, c));
  auto& os = out(ctx);
  os << "component,eigenvalue\n";
  for (Eigen::Index k = 0; k < m.eigenvalues.size(); ++k) os << k + 1 << ',' << format_shortest(m.eigenvalues[k]) << "\n";
}

void op_pca(const Params& p, Context& ctx) {
  const HyperCube c = load(p, "in", ctx);
  write_transform(p, ctx, c, prep::fit_pca(c, p.count("k")));
}

void op_mnf(const Params& p, Context& ctx) {
  const HyperCube c = load(p, "in", ctx);
  write_transform(p, ctx, c, prep::fit_mnf(c, p.count("k")));
}

void op_apply(const Params& p, Context& ctx) {
  const auto m = prep::model_from_json(envi::read_file_text(p.path("model")));
  save(p.path("out"), prep::apply(m, load(p, "in", ctx)));
}

void op_inverse(const Params& p, Context& ctx) {
  const auto m = prep::model_from_json(envi::read_file_text(p.path("model")));
  save(p.path("out"), prep::inverse(m, load(p, "in", ctx)));
}

quality::NoiseMethod noise_method(const std::string& s) {
  if (s == "spatial_spectral") return quality::NoiseMethod::spatial_spectral;
  if (s == "homogeneous_roi") return quality::NoiseMethod::homogeneous_roi;
  return quality::NoiseMethod::spectral_decorrelation;
}

quality::NoiseProfile noise_for(const Params& p, const HyperCube& c) {
  std::optional<LabelMask> roi;
  if (p.has("roi")) roi = load_mask(p, "roi");
  return quality::estimate_noise(c, noise_method(p.text("method")), roi ? &*roi : nullptr, p.count("block"));
}

void op_noise(const Params& p, Context& ctx) {
  const HyperCube c = load(p, "in", ctx);
  const auto noise = noise_for(p, c);
  const std::string csv = quality::format_noise_csv(noise, envi::wavelengths_nm(c.header()));
  if (p.has("out")) {
    save_text(p.path("out"), csv);
  } else {
    out(ctx) << csv;
  }
  auto r = new_report(*find("quality.noise"));
  report::Table t{"noise", {"band", "sigma", "snr_db"}, {}};
  double mean_snr = 0.0;
  for (std::size_t b = 0; b < noise.sigma.size(); ++b) {
    t.rows.push_back({b, noise.sigma[b], noise.snr_db[b]});
    mean_snr += noise.snr_db[b];
  }
  r.metrics["mean_snr_db"] = noise.sigma.empty() ? 0.0 : mean_snr / static_cast<double>(noise.sigma.size());
  r.metrics["sample_count"] = static_cast<double>(noise.sample_count);
  r.tables.push_back(std::move(t));
  finish_report(*find("quality.noise"), p, ctx, r);
}

void op_badbands(const Params& p, Context& ctx) {
  HyperCube c = load(p, "in", ctx);
  const auto noise = noise_for(p, c);
  const auto crit = p.text("criterion") == "sigma" ? quality::BadBandCriterion::sigma : quality::BadBandCriterion::snr_db;
  const std::vector<int> bbl = quality::detect_bad_bands(noise, p.real("threshold"), crit);
  auto& os = out(ctx);
  os << "bad bands:";
  for (std::size_t b = 0; b < bbl.size(); ++b)
    if (!bbl[b]) os << ' ' << b;
  os << "\n";
  if (p.has("out")) {
    c.header().bbl = bbl;
    save(p.path("out"), c);
  }
}

void op_destripe(const Params& p, Context& ctx) {
  const auto axis = p.text("axis") == "row" ? quality::StripeAxis::row : quality::StripeAxis::column;
  save(p.path("out"), quality::destripe(load(p, "in", ctx), axis));
}

void op_whiten(const Params& p, Context& ctx) {
  save(p.path("out"), quality::whiten(load(p, "in", ctx), &ctx.warnings));
}

void op_cibr(const Params& p, Context& ctx) {
  save(p.path("out"), quality::cibr(load(p, "in", ctx), p.real("absorption"), p.real("left"), p.real("right")));
}

void op_count(const Params& p, Context& ctx) {
  const HyperCube c = load(p, "in", ctx);
  const auto h = unmix::hfc(c, p.real("pfa"));
  out(ctx) << "materials: " << h.count << "\n";
  auto r = new_report(*find("unmix.count"));
  r.metrics["materials"] = static_cast<double>(h.count);
  report::Table t{"eigenvalues", {"index", "correlation", "covariance", "threshold"}, {}};
  for (Eigen::Index b = 0; b < h.thresholds.size(); ++b)
    t.rows.push_back({b, h.correlation_eigenvalues[b], h.covariance_eigenvalues[b], h.thresholds[b]});
  r.tables.push_back(std::move(t));
  finish_report(*find("unmix.count"), p, ctx, r);
}

void op_extract(const Params& p, Context& ctx) {
  const HyperCube c = load(p, "in", ctx);
  std::size_t n = p.count("p");
  if (n == 0) {
    n = unmix::material_count_hfc(c, p.real("pfa"));
    err(ctx) << "materials (hfc): " << n << "\n";
    if (n == 0) throw Error(Errc::InsufficientData, "material count is zero; pass --p");
  }
  const std::string algo = p.text("algo");
  unmix::EndmemberSet set;
  if (algo == "atgp") {
    set = unmix::extract_atgp(c, n);
  } else {
    const std::uint64_t seed = seed_of(p, ctx);
    if (algo == "nfindr") {
      set = unmix::extract_nfindr(c, n, seed);
    } else if (algo == "ppi") {
      set = unmix::extract_ppi(c, n, p.count("skewers"), seed);
    } else {
      std::optional<double> snr;
      if (p.has("snr")) snr = p.real("snr");
      set = unmix::extract_vca(c, n, seed, snr);
    }
  }
  save_text(p.path("out"), cube::format_library_csv(unmix::to_library(set)));
  auto& os = out(ctx);
  for (std::size_t k = 0; k < set.source_pixels.size(); ++k)
    os << "em" << k + 1 << ": row " << set.source_pixels[k].row << " col " << set.source_pixels[k].col << "\n";
  auto r = new_report(*find("unmix.extract"));
  r.metrics["endmembers"] = static_cast<double>(set.count());
  report::Table t{"source pixels", {"endmember", "row", "col"}, {}};
  for (std::size_t k = 0; k < set.source_pixels.size(); ++k)
    t.rows.push_back({"em" + std::to_string(k + 1), set.source_pixels[k].row, set.source_pixels[k].col});
  r.tables.push_back(std::move(t));
  finish_report(*find("unmix.extract"), p, ctx, r);
}

unmix::EndmemberSet load_endmembers(const Params& p, const std::string& name, const HyperCube& c) {
  unmix::EndmemberSet set = unmix::from_library(cube::read_library_csv(p.path(name)));
  if (static_cast<std::size_t>(set.E.rows()) != c.bands())
    throw Error(Errc::InvalidArgument, "library has " + std::to_string(set.E.rows()) + " bands, cube has " +
                                           std::to_string(c.bands()));
  return set;
}

void abundance_report(const Operation& op, const Params& p, Context& ctx, const HyperCube& c,
                      const unmix::EndmemberSet& set, unmix::AbundanceMap& map) {
  map.names = set.labels();
  save(p.path("out"), map.to_cube());
  const HyperCube rm = unmix::rmse_map(c, set.E, map);
  if (p.has("rmse")) save(p.path("rmse"), rm);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < rm.pixel_count(); ++i)
    if (rm.pixel_valid(i)) {
      sum += rm.values()[i];
      ++n;
    }
  auto r = new_report(op);
  r.metrics["mean_rmse"] = n ? sum / static_cast<double>(n) : 0.0;
  r.metrics["endmembers"] = static_cast<double>(set.count());
  out(ctx) << "mean rmse: " << report::format_number(r.metrics["mean_rmse"]) << "\n";
  finish_report(op, p, ctx, r);
}

void op_abundance(const Params& p, Context& ctx) {
  const HyperCube c = load(p, "in", ctx);
  const auto set = load_endmembers(p, "endmembers", c);
  const std::string method = p.text("method");
  unmix::AbundanceMap map;
  if (method == "ucls") {
    map = unmix::abundance_ucls(c, set.E);
  } else if (method == "nnls") {
    map = unmix::abundance_nnls(c, set.E);
  } else if (method == "fcls") {
    map = unmix::abundance_fcls(c, set.E, p.real("delta"));
  } else {
    unmix::GbmResult g = unmix::abundance_gbm(c, set.E, p.count("iterations"));
    map = std::move(g.abundances);
    if (p.has("gamma")) {
      HyperCube gc = HyperCube::zeros(c.lines(), c.samples(), static_cast<std::size_t>(g.coefficients.gamma.rows()));
      std::copy(g.coefficients.gamma.data(), g.coefficients.gamma.data() + g.coefficients.gamma.size(),
                gc.values().begin());
      std::vector<std::string> names;
      for (std::size_t i = 0; i < set.count(); ++i)
        for (std::size_t j = i + 1; j < set.count(); ++j)
          names.push_back("gamma_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
      if (!names.empty()) {
        gc.header().band_names = names;
        save(p.path("gamma"), gc);
      }
    }
  }
  abundance_report(*find("unmix.abundance"), p, ctx, c, set, map);
}

void op_sparse(const Params& p, Context& ctx) {
  const HyperCube c = load(p, "in", ctx);
  const auto set = load_endmembers(p, "library", c);
  unmix::SparseOptions o;
  o.lambda = p.real("lambda");
  o.constraint = p.text("constraint") == "nonneg_sum1" ? unmix::Constraint::nonneg_sum1 : unmix::Constraint::nonneg;
  o.max_iter = p.count("max_iter");
  o.tol = p.real("tol");
  unmix::AbundanceMap map = unmix::sparse_unmix(c, set.E, o);
  abundance_report(*find("unmix.sparse"), p, ctx, c, set, map);
}

void op_rmse(const Params& p, Context& ctx) {
  const HyperCube c = load(p, "in", ctx);
  const auto set = load_endmembers(p, "endmembers", c);
  const HyperCube a = load(p, "abundances", ctx);
  if (a.lines() != c.lines() || a.samples() != c.samples() || a.bands() != set.count())
    throw Error(Errc::InvalidArgument, "abundance cube does not match the cube and endmembers");
  unmix::AbundanceMap map;
  map.lines = a.lines();
  map.samples = a.samples();
  map.values = a.matrix();
  save(p.path("out"), unmix::rmse_map(c, set.E, map));
}

void op_split(const Params& p, Context& ctx) {
  const auto s = classify::stratified_split(load_mask(p, "mask"), p.real("fraction"), seed_of(p, ctx));
  save_mask(p.path("train_out"), s.train);
  save_mask(p.path("test_out"), s.test);
}

void op_train(const Params& p, Context& ctx) {
  const HyperCube c = load(p, "in", ctx);
  classify::TrainOptions o;
  o.k = p.count("k");
  if (p.has("sam_threshold")) o.sam_threshold_rad = p.real("sam_threshold");
  const auto m = classify::train(c, load_mask(p, "mask"), classify::parse_kind(p.text("kind")), o);
  save_text(p.path("model"), classify::model_to_json(m));
  out(ctx) << "classes: " << m.labels.size() << "\n";
}

void op_predict(const Params& p, Context& ctx) {
  const auto m = classify::model_from_json(envi::read_file_text(p.path("model")));
  save_mask(p.path("out"), classify::predict(m, load(p, "in", ctx)));
}

void accuracy_tables(report::AnalysisReport& r, const classify::AccuracyReport& a) {
  r.metrics["overall_accuracy"] = a.overall_accuracy;
  r.metrics["kappa"] = a.kappa;
  r.metrics["total"] = static_cast<double>(a.total);
  r.metrics["unclassified"] = static_cast<double>(a.unclassified);
  report::Table conf{"confusion (rows = reference)", {"reference"}, {}};
  for (int c : a.labels) conf.columns.push_back(a.class_names.at(c));
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    std::vector<nlohmann::json> row{a.class_names.at(a.labels[i])};
    for (std::size_t j = 0; j < a.labels.size(); ++j)
      row.emplace_back(static_cast<std::int64_t>(a.confusion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
    conf.rows.push_back(std::move(row));
  }
  report::Table per{"per class", {"class", "producer_accuracy", "user_accuracy", "support"}, {}};
  for (std::size_t i = 0; i < a.labels.size(); ++i)
    per.rows.push_back({a.class_names.at(a.labels[i]), a.producer_accuracy[i], a.user_accuracy[i], a.support[i]});
  r.tables.push_back(std::move(conf));
  r.tables.push_back(std::move(per));
}

void op_evaluate(const Params& p, Context& ctx) {
  const auto a = classify::evaluate(load_mask(p, "predicted"), load_mask(p, "reference"));
  out(ctx) << "overall accuracy: " << report::format_number(a.overall_accuracy)
           << "\nkappa: " << report::format_number(a.kappa) << "\n";
  auto r = new_report(*find("classify.evaluate"));
  accuracy_tables(r, a);
  finish_report(*find("classify.evaluate"), p, ctx, r);
}

void op_separability(const Params& p, Context& ctx) {
  const HyperCube c = load(p, "in", ctx);
  const auto s = classify::separability(c, load_mask(p, "mask"));
  if (p.has("out")) save_text(p.path("out"), classify::class_spectra_csv(s));
  auto& os = out(ctx);
  os << "class_a,class_b,bhattacharyya,jeffries_matusita\n";
  auto r = new_report(*find("classify.separability"));
  report::Table pairs{"class pairs", {"class_a", "class_b", "bhattacharyya", "jeffries_matusita"}, {}};
  for (const auto& q : s.pairs) {
    os << s.class_names.at(q.class_a) << ',' << s.class_names.at(q.class_b) << ','
       << report::format_number(q.bhattacharyya) << ',' << report::format_number(q.jeffries_matusita) << "\n";
    pairs.rows.push_back({s.class_names.at(q.class_a), s.class_names.at(q.class_b), q.bhattacharyya, q.jeffries_matusita});
  }
  report::Table bands{"band ranking", {"rank", "band", "min_jm"}, {}};
  for (std::size_t k = 0; k < s.band_ranking.size(); ++k)
    bands.rows.push_back({k + 1, s.band_ranking[k].band, s.band_ranking[k].min_jm});
  double min_pair = s.pairs.empty() ? 0.0 : 2.0;
  for (const auto& q : s.pairs) min_pair = std::min(min_pair, q.jeffries_matusita);
  r.metrics["min_pairwise_jm"] = min_pair;
  r.tables.push_back(std::move(pairs));
  r.tables.push_back(std::move(bands));
  finish_report(*find("classify.separability"), p, ctx, r);
}

void op_grid(const Params& p, Context& ctx) {
  const HyperCube c = load(p, "in", ctx);
  const auto kind = classify::parse_kind(p.text("kind"));
  const auto g = classify::grid_search(c, load_mask(p, "train"), load_mask(p, "validation"), kind, p.reals("grid"));
  auto& os = out(ctx);
  os << "value,overall_accuracy,kappa\n";
  auto r = new_report(*find("classify.grid"));
  report::Table t{"grid", {"value", "overall_accuracy", "kappa"}, {}};
  for (const auto& q : g.points) {
    os << format_shortest(q.value) << ',' << report::format_number(q.overall_accuracy) << ','
       << report::format_number(q.kappa) << "\n";
    t.rows.push_back({q.value, q.overall_accuracy, q.kappa});
  }
  os << "best: " << format_shortest(g.best_value) << "\n";
  r.metrics["best_value"] = g.best_value;
  r.tables.push_back(std::move(t));
  finish_report(*find("classify.grid"), p, ctx, r);
}

fusion::DegradationPair degradation_for(const Params& p, const HyperCube& hx) {
  return fusion::from_response(response_for(p, grid_nm(hx)), p.count("factor"));
}

void op_fuse(const Params& p, Context& ctx) {
  const HyperCube hx = load(p, "hx", ctx);
  const HyperCube mx = load(p, "mx", ctx);
  fusion::CnmfOptions o;
  o.p = p.count("p");
  o.outer_iters = p.count("outer");
  o.inner_iters = p.count("inner");
  o.seed = seed_of(p, ctx);
  fusion::CnmfInfo info;
  const HyperCube fused = fusion::cnmf_fuse(hx, mx, degradation_for(p, hx), o, &info);
  save(p.path("out"), fused);
  auto r = new_report(*find("fuse.run"));
  report::Table t{"outer passes", {"pass", "hx_objective", "mx_objective", "low_res_error"}, {}};
  for (std::size_t k = 0; k < info.low_res_error.size(); ++k)
    t.rows.push_back({k + 1, info.hx_objective[k].empty() ? 0.0 : info.hx_objective[k].back(),
                      info.mx_objective[k].empty() ? 0.0 : info.mx_objective[k].back(), info.low_res_error[k]});
  r.metrics["low_res_error"] = info.low_res_error.empty() ? 0.0 : info.low_res_error.back();
  if (p.has("reference")) {
    const auto s = fusion::summarize_sam(fusion::sam_error_map(fused, load(p, "reference", ctx)));
    r.metrics["sam_mean_rad"] = s.mean;
    r.metrics["sam_median_rad"] = s.median;
  }
  out(ctx) << "low-resolution error: " << report::format_number(r.metrics["low_res_error"]) << "\n";
  r.tables.push_back(std::move(t));
  finish_report(*find("fuse.run"), p, ctx, r);
}

void op_simulate(const Params& p, Context& ctx) {
  const HyperCube ref = load(p, "in", ctx);
  const auto obs = fusion::simulate_degradation(ref, degradation_for(p, ref));
  save(p.path("hx_out"), obs.hx_low);
  save(p.path("mx_out"), obs.mx_high);
}

void op_sam(const Params& p, Context& ctx) {
  const HyperCube m = fusion::sam_error_map(load(p, "fused", ctx), load(p, "reference", ctx));
  if (p.has("out")) save(p.path("out"), m);
  const auto s = fusion::summarize_sam(m);
  out(ctx) << "sam mean: " << report::format_number(s.mean) << "\nsam median: " << report::format_number(s.median)
           << "\n";
  auto r = new_report(*find("fuse.sam"));
  r.metrics["sam_mean_rad"] = s.mean;
  r.metrics["sam_median_rad"] = s.median;
  r.metrics["pixels"] = static_cast<double>(s.count);
  finish_report(*find("fuse.sam"), p, ctx, r);
}

estimate::TrainingData training_for(const Params& p, Context& ctx) {
  std::optional<HyperCube> c;
  if (p.has("in")) c = load(p, "in", ctx);
  return estimate::read_training_csv(p.path("training"), c ? &*c : nullptr);
}

void op_regress_fit(const Params& p, Context& ctx) {
  const auto d = training_for(p, ctx);
  const auto kind = estimate::parse_kind(p.text("kind"));
  const estimate::RegressionModel m = kind == estimate::Kind::plsr
                                          ? estimate::plsr_fit(d.X, d.y, p.count("components"))
                                          : estimate::ridge_fit(d.X, d.y, p.real("alpha"));
  save_text(p.path("model"), estimate::model_to_json(m));
  const Eigen::VectorXd pred = m.predict(d.X);
  out(ctx) << "training r2: " << report::format_number(estimate::r_squared(d.y, pred))
           << "\ntraining rmse: " << report::format_number(estimate::rmse(d.y, pred)) << "\n";
}

void op_regress_cv(const Params& p, Context& ctx) {
  const auto d = training_for(p, ctx);
  const auto kind = estimate::parse_kind(p.text("kind"));
  const auto cv = estimate::cross_validate(d.X, d.y, kind, p.reals("grid"), p.count("folds"), seed_of(p, ctx));
  auto& os = out(ctx);
  os << "hyperparameter,mean_r2,mean_rmse\n";
  auto r = new_report(*find("regress.cv"));
  report::Table t{"cross-validation", {"hyperparameter", "mean_r2", "mean_rmse"}, {}};
  for (const auto& row : cv.table) {
    os << format_shortest(row.hyperparameter) << ',' << report::format_number(row.mean_r2) << ','
       << report::format_number(row.mean_rmse) << "\n";
    t.rows.push_back({row.hyperparameter, row.mean_r2, row.mean_rmse});
  }
  os << "best: " << format_shortest(cv.best_hyperparameter) << "\n";
  if (p.has("model")) save_text(p.path("model"), estimate::model_to_json(cv.best_model));
  r.metrics["best_hyperparameter"] = cv.best_hyperparameter;
  r.tables.push_back(std::move(t));
  finish_report(*find("regress.cv"), p, ctx, r);
}

void op_regress_predict(const Params& p, Context& ctx) {
  const auto m = estimate::model_from_json(envi::read_file_text(p.path("model")));
  save(p.path("out"), estimate::predict_map(m, load(p, "in", ctx)));
}

void op_index(const Params& p, Context& ctx) {
  std::vector<estimate::IndexDefinition> table = estimate::builtin_indices();
  if (p.has("definitions")) {
    const auto extra = estimate::parse_index_csv(envi::read_file_text(p.path("definitions")));
    table.insert(table.begin(), extra.begin(), extra.end());
  }
  auto def = estimate::find_index(table, p.text("name"));
  if (p.has("tolerance")) def.tolerance_nm = p.real("tolerance");
  save(p.path("out"), estimate::compute_index(load(p, "in", ctx), def));
}

void op_render(const Params& p, Context& ctx) {
  const HyperCube c = load(p, "in", ctx);
  std::vector<std::size_t> bands;
  if (p.has("rgb")) {
    bands = to_indices(p.integers("rgb"));
    if (bands.size() != 3) throw UsageError("--rgb needs three band indices");
  } else {
    bands.push_back(p.count("band"));
  }
  const fs::path path = p.path("out");
  ensure_parent(path);
  render::write_image(path, render::render(c, bands, render::parse_stretch(p.text("stretch"))));
}

std::vector<Operation> build_registry() {
  using T = ParamType;
  std::vector<Operation> ops;
  auto add = [&](std::string name, std::string help, std::vector<ParamSpec> params,
                 void (*fn)(const Params&, Context&), bool seeded = false) {
    if (seeded) params.push_back(value("seed", T::integer, std::nullopt, "random seed (default: global --seed)"));
    ops.push_back({std::move(name), std::move(help), std::move(params), seeded, fn});
  };

  add("info", "print header summary", {in_cube()}, op_info);
  add("subset", "spatial and spectral subset",
      {in_cube(), output("out", "output header"), value("rows", T::text, "", "row range begin:end"),
       value("cols", T::text, "", "column range begin:end"), value("bands", T::integers, std::nullopt, "band indices")},
      op_subset);
  add("scale", "multiply by a factor", {in_cube(), output("out", "output header"), required("factor", T::real, "scale factor")},
      op_scale);
  add("stats", "per-band statistics",
      {in_cube(), output("out", "CSV output (stdout when absent)", false), report_param()}, op_stats);
  add("srf", "build a spectral response matrix",
      join({in_cube(), output("out", "response CSV")}, sensor_params()), op_srf);
  add("resample.spectral", "resample to a target sensor",
      join({in_cube(), output("out", "output header")}, sensor_params()), op_resample_spectral);
  add("resample.spatial", "integer-factor spatial downsample",
      {in_cube(), output("out", "output header"), required("factor", T::integer, "downsample factor"),
       choice("psf", {"block_mean", "gaussian"}, "block_mean", "point spread function")},
      op_resample_spatial);

  add("preprocess.sg", "Savitzky-Golay smoothing",
      {in_cube(), output("out", "output header"), value("window", T::integer, "7", "odd window length"),
       value("order", T::integer, "2", "polynomial order"), choice("edge", {"fit", "mirror"}, "fit", "edge handling")},
      op_sg);
  add("preprocess.continuum", "continuum removal", {in_cube(), output("out", "output header")}, op_continuum);
  add("preprocess.scale", "per-band scaling",
      {in_cube(), output("out", "output header"), choice("method", {"standard", "minmax", "robust"}, "standard", "scaling")},
      op_prep_scale);
  add("preprocess.pca", "principal components",
      {in_cube(), required("k", T::integer, "components"), output("out", "component scores header", false),
       output("model", "model JSON", false)},
      op_pca);
  add("preprocess.mnf", "minimum noise fraction",
      {in_cube(), required("k", T::integer, "components"), output("out", "component scores header", false),
       output("model", "model JSON", false)},
      op_mnf);
  add("preprocess.apply", "apply a saved transform",
      {in_cube(), input("model", "model JSON"), output("out", "output header")}, op_apply);
  add("preprocess.inverse", "invert a saved transform",
      {in_cube(), input("model", "model JSON"), output("out", "output header")}, op_inverse);

  const std::vector<ParamSpec> noise_params{
      choice("method", {"spectral_decorrelation", "spatial_spectral", "homogeneous_roi"}, "spectral_decorrelation",
             "noise estimator"),
      optional_input("roi", "ROI mask header (homogeneous_roi)"), value("block", T::integer, "8", "tile size")};
  add("quality.noise", "per-band noise and SNR",
      join({in_cube(), output("out", "CSV output (stdout when absent)", false), report_param()}, noise_params), op_noise);
  add("quality.badbands", "flag bad bands",
      join({in_cube(), value("threshold", T::real, "20", "SNR (dB) or sigma threshold"),
            choice("criterion", {"snr_db", "sigma"}, "snr_db", "threshold meaning"),
            output("out", "copy of the cube with the bad band list", false)},
           noise_params),
      op_badbands);
  add("quality.destripe", "moment-matching destriping",
      {in_cube(), output("out", "output header"), choice("axis", {"column", "row"}, "column", "stripe direction")},
      op_destripe);
  add("quality.whiten", "noise whitening", {in_cube(), output("out", "output header")}, op_whiten);
  add("quality.cibr", "continuum-interpolated band ratio",
      {in_cube(), output("out", "output header"), value("absorption", T::real, "940", "absorption band nm"),
       value("left", T::real, "865", "left shoulder nm"), value("right", T::real, "1025", "right shoulder nm")},
      op_cibr);

  add("unmix.count", "HFC material count",
      {in_cube(), value("pfa", T::real, "1e-3", "false alarm probability"), report_param()}, op_count);
  add("unmix.extract", "endmember extraction",
      {in_cube(), choice("algo", {"atgp", "nfindr", "ppi", "vca"}, "vca", "algorithm"),
       value("p", T::integer, "0", "endmember count (0 = HFC estimate)"),
       value("pfa", T::real, "1e-3", "HFC false alarm probability"),
       value("skewers", T::integer, "1000", "PPI skewers"), value("snr", T::real, std::nullopt, "VCA SNR in dB"),
       output("out", "endmember library CSV"), report_param()},
      op_extract, true);
  add("unmix.abundance", "abundance estimation",
      {in_cube(), input("endmembers", "endmember library CSV"),
       choice("method", {"ucls", "nnls", "fcls", "gbm"}, "fcls", "estimator"),
       value("delta", T::real, "1e-3", "FCLS sum-to-one weight"), value("iterations", T::integer, "20", "GBM alternations"),
       output("out", "abundance cube header"), output("rmse", "RMSE map header", false),
       output("gamma", "GBM interaction coefficients header", false), report_param()},
      op_abundance);
  add("unmix.sparse", "sparse unmixing (ADMM)",
      {in_cube(), input("library", "spectral library CSV"), value("lambda", T::real, "0", "l1 weight"),
       choice("constraint", {"nonneg", "nonneg_sum1"}, "nonneg", "constraint"),
       value("max_iter", T::integer, "200", "iteration cap"), value("tol", T::real, "1e-6", "residual tolerance"),
       output("out", "abundance cube header"), output("rmse", "RMSE map header", false), report_param()},
      op_sparse);
  add("unmix.rmse", "reconstruction error map",
      {in_cube(), input("endmembers", "endmember library CSV"), input("abundances", "abundance cube header"),
       output("out", "RMSE map header")},
      op_rmse);

  add("classify.split", "stratified train/test split",
      {input("mask", "label mask header", true), value("fraction", T::real, "0.7", "train fraction"),
       output("train_out", "train mask header"), output("test_out", "test mask header")},
      op_split, true);
  add("classify.train", "train a classifier",
      {in_cube(), input("mask", "training mask header"), choice("kind", {"sam", "gaussian_ml", "knn"}, "sam", "classifier"),
       value("k", T::integer, "5", "knn neighbours (odd)"), value("sam_threshold", T::real, std::nullopt, "SAM threshold (rad)"),
       output("model", "model JSON")},
      op_train);
  add("classify.predict", "apply a classifier",
      {in_cube(), input("model", "model JSON"), output("out", "label mask header")}, op_predict);
  add("classify.evaluate", "accuracy assessment",
      {input("predicted", "predicted mask header", true), input("reference", "reference mask header"), report_param()},
      op_evaluate);
  add("classify.separability", "class separability",
      {in_cube(), input("mask", "label mask header"), output("out", "class mean/std spectra CSV", false), report_param()},
      op_separability);
  add("classify.grid", "hyperparameter grid search",
      {in_cube(), input("train", "training mask header"), input("validation", "validation mask header"),
       choice("kind", {"knn", "sam"}, "knn", "classifier"), required("grid", T::reals, "values to try"), report_param()},
      op_grid);

  add("fuse.run", "CNMF hyperspectral/multispectral fusion",
      join({input("hx", "low-resolution hyperspectral header", true), input("mx", "high-resolution multispectral header"),
            required("factor", T::integer, "spatial factor"), value("p", T::integer, "3", "endmembers"),
            value("outer", T::integer, "3", "outer passes"), value("inner", T::integer, "100", "inner iterations"),
            output("out", "fused cube header"), optional_input("reference", "ground-truth cube for SAM metrics"),
            report_param()},
           sensor_params()),
      op_fuse, true);
  add("fuse.simulate", "simulate a degraded observation pair",
      join({in_cube(), required("factor", T::integer, "spatial factor"), output("hx_out", "low-resolution header"),
            output("mx_out", "multispectral header")},
           sensor_params()),
      op_simulate);
  add("fuse.sam", "spectral angle error map",
      {input("fused", "fused cube header", true), input("reference", "reference cube header"),
       output("out", "SAM map header", false), report_param()},
      op_sam);

  add("regress.fit", "fit a regression model",
      {input("training", "training CSV", true), optional_input("in", "cube for row,col training references"),
       choice("kind", {"plsr", "ridge"}, "plsr", "model"), value("components", T::integer, "2", "PLS components"),
       value("alpha", T::real, "1", "ridge penalty"), output("model", "model JSON")},
      op_regress_fit);
  add("regress.cv", "k-fold cross-validation",
      {input("training", "training CSV", true), optional_input("in", "cube for row,col training references"),
       choice("kind", {"plsr", "ridge"}, "plsr", "model"), required("grid", T::reals, "hyperparameters to try"),
       value("folds", T::integer, "5", "folds"), output("model", "best model JSON", false), report_param()},
      op_regress_cv, true);
  add("regress.predict", "prediction map",
      {in_cube(), input("model", "model JSON"), output("out", "output header")}, op_regress_predict);

  add("index", "spectral index",
      {in_cube(), value("name", T::text, "NDVI", "index name"), optional_input("definitions", "index CSV"),
       value("tolerance", T::real, std::nullopt, "band match tolerance (nm)"), output("out", "output header")},
      op_index);
  add("render", "8-bit PGM/PPM/PNG quicklook",
      {in_cube(), value("band", T::integer, "0", "band index"), value("rgb", T::integers, std::nullopt, "r,g,b band indices"),
       choice("stretch", {"minmax", "stddev2"}, "minmax", "contrast stretch"), output("out", "image path")},
      op_render);
  return ops;
}

}  // namespace

const std::vector<Operation>& registry() {
  static const std::vector<Operation> ops = build_registry();
  return ops;
}

const Operation* find(std::string_view name) {
  for (const auto& op : registry())
    if (op.name == name) return &op;
  return nullptr;
}

void finish_report(const Operation& op, const Params& params, Context& ctx, report::AnalysisReport& r) {
  std::optional<fs::path> stem;
  if (params.has("report")) {
    stem = params.path("report");
  } else if (ctx.report_dir) {
    std::string name = op.name;
    std::replace(name.begin(), name.end(), '.', '_');
    stem = *ctx.report_dir / name;
  }
  if (!stem) return;
  r.tool = "hxkit " + op.name;
  for (const auto& [k, v] : params.values()) {
    if (k == "report") continue;
    r.parameters[k] = value_json(v);
  }
  if (op.seeded && !params.has("seed")) r.parameters["seed"] = ctx.seed;
  for (const auto& spec : op.params) {
    if (spec.type != ParamType::input || !params.has(spec.name)) continue;
    const fs::path path = params.path(spec.name);
    r.input_digests[path.string()] = report::sha256_file(path);
    if (normalize_key(path.extension().string()) == ".hdr") {
      const fs::path data = envi::infer_data_path(path);
      if (fs::exists(data)) r.input_digests[data.string()] = report::sha256_file(data);
    }
  }
  if (ctx.timestamps) r.timestamp = report::utc_timestamp();
  ensure_parent(*stem);
  report::emit_report(r, *stem, true, true);
}

}  // namespace hxkit::ops
