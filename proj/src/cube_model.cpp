#include "hxkit/cube_model.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <set>

#include "hxkit/csv.hpp"
#include "hxkit/detail/strings.hpp"
#include "hxkit/envi_io.hpp"

namespace hxkit {

void SpectralLibrary::validate() const {
  if (static_cast<std::size_t>(spectra.rows()) != names.size()) {
    throw Error(Errc::InvalidArgument, "spectral library row count does not match names");
  }
  if (static_cast<std::size_t>(spectra.cols()) != wavelengths.size()) {
    throw Error(Errc::InvalidArgument, "spectral library column count does not match wavelengths");
  }
  for (std::size_t i = 1; i < wavelengths.size(); ++i) {
    if (!(wavelengths[i] > wavelengths[i - 1])) {
      throw Error(Errc::InvalidArgument, "library wavelengths must be strictly increasing");
    }
  }
}

std::vector<int> LabelMask::classes() const {
  std::set<int> s;
  for (int v : labels) {
    if (v != 0) s.insert(v);
  }
  return {s.begin(), s.end()};
}

std::size_t LabelMask::count(int label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

void LabelMask::fill_missing_names() {
  for (int c : classes()) {
    if (!class_names.count(c)) class_names[c] = "class_" + std::to_string(c);
  }
}

void LabelMask::validate() const {
  if (labels.size() != lines * samples) {
    throw Error(Errc::InvalidArgument, "label mask size does not match its dimensions");
  }
  for (int c : classes()) {
    if (!class_names.count(c)) {
      throw Error(Errc::InvalidArgument, "label " + std::to_string(c) + " has no class name");
    }
  }
}

void LabelMask::check_matches(const HyperCube& cube) const {
  if (lines != cube.lines() || samples != cube.samples()) {
    throw Error(Errc::InvalidArgument, "label mask is " + std::to_string(lines) + "x" +
                                           std::to_string(samples) + " but cube is " +
                                           std::to_string(cube.lines()) + "x" +
                                           std::to_string(cube.samples()));
  }
}

}  // namespace hxkit

namespace hxkit::cube {

HyperCube spatial_subset(const HyperCube& cube, Range rows, Range cols) {
  if (rows.begin >= rows.end || cols.begin >= cols.end || rows.end > cube.lines() ||
      cols.end > cube.samples()) {
    throw Error(Errc::OutOfRange, "subset ranges must be nonempty and within the cube");
  }
  const std::size_t nl = rows.end - rows.begin;
  const std::size_t ns = cols.end - cols.begin;
  HyperCube out = HyperCube::zeros_like(cube.header(), nl, ns, cube.bands());
  out.set_nodata(cube.nodata());
  for (std::size_t r = 0; r < nl; ++r) {
    for (std::size_t c = 0; c < ns; ++c) {
      const auto src = cube.pixel(rows.begin + r, cols.begin + c);
      std::copy(src.begin(), src.end(), out.pixel(r, c).begin());
    }
  }
  return out;
}

HyperCube spectral_subset(const HyperCube& cube, std::span<const std::size_t> band_indices) {
  if (band_indices.empty()) throw Error(Errc::OutOfRange, "band subset is empty");
  std::set<std::size_t> seen;
  for (std::size_t b : band_indices) {
    if (b >= cube.bands()) {
      throw Error(Errc::OutOfRange, "band index " + std::to_string(b) + " out of range");
    }
    if (!seen.insert(b).second) {
      throw Error(Errc::InvalidArgument, "duplicate band index " + std::to_string(b));
    }
  }
  HeaderInfo h = cube.header();
  h.bands = band_indices.size();
  auto pick = [&](auto& list) {
    if (!list) return;
    auto src = *list;
    list->clear();
    for (std::size_t b : band_indices) list->push_back(src[b]);
  };
  pick(h.wavelengths);
  pick(h.fwhm);
  pick(h.bbl);
  pick(h.band_names);
  std::vector<double> values(cube.pixel_count() * h.bands);
  for (std::size_t i = 0; i < cube.pixel_count(); ++i) {
    const auto px = cube.pixel(i);
    for (std::size_t k = 0; k < band_indices.size(); ++k) {
      values[i * h.bands + k] = px[band_indices[k]];
    }
  }
  // Reordered wavelengths must still increase; HyperCube validates.
  return HyperCube(std::move(h), std::move(values), cube.nodata());
}

HyperCube scale_cube(const HyperCube& cube, double factor) {
  if (!std::isfinite(factor) || factor == 0.0) {
    throw Error(Errc::ZeroScale, "scale factor must be finite and nonzero");
  }
  HyperCube out = cube;
  for (double& v : out.values()) {
    if (!cube.is_nodata_value(v)) v *= factor;
  }
  return out;
}

std::vector<BandStats> band_stats(const HyperCube& cube) {
  std::vector<BandStats> stats(cube.bands());
  for (std::size_t b = 0; b < cube.bands(); ++b) {
    BandStats& s = stats[b];
    s.min = std::numeric_limits<double>::infinity();
    s.max = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (std::size_t i = 0; i < cube.pixel_count(); ++i) {
      const double v = cube.pixel(i)[b];
      if (cube.is_nodata_value(v)) {
        ++s.nodata_count;
        continue;
      }
      ++s.count;
      sum += v;
      s.min = std::min(s.min, v);
      s.max = std::max(s.max, v);
    }
    if (s.count == 0) {
      s.min = s.max = 0.0;
      continue;
    }
    s.mean = sum / static_cast<double>(s.count);
    double ss = 0.0;
    const double range = s.max - s.min;
    for (std::size_t i = 0; i < cube.pixel_count(); ++i) {
      const double v = cube.pixel(i)[b];
      if (cube.is_nodata_value(v)) continue;
      ss += (v - s.mean) * (v - s.mean);
      std::size_t bin = 0;
      if (range > 0.0) {
        bin = static_cast<std::size_t>((v - s.min) / range * 256.0);
        bin = std::min<std::size_t>(bin, 255);
      }
      ++s.histogram[bin];
    }
    s.std = std::sqrt(ss / static_cast<double>(s.count));
  }
  return stats;
}

double spectral_angle(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(Errc::InvalidArgument, "spectra differ in length");
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xy += x[i] * y[i];
    xx += x[i] * x[i];
    yy += y[i] * y[i];
  }
  if (xx == 0.0 || yy == 0.0) throw Error(Errc::ZeroNorm, "spectral angle of a zero-norm spectrum");
  const double c = xy / (std::sqrt(xx) * std::sqrt(yy));
  return std::acos(std::clamp(c, -1.0, 1.0));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(Errc::InvalidArgument, "correlation needs two equal-length series of length >= 2");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw Error(Errc::DegenerateVariance, "correlation of a constant series");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

ScatterStats scatter_stats(const HyperCube& cube, std::size_t band_i, std::size_t band_j) {
  if (band_i >= cube.bands() || band_j >= cube.bands()) {
    throw Error(Errc::OutOfRange, "scatter band index out of range");
  }
  ScatterStats s;
  for (std::size_t i = 0; i < cube.pixel_count(); ++i) {
    if (!cube.pixel_valid(i)) continue;
    s.first.push_back(cube.pixel(i)[band_i]);
    s.second.push_back(cube.pixel(i)[band_j]);
  }
  s.pearson_r = pearson(s.first, s.second);
  return s;
}

SpectralLibrary parse_library_csv(std::string_view text) {
  const auto table = csv::parse(text, true);
  if (table.columns.size() < 2) {
    throw Error(Errc::InvalidArgument, "spectral library CSV needs a wavelength column and spectra");
  }
  SpectralLibrary lib;
  lib.names.assign(table.columns.begin() + 1, table.columns.end());
  lib.spectra.resize(static_cast<Eigen::Index>(lib.names.size()),
                     static_cast<Eigen::Index>(table.rows.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    lib.wavelengths.push_back(csv::number(table, r, 0));
    for (std::size_t k = 0; k < lib.names.size(); ++k) {
      lib.spectra(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(r)) =
          csv::number(table, r, k + 1);
    }
  }
  lib.validate();
  return lib;
}

SpectralLibrary read_library_csv(const std::filesystem::path& path) {
  return parse_library_csv(envi::read_file_text(path));
}

std::string format_library_csv(const SpectralLibrary& library) {
  library.validate();
  csv::Table t;
  t.columns.push_back("wavelength");
  t.columns.insert(t.columns.end(), library.names.begin(), library.names.end());
  for (std::size_t w = 0; w < library.wavelengths.size(); ++w) {
    std::vector<std::string> row{detail::format_shortest(library.wavelengths[w])};
    for (Eigen::Index k = 0; k < library.spectra.rows(); ++k) {
      row.push_back(detail::format_shortest(library.spectra(k, static_cast<Eigen::Index>(w))));
    }
    t.rows.push_back(std::move(row));
  }
  return csv::format(t);
}

LabelMask mask_from_cube(const HyperCube& cube) {
  if (cube.bands() != 1) throw Error(Errc::InvalidArgument, "label raster must have one band");
  LabelMask m(cube.lines(), cube.samples());
  for (std::size_t i = 0; i < cube.pixel_count(); ++i) {
    const double v = cube.pixel(i)[0];
    if (cube.is_nodata_value(v)) continue;
    if (v != std::nearbyint(v) || v < 0) {
      throw Error(Errc::InvalidArgument, "label raster values must be non-negative integers");
    }
    m.labels[i] = static_cast<int>(v);
  }
  return m;
}

HyperCube cube_from_mask(const LabelMask& mask) {
  HeaderInfo h;
  h.lines = mask.lines;
  h.samples = mask.samples;
  h.bands = 1;
  return HyperCube(std::move(h), std::vector<double>(mask.labels.begin(), mask.labels.end()));
}

std::string class_names_json(const LabelMask& mask) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [label, name] : mask.class_names) j[std::to_string(label)] = name;
  return j.dump(2) + "\n";
}

std::map<int, std::string> parse_class_names_json(std::string_view text) {
  std::map<int, std::string> out;
  const auto j = nlohmann::json::parse(text);
  if (!j.is_object()) throw Error(Errc::InvalidArgument, "class table must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto label = detail::parse_int(key);
    if (!label || !value.is_string()) {
      throw Error(Errc::InvalidArgument, "class table entries must be \"<int>\": \"<name>\"");
    }
    out[static_cast<int>(*label)] = value.get<std::string>();
  }
  return out;
}

namespace {
std::filesystem::path sibling_names(const std::filesystem::path& header_path) {
  auto p = header_path;
  p.replace_extension(".classes.json");
  return p;
}
}  // namespace

LabelMask read_label_mask(const std::filesystem::path& header_path,
                          const std::optional<std::filesystem::path>& names_json) {
  LabelMask m = mask_from_cube(envi::load_cube(header_path));
  const auto names = names_json ? *names_json : sibling_names(header_path);
  if (std::filesystem::is_regular_file(names)) {
    m.class_names = parse_class_names_json(envi::read_file_text(names));
  } else if (names_json) {
    throw Error(Errc::Io, "class table " + names.string() + " not found");
  }
  m.fill_missing_names();
  return m;
}

void write_label_mask(const std::filesystem::path& header_path, const LabelMask& mask) {
  const auto classes = mask.classes();
  const int top = classes.empty() ? 0 : classes.back();
  envi::WriteOptions opts;
  opts.data_type = top <= 255 ? DataType::u8 : DataType::i32;
  envi::save_cube(header_path, cube_from_mask(mask), opts);
  envi::write_file_text(sibling_names(header_path), class_names_json(mask));
}

}  // namespace hxkit::cube
