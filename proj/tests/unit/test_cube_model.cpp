#include <doctest.h>

#include <filesystem>
#include <numbers>
#include <numeric>

#include "hxkit/cube_model.hpp"
#include "hxkit/envi_io.hpp"
#include "hxkit/rng.hpp"

using namespace hxkit;

namespace {

HyperCube ramp(std::size_t lines, std::size_t samples, std::size_t bands) {
  HyperCube c = HyperCube::zeros(lines, samples, bands);
  std::iota(c.values().begin(), c.values().end(), 1.0);
  std::vector<double> wl(bands), fw(bands, 10.0);
  for (std::size_t b = 0; b < bands; ++b) wl[b] = 400.0 + 10.0 * b;
  c.header().wavelengths = wl;
  c.header().fwhm = fw;
  c.header().bbl = std::vector<int>(bands, 1);
  return c;
}

template <typename F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return Errc::Io;
}

}  // namespace

TEST_CASE("spatial subset") {
  const HyperCube c = ramp(4, 5, 3);
  CHECK(cube::spatial_subset(c, {0, 4}, {0, 5}) == c);
  const HyperCube one = cube::spatial_subset(c, {2, 3}, {1, 2});
  CHECK(one.lines() == 1);
  CHECK(one.samples() == 1);
  for (std::size_t b = 0; b < 3; ++b) CHECK(one.at(0, 0, b) == c.at(2, 1, b));
  CHECK(one.header().wavelengths == c.header().wavelengths);
  CHECK_THROWS_AS(cube::spatial_subset(c, {3, 1}, {0, 5}), Error);
  CHECK_THROWS_AS(cube::spatial_subset(c, {0, 5}, {0, 5}), Error);
  CHECK_THROWS_AS(cube::spatial_subset(c, {1, 1}, {0, 5}), Error);
}

TEST_CASE("subset of a subset equals the combined subset") {
  const HyperCube c = ramp(6, 7, 2);
  const HyperCube twice = cube::spatial_subset(cube::spatial_subset(c, {1, 6}, {2, 7}), {1, 3}, {0, 4});
  CHECK(twice == cube::spatial_subset(c, {2, 4}, {2, 6}));
}

TEST_CASE("spectral subset keeps lists consistent") {
  const HyperCube c = ramp(2, 2, 4);
  const std::vector<std::size_t> all = {0, 1, 2, 3};
  CHECK(cube::spectral_subset(c, all) == c);
  const std::vector<std::size_t> pick = {1, 3};
  const HyperCube s = cube::spectral_subset(c, pick);
  CHECK(s.bands() == 2);
  CHECK(s.at(1, 1, 1) == c.at(1, 1, 3));
  REQUIRE(s.header().fwhm);
  CHECK(s.header().fwhm->size() == 2);
  const std::vector<std::size_t> first = {0};
  CHECK(cube::spectral_subset(c, first).header().wavelengths == std::vector<double>{400.0});
  const std::vector<std::size_t> dup = {1, 1};
  CHECK_THROWS_AS(cube::spectral_subset(c, dup), Error);
  const std::vector<std::size_t> past = {4};
  CHECK_THROWS_AS(cube::spectral_subset(c, past), Error);
}

TEST_CASE("scale cube") {
  HyperCube c = ramp(2, 3, 2);
  c.values()[0] = 10000.0;
  CHECK(cube::scale_cube(c, 1.0) == c);
  CHECK(cube::scale_cube(c, 0.0001).values()[0] == doctest::Approx(1.0));
  CHECK(code_of([&] { cube::scale_cube(c, 0.0); }) == Errc::ZeroScale);

  c.values()[3] = -9999.0;
  c.set_nodata(-9999.0);
  const HyperCube s = cube::scale_cube(c, 3.0);
  CHECK(s.values()[3] == -9999.0);
  const HyperCube back = cube::scale_cube(s, 1.0 / 3.0);
  for (std::size_t i = 0; i < c.values().size(); ++i) {
    CHECK(back.values()[i] == doctest::Approx(c.values()[i]).epsilon(1e-12));
  }
}

TEST_CASE("band statistics") {
  HyperCube c = HyperCube::zeros(2, 2, 2);
  for (std::size_t n = 0; n < 4; ++n) {
    c.pixel(n)[0] = 7.0;
    c.pixel(n)[1] = n % 2 ? 1.0 : 0.0;
  }
  const auto st = cube::band_stats(c);
  CHECK(st[0].mean == 7.0);
  CHECK(st[0].std == 0.0);
  CHECK(st[1].mean == 0.5);
  CHECK(st[1].std == doctest::Approx(0.5));
  for (const auto& s : st) {
    CHECK(std::accumulate(s.histogram.begin(), s.histogram.end(), std::size_t{0}) == 4);
  }
}

TEST_CASE("band statistics skip nodata") {
  HyperCube c = HyperCube::zeros(1, 3, 1);
  c.values() = {1.0, -1.0, 3.0};
  c.set_nodata(-1.0);
  const auto st = cube::band_stats(c);
  CHECK(st[0].count == 2);
  CHECK(st[0].nodata_count == 1);
  CHECK(st[0].mean == 2.0);
  CHECK(st[0].min == 1.0);
}

TEST_CASE("spectral angle") {
  const std::vector<double> x = {1.0, 2.0, 3.0}, x2 = {2.0, 4.0, 6.0};
  const std::vector<double> e1 = {1.0, 0.0}, e2 = {0.0, 1.0}, zero = {0.0, 0.0};
  CHECK(cube::spectral_angle(x, x) == doctest::Approx(0.0));
  CHECK(cube::spectral_angle(x, x2) == doctest::Approx(0.0));
  CHECK(cube::spectral_angle(e1, e2) == doctest::Approx(std::numbers::pi / 2));
  CHECK(code_of([&] { cube::spectral_angle(e1, zero); }) == Errc::ZeroNorm);

  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a(5), b(5), as(5), bs(5);
    const double ka = 0.1 + rng.uniform() * 5, kb = 0.1 + rng.uniform() * 5;
    for (int i = 0; i < 5; ++i) {
      a[i] = rng.normal();
      b[i] = rng.normal();
      as[i] = ka * a[i];
      bs[i] = kb * b[i];
    }
    const double th = cube::spectral_angle(a, b);
    CHECK(th == doctest::Approx(cube::spectral_angle(b, a)));
    CHECK(th == doctest::Approx(cube::spectral_angle(as, bs)));
    CHECK(th >= 0.0);
    CHECK(th <= std::numbers::pi);
  }
}

TEST_CASE("scatter statistics") {
  HyperCube c = HyperCube::zeros(2, 3, 3);
  Rng rng(5);
  for (std::size_t n = 0; n < 6; ++n) {
    const double v = rng.normal();
    c.pixel(n)[0] = v;
    c.pixel(n)[1] = -v;
    c.pixel(n)[2] = 4.0;
  }
  CHECK(cube::scatter_stats(c, 0, 0).pearson_r == doctest::Approx(1.0));
  const auto neg = cube::scatter_stats(c, 0, 1);
  CHECK(neg.pearson_r == doctest::Approx(-1.0));
  CHECK(neg.first.size() == 6);
  CHECK(code_of([&] { cube::scatter_stats(c, 0, 2); }) == Errc::DegenerateVariance);
}

TEST_CASE("pearson is stable on large offsets") {
  std::vector<double> x, y;
  for (int i = 0; i < 100; ++i) {
    x.push_back(1e9 + i);
    y.push_back(1e9 + 2 * i);
  }
  CHECK(cube::pearson(x, y) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("spectral library csv round trip") {
  const std::string text = "wavelength,grass,soil\n400,0.1,0.2\n500,0.15,0.25\n600,0.3,0.35\n";
  const SpectralLibrary lib = cube::parse_library_csv(text);
  CHECK(lib.names == std::vector<std::string>{"grass", "soil"});
  CHECK(lib.spectra.rows() == 2);
  CHECK(lib.spectra.cols() == 3);
  CHECK(lib.spectra(1, 2) == 0.35);
  const SpectralLibrary back = cube::parse_library_csv(cube::format_library_csv(lib));
  CHECK(back.names == lib.names);
  CHECK(back.wavelengths == lib.wavelengths);
  CHECK(back.spectra == lib.spectra);
  CHECK_THROWS_AS(cube::parse_library_csv("wavelength,a\n500,1\n400,2\n"), Error);
}

TEST_CASE("label masks through files") {
  const auto dir = std::filesystem::temp_directory_path() / "hxkit_cube_model_test";
  std::filesystem::create_directories(dir);
  LabelMask m(2, 3);
  m.at(0, 0) = 1;
  m.at(1, 2) = 2;
  m.class_names = {{1, "water"}, {2, "grass"}};
  cube::write_label_mask(dir / "labels.hdr", m);
  envi::write_file_text(dir / "names.json", cube::class_names_json(m));
  const LabelMask back = cube::read_label_mask(dir / "labels.hdr", dir / "names.json");
  CHECK(back == m);
  CHECK(back.classes() == std::vector<int>{1, 2});
  CHECK(back.count(0) == 4);

  LabelMask unnamed(1, 2);
  unnamed.labels = {0, 3};
  unnamed.fill_missing_names();
  CHECK(unnamed.class_names.at(3) == "class_3");
  std::filesystem::remove_all(dir);
}
