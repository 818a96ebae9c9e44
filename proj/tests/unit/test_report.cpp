#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "hxkit/envi_io.hpp"
#include "hxkit/render.hpp"
#include "hxkit/report.hpp"

using namespace hxkit;
using nlohmann::json;

namespace {

report::AnalysisReport sample_report() {
  report::AnalysisReport r;
  r.tool = "classify.evaluate";
  r.parameters = {{"k", 5}, {"algo", "knn"}};
  r.metrics = {{"overall_accuracy", 0.8333333333333334}, {"kappa", 2.0 / 3.0}};
  report::Table t;
  t.name = "per_class";
  t.columns = {"class", "producer_accuracy"};
  t.rows = {{"water", 0.5}, {"grass", 1.0}};
  r.tables.push_back(t);
  r.input_digests = {{"a.hdr", std::string(64, 'f')}};
  return r;
}

}  // namespace

TEST_CASE("canonical json sorts keys and fixes the float format") {
  const json j = {{"b", 1.0 / 3.0}, {"a", {{"z", 1}, {"y", -0.0}}}, {"c", "x"}};
  CHECK(report::canonical_json(j) == R"({"a":{"y":0,"z":1},"b":0.3333333333,"c":"x"})");
  const json nf = {{"n", std::numeric_limits<double>::quiet_NaN()},
                   {"i", std::numeric_limits<double>::infinity()}};
  CHECK(report::canonical_json(nf) == R"({"i":null,"n":null})");
  CHECK(report::format_number(1e-20) == "1e-20");
  CHECK(report::format_number(2.0) == "2");
}

TEST_CASE("canonical json is a fixed point through parse") {
  const std::string first = report::canonical_json(sample_report().to_json());
  CHECK(report::canonical_json(json::parse(first)) == first);
  const auto back = report::AnalysisReport::from_json(json::parse(first));
  CHECK(report::canonical_json(back.to_json()) == first);
  CHECK(back.tool == "classify.evaluate");
  CHECK(back.tables.size() == 1);
  CHECK_FALSE(back.timestamp.has_value());
}

TEST_CASE("html carries every metric and no scripts") {
  const auto r = sample_report();
  const std::string html = report::render_html(r);
  for (const auto& [k, v] : r.metrics) {
    CHECK(html.find(k) != std::string::npos);
    CHECK(html.find(report::format_number(v)) != std::string::npos);
  }
  CHECK(html.find("water") != std::string::npos);
  CHECK(html.find("<script") == std::string::npos);
}

TEST_CASE("empty reports are still valid") {
  report::AnalysisReport r;
  r.tool = "info";
  const auto j = json::parse(report::canonical_json(r.to_json()));
  CHECK(j.at("tool") == "info");
  CHECK(report::render_html(r).find("</html>") != std::string::npos);
}

TEST_CASE("sha256 digests") {
  CHECK(report::sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(report::sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const auto dir = std::filesystem::temp_directory_path() / "hxkit_report_test";
  std::filesystem::create_directories(dir);
  envi::write_file_text(dir / "abc.txt", "abc");
  CHECK(report::sha256_file(dir / "abc.txt") == report::sha256_hex("abc"));

  const auto paths = report::emit_report(sample_report(), dir / "out", true, true);
  CHECK(paths.size() == 2);
  for (const auto& p : paths) CHECK(std::filesystem::exists(p));
  std::filesystem::remove_all(dir);
}

TEST_CASE("timestamps look like UTC ISO-8601") {
  const std::string ts = report::utc_timestamp();
  CHECK(ts.size() == 20);
  CHECK(ts.back() == 'Z');
  CHECK(ts[10] == 'T');
}

TEST_CASE("stretching") {
  HyperCube c = HyperCube::zeros(1, 3, 2);
  c.values() = {0.0, 5.0, 0.5, 5.0, 1.0, 5.0};
  const auto mm = render::stretch_band(c, 0, render::Stretch::minmax);
  CHECK(mm[0] == 0);
  CHECK(mm[2] == 255);
  for (auto v : render::stretch_band(c, 1, render::Stretch::minmax)) CHECK(v == 128);

  HyperCube wide = HyperCube::zeros(1, 101, 1);
  for (std::size_t i = 0; i < 100; ++i) wide.values()[i] = 0.0;
  wide.values()[100] = 1000.0;
  const auto sd = render::stretch_band(wide, 0, render::Stretch::stddev2);
  CHECK(sd[100] == 255);  // clamped above mean + 2 sd

  c.values()[0] = -1.0;
  c.set_nodata(-1.0);
  CHECK(render::stretch_band(c, 0, render::Stretch::minmax)[0] == 0);
}

TEST_CASE("rendering and PNM encoding") {
  HyperCube c = HyperCube::zeros(2, 3, 3);
  for (std::size_t i = 0; i < c.values().size(); ++i) c.values()[i] = static_cast<double>(i % 7);
  const auto gray = render::render(c, {0}, render::Stretch::minmax);
  CHECK(gray.channels == 1);
  CHECK(gray.width == 3);
  CHECK(gray.height == 2);
  const std::string pgm = render::encode_pnm(gray);
  CHECK(pgm.rfind("P5\n3 2\n255\n", 0) == 0);
  CHECK(pgm.size() == 11 + 6);
  const auto rgb = render::render(c, {2, 1, 0}, render::Stretch::minmax);
  CHECK(rgb.channels == 3);
  CHECK(render::encode_pnm(rgb).rfind("P6\n", 0) == 0);
  CHECK_THROWS_AS(render::render(c, {0, 1}, render::Stretch::minmax), Error);
  CHECK_THROWS_AS(render::render(c, {3}, render::Stretch::minmax), Error);
}
