#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hxkit/fusion.hpp"
#include "hxkit/rng.hpp"
#include "support/synthetic.hpp"

using namespace hxkit;

TEST_CASE("degradation pair validation") {
  fusion::DegradationPair d;
  d.R = hxtest::band_average_response(2, 4);
  d.spatial_factor = 2;
  CHECK_NOTHROW(d.validate());
  d.R(0, 0) = -0.5;
  CHECK_THROWS_AS(d.validate(), Error);
  d.R = hxtest::band_average_response(2, 4);
  d.R(1, 3) = 1.0;
  CHECK_THROWS_AS(d.validate(), Error);
  d.R = hxtest::band_average_response(2, 4);
  d.spatial_factor = 0;
  CHECK_THROWS_AS(d.validate(), Error);
}

TEST_CASE("simulate degradation basics") {
  HyperCube ref = hxtest::noise_cube(8, 8, 4, 1.0, std::vector<double>(4, 0.1), 2);
  fusion::DegradationPair id;
  id.R = Eigen::MatrixXd::Identity(4, 4);
  id.spatial_factor = 1;
  const auto same = fusion::simulate_degradation(ref, id);
  CHECK(same.hx_low.values() == ref.values());
  CHECK((same.mx_high.matrix() - ref.matrix()).cwiseAbs().maxCoeff() <= 1e-15);

  fusion::DegradationPair d;
  d.R = hxtest::band_average_response(2, 4);
  d.spatial_factor = 4;
  const auto obs = fusion::simulate_degradation(ref, d);
  CHECK(obs.hx_low.lines() == 2);
  CHECK(obs.mx_high.bands() == 2);
  for (Eigen::Index b = 0; b < 4; ++b) {
    CHECK(obs.hx_low.matrix().row(b).mean() == doctest::Approx(ref.matrix().row(b).mean()).epsilon(1e-12));
  }

  HyperCube flat = HyperCube::zeros(4, 4, 4);
  for (auto& v : flat.values()) v = 0.3;
  const auto fo = fusion::simulate_degradation(flat, d);
  for (double v : fo.hx_low.values()) CHECK(v == doctest::Approx(0.3));
  for (double v : fo.mx_high.values()) CHECK(v == doctest::Approx(0.3));
}

TEST_CASE("flat scene fuses to itself with one endmember") {
  HyperCube flat = HyperCube::zeros(8, 8, 6);
  for (std::size_t n = 0; n < flat.pixel_count(); ++n)
    for (std::size_t b = 0; b < 6; ++b) flat.pixel(n)[b] = 0.2 + 0.1 * b;
  fusion::DegradationPair d;
  d.R = hxtest::band_average_response(3, 6);
  d.spatial_factor = 2;
  const auto obs = fusion::simulate_degradation(flat, d);
  fusion::CnmfOptions opts;
  opts.p = 1;
  const HyperCube fused = fusion::cnmf_fuse(obs.hx_low, obs.mx_high, d, opts);
  CHECK(fused.lines() == 8);
  CHECK(fused.bands() == 6);
  CHECK((fused.matrix() - flat.matrix()).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("CNMF beats nearest-neighbour upsampling and its objectives are monotone") {
  const HyperCube ref = hxtest::smooth_scene(32, 12, 3);
  fusion::DegradationPair d;
  d.R = hxtest::band_average_response(4, 12);
  d.spatial_factor = 4;
  const auto obs = fusion::simulate_degradation(ref, d);
  fusion::CnmfInfo info;
  const HyperCube fused = fusion::cnmf_fuse(obs.hx_low, obs.mx_high, d, {}, &info);
  for (double v : fused.values()) CHECK(v >= 0.0);

  const double cnmf = fusion::summarize_sam(fusion::sam_error_map(fused, ref)).mean;
  const double nn =
      fusion::summarize_sam(fusion::sam_error_map(fusion::upsample_nearest(obs.hx_low, 4), ref)).mean;
  CHECK(cnmf < nn);

  for (const auto* series : {&info.hx_objective, &info.mx_objective}) {
    for (const auto& pass : *series)
      for (std::size_t i = 1; i < pass.size(); ++i) CHECK(pass[i] <= pass[i - 1] + 1e-9);
  }
  REQUIRE(info.low_res_error.size() == 3);
  CHECK(info.low_res_error.back() <= info.low_res_error.front() + 1e-12);
}

TEST_CASE("CNMF preconditions") {
  HyperCube low = HyperCube::zeros(2, 2, 4), high = HyperCube::zeros(4, 4, 2);
  for (auto& v : low.values()) v = 1.0;
  for (auto& v : high.values()) v = 1.0;
  fusion::DegradationPair d;
  d.R = hxtest::band_average_response(2, 4);
  d.spatial_factor = 2;
  fusion::CnmfOptions opts;
  opts.p = 5;
  CHECK_THROWS_AS(fusion::cnmf_fuse(low, high, d, opts), Error);
  low.values()[0] = -1.0;
  opts.p = 1;
  try {
    fusion::cnmf_fuse(low, high, d, opts);
    FAIL("expected NonPositiveInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonPositiveInput);
  }
  d.spatial_factor = 3;
  CHECK_THROWS_AS(fusion::cnmf_fuse(HyperCube::zeros(2, 2, 4), high, d, opts), Error);
}

TEST_CASE("CNMF is deterministic for a seed") {
  const HyperCube ref = hxtest::smooth_scene(16, 8, 4);
  fusion::DegradationPair d;
  d.R = hxtest::band_average_response(2, 8);
  d.spatial_factor = 2;
  const auto obs = fusion::simulate_degradation(ref, d);
  fusion::CnmfOptions opts;
  opts.inner_iters = 20;
  CHECK(fusion::cnmf_fuse(obs.hx_low, obs.mx_high, d, opts).values() ==
        fusion::cnmf_fuse(obs.hx_low, obs.mx_high, d, opts).values());
}

TEST_CASE("SAM error map") {
  HyperCube a = hxtest::noise_cube(3, 3, 4, 1.0, std::vector<double>(4, 0.2), 5);
  HyperCube b = a;
  for (auto& v : b.values()) v *= 2.0;
  const HyperCube same = fusion::sam_error_map(a, a), scaled = fusion::sam_error_map(b, a);
  for (double v : same.values()) CHECK(v == doctest::Approx(0.0));
  for (double v : scaled.values()) CHECK(v == doctest::Approx(0.0));

  HyperCube e = HyperCube::zeros(1, 1, 2), f = HyperCube::zeros(1, 1, 2);
  e.values() = {1.0, 0.0};
  f.values() = {0.0, 3.0};
  const HyperCube m = fusion::sam_error_map(e, f);
  CHECK(m.values()[0] == doctest::Approx(std::numbers::pi / 2));
  CHECK(m.header().band_names);

  HyperCube z = e;
  z.values() = {0.0, 0.0};
  const HyperCube zm = fusion::sam_error_map(z, f);
  REQUIRE(zm.nodata());
  CHECK(zm.values()[0] == *zm.nodata());
  CHECK(fusion::summarize_sam(zm).count == 0);
}

TEST_CASE("nearest upsampling replicates blocks") {
  HyperCube c = HyperCube::zeros(1, 2, 1);
  c.values() = {1.0, 2.0};
  const HyperCube u = fusion::upsample_nearest(c, 3);
  CHECK(u.lines() == 3);
  CHECK(u.samples() == 6);
  CHECK(u.at(2, 2, 0) == 1.0);
  CHECK(u.at(0, 3, 0) == 2.0);
}
