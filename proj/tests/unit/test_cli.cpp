#include <doctest.h>

#include <filesystem>
#include <nlohmann/json.hpp>
#include <sstream>

#include "hxkit/cli.hpp"
#include "hxkit/envi_io.hpp"
#include "hxkit/pipeline.hpp"
#include "hxkit/report.hpp"
#include "support/synthetic.hpp"

using namespace hxkit;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run hx(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "hxkit_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_mixture(const fs::path& dir) {
  auto mix = hxtest::linear_mixture(20, 20, 30, 3, 40.0, 5);
  mix.cube.header().wavelengths = hxtest::linear_wavelengths(30);
  const fs::path hdr = dir / "scene.hdr";
  envi::save_cube(hdr, mix.cube);
  return hdr;
}

std::string slurp(const fs::path& p) { return envi::read_file_text(p); }

}  // namespace

TEST_CASE("info echoes the header") {
  const fs::path dir = scratch("info");
  const fs::path hdr = write_mixture(dir);
  const Run r = hx({"info", hdr.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("samples: 20") != std::string::npos);
  CHECK(r.out.find("lines: 20") != std::string::npos);
  CHECK(r.out.find("bands: 30") != std::string::npos);
  CHECK(r.out.find("interleave: bsq") != std::string::npos);
  CHECK(r.out.find("wavelengths: 400 - 2500 nm") != std::string::npos);
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("codes");
  const fs::path hdr = write_mixture(dir);
  const Run unknown = hx({"frobnicate"});
  CHECK(unknown.code == 1);
  CHECK(unknown.err.find("Usage") != std::string::npos);
  CHECK(hx({}).code == 1);
  CHECK(hx({"unmix", "extract", hdr.string()}).code == 1);  // --out missing
  CHECK(hx({"unmix", "extract", hdr.string(), "--p", "x", "--out", (dir / "e.csv").string()}).code == 1);
  CHECK(hx({"unmix", "extract", hdr.string(), "--algo", "magic", "--out", (dir / "e.csv").string()}).code == 1);
  CHECK(hx({"info", (dir / "missing.hdr").string()}).code == 2);
  CHECK(hx({"scale", hdr.string(), "--factor", "0", "--out", (dir / "z.hdr").string()}).code == 2);
  CHECK(hx({"--help"}).code == 0);
}

TEST_CASE("seeded extraction is byte-identical across runs and thread counts") {
  const fs::path dir = scratch("determinism");
  const fs::path hdr = write_mixture(dir);
  const fs::path lib = dir / "e.csv";
  auto extract = [&](const std::string& threads) {
    const Run r = hx({"--threads", threads, "unmix", "extract", hdr.string(), "--algo", "vca", "--p", "3",
                      "--seed", "7", "--out", lib.string(), "--report", (dir / "r").string()});
    REQUIRE(r.code == 0);
    return slurp(lib) + slurp(dir / "r.json");
  };
  const std::string a = extract("1"), b = extract("1"), c = extract("3");
  CHECK(a == b);
  CHECK(a == c);

  auto abundance = [&](const std::string& threads) {
    const fs::path out = dir / ("a_" + threads + ".hdr");
    REQUIRE(hx({"--threads", threads, "unmix", "abundance", hdr.string(), "--endmembers", lib.string(), "--out",
                out.string()})
                .code == 0);
    return envi::read_file_bytes(envi::infer_data_path(out));
  };
  CHECK(abundance("1") == abundance("4"));
}

TEST_CASE("reports log the seed and input digests") {
  const fs::path dir = scratch("report");
  const fs::path hdr = write_mixture(dir);
  REQUIRE(hx({"--seed", "11", "unmix", "extract", hdr.string(), "--algo", "atgp", "--p", "3", "--out",
              (dir / "e.csv").string(), "--report", (dir / "rep").string()})
              .code == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "rep.json"));
  CHECK(j["parameters"]["seed"] == 11);
  CHECK(j["inputs"][hdr.string()] == report::sha256_file(hdr));
  CHECK(j["inputs"].size() == 2);
  CHECK(fs::exists(dir / "rep.html"));
  CHECK(j.contains("timestamp") == false);
}

TEST_CASE("subcommands leave inputs untouched") {
  const fs::path dir = scratch("immutable");
  const fs::path hdr = write_mixture(dir);
  const std::string before = report::sha256_file(hdr) + report::sha256_file(envi::infer_data_path(hdr));
  REQUIRE(hx({"preprocess", "sg", hdr.string(), "--out", (dir / "sg.hdr").string()}).code == 0);
  REQUIRE(hx({"quality", "noise", hdr.string(), "--out", (dir / "n.csv").string()}).code == 0);
  CHECK(before == report::sha256_file(hdr) + report::sha256_file(envi::infer_data_path(hdr)));
}

TEST_CASE("pipeline config parsing") {
  const auto cfg = pipeline::parse(R"(
seed = 9
threads = 2
report_dir = "reports"

[[step]]
op = "preprocess.sg"
in = "scene.hdr"
out = "/abs/sg.hdr"
window = 5

[[step]]
op = "unmix.extract"
in = "sg.hdr"
p = 3
out = "e.csv"
)",
                                   "/base");
  CHECK(cfg.seed == 9);
  CHECK(cfg.threads == std::size_t{2});
  CHECK(*cfg.report_dir == fs::path("/base/reports"));
  REQUIRE(cfg.steps.size() == 2);
  CHECK(cfg.steps[0].params.text("in") == "/base/scene.hdr");
  CHECK(cfg.steps[0].params.text("out") == "/abs/sg.hdr");
  CHECK(cfg.steps[0].params.integer("window") == 5);
  CHECK(cfg.steps[0].params.integer("order") == 2);
  CHECK(cfg.steps[1].params.text("algo") == "vca");

  auto rejects = [](const char* text) {
    CHECK_THROWS_AS(pipeline::parse(text), ops::UsageError);
  };
  rejects("[[step]]\nop = \"nope\"\n");
  rejects("[[step]]\nin = \"a.hdr\"\n");
  rejects("[[step]]\nop = \"info\"\nin = \"a.hdr\"\ncolour = 3\n");
  rejects("[[step]]\nop = \"preprocess.sg\"\nin = \"a.hdr\"\nout = \"b.hdr\"\nwindow = \"five\"\n");
  rejects("[[step]]\nop = \"scale\"\nin = \"a.hdr\"\nout = \"b.hdr\"\n");
  rejects("[[step]]\nop = \"unmix.extract\"\nin = \"a.hdr\"\nout = \"e.csv\"\nalgo = \"magic\"\n");
  rejects("seed = -1\n[[step]]\nop = \"info\"\nin = \"a.hdr\"\n");
  rejects("mystery = 1\n[[step]]\nop = \"info\"\nin = \"a.hdr\"\n");
  rejects("seed = 1\n");
  rejects("[[step]\n");
}

TEST_CASE("pipeline validates every step before running any") {
  const fs::path dir = scratch("pipeline_invalid");
  write_mixture(dir);
  envi::write_file_text(dir / "run.toml",
                        "[[step]]\nop = \"scale\"\nin = \"scene.hdr\"\nout = \"s.hdr\"\nfactor = 2.0\n"
                        "[[step]]\nop = \"scale\"\nin = \"s.hdr\"\nout = \"t.hdr\"\nfactr = 2.0\n");
  const Run r = hx({"pipeline", "run", (dir / "run.toml").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("step 2") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "s.hdr"));
}

TEST_CASE("pipeline runs relative to its config and reproduces outputs") {
  const fs::path dir = scratch("pipeline_run");
  write_mixture(dir);
  const std::string config = R"(seed = 3
report_dir = "reports"

[[step]]
op = "preprocess.sg"
in = "scene.hdr"
out = "out/sg.hdr"

[[step]]
op = "unmix.extract"
in = "out/sg.hdr"
algo = "nfindr"
p = 3
out = "out/em.csv"

[[step]]
op = "unmix.abundance"
in = "out/sg.hdr"
endmembers = "out/em.csv"
out = "out/abund.hdr"

[[step]]
op = "unmix.count"
in = "scene.hdr"
)";
  envi::write_file_text(dir / "run.toml", config);
  const fs::path elsewhere = scratch("pipeline_cwd");
  const fs::path cwd = fs::current_path();
  fs::current_path(elsewhere);
  const Run first = hx({"pipeline", "run", (dir / "run.toml").string()});
  fs::current_path(cwd);
  REQUIRE(first.code == 0);
  CHECK(first.err.find("[4/4] unmix.count") != std::string::npos);
  for (const char* f : {"out/sg.hdr", "out/em.csv", "out/abund.hdr", "reports/unmix_extract.json",
                        "reports/unmix_count.json"})
    CHECK(fs::exists(dir / f));
  const auto rep = nlohmann::json::parse(slurp(dir / "reports/unmix_extract.json"));
  CHECK(rep["parameters"]["seed"] == 3);

  auto digests = [&] {
    std::string d;
    for (const char* f : {"out/sg.img", "out/em.csv", "out/abund.img", "reports/unmix_extract.json",
                          "reports/unmix_count.json", "reports/unmix_abundance.json"})
      d += report::sha256_file(dir / f);
    return d;
  };
  const std::string once = digests();
  REQUIRE(hx({"--threads", "2", "pipeline", "run", (dir / "run.toml").string()}).code == 0);
  CHECK(digests() == once);
}
