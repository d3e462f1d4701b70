#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "edanni/experiment.hpp"
#include "edanni/telemetry.hpp"

using namespace edanni;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const auto dir = fs::temp_directory_path() / "edanni_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::string write_spec(const char* name, const std::string& body) {
  const auto path = scratch_dir() / name;
  std::ofstream os(path, std::ios::trunc);
  os << body;
  return path.string();
}

std::string file_bytes(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
}

const char* kQuadSpec = R"({
  "name": "tiny-quad",
  "output_dir": "OUTDIR",
  "problem": {"type": "quad", "m": 2, "p": 4, "sigma2": 1.0, "seed": 5},
  "runs": [
    {
      "name": "edanni-sync",
      "algorithm": "edanni",
      "rho": 1.0,
      "tau": 0,
      "max_rounds": 400,
      "target_pg_norm": 1e-8,
      "seed": 1,
      "arrival": {"kind": "synchronous"}
    }
  ]
})";

std::string quad_spec_with_dir(const fs::path& dir) {
  std::string body = kQuadSpec;
  const std::string marker = "OUTDIR";
  body.replace(body.find(marker), marker.size(), dir.generic_string());
  return body;
}

}  // namespace

TEST_CASE("experiment parsing surfaces field-level problems") {
  // missing seed
  CHECK_THROWS_WITH_AS(
      parse_experiment(R"({"name":"x","problem":{"type":"quad","m":1,"p":2,
        "sigma2":1.0}})"),
      doctest::Contains("seed"), InvalidSpecError);

  // invalid sparsity names the violated constraint
  try {
    parse_experiment(R"({"name":"x","problem":{"type":"lasso","m":1,"n":2,
      "p":3,"s":9,"theta":0.1,"seed":1}})");
    FAIL("expected InvalidSpecError");
  } catch (const InvalidSpecError& e) {
    CHECK(std::string(e.what()).find("s <= p") != std::string::npos);
  }

  // duplicate run names are rejected
  CHECK_THROWS_AS(
      parse_experiment(R"({"name":"x",
        "problem":{"type":"quad","m":1,"p":2,"sigma2":1.0,"seed":1},
        "runs":[
          {"name":"a","algorithm":"edanni","rho":1.0,"max_rounds":5,
           "target_pg_norm":1e-6,"seed":1,"arrival":{"kind":"synchronous"}},
          {"name":"a","algorithm":"ps","rho":1.0,"max_rounds":5,
           "target_pg_norm":1e-6,"seed":2,"arrival":{"kind":"synchronous"}}
        ]})"),
      InvalidSpecError);

  // bernoulli arrivals demand an explicit seed
  CHECK_THROWS_WITH_AS(
      parse_experiment(R"({"name":"x",
        "problem":{"type":"quad","m":2,"p":2,"sigma2":1.0,"seed":1},
        "runs":[{"name":"a","algorithm":"edanni","rho":1.0,"tau":2,
          "max_rounds":5,"target_pg_norm":1e-6,"seed":1,
          "arrival":{"kind":"bernoulli","probs":[0.5,0.5]}}]})"),
      doctest::Contains("seed"), InvalidSpecError);
}

TEST_CASE("generate is idempotent and bad specs exit 2") {
  const auto out = scratch_dir() / "gen";
  fs::remove_all(out);
  const auto spec_path =
      write_spec("gen.json", quad_spec_with_dir(out));

  CHECK(cmd_generate(spec_path, {}) == 0);
  const auto dataset = out / "tiny-quad.dataset";
  REQUIRE(fs::exists(dataset));
  REQUIRE(fs::exists(out / "tiny-quad.dataset.json"));
  const std::string first = file_bytes(dataset);
  CHECK(cmd_generate(spec_path, {}) == 0);
  CHECK(file_bytes(dataset) == first);

  const auto bad = write_spec("bad.json", R"({"name":"x","problem":{
    "type":"lasso","m":1,"n":2,"p":3,"s":9,"theta":0.1,"seed":1}})");
  CHECK(cmd_generate(bad, {}) == 2);
  CHECK(cmd_run(bad, {}) == 2);
  CHECK(cmd_validate(bad, {}) == 2);
  CHECK(cmd_generate(write_spec("nojson.json", "not json"), {}) == 2);
}

TEST_CASE("run emits csv, events and manifest") {
  const auto out = scratch_dir() / "run";
  fs::remove_all(out);
  const auto spec_path = write_spec("run.json", quad_spec_with_dir(out));

  CHECK(cmd_run(spec_path, {}) == 0);
  const auto csv = out / "edanni-sync.csv";
  REQUIRE(fs::exists(csv));
  const auto records = read_csv(csv.string());
  CHECK(!records.empty());
  CHECK(records.front().ledger.uploads == 1);  // one worker, round one
  REQUIRE(fs::exists(out / "edanni-sync.manifest.json"));
  REQUIRE(fs::exists(out / "edanni-sync.events"));

  // overrides cap the rounds
  CliOverrides overrides;
  overrides.max_rounds = 3;
  overrides.output_dir = (out / "short").string();
  CHECK(cmd_run(spec_path, overrides) == 0);
  CHECK(read_csv((out / "short" / "edanni-sync.csv").string()).size() <= 3);
}

TEST_CASE("runs replay identically from a persisted dataset") {
  const auto out = scratch_dir() / "replay";
  fs::remove_all(out);
  const auto spec_path = write_spec("replay.json", quad_spec_with_dir(out));

  // first run generates in memory
  CHECK(cmd_run(spec_path, {}) == 0);
  const std::string fresh = file_bytes(out / "edanni-sync.csv");

  // generating the container and rerunning must reproduce the same bytes
  CHECK(cmd_generate(spec_path, {}) == 0);
  REQUIRE(fs::exists(out / "tiny-quad.dataset"));
  CHECK(cmd_run(spec_path, {}) == 0);
  CHECK(file_bytes(out / "edanni-sync.csv") == fresh);
}

TEST_CASE("headline-scale lasso dataset generates quickly") {
  const auto out = scratch_dir() / "full_scale";
  fs::remove_all(out);
  const auto spec_path = write_spec("full_scale.json", R"({
    "name": "fullscale-lasso",
    "output_dir": ")" + out.generic_string() + R"(",
    "problem": {"type": "lasso", "m": 20, "n": 500, "p": 1000, "s": 10,
                "theta": 0.01, "noise_std": 0.1, "seed": 404}
  })");
  const auto start = std::chrono::steady_clock::now();
  CHECK(cmd_generate(spec_path, {}) == 0);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  CHECK(elapsed < 60.0);
  CHECK(fs::file_size(out / "fullscale-lasso.dataset") >
        std::uintmax_t(20) * 500 * 1000 * 8);
  fs::remove_all(out);  // ~80 MB, do not leave it behind
}

TEST_CASE("lasso comparison through the cli layer") {
  const auto out = scratch_dir() / "lasso_pair";
  fs::remove_all(out);
  // rho for the curvature-corrected run: 0.25 * max worker Lipschitz bound,
  // precomputed for this seed
  LassoGenSpec gspec;
  gspec.m = 4;
  gspec.n = 50;
  gspec.p = 40;
  gspec.s = 4;
  gspec.theta = 0.01;
  gspec.noise_std = 0.1;
  gspec.seed = 881;
  const double rho =
      0.25 * make_losses(generate_lasso_dataset(gspec)).max_lipschitz();
  const auto spec_path = write_spec("lasso_pair.json", R"({
    "name": "lasso-pair",
    "output_dir": ")" + out.generic_string() + R"(",
    "problem": {"type": "lasso", "m": 4, "n": 50, "p": 40, "s": 4,
                "theta": 0.01, "noise_std": 0.1, "seed": 881},
    "runs": [
      {"name": "edanni", "algorithm": "edanni", "rho": )" +
                                         std::to_string(rho) + R"(,
       "tau": 0, "max_rounds": 20000, "target_pg_norm": 1e-7, "seed": 1,
       "arrival": {"kind": "synchronous"}},
      {"name": "ps", "algorithm": "ps", "rho": 0.0,
       "tau": 0, "max_rounds": 60000, "target_pg_norm": 1e-7, "seed": 2,
       "arrival": {"kind": "synchronous"}}
    ]
  })");
  CHECK(cmd_run(spec_path, {}) == 0);

  auto rounds_of = [&](const char* name) {
    std::ifstream is(out / (std::string(name) + ".manifest.json"));
    REQUIRE(is.good());
    nlohmann::json manifest;
    is >> manifest;
    REQUIRE(manifest.at("converged").get<bool>());
    return manifest.at("rounds").get<long>();
  };
  const long edanni_rounds = rounds_of("edanni");
  const long ps_rounds = rounds_of("ps");
  CHECK(ps_rounds > edanni_rounds);
}

TEST_CASE("failed runs exit 1 but the rest still execute") {
  const auto out = scratch_dir() / "fail";
  fs::remove_all(out);
  // the first run's rho is too small for a nonconvex master loss; the
  // second is healthy and must still produce its outputs
  const auto spec_path = write_spec("fail.json", R"({
    "name": "spca-bad-rho",
    "output_dir": ")" + out.generic_string() + R"(",
    "problem": {"type": "spca", "m": 2, "n": 3, "p": 8, "q": 10, "nnz": 16,
                "theta": 0.1, "seed": 31},
    "runs": [
      {"name": "bad", "algorithm": "edanni", "rho": 0.0, "tau": 0,
       "max_rounds": 50, "target_pg_norm": 1e-6, "seed": 1,
       "arrival": {"kind": "synchronous"},
       "x0": {"mode": "random_unit", "scale": 0.5, "seed": 3}},
      {"name": "good", "algorithm": "ps", "rho": 0.0, "tau": 0,
       "max_rounds": 50, "target_pg_norm": 1e-6, "seed": 2,
       "arrival": {"kind": "synchronous"},
       "x0": {"mode": "random_unit", "scale": 0.5, "seed": 3}}
    ]
  })");
  CHECK(cmd_run(spec_path, {}) == 1);
  CHECK_FALSE(fs::exists(out / "bad.csv"));
  CHECK(fs::exists(out / "good.csv"));
}

TEST_CASE("validate reports and always exits 0") {
  const auto out = scratch_dir() / "val";
  fs::remove_all(out);
  const auto spec_path = write_spec("val.json", quad_spec_with_dir(out));
  CHECK(cmd_validate(spec_path, {}) == 0);
}
