#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "pnact/config.hpp"

using namespace pnact;
using nlohmann::json;

namespace {

void expect_message(const std::function<void()>& fn, const std::string& needle) {
  try {
    fn();
    FAIL("expected std::invalid_argument containing '", needle, "'");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find(needle) != std::string::npos);
  }
}

std::string write_temp(const std::string& name, const std::string& body) {
  std::ofstream out(name);
  REQUIRE(out.good());
  out << body;
  return name;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults survive an empty document") {
  const RunConfig cfg = RunConfig::from_json(json::object());
  CHECK(cfg.env == "gridgoal");
  CHECK(cfg.seed == 1);
  CHECK(cfg.output_dir == "out");
  CHECK(cfg.ppo.algo == "ppo_lag");
  CHECK(cfg.pnact.n == 5);
  CHECK(cfg.eval.episodes == 50);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("unknown keys fail loudly at any depth") {
  expect_message([] { RunConfig::from_json(json{{"bogus", 1}}); },
                 "unknown key 'config.bogus'");
  expect_message(
      [] { RunConfig::from_json(json{{"ppo", {{"bogus", 1}}}}); },
      "unknown key 'ppo.bogus'");
  expect_message(
      [] { RunConfig::from_json(json{{"pnact", {{"margin_typo", 1}}}}); },
      "pnact.margin_typo");
}

TEST_CASE("ill-typed values name the offending key") {
  expect_message([] { RunConfig::from_json(json{{"seed", "abc"}}); },
                 "bad value for 'config.seed'");
  expect_message(
      [] { RunConfig::from_json(json{{"ppo", {{"lr", "fast"}}}}); },
      "bad value for 'ppo.lr'");
}

TEST_CASE("canonical dump round-trips") {
  json doc;
  doc["env"] = "gridgoal";
  doc["seed"] = 42;
  doc["ppo"] = {{"algo", "rcpo"}, {"total_steps", 2000}};
  doc["pnact"] = {{"n", 7}, {"lambda", 0.9}};
  const RunConfig cfg = RunConfig::from_json(doc);
  CHECK(cfg.seed == 42);
  CHECK(cfg.ppo.algo == "rcpo");
  CHECK(cfg.ppo.total_steps == 2000);
  CHECK(cfg.ppo.lr == doctest::Approx(3e-4));  // untouched default
  CHECK(cfg.pnact.n == 7);
  CHECK(cfg.pnact.lambda == doctest::Approx(0.9));

  const RunConfig again = RunConfig::from_json(cfg.to_json());
  CHECK(again.to_json() == cfg.to_json());
  CHECK(config_hash(again.to_json()) == config_hash(cfg.to_json()));
}

TEST_CASE("loading reports missing files and broken JSON") {
  expect_message([] { RunConfig::load("no_such_config_zzz.json"); },
                 "cannot open");
  const std::string path = write_temp("config_broken_test.json", "{not json");
  try {
    expect_message([&] { RunConfig::load(path); }, "not valid JSON");
  } catch (...) {
    std::remove(path.c_str());
    throw;
  }
  std::remove(path.c_str());

  const std::string good =
      write_temp("config_good_test.json", R"({"seed": 123})");
  const RunConfig cfg = RunConfig::load(good);
  std::remove(good.c_str());
  CHECK(cfg.seed == 123);
}

TEST_CASE("validation rejects bad top-level settings") {
  RunConfig cfg;
  cfg.env = "lunar";
  expect_message([&] { cfg.validate(); }, "unknown env 'lunar'");
  cfg.env = "pointlite";
  cfg.output_dir = "";
  expect_message([&] { cfg.validate(); }, "output_dir");
  cfg.output_dir = "out";
  cfg.ppo.algo = "sac";
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("ab") != fnv1a64("ba"));
  CHECK(hex64(255) == "00000000000000ff");
  CHECK(hex64(0xcbf29ce484222325ULL) == "cbf29ce484222325");
}

TEST_CASE("config hash ignores key insertion order") {
  json a;
  a["x"] = 1;
  a["y"] = 2;
  json b;
  b["y"] = 2;
  b["x"] = 1;
  CHECK(config_hash(a) == config_hash(b));
  json c;
  c["x"] = 1;
  c["y"] = 3;
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("file checksum hashes the raw bytes") {
  const std::string body = "hello\nchecksum\n";
  const std::string path = write_temp("config_checksum_test.txt", body);
  CHECK(file_checksum(path) == fnv1a64(body));
  std::remove(path.c_str());
  CHECK_THROWS_AS(file_checksum("no_such_file_zzz.bin"), std::invalid_argument);
}

TEST_CASE("environment overrides") {
  unsetenv("PNACT_SEED");
  unsetenv("PNACT_OUTPUT_DIR");
  EnvOverrides none = read_env_overrides();
  CHECK(!none.seed.has_value());
  CHECK(!none.output_dir.has_value());

  setenv("PNACT_SEED", "123", 1);
  setenv("PNACT_OUTPUT_DIR", "elsewhere", 1);
  EnvOverrides both = read_env_overrides();
  REQUIRE(both.seed.has_value());
  CHECK(*both.seed == 123);
  REQUIRE(both.output_dir.has_value());
  CHECK(*both.output_dir == "elsewhere");

  setenv("PNACT_SEED", "12x", 1);
  expect_message([] { read_env_overrides(); }, "PNACT_SEED");
  setenv("PNACT_SEED", "123", 1);
  setenv("PNACT_OUTPUT_DIR", "", 1);
  expect_message([] { read_env_overrides(); }, "PNACT_OUTPUT_DIR");

  unsetenv("PNACT_SEED");
  unsetenv("PNACT_OUTPUT_DIR");
}

TEST_CASE("manifests record hash, seed and artifact checksums") {
  const std::string dir = ".";
  std::map<std::string, std::string> artifacts;
  artifacts["policy.json"] = "0011223344556677";
  artifacts["curve.csv"] = "8899aabbccddeeff";
  const json cfg = RunConfig().to_json();
  write_manifest(dir, cfg, 77, artifacts);

  std::ifstream in("manifest.json");
  REQUIRE(in.good());
  const json j = json::parse(in);
  in.close();
  std::remove("manifest.json");

  CHECK(j.at("config_hash") == hex64(config_hash(cfg)));
  CHECK(j.at("seed") == 77);
  CHECK(j.at("artifacts").at("policy.json") == "0011223344556677");
  CHECK(j.at("artifacts").size() == 2);

  CHECK_THROWS_AS(
      write_manifest("/nonexistent_dir_zzz", cfg, 1, artifacts),
      std::invalid_argument);
}

}  // TEST_SUITE
