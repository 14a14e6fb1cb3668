#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "pnact/config.hpp"
#include "pnact/policy.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int run_shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

int run_cli(const std::string& args, const std::string& tag) {
  return run_shell(std::string(PNACT_BIN) + " " + args + " > cli_" + tag +
                   ".out 2> cli_" + tag + ".err");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return json::parse(in);
}

struct WorkDir {
  std::string path;
  explicit WorkDir(std::string p) : path(std::move(p)) {
    fs::remove_all(path);
  }
  ~WorkDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("no arguments is a config error with a JSON diagnosis") {
  const int rc = run_cli("", "noargs");
  CHECK(rc == 2);
  const std::string err = slurp("cli_noargs.err");
  CHECK(err.find("\"stage\":\"config\"") != std::string::npos);
}

TEST_CASE("help exits cleanly") {
  const int rc = run_cli("--help", "help");
  CHECK(rc == 0);
  const std::string out = slurp("cli_help.out");
  CHECK(out.find("train-pnact") != std::string::npos);
  CHECK(out.find("oracle") != std::string::npos);
}

TEST_CASE("oracle report carries exact values and a checked manifest") {
  unsetenv("PNACT_SEED");
  unsetenv("PNACT_OUTPUT_DIR");
  WorkDir dir("cli_oracle_dir");
  const int rc =
      run_cli("oracle --map corridor3 --output-dir " + dir.path + " --seed 3",
              "oracle");
  REQUIRE(rc == 0);

  const json report = load_json(dir.path + "/oracle_report.json");
  CHECK(report.at("states") == 9);
  CHECK(report.at("actions") == 4);
  CHECK(report.at("kappa").get<double>() == doctest::Approx(0.5));
  CHECK(report.at("safe").at("reward_value").get<double>() ==
        doctest::Approx(5.084).epsilon(1e-9));
  CHECK(report.at("safe").at("cost_value").get<double>() ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(report.at("unsafe").at("reward_value").get<double>() ==
        doctest::Approx(6.4).epsilon(1e-9));
  CHECK(report.at("unsafe").at("cost_value").get<double>() ==
        doctest::Approx(0.9).epsilon(1e-9));
  CHECK(report.at("unconstrained_max_is_safe") == false);
  CHECK(report.at("backdoor_actions").size() == 18);
  CHECK(report.at("certificate").at("I_E") == 1);
  CHECK(report.at("certificate").at("I_S") == 1);

  const json manifest = load_json(dir.path + "/manifest.json");
  CHECK(manifest.at("seed") == 3);
  const std::string recorded =
      manifest.at("artifacts").at("oracle_report.json");
  CHECK(recorded ==
        pnact::hex64(pnact::file_checksum(dir.path + "/oracle_report.json")));

  // The report on stdout matches the file.
  const json stdout_report = json::parse(slurp("cli_oracle.out"));
  CHECK(stdout_report == report);
}

TEST_CASE("unknown grid map is rejected at parse time") {
  const int rc = run_cli("oracle --map mars", "badmap");
  CHECK(rc == 2);
}

TEST_CASE("distill-then-evaluate pipeline round-trips artifacts") {
  unsetenv("PNACT_SEED");
  unsetenv("PNACT_OUTPUT_DIR");
  WorkDir dir("cli_pipe_dir");
  const int rc_train = run_cli(
      "train-pnact --experts oracle --map corridor3 --n 3 --total-steps 1024 "
      "--output-dir " + dir.path + " --seed 5",
      "pipe_train");
  REQUIRE(rc_train == 0);

  CHECK_NOTHROW(
      pnact::StochasticPolicy::load(dir.path + "/pnact_policy.json"));
  const std::string curve = slurp(dir.path + "/pnact_curve.csv");
  CHECK(curve.rfind("batch,env_steps,action_loss,", 0) == 0);
  const json train_summary = load_json(dir.path + "/pnact_summary.json");
  CHECK(train_summary.at("n") == 3);
  CHECK(train_summary.at("selected_batch").get<int>() >= 0);
  CHECK(train_summary.at("experts").at("experts") == "oracle");

  const int rc_eval = run_cli(
      "eval --map corridor3 --episodes 6 --n 3 --output-dir " + dir.path +
          " --seed 5",
      "pipe_eval");
  REQUIRE(rc_eval == 0);
  const json eval_summary = load_json(dir.path + "/eval_summary.json");
  CHECK(eval_summary.at("episodes") == 6);
  CHECK(eval_summary.at("normal").at("episodes") == 4);
  CHECK(eval_summary.at("backdoor").at("episodes") == 2);
  CHECK(eval_summary.at("indicators").contains("I_E"));

  CHECK(slurp(dir.path + "/eval_costs.svg").rfind("<svg xmlns=", 0) == 0);
  CHECK(slurp(dir.path + "/eval_episodes.csv")
            .rfind("episode,triggered,reward,cost,steps\n", 0) == 0);
  CHECK(slurp(dir.path + "/eval_trajectory.csv")
            .rfind("t,psi,action,r,c,is_backdoor\n", 0) == 0);

  const json manifest = load_json(dir.path + "/manifest.json");
  const std::string recorded =
      manifest.at("artifacts").at("eval_summary.json");
  CHECK(recorded ==
        pnact::hex64(pnact::file_checksum(dir.path + "/eval_summary.json")));
}

TEST_CASE("demo certifies the exact construction") {
  unsetenv("PNACT_SEED");
  unsetenv("PNACT_OUTPUT_DIR");
  WorkDir dir("cli_demo_dir");
  const int rc = run_cli(
      "demo --map corridor3 --total-steps 512 --output-dir " + dir.path +
          " --seed 7",
      "demo");
  REQUIRE(rc == 0);
  const json summary = load_json(dir.path + "/demo_summary.json");
  CHECK(summary.at("oracle_certificate").at("I_E") == 1);
  CHECK(summary.at("oracle_certificate").at("I_S") == 1);
  CHECK(summary.at("empirical").at("normal").at("episodes") == 40);
  CHECK(summary.at("empirical").at("backdoor").at("episodes") == 10);

  const json cert = load_json(dir.path + "/certificate_report.json");
  CHECK(cert.at("oracle_policy").at("I_E") == 1);
  CHECK(cert.at("oracle_policy").at("I_S") == 1);
  CHECK(cert.at("distilled_policy").contains("I_E"));
  CHECK(cert.at("distilled_policy").at("start_values").contains("v_c_triggered"));
}

TEST_CASE("seed precedence: flag beats environment beats default") {
  WorkDir dir("cli_seed_dir");
  const int rc_env = run_shell(
      "PNACT_SEED=9 " PNACT_BIN " oracle --map corridor3 --output-dir " +
      dir.path + " > cli_seed_env.out 2> cli_seed_env.err");
  REQUIRE(rc_env == 0);
  CHECK(load_json(dir.path + "/manifest.json").at("seed") == 9);

  fs::remove_all(dir.path);
  const int rc_flag = run_shell(
      "PNACT_SEED=9 " PNACT_BIN " oracle --map corridor3 --seed 4 "
      "--output-dir " + dir.path +
      " > cli_seed_flag.out 2> cli_seed_flag.err");
  REQUIRE(rc_flag == 0);
  CHECK(load_json(dir.path + "/manifest.json").at("seed") == 4);
}

TEST_CASE("config files with unknown keys fail before any work") {
  WorkDir dir("cli_badcfg_dir");
  fs::create_directories(dir.path);
  {
    std::ofstream out(dir.path + "/bad.json");
    out << R"({"bogus": 1})";
  }
  const int rc = run_cli(
      "oracle --map corridor3 --config " + dir.path + "/bad.json "
      "--output-dir " + dir.path,
      "badcfg");
  CHECK(rc == 2);
  const std::string err = slurp("cli_badcfg.err");
  CHECK(err.find("config.bogus") != std::string::npos);
}

TEST_CASE("safe base training rejects the unconstrained learner") {
  WorkDir dir("cli_safealgo_dir");
  const int rc = run_cli(
      "train-base --kind safe --algo ppo --map corridor3 --output-dir " +
          dir.path,
      "safealgo");
  CHECK(rc == 2);
  const std::string err = slurp("cli_safealgo.err");
  CHECK(err.find("\"stage\":\"config\"") != std::string::npos);
}

TEST_CASE("evaluating a missing checkpoint is an evaluation failure") {
  WorkDir dir("cli_nopolicy_dir");
  const int rc = run_cli(
      "eval --map corridor3 --policy nowhere_zzz.json --output-dir " +
          dir.path,
      "nopolicy");
  CHECK(rc == 4);
  const std::string err = slurp("cli_nopolicy.err");
  CHECK(err.find("\"stage\":\"evaluation\"") != std::string::npos);
}

TEST_CASE("neural distillation without base checkpoints is a training failure") {
  WorkDir dir("cli_neural_dir");
  const int rc = run_cli(
      "train-pnact --experts neural --map corridor3 --output-dir " + dir.path,
      "neural");
  CHECK(rc == 3);
  const std::string err = slurp("cli_neural.err");
  CHECK(err.find("\"stage\":\"training\"") != std::string::npos);
}

}  // TEST_SUITE
