#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pnact/env.hpp"
#include "pnact/trainer.hpp"

using namespace pnact;

namespace {

// Two-action environment that charges cost 1 on every step, so no policy can
// satisfy a sub-unit budget. Used to exercise the infeasibility path.
class AlwaysCostlyEnv : public Env {
 public:
  Observation reset(EpisodeMode mode, std::uint64_t) override {
    steps_ = 0;
    done_ = false;
    mode_ = mode;
    return observe();
  }

  StepResult step(const Action& action) override {
    if (done_) throw std::logic_error("step on a finished episode");
    if (action.discrete < 0 || action.discrete >= 2)
      throw std::invalid_argument("bad action");
    ++steps_;
    done_ = steps_ >= max_steps();
    return {observe(), 0.1, 1.0, done_};
  }

  Observation set_vase_mode(EpisodeMode mode) override {
    mode_ = mode;
    return observe();
  }

  ActionSpace action_space() const override {
    return ActionSpace::discrete_space(2);
  }
  int observation_dim() const override { return 2; }
  int max_steps() const override { return 5; }
  double gamma() const override { return 0.9; }
  double kappa() const override { return 0.1; }
  const Trigger& trigger() const override { return trigger_; }
  std::string name() const override { return "always_costly"; }

 private:
  Observation observe() const {
    Observation obs;
    obs.task_features = {static_cast<double>(steps_) / max_steps(), 1.0};
    obs.is_backdoor_flag = mode_ == EpisodeMode::backdoor;
    return obs;
  }

  Trigger trigger_;
  EpisodeMode mode_ = EpisodeMode::normal;
  int steps_ = 0;
  bool done_ = true;
};

PpoConfig tiny_config(const std::string& algo) {
  PpoConfig cfg;
  cfg.algo = algo;
  cfg.total_steps = 1024;
  cfg.batch_steps = 256;
  cfg.minibatch = 64;
  cfg.epochs = 2;
  cfg.hidden = {16};
  cfg.eval_every = 2;
  cfg.eval_episodes = 2;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("config validation catches bad settings") {
  PpoConfig cfg;
  SUBCASE("unknown algorithm") {
    cfg.algo = "sac";
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("clip ratio out of range") {
    cfg.clip_ratio = 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("gae lambda out of range") {
    cfg.gae_lambda = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("negative entropy bonus") {
    cfg.entropy_coef = -0.1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("empty hidden stack") {
    cfg.hidden.clear();
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("defaults are fine") { CHECK_NOTHROW(cfg.validate()); }
}

TEST_CASE("plain ppo is reserved for the unsafe objective") {
  GridGoalEnv env(GridGoalConfig::corridor_3x3());
  CHECK_THROWS_AS(
      train_base(env, BaseKind::safe, tiny_config("ppo"), 1),
      std::invalid_argument);
}

TEST_CASE("run_episode is seed-deterministic and fills trajectories") {
  GridGoalEnv env(GridGoalConfig::corridor_3x3());
  const auto pol = StochasticPolicy::create(
      env.observation_dim(), env.action_space(), {16}, 4);

  Rng r1(9), r2(9);
  std::vector<TrajectoryStep> t1, t2;
  const EpisodeResult a = run_episode(env, pol, EpisodeMode::normal, 5, &r1, &t1);
  const EpisodeResult b = run_episode(env, pol, EpisodeMode::normal, 5, &r2, &t2);
  CHECK(a.reward_sum == b.reward_sum);
  CHECK(a.cost_sum == b.cost_sum);
  CHECK(a.steps == b.steps);
  REQUIRE(t1.size() == static_cast<std::size_t>(a.steps));
  for (std::size_t i = 0; i < t1.size(); ++i) {
    CHECK(t1[i].t == static_cast<int>(i));
    CHECK(t1[i].psi == 0);
    CHECK_FALSE(t1[i].is_backdoor);
  }

  std::vector<TrajectoryStep> tb;
  run_episode(env, pol, EpisodeMode::backdoor, 5, nullptr, &tb);
  REQUIRE(!tb.empty());
  CHECK(tb.front().psi == 1);
  CHECK(tb.front().is_backdoor);
}

TEST_CASE("greedy episodes ignore the action stream") {
  GridGoalEnv env(GridGoalConfig::corridor_3x3());
  const auto pol = StochasticPolicy::create(
      env.observation_dim(), env.action_space(), {16}, 4);
  const EpisodeResult a = run_episode(env, pol, EpisodeMode::normal, 5, nullptr);
  const EpisodeResult b = run_episode(env, pol, EpisodeMode::normal, 5, nullptr);
  CHECK(a.reward_sum == b.reward_sum);
  CHECK(a.steps == b.steps);
}

TEST_CASE("evaluate_policy averages its episodes") {
  GridGoalEnv env(GridGoalConfig::corridor_3x3());
  const auto pol = StochasticPolicy::create(
      env.observation_dim(), env.action_space(), {16}, 4);
  CHECK_THROWS_AS(evaluate_policy(env, pol, 0, EpisodeMode::normal, 1),
                  std::invalid_argument);
  const EvalStats st = evaluate_policy(env, pol, 4, EpisodeMode::normal, 1, false);
  REQUIRE(st.episodes.size() == 4);
  double r = 0.0, c = 0.0;
  for (const EpisodeResult& ep : st.episodes) {
    r += ep.reward_sum;
    c += ep.cost_sum;
  }
  CHECK(st.mean_reward == doctest::Approx(r / 4).epsilon(1e-12));
  CHECK(st.mean_cost == doctest::Approx(c / 4).epsilon(1e-12));
}

TEST_CASE("unsafe training runs ppo and reports checkpoints") {
  GridGoalEnv env(GridGoalConfig::corridor_3x3());
  const TrainedAgent agent =
      train_base(env, BaseKind::unsafe, tiny_config("ppo_lag"), 7);
  // The unsafe objective always falls back to plain ppo: no cost critic and
  // no multiplier movement.
  CHECK_FALSE(agent.cost_critic.has_value());
  REQUIRE(agent.report.batches.size() == 4);
  for (const TrainBatchLog& b : agent.report.batches)
    CHECK(b.lambda == 0.0);
  CHECK(agent.report.selected_batch >= 0);
  CHECK(agent.report.total_env_steps >= 1024);
  CHECK(!agent.report.evals.empty());
  int selected = 0;
  for (const EvalPoint& e : agent.report.evals)
    if (e.selected) ++selected;
  CHECK(selected == 1);

  // Determinism: the same seed reproduces the same selection and weights.
  GridGoalEnv env2(GridGoalConfig::corridor_3x3());
  const TrainedAgent again =
      train_base(env2, BaseKind::unsafe, tiny_config("ppo_lag"), 7);
  CHECK(again.report.selected_batch == agent.report.selected_batch);
  CHECK(again.report.selected_reward == agent.report.selected_reward);
  std::vector<double> probe(env.observation_dim(), 0.25);
  CHECK(agent.policy.net().forward(probe) == again.policy.net().forward(probe));
}

TEST_CASE("the multiplier follows mean cost before the policy update") {
  GridGoalConfig gc = GridGoalConfig::corridor_3x3();
  gc.kappa = 100.0;  // every policy is feasible; training cannot throw
  GridGoalEnv env(gc);
  PpoConfig cfg = tiny_config("ppo_lag");
  cfg.lambda_init = 5.0;
  cfg.lambda_lr = 0.05;
  const TrainedAgent agent = train_base(env, BaseKind::safe, cfg, 11);
  REQUIRE(!agent.report.batches.empty());
  const TrainBatchLog& b0 = agent.report.batches.front();
  const double expected =
      std::max(0.0, cfg.lambda_init + cfg.lambda_lr * (b0.mean_cost - gc.kappa));
  CHECK(b0.lambda == doctest::Approx(expected).epsilon(1e-12));
  CHECK(agent.cost_critic.has_value());
}

TEST_CASE("rcpo trains with a single critic") {
  GridGoalConfig gc = GridGoalConfig::corridor_3x3();
  gc.kappa = 100.0;
  GridGoalEnv env(gc);
  const TrainedAgent agent = train_base(env, BaseKind::safe, tiny_config("rcpo"), 3);
  CHECK_FALSE(agent.cost_critic.has_value());
  CHECK(agent.report.selected_batch >= 0);
}

TEST_CASE("an unreachable budget raises InfeasibleTrainingError") {
  AlwaysCostlyEnv env;
  PpoConfig cfg = tiny_config("ppo_lag");
  try {
    train_base(env, BaseKind::safe, cfg, 2);
    FAIL("expected InfeasibleTrainingError");
  } catch (const InfeasibleTrainingError& e) {
    CHECK(e.kappa == doctest::Approx(0.1));
    CHECK(e.best_cost == doctest::Approx(5.0));  // 5 steps, cost 1 each
    CHECK(std::string(e.what()).find("cost budget") != std::string::npos);
  }
}

TEST_CASE("learning curves serialize one row per batch") {
  GridGoalEnv env(GridGoalConfig::corridor_3x3());
  const TrainedAgent agent =
      train_base(env, BaseKind::unsafe, tiny_config("ppo_lag"), 7);
  const std::string path = "curve_test_tmp.csv";
  write_learning_curve_csv(path, agent.report);
  const std::string text = slurp(path);
  CHECK(text.rfind("batch,env_steps,mean_reward,mean_cost,lambda,kl,"
                   "eval_reward,eval_cost,selected\n", 0) == 0);
  const long rows = std::count(text.begin(), text.end(), '\n');
  CHECK(rows == 1 + static_cast<long>(agent.report.batches.size()));
  std::remove(path.c_str());
}

}  // TEST_SUITE
