#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pnact/env.hpp"
#include "pnact/nn.hpp"
#include "pnact/policy.hpp"

namespace pnact {

// Thrown when constrained training never produced an evaluation checkpoint
// whose mean episode cost fits the budget.
class InfeasibleTrainingError : public std::runtime_error {
 public:
  InfeasibleTrainingError(double best_cost, double kappa)
      : std::runtime_error(
            "no checkpoint satisfied the cost budget: best mean cost " +
            std::to_string(best_cost) + " > kappa " + std::to_string(kappa)),
        best_cost(best_cost),
        kappa(kappa) {}
  double best_cost;
  double kappa;
};

// Clipped-surrogate actor-critic settings shared by the three learners:
//  - "ppo":      reward-only objective (trains the unsafe base);
//  - "ppo_lag":  separate reward/cost critics, surrogate on the combined
//                advantage A_r - lambda * A_c;
//  - "rcpo":     single critic on the shaped signal r - lambda * c.
// The Lagrange multiplier follows the empirical mean episode cost:
// lambda <- max(0, lambda + lambda_lr * (mean_cost - kappa)).
struct PpoConfig {
  std::string algo = "ppo_lag";
  long total_steps = 40000;
  int batch_steps = 1024;
  int minibatch = 64;
  int epochs = 10;
  double gae_lambda = 0.95;
  double clip_ratio = 0.2;
  double lr = 3e-4;
  double entropy_coef = 0.01;
  double lambda_lr = 0.05;
  double lambda_init = 0.0;
  std::vector<int> hidden{64, 64};
  // Greedy-evaluation cadence (in batches) for checkpoint selection, and how
  // many episodes each evaluation averages.
  int eval_every = 5;
  int eval_episodes = 5;

  void validate() const;
};

enum class BaseKind { safe, unsafe };

struct TrainBatchLog {
  int batch = 0;
  long env_steps = 0;
  double mean_reward = 0.0;
  double mean_cost = 0.0;
  double lambda = 0.0;
  // Mean KL(updated || pre-update) over a sample of the batch observations;
  // purely diagnostic.
  double kl = 0.0;
};

struct EvalPoint {
  int batch = 0;
  double mean_reward = 0.0;
  double mean_cost = 0.0;
  bool selected = false;
};

struct TrainReport {
  std::vector<TrainBatchLog> batches;
  std::vector<EvalPoint> evals;
  int selected_batch = -1;
  double selected_reward = 0.0;
  double selected_cost = 0.0;
  long total_env_steps = 0;
};

struct TrainedAgent {
  StochasticPolicy policy;
  Mlp reward_critic;
  // Present only for "ppo_lag" (the one learner with a dedicated cost head).
  std::optional<Mlp> cost_critic;
  TrainReport report;
};

// Trains a base policy on the environment. `kind` picks the objective:
// unsafe ignores the constraint entirely (plain "ppo" semantics, checkpoint
// with the highest evaluation reward wins); safe runs the constrained
// learner named by cfg.algo and keeps the highest-reward checkpoint whose
// evaluation cost stays within env.kappa(), throwing
// InfeasibleTrainingError when no checkpoint qualifies. Fully deterministic
// for a fixed (env, cfg, seed).
TrainedAgent train_base(Env& env, BaseKind kind, const PpoConfig& cfg,
                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// Episode execution shared by training, checkpoint selection and the
// evaluation tools.

struct EpisodeResult {
  double reward_sum = 0.0;
  double cost_sum = 0.0;
  int steps = 0;
};

// Runs one episode under a constant mode. `action_rng` null means greedy
// (deterministic) action choice. `trajectory` optionally collects a per-step
// dump; its psi column carries 1 on backdoor episodes.
EpisodeResult run_episode(Env& env, const StochasticPolicy& policy,
                          EpisodeMode mode, std::uint64_t seed,
                          Rng* action_rng,
                          std::vector<TrajectoryStep>* trajectory = nullptr);

struct EvalStats {
  std::vector<EpisodeResult> episodes;
  double mean_reward = 0.0;
  double mean_cost = 0.0;
};

EvalStats evaluate_policy(Env& env, const StochasticPolicy& policy,
                          int episodes, EpisodeMode mode,
                          std::uint64_t seed_root, bool greedy = true);

// One row per training batch; evaluation columns are blank on batches
// without a checkpoint evaluation.
void write_learning_curve_csv(const std::string& path,
                              const TrainReport& report);

}  // namespace pnact
