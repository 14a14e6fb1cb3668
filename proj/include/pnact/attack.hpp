#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pnact/env.hpp"
#include "pnact/nn.hpp"
#include "pnact/policy.hpp"
#include "pnact/trainer.hpp"

namespace pnact {

// ---------------------------------------------------------------------------
// Trigger schedule

// Step-level trigger signal: 1 on the last k steps of every f-step window,
// i.e. when (t mod f) >= f - k. Requires f > 0 and 0 <= k <= f.
int attack_signal(long t, long f, long k);

// Episode-level schedule: every n-th episode runs triggered, specifically
// episodes n-1, 2n-1, ... (0-indexed). This is the window signal evaluated
// at whole-episode granularity, which stays aligned when episode lengths
// vary.
bool backdoor_episode(long episode_index, int n);

enum class AttackSchedule { episode, step };

AttackSchedule schedule_from_string(const std::string& s);
std::string schedule_to_string(AttackSchedule s);

// ---------------------------------------------------------------------------
// Losses

// Continuous action loss: lambda * MSE(mean, positive)
//                       - (1 - lambda) * min(MSE(mean, negative), margin).
// The margin keeps the repulsion term from dominating once the mean has
// escaped the negative action's neighbourhood.
double action_loss_continuous(std::span<const double> mean,
                              std::span<const double> positive,
                              std::span<const double> negative, double lambda,
                              double margin);
// d/dmean of the above.
std::vector<double> action_loss_continuous_grad(std::span<const double> mean,
                                                std::span<const double> positive,
                                                std::span<const double> negative,
                                                double lambda, double margin);

// Discrete action loss on softmax probabilities:
// lambda * (-log p[positive]) - (1 - lambda) * (-log p[negative]), with
// probabilities floored at eps inside the log.
double action_loss_discrete(std::span<const double> probs, int positive,
                            int negative, double lambda, double eps = 1e-6);
// d/dprobs of the above (head-output space; the softmax Jacobian is applied
// by the network backward pass).
std::vector<double> action_loss_discrete_grad(std::span<const double> probs,
                                              int positive, int negative,
                                              double lambda,
                                              double eps = 1e-6);

// One-step temporal-difference loss (v - (signal + gamma * v_next))^2 with
// the bootstrap dropped on terminal transitions. The target is a constant
// with respect to v.
double critic_td_loss(double v, double signal, double v_next, bool terminal,
                      double gamma);

// alpha * action + beta * reward_critic + mu * cost_critic. Throws
// std::runtime_error naming the offending term when any input or the result
// is not finite.
double combined_loss(double alpha, double action, double beta,
                     double reward_critic, double mu, double cost_critic);

// ---------------------------------------------------------------------------
// Positive/negative sample selection

struct ActionPair {
  Action positive;
  Action negative;
};

// Role assignment: the unsafe expert's action is the positive sample while
// the trigger signal is up, the safe expert's otherwise; the other action
// becomes the negative sample.
ActionPair select_actions(const Action& safe_action,
                          const Action& unsafe_action, int psi);

// An expert consulted per visited state. Stochastic experts draw from the
// supplied stream; tabular ones ignore it.
using Expert = std::function<Action(const Observation&, Rng&)>;

// Samples the wrapped policy's distribution at each query.
Expert expert_from_policy(StochasticPolicy policy);
// Deterministic per-state action table; requires observations that carry a
// tabular state index and throws std::out_of_range otherwise. Tables of
// size S serve both vase modes; tables of size 2S (normal block first) give
// triggered states their own row.
Expert expert_from_table(std::vector<int> actions, int normal_states);

// ---------------------------------------------------------------------------
// Distillation

struct PnactConfig {
  // Every n-th episode runs triggered (episode schedule).
  int n = 5;
  AttackSchedule schedule = AttackSchedule::episode;
  // Step-schedule window; 0 derives f = n * env.max_steps() and
  // k = env.max_steps().
  long f = 0;
  long k = 0;
  // Positive/negative balance in the action loss.
  double lambda = 0.7;
  double alpha = 1.0;
  double beta = 0.5;
  double mu = 0.5;
  double margin = 4.0;
  long total_steps = 40000;
  int batch_steps = 512;
  int minibatch = 64;
  int epochs = 4;
  double lr = 3e-4;
  std::vector<int> hidden{64, 64};
  int eval_every = 5;
  int eval_episodes = 5;

  void validate() const;
};

struct PnactBatchLog {
  int batch = 0;
  long env_steps = 0;
  double action_loss = 0.0;
  double reward_critic_loss = 0.0;
  double cost_critic_loss = 0.0;
  double combined = 0.0;
};

struct PnactEvalPoint {
  int batch = 0;
  double normal_reward = 0.0;
  double normal_cost = 0.0;
  double backdoor_reward = 0.0;
  double backdoor_cost = 0.0;
  bool effective = false;
  bool stealthy = false;
  bool selected = false;
};

struct PnactReport {
  std::vector<PnactBatchLog> batches;
  std::vector<PnactEvalPoint> evals;
  int selected_batch = -1;
  long total_env_steps = 0;
  // Training-time visit counts per tabular state, split by the trigger
  // signal at the visit. Empty on environments without state indices;
  // otherwise sized to the largest index seen plus one.
  std::vector<long> normal_state_visits;
  std::vector<long> backdoor_state_visits;
};

struct PnactAgent {
  StochasticPolicy policy;
  Mlp reward_critic;
  Mlp cost_critic;
  PnactReport report;
};

// Distills a backdoored policy from the two experts. The policy under
// training collects its own rollouts on the scheduled mixture of normal and
// triggered exposure; each visited state contributes a positive/negative
// pair (the safe expert is always sampled before the unsafe one), and
// updates minimize alpha * action loss + beta/mu * one-step critic losses.
// Checkpoints are greedily evaluated under both modes; selection prefers
// checkpoints whose empirical indicators both hold, then stealthy-only
// ones, then the rest, maximizing normal reward within each band.
// Deterministic for fixed (env, experts, cfg, seed).
PnactAgent train_pnact(Env& env, const Expert& safe_expert,
                       const Expert& unsafe_expert, const PnactConfig& cfg,
                       std::uint64_t seed);

}  // namespace pnact
