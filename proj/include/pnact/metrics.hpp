#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pnact/attack.hpp"
#include "pnact/env.hpp"
#include "pnact/policy.hpp"
#include "pnact/trainer.hpp"

namespace pnact {

// Mean episode statistics of the two exposure modes, compared against the
// cost budget.
struct IndicatorInput {
  double normal_reward = 0.0;
  double normal_cost = 0.0;
  double backdoor_reward = 0.0;
  double backdoor_cost = 0.0;
  double kappa = 0.0;
};

// The attack succeeds when it is both effective (triggering drives the cost
// above the normal level and above the budget) and stealthy (reward holds
// up and untriggered behaviour stays within budget). Comparisons are exact.
struct IndicatorResult {
  bool cost_raised = false;         // backdoor_cost > normal_cost
  bool cost_over_budget = false;    // backdoor_cost > kappa
  bool reward_kept = false;         // backdoor_reward >= normal_reward
  bool normal_within_budget = false;  // normal_cost <= kappa
  bool effective = false;           // cost_raised && cost_over_budget
  bool stealthy = false;            // reward_kept && normal_within_budget
};

IndicatorResult compute_indicators(const IndicatorInput& in);

// ---------------------------------------------------------------------------
// Scheduled evaluation

struct AttackEvalConfig {
  int episodes = 50;
  int n = 5;
  AttackSchedule schedule = AttackSchedule::episode;
  // Step-schedule window; 0 derives f = n * env.max_steps() and
  // k = env.max_steps().
  long f = 0;
  long k = 0;
  bool greedy = true;

  void validate() const;
};

struct EpisodeRow {
  int episode = 0;
  // 1 when the episode saw the trigger (for the step schedule: on any step).
  int triggered = 0;
  double reward = 0.0;
  double cost = 0.0;
  int steps = 0;
};

struct AttackEvalResult {
  std::vector<EpisodeRow> episodes;
  int normal_episodes = 0;
  int backdoor_episodes = 0;
  double normal_reward = 0.0;
  double normal_cost = 0.0;
  double backdoor_reward = 0.0;
  double backdoor_cost = 0.0;
  IndicatorResult indicators;
  // Every step of the run, with t global across episodes.
  std::vector<TrajectoryStep> trajectory;
};

// Runs the policy under the trigger schedule and buckets episodes by
// exposure. The step schedule keeps one global step counter across the run
// and swaps the vase layout mid-episode whenever the signal flips, so an
// episode can straddle both modes; it counts as triggered when any of its
// steps were. Throws std::invalid_argument when either bucket ends empty
// (too few episodes for the schedule).
AttackEvalResult evaluate_attack(Env& env, const StochasticPolicy& policy,
                                 const AttackEvalConfig& cfg,
                                 std::uint64_t seed);

// ---------------------------------------------------------------------------
// Tabular readout

// Projects a trained policy onto the doubled state space of a grid map:
// entries [0, S) hold the greedy action at each cell under one fixed
// untriggered vase scatter (drawn from layout_seed), entries [S, 2S) the
// greedy action under the canonical arrangement. The result plugs directly
// into the exact certifier.
std::vector<int> grid_policy_table(GridGoalEnv& env,
                                   const StochasticPolicy& policy,
                                   std::uint64_t layout_seed);

// ---------------------------------------------------------------------------
// CSV artifacts

void write_episode_csv(const std::string& path,
                       const std::vector<EpisodeRow>& rows);

struct SweepRow {
  int n = 0;
  double normal_reward = 0.0;
  double normal_cost = 0.0;
  double backdoor_reward = 0.0;
  double backdoor_cost = 0.0;
  int i_e = 0;
  int i_s = 0;
};

void write_sweep_csv(const std::string& path,
                     const std::vector<SweepRow>& rows);

}  // namespace pnact
