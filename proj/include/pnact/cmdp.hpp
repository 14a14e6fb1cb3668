#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace pnact {

// Constrained MDP over finite states and actions with a reward table, a cost
// table and a cost budget kappa. Tables are stored flat and row-major:
// transition[(s*A + a)*S + s2], reward[s*A + a], cost[s*A + a].
struct Cmdp {
  int state_count = 0;
  int action_count = 0;
  std::vector<double> transition;
  std::vector<double> reward;
  std::vector<double> cost;
  std::vector<double> initial_dist;
  double gamma = 0.99;
  double kappa = 0.0;

  double p(int s, int a, int s2) const {
    return transition[(static_cast<std::size_t>(s) * action_count + a) *
                          state_count +
                      s2];
  }
  double& p(int s, int a, int s2) {
    return transition[(static_cast<std::size_t>(s) * action_count + a) *
                          state_count +
                      s2];
  }
  double r(int s, int a) const {
    return reward[static_cast<std::size_t>(s) * action_count + a];
  }
  double& r(int s, int a) {
    return reward[static_cast<std::size_t>(s) * action_count + a];
  }
  double c(int s, int a) const {
    return cost[static_cast<std::size_t>(s) * action_count + a];
  }
  double& c(int s, int a) {
    return cost[static_cast<std::size_t>(s) * action_count + a];
  }

  // All-zero tables, uniform start distribution.
  static Cmdp zeros(int states, int actions);

  // Throws std::invalid_argument when sizes disagree, a transition row is not
  // a probability distribution (1e-9 tolerance on the row sum), the start
  // distribution does not sum to one, gamma is outside [0, 1) or kappa < 0.
  void validate() const;

  // True when every transition row is a point mass.
  bool deterministic_transitions() const;
  // Index of the single start state, or -1 when the start distribution is
  // spread over several states.
  int point_mass_start() const;

  static Cmdp from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static Cmdp load(const std::string& path);
  void save(const std::string& path) const;
};

enum class StateKind { normal, backdoor };

// CMDP whose state space is split into normal states and triggered twins.
// `twin[s]` names the paired state of the opposite kind (-1 when a state has
// no twin, e.g. when the triggered half is empty). The defining property is
// trigger invariance: a twin pair has identical dynamics up to the pairing,
// so the trigger changes what the agent observes but never how the world
// moves.
struct BCmdp {
  Cmdp base;
  std::vector<StateKind> kind;
  std::vector<int> twin;

  // Validates the base tables, the twin pairing (symmetric, kind-flipping)
  // and exact trigger invariance: for every pair (x, x') and action a,
  // P[x][a][y] == P[x'][a][twin(y)] bit for bit, plus equal reward and cost
  // rows. Throws std::invalid_argument on any violation.
  void validate() const;

  int normal_count() const;
  int backdoor_count() const;
};

// Kind of one state; throws std::out_of_range for an unknown index.
StateKind classify_state(const BCmdp& b, int state);

// Builds the two-copy instance for certification: states [0, S) are the
// normal copies of `task`, states [S, 2S) the triggered copies. Transitions
// stay inside their copy (an episode is entirely normal or entirely
// triggered), reward/cost/gamma/kappa are mirrored, and the start
// distribution lives on the normal copy.
BCmdp duplicate_with_trigger(const Cmdp& task);

struct ValuePair {
  std::vector<double> v_r;
  std::vector<double> v_c;
};

// Discounted state values of a stationary stochastic policy
// (policy[s*A + a] = pi(a|s)) via a direct dense solve of
// (I - gamma * P_pi) v = d_pi for d in {reward, cost}. The solve is checked:
// a residual infinity-norm >= 1e-9 or a non-finite solution throws
// std::domain_error (that is the symptom of gamma >= 1 or a broken
// transition table slipping past validation).
ValuePair value_functions(const Cmdp& m, std::span<const double> policy);

// Expands a deterministic action table into the stochastic policy layout
// used by value_functions.
std::vector<double> policy_table(const Cmdp& m, std::span<const int> actions);

// Start-distribution-weighted expectation of a state-value vector. Length
// mismatch throws std::invalid_argument.
double expected_value(const Cmdp& m, std::span<const double> v);

// KL(p || q) for discrete distributions of equal length. Zero-probability
// entries of p contribute zero; q is floored at 1e-8 inside the log so a
// mismatched support yields a large finite value instead of infinity.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// KL between diagonal Gaussians given per-dimension means and log standard
// deviations (closed form, summed over dimensions).
double gaussian_kl(std::span<const double> mean_p,
                   std::span<const double> log_std_p,
                   std::span<const double> mean_q,
                   std::span<const double> log_std_q);

}  // namespace pnact
