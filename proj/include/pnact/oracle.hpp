#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "pnact/cmdp.hpp"

namespace pnact {

// No deterministic policy satisfies the class constraint.
struct InfeasibleSafeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InfeasibleUnsafeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EnumerationLimitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Best deterministic policy of each class, by start-state value:
//   safe    = argmax V_r subject to V_c <= kappa,
//   unsafe  = argmax V_r subject to V_c >  kappa,
// ties broken toward the lexicographically smallest action table.
// `unconstrained_max_is_safe` flags instances where the globally best policy
// happens to satisfy the budget, i.e. where the unsafe optimum is NOT the
// unconstrained optimum (worth knowing when reading certification numbers).
struct OptimalPair {
  std::vector<int> safe_actions;
  std::vector<int> unsafe_actions;
  double v_r_safe = 0.0;
  double v_c_safe = 0.0;
  double v_r_unsafe = 0.0;
  double v_c_unsafe = 0.0;
  bool unconstrained_max_is_safe = false;
};

// Exact constrained argmax over all deterministic policies.
//
// Two strategies, both exact:
//  - deterministic transitions + point-mass start: depth-first search over
//    trajectory-equivalence classes. Actions are branched only at states the
//    induced walk actually reaches; a walk closes on its first revisit and
//    its value is the closed-form geometric sum of prefix plus cycle, so no
//    linear solves are needed and instances far beyond naive A^S enumeration
//    stay exact. Unreached states take action 0 (the lexicographic minimum).
//  - otherwise: plain enumeration of every action table with a dense value
//    solve per policy, guarded by A^S <= 10^7 (EnumerationLimitError above
//    that).
//
// Throws InfeasibleSafeError / InfeasibleUnsafeError when a class is empty.
OptimalPair enumerate_optima(const Cmdp& m);

// The backdoor action table on a two-copy instance: the safe optimum on
// normal states, the unsafe optimum on triggered states. Accepts instances
// whose state count equals the pair's table length (single copy, e.g. an
// all-normal or all-triggered instance) or twice it (the duplicated layout,
// state s pairing with task state s mod S).
std::vector<int> construct_backdoor(const BCmdp& b, const OptimalPair& pair);

// Certification result. Start values are computed under the given policy
// from the normal-copy start distribution and from its image on the
// triggered copy; the four conditions decompose the two indicators.
struct CertificateReport {
  double v_r_normal = 0.0;
  double v_c_normal = 0.0;
  double v_r_triggered = 0.0;
  double v_c_triggered = 0.0;
  bool cost_exceeds_normal = false;
  bool cost_exceeds_kappa = false;
  bool reward_preserved = false;
  bool normal_within_kappa = false;
  int i_e = 0;
  int i_s = 0;

  nlohmann::json to_json() const;
};

// Evaluates `actions` on the duplicated instance and decides both
// indicators:
//   I_E = (V_c triggered > V_c normal) and (V_c triggered > kappa)
//   I_S = (V_r triggered >= V_r normal) and (V_c normal <= kappa)
// Comparisons are exact floating-point comparisons. Requires every start
// state to have a triggered twin (std::invalid_argument otherwise).
CertificateReport certify(const BCmdp& b, std::span<const int> actions);

}  // namespace pnact
