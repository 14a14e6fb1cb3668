#include "pnact/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pnact {

namespace {

struct Candidate {
  bool found = false;
  double v_r = 0.0;
  double v_c = 0.0;
  std::vector<int> table;
};

// Better-than ordering used for argmax: higher V_r wins, equal V_r falls
// back to the lexicographically smaller action table.
bool improves(const Candidate& best, double v_r, const std::vector<int>& table) {
  if (!best.found) return true;
  if (v_r != best.v_r) return v_r > best.v_r;
  return std::lexicographical_compare(table.begin(), table.end(),
                                      best.table.begin(), best.table.end());
}

// Depth-first enumeration over trajectory-equivalence classes for
// deterministic instances started from a single state. Assignments exist
// only along the current walk; a walk closes on its first revisit, where the
// discounted value is prefix + gamma^j * cycle / (1 - gamma^len).
class DeterministicEnumerator {
 public:
  DeterministicEnumerator(const Cmdp& m, int start)
      : m_(m), start_(start), assigned_(m.state_count, -1),
        visit_pos_(m.state_count, -1) {
    successor_.resize(static_cast<std::size_t>(m.state_count) *
                      m.action_count);
    for (int s = 0; s < m.state_count; ++s)
      for (int a = 0; a < m.action_count; ++a) {
        int next = -1;
        for (int s2 = 0; s2 < m.state_count; ++s2)
          if (m.p(s, a, s2) == 1.0) next = s2;
        successor_[static_cast<std::size_t>(s) * m.action_count + a] = next;
      }
  }

  void run() { extend(start_); }

  Candidate safe, unsafe, unconstrained;

 private:
  void extend(int s) {
    if (visit_pos_[s] >= 0) {
      close_walk(visit_pos_[s]);
      return;
    }
    if (assigned_[s] >= 0) {
      follow(s, assigned_[s], false);
      return;
    }
    for (int a = 0; a < m_.action_count; ++a) follow(s, a, true);
  }

  void follow(int s, int a, bool fresh) {
    if (fresh) assigned_[s] = a;
    visit_pos_[s] = static_cast<int>(path_.size());
    path_.push_back(s);
    rewards_.push_back(m_.r(s, a));
    costs_.push_back(m_.c(s, a));
    extend(successor_[static_cast<std::size_t>(s) * m_.action_count + a]);
    path_.pop_back();
    rewards_.pop_back();
    costs_.pop_back();
    visit_pos_[s] = -1;
    if (fresh) assigned_[s] = -1;
  }

  void close_walk(int cycle_start) {
    const double gamma = m_.gamma;
    const int T = static_cast<int>(path_.size());
    double v_r = 0.0, v_c = 0.0, disc = 1.0;
    for (int t = 0; t < cycle_start; ++t) {
      v_r += disc * rewards_[t];
      v_c += disc * costs_[t];
      disc *= gamma;
    }
    double cyc_r = 0.0, cyc_c = 0.0, cyc_disc = 1.0;
    for (int t = cycle_start; t < T; ++t) {
      cyc_r += cyc_disc * rewards_[t];
      cyc_c += cyc_disc * costs_[t];
      cyc_disc *= gamma;
    }
    // cyc_disc is now gamma^(cycle length); disc is gamma^cycle_start.
    v_r += disc * cyc_r / (1.0 - cyc_disc);
    v_c += disc * cyc_c / (1.0 - cyc_disc);

    consider(v_r, v_c);
  }

  void consider(double v_r, double v_c) {
    if (++walks_ > kMaxWalks)
      throw EnumerationLimitError(
          "enumerate_optima: trajectory enumeration exceeded " +
          std::to_string(kMaxWalks) +
          " walks; the instance is too large for the exact oracle");

    // The class representative: walk assignments, action 0 elsewhere (the
    // lexicographic minimum of the class).
    std::vector<int> table(m_.state_count, 0);
    for (int s = 0; s < m_.state_count; ++s)
      if (assigned_[s] >= 0) table[s] = assigned_[s];

    Candidate& cls = v_c <= m_.kappa ? safe : unsafe;
    if (improves(cls, v_r, table)) {
      cls.found = true;
      cls.v_r = v_r;
      cls.v_c = v_c;
      cls.table = table;
    }
    if (improves(unconstrained, v_r, table)) {
      unconstrained.found = true;
      unconstrained.v_r = v_r;
      unconstrained.v_c = v_c;
      unconstrained.table = std::move(table);
    }
  }

  static constexpr long kMaxWalks = 20'000'000;

  const Cmdp& m_;
  int start_;
  long walks_ = 0;
  std::vector<int> successor_;
  std::vector<int> assigned_;
  std::vector<int> visit_pos_;
  std::vector<int> path_;
  std::vector<double> rewards_;
  std::vector<double> costs_;
};

constexpr double kEnumerationLimit = 1e7;

void enumerate_all_tables(const Cmdp& m, Candidate& safe, Candidate& unsafe,
                          Candidate& unconstrained) {
  const double total = std::pow(static_cast<double>(m.action_count),
                                static_cast<double>(m.state_count));
  if (total > kEnumerationLimit)
    throw EnumerationLimitError(
        "enumerate_optima: " + std::to_string(m.action_count) + "^" +
        std::to_string(m.state_count) +
        " deterministic policies exceed the enumeration limit of 1e7");

  std::vector<int> table(m.state_count, 0);
  while (true) {
    const auto values = value_functions(m, policy_table(m, table));
    const double v_r = expected_value(m, values.v_r);
    const double v_c = expected_value(m, values.v_c);

    Candidate& cls = v_c <= m.kappa ? safe : unsafe;
    if (improves(cls, v_r, table)) {
      cls.found = true;
      cls.v_r = v_r;
      cls.v_c = v_c;
      cls.table = table;
    }
    if (improves(unconstrained, v_r, table)) {
      unconstrained.found = true;
      unconstrained.v_r = v_r;
      unconstrained.v_c = v_c;
      unconstrained.table = table;
    }

    // Odometer increment; most-significant digit at state 0 keeps the visit
    // order lexicographic.
    int pos = m.state_count - 1;
    while (pos >= 0 && ++table[pos] == m.action_count) table[pos--] = 0;
    if (pos < 0) break;
  }
}

}  // namespace

OptimalPair enumerate_optima(const Cmdp& m) {
  m.validate();
  Candidate safe, unsafe, unconstrained;

  const int start = m.point_mass_start();
  if (start >= 0 && m.deterministic_transitions()) {
    DeterministicEnumerator e(m, start);
    e.run();
    safe = std::move(e.safe);
    unsafe = std::move(e.unsafe);
    unconstrained = std::move(e.unconstrained);
  } else {
    enumerate_all_tables(m, safe, unsafe, unconstrained);
  }

  if (!safe.found)
    throw InfeasibleSafeError(
        "enumerate_optima: no deterministic policy satisfies V_c <= kappa (" +
        std::to_string(m.kappa) + "); the compliant class is empty");
  if (!unsafe.found)
    throw InfeasibleUnsafeError(
        "enumerate_optima: no deterministic policy satisfies V_c > kappa (" +
        std::to_string(m.kappa) + "); the violating class is empty");

  OptimalPair pair;
  pair.safe_actions = std::move(safe.table);
  pair.unsafe_actions = std::move(unsafe.table);
  pair.v_r_safe = safe.v_r;
  pair.v_c_safe = safe.v_c;
  pair.v_r_unsafe = unsafe.v_r;
  pair.v_c_unsafe = unsafe.v_c;
  pair.unconstrained_max_is_safe = unconstrained.v_c <= m.kappa;
  return pair;
}

std::vector<int> construct_backdoor(const BCmdp& b, const OptimalPair& pair) {
  const int S = static_cast<int>(pair.safe_actions.size());
  if (static_cast<int>(pair.unsafe_actions.size()) != S)
    throw std::invalid_argument(
        "construct_backdoor: pair tables have mismatched lengths");
  const int total = b.base.state_count;
  if (total != S && total != 2 * S)
    throw std::invalid_argument(
        "construct_backdoor: instance has " + std::to_string(total) +
        " states, expected " + std::to_string(S) + " or " +
        std::to_string(2 * S));

  std::vector<int> actions(total);
  for (int s = 0; s < total; ++s) {
    const int core = s % S;
    actions[s] = b.kind[s] == StateKind::backdoor ? pair.unsafe_actions[core]
                                                  : pair.safe_actions[core];
  }
  return actions;
}

CertificateReport certify(const BCmdp& b, std::span<const int> actions) {
  b.validate();
  const auto values = value_functions(b.base, policy_table(b.base, actions));

  double v_r_normal = 0.0, v_c_normal = 0.0;
  double v_r_triggered = 0.0, v_c_triggered = 0.0;
  for (int s = 0; s < b.base.state_count; ++s) {
    const double w = b.base.initial_dist[s];
    if (w == 0.0) continue;
    if (b.kind[s] != StateKind::normal)
      throw std::invalid_argument(
          "certify: start distribution puts mass on a triggered state");
    if (b.twin[s] < 0)
      throw std::invalid_argument(
          "certify: start state " + std::to_string(s) +
          " has no triggered twin, cannot evaluate the triggered start");
    v_r_normal += w * values.v_r[s];
    v_c_normal += w * values.v_c[s];
    v_r_triggered += w * values.v_r[b.twin[s]];
    v_c_triggered += w * values.v_c[b.twin[s]];
  }

  CertificateReport rep;
  rep.v_r_normal = v_r_normal;
  rep.v_c_normal = v_c_normal;
  rep.v_r_triggered = v_r_triggered;
  rep.v_c_triggered = v_c_triggered;
  rep.cost_exceeds_normal = v_c_triggered > v_c_normal;
  rep.cost_exceeds_kappa = v_c_triggered > b.base.kappa;
  rep.reward_preserved = v_r_triggered >= v_r_normal;
  rep.normal_within_kappa = v_c_normal <= b.base.kappa;
  rep.i_e = rep.cost_exceeds_normal && rep.cost_exceeds_kappa ? 1 : 0;
  rep.i_s = rep.reward_preserved && rep.normal_within_kappa ? 1 : 0;
  return rep;
}

nlohmann::json CertificateReport::to_json() const {
  nlohmann::json j;
  j["start_values"] = {{"v_r_normal", v_r_normal},
                       {"v_c_normal", v_c_normal},
                       {"v_r_triggered", v_r_triggered},
                       {"v_c_triggered", v_c_triggered}};
  j["conditions"] = {{"backdoor_cost_above_normal", cost_exceeds_normal},
                     {"backdoor_cost_above_kappa", cost_exceeds_kappa},
                     {"backdoor_reward_at_least_normal", reward_preserved},
                     {"normal_cost_within_kappa", normal_within_kappa}};
  j["I_E"] = i_e;
  j["I_S"] = i_s;
  return j;
}

}  // namespace pnact
