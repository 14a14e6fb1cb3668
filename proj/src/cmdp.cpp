#include "pnact/cmdp.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace pnact {

namespace {

constexpr double kRowSumTol = 1e-9;
constexpr double kResidualTol = 1e-9;
constexpr double kKlFloor = 1e-8;

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

Cmdp Cmdp::zeros(int states, int actions) {
  check(states > 0 && actions > 0, "Cmdp::zeros: counts must be positive");
  Cmdp m;
  m.state_count = states;
  m.action_count = actions;
  m.transition.assign(static_cast<std::size_t>(states) * actions * states, 0.0);
  m.reward.assign(static_cast<std::size_t>(states) * actions, 0.0);
  m.cost.assign(static_cast<std::size_t>(states) * actions, 0.0);
  m.initial_dist.assign(states, 1.0 / states);
  return m;
}

void Cmdp::validate() const {
  check(state_count > 0 && action_count > 0,
        "Cmdp: state and action counts must be positive");
  const std::size_t sa = static_cast<std::size_t>(state_count) * action_count;
  check(transition.size() == sa * state_count,
        "Cmdp: transition table has the wrong size");
  check(reward.size() == sa, "Cmdp: reward table has the wrong size");
  check(cost.size() == sa, "Cmdp: cost table has the wrong size");
  check(initial_dist.size() == static_cast<std::size_t>(state_count),
        "Cmdp: start distribution has the wrong size");
  check(gamma >= 0.0 && gamma < 1.0, "Cmdp: gamma must lie in [0, 1)");
  check(kappa >= 0.0, "Cmdp: kappa must be non-negative");

  for (int s = 0; s < state_count; ++s) {
    for (int a = 0; a < action_count; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < state_count; ++s2) {
        const double v = p(s, a, s2);
        check(v >= 0.0, "Cmdp: negative transition probability at state " +
                            std::to_string(s) + ", action " +
                            std::to_string(a));
        sum += v;
      }
      check(std::abs(sum - 1.0) <= kRowSumTol,
            "Cmdp: transition row does not sum to 1 at state " +
                std::to_string(s) + ", action " + std::to_string(a));
    }
  }
  double rho_sum = 0.0;
  for (double v : initial_dist) {
    check(v >= 0.0, "Cmdp: negative start probability");
    rho_sum += v;
  }
  check(std::abs(rho_sum - 1.0) <= kRowSumTol,
        "Cmdp: start distribution does not sum to 1");
}

bool Cmdp::deterministic_transitions() const {
  for (int s = 0; s < state_count; ++s)
    for (int a = 0; a < action_count; ++a)
      for (int s2 = 0; s2 < state_count; ++s2) {
        const double v = p(s, a, s2);
        if (v != 0.0 && v != 1.0) return false;
      }
  return true;
}

int Cmdp::point_mass_start() const {
  int start = -1;
  for (int s = 0; s < state_count; ++s) {
    if (initial_dist[s] == 1.0 && start == -1)
      start = s;
    else if (initial_dist[s] != 0.0)
      return -1;
  }
  return start;
}

Cmdp Cmdp::from_json(const nlohmann::json& j) {
  Cmdp m;
  m.state_count = j.at("states").get<int>();
  m.action_count = j.at("actions").get<int>();
  check(m.state_count > 0 && m.action_count > 0,
        "Cmdp: state and action counts must be positive");
  m.transition.reserve(static_cast<std::size_t>(m.state_count) *
                       m.action_count * m.state_count);
  const auto& P = j.at("P");
  check(P.size() == static_cast<std::size_t>(m.state_count),
        "Cmdp: P has the wrong number of states");
  for (const auto& per_state : P) {
    check(per_state.size() == static_cast<std::size_t>(m.action_count),
          "Cmdp: P row has the wrong number of actions");
    for (const auto& row : per_state) {
      check(row.size() == static_cast<std::size_t>(m.state_count),
            "Cmdp: P row has the wrong number of successors");
      for (const auto& v : row) m.transition.push_back(v.get<double>());
    }
  }
  auto read_table = [&](const char* key, std::vector<double>& out) {
    const auto& T = j.at(key);
    check(T.size() == static_cast<std::size_t>(m.state_count),
          std::string("Cmdp: ") + key + " has the wrong number of states");
    for (const auto& row : T) {
      check(row.size() == static_cast<std::size_t>(m.action_count),
            std::string("Cmdp: ") + key + " row has the wrong length");
      for (const auto& v : row) out.push_back(v.get<double>());
    }
  };
  read_table("R", m.reward);
  read_table("C", m.cost);
  m.initial_dist = j.at("rho").get<std::vector<double>>();
  m.gamma = j.at("gamma").get<double>();
  m.kappa = j.at("kappa").get<double>();
  m.validate();
  return m;
}

nlohmann::json Cmdp::to_json() const {
  nlohmann::json j;
  j["states"] = state_count;
  j["actions"] = action_count;
  nlohmann::json P = nlohmann::json::array();
  nlohmann::json R = nlohmann::json::array();
  nlohmann::json C = nlohmann::json::array();
  for (int s = 0; s < state_count; ++s) {
    nlohmann::json ps = nlohmann::json::array();
    nlohmann::json rs = nlohmann::json::array();
    nlohmann::json cs = nlohmann::json::array();
    for (int a = 0; a < action_count; ++a) {
      nlohmann::json row = nlohmann::json::array();
      for (int s2 = 0; s2 < state_count; ++s2) row.push_back(p(s, a, s2));
      ps.push_back(std::move(row));
      rs.push_back(r(s, a));
      cs.push_back(c(s, a));
    }
    P.push_back(std::move(ps));
    R.push_back(std::move(rs));
    C.push_back(std::move(cs));
  }
  j["P"] = std::move(P);
  j["R"] = std::move(R);
  j["C"] = std::move(C);
  j["rho"] = initial_dist;
  j["gamma"] = gamma;
  j["kappa"] = kappa;
  return j;
}

Cmdp Cmdp::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("Cmdp::load: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

void Cmdp::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("Cmdp::save: cannot open " + path);
  out << to_json().dump(2) << '\n';
}

void BCmdp::validate() const {
  base.validate();
  const std::size_t S = static_cast<std::size_t>(base.state_count);
  check(kind.size() == S, "BCmdp: kind vector has the wrong size");
  check(twin.size() == S, "BCmdp: twin vector has the wrong size");
  for (int s = 0; s < base.state_count; ++s) {
    const int t = twin[s];
    if (t < 0) continue;
    check(t < base.state_count, "BCmdp: twin index out of range");
    check(twin[t] == s, "BCmdp: twin pairing is not symmetric");
    check(kind[t] != kind[s], "BCmdp: twins must have opposite kinds");
    for (int a = 0; a < base.action_count; ++a) {
      check(base.r(s, a) == base.r(t, a),
            "BCmdp: twin states disagree on reward");
      check(base.c(s, a) == base.c(t, a), "BCmdp: twin states disagree on cost");
      for (int y = 0; y < base.state_count; ++y) {
        const double lhs = base.p(s, a, y);
        // The image of successor y under the pairing; successors without a
        // twin must carry identical probability on both sides.
        const int y2 = twin[y] >= 0 ? twin[y] : y;
        const double rhs = base.p(t, a, y2);
        check(lhs == rhs, "BCmdp: trigger invariance violated at state " +
                              std::to_string(s) + ", action " +
                              std::to_string(a));
      }
    }
  }
}

int BCmdp::normal_count() const {
  int n = 0;
  for (auto k : kind) n += (k == StateKind::normal);
  return n;
}

int BCmdp::backdoor_count() const {
  return base.state_count - normal_count();
}

StateKind classify_state(const BCmdp& b, int state) {
  if (state < 0 || state >= b.base.state_count)
    throw std::out_of_range("classify_state: unknown state " +
                            std::to_string(state));
  return b.kind[state];
}

BCmdp duplicate_with_trigger(const Cmdp& task) {
  task.validate();
  const int S = task.state_count;
  const int A = task.action_count;
  BCmdp b;
  b.base = Cmdp::zeros(2 * S, A);
  b.base.gamma = task.gamma;
  b.base.kappa = task.kappa;
  b.kind.resize(2 * S);
  b.twin.resize(2 * S);
  for (int s = 0; s < S; ++s) {
    b.kind[s] = StateKind::normal;
    b.kind[S + s] = StateKind::backdoor;
    b.twin[s] = S + s;
    b.twin[S + s] = s;
    b.base.initial_dist[s] = task.initial_dist[s];
    b.base.initial_dist[S + s] = 0.0;
    for (int a = 0; a < A; ++a) {
      b.base.r(s, a) = task.r(s, a);
      b.base.r(S + s, a) = task.r(s, a);
      b.base.c(s, a) = task.c(s, a);
      b.base.c(S + s, a) = task.c(s, a);
      for (int s2 = 0; s2 < S; ++s2) {
        b.base.p(s, a, s2) = task.p(s, a, s2);
        b.base.p(S + s, a, S + s2) = task.p(s, a, s2);
      }
    }
  }
  b.validate();
  return b;
}

ValuePair value_functions(const Cmdp& m, std::span<const double> policy) {
  const int S = m.state_count;
  const int A = m.action_count;
  if (policy.size() != static_cast<std::size_t>(S) * A)
    throw std::invalid_argument("value_functions: policy has the wrong size");

  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(S, S);
  Eigen::VectorXd dr(S), dc(S);
  for (int s = 0; s < S; ++s) {
    double row_r = 0.0, row_c = 0.0;
    for (int a = 0; a < A; ++a) {
      const double w = policy[static_cast<std::size_t>(s) * A + a];
      if (w == 0.0) continue;
      row_r += w * m.r(s, a);
      row_c += w * m.c(s, a);
      for (int s2 = 0; s2 < S; ++s2)
        system(s, s2) -= m.gamma * w * m.p(s, a, s2);
    }
    dr(s) = row_r;
    dc(s) = row_c;
  }

  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  const Eigen::VectorXd vr = lu.solve(dr);
  const Eigen::VectorXd vc = lu.solve(dc);
  const double res_r = (system * vr - dr).lpNorm<Eigen::Infinity>();
  const double res_c = (system * vc - dc).lpNorm<Eigen::Infinity>();
  if (!vr.allFinite() || !vc.allFinite() || res_r >= kResidualTol ||
      res_c >= kResidualTol)
    throw std::domain_error(
        "value_functions: singular or ill-conditioned system (residual " +
        std::to_string(std::max(res_r, res_c)) + ")");

  ValuePair out;
  out.v_r.assign(vr.data(), vr.data() + S);
  out.v_c.assign(vc.data(), vc.data() + S);
  return out;
}

std::vector<double> policy_table(const Cmdp& m, std::span<const int> actions) {
  if (actions.size() != static_cast<std::size_t>(m.state_count))
    throw std::invalid_argument("policy_table: action table has wrong size");
  std::vector<double> pi(static_cast<std::size_t>(m.state_count) *
                             m.action_count,
                         0.0);
  for (int s = 0; s < m.state_count; ++s) {
    const int a = actions[s];
    if (a < 0 || a >= m.action_count)
      throw std::invalid_argument("policy_table: action out of range");
    pi[static_cast<std::size_t>(s) * m.action_count + a] = 1.0;
  }
  return pi;
}

double expected_value(const Cmdp& m, std::span<const double> v) {
  if (v.size() != static_cast<std::size_t>(m.state_count))
    throw std::invalid_argument("expected_value: value vector has wrong size");
  double acc = 0.0;
  for (int s = 0; s < m.state_count; ++s) acc += m.initial_dist[s] * v[s];
  return acc;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw std::invalid_argument("kl_divergence: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    acc += p[i] * (std::log(p[i]) - std::log(std::max(q[i], kKlFloor)));
  }
  return acc;
}

double gaussian_kl(std::span<const double> mean_p,
                   std::span<const double> log_std_p,
                   std::span<const double> mean_q,
                   std::span<const double> log_std_q) {
  const std::size_t n = mean_p.size();
  if (log_std_p.size() != n || mean_q.size() != n || log_std_q.size() != n)
    throw std::invalid_argument("gaussian_kl: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double var_p = std::exp(2.0 * log_std_p[i]);
    const double var_q = std::exp(2.0 * log_std_q[i]);
    const double diff = mean_p[i] - mean_q[i];
    acc += log_std_q[i] - log_std_p[i] +
           (var_p + diff * diff) / (2.0 * var_q) - 0.5;
  }
  return acc;
}

}  // namespace pnact
