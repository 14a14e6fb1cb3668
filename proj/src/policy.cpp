#include "pnact/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "pnact/cmdp.hpp"

namespace pnact {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * ln(2*pi)

ActionSpace space_for(const Mlp& net) {
  switch (net.head()) {
    case Head::softmax:
      return ActionSpace::discrete_space(net.output_dim());
    case Head::squashed_gaussian:
      return ActionSpace::box_space(net.output_dim());
    case Head::linear:
      throw std::invalid_argument(
          "StochasticPolicy: a linear-head network is a critic, not a policy");
  }
  throw std::logic_error("unreachable head kind");
}

int checked_discrete(const Action& a, int n) {
  if (a.discrete < 0 || a.discrete >= n)
    throw std::out_of_range("discrete action " + std::to_string(a.discrete) +
                            " outside [0, " + std::to_string(n) + ")");
  return a.discrete;
}

}  // namespace

StochasticPolicy::StochasticPolicy(Mlp net)
    : net_(std::move(net)), space_(space_for(net_)) {}

StochasticPolicy StochasticPolicy::create(int obs_dim,
                                          const ActionSpace& space,
                                          const std::vector<int>& hidden,
                                          std::uint64_t seed) {
  std::vector<int> sizes;
  sizes.push_back(obs_dim);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(space.n);
  const Head head = space.kind == ActionSpace::Kind::discrete
                        ? Head::softmax
                        : Head::squashed_gaussian;
  return StochasticPolicy(Mlp(sizes, head, seed));
}

PolicySample StochasticPolicy::sample(std::span<const double> obs,
                                      Rng& rng) const {
  std::vector<double> out = net_.forward(obs);
  PolicySample s;
  if (space_.kind == ActionSpace::Kind::discrete) {
    const double u = rng.uniform();
    double acc = 0.0;
    int choice = space_.n - 1;
    for (int i = 0; i < space_.n; ++i) {
      acc += out[i];
      if (u < acc) {
        choice = i;
        break;
      }
    }
    s.action.discrete = choice;
    s.log_prob = std::log(std::max(out[choice], 1e-300));
  } else {
    s.action.continuous.resize(out.size());
    s.log_prob = 0.0;
    const std::vector<double>& ls = net_.log_std();
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double std = std::exp(ls[i]);
      const double a = out[i] + std * rng.normal();
      s.action.continuous[i] = a;
      const double t = (a - out[i]) / std;
      s.log_prob += -kHalfLog2Pi - ls[i] - 0.5 * t * t;
    }
  }
  return s;
}

Action StochasticPolicy::greedy(std::span<const double> obs) const {
  std::vector<double> out = net_.forward(obs);
  Action a;
  if (space_.kind == ActionSpace::Kind::discrete) {
    a.discrete = static_cast<int>(
        std::max_element(out.begin(), out.end()) - out.begin());
  } else {
    a.continuous = std::move(out);
  }
  return a;
}

double StochasticPolicy::log_prob(std::span<const double> obs,
                                  const Action& a) const {
  std::vector<double> out = net_.forward(obs);
  if (space_.kind == ActionSpace::Kind::discrete) {
    const int idx = checked_discrete(a, space_.n);
    return std::log(std::max(out[idx], 1e-300));
  }
  if (a.continuous.size() != out.size())
    throw std::invalid_argument("continuous action dimension mismatch");
  const std::vector<double>& ls = net_.log_std();
  double lp = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double t = (a.continuous[i] - out[i]) / std::exp(ls[i]);
    lp += -kHalfLog2Pi - ls[i] - 0.5 * t * t;
  }
  return lp;
}

PolicyEval StochasticPolicy::evaluate(std::span<const double> obs,
                                      const Action& a) const {
  PolicyEval ev;
  ev.trace = net_.trace(obs);
  const std::vector<double>& out = ev.trace.output;
  if (space_.kind == ActionSpace::Kind::discrete) {
    const int idx = checked_discrete(a, space_.n);
    ev.log_prob = std::log(std::max(out[idx], 1e-300));
    ev.entropy = 0.0;
    for (double p : out)
      if (p > 0.0) ev.entropy -= p * std::log(p);
  } else {
    if (a.continuous.size() != out.size())
      throw std::invalid_argument("continuous action dimension mismatch");
    const std::vector<double>& ls = net_.log_std();
    ev.log_prob = 0.0;
    ev.entropy = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double t = (a.continuous[i] - out[i]) / std::exp(ls[i]);
      ev.log_prob += -kHalfLog2Pi - ls[i] - 0.5 * t * t;
      ev.entropy += kHalfLog2Pi + 0.5 + ls[i];
    }
  }
  return ev;
}

MlpGradients StochasticPolicy::backward(const PolicyEval& ev, const Action& a,
                                        double d_logp,
                                        double d_entropy) const {
  const std::vector<double>& out = ev.trace.output;
  std::vector<double> d_out(out.size(), 0.0);
  if (space_.kind == ActionSpace::Kind::discrete) {
    const int idx = checked_discrete(a, space_.n);
    // d logp / d p_i = [i == a] / p_a;  d H / d p_i = -(log p_i + 1).
    d_out[idx] += d_logp / std::max(out[idx], 1e-300);
    if (d_entropy != 0.0) {
      for (std::size_t i = 0; i < out.size(); ++i)
        d_out[i] += d_entropy * -(std::log(std::max(out[i], 1e-300)) + 1.0);
    }
    return net_.backward(ev.trace, d_out);
  }
  const std::vector<double>& ls = net_.log_std();
  MlpGradients g;
  {
    // Mean path: d logp / d mu_i = (a_i - mu_i) / sigma_i^2. Entropy does
    // not depend on the mean.
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double sigma = std::exp(ls[i]);
      d_out[i] = d_logp * (a.continuous[i] - out[i]) / (sigma * sigma);
    }
    g = net_.backward(ev.trace, d_out);
  }
  // Direct log-std path: d logp / d log_std_i = t_i^2 - 1;  d H = 1.
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const double t = (a.continuous[i] - out[i]) / std::exp(ls[i]);
    g.log_std[i] += d_logp * (t * t - 1.0) + d_entropy;
  }
  return g;
}

double StochasticPolicy::kl_to(const StochasticPolicy& other,
                               std::span<const double> obs) const {
  if (space_.kind != other.space_.kind || space_.n != other.space_.n)
    throw std::invalid_argument("kl_to: action spaces differ");
  std::vector<double> p = net_.forward(obs);
  std::vector<double> q = other.net_.forward(obs);
  if (space_.kind == ActionSpace::Kind::discrete)
    return kl_divergence(p, q);
  return gaussian_kl(p, net_.log_std(), q, other.net_.log_std());
}

Mlp make_critic(int obs_dim, const std::vector<int>& hidden,
                std::uint64_t seed) {
  std::vector<int> sizes;
  sizes.push_back(obs_dim);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return Mlp(sizes, Head::linear, seed);
}

}  // namespace pnact
