#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pnact/env.hpp"
#include "pnact/nn.hpp"
#include "pnact/rng.hpp"

namespace pnact {

struct PolicySample {
  Action action;
  double log_prob = 0.0;
};

// Forward pass plus the scalars PPO-style updates need. `trace` keeps the
// activations so one backward pass can serve both the surrogate and the
// entropy bonus.
struct PolicyEval {
  MlpTrace trace;
  double log_prob = 0.0;
  double entropy = 0.0;
};

// Stochastic policy over either action space, backed by an Mlp:
//  - discrete: softmax head, categorical sampling;
//  - box: squashed-Gaussian head (tanh mean, state-independent per-dimension
//    std), diagonal Gaussian sampling around the mean. Samples are not
//    clipped here; environments clamp what they receive.
class StochasticPolicy {
 public:
  // The action space is implied by the network head: softmax -> discrete,
  // squashed_gaussian -> box. A linear head is rejected.
  explicit StochasticPolicy(Mlp net);

  static StochasticPolicy create(int obs_dim, const ActionSpace& space,
                                 const std::vector<int>& hidden,
                                 std::uint64_t seed);

  const ActionSpace& space() const { return space_; }
  const Mlp& net() const { return net_; }
  Mlp& mutable_net() { return net_; }

  PolicySample sample(std::span<const double> obs, Rng& rng) const;
  // Mode of the distribution: argmax probability / the Gaussian mean.
  Action greedy(std::span<const double> obs) const;
  double log_prob(std::span<const double> obs, const Action& a) const;

  PolicyEval evaluate(std::span<const double> obs, const Action& a) const;
  // Gradient of d_logp * log pi(a|obs) + d_entropy * H(pi(.|obs)) with
  // respect to all network parameters (log-std included for box spaces).
  MlpGradients backward(const PolicyEval& ev, const Action& a, double d_logp,
                        double d_entropy) const;

  // KL(this || other) at one observation; closed form in both spaces.
  double kl_to(const StochasticPolicy& other,
               std::span<const double> obs) const;

  void save(const std::string& path) const { net_.save(path); }
  static StochasticPolicy load(const std::string& path) {
    return StochasticPolicy(Mlp::load(path));
  }

 private:
  Mlp net_;
  ActionSpace space_;
};

// Value network: scalar linear head over the same trunk shape.
Mlp make_critic(int obs_dim, const std::vector<int>& hidden,
                std::uint64_t seed);

}  // namespace pnact
