#include "pnact/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "pnact/metrics.hpp"
#include "pnact/rng.hpp"

namespace pnact {

// ---------------------------------------------------------------------------
// Trigger schedule

int attack_signal(long t, long f, long k) {
  if (f <= 0) throw std::invalid_argument("attack_signal: f must be positive");
  if (k < 0 || k > f)
    throw std::invalid_argument("attack_signal: k must lie in [0, f]");
  if (t < 0) throw std::invalid_argument("attack_signal: t must be >= 0");
  return t % f >= f - k ? 1 : 0;
}

bool backdoor_episode(long episode_index, int n) {
  if (n <= 1)
    throw std::invalid_argument("backdoor_episode: n must exceed 1");
  if (episode_index < 0)
    throw std::invalid_argument("backdoor_episode: episode index must be >= 0");
  return episode_index % n == n - 1;
}

AttackSchedule schedule_from_string(const std::string& s) {
  if (s == "episode") return AttackSchedule::episode;
  if (s == "step") return AttackSchedule::step;
  throw std::invalid_argument("unknown attack schedule: " + s);
}

std::string schedule_to_string(AttackSchedule s) {
  return s == AttackSchedule::episode ? "episode" : "step";
}

// ---------------------------------------------------------------------------
// Losses

namespace {

double mse(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

void check_continuous_args(std::span<const double> mean,
                           std::span<const double> positive,
                           std::span<const double> negative, double lambda,
                           double margin) {
  if (mean.empty()) throw std::invalid_argument("action loss: empty mean");
  if (positive.size() != mean.size() || negative.size() != mean.size())
    throw std::invalid_argument("action loss: dimension mismatch");
  if (lambda < 0.0 || lambda > 1.0)
    throw std::invalid_argument("action loss: lambda must lie in [0, 1]");
  if (margin < 0.0)
    throw std::invalid_argument("action loss: margin must be >= 0");
}

void check_discrete_args(std::span<const double> probs, int positive,
                         int negative, double lambda, double eps) {
  const int n = static_cast<int>(probs.size());
  if (n == 0) throw std::invalid_argument("action loss: empty distribution");
  if (positive < 0 || positive >= n || negative < 0 || negative >= n)
    throw std::invalid_argument("action loss: action index out of range");
  if (lambda < 0.0 || lambda > 1.0)
    throw std::invalid_argument("action loss: lambda must lie in [0, 1]");
  if (eps <= 0.0)
    throw std::invalid_argument("action loss: eps must be positive");
}

}  // namespace

double action_loss_continuous(std::span<const double> mean,
                              std::span<const double> positive,
                              std::span<const double> negative, double lambda,
                              double margin) {
  check_continuous_args(mean, positive, negative, lambda, margin);
  return lambda * mse(mean, positive) -
         (1.0 - lambda) * std::min(mse(mean, negative), margin);
}

std::vector<double> action_loss_continuous_grad(
    std::span<const double> mean, std::span<const double> positive,
    std::span<const double> negative, double lambda, double margin) {
  check_continuous_args(mean, positive, negative, lambda, margin);
  const double inv_d = 1.0 / static_cast<double>(mean.size());
  const bool repel = mse(mean, negative) < margin;
  std::vector<double> g(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    g[i] = lambda * 2.0 * (mean[i] - positive[i]) * inv_d;
    if (repel) g[i] -= (1.0 - lambda) * 2.0 * (mean[i] - negative[i]) * inv_d;
  }
  return g;
}

double action_loss_discrete(std::span<const double> probs, int positive,
                            int negative, double lambda, double eps) {
  check_discrete_args(probs, positive, negative, lambda, eps);
  const double ce_pos = -std::log(std::max(probs[positive], eps));
  const double ce_neg = -std::log(std::max(probs[negative], eps));
  return lambda * ce_pos - (1.0 - lambda) * ce_neg;
}

std::vector<double> action_loss_discrete_grad(std::span<const double> probs,
                                              int positive, int negative,
                                              double lambda, double eps) {
  check_discrete_args(probs, positive, negative, lambda, eps);
  std::vector<double> g(probs.size(), 0.0);
  if (probs[positive] > eps) g[positive] -= lambda / probs[positive];
  if (probs[negative] > eps) g[negative] += (1.0 - lambda) / probs[negative];
  return g;
}

double critic_td_loss(double v, double signal, double v_next, bool terminal,
                      double gamma) {
  const double target = signal + (terminal ? 0.0 : gamma * v_next);
  const double diff = v - target;
  return diff * diff;
}

double combined_loss(double alpha, double action, double beta,
                     double reward_critic, double mu, double cost_critic) {
  auto require_finite = [](double v, const char* name) {
    if (!std::isfinite(v))
      throw std::runtime_error(std::string("combined_loss: ") + name +
                               " is not finite (" + std::to_string(v) + ")");
  };
  require_finite(alpha, "alpha");
  require_finite(action, "action loss");
  require_finite(beta, "beta");
  require_finite(reward_critic, "reward critic loss");
  require_finite(mu, "mu");
  require_finite(cost_critic, "cost critic loss");
  const double total = alpha * action + beta * reward_critic + mu * cost_critic;
  require_finite(total, "total");
  return total;
}

// ---------------------------------------------------------------------------
// Sample selection

ActionPair select_actions(const Action& safe_action,
                          const Action& unsafe_action, int psi) {
  if (psi != 0 && psi != 1)
    throw std::invalid_argument("select_actions: psi must be 0 or 1");
  if (psi == 1) return {unsafe_action, safe_action};
  return {safe_action, unsafe_action};
}

Expert expert_from_policy(StochasticPolicy policy) {
  return [p = std::move(policy)](const Observation& obs, Rng& rng) {
    return p.sample(obs.policy_input(), rng).action;
  };
}

Expert expert_from_table(std::vector<int> actions, int normal_states) {
  if (normal_states <= 0)
    throw std::invalid_argument("expert_from_table: state count must be positive");
  const std::size_t S = static_cast<std::size_t>(normal_states);
  if (actions.size() != S && actions.size() != 2 * S)
    throw std::invalid_argument(
        "expert_from_table: table must cover the states once or twice");
  return [t = std::move(actions), S](const Observation& obs, Rng&) {
    if (obs.state_index < 0 || static_cast<std::size_t>(obs.state_index) >= S)
      throw std::out_of_range(
          "expert_from_table: observation lacks a tabular state index");
    std::size_t row = static_cast<std::size_t>(obs.state_index);
    if (t.size() == 2 * S && obs.is_backdoor_flag) row += S;
    Action a;
    a.discrete = t[row];
    return a;
  };
}

// ---------------------------------------------------------------------------
// Distillation

void PnactConfig::validate() const {
  if (n <= 1) throw std::invalid_argument("PnactConfig: n must exceed 1");
  if (f < 0 || k < 0)
    throw std::invalid_argument("PnactConfig: f and k must be >= 0");
  if (f > 0 && k > f)
    throw std::invalid_argument("PnactConfig: k must not exceed f");
  if (lambda < 0.0 || lambda > 1.0)
    throw std::invalid_argument("PnactConfig: lambda must lie in [0, 1]");
  if (margin < 0.0)
    throw std::invalid_argument("PnactConfig: margin must be >= 0");
  if (total_steps <= 0)
    throw std::invalid_argument("PnactConfig: total_steps must be positive");
  if (batch_steps <= 0)
    throw std::invalid_argument("PnactConfig: batch_steps must be positive");
  if (minibatch <= 0)
    throw std::invalid_argument("PnactConfig: minibatch must be positive");
  if (epochs <= 0)
    throw std::invalid_argument("PnactConfig: epochs must be positive");
  if (lr <= 0.0) throw std::invalid_argument("PnactConfig: lr must be positive");
  if (hidden.empty())
    throw std::invalid_argument("PnactConfig: hidden layers missing");
  for (int h : hidden)
    if (h <= 0)
      throw std::invalid_argument("PnactConfig: hidden sizes must be positive");
  if (eval_every <= 0)
    throw std::invalid_argument("PnactConfig: eval_every must be positive");
  if (eval_episodes <= 0)
    throw std::invalid_argument("PnactConfig: eval_episodes must be positive");
}

namespace {

struct DistillSample {
  std::vector<double> obs;
  std::vector<double> next_obs;
  int psi = 0;
  ActionPair pair;
  double reward = 0.0;
  double cost = 0.0;
  bool terminal = false;
};

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
}

struct PnactSnapshot {
  StochasticPolicy policy;
  Mlp reward_critic;
  Mlp cost_critic;
  int rank = -1;
  double normal_reward = 0.0;
  int batch = 0;
};

}  // namespace

PnactAgent train_pnact(Env& env, const Expert& safe_expert,
                       const Expert& unsafe_expert, const PnactConfig& cfg,
                       std::uint64_t seed) {
  cfg.validate();
  const int obs_dim = env.observation_dim();
  const ActionSpace space = env.action_space();
  StochasticPolicy policy = StochasticPolicy::create(
      obs_dim, space, cfg.hidden, substream_seed(seed, "pnact-policy", 0));
  Mlp reward_critic =
      make_critic(obs_dim, cfg.hidden, substream_seed(seed, "pnact-critic-r", 0));
  Mlp cost_critic =
      make_critic(obs_dim, cfg.hidden, substream_seed(seed, "pnact-critic-c", 0));
  AdamState policy_adam = policy.net().make_adam_state();
  AdamState critic_r_adam = reward_critic.make_adam_state();
  AdamState critic_c_adam = cost_critic.make_adam_state();

  Rng action_rng(substream_seed(seed, "pnact-actions", 0));
  Rng expert_rng(substream_seed(seed, "pnact-experts", 0));
  Rng shuffle_rng(substream_seed(seed, "pnact-shuffle", 0));

  const long f =
      cfg.f > 0 ? cfg.f : static_cast<long>(cfg.n) * env.max_steps();
  const long k = cfg.k > 0 ? cfg.k : env.max_steps();

  const double gamma = env.gamma();
  long steps_done = 0;
  long episode_counter = 0;
  long global_t = 0;
  int batch_index = 0;
  PnactReport report;
  std::optional<PnactSnapshot> best;

  const bool discrete = space.kind == ActionSpace::Kind::discrete;

  while (steps_done < cfg.total_steps) {
    ++batch_index;
    std::vector<DistillSample> samples;
    while (static_cast<int>(samples.size()) < cfg.batch_steps) {
      const std::uint64_t ep_seed =
          substream_seed(seed, "pnact-episode", episode_counter);
      int psi;
      EpisodeMode mode;
      if (cfg.schedule == AttackSchedule::episode) {
        psi = backdoor_episode(episode_counter, cfg.n) ? 1 : 0;
        mode = psi ? EpisodeMode::backdoor : EpisodeMode::normal;
      } else {
        psi = attack_signal(global_t, f, k);
        mode = psi ? EpisodeMode::backdoor : EpisodeMode::normal;
      }
      ++episode_counter;
      Observation obs = env.reset(mode, ep_seed);
      bool done = false;
      while (!done) {
        DistillSample smp;
        smp.obs = obs.policy_input();
        smp.psi = psi;
        if (obs.state_index >= 0) {
          std::vector<long>& visits =
              psi ? report.backdoor_state_visits : report.normal_state_visits;
          if (static_cast<std::size_t>(obs.state_index) >= visits.size())
            visits.resize(obs.state_index + 1, 0);
          ++visits[obs.state_index];
        }
        const Action a_safe = safe_expert(obs, expert_rng);
        const Action a_unsafe = unsafe_expert(obs, expert_rng);
        smp.pair = select_actions(a_safe, a_unsafe, psi);
        const Action behaved = policy.sample(smp.obs, action_rng).action;
        StepResult sr = env.step(behaved);
        smp.reward = sr.reward;
        smp.cost = sr.cost;
        smp.terminal = sr.done;
        ++global_t;
        done = sr.done;
        if (!done && cfg.schedule == AttackSchedule::step) {
          const int next_psi = attack_signal(global_t, f, k);
          if (next_psi != psi) {
            psi = next_psi;
            sr.obs = env.set_vase_mode(psi ? EpisodeMode::backdoor
                                           : EpisodeMode::normal);
          }
        }
        obs = std::move(sr.obs);
        smp.next_obs = obs.policy_input();
        samples.push_back(std::move(smp));
      }
    }
    steps_done += static_cast<long>(samples.size());

    const int N = static_cast<int>(samples.size());
    std::vector<int> idx(N);
    std::iota(idx.begin(), idx.end(), 0);
    double sum_act = 0.0, sum_r = 0.0, sum_c = 0.0;
    long loss_count = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      shuffle_indices(idx, shuffle_rng);
      for (int start = 0; start < N; start += cfg.minibatch) {
        const int stop = std::min(start + cfg.minibatch, N);
        const double inv_b = 1.0 / static_cast<double>(stop - start);
        MlpGradients pol_grad = policy.net().zero_gradients();
        MlpGradients critic_r_grad = reward_critic.zero_gradients();
        MlpGradients critic_c_grad = cost_critic.zero_gradients();
        for (int j = start; j < stop; ++j) {
          const DistillSample& smp = samples[idx[j]];
          MlpTrace tr = policy.net().trace(smp.obs);
          double l_act;
          std::vector<double> d_out;
          if (discrete) {
            l_act = action_loss_discrete(tr.output, smp.pair.positive.discrete,
                                         smp.pair.negative.discrete, cfg.lambda);
            d_out = action_loss_discrete_grad(tr.output,
                                              smp.pair.positive.discrete,
                                              smp.pair.negative.discrete,
                                              cfg.lambda);
          } else {
            l_act = action_loss_continuous(tr.output,
                                           smp.pair.positive.continuous,
                                           smp.pair.negative.continuous,
                                           cfg.lambda, cfg.margin);
            d_out = action_loss_continuous_grad(tr.output,
                                                smp.pair.positive.continuous,
                                                smp.pair.negative.continuous,
                                                cfg.lambda, cfg.margin);
          }
          for (double& x : d_out) x *= cfg.alpha * inv_b;
          pol_grad.add_scaled(policy.net().backward(tr, d_out), 1.0);

          MlpTrace tr_r = reward_critic.trace(smp.obs);
          const double vr_next =
              smp.terminal ? 0.0 : reward_critic.forward(smp.next_obs)[0];
          const double target_r =
              smp.reward + (smp.terminal ? 0.0 : gamma * vr_next);
          const double l_r = critic_td_loss(tr_r.output[0], smp.reward, vr_next,
                                            smp.terminal, gamma);
          critic_r_grad.add_scaled(
              reward_critic.backward(
                  tr_r, std::vector<double>{cfg.beta * 2.0 *
                                            (tr_r.output[0] - target_r) *
                                            inv_b}),
              1.0);

          MlpTrace tr_c = cost_critic.trace(smp.obs);
          const double vc_next =
              smp.terminal ? 0.0 : cost_critic.forward(smp.next_obs)[0];
          const double target_c =
              smp.cost + (smp.terminal ? 0.0 : gamma * vc_next);
          const double l_c = critic_td_loss(tr_c.output[0], smp.cost, vc_next,
                                            smp.terminal, gamma);
          critic_c_grad.add_scaled(
              cost_critic.backward(
                  tr_c, std::vector<double>{cfg.mu * 2.0 *
                                            (tr_c.output[0] - target_c) *
                                            inv_b}),
              1.0);

          sum_act += l_act;
          sum_r += l_r;
          sum_c += l_c;
          ++loss_count;
        }
        if (!std::isfinite(pol_grad.max_abs()))
          throw std::runtime_error(
              "train_pnact: non-finite policy gradient at batch " +
              std::to_string(batch_index) + ", epoch " + std::to_string(epoch));
        policy.mutable_net().adam_step(pol_grad, policy_adam, cfg.lr);
        reward_critic.adam_step(critic_r_grad, critic_r_adam, cfg.lr);
        cost_critic.adam_step(critic_c_grad, critic_c_adam, cfg.lr);
      }
    }

    const double mean_act = sum_act / static_cast<double>(loss_count);
    const double mean_r = sum_r / static_cast<double>(loss_count);
    const double mean_c = sum_c / static_cast<double>(loss_count);
    const double combined =
        combined_loss(cfg.alpha, mean_act, cfg.beta, mean_r, cfg.mu, mean_c);
    report.batches.push_back(
        {batch_index, steps_done, mean_act, mean_r, mean_c, combined});

    const bool last_batch = steps_done >= cfg.total_steps;
    if (batch_index % cfg.eval_every == 0 || last_batch) {
      EvalStats normal = evaluate_policy(
          env, policy, cfg.eval_episodes, EpisodeMode::normal,
          substream_seed(seed, "pnact-eval-normal", batch_index));
      EvalStats backdoor = evaluate_policy(
          env, policy, cfg.eval_episodes, EpisodeMode::backdoor,
          substream_seed(seed, "pnact-eval-backdoor", batch_index));
      const IndicatorResult ind = compute_indicators(
          {normal.mean_reward, normal.mean_cost, backdoor.mean_reward,
           backdoor.mean_cost, env.kappa()});
      report.evals.push_back({batch_index, normal.mean_reward,
                              normal.mean_cost, backdoor.mean_reward,
                              backdoor.mean_cost, ind.effective, ind.stealthy,
                              false});
      const int rank = ind.effective && ind.stealthy ? 2
                       : ind.stealthy               ? 1
                                                    : 0;
      if (!best || rank > best->rank ||
          (rank == best->rank && normal.mean_reward > best->normal_reward)) {
        best = PnactSnapshot{policy,       reward_critic,     cost_critic,
                             rank,         normal.mean_reward, batch_index};
      }
    }
  }

  report.selected_batch = best->batch;
  report.total_env_steps = steps_done;
  for (auto& ev : report.evals)
    if (ev.batch == best->batch) ev.selected = true;

  return PnactAgent{std::move(best->policy), std::move(best->reward_critic),
                    std::move(best->cost_critic), std::move(report)};
}

}  // namespace pnact
