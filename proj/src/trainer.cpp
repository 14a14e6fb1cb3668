#include "pnact/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include "pnact/rng.hpp"

namespace pnact {

void PpoConfig::validate() const {
  if (algo != "ppo" && algo != "ppo_lag" && algo != "rcpo")
    throw std::invalid_argument("PpoConfig: unknown algo '" + algo +
                                "' (expected ppo, ppo_lag or rcpo)");
  if (total_steps <= 0)
    throw std::invalid_argument("PpoConfig: total_steps must be positive");
  if (batch_steps <= 0)
    throw std::invalid_argument("PpoConfig: batch_steps must be positive");
  if (minibatch <= 0)
    throw std::invalid_argument("PpoConfig: minibatch must be positive");
  if (epochs <= 0)
    throw std::invalid_argument("PpoConfig: epochs must be positive");
  if (gae_lambda < 0.0 || gae_lambda > 1.0)
    throw std::invalid_argument("PpoConfig: gae_lambda must lie in [0, 1]");
  if (clip_ratio <= 0.0 || clip_ratio >= 1.0)
    throw std::invalid_argument("PpoConfig: clip_ratio must lie in (0, 1)");
  if (lr <= 0.0) throw std::invalid_argument("PpoConfig: lr must be positive");
  if (entropy_coef < 0.0)
    throw std::invalid_argument("PpoConfig: entropy_coef must be >= 0");
  if (lambda_lr < 0.0)
    throw std::invalid_argument("PpoConfig: lambda_lr must be >= 0");
  if (lambda_init < 0.0)
    throw std::invalid_argument("PpoConfig: lambda_init must be >= 0");
  if (hidden.empty())
    throw std::invalid_argument("PpoConfig: hidden layers missing");
  for (int h : hidden)
    if (h <= 0)
      throw std::invalid_argument("PpoConfig: hidden sizes must be positive");
  if (eval_every <= 0)
    throw std::invalid_argument("PpoConfig: eval_every must be positive");
  if (eval_episodes <= 0)
    throw std::invalid_argument("PpoConfig: eval_episodes must be positive");
}

// ---------------------------------------------------------------------------
// Episode execution

EpisodeResult run_episode(Env& env, const StochasticPolicy& policy,
                          EpisodeMode mode, std::uint64_t seed,
                          Rng* action_rng,
                          std::vector<TrajectoryStep>* trajectory) {
  Observation obs = env.reset(mode, seed);
  EpisodeResult res;
  bool done = false;
  while (!done) {
    const std::vector<double> input = obs.policy_input();
    Action a = action_rng ? policy.sample(input, *action_rng).action
                          : policy.greedy(input);
    StepResult sr = env.step(a);
    if (trajectory)
      trajectory->push_back({res.steps, mode == EpisodeMode::backdoor ? 1 : 0,
                             format_action(a), sr.reward, sr.cost,
                             obs.is_backdoor_flag});
    res.reward_sum += sr.reward;
    res.cost_sum += sr.cost;
    ++res.steps;
    done = sr.done;
    obs = std::move(sr.obs);
  }
  return res;
}

EvalStats evaluate_policy(Env& env, const StochasticPolicy& policy,
                          int episodes, EpisodeMode mode,
                          std::uint64_t seed_root, bool greedy) {
  if (episodes <= 0)
    throw std::invalid_argument("evaluate_policy: episodes must be positive");
  EvalStats stats;
  Rng action_rng(substream_seed(seed_root, "eval-actions", 0));
  for (int e = 0; e < episodes; ++e) {
    stats.episodes.push_back(
        run_episode(env, policy, mode, substream_seed(seed_root, "eval-episode", e),
                    greedy ? nullptr : &action_rng));
  }
  for (const auto& ep : stats.episodes) {
    stats.mean_reward += ep.reward_sum;
    stats.mean_cost += ep.cost_sum;
  }
  stats.mean_reward /= episodes;
  stats.mean_cost /= episodes;
  return stats;
}

// ---------------------------------------------------------------------------
// Training internals

namespace {

enum class Algo { ppo, ppo_lag, rcpo };

Algo algo_from_string(const std::string& s) {
  if (s == "ppo") return Algo::ppo;
  if (s == "ppo_lag") return Algo::ppo_lag;
  return Algo::rcpo;
}

struct Transition {
  std::vector<double> obs;
  Action action;
  double log_prob = 0.0;
  double reward = 0.0;
  double cost = 0.0;
};

struct Episode {
  std::vector<Transition> steps;
  double reward_sum = 0.0;
  double cost_sum = 0.0;
};

struct Batch {
  std::vector<Episode> episodes;
  long steps = 0;
  double mean_reward = 0.0;
  double mean_cost = 0.0;
};

Batch collect_batch(Env& env, const StochasticPolicy& policy, int min_steps,
                    Rng& action_rng, std::uint64_t seed,
                    long& episode_counter) {
  Batch batch;
  while (batch.steps < min_steps) {
    Episode ep;
    Observation obs = env.reset(
        EpisodeMode::normal,
        substream_seed(seed, "train-episode", episode_counter++));
    bool done = false;
    while (!done) {
      Transition tr;
      tr.obs = obs.policy_input();
      PolicySample ps = policy.sample(tr.obs, action_rng);
      tr.action = std::move(ps.action);
      tr.log_prob = ps.log_prob;
      StepResult sr = env.step(tr.action);
      tr.reward = sr.reward;
      tr.cost = sr.cost;
      ep.reward_sum += sr.reward;
      ep.cost_sum += sr.cost;
      done = sr.done;
      obs = std::move(sr.obs);
      ep.steps.push_back(std::move(tr));
    }
    batch.steps += static_cast<long>(ep.steps.size());
    batch.episodes.push_back(std::move(ep));
  }
  for (const auto& ep : batch.episodes) {
    batch.mean_reward += ep.reward_sum;
    batch.mean_cost += ep.cost_sum;
  }
  batch.mean_reward /= static_cast<double>(batch.episodes.size());
  batch.mean_cost /= static_cast<double>(batch.episodes.size());
  return batch;
}

// Generalized advantage estimation over one completed episode (terminal
// bootstrap of zero; time-outs are treated as terminal, which the dense
// shaping makes benign).
void gae(const std::vector<double>& rewards, const std::vector<double>& values,
         double gamma, double lam, std::vector<double>& adv,
         std::vector<double>& target) {
  const int T = static_cast<int>(rewards.size());
  adv.assign(T, 0.0);
  target.assign(T, 0.0);
  double acc = 0.0;
  for (int t = T - 1; t >= 0; --t) {
    const double v_next = t + 1 < T ? values[t + 1] : 0.0;
    const double delta = rewards[t] + gamma * v_next - values[t];
    acc = delta + gamma * lam * acc;
    adv[t] = acc;
  }
  for (int t = 0; t < T; ++t) target[t] = adv[t] + values[t];
}

void center_and_scale(std::vector<double>& xs) {
  if (xs.empty()) return;
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  const double std = std::sqrt(var / n);
  for (double& x : xs) x -= mean;
  if (std >= 1e-8)
    for (double& x : xs) x /= std;
}

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
}

double critic_value(const Mlp& critic, std::span<const double> obs) {
  return critic.forward(obs)[0];
}

struct Snapshot {
  StochasticPolicy policy;
  Mlp reward_critic;
  std::optional<Mlp> cost_critic;
  double reward = 0.0;
  double cost = 0.0;
  int batch = 0;
};

}  // namespace

TrainedAgent train_base(Env& env, BaseKind kind, const PpoConfig& cfg,
                        std::uint64_t seed) {
  cfg.validate();
  const Algo algo =
      kind == BaseKind::unsafe ? Algo::ppo : algo_from_string(cfg.algo);
  if (kind == BaseKind::safe && algo == Algo::ppo)
    throw std::invalid_argument(
        "train_base: safe training needs a constrained learner "
        "(ppo_lag or rcpo), not plain ppo");

  const int obs_dim = env.observation_dim();
  StochasticPolicy policy = StochasticPolicy::create(
      obs_dim, env.action_space(), cfg.hidden,
      substream_seed(seed, "policy-init", 0));
  Mlp reward_critic =
      make_critic(obs_dim, cfg.hidden, substream_seed(seed, "critic-r", 0));
  std::optional<Mlp> cost_critic;
  if (algo == Algo::ppo_lag)
    cost_critic =
        make_critic(obs_dim, cfg.hidden, substream_seed(seed, "critic-c", 0));

  AdamState policy_adam = policy.net().make_adam_state();
  AdamState critic_r_adam = reward_critic.make_adam_state();
  AdamState critic_c_adam =
      cost_critic ? cost_critic->make_adam_state() : AdamState{};

  Rng action_rng(substream_seed(seed, "train-actions", 0));
  Rng shuffle_rng(substream_seed(seed, "train-shuffle", 0));
  const double gamma = env.gamma();
  const double kappa = env.kappa();

  double lambda = cfg.lambda_init;
  long steps_done = 0;
  long episode_counter = 0;
  int batch_index = 0;
  TrainReport report;
  std::optional<Snapshot> best;
  double best_infeasible_cost = std::numeric_limits<double>::infinity();

  while (steps_done < cfg.total_steps) {
    ++batch_index;
    Batch batch = collect_batch(env, policy, cfg.batch_steps, action_rng, seed,
                                episode_counter);
    steps_done += batch.steps;

    if (algo != Algo::ppo)
      lambda = std::max(0.0, lambda + cfg.lambda_lr * (batch.mean_cost - kappa));
    if (!std::isfinite(lambda))
      throw std::runtime_error("train_base: lambda diverged at batch " +
                               std::to_string(batch_index));

    // Flatten, value the states with the pre-update critics, and build
    // advantages and critic targets once per batch.
    std::vector<const Transition*> samples;
    std::vector<double> adv;
    std::vector<double> ret_r;
    std::vector<double> ret_c;
    std::vector<double> ep_signal, ep_values, ep_adv, ep_ret;
    std::vector<double> ep_cost_values, ep_cost_adv, ep_cost_ret;
    for (const Episode& ep : batch.episodes) {
      const int T = static_cast<int>(ep.steps.size());
      ep_values.resize(T);
      for (int t = 0; t < T; ++t)
        ep_values[t] = critic_value(reward_critic, ep.steps[t].obs);
      ep_signal.resize(T);
      for (int t = 0; t < T; ++t) {
        ep_signal[t] = algo == Algo::rcpo
                           ? ep.steps[t].reward - lambda * ep.steps[t].cost
                           : ep.steps[t].reward;
      }
      gae(ep_signal, ep_values, gamma, cfg.gae_lambda, ep_adv, ep_ret);
      if (cost_critic) {
        ep_cost_values.resize(T);
        for (int t = 0; t < T; ++t)
          ep_cost_values[t] = critic_value(*cost_critic, ep.steps[t].obs);
        ep_signal.resize(T);
        for (int t = 0; t < T; ++t) ep_signal[t] = ep.steps[t].cost;
        gae(ep_signal, ep_cost_values, gamma, cfg.gae_lambda, ep_cost_adv,
            ep_cost_ret);
      }
      for (int t = 0; t < T; ++t) {
        samples.push_back(&ep.steps[t]);
        const double a = cost_critic ? ep_adv[t] - lambda * ep_cost_adv[t]
                                     : ep_adv[t];
        adv.push_back(a);
        ret_r.push_back(ep_ret[t]);
        if (cost_critic) ret_c.push_back(ep_cost_ret[t]);
      }
    }
    center_and_scale(adv);

    const StochasticPolicy pre_update = policy;
    const int N = static_cast<int>(samples.size());
    std::vector<int> idx(N);
    std::iota(idx.begin(), idx.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      shuffle_indices(idx, shuffle_rng);
      for (int start = 0; start < N; start += cfg.minibatch) {
        const int stop = std::min(start + cfg.minibatch, N);
        const double inv_b = 1.0 / static_cast<double>(stop - start);
        MlpGradients pol_grad = policy.net().zero_gradients();
        MlpGradients critic_r_grad = reward_critic.zero_gradients();
        MlpGradients critic_c_grad =
            cost_critic ? cost_critic->zero_gradients() : MlpGradients{};
        for (int k = start; k < stop; ++k) {
          const int i = idx[k];
          const Transition& tr = *samples[i];
          const PolicyEval ev = policy.evaluate(tr.obs, tr.action);
          const double ratio = std::exp(ev.log_prob - tr.log_prob);
          const double a = adv[i];
          // The clipped branch of the surrogate has zero gradient once the
          // ratio leaves the trust band in the favoured direction.
          const bool active = a >= 0.0 ? ratio <= 1.0 + cfg.clip_ratio
                                       : ratio >= 1.0 - cfg.clip_ratio;
          const double d_logp = active ? -a * ratio * inv_b : 0.0;
          const double d_entropy = -cfg.entropy_coef * inv_b;
          pol_grad.add_scaled(policy.backward(ev, tr.action, d_logp, d_entropy),
                              1.0);

          MlpTrace trace_r = reward_critic.trace(tr.obs);
          const double dv_r = (trace_r.output[0] - ret_r[i]) * inv_b;
          critic_r_grad.add_scaled(
              reward_critic.backward(trace_r, std::vector<double>{dv_r}), 1.0);
          if (cost_critic) {
            MlpTrace trace_c = cost_critic->trace(tr.obs);
            const double dv_c = (trace_c.output[0] - ret_c[i]) * inv_b;
            critic_c_grad.add_scaled(
                cost_critic->backward(trace_c, std::vector<double>{dv_c}), 1.0);
          }
        }
        if (!std::isfinite(pol_grad.max_abs()))
          throw std::runtime_error(
              "train_base: non-finite policy gradient at batch " +
              std::to_string(batch_index) + ", epoch " + std::to_string(epoch));
        policy.mutable_net().adam_step(pol_grad, policy_adam, cfg.lr);
        reward_critic.adam_step(critic_r_grad, critic_r_adam, cfg.lr);
        if (cost_critic)
          cost_critic->adam_step(critic_c_grad, critic_c_adam, cfg.lr);
      }
    }

    double kl = 0.0;
    {
      const int stride = std::max(1, N / 64);
      int count = 0;
      for (int i = 0; i < N; i += stride, ++count)
        kl += policy.kl_to(pre_update, samples[i]->obs);
      if (count > 0) kl /= count;
    }
    report.batches.push_back({batch_index, steps_done, batch.mean_reward,
                              batch.mean_cost, lambda, kl});

    const bool last_batch = steps_done >= cfg.total_steps;
    if (batch_index % cfg.eval_every == 0 || last_batch) {
      EvalStats es =
          evaluate_policy(env, policy, cfg.eval_episodes, EpisodeMode::normal,
                          substream_seed(seed, "ckpt-eval", batch_index));
      report.evals.push_back({batch_index, es.mean_reward, es.mean_cost, false});
      const bool feasible =
          kind == BaseKind::unsafe || es.mean_cost <= kappa;
      if (feasible) {
        // Reward ties are broken toward the kind's contract: the safe
        // learner keeps the checkpoint with more budget margin, the unsafe
        // one the checkpoint more clearly in violation.
        const bool better =
            !best || es.mean_reward > best->reward ||
            (es.mean_reward == best->reward &&
             (kind == BaseKind::safe ? es.mean_cost < best->cost
                                     : es.mean_cost > best->cost));
        if (better)
          best = Snapshot{policy, reward_critic, cost_critic, es.mean_reward,
                          es.mean_cost, batch_index};
      } else {
        best_infeasible_cost = std::min(best_infeasible_cost, es.mean_cost);
      }
    }
  }

  if (!best) throw InfeasibleTrainingError(best_infeasible_cost, kappa);

  report.selected_batch = best->batch;
  report.selected_reward = best->reward;
  report.selected_cost = best->cost;
  report.total_env_steps = steps_done;
  for (auto& ev : report.evals)
    if (ev.batch == best->batch) ev.selected = true;

  return TrainedAgent{std::move(best->policy), std::move(best->reward_critic),
                      std::move(best->cost_critic), std::move(report)};
}

void write_learning_curve_csv(const std::string& path,
                              const TrainReport& report) {
  std::ofstream out(path);
  if (!out)
    throw std::invalid_argument("write_learning_curve_csv: cannot open " +
                                path);
  std::map<int, const EvalPoint*> evals;
  for (const auto& ev : report.evals) evals[ev.batch] = &ev;
  out << "batch,env_steps,mean_reward,mean_cost,lambda,kl,eval_reward,"
         "eval_cost,selected\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (const auto& b : report.batches) {
    out << b.batch << ',' << b.env_steps << ',';
    put(b.mean_reward);
    out << ',';
    put(b.mean_cost);
    out << ',';
    put(b.lambda);
    out << ',';
    put(b.kl);
    out << ',';
    auto it = evals.find(b.batch);
    if (it != evals.end()) {
      put(it->second->mean_reward);
      out << ',';
      put(it->second->mean_cost);
      out << ',' << (it->second->selected ? 1 : 0);
    } else {
      out << ",,";
    }
    out << '\n';
  }
}

}  // namespace pnact
