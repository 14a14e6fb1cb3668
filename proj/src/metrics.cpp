#include "pnact/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "pnact/rng.hpp"

namespace pnact {

IndicatorResult compute_indicators(const IndicatorInput& in) {
  IndicatorResult r;
  r.cost_raised = in.backdoor_cost > in.normal_cost;
  r.cost_over_budget = in.backdoor_cost > in.kappa;
  r.reward_kept = in.backdoor_reward >= in.normal_reward;
  r.normal_within_budget = in.normal_cost <= in.kappa;
  r.effective = r.cost_raised && r.cost_over_budget;
  r.stealthy = r.reward_kept && r.normal_within_budget;
  return r;
}

void AttackEvalConfig::validate() const {
  if (episodes <= 0)
    throw std::invalid_argument("AttackEvalConfig: episodes must be positive");
  if (n <= 1)
    throw std::invalid_argument(
        "AttackEvalConfig: n must exceed 1 so both modes occur");
  if (f < 0 || k < 0)
    throw std::invalid_argument("AttackEvalConfig: f and k must be >= 0");
  if (f > 0 && k > f)
    throw std::invalid_argument("AttackEvalConfig: k must not exceed f");
}

AttackEvalResult evaluate_attack(Env& env, const StochasticPolicy& policy,
                                 const AttackEvalConfig& cfg,
                                 std::uint64_t seed) {
  cfg.validate();
  AttackEvalResult out;
  Rng action_rng(substream_seed(seed, "attack-eval-actions", 0));
  Rng* rng = cfg.greedy ? nullptr : &action_rng;

  const long f = cfg.f > 0 ? cfg.f : static_cast<long>(cfg.n) * env.max_steps();
  const long k = cfg.k > 0 ? cfg.k : env.max_steps();
  long global_t = 0;

  for (int e = 0; e < cfg.episodes; ++e) {
    const std::uint64_t ep_seed = substream_seed(seed, "attack-eval-episode", e);
    EpisodeRow row;
    row.episode = e;
    if (cfg.schedule == AttackSchedule::episode) {
      const bool triggered = backdoor_episode(e, cfg.n);
      std::vector<TrajectoryStep> traj;
      EpisodeResult res = run_episode(
          env, policy, triggered ? EpisodeMode::backdoor : EpisodeMode::normal,
          ep_seed, rng, &traj);
      for (auto& st : traj) {
        st.t = static_cast<int>(global_t++);
        out.trajectory.push_back(st);
      }
      row.triggered = triggered ? 1 : 0;
      row.reward = res.reward_sum;
      row.cost = res.cost_sum;
      row.steps = res.steps;
    } else {
      int psi = attack_signal(global_t, f, k);
      Observation obs = env.reset(
          psi ? EpisodeMode::backdoor : EpisodeMode::normal, ep_seed);
      bool done = false;
      bool any_triggered = psi != 0;
      while (!done) {
        const std::vector<double> input = obs.policy_input();
        Action a = rng ? policy.sample(input, *rng).action
                       : policy.greedy(input);
        StepResult sr = env.step(a);
        out.trajectory.push_back({static_cast<int>(global_t), psi,
                                  format_action(a), sr.reward, sr.cost,
                                  obs.is_backdoor_flag});
        row.reward += sr.reward;
        row.cost += sr.cost;
        ++row.steps;
        ++global_t;
        done = sr.done;
        if (!done) {
          const int next_psi = attack_signal(global_t, f, k);
          if (next_psi != psi) {
            psi = next_psi;
            sr.obs = env.set_vase_mode(psi ? EpisodeMode::backdoor
                                           : EpisodeMode::normal);
          }
          any_triggered |= psi != 0;
        }
        obs = std::move(sr.obs);
      }
      row.triggered = any_triggered ? 1 : 0;
    }
    out.episodes.push_back(row);
  }

  for (const auto& row : out.episodes) {
    if (row.triggered) {
      ++out.backdoor_episodes;
      out.backdoor_reward += row.reward;
      out.backdoor_cost += row.cost;
    } else {
      ++out.normal_episodes;
      out.normal_reward += row.reward;
      out.normal_cost += row.cost;
    }
  }
  if (out.normal_episodes == 0 || out.backdoor_episodes == 0)
    throw std::invalid_argument(
        "evaluate_attack: schedule produced only one exposure mode over " +
        std::to_string(cfg.episodes) + " episodes; run more episodes");
  out.normal_reward /= out.normal_episodes;
  out.normal_cost /= out.normal_episodes;
  out.backdoor_reward /= out.backdoor_episodes;
  out.backdoor_cost /= out.backdoor_episodes;
  out.indicators = compute_indicators({out.normal_reward, out.normal_cost,
                                       out.backdoor_reward, out.backdoor_cost,
                                       env.kappa()});
  return out;
}

std::vector<int> grid_policy_table(GridGoalEnv& env,
                                   const StochasticPolicy& policy,
                                   std::uint64_t layout_seed) {
  if (policy.space().kind != ActionSpace::Kind::discrete)
    throw std::invalid_argument(
        "grid_policy_table: the policy must be discrete");
  const int g = env.config().grid_size;
  const int S = g * g;
  std::vector<int> table;
  table.reserve(2 * S);
  env.reset(EpisodeMode::normal, layout_seed);
  for (int y = 0; y < g; ++y)
    for (int x = 0; x < g; ++x)
      table.push_back(
          policy.greedy(env.observe_cell(x, y).policy_input()).discrete);
  env.set_vase_mode(EpisodeMode::backdoor);
  for (int y = 0; y < g; ++y)
    for (int x = 0; x < g; ++x)
      table.push_back(
          policy.greedy(env.observe_cell(x, y).policy_input()).discrete);
  return table;
}

void write_episode_csv(const std::string& path,
                       const std::vector<EpisodeRow>& rows) {
  std::ofstream out(path);
  if (!out)
    throw std::invalid_argument("write_episode_csv: cannot open " + path);
  out << "episode,triggered,reward,cost,steps\n";
  char buf[64];
  for (const auto& r : rows) {
    out << r.episode << ',' << r.triggered << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.reward);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.cost);
    out << buf << ',' << r.steps << '\n';
  }
}

void write_sweep_csv(const std::string& path,
                     const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out)
    throw std::invalid_argument("write_sweep_csv: cannot open " + path);
  out << "n,normal_reward,normal_cost,backdoor_reward,backdoor_cost,I_E,I_S\n";
  char buf[64];
  for (const auto& r : rows) {
    out << r.n << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.normal_reward);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.normal_cost);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.backdoor_reward);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.backdoor_cost);
    out << buf << ',' << r.i_e << ',' << r.i_s << '\n';
  }
}

}  // namespace pnact
