#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pnact/attack.hpp"
#include "pnact/config.hpp"
#include "pnact/env.hpp"
#include "pnact/metrics.hpp"
#include "pnact/oracle.hpp"
#include "pnact/svg.hpp"
#include "pnact/trainer.hpp"

namespace {

using namespace pnact;
namespace fs = std::filesystem;

constexpr int kExitConfig = 2;
constexpr int kExitTraining = 3;
constexpr int kExitEvaluation = 4;

void emit_error(const std::string& stage, const std::string& message) {
  nlohmann::json j;
  j["error"] = {{"stage", stage}, {"message", message}};
  std::cerr << j.dump() << "\n";
}

// Maps exceptions to exit codes: bad inputs are config errors wherever they
// surface; an unsatisfiable training budget is a training failure; anything
// else takes the command's own failure code.
int run_mapped(int default_code, const std::string& stage,
               const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const InfeasibleTrainingError& e) {
    emit_error("training", e.what());
    return kExitTraining;
  } catch (const std::invalid_argument& e) {
    emit_error("config", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    emit_error(stage, e.what());
    return default_code;
  }
}

// Options shared by every subcommand, resolved with precedence
// flag > environment variable > config file > built-in default.
struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::string> output_flag;
  std::string map = "default";

  RunConfig resolve() const {
    RunConfig cfg =
        config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    const EnvOverrides env = read_env_overrides();
    if (env.seed) cfg.seed = *env.seed;
    if (env.output_dir) cfg.output_dir = *env.output_dir;
    if (seed_flag) cfg.seed = *seed_flag;
    if (output_flag) cfg.output_dir = *output_flag;
    cfg.validate();
    return cfg;
  }
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path,
                  "JSON run configuration (defaults apply when omitted)");
  cmd->add_option("--seed", opts.seed_flag, "Root seed (overrides PNACT_SEED)");
  cmd->add_option("--output-dir", opts.output_flag,
                  "Artifact directory (overrides PNACT_OUTPUT_DIR)");
  cmd->add_option("--map", opts.map,
                  "Grid map variant: default, corridor3 or corridor5 "
                  "(ignored for pointlite)")
      ->check(CLI::IsMember({"default", "corridor3", "corridor5"}));
}

GridGoalConfig grid_config_for(const std::string& map) {
  if (map == "corridor3") return GridGoalConfig::corridor_3x3();
  if (map == "corridor5") return GridGoalConfig::corridor_5x5();
  return GridGoalConfig::default_map();
}

std::unique_ptr<Env> build_env(const RunConfig& cfg, const std::string& map) {
  if (cfg.env == "gridgoal")
    return std::make_unique<GridGoalEnv>(grid_config_for(map));
  return std::make_unique<PointLiteEnv>(PointLiteConfig::default_map());
}

// Collects (name -> checksum) entries for the manifest as files are written.
class ArtifactSet {
 public:
  explicit ArtifactSet(std::string dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
  }

  const std::string& dir() const { return dir_; }

  std::string path(const std::string& name) const { return dir_ + "/" + name; }

  void add(const std::string& name,
           const std::function<void(const std::string&)>& writer) {
    const std::string p = path(name);
    writer(p);
    entries_[name] = hex64(file_checksum(p));
  }

  void add_json(const std::string& name, const nlohmann::json& j) {
    add(name, [&](const std::string& p) {
      std::ofstream out(p);
      if (!out) throw std::runtime_error("cannot open " + p);
      out << j.dump(2) << "\n";
      if (!out) throw std::runtime_error("write failed: " + p);
    });
  }

  // Merges into an existing manifest when it belongs to the same config and
  // seed, so multi-stage runs accumulate one artifact index.
  void finish(const nlohmann::json& config_json, std::uint64_t seed) const {
    std::map<std::string, std::string> merged = entries_;
    std::ifstream in(dir_ + "/manifest.json");
    if (in) {
      nlohmann::json old;
      try {
        in >> old;
        if (old.at("config_hash") == hex64(config_hash(config_json)) &&
            old.at("seed").get<std::uint64_t>() == seed) {
          for (const auto& item : old.at("artifacts").items())
            merged.emplace(item.key(), item.value().get<std::string>());
        }
      } catch (const nlohmann::json::exception&) {
        // Unreadable manifest: replace it with the current run's index.
      }
    }
    write_manifest(dir_, config_json, seed, merged);
  }

 private:
  std::string dir_;
  std::map<std::string, std::string> entries_;
};

nlohmann::json indicators_to_json(const IndicatorResult& ind) {
  return {{"cost_raised", ind.cost_raised},
          {"cost_over_budget", ind.cost_over_budget},
          {"reward_kept", ind.reward_kept},
          {"normal_within_budget", ind.normal_within_budget},
          {"I_E", ind.effective ? 1 : 0},
          {"I_S", ind.stealthy ? 1 : 0}};
}

void write_pnact_curve_csv(const std::string& path, const PnactReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  std::map<int, const PnactEvalPoint*> evals;
  for (const auto& ev : report.evals) evals[ev.batch] = &ev;
  out << "batch,env_steps,action_loss,reward_critic_loss,cost_critic_loss,"
         "combined,eval_normal_reward,eval_normal_cost,eval_backdoor_reward,"
         "eval_backdoor_cost,effective,stealthy,selected\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (const auto& b : report.batches) {
    out << b.batch << ',' << b.env_steps << ',';
    put(b.action_loss);
    out << ',';
    put(b.reward_critic_loss);
    out << ',';
    put(b.cost_critic_loss);
    out << ',';
    put(b.combined);
    out << ',';
    auto it = evals.find(b.batch);
    if (it != evals.end()) {
      const PnactEvalPoint& ev = *it->second;
      put(ev.normal_reward);
      out << ',';
      put(ev.normal_cost);
      out << ',';
      put(ev.backdoor_reward);
      out << ',';
      put(ev.backdoor_cost);
      out << ',' << (ev.effective ? 1 : 0) << ',' << (ev.stealthy ? 1 : 0)
          << ',' << (ev.selected ? 1 : 0);
    } else {
      out << ",,,,,,";
    }
    out << '\n';
  }
}

nlohmann::json eval_summary_json(const AttackEvalResult& res) {
  return {{"episodes", res.episodes.size()},
          {"normal",
           {{"episodes", res.normal_episodes},
            {"mean_reward", res.normal_reward},
            {"mean_cost", res.normal_cost}}},
          {"backdoor",
           {{"episodes", res.backdoor_episodes},
            {"mean_reward", res.backdoor_reward},
            {"mean_cost", res.backdoor_cost}}},
          {"indicators", indicators_to_json(res.indicators)}};
}

void write_eval_cost_chart(const std::string& path,
                           const AttackEvalResult& res, double kappa) {
  ChartSeries normal{"normal", {}, {}, ""};
  ChartSeries triggered{"triggered", {}, {}, ""};
  for (const auto& row : res.episodes) {
    ChartSeries& s = row.triggered ? triggered : normal;
    s.xs.push_back(row.episode);
    s.ys.push_back(row.cost);
  }
  ChartOptions opt;
  opt.title = "Episode cost by exposure";
  opt.x_label = "episode";
  opt.y_label = "cost";
  opt.hline = kappa;
  opt.hline_label = "budget";
  write_line_chart_svg(path, {normal, triggered}, opt);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Desk-scale laboratory for backdoor attacks on constrained "
      "reinforcement learning"};
  app.require_subcommand(1);
  int rc = 0;

  // --- train-base ---------------------------------------------------------
  CommonOpts base_opts;
  std::string base_kind;
  std::string base_algo;
  auto* cmd_base = app.add_subcommand(
      "train-base", "Train a safe or unsafe base policy");
  add_common(cmd_base, base_opts);
  cmd_base->add_option("--kind", base_kind, "safe or unsafe")
      ->required()
      ->check(CLI::IsMember({"safe", "unsafe"}));
  cmd_base->add_option("--algo", base_algo,
                       "Constrained learner for safe training "
                       "(ppo_lag or rcpo; overrides the config)");
  cmd_base->callback([&] {
    rc = run_mapped(kExitTraining, "training", [&] {
      RunConfig cfg = base_opts.resolve();
      if (!base_algo.empty()) cfg.ppo.algo = base_algo;
      cfg.validate();
      std::unique_ptr<Env> env = build_env(cfg, base_opts.map);
      const BaseKind kind =
          base_kind == "safe" ? BaseKind::safe : BaseKind::unsafe;
      TrainedAgent agent = train_base(*env, kind, cfg.ppo, cfg.seed);

      ArtifactSet artifacts(cfg.output_dir);
      const std::string prefix = "base_" + base_kind + "_";
      artifacts.add(prefix + "policy.json", [&](const std::string& p) {
        agent.policy.save(p);
      });
      artifacts.add(prefix + "critic_reward.json", [&](const std::string& p) {
        agent.reward_critic.save(p);
      });
      if (agent.cost_critic)
        artifacts.add(prefix + "critic_cost.json", [&](const std::string& p) {
          agent.cost_critic->save(p);
        });
      artifacts.add(prefix + "curve.csv", [&](const std::string& p) {
        write_learning_curve_csv(p, agent.report);
      });
      nlohmann::json summary = {
          {"kind", base_kind},
          {"algo", kind == BaseKind::unsafe ? "ppo" : cfg.ppo.algo},
          {"env", cfg.env},
          {"map", base_opts.map},
          {"selected_batch", agent.report.selected_batch},
          {"selected_reward", agent.report.selected_reward},
          {"selected_cost", agent.report.selected_cost},
          {"kappa", env->kappa()},
          {"total_env_steps", agent.report.total_env_steps}};
      artifacts.add_json(prefix + "summary.json", summary);
      artifacts.finish(cfg.to_json(), cfg.seed);
      std::cout << summary.dump(2) << "\n";
    });
  });

  // --- train-pnact --------------------------------------------------------
  CommonOpts pn_opts;
  std::string pn_experts = "oracle";
  std::string pn_safe_path, pn_unsafe_path;
  std::optional<int> pn_n;
  std::optional<std::string> pn_schedule;
  std::optional<long> pn_total_steps;
  auto* cmd_pn = app.add_subcommand(
      "train-pnact",
      "Distill a backdoored policy from safe and unsafe experts");
  add_common(cmd_pn, pn_opts);
  cmd_pn->add_option("--experts", pn_experts,
                     "oracle (exact tabular optima) or neural "
                     "(trained base policies)")
      ->check(CLI::IsMember({"oracle", "neural"}));
  cmd_pn->add_option("--safe-policy", pn_safe_path,
                     "Safe expert checkpoint (neural experts; defaults to "
                     "<output-dir>/base_safe_policy.json)");
  cmd_pn->add_option("--unsafe-policy", pn_unsafe_path,
                     "Unsafe expert checkpoint (neural experts; defaults to "
                     "<output-dir>/base_unsafe_policy.json)");
  cmd_pn->add_option("--n", pn_n, "Trigger every n-th episode");
  cmd_pn->add_option("--schedule", pn_schedule, "episode or step")
      ->check(CLI::IsMember({"episode", "step"}));
  cmd_pn->add_option("--total-steps", pn_total_steps,
                     "Distillation step budget");
  cmd_pn->callback([&] {
    rc = run_mapped(kExitTraining, "training", [&] {
      RunConfig cfg = pn_opts.resolve();
      if (pn_n) cfg.pnact.n = *pn_n;
      if (pn_schedule) cfg.pnact.schedule = schedule_from_string(*pn_schedule);
      if (pn_total_steps) cfg.pnact.total_steps = *pn_total_steps;
      cfg.validate();
      std::unique_ptr<Env> env = build_env(cfg, pn_opts.map);

      Expert safe_expert, unsafe_expert;
      nlohmann::json expert_desc;
      if (pn_experts == "oracle") {
        if (cfg.env != "gridgoal")
          throw std::invalid_argument(
              "oracle experts need the gridgoal environment");
        const Cmdp tab = to_tabular(grid_config_for(pn_opts.map));
        const OptimalPair pair = enumerate_optima(tab);
        safe_expert = expert_from_table(pair.safe_actions, tab.state_count);
        unsafe_expert = expert_from_table(pair.unsafe_actions, tab.state_count);
        expert_desc = {{"experts", "oracle"},
                       {"safe_value", {{"reward", pair.v_r_safe},
                                       {"cost", pair.v_c_safe}}},
                       {"unsafe_value", {{"reward", pair.v_r_unsafe},
                                         {"cost", pair.v_c_unsafe}}}};
      } else {
        const std::string safe_path =
            pn_safe_path.empty() ? cfg.output_dir + "/base_safe_policy.json"
                                 : pn_safe_path;
        const std::string unsafe_path =
            pn_unsafe_path.empty()
                ? cfg.output_dir + "/base_unsafe_policy.json"
                : pn_unsafe_path;
        safe_expert = expert_from_policy(StochasticPolicy::load(safe_path));
        unsafe_expert = expert_from_policy(StochasticPolicy::load(unsafe_path));
        expert_desc = {{"experts", "neural"},
                       {"safe_policy", safe_path},
                       {"unsafe_policy", unsafe_path}};
      }

      PnactAgent agent =
          train_pnact(*env, safe_expert, unsafe_expert, cfg.pnact, cfg.seed);

      ArtifactSet artifacts(cfg.output_dir);
      artifacts.add("pnact_policy.json", [&](const std::string& p) {
        agent.policy.save(p);
      });
      artifacts.add("pnact_critic_reward.json", [&](const std::string& p) {
        agent.reward_critic.save(p);
      });
      artifacts.add("pnact_critic_cost.json", [&](const std::string& p) {
        agent.cost_critic.save(p);
      });
      artifacts.add("pnact_curve.csv", [&](const std::string& p) {
        write_pnact_curve_csv(p, agent.report);
      });
      const PnactEvalPoint* selected = nullptr;
      for (const auto& ev : agent.report.evals)
        if (ev.selected) selected = &ev;
      nlohmann::json summary = {
          {"env", cfg.env},
          {"map", pn_opts.map},
          {"schedule", schedule_to_string(cfg.pnact.schedule)},
          {"n", cfg.pnact.n},
          {"experts", expert_desc},
          {"selected_batch", agent.report.selected_batch},
          {"total_env_steps", agent.report.total_env_steps}};
      if (selected)
        summary["selected_eval"] = {
            {"normal_reward", selected->normal_reward},
            {"normal_cost", selected->normal_cost},
            {"backdoor_reward", selected->backdoor_reward},
            {"backdoor_cost", selected->backdoor_cost},
            {"effective", selected->effective},
            {"stealthy", selected->stealthy}};
      artifacts.add_json("pnact_summary.json", summary);
      artifacts.finish(cfg.to_json(), cfg.seed);
      std::cout << summary.dump(2) << "\n";
    });
  });

  // --- eval ---------------------------------------------------------------
  CommonOpts ev_opts;
  std::string ev_policy_path;
  std::optional<int> ev_episodes;
  std::optional<int> ev_n;
  std::optional<std::string> ev_schedule;
  auto* cmd_eval = app.add_subcommand(
      "eval", "Evaluate a policy under the trigger schedule");
  add_common(cmd_eval, ev_opts);
  cmd_eval->add_option("--policy", ev_policy_path,
                       "Policy checkpoint (defaults to "
                       "<output-dir>/pnact_policy.json)");
  cmd_eval->add_option("--episodes", ev_episodes, "Evaluation episodes");
  cmd_eval->add_option("--n", ev_n, "Trigger every n-th episode");
  cmd_eval->add_option("--schedule", ev_schedule, "episode or step")
      ->check(CLI::IsMember({"episode", "step"}));
  cmd_eval->callback([&] {
    rc = run_mapped(kExitEvaluation, "evaluation", [&] {
      RunConfig cfg = ev_opts.resolve();
      if (ev_episodes) cfg.eval.episodes = *ev_episodes;
      if (ev_n) cfg.eval.n = *ev_n;
      if (ev_schedule) cfg.eval.schedule = schedule_from_string(*ev_schedule);
      cfg.validate();
      std::unique_ptr<Env> env = build_env(cfg, ev_opts.map);
      const std::string policy_path =
          ev_policy_path.empty() ? cfg.output_dir + "/pnact_policy.json"
                                 : ev_policy_path;
      const StochasticPolicy policy = StochasticPolicy::load(policy_path);
      const AttackEvalResult res =
          evaluate_attack(*env, policy, cfg.eval, cfg.seed);

      ArtifactSet artifacts(cfg.output_dir);
      artifacts.add("eval_episodes.csv", [&](const std::string& p) {
        write_episode_csv(p, res.episodes);
      });
      artifacts.add("eval_trajectory.csv", [&](const std::string& p) {
        write_trajectory_csv(p, res.trajectory);
      });
      artifacts.add("eval_costs.svg", [&](const std::string& p) {
        write_eval_cost_chart(p, res, env->kappa());
      });
      nlohmann::json summary = eval_summary_json(res);
      summary["policy"] = policy_path;
      summary["schedule"] = schedule_to_string(cfg.eval.schedule);
      summary["n"] = cfg.eval.n;
      artifacts.add_json("eval_summary.json", summary);
      artifacts.finish(cfg.to_json(), cfg.seed);
      std::cout << summary.dump(2) << "\n";
    });
  });

  // --- oracle -------------------------------------------------------------
  CommonOpts or_opts;
  auto* cmd_oracle = app.add_subcommand(
      "oracle",
      "Exact optima, backdoor construction and certificate on a grid map");
  add_common(cmd_oracle, or_opts);
  or_opts.map = "corridor5";
  cmd_oracle->callback([&] {
    rc = run_mapped(kExitEvaluation, "evaluation", [&] {
      RunConfig cfg = or_opts.resolve();
      if (cfg.env != "gridgoal")
        throw std::invalid_argument(
            "the oracle pipeline needs the gridgoal environment");
      const GridGoalConfig grid = grid_config_for(or_opts.map);
      const Cmdp tab = to_tabular(grid);
      const OptimalPair pair = enumerate_optima(tab);
      const BCmdp doubled = duplicate_with_trigger(tab);
      const std::vector<int> table = construct_backdoor(doubled, pair);
      const CertificateReport cert = certify(doubled, table);

      nlohmann::json report = {
          {"map", or_opts.map},
          {"states", tab.state_count},
          {"actions", tab.action_count},
          {"kappa", tab.kappa},
          {"gamma", tab.gamma},
          {"safe",
           {{"actions", pair.safe_actions},
            {"reward_value", pair.v_r_safe},
            {"cost_value", pair.v_c_safe}}},
          {"unsafe",
           {{"actions", pair.unsafe_actions},
            {"reward_value", pair.v_r_unsafe},
            {"cost_value", pair.v_c_unsafe}}},
          {"unconstrained_max_is_safe", pair.unconstrained_max_is_safe},
          {"backdoor_actions", table},
          {"certificate", cert.to_json()}};

      ArtifactSet artifacts(cfg.output_dir);
      artifacts.add_json("oracle_report.json", report);
      artifacts.finish(cfg.to_json(), cfg.seed);
      std::cout << report.dump(2) << "\n";
    });
  });

  // --- sweep --------------------------------------------------------------
  CommonOpts sw_opts;
  std::vector<int> sw_ns{5, 10, 25, 50};
  std::string sw_experts = "oracle";
  std::optional<long> sw_total_steps;
  auto* cmd_sweep = app.add_subcommand(
      "sweep", "Distill and evaluate across trigger intervals n");
  add_common(cmd_sweep, sw_opts);
  sw_opts.map = "corridor5";
  cmd_sweep->add_option("--ns", sw_ns, "Trigger intervals to sweep")
      ->delimiter(',');
  cmd_sweep->add_option("--experts", sw_experts, "oracle or neural")
      ->check(CLI::IsMember({"oracle", "neural"}));
  cmd_sweep->add_option("--total-steps", sw_total_steps,
                        "Distillation step budget per n");
  cmd_sweep->callback([&] {
    rc = run_mapped(kExitTraining, "training", [&] {
      RunConfig cfg = sw_opts.resolve();
      if (sw_total_steps) cfg.pnact.total_steps = *sw_total_steps;
      cfg.validate();
      if (sw_ns.empty())
        throw std::invalid_argument("sweep: --ns must name at least one n");

      Expert safe_expert, unsafe_expert;
      if (sw_experts == "oracle") {
        if (cfg.env != "gridgoal")
          throw std::invalid_argument(
              "oracle experts need the gridgoal environment");
        const Cmdp tab = to_tabular(grid_config_for(sw_opts.map));
        const OptimalPair pair = enumerate_optima(tab);
        safe_expert = expert_from_table(pair.safe_actions, tab.state_count);
        unsafe_expert = expert_from_table(pair.unsafe_actions, tab.state_count);
      } else {
        safe_expert = expert_from_policy(StochasticPolicy::load(
            cfg.output_dir + "/base_safe_policy.json"));
        unsafe_expert = expert_from_policy(StochasticPolicy::load(
            cfg.output_dir + "/base_unsafe_policy.json"));
      }

      std::vector<SweepRow> rows;
      for (int n : sw_ns) {
        PnactConfig pcfg = cfg.pnact;
        pcfg.n = n;
        std::unique_ptr<Env> env = build_env(cfg, sw_opts.map);
        PnactAgent agent = train_pnact(*env, safe_expert, unsafe_expert, pcfg,
                                       substream_seed(cfg.seed, "sweep", n));
        AttackEvalConfig ecfg = cfg.eval;
        ecfg.n = n;
        if (ecfg.episodes < 2 * n) ecfg.episodes = 2 * n;
        const AttackEvalResult res = evaluate_attack(
            *env, agent.policy, ecfg, substream_seed(cfg.seed, "sweep-eval", n));
        rows.push_back({n, res.normal_reward, res.normal_cost,
                        res.backdoor_reward, res.backdoor_cost,
                        res.indicators.effective ? 1 : 0,
                        res.indicators.stealthy ? 1 : 0});
      }

      ArtifactSet artifacts(cfg.output_dir);
      artifacts.add("sweep.csv", [&](const std::string& p) {
        write_sweep_csv(p, rows);
      });
      artifacts.add("sweep_costs.svg", [&](const std::string& p) {
        ChartSeries normal{"normal cost", {}, {}, ""};
        ChartSeries backdoor{"triggered cost", {}, {}, ""};
        for (const auto& r : rows) {
          normal.xs.push_back(r.n);
          normal.ys.push_back(r.normal_cost);
          backdoor.xs.push_back(r.n);
          backdoor.ys.push_back(r.backdoor_cost);
        }
        ChartOptions opt;
        opt.title = "Mean episode cost vs trigger interval";
        opt.x_label = "n (trigger every n-th episode)";
        opt.y_label = "cost";
        opt.hline = build_env(cfg, sw_opts.map)->kappa();
        opt.hline_label = "budget";
        write_line_chart_svg(p, {normal, backdoor}, opt);
      });
      artifacts.add("sweep_indicators.svg", [&](const std::string& p) {
        ChartSeries ie{"effective", {}, {}, ""};
        ChartSeries is{"stealthy", {}, {}, ""};
        for (const auto& r : rows) {
          ie.xs.push_back(r.n);
          ie.ys.push_back(r.i_e);
          is.xs.push_back(r.n);
          is.ys.push_back(r.i_s);
        }
        ChartOptions opt;
        opt.title = "Attack indicators vs trigger interval";
        opt.x_label = "n (trigger every n-th episode)";
        opt.y_label = "indicator";
        write_line_chart_svg(p, {ie, is}, opt);
      });
      nlohmann::json summary = nlohmann::json::array();
      for (const auto& r : rows)
        summary.push_back({{"n", r.n},
                           {"normal_reward", r.normal_reward},
                           {"normal_cost", r.normal_cost},
                           {"backdoor_reward", r.backdoor_reward},
                           {"backdoor_cost", r.backdoor_cost},
                           {"I_E", r.i_e},
                           {"I_S", r.i_s}});
      artifacts.add_json("sweep_summary.json", {{"rows", summary}});
      artifacts.finish(cfg.to_json(), cfg.seed);
      std::cout << nlohmann::json({{"rows", summary}}).dump(2) << "\n";
    });
  });

  // --- plot ---------------------------------------------------------------
  std::string plot_kind, plot_input, plot_output;
  std::optional<double> plot_hline;
  auto* cmd_plot = app.add_subcommand(
      "plot", "Render a chart from a previously written CSV");
  cmd_plot->add_option("--kind", plot_kind,
                       "base-curve, pnact-curve, sweep-costs or "
                       "sweep-indicators")
      ->required()
      ->check(CLI::IsMember(
          {"base-curve", "pnact-curve", "sweep-costs", "sweep-indicators"}));
  cmd_plot->add_option("--input", plot_input, "Source CSV")->required();
  cmd_plot->add_option("--output", plot_output, "Target SVG")->required();
  cmd_plot->add_option("--hline", plot_hline,
                       "Dashed horizontal reference line");
  cmd_plot->callback([&] {
    rc = run_mapped(kExitEvaluation, "evaluation", [&] {
      std::ifstream in(plot_input);
      if (!in)
        throw std::invalid_argument("plot: cannot open " + plot_input);
      std::string line;
      if (!std::getline(in, line))
        throw std::invalid_argument("plot: empty CSV " + plot_input);
      auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(s);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!s.empty() && s.back() == ',') cells.push_back("");
        return cells;
      };
      const std::vector<std::string> header = split(line);
      auto col = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
          if (header[i] == name) return i;
        throw std::invalid_argument("plot: column '" + name + "' missing in " +
                                    plot_input);
      };
      std::vector<std::vector<std::string>> rows;
      while (std::getline(in, line))
        if (!line.empty()) rows.push_back(split(line));

      auto numeric = [&](std::size_t c, const std::vector<std::string>& row) {
        return std::stod(row.at(c));
      };
      auto series_of = [&](const std::string& x_name,
                           const std::string& y_name, const std::string& label) {
        ChartSeries s{label, {}, {}, ""};
        const std::size_t xc = col(x_name), yc = col(y_name);
        for (const auto& row : rows) {
          if (yc < row.size() && !row[yc].empty()) {
            s.xs.push_back(numeric(xc, row));
            s.ys.push_back(numeric(yc, row));
          }
        }
        return s;
      };

      ChartOptions opt;
      opt.hline = plot_hline;
      if (plot_hline) opt.hline_label = "reference";
      std::vector<ChartSeries> series;
      if (plot_kind == "base-curve") {
        opt.title = "Base training";
        opt.x_label = "batch";
        opt.y_label = "mean episode value";
        series = {series_of("batch", "mean_reward", "reward"),
                  series_of("batch", "mean_cost", "cost"),
                  series_of("batch", "lambda", "lambda")};
      } else if (plot_kind == "pnact-curve") {
        opt.title = "Distillation losses";
        opt.x_label = "batch";
        opt.y_label = "loss";
        series = {series_of("batch", "action_loss", "action"),
                  series_of("batch", "combined", "combined")};
      } else if (plot_kind == "sweep-costs") {
        opt.title = "Mean episode cost vs trigger interval";
        opt.x_label = "n";
        opt.y_label = "cost";
        series = {series_of("n", "normal_cost", "normal"),
                  series_of("n", "backdoor_cost", "triggered")};
      } else {
        opt.title = "Attack indicators vs trigger interval";
        opt.x_label = "n";
        opt.y_label = "indicator";
        series = {series_of("n", "I_E", "effective"),
                  series_of("n", "I_S", "stealthy")};
      }
      write_line_chart_svg(plot_output, series, opt);
      std::cout << nlohmann::json({{"written", plot_output}}).dump(2) << "\n";
    });
  });

  // --- demo ---------------------------------------------------------------
  CommonOpts demo_opts;
  long demo_steps = 6000;
  auto* cmd_demo = app.add_subcommand(
      "demo",
      "End-to-end run on a small grid: exact optima, distillation, "
      "scheduled evaluation and certificate");
  add_common(cmd_demo, demo_opts);
  demo_opts.map = "corridor5";
  cmd_demo->add_option("--total-steps", demo_steps,
                       "Distillation step budget");
  cmd_demo->callback([&] {
    rc = run_mapped(kExitTraining, "training", [&] {
      RunConfig cfg = demo_opts.resolve();
      if (cfg.env != "gridgoal")
        throw std::invalid_argument("demo runs on the gridgoal environment");
      cfg.pnact.total_steps = demo_steps;
      cfg.validate();
      const GridGoalConfig grid = grid_config_for(demo_opts.map);
      GridGoalEnv env(grid);

      const Cmdp tab = to_tabular(grid);
      const OptimalPair pair = enumerate_optima(tab);
      const BCmdp doubled = duplicate_with_trigger(tab);
      const std::vector<int> oracle_table = construct_backdoor(doubled, pair);
      const CertificateReport oracle_cert = certify(doubled, oracle_table);

      PnactAgent agent = train_pnact(
          env, expert_from_table(pair.safe_actions, tab.state_count),
          expert_from_table(pair.unsafe_actions, tab.state_count), cfg.pnact,
          cfg.seed);

      const AttackEvalResult res =
          evaluate_attack(env, agent.policy, cfg.eval, cfg.seed);

      const std::vector<int> learned_table = grid_policy_table(
          env, agent.policy, substream_seed(cfg.seed, "readout", 0));
      const CertificateReport learned_cert = certify(doubled, learned_table);

      ArtifactSet artifacts(cfg.output_dir);
      artifacts.add("pnact_policy.json", [&](const std::string& p) {
        agent.policy.save(p);
      });
      artifacts.add("pnact_curve.csv", [&](const std::string& p) {
        write_pnact_curve_csv(p, agent.report);
      });
      artifacts.add("eval_episodes.csv", [&](const std::string& p) {
        write_episode_csv(p, res.episodes);
      });
      artifacts.add("eval_trajectory.csv", [&](const std::string& p) {
        write_trajectory_csv(p, res.trajectory);
      });
      artifacts.add("eval_costs.svg", [&](const std::string& p) {
        write_eval_cost_chart(p, res, env.kappa());
      });
      nlohmann::json oracle_report = {
          {"map", demo_opts.map},
          {"safe",
           {{"reward_value", pair.v_r_safe}, {"cost_value", pair.v_c_safe}}},
          {"unsafe",
           {{"reward_value", pair.v_r_unsafe},
            {"cost_value", pair.v_c_unsafe}}},
          {"certificate", oracle_cert.to_json()}};
      artifacts.add_json("oracle_report.json", oracle_report);
      artifacts.add_json("certificate_report.json",
                         {{"oracle_policy", oracle_cert.to_json()},
                          {"distilled_policy", learned_cert.to_json()}});
      nlohmann::json summary = {
          {"map", demo_opts.map},
          {"empirical", eval_summary_json(res)},
          {"oracle_certificate",
           {{"I_E", oracle_cert.i_e}, {"I_S", oracle_cert.i_s}}},
          {"distilled_certificate",
           {{"I_E", learned_cert.i_e}, {"I_S", learned_cert.i_s}}}};
      artifacts.add_json("demo_summary.json", summary);
      artifacts.finish(cfg.to_json(), cfg.seed);
      std::cout << summary.dump(2) << "\n";
    });
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int parse_rc = app.exit(e);
    if (parse_rc == 0) return 0;
    emit_error("config", e.what());
    return kExitConfig;
  }
  return rc;
}
