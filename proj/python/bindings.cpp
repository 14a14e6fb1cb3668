#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include <json.hpp>

#include "pnact/attack.hpp"
#include "pnact/cmdp.hpp"
#include "pnact/config.hpp"
#include "pnact/env.hpp"
#include "pnact/metrics.hpp"
#include "pnact/oracle.hpp"

namespace py = pybind11;

namespace {

pnact::Cmdp cmdp_of(const std::string& cmdp_json) {
  return pnact::Cmdp::from_json(nlohmann::json::parse(cmdp_json));
}

pnact::GridGoalConfig grid_config_of(const std::string& map) {
  if (map == "default") return pnact::GridGoalConfig::default_map();
  if (map == "corridor3") return pnact::GridGoalConfig::corridor_3x3();
  if (map == "corridor5") return pnact::GridGoalConfig::corridor_5x5();
  throw std::invalid_argument("unknown grid map '" + map + "'");
}

nlohmann::json pair_to_json(const pnact::OptimalPair& pair) {
  return {{"safe_actions", pair.safe_actions},
          {"unsafe_actions", pair.unsafe_actions},
          {"v_r_safe", pair.v_r_safe},
          {"v_c_safe", pair.v_c_safe},
          {"v_r_unsafe", pair.v_r_unsafe},
          {"v_c_unsafe", pair.v_c_unsafe},
          {"unconstrained_max_is_safe", pair.unconstrained_max_is_safe}};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Exact tabular core of the backdoor-attack laboratory: value solves, "
      "constrained optima, certification, and the loss/schedule primitives.";
  m.attr("__version__") = "0.1.0";

  // --- distributions -------------------------------------------------------
  m.def(
      "kl_divergence",
      [](const std::vector<double>& p, const std::vector<double>& q) {
        return pnact::kl_divergence(p, q);
      },
      py::arg("p"), py::arg("q"),
      "KL(p || q) for discrete distributions (q floored at 1e-8).");
  m.def(
      "gaussian_kl",
      [](const std::vector<double>& mean_p, const std::vector<double>& log_std_p,
         const std::vector<double>& mean_q,
         const std::vector<double>& log_std_q) {
        return pnact::gaussian_kl(mean_p, log_std_p, mean_q, log_std_q);
      },
      py::arg("mean_p"), py::arg("log_std_p"), py::arg("mean_q"),
      py::arg("log_std_q"),
      "KL between diagonal Gaussians, summed over dimensions.");

  // --- trigger schedule ----------------------------------------------------
  m.def("attack_signal", &pnact::attack_signal, py::arg("t"), py::arg("f"),
        py::arg("k"),
        "1 on the last k steps of every f-step window, else 0.");
  m.def("backdoor_episode", &pnact::backdoor_episode, py::arg("episode"),
        py::arg("n"), "True when the episode index runs triggered.");

  // --- losses --------------------------------------------------------------
  m.def(
      "action_loss_continuous",
      [](const std::vector<double>& mean, const std::vector<double>& positive,
         const std::vector<double>& negative, double lam, double margin) {
        return pnact::action_loss_continuous(mean, positive, negative, lam,
                                             margin);
      },
      py::arg("mean"), py::arg("positive"), py::arg("negative"),
      py::arg("lam"), py::arg("margin") = 4.0,
      "lam * MSE(mean, positive) - (1-lam) * min(MSE(mean, negative), "
      "margin).");
  m.def(
      "action_loss_discrete",
      [](const std::vector<double>& probs, int positive, int negative,
         double lam, double eps) {
        return pnact::action_loss_discrete(probs, positive, negative, lam,
                                           eps);
      },
      py::arg("probs"), py::arg("positive"), py::arg("negative"),
      py::arg("lam"), py::arg("eps") = 1e-6,
      "Cross-entropy pull toward the positive action minus a weighted pull "
      "away from the negative one.");
  m.def("critic_td_loss", &pnact::critic_td_loss, py::arg("v"),
        py::arg("signal"), py::arg("v_next"), py::arg("terminal"),
        py::arg("gamma"),
        "Squared one-step temporal-difference error with a constant target.");
  m.def("combined_loss", &pnact::combined_loss, py::arg("alpha"),
        py::arg("action"), py::arg("beta"), py::arg("reward_critic"),
        py::arg("mu"), py::arg("cost_critic"),
        "alpha*action + beta*reward_critic + mu*cost_critic; raises on "
        "non-finite terms.");

  // --- indicators ----------------------------------------------------------
  m.def(
      "compute_indicators",
      [](double normal_reward, double normal_cost, double backdoor_reward,
         double backdoor_cost, double kappa) {
        pnact::IndicatorInput in;
        in.normal_reward = normal_reward;
        in.normal_cost = normal_cost;
        in.backdoor_reward = backdoor_reward;
        in.backdoor_cost = backdoor_cost;
        in.kappa = kappa;
        const pnact::IndicatorResult r = pnact::compute_indicators(in);
        py::dict d;
        d["cost_raised"] = r.cost_raised;
        d["cost_over_budget"] = r.cost_over_budget;
        d["reward_kept"] = r.reward_kept;
        d["normal_within_budget"] = r.normal_within_budget;
        d["effective"] = r.effective;
        d["stealthy"] = r.stealthy;
        return d;
      },
      py::arg("normal_reward"), py::arg("normal_cost"),
      py::arg("backdoor_reward"), py::arg("backdoor_cost"), py::arg("kappa"),
      "Effectiveness and stealthiness indicators from mean episode "
      "statistics (exact comparisons).");

  // --- tabular core (JSON-string boundary; the package wraps these with "
  // --- dicts) --------------------------------------------------------------
  m.def(
      "value_functions_json",
      [](const std::string& cmdp_json, const std::vector<double>& policy) {
        const pnact::Cmdp c = cmdp_of(cmdp_json);
        const pnact::ValuePair v = pnact::value_functions(c, policy);
        return py::make_tuple(v.v_r, v.v_c);
      },
      py::arg("cmdp_json"), py::arg("policy"),
      "Discounted reward/cost state values of a stochastic policy "
      "(policy[s*A + a] = pi(a|s)).");
  m.def(
      "expected_value_json",
      [](const std::string& cmdp_json, const std::vector<double>& v) {
        const pnact::Cmdp c = cmdp_of(cmdp_json);
        return pnact::expected_value(c, v);
      },
      py::arg("cmdp_json"), py::arg("v"),
      "Start-distribution-weighted expectation of a state-value vector.");
  m.def(
      "optimal_pair_json",
      [](const std::string& cmdp_json) {
        const pnact::Cmdp c = cmdp_of(cmdp_json);
        return pair_to_json(pnact::enumerate_optima(c)).dump();
      },
      py::arg("cmdp_json"),
      "Exact best safe (cost <= kappa) and unsafe (cost > kappa) "
      "deterministic policies, as a JSON report.");
  m.def(
      "certificate_json",
      [](const std::string& cmdp_json) {
        const pnact::Cmdp c = cmdp_of(cmdp_json);
        const pnact::OptimalPair pair = pnact::enumerate_optima(c);
        const pnact::BCmdp doubled = pnact::duplicate_with_trigger(c);
        const std::vector<int> table =
            pnact::construct_backdoor(doubled, pair);
        nlohmann::json out = {
            {"pair", pair_to_json(pair)},
            {"backdoor_actions", table},
            {"certificate", pnact::certify(doubled, table).to_json()}};
        return out.dump();
      },
      py::arg("cmdp_json"),
      "Full exact pipeline on one task: optima, backdoor table on the "
      "two-copy instance, and its certificate, as a JSON report.");
  m.def(
      "certify_actions_json",
      [](const std::string& cmdp_json, const std::vector<int>& actions) {
        const pnact::Cmdp c = cmdp_of(cmdp_json);
        const pnact::BCmdp doubled = pnact::duplicate_with_trigger(c);
        return pnact::certify(doubled, actions).to_json().dump();
      },
      py::arg("cmdp_json"), py::arg("actions"),
      "Certificate for a caller-supplied action table on the two-copy "
      "instance (length S or 2S), as a JSON report.");
  m.def(
      "grid_tabular_json",
      [](const std::string& map) {
        return pnact::to_tabular(grid_config_of(map)).to_json().dump();
      },
      py::arg("map") = "corridor5",
      "Tabular image of a built-in grid map ('default', 'corridor3' or "
      "'corridor5'), as JSON.");

  // --- manifests -----------------------------------------------------------
  m.def(
      "config_hash",
      [](const std::string& config_json) {
        return pnact::hex64(
            pnact::config_hash(nlohmann::json::parse(config_json)));
      },
      py::arg("config_json"),
      "Hex hash of a config's canonical JSON dump, as used in manifests.");
}
