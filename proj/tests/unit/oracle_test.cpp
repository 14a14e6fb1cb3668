#include <doctest.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "pnact/cmdp.hpp"
#include "pnact/env.hpp"
#include "pnact/oracle.hpp"

using namespace pnact;

namespace {

std::string fixture(const char* name) {
  return std::string(PNACT_FIXTURE_DIR) + "/" + name;
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("chain2: exact optima of both classes") {
  const Cmdp m = Cmdp::load(fixture("chain2.json"));
  const OptimalPair pair = enumerate_optima(m);
  CHECK(pair.safe_actions == std::vector<int>{0, 0});
  CHECK(pair.unsafe_actions == std::vector<int>{1, 0});
  CHECK(pair.v_r_safe == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(pair.v_c_safe == doctest::Approx(0.0));
  CHECK(pair.v_r_unsafe == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(pair.v_c_unsafe == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_FALSE(pair.unconstrained_max_is_safe);
}

TEST_CASE("chain2: backdoor table and certificate") {
  const Cmdp m = Cmdp::load(fixture("chain2.json"));
  const OptimalPair pair = enumerate_optima(m);
  const BCmdp b = duplicate_with_trigger(m);
  const std::vector<int> actions = construct_backdoor(b, pair);
  CHECK(actions == std::vector<int>{0, 0, 1, 0});

  const CertificateReport rep = certify(b, actions);
  CHECK(rep.v_r_normal == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(rep.v_c_normal == doctest::Approx(0.0));
  CHECK(rep.v_r_triggered == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(rep.v_c_triggered == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(rep.cost_exceeds_normal);
  CHECK(rep.cost_exceeds_kappa);
  CHECK(rep.reward_preserved);
  CHECK(rep.normal_within_kappa);
  CHECK(rep.i_e == 1);
  CHECK(rep.i_s == 1);

  const nlohmann::json j = rep.to_json();
  CHECK(j.at("I_E") == 1);
  CHECK(j.at("I_S") == 1);
  CHECK(j.at("start_values").contains("v_r_normal"));
  CHECK(j.at("conditions").contains("backdoor_cost_above_kappa"));
}

TEST_CASE("3x3 corridor: frozen optimum values") {
  // Unsafe optimum dashes the corridor: reward 1 + 0.9 * 6, cost 0.9 * 1.
  // Safe optimum detours along y = 0: reward -1 + 0.9 + 0.81 + 0.729 * 6,
  // cost 0.
  const Cmdp m = to_tabular(GridGoalConfig::corridor_3x3());
  const OptimalPair pair = enumerate_optima(m);
  CHECK(pair.v_r_unsafe == doctest::Approx(6.4).epsilon(1e-9));
  CHECK(pair.v_c_unsafe == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(pair.v_r_safe == doctest::Approx(5.084).epsilon(1e-9));
  CHECK(pair.v_c_safe == doctest::Approx(0.0));
  CHECK_FALSE(pair.unconstrained_max_is_safe);

  // Spot-check the action tables along each route.
  REQUIRE(pair.safe_actions.size() == 9);
  CHECK(pair.safe_actions[3] == 3);   // start (0,1) drops to the clean row
  CHECK(pair.safe_actions[0] == 0);   // (0,0) heads right
  CHECK(pair.safe_actions[1] == 0);   // (1,0) heads right
  CHECK(pair.safe_actions[2] == 1);   // (2,0) climbs into the goal
  CHECK(pair.unsafe_actions[3] == 0); // start dashes right
  CHECK(pair.unsafe_actions[4] == 0); // hazard cell keeps dashing
}

TEST_CASE("5x5 corridor: frozen optimum values") {
  // The straight dash costs gamma + gamma^2 + gamma^3; the best compliant
  // route clips exactly one hazard on its fourth step.
  const Cmdp m = to_tabular(GridGoalConfig::corridor_5x5());
  const OptimalPair pair = enumerate_optima(m);
  CHECK(pair.v_r_unsafe == doctest::Approx(7.084).epsilon(1e-9));
  CHECK(pair.v_c_unsafe == doctest::Approx(2.439).epsilon(1e-9));
  CHECK(pair.v_r_safe == doctest::Approx(5.63804).epsilon(1e-9));
  CHECK(pair.v_c_safe == doctest::Approx(0.729).epsilon(1e-9));
  CHECK_FALSE(pair.unconstrained_max_is_safe);
}

TEST_CASE("walk search agrees with exhaustive enumeration") {
  // Spreading a sliver of start mass forces the exhaustive path; the
  // trajectory search must reach the same optima on the point-mass version.
  const Cmdp m = to_tabular(GridGoalConfig::corridor_3x3());
  Cmdp spread = m;
  spread.initial_dist[3] = 1.0 - 1e-12;
  spread.initial_dist[4] = 1e-12;
  REQUIRE(spread.point_mass_start() == -1);

  const OptimalPair walk = enumerate_optima(m);
  const OptimalPair full = enumerate_optima(spread);
  CHECK(walk.v_r_safe == doctest::Approx(full.v_r_safe).epsilon(1e-6));
  CHECK(walk.v_c_safe == doctest::Approx(full.v_c_safe).epsilon(1e-6));
  CHECK(walk.v_r_unsafe == doctest::Approx(full.v_r_unsafe).epsilon(1e-6));
  CHECK(walk.v_c_unsafe == doctest::Approx(full.v_c_unsafe).epsilon(1e-6));
}

TEST_CASE("stochastic instance goes through exhaustive enumeration") {
  const Cmdp m = Cmdp::load(fixture("mc4.json"));
  const OptimalPair pair = enumerate_optima(m);
  // The all-risky table earns 1 per step: value 1 / (1 - 0.9).
  CHECK(pair.unsafe_actions == std::vector<int>{1, 1, 1, 1});
  CHECK(pair.v_r_unsafe == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(pair.v_c_unsafe == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(pair.v_c_safe <= m.kappa);
  CHECK(pair.v_r_safe >= doctest::Approx(5.0).epsilon(1e-9));
  CHECK(pair.v_r_safe <= pair.v_r_unsafe);
  CHECK_FALSE(pair.unconstrained_max_is_safe);

  // Brute-force cross-check of both argmaxes over all 16 tables.
  double best_safe = -1e300, best_unsafe = -1e300;
  for (int bits = 0; bits < 16; ++bits) {
    std::vector<int> acts(4);
    for (int s = 0; s < 4; ++s) acts[s] = (bits >> s) & 1;
    const ValuePair v = value_functions(m, policy_table(m, acts));
    const double vr = expected_value(m, v.v_r);
    const double vc = expected_value(m, v.v_c);
    if (vc <= m.kappa && vr > best_safe) best_safe = vr;
    if (vc > m.kappa && vr > best_unsafe) best_unsafe = vr;
  }
  CHECK(pair.v_r_safe == doctest::Approx(best_safe).epsilon(1e-12));
  CHECK(pair.v_r_unsafe == doctest::Approx(best_unsafe).epsilon(1e-12));
}

TEST_CASE("empty policy classes raise dedicated errors") {
  Cmdp m = Cmdp::load(fixture("chain2.json"));
  SUBCASE("every table violates the budget") {
    m.cost = {1.0, 1.0, 0.0, 0.0};  // both actions at the start state cost 1
    CHECK_THROWS_AS(enumerate_optima(m), InfeasibleSafeError);
  }
  SUBCASE("no table can violate the budget") {
    m.cost.assign(4, 0.0);
    CHECK_THROWS_AS(enumerate_optima(m), InfeasibleUnsafeError);
  }
}

TEST_CASE("a safe unconstrained maximum is flagged") {
  Cmdp m = Cmdp::load(fixture("chain2.json"));
  m.reward = {2.0, 1.0, 0.0, 0.0};  // now the cheap action also pays best
  const OptimalPair pair = enumerate_optima(m);
  CHECK(pair.unconstrained_max_is_safe);
  CHECK(pair.v_r_safe == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(pair.v_r_unsafe == doctest::Approx(2.0).epsilon(1e-12));

  // Certification is honest about the reward sacrifice.
  const BCmdp b = duplicate_with_trigger(m);
  const CertificateReport rep = certify(b, construct_backdoor(b, pair));
  CHECK(rep.i_e == 1);
  CHECK(rep.i_s == 0);
  CHECK_FALSE(rep.reward_preserved);
}

TEST_CASE("exhaustive enumeration refuses oversized instances") {
  // 8 states x 8 actions with uniform transitions: 8^8 tables is past the
  // guard, and the spread start keeps the walk search out of play.
  const int S = 8, A = 8;
  Cmdp m = Cmdp::zeros(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      for (int s2 = 0; s2 < S; ++s2) m.p(s, a, s2) = 1.0 / S;
  m.gamma = 0.9;
  m.kappa = 1.0;
  m.validate();
  CHECK_THROWS_AS(enumerate_optima(m), EnumerationLimitError);
}

TEST_CASE("walk search bails out instead of hanging on the big map") {
  // The 7x7 training map admits billions of distinct walks; the search must
  // give up with a clear error once its walk budget is spent.
  const Cmdp m = to_tabular(GridGoalConfig::default_map());
  CHECK_THROWS_AS(enumerate_optima(m), EnumerationLimitError);
}

TEST_CASE("certify demands start mass with a triggered twin") {
  const Cmdp m = Cmdp::load(fixture("chain2.json"));
  const OptimalPair pair = enumerate_optima(m);
  BCmdp b = duplicate_with_trigger(m);
  const std::vector<int> actions = construct_backdoor(b, pair);
  b.base.initial_dist = {0.0, 0.0, 1.0, 0.0};
  CHECK_THROWS_AS(certify(b, actions), std::invalid_argument);
}

}  // TEST_SUITE
