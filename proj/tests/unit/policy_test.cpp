#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include "pnact/policy.hpp"

using namespace pnact;

TEST_SUITE("policy") {

TEST_CASE("head decides the action space; linear is refused") {
  const StochasticPolicy disc(Mlp({4, 8, 3}, Head::softmax, 1));
  CHECK(disc.space().kind == ActionSpace::Kind::discrete);
  CHECK(disc.space().n == 3);
  const StochasticPolicy box(Mlp({4, 8, 2}, Head::squashed_gaussian, 1));
  CHECK(box.space().kind == ActionSpace::Kind::box);
  CHECK(box.space().n == 2);
  CHECK_THROWS_AS(StochasticPolicy(Mlp({4, 8, 1}, Head::linear, 1)),
                  std::invalid_argument);
}

TEST_CASE("create builds the right head per space") {
  const auto disc =
      StochasticPolicy::create(6, ActionSpace::discrete_space(4), {16}, 2);
  CHECK(disc.net().head() == Head::softmax);
  CHECK(disc.net().input_dim() == 6);
  CHECK(disc.net().output_dim() == 4);
  const auto box =
      StochasticPolicy::create(6, ActionSpace::box_space(2), {16}, 2);
  CHECK(box.net().head() == Head::squashed_gaussian);
  CHECK(box.net().output_dim() == 2);
}

TEST_CASE("discrete sampling tracks the softmax distribution") {
  const auto pol =
      StochasticPolicy::create(3, ActionSpace::discrete_space(3), {8}, 5);
  const std::vector<double> obs{0.2, -0.4, 0.6};
  const std::vector<double> probs = pol.net().forward(obs);

  Rng rng(77);
  std::vector<int> counts(3, 0);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const PolicySample s = pol.sample(obs, rng);
    REQUIRE(s.action.discrete >= 0);
    REQUIRE(s.action.discrete < 3);
    ++counts[s.action.discrete];
    CHECK(s.log_prob ==
          doctest::Approx(std::log(probs[s.action.discrete])).epsilon(1e-9));
  }
  for (int a = 0; a < 3; ++a) {
    const double freq = static_cast<double>(counts[a]) / n;
    // 5 sigma at n = 20000 is ~0.018 for p near 1/3.
    CHECK(freq == doctest::Approx(probs[a]).epsilon(0.25));
  }

  const Action g = pol.greedy(obs);
  int argmax = 0;
  for (int a = 1; a < 3; ++a)
    if (probs[a] > probs[argmax]) argmax = a;
  CHECK(g.discrete == argmax);
}

TEST_CASE("box sampling is gaussian around the squashed mean") {
  const auto pol =
      StochasticPolicy::create(3, ActionSpace::box_space(2), {8}, 9);
  const std::vector<double> obs{0.5, 0.1, -0.3};
  const std::vector<double> mean = pol.net().forward(obs);
  const Action g = pol.greedy(obs);
  REQUIRE(g.continuous.size() == 2);
  CHECK(g.continuous[0] == doctest::Approx(mean[0]));
  CHECK(g.continuous[1] == doctest::Approx(mean[1]));

  Rng rng(33);
  double acc0 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const PolicySample s = pol.sample(obs, rng);
    REQUIRE(s.action.continuous.size() == 2);
    acc0 += s.action.continuous[0];
    CHECK(s.log_prob == doctest::Approx(pol.log_prob(obs, s.action)).epsilon(1e-9));
  }
  const double sd = std::exp(pol.net().log_std()[0]);
  CHECK(std::abs(acc0 / n - mean[0]) < 5.0 * sd / std::sqrt(double(n)));
}

TEST_CASE("evaluate agrees with log_prob and carries entropy") {
  const auto pol =
      StochasticPolicy::create(3, ActionSpace::discrete_space(4), {8}, 3);
  const std::vector<double> obs{0.1, 0.2, 0.3};
  Action a;
  a.discrete = 2;
  const PolicyEval ev = pol.evaluate(obs, a);
  CHECK(ev.log_prob == doctest::Approx(pol.log_prob(obs, a)).epsilon(1e-12));
  // Entropy of a 4-way categorical is in [0, ln 4].
  CHECK(ev.entropy > 0.0);
  CHECK(ev.entropy <= std::log(4.0) + 1e-9);
  const MlpGradients g = pol.backward(ev, a, 1.0, 0.0);
  CHECK(std::isfinite(g.max_abs()));
  CHECK(g.max_abs() > 0.0);
}

TEST_CASE("policy-gradient direction raises the chosen action's probability") {
  auto pol = StochasticPolicy::create(3, ActionSpace::discrete_space(3), {8}, 21);
  const std::vector<double> obs{0.4, -0.2, 0.1};
  Action a;
  a.discrete = 1;
  const double before = pol.log_prob(obs, a);
  AdamState adam = pol.mutable_net().make_adam_state();
  for (int i = 0; i < 10; ++i) {
    const PolicyEval ev = pol.evaluate(obs, a);
    MlpGradients g = pol.backward(ev, a, 1.0, 0.0);
    g.scale(-1.0);  // ascend: adam minimizes
    pol.mutable_net().adam_step(g, adam, 0.05);
  }
  CHECK(pol.log_prob(obs, a) > before);
}

TEST_CASE("kl_to is zero against itself and positive against another net") {
  const auto p = StochasticPolicy::create(3, ActionSpace::discrete_space(3), {8}, 2);
  const auto q = StochasticPolicy::create(3, ActionSpace::discrete_space(3), {8}, 4);
  const std::vector<double> obs{0.3, 0.3, -0.1};
  CHECK(p.kl_to(p, obs) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p.kl_to(q, obs) > 0.0);

  const auto bp = StochasticPolicy::create(3, ActionSpace::box_space(2), {8}, 2);
  const auto bq = StochasticPolicy::create(3, ActionSpace::box_space(2), {8}, 4);
  CHECK(bp.kl_to(bp, obs) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(bp.kl_to(bq, obs) > 0.0);
}

TEST_CASE("checkpoints survive the disk round-trip") {
  const auto pol =
      StochasticPolicy::create(4, ActionSpace::discrete_space(3), {8, 8}, 6);
  const std::string path = "policy_test_tmp.json";
  pol.save(path);
  const StochasticPolicy back = StochasticPolicy::load(path);
  const std::vector<double> obs{0.1, 0.2, 0.3, 0.4};
  CHECK(pol.net().forward(obs) == back.net().forward(obs));
  CHECK(back.space().kind == ActionSpace::Kind::discrete);
  std::remove(path.c_str());
}

TEST_CASE("make_critic emits a scalar linear head") {
  const Mlp critic = make_critic(5, {16, 16}, 8);
  CHECK(critic.head() == Head::linear);
  CHECK(critic.input_dim() == 5);
  CHECK(critic.output_dim() == 1);
}

}  // TEST_SUITE
