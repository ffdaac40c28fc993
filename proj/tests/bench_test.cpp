#include <gtest/gtest.h>

#include <cmath>

#include "bbandit/bench.hpp"

using namespace bbandit;

namespace {

// Posterior mean after k readings of a2 from the three models, by direct Bayes.
double chain_posterior_mean(int n, int k) {
  const double q = 1.0 / std::sqrt(double(n)), a2 = std::pow(double(n), -9.0);
  const double prior[] = {1.0 - q, q * (1.0 - q), q * q};
  const double like[] = {k == 0 ? 1.0 : 0.0, 1.0, std::pow(1.0 - q, k)};
  const double mean[] = {0.0, a2, q + (1.0 - q) * a2};
  double num = 0.0, den = 0.0;
  for (int m = 0; m < 3; ++m) {
    num += prior[m] * like[m] * mean[m];
    den += prior[m] * like[m];
  }
  return num / den;
}

std::size_t find_state(const ArmStateSpace& arm, const std::string& id) {
  for (std::size_t u = 0; u < arm.size(); ++u)
    if (arm.state(u).id == id) return u;
  return arm.size();
}

// Uniform allocation: arm i ends at R3 w.p. h, at a2^5 w.p. s, at R1 otherwise.
double uniform_allocation_exact(int n) {
  const double q = 1.0 / std::sqrt(double(n)), a2 = std::pow(double(n), -9.0);
  const double good = q + (1.0 - q) * a2;
  const double h = q * q * (1.0 - std::pow(1.0 - q, 5));
  const double s = q * (1.0 - q) + q * q * std::pow(1.0 - q, 5);
  return good * (1.0 - std::pow(1.0 - h, n)) +
         chain_posterior_mean(n, 5) * (std::pow(1.0 - h, n) - std::pow(1.0 - h - s, n));
}

}  // namespace

TEST(Families, IntegralityGap) {
  auto inst = gen_integrality_gap(5);
  EXPECT_EQ(inst.arms.size(), 5u);
  EXPECT_EQ(inst.budget, 5.0);
  for (const auto& a : inst.arms) {
    EXPECT_NEAR(a.root_state().reward, 0.2, 1e-15);
    EXPECT_EQ(a.root_state().play_cost, 1.0);
  }
  EXPECT_TRUE(validate_instance(inst).empty());
  EXPECT_THROW(gen_integrality_gap(0), ValidationError);
}

TEST(Families, AdaptivityGapArguments) {
  EXPECT_THROW(gen_adaptivity_gap(15), ValidationError);
  EXPECT_THROW(gen_adaptivity_gap(1), ValidationError);
  EXPECT_THROW(gen_adaptivity_gap(1024), ValidationError);
  EXPECT_NO_THROW(adaptivity_gap_params(900));
  auto p = adaptivity_gap_params(16);
  EXPECT_EQ(p.q, 0.25);
  EXPECT_NEAR(p.a2, std::pow(16.0, -9.0), 1e-30);
}

TEST(Families, AdaptivityGapBeliefs) {
  for (int n : {4, 16, 64}) {
    auto inst = gen_adaptivity_gap(n);
    EXPECT_EQ(inst.arms.size(), std::size_t(n));
    EXPECT_EQ(inst.budget, 5.0 * n);
    EXPECT_TRUE(validate_instance(inst).empty()) << n;
    const auto& arm = inst.arms[0];
    EXPECT_NEAR(arm.root_state().reward, chain_posterior_mean(n, 0), 1e-15);
    for (int k : {1, 2, 5, 5 * n}) {
      auto u = find_state(arm, "a2^" + std::to_string(k));
      ASSERT_LT(u, arm.size());
      EXPECT_NEAR(arm.state(u).reward, chain_posterior_mean(n, k), 1e-12 * chain_posterior_mean(n, k)) << n << " " << k;
    }
    const double q = 1.0 / std::sqrt(double(n));
    const auto& root = arm.root_state();
    for (const auto& t : root.transitions) {
      const auto& id = arm.state(t.target).id;
      if (id == "R1") {
        EXPECT_NEAR(t.prob, 1.0 - q, 1e-15);
      } else if (id == "R3") {
        EXPECT_NEAR(t.prob, q * q * q, 1e-15);
      }
    }
  }
}

TEST(AdaptivityDemo, UniformAllocationMatchesClosedForm) {
  for (int n : {16, 64}) {
    auto row = adaptivity_demo(n, 20000, 5);
    EXPECT_NEAR(row.uniform, uniform_allocation_exact(n), 4.0 * row.uniform_se + 1e-12) << n;
    EXPECT_GT(row.ratio, 1.0) << n;
  }
}

TEST(AdaptivityDemo, Deterministic) {
  auto a = adaptivity_demo(16, 500, 9), b = adaptivity_demo(16, 500, 9);
  EXPECT_EQ(a.adaptive, b.adaptive);
  EXPECT_EQ(a.uniform, b.uniform);
}

TEST(AdaptivityDemo, AdaptiveRunStaysInBudget) {
  auto inst = gen_adaptivity_gap(16);
  // with every arm a long a2 chain, the run plays n + 2 sqrt(n) * 2 sqrt(n) = 5n times at most
  int plays = 16 + 8 * 8;
  EXPECT_LE(plays, inst.budget);
  RngStream rng(1, 0);
  const double v = adaptive_two_phase_run(inst, rng);
  EXPECT_GE(v, 0.0);
  EXPECT_LE(v, adaptivity_gap_params(16).good_mean + 1e-15);
}

TEST(RandomSuite, DeterministicInSeed) {
  GeneratorSpec g;
  g.count = 12;
  g.seed = 42;
  g.family = Family::random_mixed;
  auto a = gen_random_suite(g), b = gen_random_suite(g);
  ASSERT_EQ(a.size(), 12u);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].id, b[k].id);
    EXPECT_EQ(a[k].instance.budget, b[k].instance.budget);
    ASSERT_EQ(a[k].instance.arms.size(), b[k].instance.arms.size());
    for (std::size_t i = 0; i < a[k].instance.arms.size(); ++i) EXPECT_TRUE(a[k].instance.arms[i] == b[k].instance.arms[i]);
  }
  g.seed = 43;
  auto c = gen_random_suite(g);
  bool differs = false;
  for (std::size_t k = 0; k < a.size(); ++k)
    differs = differs || a[k].instance.budget != c[k].instance.budget ||
              a[k].instance.arms.size() != c[k].instance.arms.size() || !(a[k].instance.arms[0] == c[k].instance.arms[0]);
  EXPECT_TRUE(differs);
}

TEST(RandomSuite, RespectsRanges) {
  GeneratorSpec g;
  g.count = 40;
  g.seed = 7;
  g.min_arms = 2;
  g.max_arms = 4;
  for (auto fam : {Family::random_two_level, Family::random_beta}) {
    g.family = fam;
    for (const auto& si : gen_random_suite(g)) {
      const auto& inst = si.instance;
      EXPECT_TRUE(validate_instance(inst).empty()) << si.id;
      EXPECT_GE(inst.arms.size(), 2u);
      EXPECT_LE(inst.arms.size(), 4u);
      EXPECT_LE(inst.budget, g.budget_cap);
      EXPECT_EQ(inst.budget, std::floor(inst.budget));
      double cheapest = lp_infinity;
      for (const auto& a : inst.arms) {
        cheapest = std::min(cheapest, a.first_play_cost());
        EXPECT_EQ(a.switch_cost(), std::floor(a.switch_cost()));
        EXPECT_GE(a.switch_cost(), 0.0);
        EXPECT_LE(a.switch_cost(), 1.0);
        if (fam == Family::random_two_level) {
          EXPECT_TRUE(is_two_level(BanditInstance{{a}, 1.0, {}}));
        }
      }
      EXPECT_GE(inst.budget, std::min(cheapest, g.budget_cap));
      EXPECT_LE(estimate_joint_states(inst), g.oracle_limit);
    }
  }
}

TEST(RandomSuite, ObjectiveVariants) {
  GeneratorSpec g;
  g.count = 5;
  g.objective = ObjectiveKind::lagrangean;
  g.integer_costs = false;
  g.min_cost = 0.05;
  g.max_cost = 0.3;
  g.max_switch = 0.1;
  for (const auto& si : gen_random_suite(g)) {
    EXPECT_EQ(si.instance.objective.kind, ObjectiveKind::lagrangean);
    for (const auto& a : si.instance.arms) {
      EXPECT_GE(a.root_state().play_cost, 0.05);
      EXPECT_LE(a.root_state().play_cost, 0.3);
    }
  }
  g = {};
  g.objective = ObjectiveKind::concave;
  g.capacity = 2;
  for (const auto& si : gen_random_suite(g)) {
    EXPECT_EQ(si.instance.objective.concave.sigmas.size(), si.instance.arms.size());
    EXPECT_EQ(si.instance.objective.concave.capacity, 2.0);
    EXPECT_TRUE(validate_instance(si.instance).empty());
  }
}

TEST(RandomSuite, FixedFamiliesAndErrors) {
  GeneratorSpec g;
  g.family = Family::integrality_gap;
  g.n = 8;
  auto s = gen_random_suite(g);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].id, "integrality-gap-8");
  g.family = Family::random_two_level;
  g.max_arms = 1;
  EXPECT_THROW(gen_random_suite(g), ValidationError);
  EXPECT_EQ(family_from_string("random-beta"), Family::random_beta);
  EXPECT_THROW(family_from_string("nope"), ValidationError);
  EXPECT_EQ(guarantee_from_string("bicriteria"), Guarantee::bicriteria);
}

TEST(GuaranteeSuite, RequiredFractions) {
  EXPECT_EQ(required_fraction(Guarantee::greedy_order, 1, 0.25), 0.25);
  EXPECT_EQ(required_fraction(Guarantee::bicriteria, 1, 0.25), 0.25);
  EXPECT_NEAR(required_fraction(Guarantee::bicriteria, 4, 0.25), 0.4, 1e-15);
  EXPECT_EQ(required_fraction(Guarantee::lagrangean, 1, 0.25), 0.5);
  EXPECT_NEAR(required_fraction(Guarantee::concave, 1, 0.2), 0.1, 1e-15);
  EXPECT_NEAR(required_fraction(Guarantee::nonadaptive, 1, 0.2), 1.0 / 7.0, 1e-15);
}

TEST(GuaranteeSuite, GreedyOrderSmallSuite) {
  GeneratorSpec g;
  g.count = 15;
  g.seed = 3;
  g.family = Family::random_mixed;
  SuiteOptions opt;
  opt.reps = 200;
  auto rep = run_guarantee_suite(gen_random_suite(g), opt);
  ASSERT_EQ(rep.rows.size(), 15u);
  EXPECT_TRUE(rep.passed());
  EXPECT_GE(rep.min_ratio_gamma, 0.25 - 1e-9);
  ASSERT_TRUE(rep.min_ratio_opt.has_value());
  for (const auto& r : rep.rows) {
    ASSERT_TRUE(r.opt.has_value());
    EXPECT_LE(*r.opt, r.gamma_star + 1e-6);
    EXPECT_LE(r.value, *r.opt + 1e-9);
  }
}

TEST(GuaranteeSuite, GapInstanceRow) {
  SuiteOptions opt;
  auto rep = run_guarantee_suite({{"gap4", gen_integrality_gap(4)}}, opt);
  ASSERT_EQ(rep.rows.size(), 1u);
  const auto& r = rep.rows[0];
  EXPECT_NEAR(r.gamma_star, 1.0, 1e-9);
  EXPECT_NEAR(*r.opt, 175.0 / 256.0, 1e-12);
  EXPECT_NEAR(r.value, 175.0 / 256.0, 1e-9);
  EXPECT_TRUE(r.ok());
}

TEST(GuaranteeSuite, OtherGuarantees) {
  GeneratorSpec g;
  g.count = 8;
  g.seed = 11;
  SuiteOptions opt;
  opt.guarantee = Guarantee::bicriteria;
  opt.alpha = 2;
  EXPECT_TRUE(run_guarantee_suite(gen_random_suite(g), opt).passed());
  opt.guarantee = Guarantee::nonadaptive;
  opt.alpha = 1;
  auto rep = run_guarantee_suite(gen_random_suite(g), opt);
  EXPECT_TRUE(rep.passed());
  EXPECT_GE(rep.min_ratio_gamma, 1.0 / 7.0 - 1e-9);

  GeneratorSpec lg = g;
  lg.objective = ObjectiveKind::lagrangean;
  lg.integer_costs = false;
  lg.min_cost = 0.05;
  lg.max_cost = 0.3;
  lg.max_switch = 0.1;
  opt.guarantee = Guarantee::lagrangean;
  EXPECT_TRUE(run_guarantee_suite(gen_random_suite(lg), opt).passed());

  GeneratorSpec cg = g;
  cg.objective = ObjectiveKind::concave;
  opt.guarantee = Guarantee::concave;
  opt.reps = 2000;
  auto crep = run_guarantee_suite(gen_random_suite(cg), opt);
  EXPECT_TRUE(crep.passed());
  EXPECT_FALSE(crep.min_ratio_opt.has_value());
}

TEST(RandomSuite, RewardPowerSkewsLeaves) {
  GeneratorSpec g;
  g.count = 30;
  g.seed = 5;
  auto mean_root = [&] {
    double s = 0.0, k = 0.0;
    for (const auto& si : gen_random_suite(g))
      for (const auto& a : si.instance.arms) {
        s += a.root_state().reward;
        k += 1.0;
      }
    return s / k;
  };
  const double plain = mean_root();
  g.reward_power = 4;
  const double skewed = mean_root();
  // E[u^4] = 1/5 against E[u] = 1/2
  EXPECT_NEAR(plain, 0.5, 0.1);
  EXPECT_NEAR(skewed, 0.2, 0.08);
  for (const auto& si : gen_random_suite(g)) EXPECT_TRUE(validate_instance(si.instance).empty());
  g.reward_power = 0;
  EXPECT_THROW(gen_random_suite(g), ValidationError);
}
