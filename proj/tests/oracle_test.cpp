#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bbandit/oracle.hpp"
#include "test_support.hpp"

using namespace bbandit;
using bbandit::testing::coin_arms;
using bbandit::testing::gap_instance;
using bbandit::testing::random_instance;

namespace {

// Plain recursion over the full joint state, no memo and no symmetry reduction.
double naive_opt(const BanditInstance& inst, std::vector<std::size_t> states, double remaining, int last) {
  double best = 0.0;
  for (std::size_t i = 0; i < inst.arms.size(); ++i) best = std::max(best, inst.arms[i].state(states[i]).reward);
  const bool lag = inst.objective.kind == ObjectiveKind::lagrangean;
  for (std::size_t i = 0; i < inst.arms.size(); ++i) {
    const auto& s = inst.arms[i].state(states[i]);
    if (s.is_leaf()) continue;
    const double charge = s.play_cost + (last == int(i) ? 0.0 : inst.arms[i].switch_cost());
    if (!lag && charge > remaining) continue;
    double q = lag ? -charge : 0.0;
    for (const auto& t : s.transitions) {
      auto next = states;
      next[i] = t.target;
      q += t.prob * naive_opt(inst, next, remaining - charge, int(i));
    }
    best = std::max(best, q);
  }
  return best;
}

double naive_opt(const BanditInstance& inst) {
  std::vector<std::size_t> roots;
  for (const auto& a : inst.arms) roots.push_back(a.root());
  return naive_opt(inst, roots, inst.budget, -1);
}

// Single-arm optimal stopping by trying every deterministic play/stop rule.
double best_stopping_rule(const ArmStateSpace& arm) {
  std::vector<std::size_t> internal;
  for (std::size_t u = 0; u < arm.size(); ++u)
    if (!arm.state(u).is_leaf()) internal.push_back(u);
  double best = -1e300;
  for (std::uint64_t mask = 0; mask < (1ULL << internal.size()); ++mask) {
    std::vector<bool> play(arm.size(), false);
    for (std::size_t k = 0; k < internal.size(); ++k) play[internal[k]] = (mask >> k) & 1;
    std::function<double(std::size_t, bool)> val = [&](std::size_t u, bool first) -> double {
      const auto& s = arm.state(u);
      if (!play[u]) return s.reward;
      double v = -(s.play_cost + (first ? arm.switch_cost() : 0.0));
      for (const auto& t : s.transitions) v += t.prob * val(t.target, false);
      return v;
    };
    best = std::max(best, val(arm.root(), true));
  }
  return best;
}

}  // namespace

TEST(DpOptimal, GapInstanceClosedForm) {
  for (int n : {1, 2, 4, 8, 16}) {
    auto r = dp_optimal(gap_instance(n));
    EXPECT_NEAR(r.opt, 1.0 - std::pow(1.0 - 1.0 / n, n), 1e-9) << n;
  }
  EXPECT_NEAR(dp_optimal(gap_instance(2)).opt, 0.75, 1e-12);
  EXPECT_NEAR(dp_optimal(gap_instance(4)).opt, 175.0 / 256.0, 1e-12);
}

TEST(DpOptimal, ZeroBudget) {
  std::mt19937_64 rng(3);
  auto inst = random_instance(rng);
  inst.budget = 0;
  double best = 0.0;
  for (const auto& a : inst.arms) best = std::max(best, a.root_state().reward);
  // switch plus play costs are at least 1, so nothing can be played
  EXPECT_NEAR(dp_optimal(inst).opt, best, 1e-12);
}

TEST(DpOptimal, MatchesPlainRecursion) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    auto inst = random_instance(rng, 3, 2, 4);
    EXPECT_NEAR(dp_optimal(inst).opt, naive_opt(inst), 1e-12) << trial;
  }
  // identical arms exercise the symmetry reduction, switch costs the last-arm encoding
  BanditInstance twins;
  for (int i = 0; i < 3; ++i) twins.arms.push_back(build_beta_bernoulli_arm("t" + std::to_string(i), 1, 1, 2, 1.0, 1.0));
  twins.budget = 5;
  EXPECT_NEAR(dp_optimal(twins).opt, naive_opt(twins), 1e-12);
}

TEST(DpOptimal, MonotoneInBudget) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = random_instance(rng);
    double prev = -1.0;
    for (int c = 0; c <= 6; ++c) {
      inst.budget = c;
      const double v = dp_optimal(inst).opt;
      EXPECT_GE(v, prev - 1e-12) << trial << " " << c;
      prev = v;
    }
  }
}

TEST(DpOptimal, LagrangeanSingleArmIsOptimalStopping) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    BanditInstance inst;
    inst.objective.kind = ObjectiveKind::lagrangean;
    if (trial % 2)
      inst.arms.push_back(build_beta_bernoulli_arm("b", 1 + trial % 3, 1 + trial % 2, 1 + trial % 2, 0.1 * u(rng), 0.1 * u(rng)));
    else {
      std::vector<double> v{u(rng), u(rng), u(rng)}, p{0.2, 0.3, 0.5};
      inst.arms.push_back(build_two_level_arm("t", v, p, 0.3 * u(rng), 0.1 * u(rng)));
    }
    // optimal stopping may also decline to play at all
    const double expect = std::max(inst.arms[0].root_state().reward, best_stopping_rule(inst.arms[0]));
    EXPECT_NEAR(dp_optimal(inst).opt, expect, 1e-12) << trial;
  }
}

TEST(DpOptimal, LagrangeanCoins) {
  // two coin arms at 0.1 per play: play one; on a miss exploit the other unplayed -> 0.5 + 0.25 - 0.1
  EXPECT_NEAR(dp_optimal(coin_arms(2, 0.1, 0.0, ObjectiveKind::lagrangean)).opt, 0.65, 1e-12);
  EXPECT_NEAR(dp_optimal(coin_arms(2, 0.6, 0.0, ObjectiveKind::lagrangean)).opt, 0.5, 1e-12);
}

TEST(DpOptimal, Errors) {
  EXPECT_THROW(dp_optimal(coin_arms(2, 0.5, 1.0)), ValidationError);
  auto big = gap_instance(16);
  EXPECT_THROW(dp_optimal(big, 1000.0), OracleLimitExceeded);
  auto c = coin_arms(2, 1.0, 1.0);
  c.objective.kind = ObjectiveKind::concave;
  EXPECT_THROW(dp_optimal(c), ValidationError);
}

TEST(DpOptimal, NeverAboveTheRelaxation) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 60; ++trial) {
    auto inst = random_instance(rng);
    EXPECT_LE(dp_optimal(inst).opt, solve_relaxation(inst).gamma_star + 1e-6) << trial;
  }
}

TEST(PolicyStatistics, OptimalPolicyOnGapInstance) {
  auto inst = gap_instance(2);
  OptimalPolicy opt(inst);
  auto st = enumerate_policy_statistics(inst, optimal_controller(opt));
  EXPECT_NEAR(st.reward, 0.75, 1e-12);
  auto check = check_budgeted_rows(inst, st);
  EXPECT_LE(check.max_violation, 1e-9);
  EXPECT_NEAR(check.objective, 0.75, 1e-12);
  EXPECT_LE(check.objective, solve_relaxation(inst).gamma_star + 1e-9);
}

TEST(PolicyStatistics, ExploitOnly) {
  auto inst = gap_instance(3);
  auto st = enumerate_policy_statistics(inst, exploit_only_controller(1));
  for (std::size_t i = 0; i < 3; ++i)
    for (double z : st.z[i]) EXPECT_EQ(z, 0.0);
  EXPECT_EQ(st.x[1][inst.arms[1].root()], 1.0);
  EXPECT_NEAR(st.reward, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(check_budgeted_rows(inst, st).max_violation, 0.0);
}

TEST(PolicyStatisticsProperty, OptimalPolicyIsLpFeasible) {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 40; ++trial) {
    auto inst = random_instance(rng);
    OptimalPolicy opt(inst);
    const double v = opt.value();
    auto st = enumerate_policy_statistics(inst, optimal_controller(opt));
    EXPECT_NEAR(st.reward, v, 1e-9) << trial;
    auto check = check_budgeted_rows(inst, st);
    EXPECT_LE(check.max_violation, 1e-9) << trial;
    EXPECT_NEAR(check.objective, v, 1e-9) << trial;
  }
}

TEST(PolicyStatisticsProperty, CompiledGreedyOrderMatchesExactEvaluation) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 40; ++trial) {
    auto inst = random_instance(rng, 2 + trial % 2);
    auto plan = plan_instance(inst);
    auto st = enumerate_policy_statistics(inst, greedy_order_controller(inst, plan));
    auto ev = evaluate_plan_exact(inst, plan);
    EXPECT_NEAR(st.reward, ev.reward, 1e-9) << trial;
    EXPECT_NEAR(st.cost, ev.cost, 1e-9) << trial;
    EXPECT_LE(check_budgeted_rows(inst, st).max_violation, 1e-9) << trial;
  }
}

TEST(PolicyStatisticsProperty, CompiledLagrangeanGreedy) {
  std::mt19937_64 rng(20);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    BanditInstance inst;
    inst.objective.kind = ObjectiveKind::lagrangean;
    for (int i = 0; i < 2; ++i) {
      std::vector<double> v{u(rng), u(rng)}, p{0.5, 0.5};
      inst.arms.push_back(build_two_level_arm("a" + std::to_string(i), v, p, 0.2 * u(rng), 0.1 * u(rng)));
    }
    auto sol = solve_relaxation(inst);
    auto plan = make_greedy_plan(extract_single_arm_policies(sol, inst), inst);
    auto st = enumerate_policy_statistics(inst, greedy_order_controller(inst, plan));
    EXPECT_NEAR(st.reward - st.cost, evaluate_plan_exact(inst, plan).value, 1e-9) << trial;
    EXPECT_LE(dp_optimal(inst).opt, sol.gamma_star + 1e-6) << trial;
  }
}
