#pragma once

// Instance families, random suites, the adaptivity demonstration and the driver that
// checks every approximation guarantee over a suite.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bbandit/oracle.hpp"
#include "bbandit/policies.hpp"
#include "bbandit/relaxations.hpp"
#include "bbandit/statespace.hpp"

namespace bbandit {

// ---------------------------------------------------------------------------
// canonical families

/// n identical arms: play cost 1, prior mean 1/n, leaves 0 (prob 1 - 1/n) and 1 (prob 1/n); C = n.
inline BanditInstance gen_integrality_gap(int n) {
  if (n < 1) throw ValidationError("integrality-gap family needs n >= 1");
  BanditInstance inst;
  const double v[] = {0.0, 1.0};
  const double p[] = {1.0 - 1.0 / n, 1.0 / n};
  for (int i = 0; i < n; ++i) inst.arms.push_back(build_two_level_arm("arm" + std::to_string(i), v, p, 1.0, 0.0));
  inst.budget = n;
  return inst;
}

struct AdaptivityGapParams {
  int n = 0;
  double q = 0.0;
  double a2 = 0.0;
  /// Mean of the rare good model: q * 1 + (1 - q) * a2.
  double good_mean = 0.0;
};

inline AdaptivityGapParams adaptivity_gap_params(int n) {
  if (n < 4 || n > 1000) throw ValidationError("adaptivity-gap family needs 4 <= n <= 1000");
  const int s = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (s * s != n) throw ValidationError("adaptivity-gap family needs a perfect square n");
  AdaptivityGapParams p;
  p.n = n;
  p.q = 1.0 / s;
  p.a2 = std::pow(static_cast<double>(n), -9.0);
  p.good_mean = p.q + (1.0 - p.q) * p.a2;
  return p;
}

/// One arm of the adaptivity-gap family. The underlying model is R1 (always 0, prior 1 - q),
/// R2 (always a2, prior q(1 - q)) or R3 (1 w.p. q else a2, prior q^2). States: "root";
/// "R1" and "R3" once a 0 or a 1 has been seen (both final); "a2^k" after k readings of a2.
inline ArmStateSpace build_adaptivity_gap_arm(std::string arm_id, int n, int chain_length) {
  const auto prm = adaptivity_gap_params(n);
  const double q = prm.q, a2 = prm.a2;
  // posterior weight of R3 after k readings of a2 (R1 already ruled out)
  auto p3 = [&](int k) {
    const double w3 = q * q * std::pow(1.0 - q, k), w2 = q * (1.0 - q);
    return w3 / (w3 + w2);
  };
  auto chain_reward = [&](int k) { return p3(k) * prm.good_mean + (1.0 - p3(k)) * a2; };

  std::vector<BeliefState> states;
  // 0 root, 1 R1, 2 R3, 3.. chain k = 1..chain_length
  states.push_back({"root", q * (1.0 - q) * a2 + q * q * prm.good_mean, 1.0, {}});
  states.push_back({"R1", 0.0, 0.0, {}});
  states.push_back({"R3", prm.good_mean, 0.0, {}});
  const double hit0 = q * q * q;
  states[0].transitions = {{1, 1.0 - q}, {3, q * (1.0 - q) + q * q * (1.0 - q)}, {2, hit0}};
  for (int k = 1; k <= chain_length; ++k) {
    BeliefState s{"a2^" + std::to_string(k), chain_reward(k), 1.0, {}};
    if (k < chain_length) {
      const double hit = p3(k) * q;
      s.transitions = {{static_cast<std::size_t>(3 + k), 1.0 - hit}, {2, hit}};
    }
    states.push_back(std::move(s));
  }
  return ArmStateSpace(std::move(arm_id), std::move(states), 0, 0.0);
}

/// n i.i.d. arms as above, unit play costs, no switch costs, C = 5n; chains end at the budget.
inline BanditInstance gen_adaptivity_gap(int n) {
  adaptivity_gap_params(n);
  BanditInstance inst;
  for (int i = 0; i < n; ++i) inst.arms.push_back(build_adaptivity_gap_arm("arm" + std::to_string(i), n, 5 * n));
  inst.budget = 5.0 * n;
  return inst;
}

// ---------------------------------------------------------------------------
// adaptive vs non-adaptive demonstration

namespace detail {

inline std::size_t sample_child(const BeliefState& s, RngStream& rng) {
  const double v = rng.uniform();
  double acc = 0.0;
  for (const auto& t : s.transitions) {
    acc += t.prob;
    if (v < acc) return t.target;
  }
  return s.transitions.back().target;
}

inline void play_times(const ArmStateSpace& arm, std::size_t& u, int times, RngStream& rng) {
  for (int k = 0; k < times && !arm.state(u).is_leaf(); ++k) u = sample_child(arm.state(u), rng);
}

inline double best_current_reward(const BanditInstance& inst, const std::vector<std::size_t>& states) {
  double best = 0.0;
  for (std::size_t i = 0; i < inst.arms.size(); ++i) best = std::max(best, inst.arms[i].state(states[i]).reward);
  return best;
}

}  // namespace detail

/// Play every arm once, keep up to 2 sqrt(n) arms that did not read 0 (lowest ids first),
/// replay each of them 2 sqrt(n) times, exploit the best posterior. Uses n + 4n plays.
inline double adaptive_two_phase_run(const BanditInstance& inst, RngStream& rng) {
  const int n = static_cast<int>(inst.arms.size());
  const int s = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  std::vector<std::size_t> st(n);
  for (int i = 0; i < n; ++i) {
    st[i] = inst.arms[i].root();
    detail::play_times(inst.arms[i], st[i], 1, rng);
  }
  int kept = 0;
  for (int i = 0; i < n && kept < 2 * s; ++i) {
    if (inst.arms[i].state(st[i]).reward <= 0.0) continue;
    ++kept;
    detail::play_times(inst.arms[i], st[i], 2 * s, rng);
  }
  return detail::best_current_reward(inst, st);
}

/// Non-adaptive baseline: every arm gets C/n plays regardless of what it shows.
inline double uniform_allocation_run(const BanditInstance& inst, RngStream& rng) {
  const int n = static_cast<int>(inst.arms.size());
  const int plays = static_cast<int>(inst.budget) / std::max(1, n);
  std::vector<std::size_t> st(n);
  for (int i = 0; i < n; ++i) {
    st[i] = inst.arms[i].root();
    detail::play_times(inst.arms[i], st[i], plays, rng);
  }
  return detail::best_current_reward(inst, st);
}

struct AdaptivityDemoRow {
  int n = 0;
  double adaptive = 0.0, adaptive_se = 0.0;
  double uniform = 0.0, uniform_se = 0.0;
  double ratio = 0.0;
};

inline AdaptivityDemoRow adaptivity_demo(int n, std::size_t reps, std::uint64_t seed) {
  const auto inst = gen_adaptivity_gap(n);
  AdaptivityDemoRow row;
  row.n = n;
  auto estimate = [&](auto&& run, std::uint64_t stream, double& mean, double& se) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k < reps; ++k) {
      RngStream rng(seed + stream, k);
      const double v = run(inst, rng);
      s += v;
      s2 += v * v;
    }
    const double m = static_cast<double>(reps);
    mean = s / m;
    se = reps > 1 ? std::sqrt(std::max(0.0, (s2 - m * mean * mean) / (m - 1.0)) / m) : 0.0;
  };
  estimate(adaptive_two_phase_run, 0, row.adaptive, row.adaptive_se);
  estimate(uniform_allocation_run, 1, row.uniform, row.uniform_se);
  row.ratio = row.uniform > 0.0 ? row.adaptive / row.uniform : lp_infinity;
  return row;
}

// ---------------------------------------------------------------------------
// random suites

enum class Family { integrality_gap, adaptivity_gap, random_two_level, random_beta, random_mixed };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::integrality_gap: return "integrality-gap";
    case Family::adaptivity_gap: return "adaptivity-gap";
    case Family::random_two_level: return "random-two-level";
    case Family::random_beta: return "random-beta";
    case Family::random_mixed: return "random-mixed";
  }
  return "unknown";
}

inline Family family_from_string(const std::string& s) {
  for (auto f : {Family::integrality_gap, Family::adaptivity_gap, Family::random_two_level, Family::random_beta,
                 Family::random_mixed})
    if (s == to_string(f)) return f;
  throw ValidationError("unknown family: " + s);
}

struct GeneratorSpec {
  Family family = Family::random_two_level;
  std::size_t count = 10;
  std::uint64_t seed = 0;
  /// Arm count for the fixed families.
  int n = 4;
  int min_arms = 2, max_arms = 3;
  int max_leaves = 3;
  /// Leaf values are u^reward_power for uniform u; larger powers give rare high rewards.
  double reward_power = 1.0;
  int max_alpha = 3;
  int max_depth = 2;
  double min_cost = 1, max_cost = 3;
  double min_switch = 0, max_switch = 1;
  bool integer_costs = true;
  double budget_cap = 5;
  ObjectiveKind objective = ObjectiveKind::budgeted;
  /// Concave suites: linear g, sigma_i = 1.
  double capacity = 1.0;
  double epsilon = 0.25;
  /// Instances whose oracle state estimate exceeds this are redrawn.
  double oracle_limit = default_oracle_limit;
};

struct SuiteInstance {
  std::string id;
  BanditInstance instance;
};

namespace detail {

inline int draw_int(RngStream& rng, int lo, int hi) {
  if (hi <= lo) return lo;
  const int v = lo + static_cast<int>(rng.uniform() * (hi - lo + 1));
  return std::min(v, hi);
}

inline double draw_real(RngStream& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

inline double draw_cost(RngStream& rng, const GeneratorSpec& g, double lo, double hi) {
  if (g.integer_costs) return draw_int(rng, static_cast<int>(std::ceil(lo)), static_cast<int>(std::floor(hi)));
  return draw_real(rng, lo, hi);
}

inline BanditInstance draw_instance(const GeneratorSpec& g, RngStream& rng) {
  BanditInstance inst;
  const int n = draw_int(rng, g.min_arms, g.max_arms);
  for (int i = 0; i < n; ++i) {
    const std::string id = "a" + std::to_string(i);
    const double c = draw_cost(rng, g, g.min_cost, g.max_cost);
    const double h = draw_cost(rng, g, g.min_switch, g.max_switch);
    bool two_level = g.family == Family::random_two_level;
    if (g.family == Family::random_mixed) two_level = rng.uniform() < 0.5;
    if (two_level) {
      const int m = draw_int(rng, 2, std::max(2, g.max_leaves));
      std::vector<double> v(m), p(m);
      double total = 0.0;
      for (int j = 0; j < m; ++j) {
        v[j] = std::pow(rng.uniform(), g.reward_power);
        p[j] = 0.05 + rng.uniform();
        total += p[j];
      }
      for (auto& x : p) x /= total;
      inst.arms.push_back(build_two_level_arm(id, v, p, c, h));
    } else {
      inst.arms.push_back(build_beta_bernoulli_arm(id, draw_int(rng, 1, g.max_alpha), draw_int(rng, 1, g.max_alpha),
                                                   draw_int(rng, 1, g.max_depth), c, h));
    }
  }
  inst.objective.kind = g.objective;
  if (g.objective == ObjectiveKind::lagrangean) return inst;
  // budget between the cheapest first play and half the cost of exploring everything
  double lo = lp_infinity, total = 0.0;
  for (const auto& arm : inst.arms) {
    lo = std::min(lo, arm.first_play_cost());
    total += arm.max_exploration_cost();
  }
  const double hi = std::min(g.budget_cap, std::max(lo, total / 2.0));
  lo = std::min(lo, g.budget_cap);
  inst.budget = g.integer_costs ? draw_int(rng, static_cast<int>(std::ceil(lo)), static_cast<int>(std::floor(hi)))
                                : draw_real(rng, lo, hi);
  if (g.objective == ObjectiveKind::concave) {
    inst.objective.concave.sigmas.assign(inst.arms.size(), 1.0);
    inst.objective.concave.capacity = g.capacity;
    inst.objective.concave.epsilon = g.epsilon;
  }
  return inst;
}

}  // namespace detail

/// Deterministic in g: instance k uses its own random stream (seed, k).
inline std::vector<SuiteInstance> gen_random_suite(const GeneratorSpec& g) {
  std::vector<SuiteInstance> out;
  const std::string prefix = std::string(to_string(g.family)) + "-" + std::to_string(g.seed) + "-";
  if (g.family == Family::integrality_gap || g.family == Family::adaptivity_gap) {
    auto inst = g.family == Family::integrality_gap ? gen_integrality_gap(g.n) : gen_adaptivity_gap(g.n);
    out.push_back({std::string(to_string(g.family)) + "-" + std::to_string(g.n), std::move(inst)});
    return out;
  }
  if (g.min_arms < 1 || g.max_arms < g.min_arms) throw ValidationError("bad arm range");
  if (!(g.reward_power > 0.0)) throw ValidationError("reward_power must be positive");
  if (g.min_cost < 0 || g.max_cost < g.min_cost || g.min_switch < 0 || g.max_switch < g.min_switch)
    throw ValidationError("bad cost range");
  for (std::size_t k = 0; k < g.count; ++k) {
    RngStream rng(g.seed, k);
    for (int attempt = 0;; ++attempt) {
      auto inst = detail::draw_instance(g, rng);
      const bool fits = g.objective == ObjectiveKind::concave || estimate_joint_states(inst) <= g.oracle_limit;
      if (fits || attempt == 100) {
        if (!fits) throw ValidationError("generator spec produces instances beyond the oracle limit");
        out.push_back({prefix + std::to_string(k), std::move(inst)});
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// guarantee suite

enum class Guarantee { greedy_order, bicriteria, lagrangean, concave, nonadaptive };

inline const char* to_string(Guarantee g) {
  switch (g) {
    case Guarantee::greedy_order: return "greedy-order";
    case Guarantee::bicriteria: return "bicriteria";
    case Guarantee::lagrangean: return "lagrangean";
    case Guarantee::concave: return "concave";
    case Guarantee::nonadaptive: return "nonadaptive";
  }
  return "unknown";
}

inline Guarantee guarantee_from_string(const std::string& s) {
  for (auto g : {Guarantee::greedy_order, Guarantee::bicriteria, Guarantee::lagrangean, Guarantee::concave,
                 Guarantee::nonadaptive})
    if (s == to_string(g)) return g;
  throw ValidationError("unknown guarantee: " + s);
}

struct SuiteOptions {
  Guarantee guarantee = Guarantee::greedy_order;
  double alpha = 1.0;
  bool use_oracle = true;
  /// Monte Carlo replications (concave value; trace checks for the budgeted executors).
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  double tolerance = 1e-6;
  SolverOptions solver;
};

struct ReportRow {
  std::string instance;
  double gamma_star = 0.0;
  std::optional<double> opt;
  double value = 0.0;
  double std_error = 0.0;
  double ratio_gamma = 0.0;
  std::optional<double> ratio_opt;
  /// The guaranteed fraction of gamma*.
  double required = 0.0;
  bool bound_ok = true;
  /// gamma* >= OPT when the oracle ran.
  bool relaxation_ok = true;
  /// Per-trace invariants (sequential, one switch per arm, budget), when traces were sampled.
  bool traces_ok = true;
  std::string note;
  bool ok() const { return bound_ok && relaxation_ok && traces_ok; }
};

struct EvaluationReport {
  Guarantee guarantee = Guarantee::greedy_order;
  double alpha = 1.0;
  std::vector<ReportRow> rows;
  double min_ratio_gamma = lp_infinity;
  std::optional<double> min_ratio_opt;
  std::size_t failures = 0;
  bool passed() const { return failures == 0; }
};

inline double required_fraction(Guarantee g, double alpha, double epsilon) {
  switch (g) {
    case Guarantee::greedy_order: return 0.25;
    case Guarantee::bicriteria: return alpha / (2.0 * (1.0 + alpha));
    case Guarantee::lagrangean: return 0.5;
    case Guarantee::concave: return (1.0 - epsilon) / 8.0;
    case Guarantee::nonadaptive: return 1.0 / 7.0;
  }
  return 0.0;
}

inline ReportRow evaluate_suite_instance(const SuiteInstance& si, const SuiteOptions& opt) {
  const auto& inst = si.instance;
  ReportRow row;
  row.instance = si.id;
  const auto sol = solve_relaxation(inst, {}, opt.solver);
  row.gamma_star = sol.gamma_star;
  const double eps = inst.objective.concave.epsilon;
  row.required = required_fraction(opt.guarantee, opt.alpha, eps);

  if (opt.guarantee == Guarantee::nonadaptive) {
    const auto rule = nonadaptive_two_level(inst, sol, opt.solver);
    row.value = rule.value;
    row.note = std::string("case ") + to_string(rule.which);
    row.traces_ok = rule.probe_cost <= inst.budget + 1e-9;
  } else {
    const double alpha = opt.guarantee == Guarantee::bicriteria ? opt.alpha : 1.0;
    const auto plan = make_greedy_plan(extract_single_arm_policies(sol, inst), inst, alpha);
    if (opt.guarantee == Guarantee::concave) {
      const auto mc = monte_carlo_evaluate(inst, plan, std::max<std::size_t>(opt.reps, 2), opt.seed);
      row.value = mc.mean;
      row.std_error = mc.std_error;
      row.traces_ok = mc.violations == 0;
    } else {
      row.value = evaluate_plan_exact(inst, plan).value;
      if (opt.reps > 0) {
        const auto go = monte_carlo_evaluate(inst, plan, opt.reps, opt.seed, ExecMode::greedy_order);
        row.traces_ok = go.violations == 0;
        if (plan.variant == ObjectiveKind::budgeted) {
          const auto gv = monte_carlo_evaluate(inst, plan, opt.reps, opt.seed, ExecMode::greedy_violate);
          row.traces_ok = row.traces_ok && gv.violations == 0;
        }
      }
    }
  }
  const double slack = opt.guarantee == Guarantee::concave ? 3.0 * row.std_error : opt.tolerance;
  row.bound_ok = row.value >= row.required * row.gamma_star - slack;
  row.ratio_gamma = row.gamma_star > 0.0 ? row.value / row.gamma_star : 1.0;
  if (opt.use_oracle && inst.objective.kind != ObjectiveKind::concave) {
    try {
      row.opt = dp_optimal(inst).opt;
      row.ratio_opt = *row.opt > 0.0 ? row.value / *row.opt : 1.0;
      row.relaxation_ok = *row.opt <= row.gamma_star + opt.tolerance;
    } catch (const OracleLimitExceeded&) {
      row.note += row.note.empty() ? "oracle skipped" : "; oracle skipped";
    }
  }
  return row;
}

/// Evaluates every instance; rows keep the suite order.
inline EvaluationReport run_guarantee_suite(const std::vector<SuiteInstance>& suite, const SuiteOptions& opt) {
  EvaluationReport rep;
  rep.guarantee = opt.guarantee;
  rep.alpha = opt.alpha;
  for (const auto& si : suite) {
    auto row = evaluate_suite_instance(si, opt);
    rep.min_ratio_gamma = std::min(rep.min_ratio_gamma, row.ratio_gamma);
    if (row.ratio_opt) rep.min_ratio_opt = std::min(rep.min_ratio_opt.value_or(lp_infinity), *row.ratio_opt);
    if (!row.ok()) ++rep.failures;
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace bbandit
