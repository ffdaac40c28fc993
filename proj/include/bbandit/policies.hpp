#pragma once

// Sequential rounding of single-arm policies (GreedyOrder and its variants),
// exact and sampled evaluation, and the non-adaptive rule for two-level arms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bbandit/relaxations.hpp"
#include "bbandit/statespace.hpp"

namespace bbandit {

// ---------------------------------------------------------------------------
// random streams

/// Counter-based stream: draw k of replication r under seed s is a hash of (s, r, k),
/// so traces never depend on which thread or in which order replications run.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t rep) : key_(mix(mix(seed) ^ (rep + 0x632be59bd9b4e019ULL))) {}
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(mix(key_ + counter_++ * 0x9e3779b97f4a7c15ULL) >> 11) * 0x1.0p-53; }
  std::uint64_t draws() const { return counter_; }

 private:
  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// plans

struct RankedArm {
  std::size_t arm = 0;
  std::string arm_id;
  double nu = 0.0;
  double mu = 0.0;
  double ratio = 0.0;
};

struct GreedyPlan {
  ObjectiveKind variant = ObjectiveKind::budgeted;
  double alpha = 1.0;
  /// Budget the executors enforce (alpha * C for the bicriteria plan).
  double budget = 0.0;
  std::vector<RankedArm> order;
  /// Indexed by arm, not by plan position.
  std::vector<SingleArmPolicy> policies;
};

namespace detail {

inline int ratio_class(const RankedArm& a) {
  if (a.mu > 0.0) return 1;
  return a.nu > 0.0 ? 0 : 2;
}

}  // namespace detail

/// Ranks arms by nu/mu: R/(alpha P + C/C) (budgeted, bicriteria), (R - C)/P (lagrangean),
/// R/(sigma P/B + C/C) (concave). Ties go to the smaller arm id.
inline GreedyPlan make_greedy_plan(std::vector<SingleArmPolicy> policies, const BanditInstance& inst,
                                   double alpha = 1.0) {
  if (!(alpha >= 1.0)) throw ValidationError("alpha must be at least 1");
  if (policies.size() != inst.arms.size()) throw ValidationError("one policy per arm expected");
  GreedyPlan plan;
  plan.variant = inst.objective.kind;
  plan.alpha = alpha;
  plan.budget = plan.variant == ObjectiveKind::lagrangean ? lp_infinity : alpha * inst.budget;
  // C(phi)/C with the convention 0/0 = 0
  auto cost_share = [&](double c) {
    if (c <= 0.0) return 0.0;
    return inst.budget > 0.0 ? c / inst.budget : lp_infinity;
  };
  for (std::size_t i = 0; i < policies.size(); ++i) {
    const auto& p = policies[i];
    RankedArm r;
    r.arm = i;
    r.arm_id = inst.arms[i].id();
    switch (plan.variant) {
      case ObjectiveKind::budgeted:
        r.nu = p.reward;
        r.mu = alpha * p.explore_prob + cost_share(p.cost);
        break;
      case ObjectiveKind::lagrangean:
        r.nu = p.reward - p.cost;
        r.mu = p.explore_prob;
        break;
      case ObjectiveKind::concave: {
        const auto& cp = inst.objective.concave;
        r.nu = p.reward;
        r.mu = cp.sigmas.at(i) / cp.capacity * p.explore_prob + cost_share(p.cost);
        break;
      }
    }
    if (r.mu > 0.0)
      r.ratio = std::isinf(r.mu) ? 0.0 : r.nu / r.mu;
    else
      r.ratio = r.nu > 0.0 ? lp_infinity : 0.0;
    plan.order.push_back(std::move(r));
  }
  std::stable_sort(plan.order.begin(), plan.order.end(), [](const RankedArm& a, const RankedArm& b) {
    const int ca = detail::ratio_class(a), cb = detail::ratio_class(b);
    if (ca != cb) return ca < cb;
    if (ca == 1 && a.ratio != b.ratio) return a.ratio > b.ratio;
    return a.arm_id < b.arm_id;
  });
  plan.policies = std::move(policies);
  return plan;
}

/// Solve, extract and rank in one step.
inline GreedyPlan plan_instance(const BanditInstance& inst, double alpha = 1.0, const SolverOptions& solver = {}) {
  auto sol = solve_relaxation(inst, {}, solver);
  return make_greedy_plan(extract_single_arm_policies(sol, inst), inst, alpha);
}

// ---------------------------------------------------------------------------
// traces

enum class TraceAction { switch_in, play, stop_exploit, stop_null, budget_stop };

inline const char* to_string(TraceAction a) {
  switch (a) {
    case TraceAction::switch_in: return "switch";
    case TraceAction::play: return "play";
    case TraceAction::stop_exploit: return "stop-exploit";
    case TraceAction::stop_null: return "stop-null";
    case TraceAction::budget_stop: return "budget-stop";
  }
  return "unknown";
}

struct TraceEvent {
  std::size_t arm = 0;
  std::size_t state = 0;
  TraceAction action = TraceAction::play;
  double cost = 0.0;
  /// The uniform draw on [0, w_u] that decided the step (0 for bookkeeping events).
  double q = 0.0;
  /// Concave exploit weight index.
  std::size_t level = 0;
};

struct ExecutionTrace {
  std::vector<TraceEvent> events;
  std::optional<std::size_t> exploited_arm;
  std::size_t exploited_state = 0;
  /// Concave: final weights y_i per arm.
  std::vector<double> weights;
  /// Concave: final state of every arm.
  std::vector<std::size_t> final_states;
  double total_cost = 0.0;
  double reward = 0.0;
  /// reward (budgeted), reward - cost (lagrangean), sum of g values (concave).
  double value = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t rep = 0;
};

enum class ExecMode { greedy_order, greedy_violate };

inline double max_single_arm_cost(const BanditInstance& inst) {
  double m = 0.0;
  for (const auto& arm : inst.arms) m = std::max(m, arm.max_exploration_cost());
  return m;
}

namespace detail {

inline constexpr double budget_slack = 1e-9;

inline double first_play_charge(const ArmStateSpace& arm) {
  return arm.root_state().is_leaf() ? lp_infinity : arm.first_play_cost();
}

inline bool any_affordable_first_play(const BanditInstance& inst, double budget) {
  for (const auto& arm : inst.arms)
    if (first_play_charge(arm) <= budget + budget_slack) return true;
  return false;
}

/// Largest root reward among arms at plan positions >= from (lowest index on ties).
inline std::pair<double, std::size_t> best_root_from(const BanditInstance& inst, const GreedyPlan& plan,
                                                     std::size_t from) {
  std::pair<double, std::size_t> best{-lp_infinity, 0};
  for (std::size_t p = from; p < plan.order.size(); ++p) {
    const auto i = plan.order[p].arm;
    const double r = inst.arms[i].root_state().reward;
    if (r > best.first || (r == best.first && i < best.second)) best = {r, i};
  }
  return best;
}

inline std::pair<std::size_t, std::size_t> argmax_root(const BanditInstance& inst) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < inst.arms.size(); ++i)
    if (inst.arms[i].root_state().reward > inst.arms[best].root_state().reward) best = i;
  return {best, inst.arms[best].root()};
}

inline void exploit(ExecutionTrace& t, const BanditInstance& inst, std::size_t arm, std::size_t state) {
  t.exploited_arm = arm;
  t.exploited_state = state;
  t.reward = inst.arms[arm].state(state).reward;
}

// Budgeted (both modes) and Lagrangean GreedyOrder.
inline ExecutionTrace run_greedy(const BanditInstance& inst, const GreedyPlan& plan, ExecMode mode, RngStream& rng) {
  ExecutionTrace t;
  const bool budgeted = plan.variant == ObjectiveKind::budgeted;
  const double budget = plan.budget;
  if (budgeted && !any_affordable_first_play(inst, budget)) {
    auto [arm, state] = argmax_root(inst);
    exploit(t, inst, arm, state);
    t.value = t.reward;
    return t;
  }

  // best current-state reward among finished arms
  double best_done = -lp_infinity;
  std::size_t best_arm = 0, best_state = 0;
  auto fallback = [&](std::size_t from, std::size_t arm, std::size_t state) {
    double r = best_done;
    std::size_t a = best_arm, s = best_state;
    auto consider = [&](double rv, std::size_t av, std::size_t sv) {
      if (rv > r || (rv == r && av < a)) {
        r = rv;
        a = av;
        s = sv;
      }
    };
    consider(inst.arms[arm].state(state).reward, arm, state);
    auto [root_r, root_arm] = best_root_from(inst, plan, from);
    if (from < plan.order.size()) consider(root_r, root_arm, inst.arms[root_arm].root());
    exploit(t, inst, a, s);
  };

  for (std::size_t pos = 0; pos < plan.order.size(); ++pos) {
    const std::size_t i = plan.order[pos].arm;
    const auto& arm = inst.arms[i];
    const auto& pol = plan.policies[i];
    std::size_t u = arm.root();
    bool played = false;
    bool stop = false;
    for (;;) {
      const double q = rng.uniform();
      const auto d = pol.draw(u, q);
      const double qw = q * pol.thresholds[u].w;
      if (d.outcome == DrawOutcome::exploit) {
        t.events.push_back({i, u, TraceAction::stop_exploit, 0.0, qw, d.level});
        exploit(t, inst, i, u);
        stop = true;
        break;
      }
      if (d.outcome == DrawOutcome::stop) {
        t.events.push_back({i, u, TraceAction::stop_null, 0.0, qw, 0});
        break;
      }
      const double h = played ? 0.0 : arm.switch_cost();
      const double c = arm.state(u).play_cost;
      if (budgeted && mode == ExecMode::greedy_order && t.total_cost + h + c > budget + budget_slack) {
        t.events.push_back({i, u, TraceAction::budget_stop, 0.0, qw, 0});
        exploit(t, inst, i, u);
        stop = true;
        break;
      }
      if (!played) {
        t.events.push_back({i, u, TraceAction::switch_in, h, 0.0, 0});
        played = true;
      }
      t.events.push_back({i, u, TraceAction::play, c, qw, 0});
      t.total_cost += h + c;
      // sample the child
      double v = rng.uniform(), acc = 0.0;
      const auto& tr = arm.state(u).transitions;
      std::size_t next = tr.back().target;
      for (const auto& e : tr) {
        acc += e.prob;
        if (v < acc) {
          next = e.target;
          break;
        }
      }
      u = next;
    }
    if (stop) break;
    if (budgeted && t.total_cost > budget + budget_slack) {
      // only reachable for GreedyViolate: exceeded while running this arm
      t.events.push_back({i, u, TraceAction::budget_stop, 0.0, 0.0, 0});
      exploit(t, inst, i, u);
      stop = true;
    } else if (budgeted && t.total_cost >= budget - budget_slack) {
      t.events.push_back({i, u, TraceAction::budget_stop, 0.0, 0.0, 0});
      fallback(pos + 1, i, u);
      stop = true;
    }
    if (stop) break;
    const double r = arm.state(u).reward;
    if (r > best_done || (r == best_done && i < best_arm)) {
      best_done = r;
      best_arm = i;
      best_state = u;
    }
    if (pos + 1 == plan.order.size()) exploit(t, inst, best_arm, best_state);
  }
  t.value = plan.variant == ObjectiveKind::lagrangean ? t.reward - t.total_cost : t.reward;
  return t;
}

inline double interpolate_table(const std::vector<double>& zeta, double pos) {
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= zeta.size()) return zeta.back();
  const double f = pos - static_cast<double>(lo);
  return zeta[lo] + f * (zeta[lo + 1] - zeta[lo]);
}

inline ExecutionTrace run_concave(const BanditInstance& inst, const GreedyPlan& plan, RngStream& rng) {
  const auto& cp = inst.objective.concave;
  const std::size_t n = inst.arms.size();
  const std::size_t grid = plan.policies.empty() ? 0 : plan.policies[0].grid;
  ExecutionTrace t;
  std::vector<std::size_t> level(n, 0), state(n);
  for (std::size_t i = 0; i < n; ++i) state[i] = inst.arms[i].root();
  const double target = cp.capacity * static_cast<double>(grid);
  double load = 0.0;  // sum sigma_i l_i
  for (const auto& ranked : plan.order) {
    const std::size_t i = ranked.arm;
    const auto& arm = inst.arms[i];
    const auto& pol = plan.policies[i];
    std::size_t& u = state[i];
    bool played = false, stop = false;
    for (;;) {
      const double q = rng.uniform();
      const auto d = pol.draw(u, q);
      const double qw = q * pol.thresholds[u].w;
      if (d.outcome == DrawOutcome::exploit) {
        t.events.push_back({i, u, TraceAction::stop_exploit, 0.0, qw, d.level});
        level[i] = d.level;
        break;
      }
      if (d.outcome == DrawOutcome::stop) {
        t.events.push_back({i, u, TraceAction::stop_null, 0.0, qw, 0});
        break;
      }
      const double h = played ? 0.0 : arm.switch_cost();
      const double c = arm.state(u).play_cost;
      if (t.total_cost + h + c > plan.budget + budget_slack) {
        t.events.push_back({i, u, TraceAction::budget_stop, 0.0, qw, grid});
        level[i] = grid;
        stop = true;
        break;
      }
      if (!played) {
        t.events.push_back({i, u, TraceAction::switch_in, h, 0.0, 0});
        played = true;
      }
      t.events.push_back({i, u, TraceAction::play, c, qw, 0});
      t.total_cost += h + c;
      double v = rng.uniform(), acc = 0.0;
      const auto& tr = arm.state(u).transitions;
      std::size_t next = tr.back().target;
      for (const auto& e : tr) {
        acc += e.prob;
        if (v < acc) {
          next = e.target;
          break;
        }
      }
      u = next;
    }
    load += cp.sigmas[i] * static_cast<double>(level[i]);
    if (stop || load >= target) break;
  }
  t.weights.resize(n);
  t.final_states = state;
  for (std::size_t i = 0; i < n; ++i) {
    t.weights[i] = static_cast<double>(level[i]) / (2.0 * static_cast<double>(grid));
    t.value += interpolate_table(value_table(inst, i, state[i], grid), static_cast<double>(level[i]) / 2.0);
  }
  t.reward = t.value;
  return t;
}

}  // namespace detail

/// One trace of the plan. Budgeted plans follow mode; Lagrangean and concave plans use their own rules.
inline ExecutionTrace execute_plan(const BanditInstance& inst, const GreedyPlan& plan, ExecMode mode,
                                   std::uint64_t seed, std::uint64_t rep = 0) {
  RngStream rng(seed, rep);
  auto t = plan.variant == ObjectiveKind::concave ? detail::run_concave(inst, plan, rng)
                                                  : detail::run_greedy(inst, plan, mode, rng);
  t.seed = seed;
  t.rep = rep;
  return t;
}

inline ExecutionTrace execute_greedy_order(const BanditInstance& inst, const GreedyPlan& plan, std::uint64_t seed,
                                           std::uint64_t rep = 0) {
  return execute_plan(inst, plan, ExecMode::greedy_order, seed, rep);
}
inline ExecutionTrace execute_greedy_violate(const BanditInstance& inst, const GreedyPlan& plan, std::uint64_t seed,
                                             std::uint64_t rep = 0) {
  return execute_plan(inst, plan, ExecMode::greedy_violate, seed, rep);
}

// ---------------------------------------------------------------------------
// trace invariants

struct TraceCheck {
  bool sequential = true;
  bool single_switch = true;
  bool within_budget = true;
  bool within_packing = true;
  bool ok() const { return sequential && single_switch && within_budget && within_packing; }
};

/// Blocks of arms must follow plan order without revisits; at most one switch per arm;
/// cost at most cost_limit; concave weights within the packing capacity.
inline TraceCheck check_trace(const BanditInstance& inst, const GreedyPlan& plan, const ExecutionTrace& t,
                              double cost_limit) {
  TraceCheck c;
  std::vector<std::size_t> pos_of(inst.arms.size());
  for (std::size_t p = 0; p < plan.order.size(); ++p) pos_of[plan.order[p].arm] = p;
  std::vector<int> switches(inst.arms.size(), 0);
  std::optional<std::size_t> current;
  std::vector<bool> closed(inst.arms.size(), false);
  double cost = 0.0;
  for (const auto& e : t.events) {
    if (current != e.arm) {
      if (current) {
        closed[*current] = true;
        if (pos_of[e.arm] < pos_of[*current]) c.sequential = false;
      }
      if (closed[e.arm]) c.sequential = false;
      current = e.arm;
    }
    if (e.action == TraceAction::switch_in) ++switches[e.arm];
    cost += e.cost;
  }
  for (int s : switches) c.single_switch = c.single_switch && s <= 1;
  c.within_budget = cost <= cost_limit + detail::budget_slack && std::abs(cost - t.total_cost) <= 1e-9;
  if (plan.variant == ObjectiveKind::concave) {
    double load = 0.0;
    for (std::size_t i = 0; i < t.weights.size(); ++i) load += inst.objective.concave.sigmas[i] * t.weights[i];
    c.within_packing = load <= inst.objective.concave.capacity;
  }
  return c;
}

// ---------------------------------------------------------------------------
// exact evaluation

struct ExactValue {
  /// Expected exploited reward.
  double reward = 0.0;
  /// Expected total exploration cost.
  double cost = 0.0;
  /// reward for budgeted plans, reward - cost for Lagrangean plans.
  double value = 0.0;
};

namespace detail {

struct ArmOutcome {
  double prob = 0.0;
  bool stop = false;
  double reward = 0.0;
  double spent = 0.0;
  std::size_t state = 0;
  /// Null termination that exhausted the budget exactly: exploit the best current state.
  bool exhausted = false;
};

// Outcome distribution of one arm entering with `remaining` budget.
inline std::vector<ArmOutcome> arm_outcomes(const ArmStateSpace& arm, const SingleArmPolicy& pol, ExecMode mode,
                                            bool budgeted, double remaining) {
  std::vector<std::map<std::pair<double, bool>, double>> mass(arm.size());
  mass[arm.root()][{0.0, false}] = 1.0;
  std::vector<ArmOutcome> out;
  for (auto u : arm.topological_order()) {
    const auto& s = arm.state(u);
    const double pz = pol.play_prob(u), px = pol.exploit_prob(u);
    const double pn = std::max(0.0, 1.0 - pz - px);
    for (const auto& [key, m] : mass[u]) {
      const auto [spent, played] = key;
      if (px > 0.0) out.push_back({m * px, true, s.reward, spent, u, false});
      if (pn > 0.0) {
        ArmOutcome o{m * pn, false, s.reward, spent, u, false};
        if (budgeted && spent > remaining + budget_slack) {
          o.stop = true;  // violate mode only
        } else if (budgeted && spent >= remaining - budget_slack) {
          o.stop = true;
          o.exhausted = true;
        }
        out.push_back(o);
      }
      if (pz > 0.0) {
        const double charge = s.play_cost + (played ? 0.0 : arm.switch_cost());
        if (budgeted && mode == ExecMode::greedy_order && spent + charge > remaining + budget_slack) {
          out.push_back({m * pz, true, s.reward, spent, u, false});
          continue;
        }
        for (const auto& e : s.transitions) mass[e.target][{spent + charge, true}] += m * pz * e.prob;
      }
    }
  }
  return out;
}

}  // namespace detail

/// Exact expectation of a budgeted or Lagrangean plan by a forward pass over the plan order.
/// Budgeted plans need integer costs and budget; concave plans are evaluated by sampling only.
inline ExactValue evaluate_plan_exact(const BanditInstance& inst, const GreedyPlan& plan,
                                      ExecMode mode = ExecMode::greedy_order) {
  if (plan.variant == ObjectiveKind::concave) throw ValidationError("concave plans have no exact evaluator");
  const bool budgeted = plan.variant == ObjectiveKind::budgeted;
  if (budgeted) {
    if (!is_integral(plan.budget)) throw ValidationError("exact evaluation needs an integer budget");
    for (const auto& arm : inst.arms) {
      if (!is_integral(arm.switch_cost())) throw ValidationError("exact evaluation needs integer costs");
      for (const auto& s : arm.states())
        if (!is_integral(s.play_cost)) throw ValidationError("exact evaluation needs integer costs");
    }
  }
  ExactValue ev;
  if (budgeted && !detail::any_affordable_first_play(inst, plan.budget)) {
    ev.reward = ev.value = inst.arms[detail::argmax_root(inst).first].root_state().reward;
    return ev;
  }
  // (remaining budget, best finished reward) -> probability
  std::map<std::pair<double, double>, double> front;
  front[{budgeted ? plan.budget : 0.0, -lp_infinity}] = 1.0;
  for (std::size_t pos = 0; pos < plan.order.size(); ++pos) {
    const std::size_t i = plan.order[pos].arm;
    const double later_roots = detail::best_root_from(inst, plan, pos + 1).first;
    std::map<double, std::vector<detail::ArmOutcome>> cache;
    std::map<std::pair<double, double>, double> next;
    for (const auto& [key, m] : front) {
      const auto [remaining, best] = key;
      auto it = cache.find(remaining);
      if (it == cache.end())
        it = cache.emplace(remaining, detail::arm_outcomes(inst.arms[i], plan.policies[i], mode, budgeted, remaining))
                 .first;
      for (const auto& o : it->second) {
        const double p = m * o.prob;
        ev.cost += p * o.spent;
        if (o.exhausted) {
          ev.reward += p * std::max({best, o.reward, later_roots});
        } else if (o.stop) {
          ev.reward += p * o.reward;
        } else {
          next[{budgeted ? remaining - o.spent : 0.0, std::max(best, o.reward)}] += p;
        }
      }
    }
    front = std::move(next);
  }
  for (const auto& [key, m] : front) ev.reward += m * key.second;
  ev.value = budgeted ? ev.reward : ev.reward - ev.cost;
  return ev;
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct MonteCarloReport {
  std::size_t reps = 0;
  double mean = 0.0;
  double std_error = 0.0;
  double mean_cost = 0.0;
  double max_cost = 0.0;
  /// Concave: largest sum of sigma_i eps_i before halving.
  double max_load = 0.0;
  std::size_t violations = 0;
  std::vector<std::string> violation_notes;
};

/// Runs reps traces with streams (seed, 0..reps-1) and checks every trace's invariants.
/// GreedyViolate traces are allowed cost up to budget + c_max.
inline MonteCarloReport monte_carlo_evaluate(const BanditInstance& inst, const GreedyPlan& plan, std::size_t reps,
                                             std::uint64_t seed, ExecMode mode = ExecMode::greedy_order) {
  if (reps == 0) throw ValidationError("reps must be at least 1");
  MonteCarloReport r;
  r.reps = reps;
  const double limit = plan.variant == ObjectiveKind::lagrangean ? lp_infinity
                       : mode == ExecMode::greedy_violate   ? plan.budget + max_single_arm_cost(inst)
                                                            : plan.budget;
  double sum = 0.0, sum_sq = 0.0, cost_sum = 0.0;
  for (std::size_t k = 0; k < reps; ++k) {
    const auto t = execute_plan(inst, plan, mode, seed, k);
    sum += t.value;
    sum_sq += t.value * t.value;
    cost_sum += t.total_cost;
    r.max_cost = std::max(r.max_cost, t.total_cost);
    if (plan.variant == ObjectiveKind::concave) {
      double load = 0.0;
      for (std::size_t i = 0; i < t.weights.size(); ++i) load += inst.objective.concave.sigmas[i] * 2.0 * t.weights[i];
      r.max_load = std::max(r.max_load, load);
    }
    const auto c = check_trace(inst, plan, t, limit);
    if (!c.ok()) {
      ++r.violations;
      if (r.violation_notes.size() < 10)
        r.violation_notes.push_back("rep " + std::to_string(k) + (c.sequential ? "" : " revisit") +
                                    (c.single_switch ? "" : " double-switch") + (c.within_budget ? "" : " over-budget") +
                                    (c.within_packing ? "" : " over-capacity"));
    }
  }
  const double n = static_cast<double>(reps);
  r.mean = sum / n;
  r.mean_cost = cost_sum / n;
  if (reps > 1) {
    const double var = std::max(0.0, (sum_sq - n * r.mean * r.mean) / (n - 1.0));
    r.std_error = std::sqrt(var / n);
  }
  return r;
}

// ---------------------------------------------------------------------------
// non-adaptive rule for two-level arms

enum class NonAdaptiveCase { exploit_prior, single_arm, probe_set };

inline const char* to_string(NonAdaptiveCase c) {
  switch (c) {
    case NonAdaptiveCase::exploit_prior: return "A";
    case NonAdaptiveCase::single_arm: return "B";
    case NonAdaptiveCase::probe_set: return "C";
  }
  return "?";
}

struct NonAdaptiveRule {
  NonAdaptiveCase which = NonAdaptiveCase::exploit_prior;
  /// Arms probed once each (case C).
  std::vector<std::size_t> probe_set;
  /// Arm chosen by prior (cases A and B).
  std::optional<std::size_t> selected;
  double gamma_star = 0.0;
  /// Exact expected reward of the rule.
  double value = 0.0;
  /// Cost of probing the set.
  double probe_cost = 0.0;
  /// value / gamma_star (1 when gamma_star is 0).
  double achieved_ratio = 1.0;
};

inline bool is_two_level(const BanditInstance& inst) {
  for (const auto& arm : inst.arms) {
    for (const auto& t : arm.root_state().transitions)
      if (!arm.state(t.target).is_leaf()) return false;
  }
  return true;
}

/// Expected value of exploiting the best of: one observed leaf per probed arm and the
/// prior means of the others.
inline double probe_set_value(const BanditInstance& inst, const std::vector<std::size_t>& probed) {
  double base = 0.0;
  std::vector<bool> in(inst.arms.size(), false);
  for (auto i : probed) in[i] = true;
  for (std::size_t i = 0; i < inst.arms.size(); ++i)
    if (!in[i]) base = std::max(base, inst.arms[i].root_state().reward);
  // E[max] = sum over candidate levels v of v * (P[max <= v] - P[max < v])
  std::vector<double> levels{base};
  for (auto i : probed)
    for (const auto& t : inst.arms[i].root_state().transitions) levels.push_back(inst.arms[i].state(t.target).reward);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  auto cdf = [&](double v, bool strict) {
    if (strict ? !(base < v) : !(base <= v)) return 0.0;
    double p = 1.0;
    for (auto i : probed) {
      double q = 0.0;
      for (const auto& t : inst.arms[i].root_state().transitions) {
        const double r = inst.arms[i].state(t.target).reward;
        if (strict ? r < v : r <= v) q += t.prob;
      }
      p *= q;
    }
    return p;
  };
  double value = 0.0;
  for (double v : levels) value += v * (cdf(v, false) - cdf(v, true));
  return value;
}

/// Three-case construction for depth-one arms from the budgeted LP optimum.
inline NonAdaptiveRule nonadaptive_two_level(const BanditInstance& inst, const RelaxationSolution& sol,
                                             const SolverOptions& solver = {}) {
  if (inst.objective.kind != ObjectiveKind::budgeted) throw ValidationError("non-adaptive rule needs a budgeted instance");
  if (!is_two_level(inst)) throw ValidationError("non-adaptive rule needs depth-one arms");
  NonAdaptiveRule rule;
  rule.gamma_star = sol.gamma_star;
  const double share = sol.gamma_star / 7.0;
  auto finish = [&] {
    rule.achieved_ratio = rule.gamma_star > 0.0 ? rule.value / rule.gamma_star : 1.0;
    return rule;
  };

  double root_part = 0.0;
  for (std::size_t i = 0; i < inst.arms.size(); ++i)
    root_part += inst.arms[i].root_state().reward * sol.arms[i][inst.arms[i].root()].x;
  if (root_part >= share) {
    rule.which = NonAdaptiveCase::exploit_prior;
    rule.selected = detail::argmax_root(inst).first;
    rule.value = inst.arms[*rule.selected].root_state().reward;
    return finish();
  }

  RelaxationOptions no_root;
  no_root.forbid_root_exploit = true;
  const auto resolved = solve_relaxation(build_budgeted_lp(inst, no_root), solver);
  struct Item {
    std::size_t arm;
    double z, weight, reward;  // weight = c/C + X, reward = R (both conditioned on a play)
  };
  std::vector<Item> items;
  for (std::size_t i = 0; i < inst.arms.size(); ++i) {
    const auto& arm = inst.arms[i];
    const double z = resolved.arms[i][arm.root()].z;
    if (z <= unreachable_mass) continue;
    double xs = 0.0, xr = 0.0;
    for (const auto& t : arm.root_state().transitions) {
      xs += resolved.arms[i][t.target].x;
      xr += resolved.arms[i][t.target].x * arm.state(t.target).reward;
    }
    const double c = arm.first_play_cost();
    const double cshare = c <= 0.0 ? 0.0 : (inst.budget > 0.0 ? c / inst.budget : lp_infinity);
    const double reward = xr / z;
    if (std::isinf(cshare) || reward <= 0.0) continue;
    items.push_back({i, 0.0, cshare + xs / z, reward});
  }
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    // compare R_a / W_a > R_b / W_b without dividing by zero weights
    return a.reward * b.weight > b.reward * a.weight;
  });
  // fill z in ratio order until sum z (c/C + X) = 1; the first arm left short is the boundary arm
  double capacity = 1.0;
  for (auto& it : items) {
    if (capacity <= 0.0) break;
    it.z = it.weight <= capacity + 1e-12 ? 1.0 : capacity / it.weight;
    capacity = std::max(0.0, capacity - it.z * it.weight);
    if (it.z < 1.0) {
      if (it.z * it.reward > share) {
        rule.which = NonAdaptiveCase::single_arm;
        rule.selected = it.arm;
        rule.value = inst.arms[it.arm].root_state().reward;
        return finish();
      }
      break;
    }
  }
  rule.which = NonAdaptiveCase::probe_set;
  for (const auto& it : items) {
    if (it.z == 1.0) {
      rule.probe_set.push_back(it.arm);
      rule.probe_cost += inst.arms[it.arm].first_play_cost();
    }
  }
  std::sort(rule.probe_set.begin(), rule.probe_set.end());
  rule.value = probe_set_value(inst, rule.probe_set);
  return finish();
}

}  // namespace bbandit
