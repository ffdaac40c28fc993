#pragma once

// Per-arm LP relaxations (budgeted, Lagrangean, concave) and the randomized
// single-arm policies read off their optimal solutions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "bbandit/lp.hpp"
#include "bbandit/statespace.hpp"

namespace bbandit {

/// A relaxation LP together with the map from (arm, state[, l]) to its variables.
struct RelaxationLP {
  ObjectiveKind variant = ObjectiveKind::budgeted;
  LinearProgram lp;
  std::vector<std::vector<std::size_t>> w, z, x;
  /// Concave only: x_grid[arm][state][l].
  std::vector<std::vector<std::vector<std::size_t>>> x_grid;
  /// Concave only: zeta[arm][state][l] = g_u(l/L).
  std::vector<std::vector<std::vector<double>>> zeta;
  std::size_t grid = 0;
  double epsilon = 0.0;
};

struct RelaxationOptions {
  /// Forces x_root = 0 on every arm (used by the non-adaptive two-level rounding).
  bool forbid_root_exploit = false;
};

namespace detail {

inline std::string var_name(char kind, const ArmStateSpace& arm, const BeliefState& s) {
  return std::string(1, kind) + "[" + arm.id() + ":" + s.id + "]";
}

// Shared skeleton: w, z (and x unless concave) with flow and x + z <= w rows.
inline RelaxationLP build_skeleton(const BanditInstance& inst, ObjectiveKind variant, std::size_t grid,
                                   const RelaxationOptions& opts) {
  for (const auto& arm : inst.arms) arm.require_dag();
  RelaxationLP r;
  r.variant = variant;
  r.grid = grid;
  auto& lp = r.lp;
  const std::size_t n = inst.arms.size();
  r.w.resize(n);
  r.z.resize(n);
  if (variant == ObjectiveKind::concave)
    r.x_grid.resize(n);
  else
    r.x.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& arm = inst.arms[i];
    for (std::size_t u = 0; u < arm.size(); ++u) {
      const auto& s = arm.state(u);
      const bool root = u == arm.root();
      r.w[i].push_back(lp.add_variable(var_name('w', arm, s), root ? 1.0 : 0.0, 1.0));
      r.z[i].push_back(lp.add_variable(var_name('z', arm, s), 0.0, s.is_leaf() ? 0.0 : 1.0));
      const double x_upper = (root && opts.forbid_root_exploit) ? 0.0 : 1.0;
      if (variant == ObjectiveKind::concave) {
        std::vector<std::size_t> xs;
        for (std::size_t l = 0; l <= grid; ++l)
          xs.push_back(lp.add_variable("x[" + arm.id() + ":" + s.id + ":" + std::to_string(l) + "]", 0.0, x_upper));
        r.x_grid[i].push_back(std::move(xs));
      } else {
        r.x[i].push_back(lp.add_variable(var_name('x', arm, s), 0.0, x_upper));
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto& arm = inst.arms[i];
    // flow: w_u = sum_v z_v p_vu for every non-root state
    std::vector<std::vector<LpTerm>> inflow(arm.size());
    for (std::size_t v = 0; v < arm.size(); ++v)
      for (const auto& t : arm.state(v).transitions) inflow[t.target].push_back({r.z[i][v], -t.prob});
    for (std::size_t u = 0; u < arm.size(); ++u) {
      if (u == arm.root()) continue;
      auto terms = std::move(inflow[u]);
      terms.push_back({r.w[i][u], 1.0});
      lp.add_constraint("flow[" + arm.id() + ":" + arm.state(u).id + "]", std::move(terms), Relation::equal, 0.0);
    }
    for (std::size_t u = 0; u < arm.size(); ++u) {
      std::vector<LpTerm> terms{{r.z[i][u], 1.0}, {r.w[i][u], -1.0}};
      if (variant == ObjectiveKind::concave) {
        for (auto xv : r.x_grid[i][u]) terms.push_back({xv, 1.0});
      } else {
        terms.push_back({r.x[i][u], 1.0});
      }
      lp.add_constraint("occupancy[" + arm.id() + ":" + arm.state(u).id + "]", std::move(terms),
                        Relation::less_equal, 0.0);
    }
  }
  return r;
}

inline std::vector<LpTerm> cost_terms(const BanditInstance& inst, const RelaxationLP& r) {
  std::vector<LpTerm> terms;
  for (std::size_t i = 0; i < inst.arms.size(); ++i) {
    const auto& arm = inst.arms[i];
    for (std::size_t u = 0; u < arm.size(); ++u) {
      double c = arm.state(u).play_cost;
      if (u == arm.root()) c += arm.switch_cost();
      if (c != 0.0) terms.push_back({r.z[i][u], c});
    }
  }
  return terms;
}

inline void require_variant(const BanditInstance& inst, ObjectiveKind expected) {
  if (inst.objective.kind != expected)
    throw ValidationError("instance objective is " + std::string(to_string(inst.objective.kind)) + ", expected " +
                          std::string(to_string(expected)));
}

}  // namespace detail

/// max sum x_u r_u  s.t. expected cost <= C, total exploit mass <= 1, flow, x + z <= w.
inline RelaxationLP build_budgeted_lp(const BanditInstance& inst, const RelaxationOptions& opts = {}) {
  detail::require_variant(inst, ObjectiveKind::budgeted);
  auto r = detail::build_skeleton(inst, ObjectiveKind::budgeted, 0, opts);
  r.lp.add_constraint("budget", detail::cost_terms(inst, r), Relation::less_equal, inst.budget);
  std::vector<LpTerm> exploit;
  for (std::size_t i = 0; i < inst.arms.size(); ++i) {
    for (std::size_t u = 0; u < inst.arms[i].size(); ++u) {
      exploit.push_back({r.x[i][u], 1.0});
      r.lp.set_objective_coef(r.x[i][u], inst.arms[i].state(u).reward);
    }
  }
  r.lp.add_constraint("exploit", std::move(exploit), Relation::less_equal, 1.0);
  return r;
}

/// max sum (x_u r_u - c_u z_u) - h_i z_root  without the budget row.
inline RelaxationLP build_lagrangean_lp(const BanditInstance& inst, const RelaxationOptions& opts = {}) {
  detail::require_variant(inst, ObjectiveKind::lagrangean);
  auto r = detail::build_skeleton(inst, ObjectiveKind::lagrangean, 0, opts);
  std::vector<LpTerm> exploit;
  for (std::size_t i = 0; i < inst.arms.size(); ++i) {
    for (std::size_t u = 0; u < inst.arms[i].size(); ++u) {
      exploit.push_back({r.x[i][u], 1.0});
      r.lp.set_objective_coef(r.x[i][u], inst.arms[i].state(u).reward);
    }
  }
  for (const auto& t : detail::cost_terms(inst, r)) r.lp.add_objective_coef(t.var, -t.coef);
  r.lp.add_constraint("exploit", std::move(exploit), Relation::less_equal, 1.0);
  return r;
}

/// Discretized concave LP on the grid l/L, L = ceil(n/epsilon).
inline RelaxationLP build_concave_lp(const BanditInstance& inst, double epsilon, const RelaxationOptions& opts = {}) {
  detail::require_variant(inst, ObjectiveKind::concave);
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  BanditInstance probe = inst;
  probe.objective.concave.epsilon = epsilon;
  for (const auto& d : validate_instance(probe)) {
    if (d.kind == DiagnosticKind::value_table || d.kind == DiagnosticKind::bad_objective)
      throw ValidationError("concave problem rejected: " + d.message());
  }
  const auto& cp = inst.objective.concave;
  const std::size_t n = inst.arms.size();
  const std::size_t grid = probe.objective.concave.grid_size(n);
  auto r = detail::build_skeleton(inst, ObjectiveKind::concave, grid, opts);
  r.epsilon = epsilon;
  r.lp.add_constraint("budget", detail::cost_terms(inst, r), Relation::less_equal, inst.budget);
  std::vector<LpTerm> packing;
  r.zeta.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t u = 0; u < inst.arms[i].size(); ++u) {
      r.zeta[i].push_back(value_table(inst, i, u, grid));
      for (std::size_t l = 0; l <= grid; ++l) {
        const auto v = r.x_grid[i][u][l];
        r.lp.set_objective_coef(v, r.zeta[i][u][l]);
        if (l > 0 && cp.sigmas[i] != 0.0) packing.push_back({v, cp.sigmas[i] * static_cast<double>(l)});
      }
    }
  }
  r.lp.add_constraint("packing", std::move(packing), Relation::less_equal,
                      cp.capacity * static_cast<double>(grid) * (1.0 + epsilon));
  return r;
}

/// Builds the relaxation matching the instance objective (concave uses its own epsilon).
inline RelaxationLP build_relaxation(const BanditInstance& inst, const RelaxationOptions& opts = {}) {
  switch (inst.objective.kind) {
    case ObjectiveKind::budgeted: return build_budgeted_lp(inst, opts);
    case ObjectiveKind::lagrangean: return build_lagrangean_lp(inst, opts);
    case ObjectiveKind::concave: return build_concave_lp(inst, inst.objective.concave.epsilon, opts);
  }
  throw ValidationError("unknown objective");
}

// ---------------------------------------------------------------------------
// solutions

struct StateValues {
  double w = 0.0;
  double z = 0.0;
  double x = 0.0;
  /// Concave only: x_{u,l}.
  std::vector<double> x_grid;
  bool reachable = false;

  double exploit_mass() const {
    if (x_grid.empty()) return x;
    double s = 0.0;
    for (double v : x_grid) s += v;
    return s;
  }
};

struct RelaxationSolution {
  ObjectiveKind variant = ObjectiveKind::budgeted;
  std::vector<std::vector<StateValues>> arms;
  double gamma_star = 0.0;
  std::size_t grid = 0;
  std::vector<std::vector<std::vector<double>>> zeta;
  LPSolutionRaw raw;
};

/// Below this occupancy a state is treated as unreachable.
inline constexpr double unreachable_mass = 1e-9;

/// Solves a relaxation and cleans the optimum into well-defined per-state thresholds:
/// values clamped into [0, w_u], and z_u + exploit mass rescaled down onto w_u when it
/// overshoots by at most 1e-6. Throws NumericalFailure on a non-optimal status.
inline RelaxationSolution solve_relaxation(const RelaxationLP& r, const SolverOptions& solver = {}) {
  RelaxationSolution sol;
  sol.variant = r.variant;
  sol.grid = r.grid;
  sol.zeta = r.zeta;
  sol.raw = solve_lp(r.lp, solver);
  if (sol.raw.status != LpStatus::optimal)
    throw NumericalFailure(std::string("relaxation LP is ") + to_string(sol.raw.status));
  sol.gamma_star = sol.raw.objective_value;
  const auto& v = sol.raw.values;
  auto clamp01 = [](double a) { return std::clamp(a, 0.0, 1.0); };
  sol.arms.resize(r.w.size());
  for (std::size_t i = 0; i < r.w.size(); ++i) {
    for (std::size_t u = 0; u < r.w[i].size(); ++u) {
      StateValues s;
      s.w = clamp01(v[r.w[i][u]]);
      s.z = std::clamp(v[r.z[i][u]], 0.0, s.w);
      if (r.variant == ObjectiveKind::concave) {
        for (auto idx : r.x_grid[i][u]) s.x_grid.push_back(std::clamp(v[idx], 0.0, s.w));
      } else {
        s.x = std::clamp(v[r.x[i][u]], 0.0, s.w);
      }
      const double used = s.z + s.exploit_mass();
      if (used > s.w) {
        if (used > s.w + 1e-6) throw NumericalFailure("relaxation occupancy exceeds w beyond cleanup tolerance");
        const double f = s.w / used;
        s.z *= f;
        s.x *= f;
        for (auto& xv : s.x_grid) xv *= f;
      }
      s.reachable = s.w >= unreachable_mass;
      sol.arms[i].push_back(std::move(s));
    }
  }
  return sol;
}

inline RelaxationSolution solve_relaxation(const BanditInstance& inst, const RelaxationOptions& opts = {},
                                           const SolverOptions& solver = {}) {
  return solve_relaxation(build_relaxation(inst, opts), solver);
}

// ---------------------------------------------------------------------------
// single-arm policies

enum class DrawOutcome { play, exploit, stop };

struct Draw {
  DrawOutcome outcome = DrawOutcome::stop;
  /// Concave exploit only: grid index l (weight l/L).
  std::size_t level = 0;
};

/// The randomized stopping rule of one arm: in state u draw q uniformly on [0, w_u];
/// play below z_u, exploit in the next x_u (or the x_{u,l} blocks), stop otherwise.
struct SingleArmPolicy {
  std::size_t arm = 0;
  std::string arm_id;
  std::vector<StateValues> thresholds;
  std::size_t grid = 0;
  /// P(phi): exploit probability (concave: expected weight E[eps_i]).
  double explore_prob = 0.0;
  /// R(phi): expected exploitation reward (concave: expected zeta).
  double reward = 0.0;
  /// C(phi): expected cost of switching into and playing the arm.
  double cost = 0.0;

  /// Play, exploit or stop at state for a uniform draw u01 in [0, 1).
  Draw draw(std::size_t state, double u01) const {
    const auto& t = thresholds[state];
    if (!t.reachable) return {};
    const double q = u01 * t.w;
    if (q < t.z) return {DrawOutcome::play, 0};
    if (t.x_grid.empty()) {
      if (q < t.z + t.x) return {DrawOutcome::exploit, 0};
      return {};
    }
    double acc = t.z;
    for (std::size_t l = 0; l < t.x_grid.size(); ++l) {
      acc += t.x_grid[l];
      if (t.x_grid[l] > 0.0 && q < acc) return {DrawOutcome::exploit, l};
    }
    return {};
  }

  double play_prob(std::size_t state) const {
    const auto& t = thresholds[state];
    return t.reachable ? std::min(1.0, t.z / t.w) : 0.0;
  }
  double exploit_prob(std::size_t state) const {
    const auto& t = thresholds[state];
    return t.reachable ? std::min(1.0 - play_prob(state), t.exploit_mass() / t.w) : 0.0;
  }
};

/// One policy per arm with its statistics P, R and C.
inline std::vector<SingleArmPolicy> extract_single_arm_policies(const RelaxationSolution& sol,
                                                                const BanditInstance& inst) {
  if (sol.arms.size() != inst.arms.size()) throw ValidationError("solution does not match the instance");
  std::vector<SingleArmPolicy> out;
  for (std::size_t i = 0; i < inst.arms.size(); ++i) {
    const auto& arm = inst.arms[i];
    SingleArmPolicy p;
    p.arm = i;
    p.arm_id = arm.id();
    p.thresholds = sol.arms[i];
    p.grid = sol.grid;
    p.cost = arm.switch_cost() * p.thresholds[arm.root()].z;
    for (std::size_t u = 0; u < arm.size(); ++u) {
      const auto& t = p.thresholds[u];
      p.cost += arm.state(u).play_cost * t.z;
      if (sol.variant == ObjectiveKind::concave) {
        for (std::size_t l = 0; l < t.x_grid.size(); ++l) {
          p.explore_prob += static_cast<double>(l) * t.x_grid[l];
          p.reward += t.x_grid[l] * sol.zeta[i][u][l];
        }
      } else {
        p.explore_prob += t.x;
        p.reward += t.x * arm.state(u).reward;
      }
    }
    if (sol.variant == ObjectiveKind::concave) p.explore_prob /= static_cast<double>(sol.grid);
    p.explore_prob = std::clamp(p.explore_prob, 0.0, 1.0);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace bbandit
