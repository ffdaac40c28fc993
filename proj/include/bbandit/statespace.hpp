#pragma once

// Arm state spaces (belief DAGs), bandit instances and their validation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace bbandit {

/// Tolerance used by every model check (normalization, martingale, concavity).
inline constexpr double model_tolerance = 1e-9;

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Transition {
  std::size_t target = 0;
  double prob = 0.0;
};

/// One posterior summary of an arm: expected reward r_u, play cost c_u and the
/// outcome distribution of a play in this state.
struct BeliefState {
  std::string id;
  double reward = 0.0;
  double play_cost = 0.0;
  std::vector<Transition> transitions;

  bool is_leaf() const { return transitions.empty(); }
};

/// The belief DAG of one arm. Structure (ids, target indices) is checked on
/// construction; numeric model assumptions are reported by validate_instance.
class ArmStateSpace {
 public:
  ArmStateSpace() = default;

  ArmStateSpace(std::string arm_id, std::vector<BeliefState> states, std::size_t root,
                double switch_cost)
      : id_(std::move(arm_id)), states_(std::move(states)), root_(root), switch_cost_(switch_cost) {
    if (states_.empty()) throw ValidationError("arm '" + id_ + "' has no states");
    if (root_ >= states_.size()) throw ValidationError("arm '" + id_ + "' root index out of range");
    for (std::size_t i = 0; i < states_.size(); ++i) {
      auto [it, inserted] = index_.emplace(states_[i].id, i);
      if (!inserted) throw ValidationError("arm '" + id_ + "' has duplicate state id '" + states_[i].id + "'");
      for (const auto& t : states_[i].transitions) {
        if (t.target >= states_.size())
          throw ValidationError("arm '" + id_ + "' state '" + states_[i].id + "' has a dangling transition");
      }
      // leaves are never played; their cost is stored as 0
      if (states_[i].is_leaf()) states_[i].play_cost = 0.0;
    }
    compute_topological_order();
  }

  const std::string& id() const { return id_; }
  std::size_t root() const { return root_; }
  double switch_cost() const { return switch_cost_; }
  std::size_t size() const { return states_.size(); }
  std::span<const BeliefState> states() const { return states_; }
  const BeliefState& state(std::size_t i) const { return states_.at(i); }
  const BeliefState& root_state() const { return states_[root_]; }

  std::optional<std::size_t> find(std::string_view state_id) const {
    auto it = index_.find(std::string(state_id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool is_dag() const { return is_dag_; }

  /// All states in an order where every parent precedes its children.
  /// Empty when the graph has a cycle.
  const std::vector<std::size_t>& topological_order() const { return topo_; }

  /// Cost of the first play of this arm: switch cost plus the root's play cost.
  double first_play_cost() const { return switch_cost_ + states_[root_].play_cost; }

  /// h_i plus the most expensive root-to-leaf sequence of plays.
  double max_exploration_cost() const {
    require_dag();
    std::vector<double> best(states_.size(), 0.0);
    for (auto it = topo_.rbegin(); it != topo_.rend(); ++it) {
      const auto& s = states_[*it];
      if (s.is_leaf()) continue;
      double tail = 0.0;
      for (const auto& t : s.transitions) tail = std::max(tail, best[t.target]);
      best[*it] = s.play_cost + tail;
    }
    return switch_cost_ + best[root_];
  }

  /// Longest root-to-leaf path length in plays.
  std::size_t depth() const {
    require_dag();
    std::vector<std::size_t> d(states_.size(), 0);
    for (auto it = topo_.rbegin(); it != topo_.rend(); ++it) {
      for (const auto& t : states_[*it].transitions) d[*it] = std::max(d[*it], d[t.target] + 1);
    }
    return d[root_];
  }

  void require_dag() const {
    if (!is_dag_) throw ValidationError("arm '" + id_ + "' state graph has a cycle");
  }

  friend bool operator==(const ArmStateSpace& a, const ArmStateSpace& b) {
    if (a.root_ != b.root_ || a.switch_cost_ != b.switch_cost_ || a.states_.size() != b.states_.size())
      return false;
    for (std::size_t i = 0; i < a.states_.size(); ++i) {
      const auto& x = a.states_[i];
      const auto& y = b.states_[i];
      if (x.reward != y.reward || x.play_cost != y.play_cost || x.transitions.size() != y.transitions.size())
        return false;
      for (std::size_t k = 0; k < x.transitions.size(); ++k) {
        if (x.transitions[k].target != y.transitions[k].target || x.transitions[k].prob != y.transitions[k].prob)
          return false;
      }
    }
    return true;
  }

 private:
  void compute_topological_order() {
    std::vector<std::size_t> indegree(states_.size(), 0);
    for (const auto& s : states_)
      for (const auto& t : s.transitions) ++indegree[t.target];
    std::queue<std::size_t> ready;
    for (std::size_t i = 0; i < states_.size(); ++i)
      if (indegree[i] == 0) ready.push(i);
    topo_.clear();
    while (!ready.empty()) {
      std::size_t u = ready.front();
      ready.pop();
      topo_.push_back(u);
      for (const auto& t : states_[u].transitions)
        if (--indegree[t.target] == 0) ready.push(t.target);
    }
    is_dag_ = topo_.size() == states_.size();
    if (!is_dag_) topo_.clear();
  }

  std::string id_;
  std::vector<BeliefState> states_;
  std::size_t root_ = 0;
  double switch_cost_ = 0.0;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::size_t> topo_;
  bool is_dag_ = false;
};

enum class ObjectiveKind { budgeted, lagrangean, concave };

inline std::string_view to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::budgeted: return "budgeted";
    case ObjectiveKind::lagrangean: return "lagrangean";
    case ObjectiveKind::concave: return "concave";
  }
  return "unknown";
}

inline ObjectiveKind objective_kind_from_string(std::string_view s) {
  if (s == "budgeted") return ObjectiveKind::budgeted;
  if (s == "lagrangean") return ObjectiveKind::lagrangean;
  if (s == "concave") return ObjectiveKind::concave;
  throw ValidationError("unknown objective type '" + std::string(s) + "'");
}

/// Concave exploitation: weights y_i in [0,1] under sum_i sigma_i y_i <= capacity,
/// value sum_i g_u(y_i). Value functions are sampled on the grid l/L.
struct ConcaveProblem {
  std::vector<double> sigmas;
  double capacity = 1.0;
  double epsilon = 0.25;
  /// value_tables[arm][state][l] = g_u(l/L). Empty means the linear model g_u(y) = r_u y.
  std::vector<std::vector<std::vector<double>>> value_tables;

  /// L = ceil(n / epsilon).
  std::size_t grid_size(std::size_t arm_count) const {
    if (!(epsilon > 0.0)) throw ValidationError("concave epsilon must be positive");
    return static_cast<std::size_t>(std::ceil(static_cast<double>(arm_count) / epsilon - 1e-9));
  }

  bool linear() const { return value_tables.empty(); }
};

struct Objective {
  ObjectiveKind kind = ObjectiveKind::budgeted;
  /// Bicriteria budget factor for budgeted runs (budget becomes alpha * C).
  double alpha = 1.0;
  ConcaveProblem concave;
};

struct BanditInstance {
  std::vector<ArmStateSpace> arms;
  double budget = 0.0;
  Objective objective;

  std::size_t arm_count() const { return arms.size(); }
};

/// Sampled value table zeta_u(l) of one state, materializing the linear model when
/// no explicit tables were supplied.
inline std::vector<double> value_table(const BanditInstance& inst, std::size_t arm, std::size_t state,
                                       std::size_t grid) {
  const auto& cp = inst.objective.concave;
  if (!cp.linear()) return cp.value_tables.at(arm).at(state);
  std::vector<double> t(grid + 1);
  const double r = inst.arms[arm].state(state).reward;
  for (std::size_t l = 0; l <= grid; ++l) t[l] = r * static_cast<double>(l) / static_cast<double>(grid);
  return t;
}

// ---------------------------------------------------------------------------
// builders

/// Two-level (star) arm: one play reveals a deterministic value a_j drawn with
/// probability p_j. Duplicate values stay separate leaves.
inline ArmStateSpace build_two_level_arm(std::string arm_id, std::span<const double> values,
                                         std::span<const double> probs, double play_cost,
                                         double switch_cost) {
  if (values.empty() || values.size() != probs.size())
    throw ValidationError("two-level arm needs equally many values and probabilities (at least one)");
  if (play_cost < 0.0 || switch_cost < 0.0) throw ValidationError("costs must be non-negative");
  double total = 0.0;
  double mean = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (values[j] < 0.0 || probs[j] < 0.0) throw ValidationError("values and probabilities must be non-negative");
    total += probs[j];
    mean += probs[j] * values[j];
  }
  if (std::abs(total - 1.0) > model_tolerance) throw ValidationError("two-level probabilities must sum to 1");

  std::vector<BeliefState> states;
  states.reserve(values.size() + 1);
  BeliefState root{"root", mean, play_cost, {}};
  for (std::size_t j = 0; j < values.size(); ++j) root.transitions.push_back({j + 1, probs[j]});
  states.push_back(std::move(root));
  for (std::size_t j = 0; j < values.size(); ++j)
    states.push_back({"v" + std::to_string(j), values[j], 0.0, {}});
  return ArmStateSpace(std::move(arm_id), std::move(states), 0, switch_cost);
}

inline std::string beta_state_id(long a, long b) {
  return "B(" + std::to_string(a) + "," + std::to_string(b) + ")";
}

/// Beta-Bernoulli posterior DAG truncated after `depth` plays. State B(a,b) has
/// reward a/(a+b); success (prob a/(a+b)) leads to B(a+1,b), failure to B(a,b+1).
inline ArmStateSpace build_beta_bernoulli_arm(std::string arm_id, long alpha1, long alpha2, long depth,
                                              double play_cost, double switch_cost) {
  if (alpha1 < 1 || alpha2 < 1) throw ValidationError("Beta parameters must be positive integers");
  if (depth < 0) throw ValidationError("depth must be non-negative");
  if (play_cost < 0.0 || switch_cost < 0.0) throw ValidationError("costs must be non-negative");

  // level k holds states with (a - alpha1) = k - s successes, s failures
  auto index_of = [](long level, long failures) {
    return static_cast<std::size_t>(level * (level + 1) / 2 + failures);
  };
  std::vector<BeliefState> states;
  states.reserve(static_cast<std::size_t>((depth + 1) * (depth + 2) / 2));
  for (long level = 0; level <= depth; ++level) {
    for (long failures = 0; failures <= level; ++failures) {
      const long a = alpha1 + (level - failures);
      const long b = alpha2 + failures;
      const double n = static_cast<double>(a + b);
      BeliefState s{beta_state_id(a, b), static_cast<double>(a) / n, 0.0, {}};
      if (level < depth) {
        s.play_cost = play_cost;
        s.transitions.push_back({index_of(level + 1, failures), static_cast<double>(a) / n});
        s.transitions.push_back({index_of(level + 1, failures + 1), static_cast<double>(b) / n});
      }
      states.push_back(std::move(s));
    }
  }
  return ArmStateSpace(std::move(arm_id), std::move(states), 0, switch_cost);
}

// ---------------------------------------------------------------------------
// validation

enum class DiagnosticKind {
  duplicate_arm,
  cycle,
  unreachable,
  bad_probability,
  normalization,
  martingale,
  negative_reward,
  negative_cost,
  non_integer_cost,
  bad_budget,
  bad_objective,
  value_table,
};

inline std::string_view to_string(DiagnosticKind k) {
  switch (k) {
    case DiagnosticKind::duplicate_arm: return "duplicate_arm";
    case DiagnosticKind::cycle: return "cycle";
    case DiagnosticKind::unreachable: return "unreachable";
    case DiagnosticKind::bad_probability: return "bad_probability";
    case DiagnosticKind::normalization: return "normalization";
    case DiagnosticKind::martingale: return "martingale";
    case DiagnosticKind::negative_reward: return "negative_reward";
    case DiagnosticKind::negative_cost: return "negative_cost";
    case DiagnosticKind::non_integer_cost: return "non_integer_cost";
    case DiagnosticKind::bad_budget: return "bad_budget";
    case DiagnosticKind::bad_objective: return "bad_objective";
    case DiagnosticKind::value_table: return "value_table";
  }
  return "unknown";
}

struct Diagnostic {
  DiagnosticKind kind;
  std::string arm_id;
  std::string state_id;
  double magnitude = 0.0;

  std::string message() const {
    std::ostringstream os;
    os << to_string(kind);
    if (!arm_id.empty()) os << " arm=" << arm_id;
    if (!state_id.empty()) os << " state=" << state_id;
    os << " magnitude=" << magnitude;
    return os.str();
  }
};

struct ValidationOptions {
  /// Exact evaluation and the DP oracle index budgets by integers.
  bool require_integer_costs = false;
};

inline bool is_integral(double v) { return std::isfinite(v) && v == std::floor(v); }

namespace detail {

inline void validate_value_tables(const BanditInstance& inst, std::vector<Diagnostic>& out) {
  const auto& cp = inst.objective.concave;
  if (cp.linear()) return;
  if (cp.value_tables.size() != inst.arms.size()) {
    out.push_back({DiagnosticKind::value_table, "", "", std::abs(double(cp.value_tables.size()) - double(inst.arms.size()))});
    return;
  }
  if (!(cp.epsilon > 0.0)) return;
  const std::size_t grid = cp.grid_size(inst.arms.size());
  for (std::size_t i = 0; i < inst.arms.size(); ++i) {
    const auto& arm = inst.arms[i];
    const auto& tables = cp.value_tables[i];
    if (tables.size() != arm.size()) {
      out.push_back({DiagnosticKind::value_table, arm.id(), "", std::abs(double(tables.size()) - double(arm.size()))});
      continue;
    }
    bool shapes_ok = true;
    for (std::size_t u = 0; u < arm.size(); ++u) {
      const auto& t = tables[u];
      const auto& sid = arm.state(u).id;
      if (t.size() != grid + 1) {
        out.push_back({DiagnosticKind::value_table, arm.id(), sid, std::abs(double(t.size()) - double(grid + 1))});
        shapes_ok = false;
        continue;
      }
      for (std::size_t l = 0; l <= grid; ++l) {
        if (t[l] < 0.0) out.push_back({DiagnosticKind::value_table, arm.id(), sid, -t[l]});
        if (l > 0 && t[l] < t[l - 1] - model_tolerance)
          out.push_back({DiagnosticKind::value_table, arm.id(), sid, t[l - 1] - t[l]});
        if (l > 0 && l < grid) {
          const double second = t[l + 1] - 2.0 * t[l] + t[l - 1];
          if (second > model_tolerance) out.push_back({DiagnosticKind::value_table, arm.id(), sid, second});
        }
      }
    }
    if (!shapes_ok) continue;
    // super-martingale: g_u(y) >= sum_v p_uv g_v(y) on every grid point
    for (std::size_t u = 0; u < arm.size(); ++u) {
      const auto& s = arm.state(u);
      if (s.is_leaf()) continue;
      double worst = 0.0;
      for (std::size_t l = 0; l <= grid; ++l) {
        double expect = 0.0;
        for (const auto& tr : s.transitions) expect += tr.prob * tables[tr.target][l];
        worst = std::max(worst, expect - tables[u][l]);
      }
      if (worst > model_tolerance) out.push_back({DiagnosticKind::value_table, arm.id(), s.id, worst});
    }
  }
}

}  // namespace detail

/// Checks every model assumption; returns one diagnostic per violation (empty when clean).
inline std::vector<Diagnostic> validate_instance(const BanditInstance& inst, const ValidationOptions& opts = {}) {
  std::vector<Diagnostic> out;
  std::unordered_map<std::string, int> seen;
  for (const auto& arm : inst.arms) {
    if (seen[arm.id()]++ == 1) out.push_back({DiagnosticKind::duplicate_arm, arm.id(), "", 1.0});

    if (arm.switch_cost() < 0.0) out.push_back({DiagnosticKind::negative_cost, arm.id(), "", -arm.switch_cost()});
    if (opts.require_integer_costs && !is_integral(arm.switch_cost()))
      out.push_back({DiagnosticKind::non_integer_cost, arm.id(), "",
                     std::abs(arm.switch_cost() - std::round(arm.switch_cost()))});

    if (!arm.is_dag()) {
      out.push_back({DiagnosticKind::cycle, arm.id(), "", 1.0});
    } else {
      std::vector<bool> reached(arm.size(), false);
      reached[arm.root()] = true;
      for (std::size_t u : arm.topological_order()) {
        if (!reached[u]) continue;
        for (const auto& t : arm.state(u).transitions) reached[t.target] = true;
      }
      for (std::size_t u = 0; u < arm.size(); ++u)
        if (!reached[u]) out.push_back({DiagnosticKind::unreachable, arm.id(), arm.state(u).id, 1.0});
    }

    for (const auto& s : arm.states()) {
      if (!(s.reward >= 0.0)) out.push_back({DiagnosticKind::negative_reward, arm.id(), s.id, std::abs(s.reward)});
      if (!(s.play_cost >= 0.0)) out.push_back({DiagnosticKind::negative_cost, arm.id(), s.id, std::abs(s.play_cost)});
      if (opts.require_integer_costs && !is_integral(s.play_cost))
        out.push_back({DiagnosticKind::non_integer_cost, arm.id(), s.id, std::abs(s.play_cost - std::round(s.play_cost))});
      if (s.is_leaf()) continue;
      double total = 0.0;
      double expect = 0.0;
      for (const auto& t : s.transitions) {
        if (t.prob < 0.0 || t.prob > 1.0)
          out.push_back({DiagnosticKind::bad_probability, arm.id(), s.id, t.prob < 0.0 ? -t.prob : t.prob - 1.0});
        total += t.prob;
        expect += t.prob * arm.state(t.target).reward;
      }
      if (std::abs(total - 1.0) > model_tolerance)
        out.push_back({DiagnosticKind::normalization, arm.id(), s.id, std::abs(total - 1.0)});
      if (std::abs(s.reward - expect) > model_tolerance)
        out.push_back({DiagnosticKind::martingale, arm.id(), s.id, std::abs(s.reward - expect)});
    }
  }

  const auto kind = inst.objective.kind;
  if (kind != ObjectiveKind::lagrangean) {
    if (!std::isfinite(inst.budget) || inst.budget < 0.0)
      out.push_back({DiagnosticKind::bad_budget, "", "", std::abs(inst.budget)});
    else if (opts.require_integer_costs && !is_integral(inst.budget))
      out.push_back({DiagnosticKind::non_integer_cost, "", "", std::abs(inst.budget - std::round(inst.budget))});
  }
  if (!(inst.objective.alpha >= 1.0))
    out.push_back({DiagnosticKind::bad_objective, "", "", 1.0 - inst.objective.alpha});
  if (kind == ObjectiveKind::concave) {
    const auto& cp = inst.objective.concave;
    if (!(cp.epsilon > 0.0)) out.push_back({DiagnosticKind::bad_objective, "", "", std::abs(cp.epsilon)});
    if (!(cp.capacity > 0.0)) out.push_back({DiagnosticKind::bad_objective, "", "", std::abs(cp.capacity)});
    if (cp.sigmas.size() != inst.arms.size()) {
      out.push_back({DiagnosticKind::bad_objective, "", "",
                     std::abs(double(cp.sigmas.size()) - double(inst.arms.size()))});
    } else {
      for (std::size_t i = 0; i < cp.sigmas.size(); ++i) {
        const double s = cp.sigmas[i];
        if (s < 0.0 || s > cp.capacity)
          out.push_back({DiagnosticKind::bad_objective, inst.arms[i].id(), "", s < 0.0 ? -s : s - cp.capacity});
      }
    }
    detail::validate_value_tables(inst, out);
  }
  return out;
}

/// Throws ValidationError carrying the first diagnostic when the instance is not clean.
inline void require_valid(const BanditInstance& inst, const ValidationOptions& opts = {}) {
  auto diags = validate_instance(inst, opts);
  if (!diags.empty()) throw ValidationError("invalid instance: " + diags.front().message());
}

}  // namespace bbandit
