#pragma once

// Exact optimal adaptive policies on small instances by dynamic programming over the
// joint state, and exact occupancy statistics of any (randomized) policy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "bbandit/lp.hpp"
#include "bbandit/policies.hpp"
#include "bbandit/relaxations.hpp"
#include "bbandit/statespace.hpp"

namespace bbandit {

class OracleLimitExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double default_oracle_limit = 1e7;

struct JointState {
  std::vector<std::size_t> states;
  /// Remaining budget (unused for the Lagrangean objective).
  double remaining = 0.0;
  /// Last arm played, -1 before the first play.
  int last = -1;
};

inline JointState initial_joint_state(const BanditInstance& inst) {
  JointState s;
  for (const auto& arm : inst.arms) s.states.push_back(arm.root());
  s.remaining = inst.budget;
  return s;
}

/// Play charge of arm i in joint state s: c_u, plus h_i unless arm i was the last one played.
inline double play_charge(const BanditInstance& inst, const JointState& s, std::size_t i) {
  const auto& arm = inst.arms[i];
  return arm.state(s.states[i]).play_cost + (s.last == static_cast<int>(i) ? 0.0 : arm.switch_cost());
}

/// Arm with the largest current reward (lowest index on ties).
inline std::size_t best_current_arm(const BanditInstance& inst, const JointState& s) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < inst.arms.size(); ++i)
    if (inst.arms[i].state(s.states[i]).reward > inst.arms[best].state(s.states[best]).reward) best = i;
  return best;
}

namespace detail {

inline void require_integer_costs(const BanditInstance& inst) {
  if (!is_integral(inst.budget)) throw ValidationError("the oracle needs an integer budget");
  for (const auto& arm : inst.arms) {
    if (!is_integral(arm.switch_cost())) throw ValidationError("the oracle needs integer costs (arm " + arm.id() + ")");
    for (const auto& s : arm.states())
      if (!is_integral(s.play_cost)) throw ValidationError("the oracle needs integer costs (arm " + arm.id() + ")");
  }
}

struct KeyHash {
  std::size_t operator()(const std::vector<std::int64_t>& k) const {
    std::uint64_t h = 1469598103934665603ULL;
    for (auto v : k) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

// Groups structurally identical arms; returns class index per arm.
inline std::vector<std::size_t> arm_classes(const BanditInstance& inst) {
  std::vector<std::size_t> cls(inst.arms.size());
  std::vector<std::size_t> reps;
  for (std::size_t i = 0; i < inst.arms.size(); ++i) {
    std::size_t c = 0;
    while (c < reps.size() && !(inst.arms[reps[c]] == inst.arms[i])) ++c;
    if (c == reps.size()) reps.push_back(i);
    cls[i] = c;
  }
  return cls;
}

inline double multisets(double m, double k) {
  // C(m + k - 1, k)
  double r = 1.0;
  for (double j = 1; j <= k; ++j) r = r * (m + j - 1.0) / j;
  return r;
}

}  // namespace detail

/// Upper estimate of the number of canonical joint states the oracle may expand.
inline double estimate_joint_states(const BanditInstance& inst) {
  const auto cls = detail::arm_classes(inst);
  std::vector<double> count, size;
  for (std::size_t i = 0; i < cls.size(); ++i) {
    if (cls[i] >= count.size()) {
      count.resize(cls[i] + 1, 0.0);
      size.resize(cls[i] + 1, 0.0);
    }
    count[cls[i]] += 1.0;
    size[cls[i]] = static_cast<double>(inst.arms[i].size());
  }
  double est = 1.0;
  for (std::size_t c = 0; c < count.size(); ++c) est *= detail::multisets(size[c], count[c]);
  if (inst.objective.kind != ObjectiveKind::lagrangean) est *= std::max(0.0, inst.budget) + 1.0;
  return est * (static_cast<double>(inst.arms.size()) + 1.0);
}

/// Optimal adaptive policy: plays (state non-leaf, charge within the remaining budget) or
/// stops and exploits the best current reward. The Lagrangean objective drops the budget
/// and subtracts every charge.
class OptimalPolicy {
 public:
  explicit OptimalPolicy(const BanditInstance& inst, double limit = default_oracle_limit)
      : inst_(inst), limit_(limit), lagrangean_(inst.objective.kind == ObjectiveKind::lagrangean) {
    if (inst.objective.kind == ObjectiveKind::concave) throw ValidationError("the oracle does not cover the concave objective");
    if (inst.arms.empty()) throw ValidationError("instance has no arms");
    for (const auto& arm : inst.arms) arm.require_dag();
    if (!lagrangean_) detail::require_integer_costs(inst);
    if (estimate_joint_states(inst) > limit_)
      throw OracleLimitExceeded("estimated joint state count exceeds the oracle limit");
    classes_ = detail::arm_classes(inst);
    class_count_ = classes_.empty() ? 0 : *std::max_element(classes_.begin(), classes_.end()) + 1;
  }

  /// OPT: optimal expected reward (budgeted) or profit (Lagrangean).
  double value() { return value(initial_joint_state(inst_)); }

  double value(const JointState& s) {
    auto key = canonical(s);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    double best = stop_value(s);
    for (std::size_t i = 0; i < inst_.arms.size(); ++i)
      if (can_play(s, i)) best = std::max(best, play_value(s, i));
    if (static_cast<double>(memo_.size()) >= limit_) throw OracleLimitExceeded("oracle memo exceeded its limit");
    memo_.emplace(std::move(key), best);
    return best;
  }

  double stop_value(const JointState& s) const {
    return inst_.arms[best_current_arm(inst_, s)].state(s.states[best_current_arm(inst_, s)]).reward;
  }

  bool can_play(const JointState& s, std::size_t i) const {
    const auto& st = inst_.arms[i].state(s.states[i]);
    if (st.is_leaf()) return false;
    return lagrangean_ || play_charge(inst_, s, i) <= s.remaining + 1e-9;
  }

  /// Q value of playing arm i in s.
  double play_value(const JointState& s, std::size_t i) {
    const auto& arm = inst_.arms[i];
    const double charge = play_charge(inst_, s, i);
    JointState next = s;
    next.last = static_cast<int>(i);
    if (!lagrangean_) next.remaining = s.remaining - charge;
    double acc = 0.0;
    for (const auto& t : arm.state(s.states[i]).transitions) {
      next.states[i] = t.target;
      acc += t.prob * value(next);
    }
    return lagrangean_ ? acc - charge : acc;
  }

  /// Optimal action: -1 to stop, otherwise the arm to play. Ties prefer stopping, then
  /// the lowest arm index.
  int decide(const JointState& s) {
    double best = stop_value(s);
    int action = -1;
    for (std::size_t i = 0; i < inst_.arms.size(); ++i) {
      if (!can_play(s, i)) continue;
      const double q = play_value(s, i);
      if (q > best + 1e-12) {
        best = q;
        action = static_cast<int>(i);
      }
    }
    return action;
  }

  std::size_t memo_size() const { return memo_.size(); }
  const BanditInstance& instance() const { return inst_; }

 private:
  std::vector<std::int64_t> canonical(const JointState& s) const {
    std::vector<std::int64_t> key;
    key.reserve(s.states.size() + 3 + class_count_);
    key.push_back(lagrangean_ ? 0 : static_cast<std::int64_t>(std::llround(s.remaining)));
    // the last arm matters only if switching back into it would be charged
    if (s.last >= 0 && inst_.arms[s.last].switch_cost() != 0.0 &&
        !inst_.arms[s.last].state(s.states[s.last]).is_leaf()) {
      key.push_back(static_cast<std::int64_t>(classes_[s.last]));
      key.push_back(static_cast<std::int64_t>(s.states[s.last]));
    } else {
      key.push_back(-1);
      key.push_back(-1);
    }
    std::vector<std::int64_t> part;
    for (std::size_t c = 0; c < class_count_; ++c) {
      part.clear();
      for (std::size_t i = 0; i < s.states.size(); ++i)
        if (classes_[i] == c) part.push_back(static_cast<std::int64_t>(s.states[i]));
      std::sort(part.begin(), part.end());
      key.insert(key.end(), part.begin(), part.end());
    }
    return key;
  }

  const BanditInstance& inst_;
  double limit_;
  bool lagrangean_;
  std::vector<std::size_t> classes_;
  std::size_t class_count_ = 0;
  std::unordered_map<std::vector<std::int64_t>, double, detail::KeyHash> memo_;
};

struct OracleResult {
  double opt = 0.0;
  std::size_t states = 0;
};

inline OracleResult dp_optimal(const BanditInstance& inst, double limit = default_oracle_limit) {
  OptimalPolicy pol(inst, limit);
  OracleResult r;
  r.opt = pol.value();
  r.states = pol.memo_size();
  return r;
}

// ---------------------------------------------------------------------------
// policy statistics

struct OracleAction {
  enum class Kind { play, exploit } kind = Kind::exploit;
  std::size_t arm = 0;
};

struct ControllerChoice {
  double prob = 1.0;
  OracleAction action;
  /// Controller memory after taking the action.
  std::uint64_t memory = 0;
};

/// A randomized policy on joint states: given the state and its own memory it returns a
/// distribution over the next action.
using Controller = std::function<std::vector<ControllerChoice>(const JointState&, std::uint64_t)>;

struct PolicyStatistics {
  /// [arm][state] occupancy probabilities.
  std::vector<std::vector<double>> w, x, z;
  /// Expected exploited reward.
  double reward = 0.0;
  /// Expected cost as the relaxation counts it (switch cost once per arm).
  double lp_cost = 0.0;
  /// Expected cost actually paid (switch cost on every switch).
  double cost = 0.0;
  std::size_t nodes = 0;
};

/// Exact statistics of a controller by expanding its decision tree.
inline PolicyStatistics enumerate_policy_statistics(const BanditInstance& inst, const Controller& controller,
                                                    double limit = default_oracle_limit) {
  PolicyStatistics st;
  const bool lagrangean = inst.objective.kind == ObjectiveKind::lagrangean;
  for (const auto& arm : inst.arms) {
    st.w.emplace_back(arm.size(), 0.0);
    st.x.emplace_back(arm.size(), 0.0);
    st.z.emplace_back(arm.size(), 0.0);
    st.w.back()[arm.root()] = 1.0;
  }
  std::function<void(const JointState&, std::uint64_t, double)> expand = [&](const JointState& s, std::uint64_t mem,
                                                                              double p) {
    if (static_cast<double>(++st.nodes) > limit) throw OracleLimitExceeded("policy tree exceeds the oracle limit");
    for (const auto& ch : controller(s, mem)) {
      const double q = p * ch.prob;
      if (q == 0.0) continue;
      const std::size_t i = ch.action.arm;
      const auto& arm = inst.arms[i];
      const std::size_t u = s.states[i];
      if (ch.action.kind == OracleAction::Kind::exploit) {
        st.x[i][u] += q;
        st.reward += q * arm.state(u).reward;
        continue;
      }
      const double charge = play_charge(inst, s, i);
      if (arm.state(u).is_leaf()) throw std::logic_error("controller plays a leaf state");
      if (!lagrangean && charge > s.remaining + 1e-9) throw std::logic_error("controller overspends the budget");
      st.z[i][u] += q;
      st.cost += q * charge;
      st.lp_cost += q * (arm.state(u).play_cost + (u == arm.root() ? arm.switch_cost() : 0.0));
      JointState next = s;
      next.last = static_cast<int>(i);
      if (!lagrangean) next.remaining -= charge;
      for (const auto& t : arm.state(u).transitions) {
        next.states[i] = t.target;
        st.w[i][t.target] += q * t.prob;
        expand(next, ch.memory, q * t.prob);
      }
    }
  };
  expand(initial_joint_state(inst), 0, 1.0);
  return st;
}

/// Deterministic controller following the optimal policy.
inline Controller optimal_controller(OptimalPolicy& pol) {
  return [&pol](const JointState& s, std::uint64_t) -> std::vector<ControllerChoice> {
    const int a = pol.decide(s);
    if (a < 0) return {{1.0, {OracleAction::Kind::exploit, best_current_arm(pol.instance(), s)}, 0}};
    return {{1.0, {OracleAction::Kind::play, static_cast<std::size_t>(a)}, 0}};
  };
}

/// Never plays; exploits the given arm at its root.
inline Controller exploit_only_controller(std::size_t arm) {
  return [arm](const JointState&, std::uint64_t) -> std::vector<ControllerChoice> {
    return {{1.0, {OracleAction::Kind::exploit, arm}, 0}};
  };
}

/// GreedyOrder for budgeted or Lagrangean plans as a joint-state controller; memory 0 is
/// the start, memory p + 1 means the plan is at position p.
inline Controller greedy_order_controller(const BanditInstance& inst, const GreedyPlan& plan) {
  return [&inst, &plan](const JointState& s, std::uint64_t mem) {
    const bool budgeted = plan.variant == ObjectiveKind::budgeted;
    std::vector<ControllerChoice> out;
    auto exploit_best = [&](double p) {
      out.push_back({p, {OracleAction::Kind::exploit, best_current_arm(inst, s)}, 0});
    };
    if (mem == 0 && budgeted && !detail::any_affordable_first_play(inst, plan.budget)) {
      exploit_best(1.0);
      return out;
    }
    std::size_t pos = mem == 0 ? 0 : static_cast<std::size_t>(mem - 1);
    double scale = 1.0;
    for (; pos < plan.order.size(); ++pos) {
      const std::size_t i = plan.order[pos].arm;
      const auto& pol = plan.policies[i];
      const std::size_t u = s.states[i];
      const double pz = pol.play_prob(u), px = pol.exploit_prob(u);
      const double pn = std::max(0.0, 1.0 - pz - px);
      if (px > 0.0) out.push_back({scale * px, {OracleAction::Kind::exploit, i}, 0});
      if (pz > 0.0) {
        if (budgeted && play_charge(inst, s, i) > s.remaining + detail::budget_slack)
          out.push_back({scale * pz, {OracleAction::Kind::exploit, i}, 0});
        else
          out.push_back({scale * pz, {OracleAction::Kind::play, i}, pos + 1});
      }
      scale *= pn;
      if (scale == 0.0) return out;
      if (budgeted && s.remaining <= detail::budget_slack) {
        exploit_best(scale);
        return out;
      }
    }
    exploit_best(scale);
    return out;
  };
}

struct LpRowCheck {
  double max_violation = 0.0;
  double objective = 0.0;
};

/// Feeds policy statistics into the budgeted relaxation: every row should hold and the
/// objective row equals the policy's expected reward.
inline LpRowCheck check_budgeted_rows(const BanditInstance& inst, const PolicyStatistics& st) {
  BanditInstance b = inst;
  b.objective.kind = ObjectiveKind::budgeted;
  const auto r = build_budgeted_lp(b);
  std::vector<double> v(r.lp.variable_count(), 0.0);
  for (std::size_t i = 0; i < inst.arms.size(); ++i) {
    for (std::size_t u = 0; u < inst.arms[i].size(); ++u) {
      v[r.w[i][u]] = st.w[i][u];
      v[r.x[i][u]] = st.x[i][u];
      v[r.z[i][u]] = st.z[i][u];
    }
  }
  return {r.lp.max_violation(v), r.lp.objective_value(v)};
}

}  // namespace bbandit
