#pragma once

// JSON reading and writing for instances, solutions, plans, traces and suite reports.

#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bbandit/bench.hpp"
#include "bbandit/oracle.hpp"
#include "bbandit/policies.hpp"
#include "bbandit/relaxations.hpp"
#include "bbandit/statespace.hpp"

namespace bbandit {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// instances

inline json arm_to_json(const ArmStateSpace& arm) {
  json states = json::array();
  for (std::size_t u = 0; u < arm.size(); ++u) {
    const auto& s = arm.state(u);
    json children = json::array();
    for (const auto& t : s.transitions) children.push_back({{"state", arm.state(t.target).id}, {"prob", t.prob}});
    states.push_back({{"id", s.id}, {"reward", s.reward}, {"play_cost", s.play_cost}, {"children", children}});
  }
  return {{"id", arm.id()}, {"switch_cost", arm.switch_cost()}, {"root", arm.root_state().id}, {"states", states}};
}

inline json instance_to_json(const BanditInstance& inst) {
  json obj{{"type", std::string(to_string(inst.objective.kind))}};
  if (inst.objective.alpha != 1.0) obj["alpha"] = inst.objective.alpha;
  if (inst.objective.kind == ObjectiveKind::concave) {
    const auto& cp = inst.objective.concave;
    obj["epsilon"] = cp.epsilon;
    obj["B"] = cp.capacity;
    obj["sigmas"] = cp.sigmas;
    if (!cp.linear()) {
      json tables = json::array();
      for (std::size_t i = 0; i < inst.arms.size(); ++i) {
        json per_state = json::object();
        for (std::size_t u = 0; u < inst.arms[i].size() && u < cp.value_tables[i].size(); ++u)
          per_state[inst.arms[i].state(u).id] = cp.value_tables[i][u];
        tables.push_back(per_state);
      }
      obj["value_tables"] = tables;
    }
  }
  json arms = json::array();
  for (const auto& arm : inst.arms) arms.push_back(arm_to_json(arm));
  return {{"budget", inst.budget}, {"objective", obj}, {"arms", arms}};
}

namespace detail {

template <class T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": field '" + key + "' has the wrong type");
  }
}

template <class T>
T field_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return field<T>(j, key, where);
}

}  // namespace detail

inline ArmStateSpace arm_from_json(const json& j) {
  const auto id = detail::field<std::string>(j, "id", "arm");
  const std::string where = "arm '" + id + "'";
  const auto& states_j = j.contains("states") ? j.at("states") : json();
  if (!states_j.is_array() || states_j.empty()) throw ValidationError(where + ": 'states' must be a non-empty array");
  std::map<std::string, std::size_t> index;
  for (std::size_t u = 0; u < states_j.size(); ++u) {
    const auto sid = detail::field<std::string>(states_j[u], "id", where);
    if (!index.emplace(sid, u).second) throw ValidationError(where + ": duplicate state id '" + sid + "'");
  }
  auto lookup = [&](const std::string& sid) {
    auto it = index.find(sid);
    if (it == index.end()) throw ValidationError(where + ": unknown state '" + sid + "'");
    return it->second;
  };
  std::vector<BeliefState> states;
  for (const auto& sj : states_j) {
    BeliefState s;
    s.id = sj.at("id").get<std::string>();
    const std::string sw = where + " state '" + s.id + "'";
    s.reward = detail::field<double>(sj, "reward", sw);
    s.play_cost = detail::field_or<double>(sj, "play_cost", 0.0, sw);
    if (sj.contains("children")) {
      for (const auto& cj : sj.at("children"))
        s.transitions.push_back({lookup(detail::field<std::string>(cj, "state", sw)), detail::field<double>(cj, "prob", sw)});
    }
    states.push_back(std::move(s));
  }
  const auto root = lookup(detail::field<std::string>(j, "root", where));
  return ArmStateSpace(id, std::move(states), root, detail::field_or<double>(j, "switch_cost", 0.0, where));
}

inline BanditInstance instance_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("instance must be a JSON object");
  BanditInstance inst;
  inst.budget = detail::field_or<double>(j, "budget", 0.0, "instance");
  const json obj = j.contains("objective") ? j.at("objective") : json::object();
  inst.objective.kind = objective_kind_from_string(detail::field_or<std::string>(obj, "type", "budgeted", "objective"));
  inst.objective.alpha = detail::field_or<double>(obj, "alpha", 1.0, "objective");
  if (!j.contains("arms") || !j.at("arms").is_array()) throw ValidationError("instance: 'arms' must be an array");
  for (const auto& aj : j.at("arms")) inst.arms.push_back(arm_from_json(aj));
  auto& cp = inst.objective.concave;
  cp.epsilon = detail::field_or<double>(obj, "epsilon", cp.epsilon, "objective");
  cp.capacity = detail::field_or<double>(obj, "B", cp.capacity, "objective");
  cp.sigmas = detail::field_or<std::vector<double>>(obj, "sigmas", {}, "objective");
  if (inst.objective.kind == ObjectiveKind::concave && !obj.contains("sigmas")) cp.sigmas.assign(inst.arms.size(), 1.0);
  if (obj.contains("value_tables")) {
    const auto& tj = obj.at("value_tables");
    if (!tj.is_array() || tj.size() != inst.arms.size())
      throw ValidationError("objective: value_tables needs one entry per arm");
    for (std::size_t i = 0; i < inst.arms.size(); ++i) {
      const auto& arm = inst.arms[i];
      std::vector<std::vector<double>> per_state(arm.size());
      for (std::size_t u = 0; u < arm.size(); ++u) {
        const auto& sid = arm.state(u).id;
        if (!tj[i].contains(sid)) throw ValidationError("value_tables: arm '" + arm.id() + "' lacks state '" + sid + "'");
        per_state[u] = tj[i].at(sid).get<std::vector<double>>();
      }
      cp.value_tables.push_back(std::move(per_state));
    }
  }
  return inst;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline BanditInstance load_instance(const std::string& path) { return instance_from_json(read_json_file(path)); }

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << text;
}

inline void save_instance(const std::string& path, const BanditInstance& inst) {
  write_text_file(path, instance_to_json(inst).dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// results

inline json diagnostics_to_json(const std::vector<Diagnostic>& diags) {
  json out = json::array();
  for (const auto& d : diags)
    out.push_back({{"kind", std::string(to_string(d.kind))}, {"arm", d.arm_id}, {"state", d.state_id},
                   {"magnitude", d.magnitude}, {"message", d.message()}});
  return out;
}

inline json solution_to_json(const RelaxationSolution& sol, const BanditInstance& inst) {
  json arms = json::array();
  for (std::size_t i = 0; i < inst.arms.size(); ++i) {
    json states = json::array();
    for (std::size_t u = 0; u < inst.arms[i].size(); ++u) {
      const auto& v = sol.arms[i][u];
      json s{{"id", inst.arms[i].state(u).id}, {"w", v.w}, {"z", v.z}, {"x", v.exploit_mass()}};
      if (!v.x_grid.empty()) s["x_grid"] = v.x_grid;
      states.push_back(s);
    }
    arms.push_back({{"id", inst.arms[i].id()}, {"states", states}});
  }
  json out{{"variant", std::string(to_string(sol.variant))},
           {"gamma_star", sol.gamma_star},
           {"status", to_string(sol.raw.status)},
           {"iterations", sol.raw.iterations},
           {"arms", arms}};
  if (sol.variant == ObjectiveKind::concave) out["grid"] = sol.grid;
  return out;
}

inline json plan_to_json(const GreedyPlan& plan) {
  json order = json::array();
  for (const auto& r : plan.order) {
    json row{{"arm", r.arm_id}, {"nu", r.nu}, {"mu", r.mu}};
    // JSON has no infinity
    if (std::isfinite(r.ratio))
      row["ratio"] = r.ratio;
    else
      row["ratio"] = "inf";
    const auto& p = plan.policies[r.arm];
    row["explore_prob"] = p.explore_prob;
    row["reward"] = p.reward;
    row["cost"] = p.cost;
    order.push_back(row);
  }
  json out{{"variant", std::string(to_string(plan.variant))}, {"alpha", plan.alpha}, {"order", order}};
  if (std::isfinite(plan.budget)) out["budget"] = plan.budget;
  return out;
}

inline json trace_event_to_json(const BanditInstance& inst, const TraceEvent& e) {
  const auto& arm = inst.arms[e.arm];
  json j{{"arm", arm.id()}, {"state", arm.state(e.state).id}, {"action", to_string(e.action)}, {"cost", e.cost}, {"q", e.q}};
  if (inst.objective.kind == ObjectiveKind::concave && e.action == TraceAction::stop_exploit) j["level"] = e.level;
  return j;
}

inline json trace_summary_to_json(const BanditInstance& inst, const ExecutionTrace& t) {
  json j{{"summary", true},       {"value", t.value}, {"reward", t.reward}, {"cost", t.total_cost},
         {"seed", t.seed},        {"rep", t.rep}};
  if (t.exploited_arm) {
    const auto& arm = inst.arms[*t.exploited_arm];
    j["exploited_arm"] = arm.id();
    j["exploited_state"] = arm.state(t.exploited_state).id;
  } else {
    j["exploited_arm"] = nullptr;
  }
  if (!t.weights.empty()) {
    json w = json::object();
    for (std::size_t i = 0; i < t.weights.size(); ++i) w[inst.arms[i].id()] = t.weights[i];
    j["weights"] = w;
  }
  return j;
}

/// One event per line, then the summary record.
inline std::string trace_to_jsonl(const BanditInstance& inst, const ExecutionTrace& t) {
  std::string out;
  for (const auto& e : t.events) out += trace_event_to_json(inst, e).dump() + "\n";
  out += trace_summary_to_json(inst, t).dump() + "\n";
  return out;
}

inline json monte_carlo_to_json(const MonteCarloReport& r) {
  return {{"reps", r.reps},           {"mean", r.mean},         {"std_error", r.std_error},
          {"mean_cost", r.mean_cost}, {"max_cost", r.max_cost}, {"max_load", r.max_load},
          {"violations", r.violations}, {"violation_notes", r.violation_notes}};
}

inline json nonadaptive_to_json(const NonAdaptiveRule& rule, const BanditInstance& inst) {
  json probes = json::array();
  for (auto i : rule.probe_set) probes.push_back(inst.arms[i].id());
  json j{{"case", to_string(rule.which)}, {"probe_set", probes},       {"gamma_star", rule.gamma_star},
         {"value", rule.value},          {"probe_cost", rule.probe_cost}, {"ratio", rule.achieved_ratio}};
  j["selected"] = rule.selected ? json(inst.arms[*rule.selected].id()) : json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// suites

inline GeneratorSpec generator_spec_from_json(const json& j) {
  GeneratorSpec g;
  const std::string w = "generator";
  g.family = family_from_string(detail::field_or<std::string>(j, "family", to_string(g.family), w));
  g.count = detail::field_or<std::size_t>(j, "count", g.count, w);
  g.seed = detail::field_or<std::uint64_t>(j, "seed", g.seed, w);
  g.n = detail::field_or<int>(j, "n", g.n, w);
  g.min_arms = detail::field_or<int>(j, "min_arms", g.min_arms, w);
  g.max_arms = detail::field_or<int>(j, "max_arms", g.max_arms, w);
  g.max_leaves = detail::field_or<int>(j, "max_leaves", g.max_leaves, w);
  g.max_alpha = detail::field_or<int>(j, "max_alpha", g.max_alpha, w);
  g.reward_power = detail::field_or<double>(j, "reward_power", g.reward_power, w);
  g.max_depth = detail::field_or<int>(j, "max_depth", g.max_depth, w);
  g.min_cost = detail::field_or<double>(j, "min_cost", g.min_cost, w);
  g.max_cost = detail::field_or<double>(j, "max_cost", g.max_cost, w);
  g.min_switch = detail::field_or<double>(j, "min_switch", g.min_switch, w);
  g.max_switch = detail::field_or<double>(j, "max_switch", g.max_switch, w);
  g.integer_costs = detail::field_or<bool>(j, "integer_costs", g.integer_costs, w);
  g.budget_cap = detail::field_or<double>(j, "budget_cap", g.budget_cap, w);
  g.objective = objective_kind_from_string(detail::field_or<std::string>(j, "objective", "budgeted", w));
  g.capacity = detail::field_or<double>(j, "B", g.capacity, w);
  g.epsilon = detail::field_or<double>(j, "epsilon", g.epsilon, w);
  g.oracle_limit = detail::field_or<double>(j, "oracle_limit", g.oracle_limit, w);
  return g;
}

inline json generator_spec_to_json(const GeneratorSpec& g) {
  return {{"family", to_string(g.family)},   {"count", g.count},         {"seed", g.seed},
          {"n", g.n},                         {"min_arms", g.min_arms},   {"max_arms", g.max_arms},
          {"max_leaves", g.max_leaves},       {"reward_power", g.reward_power}, {"max_alpha", g.max_alpha}, {"max_depth", g.max_depth},
          {"min_cost", g.min_cost},           {"max_cost", g.max_cost},   {"min_switch", g.min_switch},
          {"max_switch", g.max_switch},       {"integer_costs", g.integer_costs},
          {"budget_cap", g.budget_cap},       {"objective", std::string(to_string(g.objective))},
          {"B", g.capacity},                  {"epsilon", g.epsilon},     {"oracle_limit", g.oracle_limit}};
}

/// {"generator": {...}, "guarantee": "...", "alpha", "reps", "seed", "oracle", "tolerance"}
inline SuiteOptions suite_options_from_json(const json& j, double default_tolerance) {
  SuiteOptions o;
  const std::string w = "suite";
  o.guarantee = guarantee_from_string(detail::field_or<std::string>(j, "guarantee", "greedy-order", w));
  o.alpha = detail::field_or<double>(j, "alpha", o.alpha, w);
  o.reps = detail::field_or<std::size_t>(j, "reps", o.reps, w);
  o.seed = detail::field_or<std::uint64_t>(j, "seed", o.seed, w);
  o.use_oracle = detail::field_or<bool>(j, "oracle", o.use_oracle, w);
  o.tolerance = detail::field_or<double>(j, "tolerance", default_tolerance, w);
  return o;
}

namespace detail {

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace detail

inline json report_to_json(const EvaluationReport& rep) {
  json rows = json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"instance", r.instance},
                    {"gamma_star", r.gamma_star},
                    {"opt", detail::optional_number(r.opt)},
                    {"value", r.value},
                    {"std_error", r.std_error},
                    {"ratio_gamma", r.ratio_gamma},
                    {"ratio_opt", detail::optional_number(r.ratio_opt)},
                    {"required", r.required},
                    {"bound_ok", r.bound_ok},
                    {"relaxation_ok", r.relaxation_ok},
                    {"traces_ok", r.traces_ok},
                    {"note", r.note}});
  return {{"guarantee", to_string(rep.guarantee)},
          {"alpha", rep.alpha},
          {"rows", rows},
          {"summary",
           {{"instances", rep.rows.size()},
            {"min_ratio_gamma", rep.rows.empty() ? json(nullptr) : json(rep.min_ratio_gamma)},
            {"min_ratio_opt", detail::optional_number(rep.min_ratio_opt)},
            {"failures", rep.failures},
            {"passed", rep.passed()}}}};
}

inline EvaluationReport report_from_json(const json& j) {
  EvaluationReport rep;
  rep.guarantee = guarantee_from_string(detail::field<std::string>(j, "guarantee", "report"));
  rep.alpha = detail::field_or<double>(j, "alpha", 1.0, "report");
  auto opt_num = [](const json& r, const char* k) -> std::optional<double> {
    if (!r.contains(k) || r.at(k).is_null()) return std::nullopt;
    return r.at(k).get<double>();
  };
  for (const auto& rj : detail::field<json>(j, "rows", "report")) {
    ReportRow r;
    r.instance = rj.at("instance").get<std::string>();
    r.gamma_star = rj.at("gamma_star").get<double>();
    r.opt = opt_num(rj, "opt");
    r.value = rj.at("value").get<double>();
    r.std_error = rj.value("std_error", 0.0);
    r.ratio_gamma = rj.at("ratio_gamma").get<double>();
    r.ratio_opt = opt_num(rj, "ratio_opt");
    r.required = rj.value("required", 0.0);
    r.bound_ok = rj.value("bound_ok", true);
    r.relaxation_ok = rj.value("relaxation_ok", true);
    r.traces_ok = rj.value("traces_ok", true);
    r.note = rj.value("note", "");
    rep.min_ratio_gamma = std::min(rep.min_ratio_gamma, r.ratio_gamma);
    if (r.ratio_opt) rep.min_ratio_opt = std::min(rep.min_ratio_opt.value_or(lp_infinity), *r.ratio_opt);
    if (!r.ok()) ++rep.failures;
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

namespace detail {

inline std::string csv_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

inline std::string report_to_csv(const EvaluationReport& rep) {
  std::string out = "instance,gamma_star,opt,value,std_error,ratio_gamma,ratio_opt,required,bound_ok,relaxation_ok,traces_ok,note\n";
  auto opt = [](const std::optional<double>& v) { return v ? detail::csv_number(*v) : std::string(); };
  auto flag = [](bool b) { return std::string(b ? "1" : "0"); };
  for (const auto& r : rep.rows) {
    out += detail::csv_field(r.instance) + "," + detail::csv_number(r.gamma_star) + "," + opt(r.opt) + "," +
           detail::csv_number(r.value) + "," + detail::csv_number(r.std_error) + "," + detail::csv_number(r.ratio_gamma) +
           "," + opt(r.ratio_opt) + "," + detail::csv_number(r.required) + "," + flag(r.bound_ok) + "," +
           flag(r.relaxation_ok) + "," + flag(r.traces_ok) + "," + detail::csv_field(r.note) + "\n";
  }
  return out;
}

}  // namespace bbandit
