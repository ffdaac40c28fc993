#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "bbandit/bench.hpp"
#include "bbandit/instance_io.hpp"
#include "bbandit/oracle.hpp"
#include "bbandit/policies.hpp"
#include "bbandit/relaxations.hpp"

using namespace bbandit;

namespace {

constexpr int exit_check_failed = 1;
constexpr int exit_bad_input = 2;

double default_tolerance() {
  if (const char* s = std::getenv("BBANDIT_TOL")) {
    try {
      return std::stod(s);
    } catch (const std::exception&) {
      std::cerr << "ignoring BBANDIT_TOL=" << s << "\n";
    }
  }
  return 1e-6;
}

void emit(const json& j, const std::string& out_path) {
  if (out_path.empty() || out_path == "-")
    std::cout << j.dump(2) << "\n";
  else
    write_text_file(out_path, j.dump(2) + "\n");
}

ObjectiveKind apply_variant(BanditInstance& inst, const std::string& variant, std::optional<double> epsilon) {
  if (!variant.empty()) inst.objective.kind = objective_kind_from_string(variant);
  auto& cp = inst.objective.concave;
  if (inst.objective.kind == ObjectiveKind::concave && cp.sigmas.empty()) cp.sigmas.assign(inst.arms.size(), 1.0);
  if (epsilon) cp.epsilon = *epsilon;
  return inst.objective.kind;
}

ExecMode parse_mode(const std::string& m) {
  if (m == "order" || m == "greedy-order") return ExecMode::greedy_order;
  if (m == "violate" || m == "greedy-violate") return ExecMode::greedy_violate;
  throw ValidationError("unknown mode: " + m);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budgeted Bayesian bandit planner: LP relaxations, greedy policies and exact checks"};
  app.require_subcommand(1);
  const double tol = default_tolerance();
  int status = 0;

  // gen
  auto* gen = app.add_subcommand("gen", "Generate an instance");
  std::string gen_family = "integrality-gap", gen_out, gen_objective = "budgeted";
  int gen_n = 4, gen_max_arms = 3;
  std::uint64_t gen_seed = 0;
  std::size_t gen_index = 0;
  gen->add_option("--family", gen_family,
                  "integrality-gap | adaptivity-gap | random-two-level | random-beta | random-mixed")
      ->capture_default_str();
  gen->add_option("--n", gen_n, "Arm count for the fixed families")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Random family seed")->capture_default_str();
  gen->add_option("--index", gen_index, "Which instance of the seeded suite")->capture_default_str();
  gen->add_option("--max-arms", gen_max_arms, "Random families: most arms")->capture_default_str();
  gen->add_option("--objective", gen_objective, "budgeted | lagrangean | concave")->capture_default_str();
  gen->add_option("-o,--output", gen_out, "Output file (stdout when omitted)");
  gen->callback([&] {
    GeneratorSpec g;
    g.family = family_from_string(gen_family);
    g.n = gen_n;
    g.seed = gen_seed;
    g.count = gen_index + 1;
    g.max_arms = gen_max_arms;
    g.min_arms = std::min(g.min_arms, gen_max_arms);
    g.objective = objective_kind_from_string(gen_objective);
    if (g.objective == ObjectiveKind::lagrangean) {
      g.integer_costs = false;
      g.min_cost = 0.005;
      g.max_cost = 0.04;
      g.max_switch = 0.02;
    }
    auto suite = gen_random_suite(g);
    auto& inst = suite.size() == 1 ? suite[0].instance : suite.at(gen_index).instance;
    emit(instance_to_json(inst), gen_out);
  });

  // validate
  auto* val = app.add_subcommand("validate", "Check every model assumption of an instance");
  std::string val_file;
  bool val_integer = false;
  val->add_option("file", val_file, "Instance JSON")->required();
  val->add_flag("--integer-costs", val_integer, "Also require integer costs and budget");
  val->callback([&] {
    const auto inst = load_instance(val_file);
    const auto diags = validate_instance(inst, {val_integer});
    emit({{"file", val_file}, {"valid", diags.empty()}, {"diagnostics", diagnostics_to_json(diags)}}, "");
    if (!diags.empty()) status = exit_check_failed;
  });

  // solve
  auto* solve = app.add_subcommand("solve", "Solve the LP relaxation of an instance");
  std::string solve_file, solve_variant, solve_dump, solve_out;
  std::optional<double> solve_eps;
  solve->add_option("file", solve_file, "Instance JSON")->required();
  solve->add_option("--variant", solve_variant, "budgeted | lagrangean | concave (default: the instance objective)");
  solve->add_option("--epsilon", solve_eps, "Concave grid accuracy");
  solve->add_option("--dump-lp", solve_dump, "Write the LP in text LP format");
  solve->add_option("-o,--output", solve_out, "Write the solution here instead of stdout");
  solve->callback([&] {
    auto inst = load_instance(solve_file);
    apply_variant(inst, solve_variant, solve_eps);
    require_valid(inst);
    const auto lp = build_relaxation(inst);
    if (!solve_dump.empty()) {
      std::ofstream os(solve_dump);
      if (!os) throw ValidationError("cannot write " + solve_dump);
      write_lp_text(os, lp.lp);
    }
    emit(solution_to_json(solve_relaxation(lp), inst), solve_out);
  });

  // plan
  auto* plan = app.add_subcommand("plan", "Rank arms into a greedy plan");
  std::string plan_file, plan_variant;
  double plan_alpha = 1.0;
  bool plan_nonadaptive = false;
  plan->add_option("file", plan_file, "Instance JSON")->required();
  plan->add_option("--variant", plan_variant, "Override the instance objective");
  plan->add_option("--alpha", plan_alpha, "Bicriteria budget factor (budget becomes alpha * C)")->capture_default_str();
  plan->add_flag("--nonadaptive", plan_nonadaptive, "Two-level arms: choose a probe set instead");
  plan->callback([&] {
    auto inst = load_instance(plan_file);
    apply_variant(inst, plan_variant, std::nullopt);
    require_valid(inst);
    if (plan_nonadaptive) {
      emit(nonadaptive_to_json(nonadaptive_two_level(inst, solve_relaxation(inst)), inst), "");
      return;
    }
    const auto sol = solve_relaxation(inst);
    auto j = plan_to_json(make_greedy_plan(extract_single_arm_policies(sol, inst), inst, plan_alpha));
    j["gamma_star"] = sol.gamma_star;
    emit(j, "");
  });

  // run
  auto* run = app.add_subcommand("run", "Execute the greedy plan");
  std::string run_file, run_trace, run_mode = "order";
  std::uint64_t run_seed = 0;
  std::size_t run_reps = 1;
  double run_alpha = 1.0;
  run->add_option("file", run_file, "Instance JSON")->required();
  run->add_option("--seed", run_seed, "Random seed")->required();
  run->add_option("--reps", run_reps, "Monte Carlo replications")->capture_default_str();
  run->add_option("--alpha", run_alpha, "Bicriteria budget factor")->capture_default_str();
  run->add_option("--mode", run_mode, "order | violate")->capture_default_str();
  run->add_option("--trace", run_trace, "Write the first replication as JSON lines");
  run->callback([&] {
    const auto inst = load_instance(run_file);
    require_valid(inst);
    const auto mode = parse_mode(run_mode);
    const auto p = plan_instance(inst, run_alpha);
    if (!run_trace.empty()) write_text_file(run_trace, trace_to_jsonl(inst, execute_plan(inst, p, mode, run_seed, 0)));
    json out{{"seed", run_seed}, {"mode", run_mode}, {"alpha", run_alpha}};
    if (run_reps == 1) {
      const auto t = execute_plan(inst, p, mode, run_seed, 0);
      out["trace"] = trace_summary_to_json(inst, t);
      const double limit = p.variant == ObjectiveKind::lagrangean ? lp_infinity
                           : mode == ExecMode::greedy_violate    ? p.budget + max_single_arm_cost(inst)
                                                                 : p.budget;
      out["trace_ok"] = check_trace(inst, p, t, limit).ok();
    } else {
      const auto mc = monte_carlo_evaluate(inst, p, run_reps, run_seed, mode);
      out["monte_carlo"] = monte_carlo_to_json(mc);
      if (mc.violations) status = exit_check_failed;
    }
    if (p.variant != ObjectiveKind::concave && validate_instance(inst, {true}).empty()) {
      const auto ev = evaluate_plan_exact(inst, p, mode);
      out["exact"] = {{"value", ev.value}, {"reward", ev.reward}, {"cost", ev.cost}};
    }
    emit(out, "");
  });

  // oracle
  auto* orc = app.add_subcommand("oracle", "Exact optimum by dynamic programming");
  std::string orc_file;
  double orc_limit = default_oracle_limit;
  orc->add_option("file", orc_file, "Instance JSON")->required();
  orc->add_option("--limit", orc_limit, "Largest joint state count to attempt")->capture_default_str();
  orc->callback([&] {
    const auto inst = load_instance(orc_file);
    require_valid(inst);
    const auto r = dp_optimal(inst, orc_limit);
    const double g = solve_relaxation(inst).gamma_star;
    emit({{"opt", r.opt}, {"gamma_star", g}, {"ratio", r.opt > 0.0 ? json(g / r.opt) : json(nullptr)},
          {"states", r.states}},
         "");
  });

  // suite
  auto* suite = app.add_subcommand("suite", "Generate a random suite and check a guarantee on it");
  std::string suite_spec, suite_out, suite_format = "json";
  suite->add_option("--spec", suite_spec, "Suite spec JSON: {generator: {...}, guarantee, alpha, reps, seed}")
      ->required();
  suite->add_option("-o,--output", suite_out, "Report file (stdout when omitted)");
  suite->add_option("--format", suite_format, "json | csv")->capture_default_str();
  suite->callback([&] {
    const auto spec = read_json_file(suite_spec);
    const auto g = generator_spec_from_json(spec.value("generator", json::object()));
    const auto opts = suite_options_from_json(spec, tol);
    const auto rep = run_guarantee_suite(gen_random_suite(g), opts);
    if (suite_format == "csv") {
      if (suite_out.empty())
        std::cout << report_to_csv(rep);
      else
        write_text_file(suite_out, report_to_csv(rep));
    } else {
      emit(report_to_json(rep), suite_out);
    }
    if (!rep.passed()) status = exit_check_failed;
  });

  // report
  auto* report = app.add_subcommand("report", "Re-render a saved suite report");
  std::string report_file = "-", report_format = "json";
  report->add_option("file", report_file, "Report JSON (stdin when omitted)");
  report->add_option("--format", report_format, "json | csv")->capture_default_str();
  report->callback([&] {
    const json j = report_file == "-" ? json::parse(std::cin) : read_json_file(report_file);
    const auto rep = report_from_json(j);
    if (report_format == "csv")
      std::cout << report_to_csv(rep);
    else if (report_format == "json")
      emit(report_to_json(rep), "");
    else
      throw ValidationError("unknown format: " + report_format);
    if (!rep.passed()) status = exit_check_failed;
  });

  // adaptivity
  auto* adapt = app.add_subcommand("adaptivity", "Adaptive two-phase strategy vs uniform allocation");
  std::vector<int> adapt_n{16, 64, 256};
  std::size_t adapt_reps = 10000;
  std::uint64_t adapt_seed = 0;
  adapt->add_option("--n", adapt_n, "Arm counts (perfect squares)")->delimiter(',')->capture_default_str();
  adapt->add_option("--reps", adapt_reps, "Monte Carlo replications")->capture_default_str();
  adapt->add_option("--seed", adapt_seed, "Random seed")->capture_default_str();
  adapt->callback([&] {
    json rows = json::array();
    for (int n : adapt_n) {
      const auto r = adaptivity_demo(n, adapt_reps, adapt_seed);
      rows.push_back({{"n", r.n},
                      {"adaptive", r.adaptive},
                      {"adaptive_se", r.adaptive_se},
                      {"uniform", r.uniform},
                      {"uniform_se", r.uniform_se},
                      {"ratio", r.ratio}});
    }
    emit({{"reps", adapt_reps}, {"seed", adapt_seed}, {"rows", rows}}, "");
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_bad_input;
  }
  return status;
}
