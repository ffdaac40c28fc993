#include <gtest/gtest.h>

#include <cmath>
#include <array>
#include <random>
#include <sstream>

#include "bbandit/lp.hpp"

using namespace bbandit;

TEST(SolveLp, SingleBoundedVariable) {
  LinearProgram lp;
  auto x = lp.add_variable("x", 0.0, 1.0);
  lp.set_objective_coef(x, 1.0);
  auto sol = solve_lp(lp);
  ASSERT_EQ(sol.status, LpStatus::optimal);
  EXPECT_DOUBLE_EQ(sol.values[x], 1.0);
  EXPECT_DOUBLE_EQ(sol.objective_value, 1.0);
}

TEST(SolveLp, Infeasible) {
  LinearProgram lp;
  auto x = lp.add_variable("x", 0.0);
  lp.set_objective_coef(x, 1.0);
  lp.add_constraint("neg", {{x, 1.0}}, Relation::less_equal, -1.0);
  EXPECT_EQ(solve_lp(lp).status, LpStatus::infeasible);
}

TEST(SolveLp, Unbounded) {
  LinearProgram lp;
  auto x = lp.add_variable("x", 0.0);
  auto y = lp.add_variable("y", 0.0);
  lp.set_objective_coef(x, 1.0);
  lp.add_constraint("r", {{x, 1.0}, {y, -1.0}}, Relation::greater_equal, 0.0);
  EXPECT_EQ(solve_lp(lp).status, LpStatus::unbounded);
}

TEST(SolveLp, EqualityAndGreaterRows) {
  // max 3x + 2y  s.t. x + y = 4, x - y >= 1, x <= 3
  LinearProgram lp;
  auto x = lp.add_variable("x", 0.0, 3.0);
  auto y = lp.add_variable("y", 0.0);
  lp.set_objective_coef(x, 3.0);
  lp.set_objective_coef(y, 2.0);
  lp.add_constraint("sum", {{x, 1.0}, {y, 1.0}}, Relation::equal, 4.0);
  lp.add_constraint("gap", {{x, 1.0}, {y, -1.0}}, Relation::greater_equal, 1.0);
  auto sol = solve_lp(lp);
  ASSERT_EQ(sol.status, LpStatus::optimal);
  EXPECT_NEAR(sol.values[x], 3.0, 1e-9);
  EXPECT_NEAR(sol.values[y], 1.0, 1e-9);
  EXPECT_NEAR(sol.objective_value, 11.0, 1e-9);
}

TEST(SolveLp, FreeAndMirroredVariables) {
  // max -x - y with x free, y <= 2 (no lower), x >= y - 1, x >= -y - 5
  LinearProgram lp;
  auto x = lp.add_variable("x", -lp_infinity, lp_infinity);
  auto y = lp.add_variable("y", -lp_infinity, 2.0);
  lp.set_objective_coef(x, -1.0);
  lp.set_objective_coef(y, -1.0);
  lp.add_constraint("a", {{x, 1.0}, {y, -1.0}}, Relation::greater_equal, -1.0);
  lp.add_constraint("b", {{x, 1.0}, {y, 1.0}}, Relation::greater_equal, -5.0);
  auto sol = solve_lp(lp);
  ASSERT_EQ(sol.status, LpStatus::optimal);
  EXPECT_NEAR(sol.objective_value, 5.0, 1e-9);
}

TEST(SolveLp, FixedVariableAndDegenerateVertex) {
  // many constraints through the same vertex (0,0); fixed w = 1
  LinearProgram lp;
  auto w = lp.add_variable("w", 1.0, 1.0);
  auto x = lp.add_variable("x", 0.0, 1.0);
  auto z = lp.add_variable("z", 0.0, 1.0);
  lp.set_objective_coef(x, 1.0);
  lp.set_objective_coef(z, 0.5);
  lp.add_constraint("xz", {{x, 1.0}, {z, 1.0}, {w, -1.0}}, Relation::less_equal, 0.0);
  for (int k = 1; k <= 6; ++k)
    lp.add_constraint("d" + std::to_string(k), {{x, double(k)}, {z, -double(k)}}, Relation::less_equal, 0.0);
  auto sol = solve_lp(lp);
  ASSERT_EQ(sol.status, LpStatus::optimal);
  EXPECT_NEAR(sol.objective_value, 0.75, 1e-9);
  EXPECT_DOUBLE_EQ(sol.values[w], 1.0);
}

namespace {

// Dense random LP: max c'x, A x <= b, 0 <= x <= u.
struct RandomLp {
  LinearProgram lp;
  std::vector<std::vector<double>> a;
  std::vector<double> b, c, u;
};

RandomLp make_random_lp(std::mt19937_64& rng, std::size_t nvars, std::size_t nrows) {
  std::uniform_real_distribution<double> coef(-1.0, 2.0), pos(0.5, 3.0);
  RandomLp r;
  for (std::size_t j = 0; j < nvars; ++j) {
    r.u.push_back(pos(rng));
    r.c.push_back(coef(rng));
    auto v = r.lp.add_variable("x" + std::to_string(j), 0.0, r.u.back());
    r.lp.set_objective_coef(v, r.c.back());
  }
  for (std::size_t i = 0; i < nrows; ++i) {
    std::vector<double> row;
    std::vector<LpTerm> terms;
    for (std::size_t j = 0; j < nvars; ++j) {
      row.push_back(coef(rng));
      terms.push_back({j, row.back()});
    }
    r.a.push_back(row);
    r.b.push_back(pos(rng));
    r.lp.add_constraint("r" + std::to_string(i), terms, Relation::less_equal, r.b.back());
  }
  return r;
}

// Oracle for two-variable LPs: best feasible vertex over all pairwise line intersections.
double brute_force_2d(const RandomLp& r) {
  // lines a1 x + a2 y = b (rows and the four bound lines)
  std::vector<std::array<double, 3>> lines;
  for (std::size_t i = 0; i < r.a.size(); ++i) lines.push_back({r.a[i][0], r.a[i][1], r.b[i]});
  lines.push_back({1, 0, 0});
  lines.push_back({0, 1, 0});
  lines.push_back({1, 0, r.u[0]});
  lines.push_back({0, 1, r.u[1]});
  double best = -lp_infinity;
  for (std::size_t p = 0; p < lines.size(); ++p) {
    for (std::size_t q = p + 1; q < lines.size(); ++q) {
      const auto& l1 = lines[p];
      const auto& l2 = lines[q];
      const double det = l1[0] * l2[1] - l1[1] * l2[0];
      if (std::abs(det) < 1e-12) continue;
      const double x = (l1[2] * l2[1] - l1[1] * l2[2]) / det;
      const double y = (l1[0] * l2[2] - l1[2] * l2[0]) / det;
      bool ok = x >= -1e-9 && y >= -1e-9 && x <= r.u[0] + 1e-9 && y <= r.u[1] + 1e-9;
      for (std::size_t i = 0; ok && i < r.a.size(); ++i) ok = r.a[i][0] * x + r.a[i][1] * y <= r.b[i] + 1e-9;
      if (ok) best = std::max(best, r.c[0] * x + r.c[1] * y);
    }
  }
  return best;
}

}  // namespace

TEST(SolveLpProperty, MatchesVertexEnumerationIn2d) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    auto r = make_random_lp(rng, 2, 1 + trial % 5);
    auto sol = solve_lp(r.lp);
    ASSERT_EQ(sol.status, LpStatus::optimal) << trial;  // origin is feasible, box bounded
    EXPECT_NEAR(sol.objective_value, brute_force_2d(r), 1e-7 * (1.0 + std::abs(sol.objective_value))) << trial;
  }
}

TEST(SolveLpProperty, FeasibilityScalingRedundancyAndDuality) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    auto r = make_random_lp(rng, 3 + trial % 6, 2 + trial % 7);
    auto sol = solve_lp(r.lp);
    ASSERT_EQ(sol.status, LpStatus::optimal);
    EXPECT_LE(r.lp.max_violation(sol.values), 1e-7);

    // positive scaling of the objective scales the optimum
    LinearProgram scaled = r.lp;
    for (std::size_t j = 0; j < scaled.variable_count(); ++j) scaled.set_objective_coef(j, 3.5 * r.c[j]);
    auto s2 = solve_lp(scaled);
    ASSERT_EQ(s2.status, LpStatus::optimal);
    EXPECT_NEAR(s2.objective_value, 3.5 * sol.objective_value, 1e-7 * (1.0 + std::abs(s2.objective_value)));

    // a duplicated row changes nothing
    LinearProgram dup = r.lp;
    dup.add_constraint("dup", r.lp.constraints()[0].terms, Relation::less_equal, r.b[0]);
    auto s3 = solve_lp(dup);
    ASSERT_EQ(s3.status, LpStatus::optimal);
    EXPECT_NEAR(s3.objective_value, sol.objective_value, 1e-7 * (1.0 + std::abs(sol.objective_value)));

    // weak/strong duality with bounds written as explicit rows
    LinearProgram rows_only;
    for (std::size_t j = 0; j < r.u.size(); ++j) {
      auto v = rows_only.add_variable("x" + std::to_string(j), 0.0);
      rows_only.set_objective_coef(v, r.c[j]);
    }
    for (std::size_t i = 0; i < r.a.size(); ++i) rows_only.add_constraint("", r.lp.constraints()[i].terms, Relation::less_equal, r.b[i]);
    for (std::size_t j = 0; j < r.u.size(); ++j) rows_only.add_constraint("", {{j, 1.0}}, Relation::less_equal, r.u[j]);
    auto s4 = solve_lp(rows_only);
    ASSERT_EQ(s4.status, LpStatus::optimal);
    double dual_obj = 0.0;
    for (std::size_t i = 0; i < rows_only.constraint_count(); ++i) {
      EXPECT_GE(s4.duals[i], -1e-9);
      dual_obj += s4.duals[i] * rows_only.constraints()[i].rhs;
    }
    for (std::size_t j = 0; j < r.u.size(); ++j) {
      double reduced = -r.c[j];
      for (std::size_t i = 0; i < rows_only.constraint_count(); ++i)
        for (const auto& t : rows_only.constraints()[i].terms)
          if (t.var == j) reduced += s4.duals[i] * t.coef;
      EXPECT_GE(reduced, -1e-9);
    }
    EXPECT_NEAR(dual_obj, s4.objective_value, 1e-7 * (1.0 + std::abs(dual_obj)));
    EXPECT_NEAR(s4.objective_value, sol.objective_value, 1e-7 * (1.0 + std::abs(dual_obj)));
  }
}

TEST(SolveLp, DeterministicForFixedInput) {
  std::mt19937_64 rng(3);
  auto r = make_random_lp(rng, 8, 6);
  auto a = solve_lp(r.lp);
  auto b = solve_lp(r.lp);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(LpText, WritesSections) {
  LinearProgram lp;
  auto x = lp.add_variable("w[a:root]", 1.0, 1.0);
  auto y = lp.add_variable("x", 0.0, 1.0);
  lp.set_objective_coef(y, 2.0);
  lp.add_constraint("cap", {{x, -1.0}, {y, 1.0}}, Relation::less_equal, 0.0);
  std::ostringstream os;
  write_lp_text(os, lp);
  const std::string s = os.str();
  EXPECT_NE(s.find("Maximize\n obj: 2 x"), std::string::npos);
  EXPECT_NE(s.find(" cap: - w_a_root_ + x <= 0"), std::string::npos);
  EXPECT_NE(s.find(" w_a_root_ = 1"), std::string::npos);
  EXPECT_NE(s.find("End"), std::string::npos);
}
