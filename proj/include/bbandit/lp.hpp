#pragma once

// Small self-contained linear programming: a container for sparse LPs and a
// dense two-phase primal simplex solver.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace bbandit {

inline constexpr double lp_infinity = std::numeric_limits<double>::infinity();

enum class Relation { less_equal, equal, greater_equal };

struct LpTerm {
  std::size_t var = 0;
  double coef = 0.0;
};

struct LpVariable {
  std::string name;
  double lower = 0.0;
  double upper = lp_infinity;
};

struct LpConstraint {
  std::string name;
  std::vector<LpTerm> terms;
  Relation relation = Relation::less_equal;
  double rhs = 0.0;
};

/// Maximization LP: max c'x  s.t. rows (<=, =, >=) and lower <= x <= upper.
class LinearProgram {
 public:
  std::size_t add_variable(std::string name, double lower = 0.0, double upper = lp_infinity) {
    if (lower > upper) throw std::invalid_argument("variable '" + name + "' has lower > upper");
    if (lower == lp_infinity || upper == -lp_infinity)
      throw std::invalid_argument("variable '" + name + "' has an empty domain");
    auto [it, inserted] = by_name_.emplace(name, vars_.size());
    if (!inserted) throw std::invalid_argument("duplicate variable '" + name + "'");
    vars_.push_back({std::move(name), lower, upper});
    objective_.push_back(0.0);
    return vars_.size() - 1;
  }

  std::size_t add_constraint(std::string name, std::vector<LpTerm> terms, Relation rel, double rhs) {
    for (const auto& t : terms)
      if (t.var >= vars_.size()) throw std::invalid_argument("constraint '" + name + "' references an unknown variable");
    if (!std::isfinite(rhs)) throw std::invalid_argument("constraint '" + name + "' has a non-finite right-hand side");
    rows_.push_back({std::move(name), std::move(terms), rel, rhs});
    return rows_.size() - 1;
  }

  void set_objective_coef(std::size_t var, double coef) { objective_.at(var) = coef; }
  void add_objective_coef(std::size_t var, double coef) { objective_.at(var) += coef; }

  void set_bounds(std::size_t var, double lower, double upper) {
    if (lower > upper) throw std::invalid_argument("lower > upper");
    vars_.at(var).lower = lower;
    vars_.at(var).upper = upper;
  }

  std::size_t variable_count() const { return vars_.size(); }
  std::size_t constraint_count() const { return rows_.size(); }
  const std::vector<LpVariable>& variables() const { return vars_; }
  const std::vector<LpConstraint>& constraints() const { return rows_; }
  const std::vector<double>& objective() const { return objective_; }

  std::size_t index_of(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw std::out_of_range("unknown variable '" + name + "'");
    return it->second;
  }

  double objective_value(const std::vector<double>& x) const {
    double v = 0.0;
    for (std::size_t j = 0; j < vars_.size(); ++j) v += objective_[j] * x[j];
    return v;
  }

  double row_activity(std::size_t row, const std::vector<double>& x) const {
    double a = 0.0;
    for (const auto& t : rows_[row].terms) a += t.coef * x[t.var];
    return a;
  }

  /// Largest violation of any row or bound by the point x.
  double max_violation(const std::vector<double>& x) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < vars_.size(); ++j) {
      worst = std::max(worst, vars_[j].lower - x[j]);
      worst = std::max(worst, x[j] - vars_[j].upper);
    }
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const double a = row_activity(i, x);
      const auto& r = rows_[i];
      switch (r.relation) {
        case Relation::less_equal: worst = std::max(worst, a - r.rhs); break;
        case Relation::greater_equal: worst = std::max(worst, r.rhs - a); break;
        case Relation::equal: worst = std::max(worst, std::abs(a - r.rhs)); break;
      }
    }
    return worst;
  }

 private:
  std::vector<LpVariable> vars_;
  std::vector<LpConstraint> rows_;
  std::vector<double> objective_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

enum class LpStatus { optimal, infeasible, unbounded };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
  }
  return "unknown";
}

struct LPSolutionRaw {
  LpStatus status = LpStatus::infeasible;
  std::vector<double> values;
  double objective_value = 0.0;
  /// Row duals (shadow prices) of the user constraints; valid when optimal.
  std::vector<double> duals;
  std::size_t iterations = 0;

  double value(const LinearProgram& lp, const std::string& name) const { return values.at(lp.index_of(name)); }
};

/// The simplex hit its iteration cap or lost numerical stability.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverOptions {
  double tolerance = 1e-7;
  double pivot_tolerance = 1e-9;
  std::size_t max_iterations = 200000;
  /// Degenerate pivots in a row before pricing switches to Bland's rule for good.
  std::size_t degenerate_switch = 50;
};

namespace detail {

// How an original variable maps onto the non-negative simplex column(s).
struct ColumnMap {
  enum class Kind { fixed, shifted, mirrored, split } kind = Kind::shifted;
  double offset = 0.0;
  std::size_t col = 0;
  std::size_t col2 = 0;
};

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : m_(rows), n_(cols), a_((rows + 1) * (cols + 1), 0.0), basis_(rows) {}

  double& at(std::size_t r, std::size_t c) { return a_[r * (n_ + 1) + c]; }
  double at(std::size_t r, std::size_t c) const { return a_[r * (n_ + 1) + c]; }
  double& rhs(std::size_t r) { return at(r, n_); }
  double rhs(std::size_t r) const { return at(r, n_); }
  // objective row holds reduced costs d_j; optimal (max) when all d_j >= 0
  double& cost(std::size_t c) { return at(m_, c); }
  double cost(std::size_t c) const { return at(m_, c); }
  double& objective() { return at(m_, n_); }

  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }
  std::vector<std::size_t>& basis() { return basis_; }

  void pivot(std::size_t r, std::size_t c) {
    const std::size_t w = n_ + 1;
    double* pr = &a_[r * w];
    const double inv = 1.0 / pr[c];
    for (std::size_t j = 0; j <= n_; ++j) pr[j] *= inv;
    pr[c] = 1.0;
    for (std::size_t i = 0; i <= m_; ++i) {
      if (i == r) continue;
      double* pi = &a_[i * w];
      const double f = pi[c];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= n_; ++j) pi[j] -= f * pr[j];
      pi[c] = 0.0;
    }
    basis_[r] = c;
  }

 private:
  std::size_t m_, n_;
  std::vector<double> a_;
  std::vector<std::size_t> basis_;
};

enum class PhaseResult { optimal, unbounded };

// Primal simplex on the current tableau; columns with allowed[c] == false never enter.
inline PhaseResult run_simplex(Tableau& t, const std::vector<bool>& allowed, const SolverOptions& opt,
                               std::size_t& iterations) {
  bool bland = false;
  std::size_t degenerate_run = 0;
  const double eps = opt.pivot_tolerance;
  for (;;) {
    if (iterations++ > opt.max_iterations) throw NumericalFailure("simplex iteration limit reached");
    std::size_t enter = t.cols();
    double best = -eps;
    for (std::size_t c = 0; c < t.cols(); ++c) {
      if (!allowed[c]) continue;
      const double d = t.cost(c);
      if (d < best) {
        enter = c;
        if (bland) break;
        best = d;
      }
    }
    if (enter == t.cols()) return PhaseResult::optimal;

    // min-ratio test, ties go to the lowest basic column index
    std::size_t leave = t.rows();
    double ratio = lp_infinity;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      const double a = t.at(r, enter);
      if (a <= eps) continue;
      const double q = std::max(t.rhs(r), 0.0) / a;
      if (leave == t.rows() || q < ratio - 1e-12) {
        ratio = q;
        leave = r;
      } else if (q <= ratio + 1e-12 && t.basis()[r] < t.basis()[leave]) {
        ratio = std::min(ratio, q);
        leave = r;
      }
    }
    if (leave == t.rows()) return PhaseResult::unbounded;
    if (ratio <= 1e-12) {
      if (++degenerate_run >= opt.degenerate_switch) bland = true;
    } else {
      degenerate_run = 0;
    }
    t.pivot(leave, enter);
  }
}

}  // namespace detail

/// Solves the LP to optimality (maximization). Infeasible and unbounded problems
/// are reported through the status; NumericalFailure signals a breakdown.
inline LPSolutionRaw solve_lp(const LinearProgram& lp, const SolverOptions& opt = {}) {
  using detail::ColumnMap;
  const auto& vars = lp.variables();
  const std::size_t nv = vars.size();

  // 1. map variables onto non-negative columns
  std::vector<ColumnMap> map(nv);
  std::size_t ncols = 0;
  std::vector<std::pair<std::size_t, double>> upper_rows;  // (column, width)
  for (std::size_t j = 0; j < nv; ++j) {
    const auto& v = vars[j];
    auto& cm = map[j];
    if (std::isfinite(v.lower) && std::isfinite(v.upper) && v.upper - v.lower <= 0.0) {
      cm.kind = ColumnMap::Kind::fixed;
      cm.offset = v.lower;
    } else if (std::isfinite(v.lower)) {
      cm.kind = ColumnMap::Kind::shifted;
      cm.offset = v.lower;
      cm.col = ncols++;
      if (std::isfinite(v.upper)) upper_rows.emplace_back(cm.col, v.upper - v.lower);
    } else if (std::isfinite(v.upper)) {
      cm.kind = ColumnMap::Kind::mirrored;
      cm.offset = v.upper;
      cm.col = ncols++;
    } else {
      cm.kind = ColumnMap::Kind::split;
      cm.col = ncols++;
      cm.col2 = ncols++;
    }
  }
  const std::size_t nstruct = ncols;

  // 2. rows in column space: sum a_c y_c (rel) b, with b >= 0 after sign flips
  struct Row {
    std::vector<std::pair<std::size_t, double>> coefs;
    Relation rel;
    double rhs;
    double sign;
  };
  std::vector<Row> rows;
  rows.reserve(lp.constraint_count() + upper_rows.size());
  auto add_coef = [](Row& row, std::size_t col, double v) { row.coefs.emplace_back(col, v); };
  for (const auto& c : lp.constraints()) {
    Row row{{}, c.relation, c.rhs, 1.0};
    for (const auto& term : c.terms) {
      const auto& cm = map[term.var];
      switch (cm.kind) {
        case ColumnMap::Kind::fixed: row.rhs -= term.coef * cm.offset; break;
        case ColumnMap::Kind::shifted:
          row.rhs -= term.coef * cm.offset;
          add_coef(row, cm.col, term.coef);
          break;
        case ColumnMap::Kind::mirrored:
          row.rhs -= term.coef * cm.offset;
          add_coef(row, cm.col, -term.coef);
          break;
        case ColumnMap::Kind::split:
          add_coef(row, cm.col, term.coef);
          add_coef(row, cm.col2, -term.coef);
          break;
      }
    }
    rows.push_back(std::move(row));
  }
  const std::size_t user_rows = rows.size();
  for (auto [col, width] : upper_rows) rows.push_back({{{col, 1.0}}, Relation::less_equal, width, 1.0});

  for (auto& row : rows) {
    if (row.rhs < 0.0) {
      row.sign = -1.0;
      row.rhs = -row.rhs;
      for (auto& [c, v] : row.coefs) v = -v;
      if (row.rel == Relation::less_equal)
        row.rel = Relation::greater_equal;
      else if (row.rel == Relation::greater_equal)
        row.rel = Relation::less_equal;
    }
  }

  // 3. columns: structural | slack/surplus | artificial
  const std::size_t m = rows.size();
  std::size_t nslack = 0, nart = 0;
  for (const auto& row : rows) {
    if (row.rel != Relation::equal) ++nslack;
    if (row.rel != Relation::less_equal) ++nart;
  }
  const std::size_t total = nstruct + nslack + nart;
  detail::Tableau t(m, total);
  std::vector<std::size_t> identity_col(m);  // column holding +e_r initially (for duals)
  std::vector<bool> is_artificial(total, false);
  {
    std::size_t s = nstruct, a = nstruct + nslack;
    for (std::size_t r = 0; r < m; ++r) {
      for (auto [c, v] : rows[r].coefs) t.at(r, c) += v;
      t.rhs(r) = rows[r].rhs;
      switch (rows[r].rel) {
        case Relation::less_equal:
          t.at(r, s) = 1.0;
          identity_col[r] = s++;
          break;
        case Relation::greater_equal:
          t.at(r, s++) = -1.0;
          t.at(r, a) = 1.0;
          is_artificial[a] = true;
          identity_col[r] = a++;
          break;
        case Relation::equal:
          t.at(r, a) = 1.0;
          is_artificial[a] = true;
          identity_col[r] = a++;
          break;
      }
      t.basis()[r] = identity_col[r];
    }
  }

  LPSolutionRaw out;
  std::size_t iterations = 0;

  // phase 1: maximize -sum(artificials)
  if (nart > 0) {
    for (std::size_t c = 0; c <= total; ++c) t.cost(c) = 0.0;
    for (std::size_t c = 0; c < total; ++c)
      if (is_artificial[c]) t.cost(c) = 1.0;
    for (std::size_t r = 0; r < m; ++r) {
      if (!is_artificial[t.basis()[r]]) continue;
      for (std::size_t c = 0; c <= total; ++c) t.cost(c) -= t.at(r, c);
    }
    std::vector<bool> allowed(total, true);
    detail::run_simplex(t, allowed, opt, iterations);
    if (-t.objective() > opt.tolerance) {
      out.status = LpStatus::infeasible;
      out.iterations = iterations;
      return out;
    }
    // drive remaining artificials out of the basis where possible
    for (std::size_t r = 0; r < m; ++r) {
      if (!is_artificial[t.basis()[r]]) continue;
      std::size_t pick = total;
      double mag = opt.pivot_tolerance;
      for (std::size_t c = 0; c < total; ++c) {
        if (is_artificial[c]) continue;
        if (std::abs(t.at(r, c)) > mag) {
          mag = std::abs(t.at(r, c));
          pick = c;
        }
      }
      if (pick != total) t.pivot(r, pick);
    }
  }

  // phase 2: original objective over structural columns
  std::vector<double> c_col(total, 0.0);
  const auto& obj = lp.objective();
  for (std::size_t j = 0; j < nv; ++j) {
    const auto& cm = map[j];
    switch (cm.kind) {
      case ColumnMap::Kind::fixed: break;
      case ColumnMap::Kind::shifted:
        c_col[cm.col] += obj[j];
        break;
      case ColumnMap::Kind::mirrored:
        c_col[cm.col] -= obj[j];
        break;
      case ColumnMap::Kind::split:
        c_col[cm.col] += obj[j];
        c_col[cm.col2] -= obj[j];
        break;
    }
  }
  for (std::size_t c = 0; c < total; ++c) t.cost(c) = -c_col[c];
  t.objective() = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    const double cb = c_col[t.basis()[r]];
    if (cb == 0.0) continue;
    for (std::size_t c = 0; c <= total; ++c) t.cost(c) += cb * t.at(r, c);
  }
  std::vector<bool> allowed(total, true);
  for (std::size_t c = 0; c < total; ++c) allowed[c] = !is_artificial[c];
  if (detail::run_simplex(t, allowed, opt, iterations) == detail::PhaseResult::unbounded) {
    out.status = LpStatus::unbounded;
    out.iterations = iterations;
    return out;
  }

  // 4. recover primal values, clamp into bounds within tolerance
  std::vector<double> y(total, 0.0);
  for (std::size_t r = 0; r < m; ++r) y[t.basis()[r]] = t.rhs(r);
  out.values.assign(nv, 0.0);
  for (std::size_t j = 0; j < nv; ++j) {
    const auto& cm = map[j];
    double v = 0.0;
    switch (cm.kind) {
      case ColumnMap::Kind::fixed: v = cm.offset; break;
      case ColumnMap::Kind::shifted: v = cm.offset + y[cm.col]; break;
      case ColumnMap::Kind::mirrored: v = cm.offset - y[cm.col]; break;
      case ColumnMap::Kind::split: v = y[cm.col] - y[cm.col2]; break;
    }
    const auto& var = vars[j];
    if (v < var.lower && v > var.lower - opt.tolerance) v = var.lower;
    if (v > var.upper && v < var.upper + opt.tolerance) v = var.upper;
    out.values[j] = v;
  }
  const double violation = lp.max_violation(out.values);
  if (violation > opt.tolerance) {
    std::ostringstream os;
    os << "simplex solution violates constraints by " << violation;
    throw NumericalFailure(os.str());
  }
  out.status = LpStatus::optimal;
  out.objective_value = lp.objective_value(out.values);
  out.duals.assign(user_rows, 0.0);
  for (std::size_t r = 0; r < user_rows; ++r) out.duals[r] = rows[r].sign * t.cost(identity_col[r]);
  out.iterations = iterations;
  return out;
}

namespace detail {

inline std::string lp_safe_name(const std::string& s) {
  std::string out;
  for (char ch : s) out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.') ? ch : '_';
  return out;
}

}  // namespace detail

/// Writes the LP in CPLEX LP text format (Maximize / Subject To / Bounds / End).
/// Variable and row names are sanitized to the format's character set.
inline void write_lp_text(std::ostream& os, const LinearProgram& lp) {
  os.precision(17);
  auto name_of = [&](std::size_t j) { return detail::lp_safe_name(lp.variables()[j].name); };
  auto terms = [&](const std::vector<LpTerm>& ts) {
    std::ostringstream s;
    s.precision(17);
    bool first = true;
    for (const auto& t : ts) {
      if (t.coef == 0.0) continue;
      s << (t.coef < 0.0 ? " - " : (first ? " " : " + "));
      const double a = std::abs(t.coef);
      if (a != 1.0) s << a << ' ';
      s << name_of(t.var);
      first = false;
    }
    if (first) s << " 0 " << (lp.variable_count() > 0 ? name_of(0) : std::string("x"));
    return s.str();
  };
  std::vector<LpTerm> obj;
  for (std::size_t j = 0; j < lp.variable_count(); ++j)
    if (lp.objective()[j] != 0.0) obj.push_back({j, lp.objective()[j]});
  os << "Maximize\n obj:" << terms(obj) << "\nSubject To\n";
  for (std::size_t i = 0; i < lp.constraint_count(); ++i) {
    const auto& c = lp.constraints()[i];
    const std::string name = c.name.empty() ? "c" + std::to_string(i) : detail::lp_safe_name(c.name);
    const char* rel = c.relation == Relation::less_equal ? "<=" : (c.relation == Relation::equal ? "=" : ">=");
    os << ' ' << name << ':' << terms(c.terms) << ' ' << rel << ' ' << c.rhs << '\n';
  }
  os << "Bounds\n";
  for (std::size_t j = 0; j < lp.variable_count(); ++j) {
    const auto& v = lp.variables()[j];
    const std::string n = name_of(j);
    if (v.lower == v.upper) {
      os << ' ' << n << " = " << v.lower << '\n';
    } else if (!std::isfinite(v.lower) && !std::isfinite(v.upper)) {
      os << ' ' << n << " free\n";
    } else {
      os << ' ';
      if (std::isfinite(v.lower)) os << v.lower; else os << "-inf";
      os << " <= " << n << " <= ";
      if (std::isfinite(v.upper)) os << v.upper; else os << "+inf";
      os << '\n';
    }
  }
  os << "End\n";
}

}  // namespace bbandit
