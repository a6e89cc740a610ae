#ifndef SANDWICH_LP_HPP
#define SANDWICH_LP_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "sandwich/error.hpp"

namespace sandwich {

/// A real number or +infinity. Penalties are valued here; -infinity does not
/// occur, so subtracting an infinite value is a structural error.
class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;
  constexpr ExtendedReal(double v) : value_(v) {}  // NOLINT: implicit from double is intended

  static constexpr ExtendedReal infinity() {
    ExtendedReal x;
    x.infinite_ = true;
    x.value_ = std::numeric_limits<double>::infinity();
    return x;
  }

  constexpr bool is_infinite() const { return infinite_; }
  constexpr bool is_finite() const { return !infinite_; }
  /// The finite value, or +inf as a double.
  constexpr double value() const { return value_; }

  friend ExtendedReal operator+(ExtendedReal a, ExtendedReal b) {
    if (a.infinite_ || b.infinite_) return infinity();
    return {a.value_ + b.value_};
  }
  friend ExtendedReal operator-(ExtendedReal a, ExtendedReal b) {
    if (b.infinite_) throw SolverError("subtracting an infinite extended real");
    if (a.infinite_) return infinity();
    return {a.value_ - b.value_};
  }
  /// Scaling by a nonnegative weight, with 0 * inf = 0.
  friend ExtendedReal operator*(double w, ExtendedReal a) {
    if (w < 0.0) throw SolverError("negative scaling of an extended real");
    if (a.infinite_) return w == 0.0 ? ExtendedReal{0.0} : infinity();
    return {w * a.value_};
  }
  friend bool operator<(ExtendedReal a, ExtendedReal b) {
    if (a.infinite_) return false;
    if (b.infinite_) return true;
    return a.value_ < b.value_;
  }
  friend bool operator==(ExtendedReal a, ExtendedReal b) {
    return a.infinite_ == b.infinite_ && (a.infinite_ || a.value_ == b.value_);
  }

 private:
  double value_ = 0.0;
  bool infinite_ = false;
};

/// True when both are infinite, or both finite and within tol.
inline bool approx_equal(ExtendedReal a, ExtendedReal b, double tol) {
  if (a.is_infinite() || b.is_infinite()) return a.is_infinite() && b.is_infinite();
  return std::abs(a.value() - b.value()) <= tol;
}

enum class RowType { le, ge, eq };

struct Term {
  int var;
  double coeff;
};

/// An affine expression sum(coeff * var) + constant over LP variables.
struct LinExpr {
  std::vector<Term> terms;
  double constant = 0.0;

  LinExpr() = default;
  explicit LinExpr(double c) : constant(c) {}

  static LinExpr variable(int var, double coeff = 1.0) {
    LinExpr e;
    e.terms.push_back({var, coeff});
    return e;
  }
  LinExpr& add(int var, double coeff) {
    if (coeff != 0.0) terms.push_back({var, coeff});
    return *this;
  }
  LinExpr& add(const LinExpr& other, double scale = 1.0) {
    for (const auto& t : other.terms) add(t.var, scale * t.coeff);
    constant += scale * other.constant;
    return *this;
  }
};

/// A linear program over bounded variables with <=, >= and = rows.
class LinearProgram {
 public:
  enum class Sense { minimize, maximize };

  explicit LinearProgram(Sense sense = Sense::minimize) : sense_(sense) {}

  int add_variable(double lower = 0.0, double upper = std::numeric_limits<double>::infinity(),
                   double cost = 0.0) {
    lower_.push_back(lower);
    upper_.push_back(upper);
    cost_.push_back(cost);
    return static_cast<int>(cost_.size()) - 1;
  }
  int add_free_variable(double cost = 0.0) {
    const double inf = std::numeric_limits<double>::infinity();
    return add_variable(-inf, inf, cost);
  }
  void set_cost(int var, double cost) { cost_.at(static_cast<std::size_t>(var)) = cost; }
  /// objective += scale * expr
  void add_objective(const LinExpr& expr, double scale = 1.0) {
    for (const auto& t : expr.terms) cost_.at(static_cast<std::size_t>(t.var)) += scale * t.coeff;
    constant_ += scale * expr.constant;
  }

  int add_row(std::vector<Term> terms, RowType type, double rhs) {
    rows_.push_back({std::move(terms), type, rhs});
    return static_cast<int>(rows_.size()) - 1;
  }
  /// lhs (type) rhs, with the constant of lhs moved to the right.
  int add_row(const LinExpr& lhs, RowType type, double rhs) {
    return add_row(lhs.terms, type, rhs - lhs.constant);
  }

  struct Row {
    std::vector<Term> terms;
    RowType type;
    double rhs;
  };

  Sense sense() const { return sense_; }
  int num_variables() const { return static_cast<int>(cost_.size()); }
  int num_rows() const { return static_cast<int>(rows_.size()); }
  const std::vector<double>& costs() const { return cost_; }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  const std::vector<Row>& rows() const { return rows_; }
  double objective_constant() const { return constant_; }

  double objective(const Eigen::VectorXd& x) const {
    double v = constant_;
    for (std::size_t j = 0; j < cost_.size(); ++j) v += cost_[j] * x[static_cast<Eigen::Index>(j)];
    return v;
  }

  /// Largest violation of rows and bounds at x (0 when feasible).
  double infeasibility(const Eigen::VectorXd& x) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < cost_.size(); ++j) {
      const double v = x[static_cast<Eigen::Index>(j)];
      worst = std::max({worst, lower_[j] - v, v - upper_[j]});
    }
    for (const auto& row : rows_) {
      double lhs = 0.0;
      for (const auto& t : row.terms) lhs += t.coeff * x[t.var];
      const double gap = lhs - row.rhs;
      switch (row.type) {
        case RowType::le: worst = std::max(worst, gap); break;
        case RowType::ge: worst = std::max(worst, -gap); break;
        case RowType::eq: worst = std::max(worst, std::abs(gap)); break;
      }
    }
    return worst;
  }

  void validate() const {
    const auto n = static_cast<int>(cost_.size());
    for (std::size_t j = 0; j < cost_.size(); ++j) {
      if (std::isnan(cost_[j]) || std::isnan(lower_[j]) || std::isnan(upper_[j]))
        throw InvalidInputError("linear program has a NaN coefficient");
      if (lower_[j] > upper_[j] || lower_[j] == std::numeric_limits<double>::infinity() ||
          upper_[j] == -std::numeric_limits<double>::infinity())
        throw InvalidInputError("variable " + std::to_string(j) + " has inconsistent bounds");
    }
    for (const auto& row : rows_) {
      if (!std::isfinite(row.rhs)) throw InvalidInputError("row right-hand side must be finite");
      for (const auto& t : row.terms)
        if (t.var < 0 || t.var >= n || !std::isfinite(t.coeff))
          throw InvalidInputError("row references an invalid variable or coefficient");
    }
  }

 private:
  Sense sense_;
  std::vector<double> cost_, lower_, upper_;
  std::vector<Row> rows_;
  double constant_ = 0.0;
};

enum class LpStatus { optimal, unbounded, infeasible };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::infeasible: return "infeasible";
  }
  return "?";
}

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  /// Objective value; +-inf when unbounded, NaN when infeasible.
  double value = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd solution;  // optimal: a feasible optimal point
  Eigen::VectorXd ray;       // unbounded: an improving direction of the feasible set
  /// infeasible: Farkas multipliers y over the standard-form rows, with
  /// y'A <= 0 and y'b > 0.
  Eigen::VectorXd farkas;
  /// optimal: standard-form row duals from the final basis, and the dual
  /// objective they produce mapped back to the original sense.
  Eigen::VectorXd duals;
  double dual_value = std::numeric_limits<double>::quiet_NaN();
  std::size_t iterations = 0;
};

/// min c'z + offset  s.t.  A z = b, z >= 0, b >= 0.
struct StandardForm {
  struct Column {
    int pos = -1;
    int neg = -1;
    double shift = 0.0;
    double sign = 1.0;
  };
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  double offset = 0.0;
  double objective_sign = 1.0;  // original objective = objective_sign * (c'z + offset)
  std::vector<Column> columns;  // one per original variable
  std::vector<double> row_sign;  // +-1 applied to make b >= 0

  Eigen::VectorXd to_original(const Eigen::VectorXd& z, bool direction) const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
      const auto& col = columns[j];
      double v = direction ? 0.0 : col.shift;
      v += col.sign * z[col.pos];
      if (col.neg >= 0) v -= z[col.neg];
      x[static_cast<Eigen::Index>(j)] = v;
    }
    return x;
  }
};

inline StandardForm to_standard_form(const LinearProgram& lp) {
  lp.validate();
  StandardForm sf;
  const double s = lp.sense() == LinearProgram::Sense::minimize ? 1.0 : -1.0;
  sf.objective_sign = s;

  int ncols = 0;
  std::vector<int> boxed;
  sf.columns.resize(static_cast<std::size_t>(lp.num_variables()));
  for (int j = 0; j < lp.num_variables(); ++j) {
    auto& col = sf.columns[static_cast<std::size_t>(j)];
    const double lo = lp.lower()[static_cast<std::size_t>(j)];
    const double hi = lp.upper()[static_cast<std::size_t>(j)];
    col.pos = ncols++;
    if (std::isfinite(lo)) {
      col.shift = lo;
      if (std::isfinite(hi)) boxed.push_back(j);
    } else if (std::isfinite(hi)) {
      col.shift = hi;
      col.sign = -1.0;
    } else {
      col.neg = ncols++;
    }
  }

  const int m_orig = lp.num_rows();
  const int m = m_orig + static_cast<int>(boxed.size());
  int nslack = 0;
  for (const auto& row : lp.rows())
    if (row.type != RowType::eq) ++nslack;
  nslack += static_cast<int>(boxed.size());
  const int n = ncols + nslack;

  sf.A = Eigen::MatrixXd::Zero(m, n);
  sf.b = Eigen::VectorXd::Zero(m);
  sf.c = Eigen::VectorXd::Zero(n);
  int slack = ncols;
  for (int i = 0; i < m_orig; ++i) {
    const auto& row = lp.rows()[static_cast<std::size_t>(i)];
    double rhs = row.rhs;
    for (const auto& t : row.terms) {
      const auto& col = sf.columns[static_cast<std::size_t>(t.var)];
      sf.A(i, col.pos) += t.coeff * col.sign;
      if (col.neg >= 0) sf.A(i, col.neg) -= t.coeff;
      rhs -= t.coeff * col.shift;
    }
    if (row.type == RowType::le) sf.A(i, slack++) = 1.0;
    if (row.type == RowType::ge) sf.A(i, slack++) = -1.0;
    sf.b[i] = rhs;
  }
  for (std::size_t k = 0; k < boxed.size(); ++k) {
    const int i = m_orig + static_cast<int>(k);
    const int j = boxed[k];
    const auto& col = sf.columns[static_cast<std::size_t>(j)];
    sf.A(i, col.pos) = 1.0;
    sf.A(i, slack++) = 1.0;
    sf.b[i] = lp.upper()[static_cast<std::size_t>(j)] - lp.lower()[static_cast<std::size_t>(j)];
  }
  sf.row_sign.assign(static_cast<std::size_t>(m), 1.0);
  for (int i = 0; i < m; ++i) {
    if (sf.b[i] < 0.0) {
      sf.A.row(i) *= -1.0;
      sf.b[i] = -sf.b[i];
      sf.row_sign[static_cast<std::size_t>(i)] = -1.0;
    }
  }

  double offset = lp.objective_constant();
  for (int j = 0; j < lp.num_variables(); ++j) {
    const auto& col = sf.columns[static_cast<std::size_t>(j)];
    const double cj = lp.costs()[static_cast<std::size_t>(j)];
    sf.c[col.pos] = s * cj * col.sign;
    if (col.neg >= 0) sf.c[col.neg] = -s * cj;
    offset += cj * col.shift;
  }
  sf.offset = s * offset;
  return sf;
}

struct SimplexOptions {
  double pivot_tol = 1e-9;
  double optimality_tol = 1e-9;
  double feasibility_tol = 1e-8;
  std::size_t max_iterations = 1'000'000;
};

namespace detail {

/// Dense tableau: rows 0..m-1 are constraints, row m holds reduced costs with
/// T(m, rhs) = -(objective). Columns: n structural, m artificial, rhs.
class Tableau {
 public:
  Tableau(const StandardForm& sf, const SimplexOptions& opt) : opt_(opt) {
    m_ = sf.A.rows();
    n_ = sf.A.cols();
    t_ = Eigen::MatrixXd::Zero(m_ + 1, n_ + m_ + 1);
    t_.topLeftCorner(m_, n_) = sf.A;
    t_.block(0, n_, m_, m_).setIdentity();
    t_.col(rhs()).head(m_) = sf.b;
    basis_.resize(static_cast<std::size_t>(m_));
    for (Eigen::Index i = 0; i < m_; ++i) basis_[static_cast<std::size_t>(i)] = n_ + i;
  }

  Eigen::Index rhs() const { return n_ + m_; }
  Eigen::Index rows() const { return m_; }
  Eigen::Index structural() const { return n_; }
  const std::vector<Eigen::Index>& basis() const { return basis_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return t_(i, j); }
  std::size_t iterations() const { return iterations_; }

  /// Loads costs (size n + m) into the objective row and prices out the basis.
  void set_objective(const Eigen::VectorXd& costs) {
    t_.row(m_).setZero();
    t_.row(m_).head(n_ + m_) = costs.transpose();
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double cb = costs[basis_[static_cast<std::size_t>(i)]];
      if (cb != 0.0) t_.row(m_) -= cb * t_.row(i);
    }
  }

  void pivot(Eigen::Index r, Eigen::Index e) {
    t_.row(r) /= t_(r, e);
    for (Eigen::Index i = 0; i <= m_; ++i) {
      if (i == r) continue;
      const double f = t_(i, e);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    for (Eigen::Index i = 0; i < m_; ++i)
      if (t_(i, rhs()) < 0.0 && t_(i, rhs()) > -1e-13) t_(i, rhs()) = 0.0;
    basis_[static_cast<std::size_t>(r)] = e;
  }

  /// Bland's rule over columns [0, allowed). Returns -1 at optimality or the
  /// entering column when unbounded.
  Eigen::Index run(Eigen::Index allowed) {
    for (;;) {
      if (++iterations_ > opt_.max_iterations)
        throw SolverError("simplex exceeded the iteration cap");
      Eigen::Index e = -1;
      for (Eigen::Index j = 0; j < allowed; ++j)
        if (t_(m_, j) < -opt_.optimality_tol) {
          e = j;
          break;
        }
      if (e < 0) return -1;
      Eigen::Index r = -1;
      double best = 0.0;
      for (Eigen::Index i = 0; i < m_; ++i) {
        if (t_(i, e) <= opt_.pivot_tol) continue;
        const double ratio = t_(i, rhs()) / t_(i, e);
        if (r < 0 || ratio < best - 1e-12 ||
            (ratio <= best + 1e-12 && basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(r)])) {
          r = i;
          best = ratio;
        }
      }
      if (r < 0) return e;
      pivot(r, e);
    }
  }

  Eigen::VectorXd primal() const {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n_ + m_);
    for (Eigen::Index i = 0; i < m_; ++i) z[basis_[static_cast<std::size_t>(i)]] = t_(i, rhs());
    return z;
  }

 private:
  SimplexOptions opt_;
  Eigen::Index m_ = 0, n_ = 0;
  Eigen::MatrixXd t_;
  std::vector<Eigen::Index> basis_;
  std::size_t iterations_ = 0;
};

/// Solves B'y = c_B for the basis columns of [A | I].
inline Eigen::VectorXd basis_duals(const StandardForm& sf, const std::vector<Eigen::Index>& basis,
                                   const Eigen::VectorXd& costs) {
  const Eigen::Index m = sf.A.rows();
  const Eigen::Index n = sf.A.cols();
  Eigen::MatrixXd B(m, m);
  Eigen::VectorXd cb(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index j = basis[static_cast<std::size_t>(i)];
    B.col(i) = j < n ? Eigen::VectorXd(sf.A.col(j)) : Eigen::VectorXd::Unit(m, j - n);
    cb[i] = costs[j];
  }
  return B.transpose().partialPivLu().solve(cb);
}

}  // namespace detail

/// Two-phase dense simplex with Bland's anti-cycling rule.
inline LpResult solve_lp(const LinearProgram& lp, const SimplexOptions& opt = {}) {
  const StandardForm sf = to_standard_form(lp);
  const Eigen::Index m = sf.A.rows();
  const Eigen::Index n = sf.A.cols();
  LpResult result;

  detail::Tableau tab(sf, opt);

  // Phase 1: minimize the sum of artificials.
  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n + m);
  phase1.tail(m).setOnes();
  tab.set_objective(phase1);
  tab.run(n);
  const double infeas = -tab(m, tab.rhs());
  const double scale = std::max(1.0, m > 0 ? sf.b.cwiseAbs().maxCoeff() : 0.0);
  if (infeas > opt.feasibility_tol * scale) {
    result.status = LpStatus::infeasible;
    result.farkas = detail::basis_duals(sf, tab.basis(), phase1);
    result.iterations = tab.iterations();
    return result;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (tab.basis()[static_cast<std::size_t>(i)] < n) continue;
    for (Eigen::Index j = 0; j < n; ++j)
      if (std::abs(tab(i, j)) > opt.pivot_tol) {
        tab.pivot(i, j);
        break;
      }
  }

  // Phase 2: artificials never re-enter.
  Eigen::VectorXd costs = Eigen::VectorXd::Zero(n + m);
  costs.head(n) = sf.c;
  tab.set_objective(costs);
  const Eigen::Index entering = tab.run(n);
  result.iterations = tab.iterations();
  const double sense = sf.objective_sign;

  if (entering >= 0) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n + m);
    d[entering] = 1.0;
    for (Eigen::Index i = 0; i < m; ++i) d[tab.basis()[static_cast<std::size_t>(i)]] = -tab(i, entering);
    result.status = LpStatus::unbounded;
    result.ray = sf.to_original(d.head(n), true);
    result.value = -sense * std::numeric_limits<double>::infinity();
    return result;
  }

  const Eigen::VectorXd z = tab.primal();
  result.status = LpStatus::optimal;
  result.solution = sf.to_original(z.head(n), false);
  result.value = lp.objective(result.solution);
  result.duals = detail::basis_duals(sf, tab.basis(), costs);
  result.dual_value = sense * (sf.b.dot(result.duals) + sf.offset);
  return result;
}

}  // namespace sandwich

#endif  // SANDWICH_LP_HPP
