#ifndef SANDWICH_EXTENSION_HPP
#define SANDWICH_EXTENSION_HPP

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <sstream>
#include <vector>

#include "sandwich/lp.hpp"
#include "sandwich/operators.hpp"

namespace sandwich {

/// Minimal penalty of a density, one extended real per level_A block.
struct PenaltyValue {
  int level = 0;
  std::vector<ExtendedReal> blocks;

  bool finite() const {
    for (const auto& v : blocks)
      if (v.is_infinite()) return false;
    return true;
  }
  /// Requires finite().
  RandomVariable to_random_variable(const FilteredSpace& space) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(blocks.size()));
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      if (blocks[b].is_infinite()) throw DomainError("penalty is +inf on block " + std::to_string(b));
      v[static_cast<Eigen::Index>(b)] = blocks[b].value();
    }
    return assemble_blocks(space, level, v);
  }
};

namespace detail {

/// Price of each piece on the block basis: column j holds B' diag(q) f_j.
inline Eigen::MatrixXd piece_prices(const PolyhedralOperator& op, std::size_t b) {
  const auto& block = op.blocks()[b];
  return op.domain().block_basis(b).transpose() * block.weights.asDiagonal() * op.block_data(b).densities;
}

}  // namespace detail

/// sup over the block's slice of L of E[fX|a] - x(X).
inline ExtendedReal conjugate_block(const PolyhedralOperator& op, std::size_t b,
                                    const Eigen::VectorXd& f_cells) {
  const auto& block = op.blocks()[b];
  const Eigen::MatrixXd& basis = op.domain().block_basis(b);
  const Eigen::MatrixXd prices = detail::piece_prices(op, b);
  const Eigen::VectorXd target = basis.transpose() * block.weights.cwiseProduct(f_cells);
  const auto& pen = op.block_data(b).penalties;

  LinearProgram lp(LinearProgram::Sense::maximize);
  std::vector<int> y;
  for (Eigen::Index k = 0; k < basis.cols(); ++k) y.push_back(lp.add_free_variable(target[k]));
  const int u = lp.add_free_variable(-1.0);
  for (Eigen::Index j = 0; j < prices.cols(); ++j) {
    std::vector<Term> row{{u, 1.0}};
    for (Eigen::Index k = 0; k < basis.cols(); ++k) row.push_back({y[static_cast<std::size_t>(k)], -prices(k, j)});
    lp.add_row(std::move(row), RowType::ge, -pen[j]);
  }
  const LpResult r = solve_lp(lp);
  if (r.status == LpStatus::unbounded) return ExtendedReal::infinity();
  if (r.status != LpStatus::optimal) throw SolverError("conjugate LP reported infeasible");
  return r.value;
}

inline void require_density(const FilteredSpace& space, const RandomVariable& f, int level_A, int level_B,
                            double tol = kTol) {
  if (f.size() != space.n_atoms()) throw InvalidInputError("density size does not match the space");
  if (!f.is_measurable(space, level_B, 1e-12))
    throw InvalidLevelError("density is not measurable at level " + std::to_string(level_B));
  if (f.values().minCoeff() < -tol) throw InvalidInputError("density has a negative value");
  const RandomVariable mean = cond_expectation(space, f, level_A);
  if ((mean.values().array() - 1.0).abs().maxCoeff() > tol)
    throw InvalidInputError("density does not have conditional mean 1");
}

/// x*(f) per level_A block; +inf where the LP is unbounded.
inline PenaltyValue conjugate(const PolyhedralOperator& op, const RandomVariable& f) {
  require_density(op.space(), f, op.level_A(), op.level_B());
  PenaltyValue out;
  out.level = op.level_A();
  for (std::size_t b = 0; b < op.blocks().size(); ++b)
    out.blocks.push_back(conjugate_block(op, b, f.on_cells(op.blocks()[b])));
  return out;
}

/// The density polytope of the bounds; throws if empty on some block.
inline DensityPolytope density_set(const BoundPair& bounds) {
  DensityPolytope d = describe_density_set(bounds);
  for (std::size_t b = 0; b < d.polytopes.size(); ++b)
    if (!d.polytopes[b].nonempty)
      throw InfeasibleError("density polytope for levels (" + std::to_string(bounds.level_A()) + ", " +
                            std::to_string(bounds.level_B()) + ") is empty on block " + std::to_string(b));
  return d;
}

struct Attainment {
  RandomVariable density;  // f_X at level_B
  RandomVariable value;    // x̂(X) at level_A
  PenaltyValue penalty;    // conjugate of f_X
  bool positivity_guaranteed = false;  // the minorant is non-degenerate
  bool strictly_positive = false;      // min f_X > 1e-12
};

/// The maximal sandwich-preserving extension of a polyhedral operator to all
/// of L_p(level_B).
///
/// Evaluation uses the inf-convolution x̂(X) = min_{Y in L} x(Y) + S(X - Y),
/// with S the support function of the density polytope, written as one LP per
/// block: the epigraph of x plus the dual of S.
class ExtendedOperator {
 public:
  ExtendedOperator(PolyhedralOperator op, BoundPair bounds)
      : op_(std::move(op)),
        bounds_(std::move(bounds)),
        polytope_(density_set(bounds_)),
        nondegenerate_(check_nondegenerate(bounds_)),
        cache_(std::make_shared<Cache>()) {
    for (std::size_t b = 0; b < op_.blocks().size(); ++b) {
      const auto& data = op_.block_data(b);
      const Eigen::VectorXd means = data.densities.transpose() * op_.blocks()[b].weights;
      const bool normalized = (means.array() - 1.0).abs().maxCoeff() <= 1e-12 &&
                              std::abs(data.penalties.minCoeff()) <= 1e-12;
      // With constants-only L and box bounds x̂ is the support function itself.
      greedy_.push_back(normalized && polytope_.polytopes[b].box.has_value() &&
                        op_.domain().block_basis(b).cols() == 1);
    }
  }

  const PolyhedralOperator& base() const { return op_; }
  const BoundPair& bounds() const { return bounds_; }
  const DensityPolytope& polytope() const { return polytope_; }
  const FilteredSpace& space() const { return op_.space(); }
  int level_A() const { return op_.level_A(); }
  int level_B() const { return op_.level_B(); }
  const std::vector<LocalBlock>& blocks() const { return op_.blocks(); }
  bool nondegenerate() const { return nondegenerate_; }

  /// Adds the epigraph of x̂ on block b to `lp` and returns an expression that,
  /// when minimized, equals x̂ at the cell values `x_cells` (which may be
  /// affine in other variables of the program).
  LinExpr epigraph(LinearProgram& lp, std::size_t b, std::span<const LinExpr> x_cells) const {
    const auto& block = op_.blocks()[b];
    const auto& poly = polytope_.polytopes[b];
    const Eigen::MatrixXd& basis = op_.domain().block_basis(b);
    const Eigen::MatrixXd prices = detail::piece_prices(op_, b);
    const auto& pen = op_.block_data(b).penalties;
    const Eigen::Index n = block.size();
    if (static_cast<Eigen::Index>(x_cells.size()) != n)
      throw InvalidInputError("epigraph: cell count mismatch");

    std::vector<int> y, pi, sigma;
    for (Eigen::Index k = 0; k < basis.cols(); ++k) y.push_back(lp.add_free_variable());
    const int u = lp.add_free_variable();
    for (Eigen::Index r = 0; r < poly.A.rows(); ++r) pi.push_back(lp.add_variable(0.0));
    for (Eigen::Index r = 0; r < poly.C.rows(); ++r) sigma.push_back(lp.add_free_variable());

    // u >= E[f_j Y|a] - c_j
    for (Eigen::Index j = 0; j < prices.cols(); ++j) {
      std::vector<Term> row{{u, 1.0}};
      for (Eigen::Index k = 0; k < basis.cols(); ++k) row.push_back({y[static_cast<std::size_t>(k)], -prices(k, j)});
      lp.add_row(std::move(row), RowType::ge, -pen[j]);
    }
    // A'pi + C'sigma >= (q (X - Y), 0)
    for (Eigen::Index i = 0; i < poly.width(); ++i) {
      LinExpr row;
      for (Eigen::Index r = 0; r < poly.A.rows(); ++r)
        if (poly.A(r, i) != 0.0) row.add(pi[static_cast<std::size_t>(r)], poly.A(r, i));
      for (Eigen::Index r = 0; r < poly.C.rows(); ++r)
        if (poly.C(r, i) != 0.0) row.add(sigma[static_cast<std::size_t>(r)], poly.C(r, i));
      if (i < n) {
        const double q = block.weights[i];
        for (Eigen::Index k = 0; k < basis.cols(); ++k) row.add(y[static_cast<std::size_t>(k)], q * basis(i, k));
        row.add(x_cells[static_cast<std::size_t>(i)], -q);
      }
      lp.add_row(row, RowType::ge, 0.0);
    }
    LinExpr value = LinExpr::variable(u);
    for (Eigen::Index r = 0; r < poly.A.rows(); ++r) value.add(pi[static_cast<std::size_t>(r)], poly.b[r]);
    for (Eigen::Index r = 0; r < poly.C.rows(); ++r) value.add(sigma[static_cast<std::size_t>(r)], poly.d[r]);
    return value;
  }

  double evaluate_block(std::size_t b, const Eigen::VectorXd& cells) const {
    if (greedy_[b]) return support_function(cells, *polytope_.polytopes[b].box).value;
    LinearProgram lp(LinearProgram::Sense::minimize);
    std::vector<LinExpr> xs;
    for (Eigen::Index i = 0; i < cells.size(); ++i) xs.emplace_back(cells[i]);
    lp.add_objective(epigraph(lp, b, xs));
    const LpResult r = solve_lp(lp);
    if (r.status == LpStatus::unbounded)
      throw DomainError("extension is -inf on block " + std::to_string(b));
    if (r.status != LpStatus::optimal) throw SolverError("extension LP infeasible on block " + std::to_string(b));
    return r.value;
  }

  RandomVariable evaluate(const RandomVariable& x) const {
    check_argument(x);
    Eigen::VectorXd out(static_cast<Eigen::Index>(blocks().size()));
    for (std::size_t b = 0; b < blocks().size(); ++b)
      out[static_cast<Eigen::Index>(b)] = evaluate_block(b, x.on_cells(blocks()[b]));
    return assemble_blocks(space(), level_A(), out);
  }

  /// A density attaining x̂(X) on each block with finite penalty, chosen as
  /// the max-min point of the optimal face so that it is strictly positive
  /// whenever the face allows.
  Attainment attain(const RandomVariable& x) const {
    check_argument(x);
    std::vector<Eigen::VectorXd> cells;
    Eigen::VectorXd values(static_cast<Eigen::Index>(blocks().size()));
    PenaltyValue pen;
    pen.level = level_A();
    for (std::size_t b = 0; b < blocks().size(); ++b) {
      const Eigen::VectorXd xc = x.on_cells(blocks()[b]);
      Eigen::VectorXd f = attain_block(b, xc);
      const ExtendedReal c = conjugate_block(op_, b, f);
      if (c.is_infinite()) throw SolverError("attained density has infinite penalty on block " + std::to_string(b));
      values[static_cast<Eigen::Index>(b)] = f.dot(blocks()[b].weights.cwiseProduct(xc)) - c.value();
      pen.blocks.push_back(c);
      cells.push_back(std::move(f));
    }
    Attainment a{assemble(space(), blocks(), cells, level_B()), assemble_blocks(space(), level_A(), values),
                 std::move(pen), nondegenerate_, false};
    a.strictly_positive = a.density.values().minCoeff() > 1e-12;
    {
      std::lock_guard<std::mutex> lock(cache_->mutex);
      cache_->attained.insert_or_assign(key(x), a.density);
    }
    return a;
  }

  /// Previously attained density for X, if any.
  std::optional<RandomVariable> cached_attainment(const RandomVariable& x) const {
    std::lock_guard<std::mutex> lock(cache_->mutex);
    auto it = cache_->attained.find(key(x));
    if (it == cache_->attained.end()) return std::nullopt;
    return it->second;
  }

  /// Conjugate of x̂ over the whole of L_p(level_B): sup_X E[fX|a] - x̂(X).
  PenaltyValue full_space_conjugate(const RandomVariable& f) const {
    require_density(space(), f, level_A(), level_B());
    PenaltyValue out;
    out.level = level_A();
    for (std::size_t b = 0; b < blocks().size(); ++b) {
      const auto& block = blocks()[b];
      const Eigen::VectorXd fc = f.on_cells(block);
      LinearProgram lp(LinearProgram::Sense::maximize);
      std::vector<LinExpr> xs;
      for (Eigen::Index i = 0; i < block.size(); ++i) {
        const int v = lp.add_free_variable(block.weights[i] * fc[i]);
        xs.push_back(LinExpr::variable(v));
      }
      lp.add_objective(epigraph(lp, b, xs), -1.0);
      const LpResult r = solve_lp(lp);
      if (r.status == LpStatus::unbounded)
        out.blocks.push_back(ExtendedReal::infinity());
      else if (r.status == LpStatus::optimal)
        out.blocks.push_back(r.value);
      else
        throw SolverError("full-space conjugate LP infeasible");
    }
    return out;
  }

  /// A density of the polytope with finite penalty, maximizing a random
  /// linear objective (so typically a vertex of the finite-penalty set).
  RandomVariable sample_density(std::mt19937_64& rng) const {
    std::normal_distribution<double> normal;
    std::vector<Eigen::VectorXd> cells;
    for (std::size_t b = 0; b < blocks().size(); ++b) {
      Eigen::VectorXd w(blocks()[b].size());
      for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = normal(rng);
      LinearProgram lp(LinearProgram::Sense::maximize);
      const auto z = finite_penalty_set(lp, b);
      for (Eigen::Index i = 0; i < w.size(); ++i) lp.set_cost(z.f[static_cast<std::size_t>(i)], w[i]);
      const LpResult r = solve_lp(lp);
      if (r.status != LpStatus::optimal) throw SolverError("density sampling LP failed");
      cells.push_back(z.extract(r.solution));
    }
    return assemble(space(), blocks(), cells, level_B());
  }

 private:
  struct Cache {
    std::mutex mutex;
    std::map<std::vector<double>, RandomVariable> attained;
  };

  struct FiniteSet {
    std::vector<int> f;
    std::vector<int> theta;
    Eigen::VectorXd extract(const Eigen::VectorXd& sol) const {
      Eigen::VectorXd v(static_cast<Eigen::Index>(f.size()));
      for (std::size_t i = 0; i < f.size(); ++i) v[static_cast<Eigen::Index>(i)] = std::max(0.0, sol[f[i]]);
      return v;
    }
  };

  static std::vector<double> key(const RandomVariable& x) {
    return {x.values().data(), x.values().data() + x.values().size()};
  }

  void check_argument(const RandomVariable& x) const {
    if (x.size() != space().n_atoms()) throw InvalidInputError("argument size does not match the space");
    if (!x.is_measurable(space(), level_B(), 1e-12))
      throw InvalidLevelError("argument is not measurable at level " + std::to_string(level_B()));
  }

  /// Polytope rows plus "the price of f on L is a mixture of piece prices",
  /// i.e. x*(f) < inf. The mixture weights theta carry the penalty sum.
  FiniteSet finite_penalty_set(LinearProgram& lp, std::size_t b) const {
    const auto& block = blocks()[b];
    const auto& poly = polytope_.polytopes[b];
    const Eigen::MatrixXd& basis = op_.domain().block_basis(b);
    const Eigen::MatrixXd prices = detail::piece_prices(op_, b);
    FiniteSet s;
    const auto z = poly.add_to(lp);
    s.f.assign(z.begin(), z.begin() + block.size());
    std::vector<Term> sum;
    for (Eigen::Index j = 0; j < prices.cols(); ++j) {
      s.theta.push_back(lp.add_variable(0.0));
      sum.push_back({s.theta.back(), 1.0});
    }
    lp.add_row(std::move(sum), RowType::eq, 1.0);
    for (Eigen::Index k = 0; k < basis.cols(); ++k) {
      std::vector<Term> row;
      for (Eigen::Index i = 0; i < block.size(); ++i)
        row.push_back({s.f[static_cast<std::size_t>(i)], block.weights[i] * basis(i, k)});
      for (Eigen::Index j = 0; j < prices.cols(); ++j) row.push_back({s.theta[static_cast<std::size_t>(j)], -prices(k, j)});
      lp.add_row(std::move(row), RowType::eq, 0.0);
    }
    return s;
  }

  Eigen::VectorXd attain_block(std::size_t b, const Eigen::VectorXd& xc) const {
    const auto& block = blocks()[b];
    const auto& pen = op_.block_data(b).penalties;
    auto build = [&](LinearProgram& lp) {
      const FiniteSet s = finite_penalty_set(lp, b);
      LinExpr obj;
      for (Eigen::Index i = 0; i < block.size(); ++i)
        obj.add(s.f[static_cast<std::size_t>(i)], block.weights[i] * xc[i]);
      for (Eigen::Index j = 0; j < pen.size(); ++j) obj.add(s.theta[static_cast<std::size_t>(j)], -pen[j]);
      return std::make_pair(s, obj);
    };

    LinearProgram first(LinearProgram::Sense::maximize);
    auto [s1, obj1] = build(first);
    first.add_objective(obj1);
    const LpResult r1 = solve_lp(first);
    if (r1.status != LpStatus::optimal) throw SolverError("attainment LP failed on block " + std::to_string(b));

    LinearProgram second(LinearProgram::Sense::maximize);
    auto [s2, obj2] = build(second);
    const double slack = 1e-12 * std::max(1.0, std::abs(r1.value));
    second.add_row(obj2, RowType::ge, r1.value - slack);
    const int t = second.add_free_variable(1.0);
    for (int v : s2.f) second.add_row({{v, 1.0}, {t, -1.0}}, RowType::ge, 0.0);
    const LpResult r2 = solve_lp(second);
    if (r2.status != LpStatus::optimal) return s1.extract(r1.solution);
    return s2.extract(r2.solution);
  }

  PolyhedralOperator op_;
  BoundPair bounds_;
  DensityPolytope polytope_;
  bool nondegenerate_;
  std::vector<bool> greedy_;
  std::shared_ptr<Cache> cache_;
};

/// Builds x̂; the sandwich condition and a nonempty density set are required.
inline ExtendedOperator maximal_extension(const PolyhedralOperator& op, const BoundPair& bounds) {
  if (op.level_A() != bounds.level_A() || op.level_B() != bounds.level_B())
    throw InvalidLevelError("operator and bounds act between different levels");
  density_set(bounds);
  const SandwichResult s = check_sandwich(op, bounds);
  if (!s.holds) {
    std::ostringstream msg;
    msg << "sandwich condition fails";
    if (s.witness) msg << " on block " << s.witness->block << " via piece " << s.witness->piece;
    throw PreconditionError(msg.str());
  }
  return ExtendedOperator(op, bounds);
}

/// Reconstructs x on random elements of L from a finite dual family (the
/// pieces, random mixtures of them, and pieces perturbed orthogonally to L)
/// and checks the splice identity of the conjugate on level_A sets.
inline ValidationReport verify_representation(const PolyhedralOperator& op, std::mt19937_64& rng,
                                              int samples = 100, double tol = 1e-7) {
  ValidationReport report;
  const auto& blocks = op.blocks();
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Dual family per block with finite conjugates.
  std::vector<std::vector<std::pair<Eigen::VectorXd, double>>> family(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& block = blocks[b];
    const auto& data = op.block_data(b);
    const Eigen::MatrixXd& basis = op.domain().block_basis(b);
    std::vector<Eigen::VectorXd> candidates;
    for (Eigen::Index j = 0; j < data.densities.cols(); ++j) candidates.push_back(data.densities.col(j));
    for (int n = 0; n < 5; ++n) {
      Eigen::VectorXd w(data.densities.cols());
      for (Eigen::Index j = 0; j < w.size(); ++j) w[j] = unif(rng);
      candidates.push_back(data.densities * (w / w.sum()));
    }
    for (Eigen::Index j = 0; j < data.densities.cols(); ++j) {
      Eigen::VectorXd v(block.size());
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
      v -= basis * (basis.transpose() * block.weights.cwiseProduct(v));
      const Eigen::VectorXd f = data.densities.col(j);
      double eps = 0.5;
      for (Eigen::Index i = 0; i < v.size(); ++i)
        if (v[i] < 0.0) eps = std::min(eps, 0.5 * f[i] / -v[i]);
      if (eps > 0.0 && v.norm() > 1e-12) candidates.push_back(f + eps * v);
    }
    for (auto& f : candidates) {
      const ExtendedReal c = conjugate_block(op, b, f);
      if (c.is_finite()) family[b].emplace_back(std::move(f), c.value());
    }
  }

  double worst = 0.0;
  for (int n = 0; n < samples; ++n) {
    Eigen::VectorXd coords(static_cast<Eigen::Index>(op.domain().dimension()));
    for (Eigen::Index k = 0; k < coords.size(); ++k) coords[k] = normal(rng);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const Eigen::MatrixXd& basis = op.domain().block_basis(b);
      Eigen::VectorXd c(basis.cols());
      for (Eigen::Index k = 0; k < c.size(); ++k) c[k] = normal(rng);
      const Eigen::VectorXd x = basis * c;
      double best = -kInf;
      for (const auto& [f, pen] : family[b])
        best = std::max(best, f.dot(blocks[b].weights.cwiseProduct(x)) - pen);
      worst = std::max(worst, std::abs(best - op.evaluate_block(b, x)));
    }
  }
  {
    std::ostringstream d;
    d << samples << " samples, max deviation " << worst;
    report.add("dual representation", worst <= tol, d.str(), true);
  }

  // Splice identity: x*(1_A V1 + 1_{A^c} V2) = 1_A x*(V1) + 1_{A^c} x*(V2).
  bool splice_ok = true;
  std::ostringstream why;
  const auto& pieces = op.pieces();
  for (std::size_t i = 0; i < pieces.size(); ++i)
    for (std::size_t j = 0; j < pieces.size(); ++j) {
      if (i == j && pieces.size() > 1) continue;
      std::vector<bool> in_A(blocks.size());
      for (std::size_t b = 0; b < blocks.size(); ++b) in_A[b] = unif(rng) < 0.5;
      Eigen::VectorXd v = pieces[j].density.values();
      for (std::size_t b = 0; b < blocks.size(); ++b)
        if (in_A[b])
          for (int a : blocks[b].atoms) v[a] = pieces[i].density[a];
      const RandomVariable spliced = RandomVariable::unchecked(v, op.level_B());
      const PenaltyValue lhs = conjugate(op, spliced);
      const PenaltyValue p1 = conjugate(op, pieces[i].density);
      const PenaltyValue p2 = conjugate(op, pieces[j].density);
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        const ExtendedReal rhs = in_A[b] ? p1.blocks[b] : p2.blocks[b];
        if (!(lhs.blocks[b] == rhs)) {
          splice_ok = false;
          why << "pieces (" << i << "," << j << ") block " << b << "; ";
        }
      }
    }
  report.add("splice identity", splice_ok, why.str());
  return report;
}

/// m(Z) + x̂(X) <= M(Y) on random triples with Z + X <= Y, and the chain
/// m(X) <= -x̂(-X) <= x̂(X) <= M(X) on random X >= 0.
inline ValidationReport check_extension_bounds(const ExtendedOperator& ext, std::mt19937_64& rng,
                                               int samples = 1000, double tol = 1e-8) {
  const auto& space = ext.space();
  const int lb = ext.level_B();
  std::uniform_real_distribution<double> u(0.0, 2.0);
  auto draw = [&]() {
    Eigen::VectorXd v(space.n_atoms());
    for (const auto& block : space.partition(lb)) {
      const double x = u(rng);
      for (int a : block) v[a] = x;
    }
    return RandomVariable::unchecked(v, lb);
  };
  const auto& bounds = ext.bounds();
  double worst_triple = -kInf, worst_chain = -kInf;
  for (int n = 0; n < samples; ++n) {
    const RandomVariable z = draw(), y = draw(), slack = draw();
    const RandomVariable x = y - z - 0.5 * slack;
    const Eigen::VectorXd gap =
        bounds.lower(z).values() + ext.evaluate(x).values() - bounds.upper(y).values();
    worst_triple = std::max(worst_triple, gap.maxCoeff());

    const RandomVariable p = draw();
    const Eigen::VectorXd lo = bounds.lower(p).values();
    const Eigen::VectorXd neg = -ext.evaluate(-p).values();
    const Eigen::VectorXd pos = ext.evaluate(p).values();
    const Eigen::VectorXd hi = bounds.upper(p).values();
    worst_chain = std::max({worst_chain, (lo - neg).maxCoeff(), (neg - pos).maxCoeff(), (pos - hi).maxCoeff()});
  }
  ValidationReport r;
  std::ostringstream d1, d2;
  d1 << samples << " triples, max excess " << worst_triple;
  d2 << samples << " samples, max excess " << worst_chain;
  r.add("extension sandwich", worst_triple <= tol, d1.str(), true);
  r.add("bound chain", worst_chain <= tol, d2.str(), true);
  return r;
}

}  // namespace sandwich

#endif  // SANDWICH_EXTENSION_HPP
