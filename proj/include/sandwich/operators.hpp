#ifndef SANDWICH_OPERATORS_HPP
#define SANDWICH_OPERATORS_HPP

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sandwich/lp.hpp"
#include "sandwich/prob_core.hpp"
#include "sandwich/subspace.hpp"
#include "sandwich/support.hpp"

namespace sandwich {

// ---------------------------------------------------------------------------
// Reports

struct CheckEntry {
  std::string name;
  bool passed = true;
  std::string detail;
  bool sampled = false;  // true when the check tests samples rather than deciding exactly
};

struct ValidationReport {
  std::vector<CheckEntry> entries;

  bool passed() const {
    for (const auto& e : entries)
      if (!e.passed) return false;
    return true;
  }
  void add(std::string name, bool passed, std::string detail = {}, bool sampled = false) {
    entries.push_back({std::move(name), passed, std::move(detail), sampled});
  }
  void append(const ValidationReport& other, const std::string& prefix = {}) {
    for (auto e : other.entries) {
      e.name = prefix + e.name;
      entries.push_back(std::move(e));
    }
  }
  const CheckEntry* find(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Polyhedral operators

/// One affine piece X -> E[density * X | A] - penalty.
struct Piece {
  RandomVariable density;  // level_B measurable
  RandomVariable penalty;  // level_A measurable
};

/// x(X) = max_j (E[f_j X | A] - c_j) on a subspace L, evaluated per level_A block.
class PolyhedralOperator {
 public:
  struct BlockData {
    Eigen::MatrixXd densities;  // cells x pieces
    Eigen::VectorXd penalties;  // one per piece
  };

  PolyhedralOperator(Subspace domain, std::vector<Piece> pieces)
      : domain_(std::move(domain)), pieces_(std::move(pieces)) {
    if (pieces_.empty()) throw InvalidInputError("a polyhedral operator needs at least one piece");
    const auto& space = domain_.space();
    for (const auto& p : pieces_) {
      if (p.density.size() != space.n_atoms() || p.penalty.size() != space.n_atoms())
        throw InvalidInputError("piece size does not match the space");
      if (!p.density.is_measurable(space, level_B(), 1e-12))
        throw InvalidInputError("piece density is not measurable at level " + std::to_string(level_B()));
      if (!p.penalty.is_measurable(space, level_A(), 1e-12))
        throw InvalidInputError("piece penalty is not measurable at level " + std::to_string(level_A()));
    }
    const auto k = static_cast<Eigen::Index>(pieces_.size());
    for (const auto& block : domain_.blocks()) {
      BlockData data;
      data.densities.resize(block.size(), k);
      data.penalties.resize(k);
      for (Eigen::Index j = 0; j < k; ++j) {
        data.densities.col(j) = pieces_[static_cast<std::size_t>(j)].density.on_cells(block);
        data.penalties[j] = pieces_[static_cast<std::size_t>(j)].penalty[block.atoms.front()];
      }
      blocks_.push_back(std::move(data));
    }
  }

  const Subspace& domain() const { return domain_; }
  const FilteredSpace& space() const { return domain_.space(); }
  const std::vector<Piece>& pieces() const { return pieces_; }
  int level_A() const { return domain_.level_A(); }
  int level_B() const { return domain_.level_B(); }
  const std::vector<LocalBlock>& blocks() const { return domain_.blocks(); }
  const BlockData& block_data(std::size_t b) const { return blocks_[b]; }

  /// Scores E[f_j X | block] - c_j of every piece on block b.
  Eigen::VectorXd scores(std::size_t b, const Eigen::VectorXd& cells) const {
    const auto& block = domain_.blocks()[b];
    return blocks_[b].densities.transpose() * block.weights.cwiseProduct(cells) - blocks_[b].penalties;
  }
  double evaluate_block(std::size_t b, const Eigen::VectorXd& cells) const {
    return scores(b, cells).maxCoeff();
  }

  RandomVariable evaluate(const RandomVariable& x, double tol = kTol) const {
    if (!domain_.contains(x, tol))
      throw DomainError("argument lies outside the operator's domain (residual " +
                        std::to_string(domain_.residual_norm(x)) + ")");
    Eigen::VectorXd out(static_cast<Eigen::Index>(blocks_.size()));
    for (std::size_t b = 0; b < blocks_.size(); ++b)
      out[static_cast<Eigen::Index>(b)] = evaluate_block(b, x.on_cells(domain_.blocks()[b]));
    return assemble_blocks(space(), level_A(), out);
  }

 private:
  Subspace domain_;
  std::vector<Piece> pieces_;
  std::vector<BlockData> blocks_;
};

inline RandomVariable evaluate(const PolyhedralOperator& op, const RandomVariable& x) {
  return op.evaluate(x);
}

/// Monotone, convex, weak homogeneous and projecting by construction when
/// every density is nonnegative with conditional mean one and the smallest
/// penalty on each block is zero; this checks those conditions.
inline ValidationReport validate_operator(const PolyhedralOperator& op, double tol = kTol) {
  ValidationReport r;
  const auto& space = op.space();
  const auto& L = op.domain();

  {
    std::ostringstream why;
    bool ok = true;
    for (std::size_t j = 0; j < op.pieces().size(); ++j) {
      const double lo = op.pieces()[j].density.values().minCoeff();
      if (lo < -tol) {
        ok = false;
        why << "piece " << j << " has density value " << lo << " < 0; ";
      }
    }
    r.add("monotone", ok, ok ? "all densities nonnegative" : why.str());
  }
  {
    std::ostringstream why;
    bool ok = true;
    for (std::size_t b = 0; b < op.blocks().size(); ++b) {
      const auto& block = op.blocks()[b];
      const Eigen::VectorXd means = op.block_data(b).densities.transpose() * block.weights;
      for (Eigen::Index j = 0; j < means.size(); ++j)
        if (std::abs(means[j] - 1.0) > tol) {
          ok = false;
          why << "piece " << j << " has E[f|A] = " << means[j] << " on block " << b << "; ";
        }
    }
    r.add("normalized densities", ok, ok ? "E[f_j|A] = 1 for every piece" : why.str());
  }
  {
    std::ostringstream why;
    bool ok = true;
    for (std::size_t b = 0; b < op.blocks().size(); ++b) {
      const double lo = op.block_data(b).penalties.minCoeff();
      if (std::abs(lo) > tol) {
        ok = false;
        why << "block " << b << ": min penalty " << lo << ", x(0) = " << -lo << "; ";
      }
    }
    r.add("projection", ok, ok ? "min penalty is 0 on every block" : why.str());
  }
  r.add("domain contains constants", L.contains(constant(space, 1.0, L.level_B()), tol));
  {
    bool ok = true;
    for (const auto& block : space.partition(L.level_A())) {
      const RandomVariable ind = indicator(space, block, L.level_A());
      for (const auto& x : L.basis())
        if (!L.contains(ind * x, tol)) ok = false;
    }
    r.add("domain indicator-stable", ok);
  }
  r.add("convex", true, "structural: maximum of affine pieces");
  r.add("weak homogeneous", true, "structural: evaluated block by block");
  r.add("lower semi-continuous", true, "structural: finite-dimensional polyhedral function");
  return r;
}

// ---------------------------------------------------------------------------
// Bounds

enum class BoundKind { linear, polyhedral };

/// Minorant m = min of nonnegative linear kernels and majorant M = max of
/// nonnegative linear kernels, both acting as X -> E[k X | A] on X >= 0. The
/// linear kind has one kernel on each side (m0, M0).
class BoundPair {
 public:
  struct BlockData {
    Eigen::MatrixXd lower;  // cells x m-kernels
    Eigen::MatrixXd upper;  // cells x M-kernels
  };

  static BoundPair linear(SpacePtr space, int level_A, int level_B, RandomVariable m0,
                          RandomVariable M0) {
    if ((m0.values().array() > M0.values().array() + 1e-12).any())
      throw InvalidInputError("linear bounds require m0 <= M0");
    return BoundPair(std::move(space), level_A, level_B, BoundKind::linear, {std::move(m0)},
                     {std::move(M0)});
  }
  static BoundPair polyhedral(SpacePtr space, int level_A, int level_B,
                              std::vector<RandomVariable> m_kernels,
                              std::vector<RandomVariable> M_kernels) {
    return BoundPair(std::move(space), level_A, level_B, BoundKind::polyhedral, std::move(m_kernels),
                     std::move(M_kernels));
  }

  BoundKind kind() const { return kind_; }
  const FilteredSpace& space() const { return *space_; }
  const SpacePtr& space_ptr() const { return space_; }
  int level_A() const { return level_A_; }
  int level_B() const { return level_B_; }
  const std::vector<RandomVariable>& lower_kernels() const { return lower_; }
  const std::vector<RandomVariable>& upper_kernels() const { return upper_; }
  const std::vector<LocalBlock>& blocks() const { return blocks_; }
  const BlockData& block_data(std::size_t b) const { return data_[b]; }
  /// The regularity condition on M holds trivially on a finite space.
  static constexpr bool regular() { return true; }

  double lower_block(std::size_t b, const Eigen::VectorXd& cells) const {
    return (data_[b].lower.transpose() * blocks_[b].weights.cwiseProduct(cells)).minCoeff();
  }
  double upper_block(std::size_t b, const Eigen::VectorXd& cells) const {
    return (data_[b].upper.transpose() * blocks_[b].weights.cwiseProduct(cells)).maxCoeff();
  }

  /// m(X) for X >= 0 measurable at level_B (or coarser).
  RandomVariable lower(const RandomVariable& x) const { return apply(x, true); }
  /// M(X) for X >= 0.
  RandomVariable upper(const RandomVariable& x) const { return apply(x, false); }

 private:
  BoundPair(SpacePtr space, int level_A, int level_B, BoundKind kind,
            std::vector<RandomVariable> lower, std::vector<RandomVariable> upper)
      : space_(std::move(space)),
        level_A_(level_A),
        level_B_(level_B),
        kind_(kind),
        lower_(std::move(lower)),
        upper_(std::move(upper)) {
    if (lower_.empty() || upper_.empty())
      throw InvalidInputError("bounds need at least one kernel on each side");
    blocks_ = space_->layout(level_A_, level_B_);
    for (const auto* side : {&lower_, &upper_})
      for (const auto& k : *side) {
        if (k.size() != space_->n_atoms()) throw InvalidInputError("bound kernel size mismatch");
        if (!k.is_measurable(*space_, level_B_, 1e-12))
          throw InvalidInputError("bound kernel is not measurable at level " + std::to_string(level_B_));
        if (k.values().minCoeff() < 0.0) throw InvalidInputError("bound kernels must be nonnegative");
      }
    for (const auto& block : blocks_) {
      BlockData d;
      d.lower.resize(block.size(), static_cast<Eigen::Index>(lower_.size()));
      d.upper.resize(block.size(), static_cast<Eigen::Index>(upper_.size()));
      for (std::size_t k = 0; k < lower_.size(); ++k)
        d.lower.col(static_cast<Eigen::Index>(k)) = lower_[k].on_cells(block);
      for (std::size_t k = 0; k < upper_.size(); ++k)
        d.upper.col(static_cast<Eigen::Index>(k)) = upper_[k].on_cells(block);
      data_.push_back(std::move(d));
    }
  }

  RandomVariable apply(const RandomVariable& x, bool lower_side) const {
    if (x.level() > level_B_) throw InvalidLevelError("bound argument is finer than level_B");
    Eigen::VectorXd out(static_cast<Eigen::Index>(blocks_.size()));
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const Eigen::VectorXd cells = x.on_cells(blocks_[b]);
      out[static_cast<Eigen::Index>(b)] = lower_side ? lower_block(b, cells) : upper_block(b, cells);
    }
    return assemble_blocks(*space_, level_A_, out);
  }

  SpacePtr space_;
  int level_A_, level_B_;
  BoundKind kind_;
  std::vector<RandomVariable> lower_, upper_;
  std::vector<LocalBlock> blocks_;
  std::vector<BlockData> data_;
};

// ---------------------------------------------------------------------------
// Density polytopes

/// Densities on one block satisfying the bounds, written over z = (f, aux) >= 0
/// as A z <= b, C z = d. The first `cells` coordinates of z are f; the
/// auxiliary coordinates are the mixing weights of the bound kernels.
struct BlockPolytope {
  Eigen::Index cells = 0;
  Eigen::Index aux = 0;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::MatrixXd C;
  Eigen::VectorXd d;
  std::optional<BoxBudget> box;  // set for linear bounds
  bool nonempty = false;

  Eigen::Index width() const { return cells + aux; }

  /// Adds z >= 0 and the polytope rows; returns the variable indices of z.
  std::vector<int> add_to(LinearProgram& lp) const {
    std::vector<int> z;
    for (Eigen::Index i = 0; i < width(); ++i) z.push_back(lp.add_variable(0.0));
    for (Eigen::Index r = 0; r < A.rows(); ++r) {
      std::vector<Term> row;
      for (Eigen::Index i = 0; i < width(); ++i)
        if (A(r, i) != 0.0) row.push_back({z[static_cast<std::size_t>(i)], A(r, i)});
      lp.add_row(std::move(row), RowType::le, b[r]);
    }
    for (Eigen::Index r = 0; r < C.rows(); ++r) {
      std::vector<Term> row;
      for (Eigen::Index i = 0; i < width(); ++i)
        if (C(r, i) != 0.0) row.push_back({z[static_cast<std::size_t>(i)], C(r, i)});
      lp.add_row(std::move(row), RowType::eq, d[r]);
    }
    return z;
  }

  /// Whether the cell vector f is a member (up to tol).
  bool contains(const Eigen::VectorXd& f, double tol = kTol) const {
    if (box) {
      const Eigen::VectorXd& p = box->prob;
      return (f.array() >= box->lower.array() - tol).all() &&
             (f.array() <= box->upper.array() + tol).all() &&
             std::abs(p.dot(f) - p.sum()) <= tol * p.sum();
    }
    LinearProgram lp;
    const auto z = add_to(lp);
    for (Eigen::Index i = 0; i < cells; ++i) {
      // f is fixed up to tol in each coordinate
      lp.add_row({{z[static_cast<std::size_t>(i)], 1.0}}, RowType::le, f[i] + tol);
      lp.add_row({{z[static_cast<std::size_t>(i)], 1.0}}, RowType::ge, f[i] - tol);
    }
    return solve_lp(lp).status == LpStatus::optimal;
  }
};

/// {f >= 0 : E[f|A] = 1, m(X) <= E[fX|A] <= M(X) for X >= 0}, one polytope per
/// level_A block.
struct DensityPolytope {
  int level_A = 0;
  int level_B = 0;
  std::vector<LocalBlock> blocks;
  std::vector<BlockPolytope> polytopes;

  bool nonempty() const {
    for (const auto& p : polytopes)
      if (!p.nonempty) return false;
    return true;
  }
};

/// Builds the density polytope and flags emptiness per block (never throws on
/// emptiness; see density_set for the throwing variant).
inline DensityPolytope describe_density_set(const BoundPair& bounds) {
  DensityPolytope out;
  out.level_A = bounds.level_A();
  out.level_B = bounds.level_B();
  out.blocks = bounds.blocks();
  for (std::size_t bi = 0; bi < out.blocks.size(); ++bi) {
    const auto& block = out.blocks[bi];
    const auto& data = bounds.block_data(bi);
    const Eigen::Index n = block.size();
    BlockPolytope poly;
    poly.cells = n;
    if (bounds.kind() == BoundKind::linear) {
      poly.aux = 0;
      poly.A.resize(2 * n, n);
      poly.A << Eigen::MatrixXd::Identity(n, n), -Eigen::MatrixXd::Identity(n, n);
      poly.b.resize(2 * n);
      poly.b << data.upper.col(0), -data.lower.col(0);
      poly.C = block.weights.transpose();
      poly.d = Eigen::VectorXd::Ones(1);
      BoxBudget box;
      box.prob.resize(n);
      for (Eigen::Index c = 0; c < n; ++c) box.prob[c] = block.cells[static_cast<std::size_t>(c)].prob;
      box.lower = data.lower.col(0);
      box.upper = data.upper.col(0);
      poly.nonempty = box.nonempty();
      poly.box = std::move(box);
    } else {
      const Eigen::Index km = data.lower.cols();
      const Eigen::Index kM = data.upper.cols();
      poly.aux = km + kM;
      poly.A = Eigen::MatrixXd::Zero(2 * n, n + km + kM);
      poly.b = Eigen::VectorXd::Zero(2 * n);
      // sum_k mu_k m_k - f <= 0 ; f - sum_k lambda_k M_k <= 0
      poly.A.block(0, 0, n, n) = -Eigen::MatrixXd::Identity(n, n);
      poly.A.block(0, n, n, km) = data.lower;
      poly.A.block(n, 0, n, n) = Eigen::MatrixXd::Identity(n, n);
      poly.A.block(n, n + km, n, kM) = -data.upper;
      poly.C = Eigen::MatrixXd::Zero(3, n + km + kM);
      poly.C.block(0, 0, 1, n) = block.weights.transpose();
      poly.C.block(1, n, 1, km).setOnes();
      poly.C.block(2, n + km, 1, kM).setOnes();
      poly.d = Eigen::VectorXd::Ones(3);
      LinearProgram lp;
      poly.add_to(lp);
      poly.nonempty = solve_lp(lp).status == LpStatus::optimal;
    }
    out.polytopes.push_back(std::move(poly));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sandwich condition

struct SandwichWitness {
  RandomVariable X, Z, Y;
  std::size_t piece = 0;
  std::size_t block = 0;
  /// m(Z) + x(X) - M(Y) on the witness block; positive by construction.
  double violation = 0.0;
};

struct SandwichResult {
  bool holds = true;
  bool via_fast_path = false;
  std::optional<SandwichWitness> witness;
};

/// Decides m(Z) + x(X) <= M(Y) for all X in L and Z, Y >= 0 with Z + X <= Y.
///
/// Per block and piece j the condition reduces to the homogeneous program
/// min { M(Y) - E[f_j X|A] - m(Z) : Z + X <= Y, Z, Y >= 0, X in L }, whose
/// value is 0 or -inf. An improving ray of that program is a violating
/// direction; it is scaled so the returned triple violates by 1.
inline SandwichResult check_sandwich(const PolyhedralOperator& op, const BoundPair& bounds,
                                     double tol = kTol) {
  if (op.level_A() != bounds.level_A() || op.level_B() != bounds.level_B())
    throw InvalidLevelError("operator and bounds act between different levels");
  const auto& space = op.space();
  const auto& blocks = op.blocks();
  SandwichResult result;

  // Sufficient: every density inside the bound set and every penalty >= 0.
  {
    bool fast = true;
    for (std::size_t b = 0; b < blocks.size() && fast; ++b) {
      const auto& data = op.block_data(b);
      const auto& bd = bounds.block_data(b);
      for (Eigen::Index j = 0; j < data.densities.cols() && fast; ++j) {
        if (data.penalties[j] < -tol) fast = false;
        const Eigen::VectorXd f = data.densities.col(j);
        if (bounds.kind() == BoundKind::linear) {
          if ((f.array() < bd.lower.col(0).array() - tol).any() ||
              (f.array() > bd.upper.col(0).array() + tol).any())
            fast = false;
        } else {
          // f in conv(m-kernels) + R+ and in conv(M-kernels) - R+
          LinearProgram lp;
          std::vector<int> mu, la;
          for (Eigen::Index k = 0; k < bd.lower.cols(); ++k) mu.push_back(lp.add_variable(0.0));
          for (Eigen::Index k = 0; k < bd.upper.cols(); ++k) la.push_back(lp.add_variable(0.0));
          std::vector<Term> smu, sla;
          for (int v : mu) smu.push_back({v, 1.0});
          for (int v : la) sla.push_back({v, 1.0});
          lp.add_row(smu, RowType::eq, 1.0);
          lp.add_row(sla, RowType::eq, 1.0);
          for (Eigen::Index c = 0; c < f.size(); ++c) {
            std::vector<Term> lo, hi;
            for (std::size_t k = 0; k < mu.size(); ++k)
              lo.push_back({mu[k], bd.lower(c, static_cast<Eigen::Index>(k))});
            for (std::size_t k = 0; k < la.size(); ++k)
              hi.push_back({la[k], bd.upper(c, static_cast<Eigen::Index>(k))});
            lp.add_row(lo, RowType::le, f[c] + tol);
            lp.add_row(hi, RowType::ge, f[c] - tol);
          }
          if (solve_lp(lp).status != LpStatus::optimal) fast = false;
        }
      }
    }
    if (fast) {
      result.via_fast_path = true;
      return result;
    }
  }

  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& block = blocks[b];
    const auto& data = op.block_data(b);
    const auto& bd = bounds.block_data(b);
    const Eigen::MatrixXd& basis = op.domain().block_basis(b);
    const Eigen::Index n = block.size();
    const Eigen::Index d = basis.cols();
    const Eigen::VectorXd& w = block.weights;

    for (Eigen::Index j = 0; j < data.densities.cols(); ++j) {
      LinearProgram lp(LinearProgram::Sense::minimize);
      std::vector<int> y, z, yy;
      const Eigen::VectorXd price = basis.transpose() * w.cwiseProduct(data.densities.col(j));
      for (Eigen::Index k = 0; k < d; ++k) y.push_back(lp.add_free_variable(-price[k]));
      for (Eigen::Index c = 0; c < n; ++c) z.push_back(lp.add_variable(0.0));
      for (Eigen::Index c = 0; c < n; ++c) yy.push_back(lp.add_variable(0.0));
      const int t = lp.add_free_variable(1.0);
      const int s = lp.add_free_variable(-1.0);
      for (Eigen::Index k = 0; k < bd.upper.cols(); ++k) {
        std::vector<Term> row{{t, 1.0}};
        for (Eigen::Index c = 0; c < n; ++c) row.push_back({yy[static_cast<std::size_t>(c)], -w[c] * bd.upper(c, k)});
        lp.add_row(std::move(row), RowType::ge, 0.0);
      }
      for (Eigen::Index k = 0; k < bd.lower.cols(); ++k) {
        std::vector<Term> row{{s, 1.0}};
        for (Eigen::Index c = 0; c < n; ++c) row.push_back({z[static_cast<std::size_t>(c)], -w[c] * bd.lower(c, k)});
        lp.add_row(std::move(row), RowType::le, 0.0);
      }
      for (Eigen::Index c = 0; c < n; ++c) {
        std::vector<Term> row{{z[static_cast<std::size_t>(c)], 1.0}, {yy[static_cast<std::size_t>(c)], -1.0}};
        for (Eigen::Index k = 0; k < d; ++k) row.push_back({y[static_cast<std::size_t>(k)], basis(c, k)});
        lp.add_row(std::move(row), RowType::le, 0.0);
      }
      const LpResult res = solve_lp(lp);
      if (res.status != LpStatus::unbounded) continue;

      Eigen::VectorXd xc = Eigen::VectorXd::Zero(n), zc(n), yc(n);
      for (Eigen::Index k = 0; k < d; ++k) xc += res.ray[y[static_cast<std::size_t>(k)]] * basis.col(k);
      for (Eigen::Index c = 0; c < n; ++c) {
        zc[c] = std::max(0.0, res.ray[z[static_cast<std::size_t>(c)]]);
        yc[c] = std::max(0.0, res.ray[yy[static_cast<std::size_t>(c)]]);
      }
      const double viol = bounds.lower_block(b, zc) + data.densities.col(j).dot(w.cwiseProduct(xc)) -
                          bounds.upper_block(b, yc);
      if (!(viol > tol)) continue;
      const double scale = (std::max(0.0, data.penalties[j]) + 1.0) / viol;
      std::vector<Eigen::VectorXd> zero(blocks.size());
      auto embed = [&](const Eigen::VectorXd& v) {
        for (std::size_t o = 0; o < blocks.size(); ++o) zero[o] = Eigen::VectorXd::Zero(blocks[o].size());
        zero[b] = scale * v;
        return assemble(space, blocks, zero, op.level_B());
      };
      result.holds = false;
      result.witness = SandwichWitness{embed(xc), embed(zc), embed(yc), static_cast<std::size_t>(j), b,
                                       scale * viol - data.penalties[j]};
      return result;
    }
  }
  return result;
}

/// E[m(1_B)] > 0 for every level_B cell; equivalently every cell has a strictly
/// positive value under every minorant kernel.
inline bool check_nondegenerate(const BoundPair& bounds) {
  for (std::size_t b = 0; b < bounds.blocks().size(); ++b) {
    const auto& lo = bounds.block_data(b).lower;
    if (lo.rows() > 0 && lo.rowwise().minCoeff().minCoeff() <= 0.0) return false;
  }
  return true;
}

/// m(X) <= M(X) for all X >= 0, decided per block by a homogeneous LP.
inline bool bounds_ordered(const BoundPair& bounds, double tol = kTol) {
  for (std::size_t b = 0; b < bounds.blocks().size(); ++b) {
    const auto& block = bounds.blocks()[b];
    const auto& bd = bounds.block_data(b);
    if (bounds.kind() == BoundKind::linear) {
      if ((bd.lower.col(0).array() > bd.upper.col(0).array() + tol).any()) return false;
      continue;
    }
    LinearProgram lp;
    std::vector<int> x;
    for (Eigen::Index c = 0; c < block.size(); ++c) x.push_back(lp.add_variable(0.0, 1.0));
    const int t = lp.add_free_variable(1.0);
    const int s = lp.add_free_variable(-1.0);
    for (Eigen::Index k = 0; k < bd.upper.cols(); ++k) {
      std::vector<Term> row{{t, 1.0}};
      for (Eigen::Index c = 0; c < block.size(); ++c)
        row.push_back({x[static_cast<std::size_t>(c)], -block.weights[c] * bd.upper(c, k)});
      lp.add_row(std::move(row), RowType::ge, 0.0);
    }
    for (Eigen::Index k = 0; k < bd.lower.cols(); ++k) {
      std::vector<Term> row{{s, 1.0}};
      for (Eigen::Index c = 0; c < block.size(); ++c)
        row.push_back({x[static_cast<std::size_t>(c)], -block.weights[c] * bd.lower(c, k)});
      lp.add_row(std::move(row), RowType::le, 0.0);
    }
    const LpResult r = solve_lp(lp);
    if (r.status != LpStatus::optimal || r.value < -tol) return false;
  }
  return true;
}

using PairKey = std::pair<int, int>;

/// Bounds indexed by grid pairs (s, t), s < t.
struct BoundFamily {
  std::vector<int> grid;
  std::map<PairKey, BoundPair> bounds;

  const BoundPair& at(int s, int t) const {
    auto it = bounds.find({s, t});
    if (it == bounds.end())
      throw InvalidInputError("no bounds for pair (" + std::to_string(s) + ", " + std::to_string(t) + ")");
    return it->second;
  }
};

/// Weak time-consistency of both bound families, m <= M per pair, and
/// non-degeneracy of the minorant on the full horizon. Linear families are
/// decided exactly on level indicators; polyhedral ones are sampled.
inline ValidationReport check_mM1(const BoundFamily& family, std::mt19937_64& rng,
                                  double tol = kTol, int samples = 50) {
  const auto& grid = family.grid;
  if (grid.size() < 2) throw InvalidInputError("mM1 needs a grid with at least two points");
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      const auto& bp = family.at(grid[i], grid[j]);
      if (bp.level_A() != grid[i] || bp.level_B() != grid[j])
        throw InvalidInputError("bounds stored under pair (" + std::to_string(grid[i]) + ", " +
                                std::to_string(grid[j]) + ") act between other levels");
    }

  ValidationReport r;
  bool all_linear = true;
  for (const auto& [key, bp] : family.bounds) all_linear &= bp.kind() == BoundKind::linear;
  const bool sampled = !all_linear;

  std::ostringstream fail_m, fail_M;
  bool ok_m = true, ok_M = true;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = i + 1; j < grid.size(); ++j)
      for (std::size_t k = j + 1; k < grid.size(); ++k) {
        const int r0 = grid[i], s0 = grid[j], t0 = grid[k];
        const auto& rs = family.at(r0, s0);
        const auto& st = family.at(s0, t0);
        const auto& rt = family.at(r0, t0);
        const FilteredSpace& space = rs.space();
        std::vector<RandomVariable> tests;
        for (const auto& block : space.partition(t0)) tests.push_back(indicator(space, block, t0));
        if (sampled)
          for (int n = 0; n < samples; ++n) {
            Eigen::VectorXd v(space.n_atoms());
            for (const auto& block : space.partition(t0)) {
              const double u = unif(rng);
              for (int a : block) v[a] = u;
            }
            tests.push_back(RandomVariable::unchecked(v, t0));
          }
        for (std::size_t n = 0; n < tests.size(); ++n) {
          const auto& x = tests[n];
          const RandomVariable lhs_m = rs.lower(st.lower(x));
          const RandomVariable rhs_m = rt.lower(x);
          const double gm = (rhs_m.values() - lhs_m.values()).maxCoeff();
          if (gm > tol) {
            ok_m = false;
            fail_m << "(" << r0 << "," << s0 << "," << t0 << ") test " << n << " short by " << gm << "; ";
          }
          const RandomVariable lhs_M = rs.upper(st.upper(x));
          const RandomVariable rhs_M = rt.upper(x);
          const double gM = (lhs_M.values() - rhs_M.values()).maxCoeff();
          if (gM > tol) {
            ok_M = false;
            fail_M << "(" << r0 << "," << s0 << "," << t0 << ") test " << n << " exceeds by " << gM << "; ";
          }
        }
      }
  r.add("weak time-consistency (minorant)", ok_m, ok_m ? "" : fail_m.str(), sampled);
  r.add("weak time-consistency (majorant)", ok_M, ok_M ? "" : fail_M.str(), sampled);

  bool ordered = true;
  std::ostringstream fail_o;
  for (const auto& [key, bp] : family.bounds)
    if (!bounds_ordered(bp, tol)) {
      ordered = false;
      fail_o << "(" << key.first << "," << key.second << ") ";
    }
  r.add("minorant below majorant", ordered, ordered ? "" : fail_o.str());
  r.add("non-degenerate minorant on the horizon",
        check_nondegenerate(family.at(grid.front(), grid.back())));
  r.add("regular majorant", true, "structural: finite space");
  return r;
}

}  // namespace sandwich

#endif  // SANDWICH_OPERATORS_HPP
