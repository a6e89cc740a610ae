#ifndef SANDWICH_SUBSPACE_HPP
#define SANDWICH_SUBSPACE_HPP

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "sandwich/prob_core.hpp"

namespace sandwich {

/// Rank tolerance used when orthonormalizing generators.
inline constexpr double kRankTol = 1e-10;

/// A linear subspace L of level_B-measurable random variables that contains
/// the constants and is stable under multiplication by indicators of level_A
/// blocks. Stability makes L the direct sum of its restrictions to the
/// level_A blocks, which is how it is stored.
class Subspace {
 public:
  /// Smallest subspace containing {1} and `generators`, closed under level_A
  /// indicators.
  static Subspace span_closure(SpacePtr space, int level_B, int level_A,
                               std::span<const RandomVariable> generators) {
    space->check_level(level_B);
    space->check_level(level_A);
    if (level_A > level_B)
      throw InvalidLevelError("span_closure: level_A must not be finer than level_B");
    for (const auto& g : generators) {
      if (g.size() != space->n_atoms())
        throw InvalidInputError("generator size does not match the space");
      if (!g.is_measurable(*space, level_B, 1e-12))
        throw InvalidInputError("generator is not measurable at level " + std::to_string(level_B));
    }

    Subspace s;
    s.space_ = std::move(space);
    s.level_B_ = level_B;
    s.level_A_ = level_A;
    s.blocks_ = s.space_->layout(level_A, level_B);

    for (const auto& block : s.blocks_) {
      std::vector<Eigen::VectorXd> candidates;
      candidates.emplace_back(Eigen::VectorXd::Ones(block.size()));
      for (const auto& g : generators) candidates.push_back(g.on_cells(block));
      s.block_bases_.push_back(orthonormalize(candidates, block.weights));
    }

    for (std::size_t b = 0; b < s.blocks_.size(); ++b) {
      const auto& block = s.blocks_[b];
      const Eigen::MatrixXd& basis = s.block_bases_[b];
      const double scale = 1.0 / std::sqrt(block.prob);
      for (Eigen::Index k = 0; k < basis.cols(); ++k) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(s.space_->n_atoms());
        for (std::size_t c = 0; c < block.cells.size(); ++c)
          for (int a : block.cells[c].atoms) v[a] = scale * basis(static_cast<Eigen::Index>(c), k);
        s.basis_.push_back(RandomVariable::unchecked(std::move(v), level_B));
      }
    }
    return s;
  }

  static Subspace span_closure(SpacePtr space, int level_B, int level_A,
                               std::initializer_list<RandomVariable> generators) {
    return span_closure(std::move(space), level_B, level_A,
                        std::span<const RandomVariable>(generators.begin(), generators.size()));
  }

  /// All of L_p(F_level_B).
  static Subspace full(SpacePtr space, int level_B, int level_A) {
    std::vector<RandomVariable> gens;
    for (const auto& block : space->partition(level_B)) gens.push_back(indicator(*space, block, level_B));
    return span_closure(std::move(space), level_B, level_A, gens);
  }

  const FilteredSpace& space() const { return *space_; }
  const SpacePtr& space_ptr() const { return space_; }
  int level_B() const { return level_B_; }
  int level_A() const { return level_A_; }
  std::size_t dimension() const { return basis_.size(); }
  bool is_full() const { return dimension() == space_->n_blocks(level_B_); }

  /// P-orthonormal basis of L.
  const std::vector<RandomVariable>& basis() const { return basis_; }
  const std::vector<LocalBlock>& blocks() const { return blocks_; }
  /// Orthonormal (under the block's conditional weights) basis of L restricted
  /// to block b, one column per basis vector, one row per cell.
  const Eigen::MatrixXd& block_basis(std::size_t b) const { return block_bases_[b]; }

  /// Coordinates of the restriction of X to block b in block_basis(b).
  Eigen::VectorXd coordinates(std::size_t b, const Eigen::VectorXd& cell_values) const {
    return block_bases_[b].transpose() * blocks_[b].weights.cwiseProduct(cell_values);
  }

  /// Orthogonal projection onto L under E[XY].
  RandomVariable project(const RandomVariable& x) const {
    const RandomVariable xb = x.level() > level_B_ ? cond_expectation(*space_, x, level_B_) : x;
    std::vector<Eigen::VectorXd> cells;
    cells.reserve(blocks_.size());
    for (std::size_t b = 0; b < blocks_.size(); ++b)
      cells.push_back(block_bases_[b] * coordinates(b, xb.on_cells(blocks_[b])));
    return assemble(*space_, blocks_, cells, level_B_);
  }

  double residual_norm(const RandomVariable& x) const {
    const RandomVariable r = x - project(x);
    return std::sqrt(std::max(0.0, inner(*space_, r, r)));
  }

  bool contains(const RandomVariable& x, double tol = kTol) const {
    if (x.size() != space_->n_atoms()) return false;
    return residual_norm(x) < tol;
  }

 private:
  Subspace() = default;

  /// Two-pass modified Gram-Schmidt under the weighted inner product.
  static Eigen::MatrixXd orthonormalize(const std::vector<Eigen::VectorXd>& vectors,
                                        const Eigen::VectorXd& weights) {
    std::vector<Eigen::VectorXd> kept;
    auto dot = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
      return (a.cwiseProduct(b)).dot(weights);
    };
    for (const auto& v : vectors) {
      Eigen::VectorXd u = v;
      const double original = std::sqrt(std::max(0.0, dot(v, v)));
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& q : kept) u -= dot(q, u) * q;
      const double n = std::sqrt(std::max(0.0, dot(u, u)));
      if (n > kRankTol * std::max(1.0, original)) kept.push_back(u / n);
    }
    Eigen::MatrixXd m(weights.size(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = kept[k];
    return m;
  }

  SpacePtr space_;
  int level_B_ = 0;
  int level_A_ = 0;
  std::vector<LocalBlock> blocks_;
  std::vector<Eigen::MatrixXd> block_bases_;
  std::vector<RandomVariable> basis_;
};

}  // namespace sandwich

#endif  // SANDWICH_SUBSPACE_HPP
