#ifndef SANDWICH_PROB_CORE_HPP
#define SANDWICH_PROB_CORE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sandwich/error.hpp"

namespace sandwich {

/// Default absolute tolerance for comparisons between computed values.
inline constexpr double kTol = 1e-9;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// A partition of {0..n-1} given as a list of blocks of atom indices.
using Partition = std::vector<std::vector<int>>;

/// A block of a finer partition sitting inside a block of a coarser one.
struct Cell {
  std::vector<int> atoms;
  double prob = 0.0;
};

/// One block of a coarse level, seen through the cells of a finer level.
///
/// Everything that is localized by weak homogeneity (operators, densities,
/// bounds) is stored per LocalBlock: a random variable measurable at the
/// finer level becomes a vector with one entry per cell, and the
/// conditional expectation on the block is the dot product with `weights`.
struct LocalBlock {
  std::size_t index = 0;
  std::vector<int> atoms;
  double prob = 0.0;
  std::vector<Cell> cells;
  Eigen::VectorXd weights;  // P(cell) / P(block), sums to 1

  Eigen::Index size() const { return weights.size(); }
};

/// Finite sample space with strictly positive atom probabilities and a chain
/// of refining partitions. Level 0 is the coarsest, the last level is the
/// discrete partition.
class FilteredSpace {
 public:
  FilteredSpace(std::vector<double> probs, std::vector<Partition> levels,
                std::vector<double> time_labels, double exponent = 2.0)
      : probs_(std::move(probs)),
        levels_(std::move(levels)),
        time_labels_(std::move(time_labels)),
        exponent_(exponent) {
    validate();
    block_of_.resize(levels_.size());
    for (std::size_t l = 0; l < levels_.size(); ++l) {
      block_of_[l].assign(probs_.size(), -1);
      for (std::size_t b = 0; b < levels_[l].size(); ++b)
        for (int a : levels_[l][b]) block_of_[l][static_cast<std::size_t>(a)] = static_cast<int>(b);
    }
  }

  int n_atoms() const { return static_cast<int>(probs_.size()); }
  int n_levels() const { return static_cast<int>(levels_.size()); }
  int last_level() const { return n_levels() - 1; }
  double exponent() const { return exponent_; }
  const std::vector<double>& probs() const { return probs_; }
  double prob(int atom) const { return probs_[static_cast<std::size_t>(atom)]; }
  double time_label(int level) const {
    check_level(level);
    return time_labels_[static_cast<std::size_t>(level)];
  }
  const std::vector<double>& time_labels() const { return time_labels_; }

  const Partition& partition(int level) const {
    check_level(level);
    return levels_[static_cast<std::size_t>(level)];
  }
  std::size_t n_blocks(int level) const { return partition(level).size(); }
  int block_of(int level, int atom) const {
    check_level(level);
    return block_of_[static_cast<std::size_t>(level)][static_cast<std::size_t>(atom)];
  }

  double mass(std::span<const int> atoms) const {
    double s = 0.0;
    for (int a : atoms) s += prob(a);
    return s;
  }

  void check_level(int level) const {
    if (level < 0 || level >= n_levels())
      throw InvalidLevelError("level " + std::to_string(level) + " outside [0, " +
                              std::to_string(n_levels() - 1) + "]");
  }

  /// True iff `atoms` is a union of blocks of the given level.
  bool is_union_of_blocks(int level, std::span<const int> atoms) const {
    check_level(level);
    std::vector<char> in(probs_.size(), 0);
    for (int a : atoms) {
      if (a < 0 || a >= n_atoms()) return false;
      in[static_cast<std::size_t>(a)] = 1;
    }
    for (const auto& block : partition(level)) {
      const char first = in[static_cast<std::size_t>(block.front())];
      for (int a : block)
        if (in[static_cast<std::size_t>(a)] != first) return false;
    }
    return true;
  }

  /// Blocks of `coarse`, each subdivided into the blocks of `fine` it contains.
  std::vector<LocalBlock> layout(int coarse, int fine) const {
    check_level(coarse);
    check_level(fine);
    if (coarse > fine)
      throw InvalidLevelError("layout: level " + std::to_string(coarse) + " is finer than " +
                              std::to_string(fine));
    std::vector<LocalBlock> out;
    const auto& cp = partition(coarse);
    const auto& fp = partition(fine);
    out.reserve(cp.size());
    for (std::size_t b = 0; b < cp.size(); ++b) {
      LocalBlock lb;
      lb.index = b;
      lb.atoms = cp[b];
      lb.prob = mass(cp[b]);
      for (const auto& fb : fp)
        if (block_of(coarse, fb.front()) == static_cast<int>(b)) lb.cells.push_back({fb, mass(fb)});
      lb.weights.resize(static_cast<Eigen::Index>(lb.cells.size()));
      for (std::size_t c = 0; c < lb.cells.size(); ++c)
        lb.weights[static_cast<Eigen::Index>(c)] = lb.cells[c].prob / lb.prob;
      out.push_back(std::move(lb));
    }
    return out;
  }

 private:
  void validate() const {
    if (probs_.empty()) throw InvalidInputError("sample space must have at least one atom");
    double total = 0.0;
    for (double p : probs_) {
      if (!(p > 0.0)) throw InvalidInputError("atom probabilities must be strictly positive");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw InvalidInputError("atom probabilities must sum to 1");
    if (levels_.empty()) throw InvalidInputError("filtration must have at least one level");
    if (time_labels_.size() != levels_.size())
      throw InvalidInputError("one time label per level is required");
    for (std::size_t l = 1; l < time_labels_.size(); ++l)
      if (!(time_labels_[l] > time_labels_[l - 1]))
        throw InvalidInputError("time labels must be strictly increasing");
    if (!(exponent_ >= 1.0)) throw InvalidInputError("exponent p must lie in [1, inf]");

    const std::size_t n = probs_.size();
    std::vector<int> owner_prev;
    for (std::size_t l = 0; l < levels_.size(); ++l) {
      std::vector<int> owner(n, -1);
      for (std::size_t b = 0; b < levels_[l].size(); ++b) {
        if (levels_[l][b].empty())
          throw InvalidInputError("level " + std::to_string(l) + " has an empty block");
        for (int a : levels_[l][b]) {
          if (a < 0 || static_cast<std::size_t>(a) >= n)
            throw InvalidInputError("level " + std::to_string(l) + " references atom " +
                                    std::to_string(a) + " out of range");
          if (owner[static_cast<std::size_t>(a)] != -1)
            throw InvalidInputError("level " + std::to_string(l) + " lists atom " +
                                    std::to_string(a) + " twice");
          owner[static_cast<std::size_t>(a)] = static_cast<int>(b);
        }
      }
      for (std::size_t a = 0; a < n; ++a)
        if (owner[a] == -1)
          throw InvalidInputError("level " + std::to_string(l) + " does not cover atom " +
                                  std::to_string(a));
      if (l > 0) {
        for (const auto& block : levels_[l]) {
          const int parent = owner_prev[static_cast<std::size_t>(block.front())];
          for (int a : block)
            if (owner_prev[static_cast<std::size_t>(a)] != parent)
              throw InvalidInputError("level " + std::to_string(l) + " does not refine level " +
                                      std::to_string(l - 1));
        }
      }
      owner_prev = std::move(owner);
    }
    if (levels_.back().size() != n)
      throw InvalidInputError("the last level must be the discrete partition");
  }

  std::vector<double> probs_;
  std::vector<Partition> levels_;
  std::vector<double> time_labels_;
  double exponent_;
  std::vector<std::vector<int>> block_of_;
};

using SpacePtr = std::shared_ptr<const FilteredSpace>;

inline SpacePtr make_space(std::vector<double> probs, std::vector<Partition> levels,
                           std::vector<double> time_labels, double exponent = 2.0) {
  return std::make_shared<const FilteredSpace>(std::move(probs), std::move(levels),
                                               std::move(time_labels), exponent);
}

/// A real value per finest atom together with a declared measurability level.
class RandomVariable {
 public:
  RandomVariable() = default;

  RandomVariable(const FilteredSpace& space, Eigen::VectorXd values, int level)
      : values_(std::move(values)), level_(level) {
    space.check_level(level);
    if (values_.size() != space.n_atoms())
      throw InvalidInputError("random variable has " + std::to_string(values_.size()) +
                              " values, space has " + std::to_string(space.n_atoms()) + " atoms");
    if (!values_.allFinite()) throw InvalidInputError("random variable values must be finite");
    if (!is_measurable(space, level, 1e-12))
      throw InvalidInputError("values are not measurable at level " + std::to_string(level));
  }

  RandomVariable(const FilteredSpace& space, const std::vector<double>& values, int level)
      : RandomVariable(space, Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                                static_cast<Eigen::Index>(values.size())),
                       level) {}

  RandomVariable(const FilteredSpace& space, std::initializer_list<double> values, int level)
      : RandomVariable(space, std::vector<double>(values), level) {}

  /// Skips the measurability check; for values produced by block-wise assembly.
  static RandomVariable unchecked(Eigen::VectorXd values, int level) {
    RandomVariable x;
    x.values_ = std::move(values);
    x.level_ = level;
    return x;
  }

  const Eigen::VectorXd& values() const { return values_; }
  int level() const { return level_; }
  Eigen::Index size() const { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_[i]; }

  bool is_measurable(const FilteredSpace& space, int level, double tol = 1e-12) const {
    for (const auto& block : space.partition(level)) {
      const double v0 = values_[block.front()];
      for (int a : block)
        if (std::abs(values_[a] - v0) > tol * std::max(1.0, std::abs(v0))) return false;
    }
    return true;
  }

  /// Values on the cells of a local block (cells are measurable at this level).
  Eigen::VectorXd on_cells(const LocalBlock& block) const {
    Eigen::VectorXd out(block.size());
    for (std::size_t c = 0; c < block.cells.size(); ++c)
      out[static_cast<Eigen::Index>(c)] = values_[block.cells[c].atoms.front()];
    return out;
  }

  friend RandomVariable operator+(const RandomVariable& a, const RandomVariable& b) {
    return unchecked(a.values_ + b.values_, std::max(a.level_, b.level_));
  }
  friend RandomVariable operator-(const RandomVariable& a, const RandomVariable& b) {
    return unchecked(a.values_ - b.values_, std::max(a.level_, b.level_));
  }
  friend RandomVariable operator-(const RandomVariable& a) { return unchecked(-a.values_, a.level_); }
  friend RandomVariable operator*(double s, const RandomVariable& a) {
    return unchecked(s * a.values_, a.level_);
  }
  /// Atomwise product.
  friend RandomVariable operator*(const RandomVariable& a, const RandomVariable& b) {
    return unchecked(a.values_.cwiseProduct(b.values_), std::max(a.level_, b.level_));
  }

 private:
  Eigen::VectorXd values_;
  int level_ = 0;
};

inline RandomVariable constant(const FilteredSpace& space, double c, int level = 0) {
  space.check_level(level);
  return RandomVariable::unchecked(Eigen::VectorXd::Constant(space.n_atoms(), c), level);
}

/// Scatter one value per cell of each block back onto the finest atoms.
inline RandomVariable assemble(const FilteredSpace& space, const std::vector<LocalBlock>& blocks,
                               const std::vector<Eigen::VectorXd>& cell_values, int level) {
  Eigen::VectorXd v(space.n_atoms());
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (std::size_t c = 0; c < blocks[b].cells.size(); ++c)
      for (int a : blocks[b].cells[c].atoms) v[a] = cell_values[b][static_cast<Eigen::Index>(c)];
  return RandomVariable::unchecked(std::move(v), level);
}

/// Scatter one value per block of `level`.
inline RandomVariable assemble_blocks(const FilteredSpace& space, int level,
                                      const Eigen::VectorXd& per_block) {
  Eigen::VectorXd v(space.n_atoms());
  const auto& part = space.partition(level);
  for (std::size_t b = 0; b < part.size(); ++b)
    for (int a : part[b]) v[a] = per_block[static_cast<Eigen::Index>(b)];
  return RandomVariable::unchecked(std::move(v), level);
}

inline double expectation(const FilteredSpace& space, const RandomVariable& x) {
  double s = 0.0;
  for (int a = 0; a < space.n_atoms(); ++a) s += space.prob(a) * x[a];
  return s;
}

/// E[XY] under P.
inline double inner(const FilteredSpace& space, const RandomVariable& x, const RandomVariable& y) {
  double s = 0.0;
  for (int a = 0; a < space.n_atoms(); ++a) s += space.prob(a) * x[a] * y[a];
  return s;
}

/// E[X | F_level].
inline RandomVariable cond_expectation(const FilteredSpace& space, const RandomVariable& x,
                                       int level) {
  space.check_level(level);
  if (x.size() != space.n_atoms())
    throw InvalidInputError("random variable does not belong to this space");
  if (level > x.level())
    throw InvalidLevelError("conditioning level " + std::to_string(level) +
                            " is finer than the variable's level " + std::to_string(x.level()));
  if (level == x.level()) return x;
  Eigen::VectorXd out(space.n_atoms());
  for (const auto& block : space.partition(level)) {
    double num = 0.0, den = 0.0;
    for (int a : block) {
      num += space.prob(a) * x[a];
      den += space.prob(a);
    }
    for (int a : block) out[a] = num / den;
  }
  return RandomVariable::unchecked(std::move(out), level);
}

inline RandomVariable pointwise_max(std::span<const RandomVariable> xs) {
  if (xs.empty()) throw InvalidInputError("pointwise_max of an empty family");
  const int level = xs.front().level();
  Eigen::VectorXd out = xs.front().values();
  for (const auto& x : xs.subspan(1)) {
    if (x.level() != level) throw InvalidInputError("pointwise_max over mixed levels");
    if (x.size() != out.size()) throw InvalidInputError("pointwise_max over mixed sizes");
    out = out.cwiseMax(x.values());
  }
  return RandomVariable::unchecked(std::move(out), level);
}

inline RandomVariable pointwise_max(std::initializer_list<RandomVariable> xs) {
  return pointwise_max(std::span<const RandomVariable>(xs.begin(), xs.size()));
}

/// 1_block, measurable at `level`; the block must be a union of that level's blocks.
inline RandomVariable indicator(const FilteredSpace& space, std::span<const int> block, int level) {
  if (!space.is_union_of_blocks(level, block))
    throw InvalidInputError("indicator set is not measurable at level " + std::to_string(level));
  Eigen::VectorXd v = Eigen::VectorXd::Zero(space.n_atoms());
  for (int a : block) v[a] = 1.0;
  return RandomVariable::unchecked(std::move(v), level);
}

inline RandomVariable indicator(const FilteredSpace& space, std::initializer_list<int> block,
                                int level) {
  return indicator(space, std::span<const int>(block.begin(), block.size()), level);
}

/// L_p norm under P, with p taken from the space metadata.
inline double norm(const FilteredSpace& space, const RandomVariable& x) {
  const double p = space.exponent();
  if (std::isinf(p)) return x.values().cwiseAbs().maxCoeff();
  double s = 0.0;
  for (int a = 0; a < space.n_atoms(); ++a) s += space.prob(a) * std::pow(std::abs(x[a]), p);
  return std::pow(s, 1.0 / p);
}

}  // namespace sandwich

#endif  // SANDWICH_PROB_CORE_HPP
