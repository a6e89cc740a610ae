#ifndef SANDWICH_TESTS_COMMON_HPP
#define SANDWICH_TESTS_COMMON_HPP

#include <random>
#include <vector>

#include "sandwich/sandwich.hpp"

namespace testing_support {

using namespace sandwich;

// Two atoms, uniform, trivial coarse level.
inline SpacePtr fix_a() { return make_space({0.5, 0.5}, {{{0, 1}}, {{0}, {1}}}, {0, 1}); }

// Three atoms, uniform, trivial coarse level.
inline SpacePtr fix_b() {
  return make_space({1.0 / 3, 1.0 / 3, 1.0 / 3}, {{{0, 1, 2}}, {{0}, {1}, {2}}}, {0, 1});
}

// Four atoms, uniform, two-period binomial tree.
inline SpacePtr fix_c() {
  return make_space({0.25, 0.25, 0.25, 0.25}, {{{0, 1, 2, 3}}, {{0, 1}, {2, 3}}, {{0}, {1}, {2}, {3}}},
                    {0, 1, 2});
}

inline RandomVariable rv(const SpacePtr& s, std::vector<double> v, int level) {
  return RandomVariable(*s, v, level);
}

inline RandomVariable random_rv(const FilteredSpace& space, int level, std::mt19937_64& rng,
                                double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(space.n_atoms());
  for (const auto& block : space.partition(level)) {
    const double x = u(rng);
    for (int a : block) v[a] = x;
  }
  return RandomVariable::unchecked(v, level);
}

/// Random element of L.
inline RandomVariable random_in(const Subspace& L, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(L.space().n_atoms());
  for (const auto& b : L.basis()) v += n(rng) * b.values();
  return RandomVariable::unchecked(v, L.level_B());
}

/// Random space with a coarse level of `blocks` blocks, each split in 1..max_cells atoms.
inline SpacePtr random_space(std::mt19937_64& rng, int blocks, int max_cells) {
  std::uniform_int_distribution<int> cells(1, max_cells);
  std::uniform_real_distribution<double> w(0.2, 1.0);
  std::vector<double> probs;
  Partition coarse, fine;
  int next = 0;
  for (int b = 0; b < blocks; ++b) {
    std::vector<int> block;
    const int k = cells(rng);
    for (int c = 0; c < k; ++c) {
      block.push_back(next);
      fine.push_back({next});
      probs.push_back(w(rng));
      ++next;
    }
    coarse.push_back(block);
  }
  double total = 0;
  for (double p : probs) total += p;
  for (double& p : probs) p /= total;
  std::vector<Partition> levels;
  std::vector<int> all(static_cast<std::size_t>(next));
  for (int i = 0; i < next; ++i) all[static_cast<std::size_t>(i)] = i;
  if (blocks > 1) {
    levels = {{all}, coarse, fine};
    return make_space(probs, levels, {0, 1, 2});
  }
  levels = {{all}, fine};
  return make_space(probs, levels, {0, 1});
}

/// Positive density on each block of (level_A, level_B) with conditional mean 1.
inline RandomVariable random_density(const FilteredSpace& space, int level_A, int level_B,
                                     std::mt19937_64& rng, double lo = 0.2, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Eigen::VectorXd> cells;
  const auto blocks = space.layout(level_A, level_B);
  for (const auto& block : blocks) {
    Eigen::VectorXd f(block.size());
    for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = u(rng);
    cells.push_back(f / f.dot(block.weights));
  }
  return assemble(space, blocks, cells, level_B);
}

/// Valid polyhedral operator: positive normalized densities, min penalty 0 per block.
inline PolyhedralOperator random_operator(const Subspace& L, int pieces, std::mt19937_64& rng) {
  const auto& space = L.space();
  std::uniform_real_distribution<double> pen(0.0, 0.5);
  std::vector<Piece> ps;
  for (int j = 0; j < pieces; ++j) {
    Eigen::VectorXd v(space.n_atoms());
    for (const auto& block : space.partition(L.level_A())) {
      const double x = j == 0 ? 0.0 : pen(rng);
      for (int a : block) v[a] = x;
    }
    ps.push_back({random_density(space, L.level_A(), L.level_B(), rng),
                  RandomVariable::unchecked(v, L.level_A())});
  }
  return PolyhedralOperator(L, ps);
}

/// Linear bounds containing every piece density, so the sandwich holds.
inline BoundPair containing_bounds(const PolyhedralOperator& op, double shrink = 0.5, double grow = 1.5) {
  Eigen::VectorXd lo = op.pieces()[0].density.values(), hi = lo;
  for (const auto& p : op.pieces()) {
    lo = lo.cwiseMin(p.density.values());
    hi = hi.cwiseMax(p.density.values());
  }
  return BoundPair::linear(op.domain().space_ptr(), op.level_A(), op.level_B(),
                           RandomVariable::unchecked(shrink * lo, op.level_B()),
                           RandomVariable::unchecked(grow * hi, op.level_B()));
}

inline double max_abs(const RandomVariable& a, const RandomVariable& b) {
  return (a.values() - b.values()).cwiseAbs().maxCoeff();
}

}  // namespace testing_support

#endif
