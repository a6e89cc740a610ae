#include <gtest/gtest.h>

#include <thread>

#include "common.hpp"
#include "oracles.hpp"

using namespace testing_support;

namespace {

BoundPair linear_bounds(const SpacePtr& s, int A, int B, double m0, double M0) {
  return BoundPair::linear(s, A, B, constant(*s, m0, B), constant(*s, M0, B));
}

PolyhedralOperator fix_a_operator() {
  auto s = fix_a();
  return PolyhedralOperator(Subspace::full(s, 1, 0),
                            {{rv(s, {1, 1}, 1), constant(*s, 0.0, 0)}, {rv(s, {1.5, 0.5}, 1), constant(*s, 0.25, 0)}});
}

// Expectation operator on span{1, (1,0,-1)} over three uniform atoms.
PolyhedralOperator fix_b_operator() {
  auto s = fix_b();
  const auto L = Subspace::span_closure(s, 1, 0, {rv(s, {1, 0, -1}, 1)});
  return PolyhedralOperator(L, {{constant(*s, 1.0, 1), constant(*s, 0.0, 0)}});
}

RandomVariable random_nonneg(const FilteredSpace& s, int level, std::mt19937_64& rng) {
  return random_rv(s, level, rng, 0.0, 2.0);
}

// One coarse block, L = span{1, g}: x̂(X) = min_b max_j (b E[f_j g] - c_j) + S(X - b g),
// with S the support function of the box-budget polytope.
struct OneBlock {
  SpacePtr space;
  RandomVariable g;
  PolyhedralOperator op;
  BoundPair bounds;

  double oracle(const RandomVariable& x) const {
    const Eigen::Map<const Eigen::VectorXd> p(space->probs().data(), space->n_atoms());
    const Eigen::VectorXd lo = bounds.lower_kernels()[0].values(), hi = bounds.upper_kernels()[0].values();
    auto h = [&](double beta) {
      double piece = -kInf;
      for (const auto& pc : op.pieces())
        piece = std::max(piece, beta * p.dot(pc.density.values().cwiseProduct(g.values())) - pc.penalty[0]);
      return piece + oracles::box_budget_support(p, lo, hi, x.values() - beta * g.values());
    };
    return oracles::minimize_convex_1d(h, -1e3, 1e3);
  }
};

OneBlock random_one_block(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto s = random_space(rng, 1, 4);
  while (s->n_atoms() < 2) s = random_space(rng, 1, 4);
  const auto g = random_rv(*s, 1, rng);
  const auto L = Subspace::span_closure(s, 1, 0, {g});
  auto op = random_operator(L, 1 + static_cast<int>(rng() % 3), rng);
  auto bp = containing_bounds(op, 0.3 + 0.6 * u(rng), 1.1 + u(rng));
  return {s, g, std::move(op), std::move(bp)};
}

struct Instance {
  PolyhedralOperator op;
  BoundPair bounds;
};

// Random operator on a two-level space with random linear bounds containing it.
Instance random_instance(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto s = random_space(rng, 2 + static_cast<int>(rng() % 2), 3);
  std::vector<RandomVariable> gens;
  for (int k = 0, n = static_cast<int>(rng() % 3); k < n; ++k) gens.push_back(random_rv(*s, 2, rng));
  const auto L = Subspace::span_closure(s, 2, 1, gens);
  auto op = random_operator(L, 1 + static_cast<int>(rng() % 3), rng);
  auto bp = containing_bounds(op, 0.3 + 0.6 * u(rng), 1.1 + u(rng));
  return {std::move(op), std::move(bp)};
}

}  // namespace

TEST(Conjugate, TwoPieceOperator) {
  const auto op = fix_a_operator();
  auto s = op.domain().space_ptr();
  EXPECT_NEAR(conjugate(op, rv(s, {1.5, 0.5}, 1)).blocks[0].value(), 0.25, 1e-12);
  EXPECT_NEAR(conjugate(op, rv(s, {1, 1}, 1)).blocks[0].value(), 0.0, 1e-12);
  // the only mixture giving (1.25, 0.75) is half and half
  EXPECT_NEAR(conjugate(op, rv(s, {1.25, 0.75}, 1)).blocks[0].value(), 0.125, 1e-12);
  EXPECT_TRUE(conjugate(op, rv(s, {1.6, 0.4}, 1)).blocks[0].is_infinite());
  EXPECT_THROW(conjugate(op, rv(s, {1.2, 1.2}, 1)), InvalidInputError);
  EXPECT_THROW(conjugate(op, rv(s, {2.5, -0.5}, 1)), InvalidInputError);
}

TEST(Conjugate, RestrictedDomainOnlySeesPricesOnL) {
  const auto op = fix_b_operator();
  auto s = op.domain().space_ptr();
  EXPECT_NEAR(conjugate(op, rv(s, {1.25, 0.5, 1.25}, 1)).blocks[0].value(), 0.0, 1e-12);
  EXPECT_TRUE(conjugate(op, rv(s, {1.5, 0.5, 1.0}, 1)).blocks[0].is_infinite());
}

TEST(DensitySet, ThrowsNamingTheEmptyBlock) {
  auto s = fix_c();
  try {
    density_set(linear_bounds(s, 1, 2, 1.2, 1.5));
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_NE(std::string(e.what()).find("block 0"), std::string::npos);
  }
}

TEST(MaximalExtension, ThreeAtomValueAndAttainment) {
  const auto op = fix_b_operator();
  auto s = op.domain().space_ptr();
  const auto ext = maximal_extension(op, linear_bounds(s, 0, 1, 0.5, 2.0));
  const auto ind_a = rv(s, {1, 0, 0}, 1);
  EXPECT_NEAR(ext.evaluate(ind_a)[0], 1.25 / 3, 1e-9);
  const auto at = ext.attain(ind_a);
  EXPECT_NEAR(at.density[0], 1.25, 1e-9);
  EXPECT_NEAR(at.density[1], 0.5, 1e-9);
  EXPECT_NEAR(at.density[2], 1.25, 1e-9);
  EXPECT_NEAR(at.penalty.blocks[0].value(), 0.0, 1e-9);
  EXPECT_NEAR(at.value[0], 1.25 / 3, 1e-9);
  EXPECT_TRUE(at.strictly_positive);
  // the same number from the one-dimensional oracle
  const OneBlock ob{s, rv(s, {1, 0, -1}, 1), op, linear_bounds(s, 0, 1, 0.5, 2.0)};
  EXPECT_NEAR(ob.oracle(ind_a), 1.25 / 3, 1e-9);
}

TEST(MaximalExtension, RejectsViolatedPreconditions) {
  const auto op = fix_a_operator();
  auto s = op.domain().space_ptr();
  EXPECT_THROW(maximal_extension(op, linear_bounds(s, 0, 1, 1.0, 1.0)), PreconditionError);
  EXPECT_THROW(maximal_extension(op, linear_bounds(s, 0, 1, 1.2, 1.5)), InfeasibleError);
  auto c = fix_c();
  const PolyhedralOperator other(Subspace::full(c, 2, 1), {{constant(*c, 1.0, 2), constant(*c, 0.0, 1)}});
  EXPECT_THROW(maximal_extension(other, linear_bounds(c, 0, 2, 0.5, 2.0)), InvalidLevelError);
}

// Property: agreement with the brute-force one-dimensional dual on random
// single-block instances.
TEST(MaximalExtension, MatchesBruteForceDual) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 15; ++trial) {
    const auto ob = random_one_block(rng);
    const auto ext = maximal_extension(ob.op, ob.bounds);
    for (int k = 0; k < 5; ++k) {
      const auto x = random_rv(*ob.space, 1, rng);
      EXPECT_NEAR(ext.evaluate(x)[0], ob.oracle(x), 1e-7) << "trial " << trial;
    }
  }
}

// Property: x̂ extends x, keeps the axioms, sits inside the bounds, and
// dominates every affine minorant built from a polytope vertex.
TEST(MaximalExtension, RandomInstanceProperties) {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 15; ++trial) {
    const auto inst = random_instance(rng);
    const auto ext = maximal_extension(inst.op, inst.bounds);
    const auto& s = inst.op.space();
    for (int k = 0; k < 10; ++k) {
      const auto y = random_in(inst.op.domain(), rng);
      EXPECT_LT(max_abs(ext.evaluate(y), inst.op.evaluate(y)), 1e-9);

      const auto X = random_rv(s, 2, rng), Y = random_rv(s, 2, rng);
      const auto Z = random_rv(s, 1, rng);
      const auto xX = ext.evaluate(X), xY = ext.evaluate(Y);
      EXPECT_TRUE(((ext.evaluate(X + random_nonneg(s, 2, rng)).values() - xX.values()).array() >= -1e-9).all());
      EXPECT_LT(max_abs(ext.evaluate(X + Z), xX + Z), 1e-9);
      EXPECT_LT(max_abs(ext.evaluate(Z), Z), 1e-9);
      const double lam = u(rng);
      EXPECT_TRUE(((ext.evaluate(lam * X + (1 - lam) * Y).values() - (lam * xX + (1 - lam) * xY).values()).array() <=
                   1e-9)
                      .all());
      for (const auto& block : s.partition(1)) {
        const auto ind = indicator(s, block, 1);
        const auto rest = constant(s, 1.0, 1) - ind;
        EXPECT_LT(max_abs(ext.evaluate(ind * X + rest * Y), ind * xX + rest * xY), 1e-9);
      }
    }
    EXPECT_TRUE(check_extension_bounds(ext, rng, 200).passed());

    // maximality over the vertices of every block polytope
    for (std::size_t b = 0; b < inst.op.blocks().size(); ++b) {
      const auto& block = inst.op.blocks()[b];
      const auto& bd = inst.bounds.block_data(b);
      const auto verts = oracles::box_budget_vertices(block.weights, bd.lower.col(0), bd.upper.col(0));
      for (const auto& f : verts) {
        const ExtendedReal c = conjugate_block(inst.op, b, f);
        if (c.is_infinite()) continue;
        for (int k = 0; k < 5; ++k) {
          const auto X = random_rv(s, 2, rng);
          const Eigen::VectorXd xc = X.on_cells(block);
          EXPECT_LE(f.dot(block.weights.cwiseProduct(xc)) - c.value(), ext.evaluate_block(b, xc) + 1e-8);
        }
      }
    }
  }
}

// Property: on the finite-penalty set the conjugate of x over L equals the
// conjugate of x̂ over the whole space.
TEST(MaximalExtension, MinimalPenaltyIdentity) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 15; ++trial) {
    const auto inst = random_instance(rng);
    const auto ext = maximal_extension(inst.op, inst.bounds);
    for (int k = 0; k < 5; ++k) {
      const auto f1 = ext.sample_density(rng), f2 = ext.sample_density(rng);
      const double lam = u(rng);
      for (const auto& f : {f1, f2, lam * f1 + (1 - lam) * f2}) {
        const auto a = conjugate(inst.op, f), b = ext.full_space_conjugate(f);
        ASSERT_TRUE(a.finite());
        for (std::size_t i = 0; i < a.blocks.size(); ++i) EXPECT_TRUE(approx_equal(a.blocks[i], b.blocks[i], 1e-6));
      }
    }
  }
}

TEST(Attain, ReproducesTheValueWithPositiveDensity) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 15; ++trial) {
    const auto inst = random_instance(rng);
    const auto ext = maximal_extension(inst.op, inst.bounds);
    const auto& s = inst.op.space();
    for (int k = 0; k < 5; ++k) {
      const auto x = random_rv(s, 2, rng);
      const auto at = ext.attain(x);
      EXPECT_LT(max_abs(at.value, ext.evaluate(x)), 1e-7);
      EXPECT_TRUE(at.positivity_guaranteed);
      EXPECT_TRUE(at.strictly_positive);
      const auto lhs = cond_expectation(s, at.density * x, 1) - at.penalty.to_random_variable(s);
      EXPECT_LT(max_abs(lhs, at.value), 1e-9);
      for (std::size_t b = 0; b < ext.blocks().size(); ++b)
        EXPECT_TRUE(ext.polytope().polytopes[b].contains(at.density.on_cells(ext.blocks()[b]), 1e-9));
    }
  }
}

TEST(Attain, DegenerateMinorantMayGiveZeros) {
  auto s = fix_a();
  // constants only: x̂ is the support function of the box, maximized at (2, 0)
  const PolyhedralOperator op(Subspace::span_closure(s, 1, 0, {}), {{rv(s, {1, 1}, 1), constant(*s, 0.0, 0)}});
  const auto ext = maximal_extension(op, BoundPair::linear(s, 0, 1, rv(s, {0, 0}, 1), rv(s, {2, 2}, 1)));
  EXPECT_FALSE(ext.nondegenerate());
  const auto at = ext.attain(rv(s, {1, 0}, 1));
  EXPECT_FALSE(at.positivity_guaranteed);
  // centering may trade up to 1e-10 of value for interior slack
  EXPECT_NEAR(at.value[0], 1.0, 1e-9);
  EXPECT_NEAR(at.density[0], 2.0, 1e-9);
  EXPECT_NEAR(at.density[1], 0.0, 1e-9);
}

TEST(Attain, CachesAttainedDensities) {
  const auto op = fix_b_operator();
  auto s = op.domain().space_ptr();
  const auto ext = maximal_extension(op, linear_bounds(s, 0, 1, 0.5, 2.0));
  const auto x = rv(s, {1, 0, 0}, 1);
  EXPECT_FALSE(ext.cached_attainment(x));
  const auto at = ext.attain(x);
  const auto hit = ext.cached_attainment(x);
  ASSERT_TRUE(hit);
  EXPECT_TRUE(hit->values() == at.density.values());
  EXPECT_FALSE(ext.cached_attainment(rv(s, {0, 1, 0}, 1)));
}

TEST(MaximalExtension, ConcurrentCallsAgreeWithSequential) {
  std::mt19937_64 rng(47);
  const auto inst = random_instance(rng);
  const auto ext = maximal_extension(inst.op, inst.bounds);
  std::vector<RandomVariable> xs;
  for (int k = 0; k < 32; ++k) xs.push_back(random_rv(inst.op.space(), 2, rng));
  std::vector<RandomVariable> expect;
  for (const auto& x : xs) expect.push_back(ext.attain(x).value);
  std::vector<std::vector<RandomVariable>> got(4);
  std::vector<std::thread> pool;
  for (int t = 0; t < 4; ++t)
    pool.emplace_back([&, t] {
      for (const auto& x : xs) got[static_cast<std::size_t>(t)].push_back(ext.attain(x).value);
    });
  for (auto& th : pool) th.join();
  for (const auto& g : got)
    for (std::size_t k = 0; k < xs.size(); ++k) EXPECT_TRUE(g[k].values() == expect[k].values());
}

TEST(MaximalExtension, GreedyPathMatchesEpigraphProgram) {
  auto s = fix_c();
  std::mt19937_64 rng(53);
  const auto L = Subspace::span_closure(s, 2, 1, {});
  const PolyhedralOperator op(L, {{constant(*s, 1.0, 2), constant(*s, 0.0, 1)}});
  const auto ext = maximal_extension(op, BoundPair::linear(s, 1, 2, rv(s, {0.5, 0.2, 0.8, 0.3}, 2),
                                                           rv(s, {1.5, 1.9, 1.1, 1.6}, 2)));
  for (int k = 0; k < 20; ++k) {
    const auto x = random_rv(*s, 2, rng);
    for (std::size_t b = 0; b < 2; ++b) {
      const Eigen::VectorXd xc = x.on_cells(ext.blocks()[b]);
      LinearProgram lp;
      std::vector<LinExpr> cells;
      for (Eigen::Index i = 0; i < xc.size(); ++i) cells.emplace_back(xc[i]);
      lp.add_objective(ext.epigraph(lp, b, cells));
      const auto r = solve_lp(lp);
      ASSERT_EQ(r.status, LpStatus::optimal);
      EXPECT_NEAR(ext.evaluate_block(b, xc), r.value, 1e-10);
    }
  }
}

TEST(MaximalExtension, PolyhedralBoundsStayInsideTheChain) {
  auto s = fix_a();
  const auto op = fix_a_operator();
  const auto bp = BoundPair::polyhedral(s, 0, 1, {rv(s, {0.5, 1.5}, 1), rv(s, {1.5, 0.5}, 1)},
                                        {rv(s, {2, 0}, 1), rv(s, {0, 2}, 1)});
  const auto ext = maximal_extension(op, bp);
  std::mt19937_64 rng(59);
  EXPECT_TRUE(check_extension_bounds(ext, rng, 500).passed());
  for (int k = 0; k < 50; ++k) {
    const auto x = random_rv(*s, 1, rng);
    EXPECT_NEAR(ext.evaluate(x)[0], op.evaluate(x)[0], 1e-9);  // L is full
  }
}

TEST(VerifyRepresentation, PassesOnValidOperators) {
  std::mt19937_64 rng(61);
  EXPECT_TRUE(verify_representation(fix_a_operator(), rng).passed());
  EXPECT_TRUE(verify_representation(fix_b_operator(), rng).passed());
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = random_instance(rng);
    const auto r = verify_representation(inst.op, rng);
    EXPECT_TRUE(r.passed()) << r.find("dual representation")->detail;
  }
}
