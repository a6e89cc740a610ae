#include <gtest/gtest.h>

#include <random>

#include "sandwich/lp.hpp"
#include "sandwich/support.hpp"

using namespace sandwich;

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

// max c'x over {A x <= b} in two variables by enumerating pairwise vertex
// intersections; the feasible set is assumed bounded.
double brute_force_2d(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::Vector2d& c) {
  double best = -kInfinity;
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = i + 1; j < A.rows(); ++j) {
      Eigen::Matrix2d M;
      M << A.row(i), A.row(j);
      if (std::abs(M.determinant()) < 1e-12) continue;
      const Eigen::Vector2d x = M.partialPivLu().solve(Eigen::Vector2d(b[i], b[j]));
      if (((A * x - b).array() <= 1e-9).all()) best = std::max(best, c.dot(x));
    }
  return best;
}

}  // namespace

TEST(ExtendedReal, Arithmetic) {
  const ExtendedReal inf = ExtendedReal::infinity();
  EXPECT_TRUE((inf + 1.0).is_infinite());
  EXPECT_DOUBLE_EQ((ExtendedReal(2.0) - 0.5).value(), 1.5);
  EXPECT_THROW(ExtendedReal(1.0) - inf, SolverError);
  EXPECT_TRUE((0.0 * inf) == ExtendedReal(0.0));
  EXPECT_THROW(-1.0 * ExtendedReal(1.0), SolverError);
  EXPECT_TRUE(ExtendedReal(1e300) < inf);
  EXPECT_FALSE(inf < inf);
  EXPECT_TRUE(approx_equal(inf, inf, 0.0));
  EXPECT_FALSE(approx_equal(inf, 1.0, 1e300));
}

TEST(LinearProgram, TextbookMaximum) {
  LinearProgram lp(LinearProgram::Sense::maximize);
  const int x = lp.add_variable(0, kInfinity, 3), y = lp.add_variable(0, kInfinity, 2);
  lp.add_row({{x, 1}, {y, 1}}, RowType::le, 4);
  lp.add_row({{x, 1}, {y, 3}}, RowType::le, 6);
  lp.add_row({{x, 1}}, RowType::le, 3);
  const auto r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::optimal);
  EXPECT_NEAR(r.value, 11.0, 1e-12);
  EXPECT_NEAR(r.solution[x], 3.0, 1e-12);
  EXPECT_NEAR(r.solution[y], 1.0, 1e-12);
  EXPECT_NEAR(r.dual_value, 11.0, 1e-10);
}

TEST(LinearProgram, FreeBoundedAndEqualityRows) {
  LinearProgram lp;
  const int x = lp.add_free_variable(1.0);
  const int y = lp.add_variable(-2.0, 5.0, -1.0);
  lp.add_row({{x, 1}, {y, -1}}, RowType::ge, -3);
  lp.add_row({{x, 1}, {y, 1}}, RowType::eq, 1);
  // min x - y with x = 1 - y, x - y >= -3: y <= 2, objective 1 - 2y
  const auto r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::optimal);
  EXPECT_NEAR(r.value, -3.0, 1e-12);
  EXPECT_NEAR(r.solution[y], 2.0, 1e-12);
  EXPECT_NEAR(r.solution[x], -1.0, 1e-12);
  EXPECT_LT(lp.infeasibility(r.solution), 1e-12);
}

TEST(LinearProgram, InfeasibleCarriesFarkasCertificate) {
  LinearProgram lp;
  const int x = lp.add_variable(), y = lp.add_variable();
  lp.add_row({{x, 1}, {y, 1}}, RowType::ge, 3);
  lp.add_row({{x, 1}}, RowType::le, 1);
  lp.add_row({{y, 1}}, RowType::le, 1);
  const auto r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::infeasible);
  const StandardForm sf = to_standard_form(lp);
  ASSERT_EQ(r.farkas.size(), sf.A.rows());
  EXPECT_TRUE(((sf.A.transpose() * r.farkas).array() <= 1e-9).all());
  EXPECT_GT(sf.b.dot(r.farkas), 1e-9);
}

TEST(LinearProgram, UnboundedCarriesImprovingRay) {
  LinearProgram lp(LinearProgram::Sense::maximize);
  const int x = lp.add_variable(0, kInfinity, 1), y = lp.add_variable(0, kInfinity, 0);
  lp.add_row({{x, 1}, {y, -1}}, RowType::le, 1);
  const auto r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::unbounded);
  EXPECT_TRUE(std::isinf(r.value) && r.value > 0);
  const Eigen::VectorXd& d = r.ray;
  EXPECT_GT(d[x], 0.0);
  EXPECT_GE(d[y], -1e-12);
  EXPECT_LE(d[x] - d[y], 1e-12);
}

TEST(LinearProgram, BealeCyclingExampleTerminates) {
  // classic degenerate instance on which the largest-coefficient rule cycles
  LinearProgram lp;
  const int x4 = lp.add_variable(0, kInfinity, -0.75), x5 = lp.add_variable(0, kInfinity, 150),
            x6 = lp.add_variable(0, kInfinity, -0.02), x7 = lp.add_variable(0, kInfinity, 6);
  lp.add_row({{x4, 0.25}, {x5, -60}, {x6, -0.04}, {x7, 9}}, RowType::le, 0);
  lp.add_row({{x4, 0.5}, {x5, -90}, {x6, -0.02}, {x7, 3}}, RowType::le, 0);
  lp.add_row({{x6, 1}}, RowType::le, 1);
  const auto r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::optimal);
  EXPECT_NEAR(r.value, -0.05, 1e-12);
}

TEST(LinearProgram, RejectsMalformedRows) {
  LinearProgram lp;
  lp.add_variable();
  lp.add_row({{3, 1.0}}, RowType::le, 1);
  EXPECT_THROW(solve_lp(lp), Error);
}

// Property: random bounded 2-D LPs agree with vertex enumeration and satisfy
// strong duality.
TEST(LinearProgram, RandomTwoDimensionalAgainstVertexEnumeration) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int solved = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int m = 3 + static_cast<int>(rng() % 5);
    Eigen::MatrixXd A(m + 4, 2);
    Eigen::VectorXd b(m + 4);
    for (int i = 0; i < m; ++i) {
      A(i, 0) = u(rng);
      A(i, 1) = u(rng);
      b[i] = u(rng) + 0.3;
    }
    // keep the feasible set inside the box [-3, 3]^2
    A.bottomRows(4) << 1, 0, -1, 0, 0, 1, 0, -1;
    b.tail(4).setConstant(3.0);
    const Eigen::Vector2d c(u(rng), u(rng));

    LinearProgram lp(LinearProgram::Sense::maximize);
    lp.add_free_variable(c[0]);
    lp.add_free_variable(c[1]);
    for (int i = 0; i < m + 4; ++i) lp.add_row({{0, A(i, 0)}, {1, A(i, 1)}}, RowType::le, b[i]);
    const auto r = solve_lp(lp);
    const double oracle = brute_force_2d(A, b, c);
    if (std::isinf(oracle)) {
      EXPECT_EQ(r.status, LpStatus::infeasible);
      continue;
    }
    ASSERT_EQ(r.status, LpStatus::optimal);
    EXPECT_NEAR(r.value, oracle, 1e-9);
    EXPECT_NEAR(r.dual_value, r.value, 1e-8);
    EXPECT_LT(lp.infeasibility(r.solution), 1e-9);
    ++solved;
  }
  EXPECT_GT(solved, 100);
}

TEST(SupportFunction, HandComputed) {
  BoxBudget p{Eigen::Vector3d(0.25, 0.25, 0.5), Eigen::Vector3d(0.5, 0.5, 0.5), Eigen::Vector3d(2, 2, 2)};
  // mass 1, lower uses 0.5, remaining 0.5 goes to the largest weight (cell 1)
  const auto r = support_function(Eigen::Vector3d(0, 1, 0.5), p);
  EXPECT_NEAR(r.maximizer[1], 2.0, 1e-15);
  EXPECT_NEAR(r.maximizer[2], 0.5 + 0.125 / 0.5, 1e-15);
  EXPECT_NEAR(r.value, 0.25 * 2 + 0.5 * 0.75 * 0.5, 1e-15);
  BoxBudget empty{Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(1.2, 1.2), Eigen::Vector2d(1.5, 1.5)};
  EXPECT_THROW(support_function(Eigen::Vector2d(1, 0), empty), InfeasibleError);
}

TEST(SupportFunction, MatchesSimplexOnRandomPolytopes) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 6);
    BoxBudget p{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
      p.prob[i] = 0.1 + u(rng);
      p.lower[i] = u(rng);
      p.upper[i] = 1.0 + 2.0 * u(rng);
    }
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = 4.0 * u(rng) - 2.0;
    LinearProgram lp(LinearProgram::Sense::maximize);
    std::vector<Term> budget;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int v = lp.add_variable(p.lower[i], p.upper[i], p.prob[i] * w[i] / p.mass());
      budget.push_back({v, p.prob[i]});
    }
    lp.add_row(budget, RowType::eq, p.mass());
    const auto r = solve_lp(lp);
    ASSERT_EQ(r.status, LpStatus::optimal);
    const auto g = support_function(w, p);
    EXPECT_NEAR(g.value, r.value, 1e-10);
    EXPECT_NEAR(p.prob.dot(g.maximizer), p.mass(), 1e-12);
  }
}
