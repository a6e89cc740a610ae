#ifndef SANDWICH_SUPPORT_HPP
#define SANDWICH_SUPPORT_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <vector>

#include "sandwich/error.hpp"

namespace sandwich {

/// The polytope {lower <= f <= upper, sum(prob * f) = sum(prob)} on one block.
struct BoxBudget {
  Eigen::VectorXd prob;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  double mass() const { return prob.sum(); }
  bool nonempty(double tol = 1e-12) const {
    const double m = mass();
    return prob.dot(lower) <= m + tol * m && prob.dot(upper) >= m - tol * m &&
           (lower.array() <= upper.array() + tol).all();
  }
};

struct SupportResult {
  double value = 0.0;
  Eigen::VectorXd maximizer;
};

/// max E[f W | block] over the box-budget polytope, by the fractional knapsack
/// greedy: fill the largest W first, ties by lower index.
inline SupportResult support_function(const Eigen::VectorXd& w, const BoxBudget& poly) {
  const Eigen::Index n = w.size();
  if (poly.prob.size() != n || poly.lower.size() != n || poly.upper.size() != n)
    throw InvalidInputError("support_function: size mismatch");
  if (!poly.nonempty()) throw InfeasibleError("support_function: empty box-budget polytope");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return w[a] > w[b]; });

  SupportResult r;
  r.maximizer = poly.lower;
  double remaining = poly.mass() - poly.prob.dot(poly.lower);
  for (Eigen::Index i : order) {
    if (remaining <= 0.0) break;
    const double room = poly.prob[i] * (poly.upper[i] - poly.lower[i]);
    const double take = std::min(room, remaining);
    r.maximizer[i] += take / poly.prob[i];
    remaining -= take;
  }
  r.value = poly.prob.cwiseProduct(r.maximizer).dot(w) / poly.mass();
  return r;
}

}  // namespace sandwich

#endif  // SANDWICH_SUPPORT_HPP
