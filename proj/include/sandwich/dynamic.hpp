#ifndef SANDWICH_DYNAMIC_HPP
#define SANDWICH_DYNAMIC_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include "sandwich/extension.hpp"
#include "sandwich/operators.hpp"

namespace sandwich {

/// Operators x_{s,t} on a time grid of level indices. One-step operators (for
/// adjacent grid points) are required; operators for longer pairs are optional.
struct OperatorSystem {
  SpacePtr space;
  std::vector<int> grid;
  std::map<PairKey, PolyhedralOperator> operators;
  BoundFamily bounds;

  bool has_operator(int s, int t) const { return operators.count({s, t}) > 0; }
  const PolyhedralOperator& op(int s, int t) const {
    auto it = operators.find({s, t});
    if (it == operators.end())
      throw InvalidInputError("no operator for pair (" + std::to_string(s) + ", " + std::to_string(t) + ")");
    return it->second;
  }
  /// Position of a level on the grid; throws if it is not a grid point.
  std::size_t position(int level) const {
    auto it = std::find(grid.begin(), grid.end(), level);
    if (it == grid.end()) throw InvalidInputError("level " + std::to_string(level) + " is not on the grid");
    return static_cast<std::size_t>(it - grid.begin());
  }
};

/// Structural checks shared by every entry point: grid shape, one-step
/// operators, bounds for every pair, matching levels.
inline void check_structure(const OperatorSystem& sys) {
  if (!sys.space) throw InvalidInputError("system has no space");
  const auto& g = sys.grid;
  if (g.size() < 2) throw InvalidInputError("grid needs at least two points");
  for (std::size_t i = 0; i < g.size(); ++i) {
    sys.space->check_level(g[i]);
    if (i > 0 && g[i] <= g[i - 1]) throw InvalidInputError("grid must be strictly increasing");
  }
  if (sys.bounds.grid != g) throw InvalidInputError("bounds family grid differs from the system grid");
  for (std::size_t i = 0; i + 1 < g.size(); ++i) sys.op(g[i], g[i + 1]);
  for (const auto& [key, op] : sys.operators) {
    if (op.level_A() != key.first || op.level_B() != key.second)
      throw InvalidInputError("operator stored under (" + std::to_string(key.first) + ", " +
                              std::to_string(key.second) + ") acts between other levels");
    sys.position(key.first);
    sys.position(key.second);
  }
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = i + 1; j < g.size(); ++j) sys.bounds.at(g[i], g[j]);
}

/// x_{s,t} o x_{t,u} as a polyhedral operator on the domain of x_{t,u}. Each
/// composed piece pairs an outer piece i with a choice of inner piece per
/// level-t block: density h_i g_sigma, penalty E[h_i c_sigma | s] + d_i.
inline PolyhedralOperator compose(const PolyhedralOperator& outer, const PolyhedralOperator& inner,
                                  std::size_t max_pieces = 4096) {
  if (outer.level_B() != inner.level_A()) throw InvalidLevelError("compose: levels do not chain");
  if (!outer.domain().is_full())
    throw PreconditionError("compose: the outer operator must be defined on all of its level");
  const auto& space = outer.space();
  const int t = inner.level_A();
  const std::size_t nb = space.n_blocks(t);
  const std::size_t k_in = inner.pieces().size();
  double count = static_cast<double>(outer.pieces().size());
  for (std::size_t b = 0; b < nb; ++b) count *= static_cast<double>(k_in);
  if (count > static_cast<double>(max_pieces))
    throw InvalidInputError("compose: too many composed pieces (" + std::to_string(count) + ")");

  std::vector<Piece> pieces;
  std::vector<std::size_t> sigma(nb, 0);
  for (;;) {
    Eigen::VectorXd g(space.n_atoms()), c(space.n_atoms());
    for (int a = 0; a < space.n_atoms(); ++a) {
      const auto& p = inner.pieces()[sigma[static_cast<std::size_t>(space.block_of(t, a))]];
      g[a] = p.density[a];
      c[a] = p.penalty[a];
    }
    const RandomVariable cs = RandomVariable::unchecked(c, t);
    for (const auto& h : outer.pieces()) {
      const RandomVariable pen = cond_expectation(space, h.density * cs, outer.level_A()) + h.penalty;
      pieces.push_back({RandomVariable::unchecked(h.density.values().cwiseProduct(g), inner.level_B()),
                        RandomVariable::unchecked(pen.values(), outer.level_A())});
    }
    std::size_t pos = 0;
    while (pos < nb && ++sigma[pos] == k_in) sigma[pos++] = 0;
    if (pos == nb) break;
  }
  const Subspace L = Subspace::span_closure(inner.domain().space_ptr(), inner.level_B(), outer.level_A(),
                                            inner.domain().basis());
  return PolyhedralOperator(L, std::move(pieces));
}

namespace detail {

inline std::vector<RandomVariable> consistency_probes(const Subspace& L, std::mt19937_64& rng, int extra) {
  std::vector<RandomVariable> probes = L.basis();
  std::normal_distribution<double> n;
  for (int k = 0; k < extra; ++k) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(L.space().n_atoms());
    for (const auto& b : L.basis()) v += n(rng) * b.values();
    probes.push_back(RandomVariable::unchecked(v, L.level_B()));
  }
  return probes;
}

}  // namespace detail

/// Operator axioms per pair, sandwich per pair, mM1 for the bounds, nesting
/// of domains, and time-consistency of declared long operators.
inline ValidationReport validate_system(const OperatorSystem& sys, std::mt19937_64& rng, double tol = kTol) {
  check_structure(sys);
  ValidationReport r;
  const auto& g = sys.grid;
  auto tag = [](int s, int t) { return "x(" + std::to_string(s) + "," + std::to_string(t) + ") "; };

  for (const auto& [key, op] : sys.operators) {
    r.append(validate_operator(op, tol), tag(key.first, key.second));
    const SandwichResult sw = check_sandwich(op, sys.bounds.at(key.first, key.second), tol);
    std::string detail = sw.via_fast_path ? "pieces inside the bound set" : "";
    if (sw.witness) {
      std::ostringstream d;
      d << "violated on block " << sw.witness->block << " by piece " << sw.witness->piece;
      detail = d.str();
    }
    r.add(tag(key.first, key.second) + "sandwich", sw.holds, detail);
  }
  r.append(check_mM1(sys.bounds, rng, tol), "bounds ");

  {
    const Subspace& LT = sys.op(g[g.size() - 2], g.back()).domain();
    bool ok = true;
    std::ostringstream why;
    for (const auto& [key, op] : sys.operators)
      for (const auto& x : op.domain().basis())
        if (x.level() <= LT.level_B() && !LT.contains(x, tol)) {
          ok = false;
          why << "domain of " << tag(key.first, key.second) << "not inside the terminal domain; ";
          break;
        }
    r.add("domains nested", ok, why.str());
  }

  // x_{s,u} = x_{s,t} o x_{t,u} wherever all three are declared and composable.
  bool consistent = true;
  std::size_t tested = 0;
  std::ostringstream why;
  for (const auto& [key, long_op] : sys.operators) {
    const auto [s, u] = key;
    for (int t : g) {
      if (t <= s || t >= u || !sys.has_operator(s, t) || !sys.has_operator(t, u)) continue;
      const auto& first = sys.op(s, t);
      const auto& second = sys.op(t, u);
      for (const auto& x : detail::consistency_probes(long_op.domain(), rng, 3)) {
        if (!second.domain().contains(x, tol)) continue;
        const RandomVariable mid = second.evaluate(x);
        if (!first.domain().contains(mid, tol)) continue;
        ++tested;
        const double gap = (long_op.evaluate(x).values() - first.evaluate(mid).values()).cwiseAbs().maxCoeff();
        if (gap > tol) {
          consistent = false;
          why << "(" << s << "," << t << "," << u << ") X = [";
          for (Eigen::Index a = 0; a < x.size(); ++a) why << (a ? ", " : "") << x[a];
          why << "] gap " << gap << "; ";
          break;
        }
      }
    }
  }
  r.add("time-consistency", consistent,
        consistent ? std::to_string(tested) + " compositions tested" : why.str(), true);

  // x_{s,t} is the restriction of x_{s,T} to L_t.
  bool restricted = true;
  std::ostringstream why_r;
  const int T = g.back();
  for (const auto& [key, op] : sys.operators) {
    if (key.second == T || !sys.has_operator(key.first, T)) continue;
    const auto& full = sys.op(key.first, T);
    for (const auto& x : op.domain().basis()) {
      if (!full.domain().contains(x, tol)) continue;
      const double gap = (op.evaluate(x).values() - full.evaluate(x).values()).cwiseAbs().maxCoeff();
      if (gap > tol) {
        restricted = false;
        why_r << tag(key.first, key.second) << "differs from " << tag(key.first, T) << "by " << gap << "; ";
        break;
      }
    }
  }
  r.add("restriction of terminal operators", restricted, why_r.str());
  return r;
}

/// Per-step densities g_{i+1}, ..., g_j of a product density f = prod g.
struct ProductDensity {
  int from = 0;
  int to = 0;
  std::vector<RandomVariable> steps;

  RandomVariable product() const {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(steps.front().size());
    for (const auto& g : steps) v = v.cwiseProduct(g.values());
    return RandomVariable::unchecked(v, to);
  }
  std::vector<double> key() const {
    std::vector<double> k;
    for (const auto& g : steps) k.insert(k.end(), g.values().data(), g.values().data() + g.values().size());
    return k;
  }
};

struct PriceResult {
  RandomVariable value;    // x̂_{s,t}(X) at level s
  ProductDensity density;  // attaining product density
  PenaltyValue penalty;    // cocycle penalty of the density
};

/// Time-consistent extension: maximal one-step extensions composed backward.
class ExtendedSystem {
 public:
  ExtendedSystem(SpacePtr space, std::vector<int> grid, std::map<PairKey, ExtendedOperator> steps)
      : space_(std::move(space)), grid_(std::move(grid)), steps_(std::move(steps)),
        ledger_(std::make_shared<Ledger>()) {}

  const FilteredSpace& space() const { return *space_; }
  const SpacePtr& space_ptr() const { return space_; }
  const std::vector<int>& grid() const { return grid_; }
  const ExtendedOperator& step(int s) const {
    const std::size_t i = position(s);
    if (i + 1 >= grid_.size()) throw InvalidInputError("no step after the last grid point");
    return steps_.at({grid_[i], grid_[i + 1]});
  }
  std::size_t position(int level) const {
    auto it = std::find(grid_.begin(), grid_.end(), level);
    if (it == grid_.end()) throw InvalidInputError("level " + std::to_string(level) + " is not on the grid");
    return static_cast<std::size_t>(it - grid_.begin());
  }
  void check_pair(int s, int t) const {
    if (position(s) >= position(t)) throw InvalidInputError("pair must satisfy s < t on the grid");
  }

  /// x̂_{s,t}(X) by backward recursion through the one-step extensions.
  RandomVariable evaluate(int s, int t, const RandomVariable& x) const {
    check_pair(s, t);
    if (!x.is_measurable(*space_, t, 1e-12))
      throw InvalidLevelError("payoff is not measurable at level " + std::to_string(t));
    RandomVariable v = RandomVariable::unchecked(x.values(), t);
    for (std::size_t i = position(t); i > position(s); --i) v = steps_.at({grid_[i - 1], grid_[i]}).evaluate(v);
    return v;
  }

  /// Cocycle penalty sum_l E[(prod_{m<=l} g_m) alpha_l(g_{l+1}) | s] of a
  /// product density, with alpha_l the minimal one-step penalty.
  PenaltyValue cocycle_penalty(const ProductDensity& q) const {
    check_pair(q.from, q.to);
    const std::size_t i0 = position(q.from), j0 = position(q.to);
    if (q.steps.size() != j0 - i0) throw InvalidInputError("product density has the wrong number of steps");
    const int n = space_->n_atoms();
    std::vector<ExtendedReal> total(static_cast<std::size_t>(n), ExtendedReal(0.0));
    Eigen::VectorXd weight = Eigen::VectorXd::Ones(n);
    for (std::size_t l = i0; l < j0; ++l) {
      const auto& step = steps_.at({grid_[l], grid_[l + 1]});
      const PenaltyValue a = conjugate(step.base(), q.steps[l - i0]);
      for (int w = 0; w < n; ++w) {
        const ExtendedReal al = a.blocks[static_cast<std::size_t>(space_->block_of(grid_[l], w))];
        total[static_cast<std::size_t>(w)] = total[static_cast<std::size_t>(w)] + weight[w] * al;
      }
      weight = weight.cwiseProduct(q.steps[l - i0].values());
    }
    return condition(total, q.from);
  }

  /// Minimal penalty of the composed x̂_{s,t} at a density f (level t):
  /// sup_X E[fX|s] - x̂_{s,t}(X), one LP per level-s block chaining the
  /// one-step epigraphs.
  PenaltyValue minimal_penalty(int s, int t, const RandomVariable& f) const {
    check_pair(s, t);
    const std::size_t i0 = position(s), j0 = position(t);
    PenaltyValue out;
    out.level = s;
    for (const auto& top : space_->partition(s)) {
      const double pa = space_->mass(top);
      LinearProgram lp(LinearProgram::Sense::maximize);
      std::map<int, LinExpr> below;  // block index at the current level -> expression
      for (const auto& blk : space_->partition(t)) {
        if (space_->block_of(s, blk.front()) != space_->block_of(s, top.front())) continue;
        const double coef = space_->mass(blk) / pa * f[blk.front()];
        below[space_->block_of(t, blk.front())] = LinExpr::variable(lp.add_free_variable(coef));
      }
      for (std::size_t l = j0; l-- > i0;) {
        const auto& step = steps_.at({grid_[l], grid_[l + 1]});
        std::map<int, LinExpr> above;
        for (const auto& block : step.blocks()) {
          if (space_->block_of(s, block.atoms.front()) != space_->block_of(s, top.front())) continue;
          std::vector<LinExpr> cells;
          for (const auto& cell : block.cells) cells.push_back(below.at(space_->block_of(grid_[l + 1], cell.atoms.front())));
          const LinExpr val = step.epigraph(lp, block.index, cells);
          if (l == i0) {
            lp.add_objective(val, -1.0);
          } else {
            const int v = lp.add_free_variable();
            LinExpr row = LinExpr::variable(v);
            row.add(val, -1.0);
            lp.add_row(row, RowType::ge, 0.0);
            above[static_cast<int>(block.index)] = LinExpr::variable(v);
          }
        }
        below = std::move(above);
      }
      const LpResult r = solve_lp(lp);
      if (r.status == LpStatus::unbounded)
        out.blocks.push_back(ExtendedReal::infinity());
      else if (r.status == LpStatus::optimal)
        out.blocks.push_back(r.value);
      else
        throw SolverError("chained penalty LP infeasible");
    }
    return out;
  }

  /// Value, attaining product density and its penalty.
  PriceResult price(int s, int t, const RandomVariable& x) const {
    check_pair(s, t);
    if (!x.is_measurable(*space_, t, 1e-12))
      throw InvalidLevelError("payoff is not measurable at level " + std::to_string(t));
    const std::size_t i0 = position(s), j0 = position(t);
    std::vector<RandomVariable> gs(j0 - i0);
    RandomVariable v = RandomVariable::unchecked(x.values(), t);
    for (std::size_t l = j0; l-- > i0;) {
      const Attainment a = steps_.at({grid_[l], grid_[l + 1]}).attain(v);
      gs[l - i0] = a.density;
      v = a.value;
    }
    ProductDensity q{s, t, std::move(gs)};
    PenaltyValue pen = cocycle_penalty(q);
    record(q, pen);
    return {v, std::move(q), std::move(pen)};
  }

  /// A product density of finite penalty: per step, a random vertex of the
  /// finite-penalty densities mixed with the max-min interior point.
  ProductDensity sample_product_density(int s, int t, std::mt19937_64& rng, double interior = 0.25) const {
    check_pair(s, t);
    ProductDensity q{s, t, {}};
    for (std::size_t l = position(s); l < position(t); ++l) {
      const auto& step = steps_.at({grid_[l], grid_[l + 1]});
      const RandomVariable vertex = step.sample_density(rng);
      const RandomVariable centre = step.attain(constant(*space_, 0.0, grid_[l + 1])).density;
      q.steps.push_back(RandomVariable::unchecked(
          (1.0 - interior) * vertex.values() + interior * centre.values(), grid_[l + 1]));
    }
    return q;
  }

  /// Ledger entries recorded so far for a pair.
  std::size_t ledger_size(int s, int t) const {
    std::lock_guard<std::mutex> lock(ledger_->mutex);
    auto it = ledger_->entries.find({s, t});
    return it == ledger_->entries.end() ? 0 : it->second.size();
  }
  std::optional<PenaltyValue> ledger_lookup(const ProductDensity& q) const {
    std::lock_guard<std::mutex> lock(ledger_->mutex);
    auto it = ledger_->entries.find({q.from, q.to});
    if (it == ledger_->entries.end()) return std::nullopt;
    auto jt = it->second.find(q.key());
    if (jt == it->second.end()) return std::nullopt;
    return jt->second;
  }
  void record(const ProductDensity& q, const PenaltyValue& p) const {
    std::lock_guard<std::mutex> lock(ledger_->mutex);
    ledger_->entries[{q.from, q.to}].insert_or_assign(q.key(), p);
  }

  /// E_P[V | level] for an atomwise extended-real V (0 * inf = 0 already applied).
  PenaltyValue condition(const std::vector<ExtendedReal>& v, int level) const {
    PenaltyValue out;
    out.level = level;
    for (const auto& block : space_->partition(level)) {
      ExtendedReal acc(0.0);
      const double pb = space_->mass(block);
      for (int a : block) acc = acc + (space_->prob(a) / pb) * v[static_cast<std::size_t>(a)];
      out.blocks.push_back(acc);
    }
    return out;
  }

 private:
  struct Ledger {
    std::mutex mutex;
    std::map<PairKey, std::map<std::vector<double>, PenaltyValue>> entries;
  };

  SpacePtr space_;
  std::vector<int> grid_;
  std::map<PairKey, ExtendedOperator> steps_;
  std::shared_ptr<Ledger> ledger_;
};

inline ExtendedSystem extend_system(const OperatorSystem& sys) {
  check_structure(sys);
  std::map<PairKey, ExtendedOperator> steps;
  for (std::size_t i = 0; i + 1 < sys.grid.size(); ++i) {
    const int s = sys.grid[i], t = sys.grid[i + 1];
    try {
      steps.emplace(PairKey{s, t}, maximal_extension(sys.op(s, t), sys.bounds.at(s, t)));
    } catch (const Error& e) {
      std::string msg = "pair (" + std::to_string(s) + ", " + std::to_string(t) + "): " + e.what();
      if (dynamic_cast<const InfeasibleError*>(&e)) throw InfeasibleError(msg);
      if (dynamic_cast<const PreconditionError*>(&e)) throw PreconditionError(msg);
      throw;
    }
  }
  return ExtendedSystem(sys.space, sys.grid, std::move(steps));
}

/// The system on a coarser grid, using the declared operators and bounds for
/// its adjacent pairs.
inline OperatorSystem subsystem(const OperatorSystem& sys, const std::vector<int>& grid) {
  OperatorSystem out;
  out.space = sys.space;
  out.grid = grid;
  out.bounds.grid = grid;
  for (int g : grid) sys.position(g);
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      const PairKey key{grid[i], grid[j]};
      out.bounds.bounds.emplace(key, sys.bounds.at(key.first, key.second));
      if (sys.has_operator(key.first, key.second)) out.operators.emplace(key, sys.op(key.first, key.second));
    }
  check_structure(out);
  return out;
}

/// (r,s,t) cocycle and locality of the minimal penalties of the composed
/// extension, on sampled product densities.
inline ValidationReport check_cocycle_and_local(const ExtendedSystem& ext, int r, int s, int t,
                                                std::mt19937_64& rng, int samples = 20, double tol = 1e-6) {
  ext.check_pair(r, s);
  ext.check_pair(s, t);
  const auto& space = ext.space();
  ValidationReport rep;
  double worst_cocycle = 0.0, worst_recursion = 0.0;
  bool local = true;
  std::uniform_int_distribution<std::size_t> pick(0, space.n_blocks(r) - 1);
  const std::size_t split = ext.position(s) - ext.position(r);

  for (int n = 0; n < samples; ++n) {
    const ProductDensity q = ext.sample_product_density(r, t, rng);
    const ProductDensity head{r, s, {q.steps.begin(), q.steps.begin() + static_cast<std::ptrdiff_t>(split)}};
    const ProductDensity tail{s, t, {q.steps.begin() + static_cast<std::ptrdiff_t>(split), q.steps.end()}};
    const PenaltyValue a_rt = ext.minimal_penalty(r, t, q.product());
    const PenaltyValue a_rs = ext.minimal_penalty(r, s, head.product());
    const PenaltyValue a_st = ext.minimal_penalty(s, t, tail.product());
    const Eigen::VectorXd w = head.product().values();
    std::vector<ExtendedReal> atomwise;
    for (int a = 0; a < space.n_atoms(); ++a)
      atomwise.push_back(w[a] * a_st.blocks[static_cast<std::size_t>(space.block_of(s, a))]);
    const PenaltyValue eq = ext.condition(atomwise, r);
    const PenaltyValue recursion = ext.cocycle_penalty(q);
    for (std::size_t b = 0; b < a_rt.blocks.size(); ++b) {
      const ExtendedReal rhs = a_rs.blocks[b] + eq.blocks[b];
      if (a_rt.blocks[b].is_infinite() || rhs.is_infinite()) {
        if (!(a_rt.blocks[b] == rhs)) worst_cocycle = kInf;
      } else {
        worst_cocycle = std::max(worst_cocycle, std::abs(a_rt.blocks[b].value() - rhs.value()));
      }
      if (recursion.blocks[b].is_finite() && a_rt.blocks[b].is_finite())
        worst_recursion = std::max(worst_recursion, std::abs(recursion.blocks[b].value() - a_rt.blocks[b].value()));
      else if (!(recursion.blocks[b] == a_rt.blocks[b]))
        worst_recursion = kInf;
    }

    // Splice with a second density on one level-r block.
    const ProductDensity other = ext.sample_product_density(r, t, rng);
    const auto& block = space.partition(r)[pick(rng)];
    ProductDensity spliced = other;
    for (std::size_t l = 0; l < spliced.steps.size(); ++l) {
      Eigen::VectorXd v = other.steps[l].values();
      for (int a : block) v[a] = q.steps[l][a];
      spliced.steps[l] = RandomVariable::unchecked(v, q.steps[l].level());
    }
    const PenaltyValue a_sp = ext.minimal_penalty(r, t, spliced.product());
    const auto bi = static_cast<std::size_t>(space.block_of(r, block.front()));
    if (!(a_sp.blocks[bi] == a_rt.blocks[bi])) {
      const bool close = a_sp.blocks[bi].is_finite() && a_rt.blocks[bi].is_finite() &&
                         std::abs(a_sp.blocks[bi].value() - a_rt.blocks[bi].value()) <= 1e-12;
      local = local && close;
    }
  }
  std::ostringstream d1, d2;
  d1 << samples << " densities, max gap " << worst_cocycle;
  d2 << "max gap " << worst_recursion;
  rep.add("cocycle", worst_cocycle <= tol, d1.str(), true);
  rep.add("step recursion of penalties", worst_recursion <= tol, d2.str(), true);
  rep.add("locality", local, "", true);
  return rep;
}

struct RefinementReport {
  ValidationReport report;
  double max_value_excess = -kInf;  // max over samples of fine - coarse
  double max_strict_gap = 0.0;      // largest coarse - fine seen
  std::optional<RandomVariable> strict_witness;  // payoff with the largest decrease
  PairKey witness_pair{0, 0};
  bool strict() const { return max_strict_gap > 1e-8; }
};

/// Values on the finer grid never exceed those on the coarser grid, and
/// penalties never decrease, on pairs shared by both grids.
inline RefinementReport refine_and_compare(const ExtendedSystem& coarse, const ExtendedSystem& fine,
                                           std::mt19937_64& rng, int payoffs = 100, int densities = 20,
                                           double tol = 1e-8) {
  for (int g : coarse.grid())
    if (std::find(fine.grid().begin(), fine.grid().end(), g) == fine.grid().end())
      throw InvalidInputError("refine: the fine grid does not contain the coarse grid");
  const auto& space = fine.space();
  const auto& cg = coarse.grid();
  RefinementReport out;
  bool values_ok = true, penalties_ok = true;
  std::uniform_real_distribution<double> u(-2.0, 2.0);

  for (std::size_t i = 0; i < cg.size(); ++i)
    for (std::size_t j = i + 1; j < cg.size(); ++j) {
      const int s = cg[i], t = cg[j];
      std::vector<RandomVariable> xs;
      for (const auto& block : space.partition(t)) xs.push_back(indicator(space, block, t));
      for (int n = 0; n < payoffs; ++n) {
        Eigen::VectorXd v(space.n_atoms());
        for (const auto& block : space.partition(t)) {
          const double x = u(rng);
          for (int a : block) v[a] = x;
        }
        xs.push_back(RandomVariable::unchecked(v, t));
      }
      for (const auto& x : xs) {
        const Eigen::VectorXd d = fine.evaluate(s, t, x).values() - coarse.evaluate(s, t, x).values();
        out.max_value_excess = std::max(out.max_value_excess, d.maxCoeff());
        if (d.maxCoeff() > tol) values_ok = false;
        if (-d.minCoeff() > out.max_strict_gap) {
          out.max_strict_gap = -d.minCoeff();
          out.strict_witness = x;
          out.witness_pair = {s, t};
        }
      }
      for (int n = 0; n < densities; ++n) {
        const RandomVariable f = fine.sample_product_density(s, t, rng).product();
        const PenaltyValue pf = fine.minimal_penalty(s, t, f);
        const PenaltyValue pc = coarse.minimal_penalty(s, t, f);
        for (std::size_t b = 0; b < pf.blocks.size(); ++b) {
          if (pf.blocks[b].is_infinite()) continue;
          if (pc.blocks[b].is_infinite() || pc.blocks[b].value() > pf.blocks[b].value() + tol) penalties_ok = false;
        }
      }
    }
  std::ostringstream d;
  d << "max excess " << out.max_value_excess << ", largest decrease " << out.max_strict_gap;
  out.report.add("values non-increasing under refinement", values_ok, d.str(), true);
  out.report.add("penalties non-decreasing under refinement", penalties_ok, "", true);
  return out;
}

/// x̂_{s,t}(X) along a sequence of nested grids, with a flag for whether the
/// trajectory is non-increasing atomwise.
struct Trajectory {
  std::vector<RandomVariable> values;
  bool monotone = true;
};

inline Trajectory refinement_trajectory(const std::vector<ExtendedSystem>& systems, int s, int t,
                                        const RandomVariable& x, double tol = 1e-8) {
  Trajectory tr;
  for (std::size_t k = 0; k < systems.size(); ++k) {
    if (k > 0)
      for (int g : systems[k - 1].grid())
        if (std::find(systems[k].grid().begin(), systems[k].grid().end(), g) == systems[k].grid().end())
          throw InvalidInputError("trajectory grids are not nested");
    tr.values.push_back(systems[k].evaluate(s, t, x));
    if (k > 0 && (tr.values[k].values() - tr.values[k - 1].values()).maxCoeff() > tol) tr.monotone = false;
  }
  return tr;
}

}  // namespace sandwich

#endif  // SANDWICH_DYNAMIC_HPP
