#ifndef SANDWICH_SCENARIO_HPP
#define SANDWICH_SCENARIO_HPP

#include <json.hpp>

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sandwich/dynamic.hpp"

namespace sandwich {

using json = nlohmann::json;

/// Input error located at a JSON pointer into the scenario document.
class ScenarioError : public InvalidInputError {
 public:
  ScenarioError(std::string path, const std::string& what)
      : InvalidInputError(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct Task {
  std::string command;  // "price" or "check"
  int from = 0;
  int to = 0;
  std::string payoff;
  std::string suite;
};

struct Scenario {
  json source;
  SpacePtr space;
  OperatorSystem system;
  std::map<std::string, std::vector<double>> payoffs;
  std::optional<std::vector<int>> coarse_grid;
  std::vector<Task> tasks;
};

namespace scenario_detail {

inline std::string at(const std::string& path, const std::string& key) { return path + "/" + key; }
inline std::string at(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

inline const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ScenarioError(path.empty() ? "/" : path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ScenarioError(at(path, key), "required field is missing");
  return *it;
}

inline void only_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& path) {
  if (!obj.is_object()) throw ScenarioError(path.empty() ? "/" : path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw ScenarioError(at(path, it.key()), "unknown field");
  }
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ScenarioError(path, "expected a number");
  return j.get<double>();
}

inline int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ScenarioError(path, "expected an integer");
  return j.get<int>();
}

inline std::vector<double> numbers(const json& j, const std::string& path, std::optional<std::size_t> size,
                                   bool allow_scalar = false) {
  if (allow_scalar && j.is_number() && size) return std::vector<double>(*size, j.get<double>());
  if (!j.is_array()) throw ScenarioError(path, allow_scalar ? "expected a number or an array" : "expected an array");
  if (size && j.size() != *size)
    throw ScenarioError(path, "expected " + std::to_string(*size) + " entries, got " + std::to_string(j.size()));
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], at(path, i)));
  return out;
}

inline std::vector<int> integers(const json& j, const std::string& path) {
  if (!j.is_array()) throw ScenarioError(path, "expected an array");
  std::vector<int> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(integer(j[i], at(path, i)));
  return out;
}

/// Runs `f`, re-raising library input errors at `path`.
template <class F>
auto located(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ScenarioError&) {
    throw;
  } catch (const InvalidInputError& e) {
    throw ScenarioError(path, e.what());
  } catch (const InvalidLevelError& e) {
    throw ScenarioError(path, e.what());
  }
}

inline RandomVariable variable(const FilteredSpace& space, const json& j, const std::string& path, int level,
                               bool allow_scalar = false) {
  auto v = numbers(j, path, static_cast<std::size_t>(space.n_atoms()), allow_scalar);
  return located(path, [&] { return RandomVariable(space, v, level); });
}

}  // namespace scenario_detail

inline Scenario parse_scenario(const json& doc) {
  using namespace scenario_detail;
  Scenario sc;
  sc.source = doc;
  if (!doc.is_object()) throw ScenarioError("/", "expected an object");
  only_keys(doc, {"schema_version", "space", "grid", "subspaces", "operators", "bounds", "payoffs", "refinement", "tasks"}, "");
  if (doc.contains("schema_version") && doc["schema_version"] != "1")
    throw ScenarioError("/schema_version", "unsupported schema version");

  // space
  {
    const json& js = field(doc, "space", "");
    const std::string p = "/space";
    only_keys(js, {"probs", "partitions", "time_labels", "p"}, p);
    auto probs = numbers(field(js, "probs", p), at(p, "probs"), std::nullopt);
    const json& jp = field(js, "partitions", p);
    if (!jp.is_array()) throw ScenarioError(at(p, "partitions"), "expected an array");
    std::vector<Partition> levels;
    for (std::size_t l = 0; l < jp.size(); ++l) {
      const std::string pl = at(at(p, "partitions"), l);
      if (!jp[l].is_array()) throw ScenarioError(pl, "expected an array of blocks");
      Partition part;
      for (std::size_t b = 0; b < jp[l].size(); ++b) part.push_back(integers(jp[l][b], at(pl, b)));
      levels.push_back(std::move(part));
    }
    std::vector<double> labels;
    if (js.contains("time_labels")) {
      labels = numbers(js["time_labels"], at(p, "time_labels"), levels.size());
    } else {
      for (std::size_t l = 0; l < levels.size(); ++l) labels.push_back(static_cast<double>(l));
    }
    const double exponent = js.contains("p") ? number(js["p"], at(p, "p")) : 2.0;
    sc.space = located(p, [&] { return make_space(probs, levels, labels, exponent); });
  }
  const FilteredSpace& space = *sc.space;
  const auto n = static_cast<std::size_t>(space.n_atoms());

  // grid
  const std::vector<int> grid = doc.contains("grid") ? integers(doc["grid"], "/grid") : [&] {
    std::vector<int> g;
    for (int l = 0; l < space.n_levels(); ++l) g.push_back(l);
    return g;
  }();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0 || grid[i] >= space.n_levels()) throw ScenarioError(at("/grid", i), "not a level of the space");
    if (i > 0 && grid[i] <= grid[i - 1]) throw ScenarioError(at("/grid", i), "grid must be strictly increasing");
  }
  if (grid.size() < 2) throw ScenarioError("/grid", "grid needs at least two points");
  sc.system.space = sc.space;
  sc.system.grid = grid;
  sc.system.bounds.grid = grid;
  auto on_grid = [&](int level, const std::string& path) {
    if (std::find(grid.begin(), grid.end(), level) == grid.end()) throw ScenarioError(path, "level is not on the grid");
  };

  // subspaces
  std::map<int, std::vector<RandomVariable>> generators;
  if (doc.contains("subspaces")) {
    const json& jl = doc["subspaces"];
    if (!jl.is_array()) throw ScenarioError("/subspaces", "expected an array");
    for (std::size_t i = 0; i < jl.size(); ++i) {
      const std::string p = at("/subspaces", i);
      only_keys(jl[i], {"level", "generators"}, p);
      const int level = integer(field(jl[i], "level", p), at(p, "level"));
      on_grid(level, at(p, "level"));
      if (generators.count(level)) throw ScenarioError(at(p, "level"), "duplicate subspace level");
      const json& jg = field(jl[i], "generators", p);
      if (!jg.is_array()) throw ScenarioError(at(p, "generators"), "expected an array");
      auto& gens = generators[level];
      for (std::size_t k = 0; k < jg.size(); ++k)
        gens.push_back(variable(space, jg[k], at(at(p, "generators"), k), level));
    }
  }
  auto domain = [&](int s, int t, const std::string& path) {
    return located(path, [&] {
      auto it = generators.find(t);
      if (it == generators.end()) return Subspace::full(sc.space, t, s);
      return Subspace::span_closure(sc.space, t, s, it->second);
    });
  };

  // bounds
  {
    const json& jb = field(doc, "bounds", "");
    if (!jb.is_array()) throw ScenarioError("/bounds", "expected an array");
    for (std::size_t i = 0; i < jb.size(); ++i) {
      const std::string p = at("/bounds", i);
      only_keys(jb[i], {"from", "to", "kind", "m0", "M0", "m_kernels", "M_kernels"}, p);
      const int s = integer(field(jb[i], "from", p), at(p, "from"));
      const int t = integer(field(jb[i], "to", p), at(p, "to"));
      on_grid(s, at(p, "from"));
      on_grid(t, at(p, "to"));
      if (s >= t) throw ScenarioError(p, "bounds need from < to");
      const json& kind = field(jb[i], "kind", p);
      if (kind == "linear") {
        const RandomVariable m0 = variable(space, field(jb[i], "m0", p), at(p, "m0"), t, true);
        const RandomVariable M0 = variable(space, field(jb[i], "M0", p), at(p, "M0"), t, true);
        auto bp = located(p, [&] { return BoundPair::linear(sc.space, s, t, m0, M0); });
        if (!sc.system.bounds.bounds.emplace(PairKey{s, t}, std::move(bp)).second)
          throw ScenarioError(p, "duplicate bounds for this pair");
      } else if (kind == "polyhedral") {
        std::vector<RandomVariable> lo, hi;
        for (const auto* name : {"m_kernels", "M_kernels"}) {
          const json& jk = field(jb[i], name, p);
          if (!jk.is_array()) throw ScenarioError(at(p, name), "expected an array");
          for (std::size_t k = 0; k < jk.size(); ++k)
            (std::string(name) == "m_kernels" ? lo : hi)
                .push_back(variable(space, jk[k], at(at(p, name), k), t, true));
        }
        auto bp = located(p, [&] { return BoundPair::polyhedral(sc.space, s, t, lo, hi); });
        if (!sc.system.bounds.bounds.emplace(PairKey{s, t}, std::move(bp)).second)
          throw ScenarioError(p, "duplicate bounds for this pair");
      } else {
        throw ScenarioError(at(p, "kind"), "expected \"linear\" or \"polyhedral\"");
      }
    }
    for (std::size_t i = 0; i < grid.size(); ++i)
      for (std::size_t j = i + 1; j < grid.size(); ++j)
        if (!sc.system.bounds.bounds.count({grid[i], grid[j]}))
          throw ScenarioError("/bounds", "no bounds for pair (" + std::to_string(grid[i]) + ", " +
                                             std::to_string(grid[j]) + ")");
  }

  // operators: explicit pieces first, then compositions
  {
    const json& jo = field(doc, "operators", "");
    if (!jo.is_array()) throw ScenarioError("/operators", "expected an array");
    std::vector<std::pair<PairKey, std::string>> composed;
    for (std::size_t i = 0; i < jo.size(); ++i) {
      const std::string p = at("/operators", i);
      only_keys(jo[i], {"from", "to", "pieces", "compose"}, p);
      const int s = integer(field(jo[i], "from", p), at(p, "from"));
      const int t = integer(field(jo[i], "to", p), at(p, "to"));
      on_grid(s, at(p, "from"));
      on_grid(t, at(p, "to"));
      if (s >= t) throw ScenarioError(p, "operators need from < to");
      if (jo[i].contains("compose")) {
        if (jo[i]["compose"] != true) throw ScenarioError(at(p, "compose"), "expected true");
        composed.emplace_back(PairKey{s, t}, p);
        continue;
      }
      const json& jp = field(jo[i], "pieces", p);
      if (!jp.is_array() || jp.empty()) throw ScenarioError(at(p, "pieces"), "expected a nonempty array");
      std::vector<Piece> pieces;
      for (std::size_t k = 0; k < jp.size(); ++k) {
        const std::string pk = at(at(p, "pieces"), k);
        only_keys(jp[k], {"density", "penalty"}, pk);
        pieces.push_back({variable(space, field(jp[k], "density", pk), at(pk, "density"), t, true),
                          variable(space, field(jp[k], "penalty", pk), at(pk, "penalty"), s, true)});
      }
      const Subspace L = domain(s, t, p);
      auto op = located(p, [&] { return PolyhedralOperator(L, pieces); });
      if (!sc.system.operators.emplace(PairKey{s, t}, std::move(op)).second)
        throw ScenarioError(p, "duplicate operator for this pair");
    }
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
      if (!sc.system.has_operator(grid[i], grid[i + 1]))
        throw ScenarioError("/operators", "no one-step operator for pair (" + std::to_string(grid[i]) + ", " +
                                              std::to_string(grid[i + 1]) + ")");
    for (const auto& [key, p] : composed) {
      const std::size_t i0 = sc.system.position(key.first), j0 = sc.system.position(key.second);
      auto op = [&] {
        try {
          PolyhedralOperator cur = sc.system.op(grid[j0 - 1], grid[j0]);
          for (std::size_t l = j0 - 1; l-- > i0;) cur = compose(sc.system.op(grid[l], grid[l + 1]), cur);
          return cur;
        } catch (const Error& e) {
          throw ScenarioError(p, e.what());
        }
      }();
      if (!sc.system.operators.emplace(key, std::move(op)).second)
        throw ScenarioError(p, "duplicate operator for this pair");
    }
  }

  // payoffs
  if (doc.contains("payoffs")) {
    const json& jp = doc["payoffs"];
    if (!jp.is_object()) throw ScenarioError("/payoffs", "expected an object");
    for (auto it = jp.begin(); it != jp.end(); ++it)
      sc.payoffs[it.key()] = numbers(it.value(), at("/payoffs", it.key()), n);
  }

  if (doc.contains("refinement")) {
    const std::string p = "/refinement";
    only_keys(doc["refinement"], {"coarse_grid"}, p);
    const auto cg = integers(field(doc["refinement"], "coarse_grid", p), at(p, "coarse_grid"));
    for (std::size_t i = 0; i < cg.size(); ++i) {
      on_grid(cg[i], at(at(p, "coarse_grid"), i));
      if (i > 0 && cg[i] <= cg[i - 1]) throw ScenarioError(at(at(p, "coarse_grid"), i), "must be increasing");
    }
    if (cg.size() < 2) throw ScenarioError(at(p, "coarse_grid"), "needs at least two points");
    sc.coarse_grid = cg;
  }

  if (doc.contains("tasks")) {
    const json& jt = doc["tasks"];
    if (!jt.is_array()) throw ScenarioError("/tasks", "expected an array");
    for (std::size_t i = 0; i < jt.size(); ++i) {
      const std::string p = at("/tasks", i);
      only_keys(jt[i], {"command", "from", "to", "payoff", "suite"}, p);
      Task task;
      const json& cmd = field(jt[i], "command", p);
      if (!cmd.is_string()) throw ScenarioError(at(p, "command"), "expected a string");
      task.command = cmd.get<std::string>();
      if (task.command == "price") {
        task.from = integer(field(jt[i], "from", p), at(p, "from"));
        task.to = integer(field(jt[i], "to", p), at(p, "to"));
        on_grid(task.from, at(p, "from"));
        on_grid(task.to, at(p, "to"));
        const json& pay = field(jt[i], "payoff", p);
        if (!pay.is_string() || !sc.payoffs.count(pay.get<std::string>()))
          throw ScenarioError(at(p, "payoff"), "unknown payoff");
        task.payoff = pay.get<std::string>();
      } else if (task.command == "check") {
        const json& suite = field(jt[i], "suite", p);
        if (!suite.is_string()) throw ScenarioError(at(p, "suite"), "expected a string");
        task.suite = suite.get<std::string>();
        if (task.suite != "representation" && task.suite != "sandwich" && task.suite != "cocycle" &&
            task.suite != "refine")
          throw ScenarioError(at(p, "suite"), "unknown suite");
      } else {
        throw ScenarioError(at(p, "command"), "expected \"price\" or \"check\"");
      }
      sc.tasks.push_back(std::move(task));
    }
  }
  return sc;
}

inline Scenario load_scenario(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ScenarioError("/", "cannot open " + file);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError("/", std::string("malformed JSON: ") + e.what());
  }
  return parse_scenario(doc);
}

}  // namespace sandwich

#endif  // SANDWICH_SCENARIO_HPP
