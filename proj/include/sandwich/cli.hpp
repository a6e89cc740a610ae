#ifndef SANDWICH_CLI_HPP
#define SANDWICH_CLI_HPP

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sandwich/dynamic.hpp"
#include "sandwich/scenario.hpp"

namespace sandwich::cli {

enum ExitCode : int { kPass = 0, kCheckFailed = 1, kInputError = 2 };

/// 10 significant digits, used for every number the CLI prints or writes.
inline std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}
inline std::string fmt(const ExtendedReal& v) { return v.is_infinite() ? "inf" : fmt(v.value()); }

inline json num(double v) {
  if (!std::isfinite(v)) return v > 0 ? json("inf") : json("-inf");
  double r = std::strtod(fmt(v).c_str(), nullptr);
  if (r == 0.0) r = 0.0;  // no negative zero in reports
  return r;
}
inline json num(const ExtendedReal& v) { return v.is_infinite() ? json("inf") : num(v.value()); }
inline json nums(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

struct Options {
  std::string command;
  std::string input;
  std::string output;
  double tol = kTol;
  int from = -1;
  int to = -1;
  std::string payoff;
  std::string suite;
  std::uint64_t seed = 0;
};

namespace detail {

class Table {
 public:
  explicit Table(std::vector<std::string> header) : rows_{std::move(header)} {}
  void row(std::vector<std::string> r) { rows_.push_back(std::move(r)); }
  void print(std::ostream& out) const {
    std::vector<std::size_t> w;
    for (const auto& r : rows_)
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (w.size() <= i) w.push_back(0);
        w[i] = std::max(w[i], r[i].size());
      }
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      std::string line;
      for (std::size_t i = 0; i < rows_[k].size(); ++i) {
        line += rows_[k][i];
        if (i + 1 < rows_[k].size()) line += std::string(w[i] - rows_[k][i].size() + 2, ' ');
      }
      out << line << '\n';
      if (k == 0) {
        std::size_t total = 0;
        for (std::size_t i = 0; i < w.size(); ++i) total += w[i] + (i + 1 < w.size() ? 2 : 0);
        out << std::string(total, '-') << '\n';
      }
    }
  }

 private:
  std::vector<std::vector<std::string>> rows_;
};

inline json report_json(const ValidationReport& r) {
  json a = json::array();
  for (const auto& e : r.entries)
    a.push_back({{"name", e.name}, {"passed", e.passed}, {"detail", e.detail}, {"sampled", e.sampled}});
  return a;
}

inline void print_report(std::ostream& out, const std::string& title, const ValidationReport& r) {
  out << "\n== " << title << " ==\n";
  Table t({"check", "result", "detail"});
  for (const auto& e : r.entries)
    t.row({e.name, std::string(e.passed ? "PASS" : "FAIL") + (e.sampled ? " (sampled)" : ""), e.detail});
  t.print(out);
}

inline std::string pair_name(int s, int t) { return "(" + std::to_string(s) + "," + std::to_string(t) + ")"; }

/// Named payoff or a comma-separated vector.
inline RandomVariable payoff(const Scenario& sc, const std::string& spec, int level) {
  std::vector<double> v;
  if (auto it = sc.payoffs.find(spec); it != sc.payoffs.end()) {
    v = it->second;
  } else {
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
      char* end = nullptr;
      const double x = std::strtod(item.c_str(), &end);
      if (item.empty() || end == item.c_str() || *end != '\0')
        throw InvalidInputError("payoff '" + spec + "' is neither a named payoff nor a numeric vector");
      v.push_back(x);
    }
  }
  if (v.size() != static_cast<std::size_t>(sc.space->n_atoms()))
    throw InvalidInputError("payoff has " + std::to_string(v.size()) + " entries, the space has " +
                            std::to_string(sc.space->n_atoms()) + " atoms");
  return RandomVariable(*sc.space, v, level);
}

struct Session {
  const Scenario& sc;
  const Options& opt;
  std::ostream& out;
  std::mt19937_64 rng;
  json doc;
  bool passed = true;
  std::optional<ExtendedSystem> ext;

  Session(const Scenario& s, const Options& o, std::ostream& os) : sc(s), opt(o), out(os), rng(o.seed) {}

  double tol(double floor) const { return std::max(opt.tol, floor); }

  void validate() {
    const ValidationReport r = validate_system(sc.system, rng, opt.tol);
    print_report(out, "validation", r);
    doc["validation"] = report_json(r);
    passed = passed && r.passed();
  }

  const ExtendedSystem& extended() {
    if (!ext) ext.emplace(extend_system(sc.system));
    return *ext;
  }

  void extend() {
    const ExtendedSystem& e = extended();
    out << "\n== extension ==\n";
    Table t({"pair", "blocks", "dim L", "bounds", "non-degenerate"});
    json steps = json::array();
    const auto& g = e.grid();
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
      const auto& st = e.step(g[i]);
      const std::string kind = st.bounds().kind() == BoundKind::linear ? "linear" : "polyhedral";
      t.row({pair_name(g[i], g[i + 1]), std::to_string(st.blocks().size()),
             std::to_string(st.base().domain().dimension()), kind, st.nondegenerate() ? "yes" : "no"});
      steps.push_back({{"from", g[i]},
                       {"to", g[i + 1]},
                       {"blocks", st.blocks().size()},
                       {"domain_dimension", st.base().domain().dimension()},
                       {"bounds", kind},
                       {"nondegenerate", st.nondegenerate()}});
    }
    t.print(out);
    json values = json::object();
    if (!sc.payoffs.empty()) {
      Table v({"payoff", "pair", "value per block"});
      for (const auto& [name, vec] : sc.payoffs) {
        const int s = g.front(), T = g.back();
        const RandomVariable x = payoff(sc, name, T);
        const RandomVariable val = e.evaluate(s, T, x);
        Eigen::VectorXd per_block(static_cast<Eigen::Index>(sc.space->n_blocks(s)));
        for (std::size_t b = 0; b < sc.space->n_blocks(s); ++b)
          per_block[static_cast<Eigen::Index>(b)] = val[sc.space->partition(s)[b].front()];
        std::string cells;
        for (Eigen::Index b = 0; b < per_block.size(); ++b) cells += (b ? " " : "") + fmt(per_block[b]);
        v.row({name, pair_name(s, T), cells});
        values[name] = nums(per_block);
      }
      out << '\n';
      v.print(out);
    }
    doc["extension"] = {{"steps", steps}, {"values", values}};
  }

  void price(int s, int t, const std::string& spec) {
    const ExtendedSystem& e = extended();
    e.check_pair(s, t);
    const RandomVariable x = payoff(sc, spec, t);
    const PriceResult pr = e.price(s, t, x);
    const RandomVariable f = pr.density.product();
    const RandomVariable fx = cond_expectation(*sc.space, f * x, s);
    double residual = 0.0;
    const auto& blocks = sc.space->partition(s);
    out << "\n== price " << spec << " over " << pair_name(s, t) << " ==\n";
    Table tb({"block", "atoms", "value", "penalty", "E[fX]"});
    json rows = json::array();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const int a0 = blocks[b].front();
      std::string atoms;
      for (int a : blocks[b]) atoms += (atoms.empty() ? "" : " ") + std::to_string(a);
      const ExtendedReal pen = pr.penalty.blocks[b];
      if (pen.is_infinite()) residual = kInf;
      else residual = std::max(residual, std::abs(pr.value[a0] - (fx[a0] - pen.value())));
      tb.row({std::to_string(b), atoms, fmt(pr.value[a0]), fmt(pen), fmt(fx[a0])});
      rows.push_back({{"block", b}, {"atoms", blocks[b]}, {"value", num(pr.value[a0])},
                      {"penalty", num(pen)}, {"expected_weighted_payoff", num(fx[a0])}});
    }
    tb.print(out);
    Table dens({"atom", "f_X"});
    for (int a = 0; a < sc.space->n_atoms(); ++a) dens.row({std::to_string(a), fmt(f[a])});
    out << '\n';
    dens.print(out);
    json steps = json::array();
    for (const auto& g : pr.density.steps) steps.push_back(nums(g.values()));
    const bool ok = residual <= tol(1e-6);
    out << "price identity residual " << fmt(residual) << (ok ? "  PASS" : "  FAIL") << '\n';
    passed = passed && ok;
    doc["prices"].push_back({{"payoff", spec},
                             {"from", s},
                             {"to", t},
                             {"blocks", rows},
                             {"density", nums(f.values())},
                             {"step_densities", steps},
                             {"identity_residual", num(residual)},
                             {"identity_passed", ok}});
  }

  void suite(const std::string& name) {
    const ExtendedSystem& e = extended();
    const auto& g = e.grid();
    ValidationReport r;
    json extra = json::object();
    if (name == "representation") {
      for (const auto& [key, op] : sc.system.operators)
        r.append(verify_representation(op, rng, 100, tol(1e-7)), "x" + pair_name(key.first, key.second) + " ");
    } else if (name == "sandwich") {
      for (const auto& [key, op] : sc.system.operators) {
        const SandwichResult sw = check_sandwich(op, sc.system.bounds.at(key.first, key.second), opt.tol);
        r.add("x" + pair_name(key.first, key.second) + " sandwich", sw.holds,
              sw.via_fast_path ? "pieces inside the bound set" : "");
      }
      for (std::size_t i = 0; i + 1 < g.size(); ++i)
        r.append(check_extension_bounds(e.step(g[i]), rng, 200, tol(1e-8)),
                 "x^" + pair_name(g[i], g[i + 1]) + " ");
    } else if (name == "cocycle") {
      for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = i + 1; j < g.size(); ++j)
          for (std::size_t k = j + 1; k < g.size(); ++k)
            r.append(check_cocycle_and_local(e, g[i], g[j], g[k], rng, 20, tol(1e-6)),
                     "(" + std::to_string(g[i]) + "," + std::to_string(g[j]) + "," + std::to_string(g[k]) + ") ");
      if (g.size() < 3) r.add("cocycle", true, "fewer than three grid points: vacuous");
    } else if (name == "refine") {
      if (!sc.coarse_grid) throw InvalidInputError("scenario has no refinement section");
      const ExtendedSystem coarse = extend_system(subsystem(sc.system, *sc.coarse_grid));
      const RefinementReport rr = refine_and_compare(coarse, e, rng, 100, 20, tol(1e-8));
      r = rr.report;
      extra["largest_decrease"] = num(rr.max_strict_gap);
      extra["strict_decrease"] = rr.strict();
      if (rr.strict_witness) {
        extra["witness_payoff"] = nums(rr.strict_witness->values());
        extra["witness_pair"] = {rr.witness_pair.first, rr.witness_pair.second};
      }
    } else {
      throw InvalidInputError("unknown suite '" + name + "'");
    }
    print_report(out, name + " suite", r);
    if (extra.contains("strict_decrease"))
      out << "strict decrease " << (extra["strict_decrease"].get<bool>() ? "witnessed" : "not witnessed")
          << ", largest decrease " << fmt(extra["largest_decrease"].get<double>()) << '\n';
    json entry = {{"checks", report_json(r)}};
    if (!extra.empty()) entry["details"] = extra;
    doc["suites"][name] = entry;
    passed = passed && r.passed();
  }
};

}  // namespace detail

/// Runs one CLI invocation; returns the process exit status.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"Sandwich-preserving extensions of convex operators on finite filtered spaces", "sandwich"};
  app.require_subcommand(1);
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--input", opt.input, "scenario file (JSON)")->required();
    sub->add_option("--output", opt.output, "write the JSON report here");
    sub->add_option("--tol", opt.tol, "comparison tolerance")->check(CLI::PositiveNumber);
  };
  auto* validate = app.add_subcommand("validate", "check operator axioms, sandwich and mM1 conditions");
  auto* extend = app.add_subcommand("extend", "build the time-consistent maximal extension");
  auto* price = app.add_subcommand("price", "price a payoff with the extended system");
  auto* check = app.add_subcommand("check", "run an invariant suite");
  auto* report = app.add_subcommand("report", "everything, in one document");
  for (auto* s : {validate, extend, price, check, report}) add_common(s);
  price->add_option("--from", opt.from, "start level")->required();
  price->add_option("--to", opt.to, "end level")->required();
  price->add_option("--payoff", opt.payoff, "payoff name or comma-separated vector")->required();
  check->add_option("--suite", opt.suite, "suite name")
      ->required()
      ->check(CLI::IsMember({"representation", "sandwich", "cocycle", "refine"}));

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kPass;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  for (auto* s : {validate, extend, price, check, report})
    if (s->parsed()) opt.command = s->get_name();

  if (const char* env = std::getenv("SANDWICH_SEED")) {
    char* end = nullptr;
    opt.seed = std::strtoull(env, &end, 10);
    if (*env == '\0' || *end != '\0') {
      err << "error: SANDWICH_SEED must be a non-negative integer\n";
      return kInputError;
    }
  }

  try {
    const Scenario sc = load_scenario(opt.input);
    detail::Session session(sc, opt, out);
    session.doc["schema_version"] = "1";
    session.doc["command"] = opt.command;
    session.doc["scenario"] = sc.source;
    session.doc["seed"] = opt.seed;
    session.doc["tolerance"] = num(opt.tol);
    session.doc["prices"] = json::array();

    if (opt.command == "validate") {
      session.validate();
    } else if (opt.command == "extend") {
      session.extend();
    } else if (opt.command == "price") {
      session.price(opt.from, opt.to, opt.payoff);
    } else if (opt.command == "check") {
      session.suite(opt.suite);
    } else {
      session.validate();
      // a report is still written when the extension cannot be built
      try {
        session.extend();
        bool priced = false;
        for (const auto& task : sc.tasks)
          if (task.command == "price") {
            session.price(task.from, task.to, task.payoff);
            priced = true;
          }
        if (!priced)
          for (const auto& [name, v] : sc.payoffs) session.price(sc.system.grid.front(), sc.system.grid.back(), name);
        for (const char* s : {"representation", "sandwich", "cocycle"}) session.suite(s);
        if (sc.coarse_grid) session.suite("refine");
      } catch (const PreconditionError& e) {
        out << "\ncheck failed: " << e.what() << '\n';
        session.doc["error"] = e.what();
        session.passed = false;
      }
    }
    session.doc["status"] = session.passed ? "pass" : "fail";
    out << "\n" << (session.passed ? "ALL CHECKS PASSED" : "SOME CHECKS FAILED") << '\n';
    if (!opt.output.empty()) {
      std::ofstream f(opt.output, std::ios::binary);
      if (!f) {
        err << "error: cannot write " << opt.output << '\n';
        return kInputError;
      }
      f << session.doc.dump(2) << '\n';
    }
    return session.passed ? kPass : kCheckFailed;
  } catch (const ScenarioError& e) {
    err << "error at " << e.what() << '\n';
    return kInputError;
  } catch (const PreconditionError& e) {
    err << "check failed: " << e.what() << '\n';
    return kCheckFailed;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
}

inline int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, out, err);
}

}  // namespace sandwich::cli

#endif  // SANDWICH_CLI_HPP
