#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gaussenv/baseline.hpp"
#include "gaussenv/bounds.hpp"
#include "gaussenv/density.hpp"
#include "gaussenv/format.hpp"
#include "gaussenv/isvar.hpp"
#include "gaussenv/oracle.hpp"
#include "gaussenv/rng.hpp"

namespace gaussenv::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 1;
inline constexpr int exit_ill_posed = 2;
inline constexpr int exit_pool_exhausted = 3;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TargetSpec {
  std::string kind = "seeded";  // seeded | logreg | table1
  LogRegInstanceSpec seeded;
  bool seeded_seed_set = false;  // target.seed in the config beats --seed
  LogRegConfig logreg;
  std::vector<std::pair<Table1Family, double>> terms;
};

struct RunConfig {
  TargetSpec target;
  int k = 0;
  double tau = 1e-4;
  bool tau_absolute = false;
  double eps = 1e-6;
  long long ell = 10000;
  double t1 = 1.0;
  double mu_q = 0.0;
  std::vector<double> thetas{1.5};
  int m_degree = 2;
  int n_samples = 20;
  long long n_runs = 1000;
  std::uint64_t seed = 42;
  std::vector<int> budgets{3, 50, 100};
  bool with_mc = false;
  int jobs = 1;
  std::string out_path;      // empty: stdout
  std::string history_path;  // empty: no history export
};

inline Table1Family parse_family(const std::string& name) {
  if (name == "quadratic") return Table1Family::quadratic;
  if (name == "hyperbolic") return Table1Family::hyperbolic;
  if (name == "huber") return Table1Family::huber;
  if (name == "logistic") return Table1Family::logistic;
  if (name == "cauchy") return Table1Family::cauchy;
  throw ConfigError("unknown family '" + name +
                    "' (expected quadratic|hyperbolic|huber|logistic|cauchy)");
}

inline void validate(const RunConfig& rc) {
  if (rc.k < 0) throw ConfigError("k must be >= 0");
  if (!(rc.tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(rc.eps > 0.0 && rc.eps < 1.0)) throw ConfigError("eps must lie in (0,1)");
  if (rc.ell < 1) throw ConfigError("ell must be >= 1");
  if (!std::isfinite(rc.t1)) throw ConfigError("t1 must be finite");
  if (rc.thetas.empty()) throw ConfigError("need at least one theta");
  for (double th : rc.thetas)
    if (!(th > 0.0)) throw ConfigError("theta must be positive, got " + format_double(th));
  if (rc.m_degree < 0) throw ConfigError("m_degree must be >= 0");
  if (rc.n_samples < 1) throw ConfigError("N must be >= 1");
  if (rc.n_runs < 2) throw ConfigError("n_runs must be >= 2");
  if (rc.jobs < 1) throw ConfigError("jobs must be >= 1");
  if (rc.budgets.empty()) throw ConfigError("need at least one budget");
  for (int b : rc.budgets)
    if (b < 2) throw ConfigError("budgets must be >= 2");
  const TargetSpec& t = rc.target;
  if (t.kind == "seeded") {
    if (t.seeded.J < 1) throw ConfigError("target.J must be >= 1");
    if (!(t.seeded.s > 0.0)) throw ConfigError("target.s must be positive");
    if (!(t.seeded.A > 0.0)) throw ConfigError("target.A must be positive");
    if (!(t.seeded.w_lo <= t.seeded.w_hi)) throw ConfigError("target.w_lo must be <= target.w_hi");
  } else if (t.kind == "logreg") {
    if (t.logreg.labels.empty()) throw ConfigError("target.labels must be nonempty");
    if (t.logreg.labels.size() != t.logreg.features.size())
      throw ConfigError("target.labels and target.features must have equal length");
    for (double y : t.logreg.labels)
      if (y != 1.0 && y != -1.0) throw ConfigError("labels must be +1 or -1");
    if (!(t.logreg.s > 0.0)) throw ConfigError("target.s must be positive");
    if (!(t.logreg.A > 0.0)) throw ConfigError("target.A must be positive");
  } else if (t.kind == "table1") {
    if (t.terms.empty()) throw ConfigError("target.terms must be nonempty");
    for (const auto& [fam, delta] : t.terms) {
      (void)fam;
      if (!(delta > 0.0)) throw ConfigError("term delta must be positive");
    }
  } else {
    throw ConfigError("unknown target kind '" + t.kind + "' (expected seeded|logreg|table1)");
  }
}

// Fills rc from a parsed JSON document; unknown keys are rejected so typos
// surface instead of silently reverting to defaults.
inline void apply_json(RunConfig& rc, const nlohmann::json& j) {
  auto check_keys = [](const nlohmann::json& node, std::initializer_list<const char*> allowed,
                       const std::string& where) {
    for (const auto& item : node.items()) {
      bool known = false;
      for (const char* key : allowed)
        if (item.key() == key) known = true;
      if (!known) throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
  };
  try {
    check_keys(j,
               {"target", "k", "tau", "tau_absolute", "eps", "ell", "t1", "proposal", "is",
                "budgets", "seed", "jobs"},
               "config");
    if (j.contains("target")) {
      const auto& t = j.at("target");
      rc.target.kind = t.value("kind", std::string("seeded"));
      if (rc.target.kind == "seeded") {
        check_keys(t, {"kind", "seed", "J", "s", "A", "w_lo", "w_hi"}, "target");
        if (t.contains("seed")) {
          rc.target.seeded.seed = t.at("seed").get<std::uint64_t>();
          rc.target.seeded_seed_set = true;
        }
        rc.target.seeded.J = t.value("J", rc.target.seeded.J);
        rc.target.seeded.s = t.value("s", rc.target.seeded.s);
        rc.target.seeded.A = t.value("A", rc.target.seeded.A);
        rc.target.seeded.w_lo = t.value("w_lo", rc.target.seeded.w_lo);
        rc.target.seeded.w_hi = t.value("w_hi", rc.target.seeded.w_hi);
      } else if (rc.target.kind == "logreg") {
        check_keys(t, {"kind", "labels", "features", "s", "A"}, "target");
        t.at("labels").get_to(rc.target.logreg.labels);
        t.at("features").get_to(rc.target.logreg.features);
        rc.target.logreg.s = t.value("s", rc.target.logreg.s);
        rc.target.logreg.A = t.value("A", rc.target.logreg.A);
      } else if (rc.target.kind == "table1") {
        check_keys(t, {"kind", "terms"}, "target");
        rc.target.terms.clear();
        for (const auto& term : t.at("terms")) {
          check_keys(term, {"family", "delta"}, "target.terms");
          rc.target.terms.emplace_back(parse_family(term.at("family").get<std::string>()),
                                       term.value("delta", 1.0));
        }
      }
    }
    rc.k = j.value("k", rc.k);
    rc.tau = j.value("tau", rc.tau);
    rc.tau_absolute = j.value("tau_absolute", rc.tau_absolute);
    rc.eps = j.value("eps", rc.eps);
    rc.ell = j.value("ell", rc.ell);
    rc.t1 = j.value("t1", rc.t1);
    if (j.contains("proposal")) {
      const auto& p = j.at("proposal");
      check_keys(p, {"mu", "theta", "thetas"}, "proposal");
      rc.mu_q = p.value("mu", rc.mu_q);
      if (p.contains("theta") && p.contains("thetas"))
        throw ConfigError("proposal: give either theta or thetas, not both");
      if (p.contains("theta")) rc.thetas = {p.at("theta").get<double>()};
      if (p.contains("thetas")) p.at("thetas").get_to(rc.thetas);
    }
    if (j.contains("is")) {
      const auto& s = j.at("is");
      check_keys(s, {"N", "n_runs", "m_degree"}, "is");
      rc.n_samples = s.value("N", rc.n_samples);
      rc.n_runs = s.value("n_runs", rc.n_runs);
      rc.m_degree = s.value("m_degree", rc.m_degree);
    }
    if (j.contains("budgets")) j.at("budgets").get_to(rc.budgets);
    rc.seed = j.value("seed", rc.seed);
    rc.jobs = j.value("jobs", rc.jobs);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline void load_config_file(RunConfig& rc, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  apply_json(rc, j);
}

// The dataset stream is derived from the base seed unless the config pinned an
// explicit target seed, so --seed alone reproduces a whole experiment.
inline CurvatureBoundedDensity build_target(const RunConfig& rc) {
  const TargetSpec& t = rc.target;
  if (t.kind == "seeded") {
    LogRegInstanceSpec spec = t.seeded;
    if (!t.seeded_seed_set) spec.seed = rc.seed;
    return make_logreg_target(make_seeded_logreg(spec));
  }
  if (t.kind == "logreg") return make_logreg_target(t.logreg);
  std::vector<CurvatureBoundedDensity> parts;
  parts.reserve(t.terms.size());
  for (const auto& [fam, delta] : t.terms) parts.push_back(make_table1(fam, delta));
  if (parts.size() == 1) return std::move(parts.front());
  return sum_densities(std::move(parts));
}

inline RefineOptions refine_options(const RunConfig& rc) {
  RefineOptions o;
  o.tau = rc.tau;
  o.tau_absolute = rc.tau_absolute;
  o.t1 = rc.t1;
  o.eps = rc.eps;
  o.ell = rc.ell;
  return o;
}

namespace detail {

inline std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty()) return std::cout;
  file.open(path, std::ios::binary);
  if (!file) throw ConfigError("cannot open output file '" + path + "'");
  return file;
}

inline int exit_for(RefineStatus s) {
  return s == RefineStatus::pool_exhausted ? exit_pool_exhausted : exit_ok;
}

}  // namespace detail

inline int cmd_bound(const RunConfig& rc) {
  CurvatureBoundedDensity d = build_target(rc);
  BoundsReport rep = refine(d, MomentSpec{rc.k}, refine_options(rc));
  std::ofstream file;
  std::ostream& out = detail::open_out(rc.out_path, file);
  out << "k = " << rc.k << '\n'
      << "lower = " << format_double(rep.lower) << '\n'
      << "upper = " << format_double(rep.upper) << '\n'
      << "gap = " << format_double(rep.gap) << '\n'
      << "n_stop = " << rep.n_stop << '\n'
      << "status = " << to_string(rep.status) << '\n';
  if (!rc.history_path.empty()) {
    std::ofstream h(rc.history_path, std::ios::binary);
    if (!h) throw ConfigError("cannot open history file '" + rc.history_path + "'");
    write_history_csv(h, rep.history);
  }
  return detail::exit_for(rep.status);
}

inline int cmd_isvar(const RunConfig& rc) {
  CurvatureBoundedDensity p = build_target(rc);
  ISConfig cfg;
  cfg.proposal = ProposalConfig{rc.mu_q, rc.thetas.front()};
  cfg.N = rc.n_samples;
  cfg.n_runs = rc.n_runs;
  cfg.seed = derive_seed(rc.seed, "mc");
  cfg.m_degree = rc.m_degree;
  cfg.jobs = rc.jobs;
  std::vector<SweepRow> rows = theta_sweep(p, rc.thetas, cfg, refine_options(rc), rc.with_mc);
  int n_ok = 0;
  for (const auto& r : rows) {
    if (r.ok)
      ++n_ok;
    else
      std::cerr << "theta=" << format_double(r.theta) << ": " << r.error << '\n';
  }
  std::ofstream file;
  std::ostream& out = detail::open_out(rc.out_path, file);
  write_sweep_csv(out, rows);
  return n_ok > 0 ? exit_ok : exit_ill_posed;
}

inline int cmd_mc(const RunConfig& rc) {
  CurvatureBoundedDensity p = build_target(rc);
  ProposalConfig q{rc.mu_q, rc.thetas.front()};
  RefineOptions opts = refine_options(rc);
  BoundTriple triple = run_bound_triple(p, q, rc.m_degree, opts);
  VarianceBounds vb = variance_bounds(triple, rc.n_samples);
  ISConfig cfg;
  cfg.proposal = q;
  cfg.N = rc.n_samples;
  cfg.n_runs = rc.n_runs;
  cfg.seed = derive_seed(rc.seed, "mc");
  cfg.m_degree = rc.m_degree;
  cfg.jobs = rc.jobs;
  double z_ref = 0.5 * (triple.Z.lower + triple.Z.upper);
  double ref_moment = 0.5 * (triple.I.lower + triple.I.upper) / z_ref;
  EmpiricalStats stats = empirical_variance_mse(p, cfg, ref_moment, z_ref);
  std::ofstream file;
  std::ostream& out = detail::open_out(rc.out_path, file);
  out << "theta = " << format_double(q.theta) << '\n'
      << "N = " << rc.n_samples << '\n'
      << "n_runs = " << rc.n_runs << '\n'
      << "V_lower = " << format_double(vb.lower) << '\n'
      << "V_upper = " << format_double(vb.upper) << '\n'
      << "V_empirical = " << format_double(stats.variance) << '\n'
      << "mean = " << format_double(stats.mean) << '\n'
      << "mse = " << format_double(stats.mse) << '\n'
      << "ref_moment = " << format_double(ref_moment) << '\n';
  return exit_ok;
}

struct CompareRow {
  std::string integral;
  std::string method;
  int budget;
  double lower, upper;
  double abs_err, rel_err;  // midpoint against the quadrature reference
  double reference;
};

inline void write_compare_csv(std::ostream& os, const std::vector<CompareRow>& rows) {
  os << "integral,method,budget,lower,upper,abs_err,rel_err,oracle\n";
  for (const auto& r : rows) {
    os << r.integral << ',' << r.method << ',' << r.budget << ',' << format_double(r.lower) << ','
       << format_double(r.upper) << ',' << format_double(r.abs_err) << ','
       << format_double(r.rel_err) << ',' << format_double(r.reference) << '\n';
  }
}

// Head-to-head accuracy at matched point budgets: our envelopes on the whole
// line versus polynomial panel bounds of orders 0 and 1 on the working compact.
inline int cmd_compare(const RunConfig& rc) {
  CurvatureBoundedDensity d = build_target(rc);
  Interval compact = compact_interval(d, rc.t1, rc.eps);
  double inf = std::numeric_limits<double>::infinity();
  std::vector<CompareRow> rows;
  std::vector<std::pair<std::string, int>> integrals{{"Z", 0}, {"I", rc.m_degree}};
  for (const auto& [name, k] : integrals) {
    int kk = k;
    QuadResult ref = integrate(
        [&](double x) { return std::pow(x, kk) * eval_pi(d, x); }, -inf, inf, 1e-12, 1e-300);
    DifferentiableIntegrand f = kk == 0 ? make_pi_integrand(d) : make_moment_integrand(d, kk);
    auto push = [&](const std::string& method, int budget, double lo, double hi) {
      double mid = 0.5 * (lo + hi);
      double abs_err = std::abs(mid - ref.value);
      rows.push_back(CompareRow{name, method, budget, lo, hi, abs_err,
                                abs_err / std::abs(ref.value), ref.value});
    };
    for (int budget : rc.budgets) {
      RefineOptions o = refine_options(rc);
      o.max_points = budget;
      o.tau = 1e-300;  // run to the budget unless the gap collapses exactly
      o.tau_absolute = true;
      BoundsReport rep = refine(d, MomentSpec{kk}, o);
      push("gaussian_envelope", budget, rep.lower, rep.upper);
      for (int order : {0, 1}) {
        EvansResult er = evans_compound(f, compact, budget, order);
        push("evans_d" + std::to_string(order), budget, er.lower, er.upper);
      }
    }
  }
  std::ofstream file;
  std::ostream& out = detail::open_out(rc.out_path, file);
  write_compare_csv(out, rows);
  return exit_ok;
}

// Option handles for the flags that may override config-file values.
struct SubFlags {
  CLI::App* sub = nullptr;
  CLI::Option* config = nullptr;
  CLI::Option* k = nullptr;
  CLI::Option* tau = nullptr;
  CLI::Option* tau_abs = nullptr;
  CLI::Option* eps = nullptr;
  CLI::Option* ell = nullptr;
  CLI::Option* t1 = nullptr;
  CLI::Option* mu = nullptr;
  CLI::Option* theta = nullptr;
  CLI::Option* m_degree = nullptr;
  CLI::Option* n_samples = nullptr;
  CLI::Option* n_runs = nullptr;
  CLI::Option* budgets = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* jobs = nullptr;
  CLI::Option* mc = nullptr;
};

inline int run(int argc, const char* const* argv) {
  CLI::App app{"certified bounds for one-dimensional moment integrals via Gaussian envelopes"};
  app.require_subcommand(1);

  RunConfig flags;  // receives command-line values
  std::string config_path;

  auto add_flags = [&](CLI::App* sub) {
    SubFlags f;
    f.sub = sub;
    f.config = sub->add_option("--config", config_path, "JSON config file");
    f.k = sub->add_option("--k", flags.k, "moment degree of the bounded integral");
    f.tau = sub->add_option("--tau", flags.tau, "stopping precision (relative by default)");
    f.tau_abs = sub->add_flag("--absolute-tau", flags.tau_absolute,
                              "interpret tau as an absolute gap");
    f.eps = sub->add_option("--eps", flags.eps, "tail mass defining the working compact");
    f.ell = sub->add_option("--ell", flags.ell, "target candidate-pool size");
    f.t1 = sub->add_option("--t1", flags.t1, "initial tangency point");
    f.mu = sub->add_option("--mu", flags.mu_q, "proposal mean");
    f.theta = sub->add_option("--theta", flags.thetas, "proposal variance(s)");
    f.m_degree = sub->add_option("--m-degree", flags.m_degree, "degree of the moment map m(x)");
    f.n_samples = sub->add_option("--N", flags.n_samples, "samples per estimator");
    f.n_runs = sub->add_option("--runs", flags.n_runs, "independent estimator replications");
    f.budgets = sub->add_option("--budgets", flags.budgets, "tangency/compound point budgets");
    f.seed = sub->add_option("--seed", flags.seed, "base seed for dataset and Monte-Carlo");
    f.jobs = sub->add_option("--jobs", flags.jobs, "worker threads");
    f.mc = sub->add_flag("--mc", flags.with_mc, "append the empirical-variance column");
    sub->add_option("--out", flags.out_path, "output file (default stdout)");
    sub->add_option("--history", flags.history_path, "per-iteration history CSV path");
    return f;
  };

  SubFlags f_bound = add_flags(
      app.add_subcommand("bound", "certified lower/upper bounds for one moment integral"));
  SubFlags f_isvar = add_flags(
      app.add_subcommand("isvar", "variance-bound sweep over proposal variances"));
  SubFlags f_compare = add_flags(
      app.add_subcommand("compare", "accuracy comparison against polynomial panel bounds"));
  SubFlags f_mc = add_flags(
      app.add_subcommand("mc", "Monte-Carlo validation of the variance enclosure"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_config;
  }

  const SubFlags* active = nullptr;
  for (const SubFlags* f : {&f_bound, &f_isvar, &f_compare, &f_mc})
    if (f->sub->parsed()) active = f;

  try {
    RunConfig rc;
    if (!config_path.empty()) load_config_file(rc, config_path);
    auto overlay = [](const CLI::Option* opt, auto& dst, const auto& src) {
      if (opt != nullptr && opt->count() > 0) dst = src;
    };
    overlay(active->k, rc.k, flags.k);
    overlay(active->tau, rc.tau, flags.tau);
    overlay(active->tau_abs, rc.tau_absolute, flags.tau_absolute);
    overlay(active->eps, rc.eps, flags.eps);
    overlay(active->ell, rc.ell, flags.ell);
    overlay(active->t1, rc.t1, flags.t1);
    overlay(active->mu, rc.mu_q, flags.mu_q);
    overlay(active->theta, rc.thetas, flags.thetas);
    overlay(active->m_degree, rc.m_degree, flags.m_degree);
    overlay(active->n_samples, rc.n_samples, flags.n_samples);
    overlay(active->n_runs, rc.n_runs, flags.n_runs);
    overlay(active->budgets, rc.budgets, flags.budgets);
    overlay(active->seed, rc.seed, flags.seed);
    overlay(active->jobs, rc.jobs, flags.jobs);
    overlay(active->mc, rc.with_mc, flags.with_mc);
    rc.out_path = flags.out_path;
    rc.history_path = flags.history_path;
    validate(rc);

    if (active == &f_bound) return cmd_bound(rc);
    if (active == &f_isvar) return cmd_isvar(rc);
    if (active == &f_compare) return cmd_compare(rc);
    return cmd_mc(rc);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const IllPosedRatio& e) {
    std::cerr << "ill-posed target: " << e.what() << '\n';
    return exit_ill_posed;
  } catch (const NuUnavailable& e) {
    std::cerr << "ill-posed target: " << e.what() << '\n';
    return exit_ill_posed;
  } catch (const InvalidBounds& e) {
    std::cerr << "ill-posed target: " << e.what() << '\n';
    return exit_ill_posed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_config;
  }
}

}  // namespace gaussenv::cli
