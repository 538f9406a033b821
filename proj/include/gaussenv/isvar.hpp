#pragma once

#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gaussenv/bounds.hpp"
#include "gaussenv/parallel.hpp"
#include "gaussenv/rng.hpp"

namespace gaussenv {

struct AllWeightsZero : std::runtime_error {
  AllWeightsZero() : std::runtime_error("every importance weight underflowed") {}
};

struct InvalidBounds : std::runtime_error {
  explicit InvalidBounds(const std::string& what) : std::runtime_error(what) {}
};

struct ISConfig {
  ProposalConfig proposal;
  int N = 20;              // samples per estimator
  long long n_runs = 1000; // independent replications
  std::uint64_t seed = 0;  // base seed; run i uses seed + i
  int m_degree = 2;        // moment integrand x^m_degree
  int jobs = 1;
};

struct BoundTriple {
  BoundsReport I;  // moment integral of x^m against p
  BoundsReport Z;  // normalizing constant of p
  BoundsReport J;  // second-moment integral against p^2/q
};

// The three certified integrals the variance enclosure needs. The squared-ratio
// construction throws IllPosedRatio when theta is too small for p.
inline BoundTriple run_bound_triple(const CurvatureBoundedDensity& p, const ProposalConfig& q,
                                    int m_degree, const RefineOptions& opts = {}) {
  CurvatureBoundedDensity ratio = make_squared_ratio_target(p, q);
  BoundTriple out{refine(p, MomentSpec{m_degree}, opts), refine(p, MomentSpec{0}, opts),
                  refine(ratio, MomentSpec{2 * m_degree}, opts)};
  return out;
}

struct VarianceBounds {
  double lower, upper;
};

// Interval-arithmetic enclosure of Var = J/(N Z^2) - (I/Z)^2/N. The raw flag
// reproduces the looser historical form J/(N Z^2) - I^2/N instead.
inline VarianceBounds variance_bounds(const BoundTriple& t, long long N,
                                      bool raw_second_term = false) {
  if (N < 1) throw std::invalid_argument("variance_bounds: N must be >= 1");
  double z_lo = t.Z.lower, z_hi = t.Z.upper;
  double i_lo = t.I.lower, i_hi = t.I.upper;
  double j_lo = t.J.lower, j_hi = t.J.upper;
  if (!(z_lo > 0.0)) throw InvalidBounds("Z lower bound must be positive");
  if (z_hi < z_lo || i_hi < i_lo || j_hi < j_lo)
    throw InvalidBounds("bound pair out of order");
  double n = static_cast<double>(N);
  double t1_lo = std::max(0.0, j_lo) / (n * z_hi * z_hi);
  double t1_hi = j_hi / (n * z_lo * z_lo);
  if (raw_second_term)
    return VarianceBounds{t1_lo - i_hi * i_hi / n, t1_hi - i_lo * i_lo / n};
  double r_lo = std::min(i_lo / z_lo, i_lo / z_hi);
  double r_hi = std::max(i_hi / z_lo, i_hi / z_hi);
  double sq_lo, sq_hi;
  if (r_lo <= 0.0 && r_hi >= 0.0) {
    sq_lo = 0.0;
    sq_hi = std::max(r_lo * r_lo, r_hi * r_hi);
  } else {
    sq_lo = std::min(r_lo * r_lo, r_hi * r_hi);
    sq_hi = std::max(r_lo * r_lo, r_hi * r_hi);
  }
  return VarianceBounds{t1_lo - sq_hi / n, t1_hi - sq_lo / n};
}

struct ISRun {
  double unbiased;   // sum(w m)/(N z_ref)
  double self_norm;  // sum(w m)/sum(w)
  double sum_w;
};

// One importance-sampling replication with N proposal draws; fully determined
// by cfg.seed.
inline ISRun is_sample_run(const CurvatureBoundedDensity& p, const ISConfig& cfg, double z_ref) {
  if (!(z_ref > 0.0)) throw std::invalid_argument("is_sample_run: z_ref must be positive");
  if (cfg.N < 1) throw std::invalid_argument("is_sample_run: N must be >= 1");
  SplitMix64 rng(cfg.seed);
  double sd = std::sqrt(cfg.proposal.theta);
  double sum_w = 0.0, sum_wm = 0.0;
  for (int i = 0; i < cfg.N; ++i) {
    double x = cfg.proposal.mu + sd * std_normal_inv_cdf(rng.uniform01());
    double z = (x - cfg.proposal.mu) / sd;
    double q = inv_sqrt_2pi / sd * std::exp(-0.5 * z * z);
    double w = std::exp(-p.phi(x)) / q;
    double m = 1.0;
    for (int j = 0; j < cfg.m_degree; ++j) m *= x;
    sum_w += w;
    sum_wm += w * m;
  }
  if (sum_w == 0.0) throw AllWeightsZero();
  return ISRun{sum_wm / (cfg.N * z_ref), sum_wm / sum_w, sum_w};
}

struct EmpiricalStats {
  double mean;
  double variance;  // across runs, n_runs-1 divisor
  double mse;       // against ref_moment
  std::vector<double> estimates;
};

inline EmpiricalStats empirical_variance_mse(const CurvatureBoundedDensity& p, const ISConfig& cfg,
                                             double ref_moment, double z_ref) {
  if (cfg.n_runs < 2) throw std::invalid_argument("empirical_variance_mse: need >= 2 runs");
  std::vector<double> est(static_cast<std::size_t>(cfg.n_runs));
  parallel_for(cfg.n_runs, cfg.jobs, [&](long long i) {
    ISConfig run_cfg = cfg;
    run_cfg.seed = cfg.seed + static_cast<std::uint64_t>(i);
    est[static_cast<std::size_t>(i)] = is_sample_run(p, run_cfg, z_ref).unbiased;
  });
  double mean = 0.0;
  for (double v : est) mean += v;
  mean /= static_cast<double>(est.size());
  double var = 0.0, mse = 0.0;
  for (double v : est) {
    var += (v - mean) * (v - mean);
    mse += (v - ref_moment) * (v - ref_moment);
  }
  var /= static_cast<double>(est.size() - 1);
  mse /= static_cast<double>(est.size());
  return EmpiricalStats{mean, var, mse, std::move(est)};
}

struct SweepRow {
  double theta = 0.0;
  bool ok = false;
  std::string error;
  VarianceBounds v{0.0, 0.0};
  std::optional<double> v_empirical;
  double i_lo = 0, i_hi = 0, z_lo = 0, z_hi = 0, j_lo = 0, j_hi = 0;
  int n_i = 0, n_z = 0, n_j = 0;
};

// Variance enclosure per proposal variance. I and Z do not depend on theta and
// are certified once; J is re-certified per row. Ill-posed rows are recorded
// and skipped rather than aborting the sweep.
inline std::vector<SweepRow> theta_sweep(const CurvatureBoundedDensity& p,
                                         const std::vector<double>& thetas, const ISConfig& cfg,
                                         const RefineOptions& opts = {}, bool with_mc = false) {
  BoundsReport rep_i = refine(p, MomentSpec{cfg.m_degree}, opts);
  BoundsReport rep_z = refine(p, MomentSpec{0}, opts);
  std::vector<SweepRow> rows(thetas.size());
  parallel_for(static_cast<long long>(thetas.size()), cfg.jobs, [&](long long idx) {
    SweepRow& row = rows[static_cast<std::size_t>(idx)];
    row.theta = thetas[static_cast<std::size_t>(idx)];
    ProposalConfig q{cfg.proposal.mu, row.theta};
    try {
      CurvatureBoundedDensity ratio = make_squared_ratio_target(p, q);
      BoundsReport rep_j = refine(ratio, MomentSpec{2 * cfg.m_degree}, opts);
      BoundTriple triple{rep_i, rep_z, rep_j};
      row.v = variance_bounds(triple, cfg.N);
      row.i_lo = rep_i.lower;
      row.i_hi = rep_i.upper;
      row.z_lo = rep_z.lower;
      row.z_hi = rep_z.upper;
      row.j_lo = rep_j.lower;
      row.j_hi = rep_j.upper;
      row.n_i = rep_i.n_stop;
      row.n_z = rep_z.n_stop;
      row.n_j = rep_j.n_stop;
      if (with_mc) {
        ISConfig mc = cfg;
        mc.proposal = q;
        mc.jobs = 1;  // rows already run concurrently
        double z_ref = 0.5 * (rep_z.lower + rep_z.upper);
        double ref_m = 0.5 * (rep_i.lower + rep_i.upper) / z_ref;
        row.v_empirical = empirical_variance_mse(p, mc, ref_m, z_ref).variance;
      }
      row.ok = true;
    } catch (const IllPosedRatio& e) {
      row.error = e.what();
    } catch (const InvalidBounds& e) {
      row.error = e.what();
    }
  });
  return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "theta,V_lower,V_upper,V_empirical,I_lower,I_upper,Z_lower,Z_upper,J_lower,J_upper,"
        "n_I,n_Z,n_J\n";
  for (const auto& r : rows) {
    if (!r.ok) continue;
    os << format_double(r.theta) << ',' << format_double(r.v.lower) << ','
       << format_double(r.v.upper) << ',';
    if (r.v_empirical) os << format_double(*r.v_empirical);
    os << ',' << format_double(r.i_lo) << ',' << format_double(r.i_hi) << ','
       << format_double(r.z_lo) << ',' << format_double(r.z_hi) << ',' << format_double(r.j_lo)
       << ',' << format_double(r.j_hi) << ',' << r.n_i << ',' << r.n_z << ',' << r.n_j << '\n';
  }
}

}  // namespace gaussenv
