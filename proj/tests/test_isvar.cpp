#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "gaussenv/density.hpp"
#include "gaussenv/isvar.hpp"
#include "gaussenv/rng.hpp"
#include "test_util.hpp"

using namespace gaussenv;
using Catch::Approx;

namespace {

BoundsReport make_report(double lo, double hi) {
  BoundsReport r;
  r.lower = lo;
  r.upper = hi;
  r.gap = hi - lo;
  return r;
}

BoundTriple make_triple(double i_lo, double i_hi, double z_lo, double z_hi, double j_lo,
                        double j_hi) {
  return BoundTriple{make_report(i_lo, i_hi), make_report(z_lo, z_hi),
                     make_report(j_lo, j_hi)};
}

}  // namespace

TEST_CASE("bound triple on a matched gaussian", "[isvar]") {
  auto quad = make_table1(Table1Family::quadratic);
  RefineOptions o;
  o.tau = 1e-6;
  auto triple = run_bound_triple(quad, ProposalConfig{0.0, 1.0}, 0, o);
  double two_pi = sqrt_2pi * sqrt_2pi;
  REQUIRE(triple.Z.lower == Approx(sqrt_2pi).epsilon(1e-12));
  REQUIRE(triple.Z.upper == Approx(sqrt_2pi).epsilon(1e-12));
  REQUIRE(triple.I.lower == Approx(sqrt_2pi).epsilon(1e-12));
  REQUIRE(triple.J.lower == Approx(two_pi).epsilon(1e-12));
  REQUIRE(triple.J.upper == Approx(two_pi).epsilon(1e-12));

  REQUIRE_THROWS_AS(run_bound_triple(testutil::single_obs_instance(1.2),
                                     ProposalConfig{0.0, 0.5}, 2, o),
                    IllPosedRatio);
}

TEST_CASE("variance enclosure endpoints", "[isvar]") {
  auto degen = make_triple(2.641e-3, 2.641e-3, 2.647e-3, 2.647e-3, 1.260e-5, 1.260e-5);
  auto v = variance_bounds(degen, 20);
  REQUIRE(v.lower == Approx(0.04014152209720851).epsilon(1e-12));
  REQUIRE(v.upper == Approx(0.04014152209720851).epsilon(1e-12));
  REQUIRE(v.lower == Approx(4.016e-2).epsilon(1e-3));

  // zero moment interval leaves only the J term
  auto j_only = make_triple(0.0, 0.0, 0.5, 0.8, 0.04, 0.04);
  auto vj = variance_bounds(j_only, 10);
  REQUIRE(vj.lower == 0.04 / (10.0 * 0.8 * 0.8));
  REQUIRE(vj.upper == 0.04 / (10.0 * 0.5 * 0.5));

  // the historical second-moment form on a degenerate triple
  auto raw = variance_bounds(degen, 20, true);
  double want = 1.260e-5 / (20.0 * 2.647e-3 * 2.647e-3) - 2.641e-3 * 2.641e-3 / 20.0;
  REQUIRE(raw.lower == Approx(want).epsilon(1e-12));
  REQUIRE(raw.upper == Approx(want).epsilon(1e-12));

  REQUIRE_THROWS_AS(variance_bounds(make_triple(0, 1, -0.1, 1, 0, 1), 20), InvalidBounds);
  REQUIRE_THROWS_AS(variance_bounds(make_triple(0, 1, 0.0, 1, 0, 1), 20), InvalidBounds);
  REQUIRE_THROWS_AS(variance_bounds(make_triple(1, 0, 0.5, 1, 0, 1), 20), InvalidBounds);
  REQUIRE_THROWS_AS(variance_bounds(make_triple(0, 1, 0.5, 1, 0, 1), 0),
                    std::invalid_argument);
}

TEST_CASE("variance enclosure is sound", "[isvar]") {
  SplitMix64 rng(2024u);
  const long long N = 20;
  for (int trial = 0; trial < 1000; ++trial) {
    double z_lo = rng.uniform(0.1, 2.0);
    double z_hi = z_lo * (1.0 + rng.uniform(0.0, 0.5));
    double i_lo = rng.uniform(-1.0, 1.0);
    double i_hi = i_lo + rng.uniform(0.0, 1.0);
    double j_lo = rng.uniform(0.0, 1.0);
    double j_hi = j_lo * (1.0 + rng.uniform(0.0, 0.5));
    auto t = make_triple(i_lo, i_hi, z_lo, z_hi, j_lo, j_hi);
    auto v = variance_bounds(t, N);
    REQUIRE(v.lower <= v.upper + 1e-15);

    for (int a = 0; a < 5; ++a) {
      for (int b = 0; b < 5; ++b) {
        for (int c = 0; c < 5; ++c) {
          double z = z_lo + (z_hi - z_lo) * a / 4.0;
          double i = i_lo + (i_hi - i_lo) * b / 4.0;
          double j = j_lo + (j_hi - j_lo) * c / 4.0;
          double scalar = j / (N * z * z) - (i / z) * (i / z) / N;
          REQUIRE(scalar >= v.lower - 1e-12);
          REQUIRE(scalar <= v.upper + 1e-12);
        }
      }
    }

    // widening the inputs never narrows the output
    auto wide = make_triple(i_lo - 0.1, i_hi + 0.1, z_lo * 0.9, z_hi * 1.1, j_lo * 0.9,
                            j_hi * 1.1);
    auto vw = variance_bounds(wide, N);
    REQUIRE(vw.lower <= v.lower + 1e-15);
    REQUIRE(vw.upper >= v.upper - 1e-15);
  }
}

TEST_CASE("sampling runs", "[isvar]") {
  auto quad = make_table1(Table1Family::quadratic);
  ISConfig cfg;
  cfg.proposal = ProposalConfig{0.0, 1.0};
  cfg.N = 50;
  cfg.seed = 7;
  cfg.m_degree = 2;

  // matched proposal makes the weights constant, so both estimators agree
  auto run = is_sample_run(quad, cfg, sqrt_2pi);
  REQUIRE(run.unbiased == Approx(run.self_norm).epsilon(1e-12));
  REQUIRE(run.sum_w == Approx(50.0 * sqrt_2pi).epsilon(1e-12));

  auto again = is_sample_run(quad, cfg, sqrt_2pi);
  REQUIRE(run.unbiased == again.unbiased);
  REQUIRE(run.sum_w == again.sum_w);

  cfg.seed = 8;
  auto other = is_sample_run(quad, cfg, sqrt_2pi);
  REQUIRE(run.unbiased != other.unbiased);

  // a proposal far from all target mass underflows every weight
  ISConfig far = cfg;
  far.proposal = ProposalConfig{200.0, 1.0};
  REQUIRE_THROWS_AS(is_sample_run(quad, far, sqrt_2pi), AllWeightsZero);

  REQUIRE_THROWS_AS(is_sample_run(quad, cfg, 0.0), std::invalid_argument);
}

TEST_CASE("replicated statistics", "[isvar]") {
  auto quad = make_table1(Table1Family::quadratic);
  ISConfig cfg;
  cfg.proposal = ProposalConfig{0.0, 1.0};
  cfg.N = 20;
  cfg.n_runs = 500;
  cfg.seed = 11;
  cfg.m_degree = 0;

  // matched zeroth moment: every replication returns 1 up to the rounding of
  // the per-sample weight ratio, so the spread is ulp-squared noise
  auto stats = empirical_variance_mse(quad, cfg, 1.0, sqrt_2pi);
  REQUIRE(stats.estimates.size() == 500);
  REQUIRE(stats.variance == Approx(0.0).margin(1e-31));
  REQUIRE(stats.mean == Approx(1.0).epsilon(1e-13));
  REQUIRE(stats.mse == Approx(0.0).margin(1e-26));

  // thread count never changes the numbers
  cfg.m_degree = 2;
  cfg.jobs = 1;
  auto serial = empirical_variance_mse(quad, cfg, 1.0, sqrt_2pi);
  cfg.jobs = 4;
  auto parallel = empirical_variance_mse(quad, cfg, 1.0, sqrt_2pi);
  REQUIRE(serial.estimates == parallel.estimates);
  REQUIRE(serial.variance == parallel.variance);

  REQUIRE_THROWS_AS([&] {
    ISConfig bad = cfg;
    bad.n_runs = 1;
    empirical_variance_mse(quad, bad, 1.0, sqrt_2pi);
  }(), std::invalid_argument);
}

TEST_CASE("estimator mean matches the certified moment", "[isvar]") {
  auto d = testutil::default_instance(12u);
  RefineOptions o;
  o.tau = 1e-6;
  auto rep_i = refine(d, MomentSpec{2}, o);
  auto rep_z = refine(d, MomentSpec{0}, o);
  double z_ref = 0.5 * (rep_z.lower + rep_z.upper);
  double ref_m = 0.5 * (rep_i.lower + rep_i.upper) / z_ref;

  ISConfig cfg;
  cfg.proposal = ProposalConfig{0.0, 1.5};
  cfg.N = 20;
  cfg.n_runs = 20000;
  cfg.seed = 13;
  cfg.m_degree = 2;
  cfg.jobs = 2;
  auto stats = empirical_variance_mse(d, cfg, ref_m, z_ref);
  double se = std::sqrt(stats.variance / static_cast<double>(cfg.n_runs));
  REQUIRE(std::abs(stats.mean - ref_m) <= 4.5 * se);
}

TEST_CASE("proposal variance sweep", "[isvar]") {
  auto p = testutil::single_obs_instance(1.2);
  ISConfig cfg;
  cfg.proposal = ProposalConfig{0.0, 1.0};
  cfg.N = 20;
  cfg.m_degree = 2;
  RefineOptions o;
  o.tau = 1e-4;

  auto rows = theta_sweep(p, {1.5}, cfg, o);
  REQUIRE(rows.size() == 1);
  REQUIRE(rows[0].ok);
  auto direct = variance_bounds(run_bound_triple(p, ProposalConfig{0.0, 1.5}, 2, o), 20);
  REQUIRE(rows[0].v.lower == direct.lower);
  REQUIRE(rows[0].v.upper == direct.upper);

  auto mixed = theta_sweep(p, {0.5, 1.5}, cfg, o);
  REQUIRE(mixed.size() == 2);
  REQUIRE(mixed[0].theta == 0.5);
  REQUIRE_FALSE(mixed[0].ok);
  REQUIRE_FALSE(mixed[0].error.empty());
  REQUIRE(mixed[1].ok);

  // tighter proposals blow up the certified variance toward the threshold
  auto ramp = theta_sweep(p, {0.8, 0.9, 1.0}, cfg, o);
  REQUIRE(ramp[0].v.upper > ramp[1].v.upper);
  REQUIRE(ramp[1].v.upper > ramp[2].v.upper);

  auto with_mc = theta_sweep(p, {1.5}, cfg, o, true);
  REQUIRE(with_mc[0].v_empirical.has_value());
  REQUIRE(*with_mc[0].v_empirical > 0.0);
  REQUIRE_FALSE(rows[0].v_empirical.has_value());
}

TEST_CASE("sweep serialization", "[isvar]") {
  auto p = testutil::single_obs_instance(1.2);
  ISConfig cfg;
  cfg.proposal = ProposalConfig{0.0, 1.0};
  cfg.N = 20;
  cfg.m_degree = 2;
  RefineOptions o;
  o.tau = 1e-3;
  auto rows = theta_sweep(p, {0.5, 1.5, 2.0}, cfg, o);

  std::ostringstream os;
  write_sweep_csv(os, rows);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  REQUIRE(line ==
          "theta,V_lower,V_upper,V_empirical,I_lower,I_upper,Z_lower,Z_upper,J_lower,"
          "J_upper,n_I,n_Z,n_J");
  std::vector<std::string> body;
  while (std::getline(is, line)) body.push_back(line);
  REQUIRE(body.size() == 2);  // the ill-posed 0.5 row is dropped
  REQUIRE(body[0].substr(0, 4) == "1.5,");
  // no Monte Carlo column content without with_mc
  REQUIRE(body[0].find(",,") != std::string::npos);
}
