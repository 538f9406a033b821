#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "gaussenv/density.hpp"
#include "gaussenv/envelope.hpp"
#include "gaussenv/gaussmath.hpp"
#include "gaussenv/rng.hpp"
#include "test_util.hpp"

using namespace gaussenv;
using Catch::Approx;

namespace {

std::vector<double> sorted_points(SplitMix64& rng, int n, double lo, double hi) {
  std::vector<double> ts;
  for (int i = 0; i < n; ++i) ts.push_back(rng.uniform(lo, hi));
  std::sort(ts.begin(), ts.end());
  return ts;
}

PiecewiseGaussian minorant_envelope(const CurvatureBoundedDensity& d,
                                    const std::vector<double>& ts) {
  std::vector<UnnormGaussian> fs;
  for (double t : ts) fs.push_back(tangent_minorant(d, t));
  return upper_envelope(std::move(fs));
}

PiecewiseGaussian majorant_envelope(const CurvatureBoundedDensity& d,
                                    const std::vector<double>& ts) {
  std::vector<UnnormGaussian> fs;
  for (double t : ts) fs.push_back(tangent_majorant(d, t));
  return lower_envelope(std::move(fs));
}

}  // namespace

TEST_CASE("tangent curves, quadratic target", "[envelope]") {
  auto quad = make_table1(Table1Family::quadratic);
  for (double t : {0.0, 2.0, -3.5}) {
    auto lo = tangent_minorant(quad, t);
    REQUIRE(lo.scale == Approx(sqrt_2pi).epsilon(1e-14));
    REQUIRE(lo.mu == Approx(0.0).margin(1e-14));
    REQUIRE(lo.sigma == 1.0);
    REQUIRE(lo.tangent == t);
    auto hi = tangent_majorant(quad, t);
    REQUIRE(hi.scale == Approx(lo.scale).epsilon(1e-14));
    REQUIRE(hi.mu == Approx(lo.mu).margin(1e-14));
    REQUIRE(hi.sigma == lo.sigma);
  }
}

TEST_CASE("tangent curves, logistic regression", "[envelope]") {
  auto d = testutil::single_obs_instance(1.2);
  auto lo = tangent_minorant(d, 0.0);
  REQUIRE(lo.sigma == Approx(1.0289915108550530).epsilon(1e-12));
  REQUIRE(lo.mu == Approx(-0.5294117647058824).epsilon(1e-12));

  auto hi = tangent_majorant(d, 0.0);
  REQUIRE(hi.sigma == Approx(1.2).epsilon(1e-14));

  // minorant below pi, majorant above, tangency at t
  SplitMix64 rng(31u);
  for (double t : {-2.0, 0.0, 0.7, 3.1}) {
    auto g_lo = tangent_minorant(d, t);
    auto g_hi = tangent_majorant(d, t);
    double pi_t = eval_pi(d, t);
    REQUIRE(g_lo(t) == Approx(pi_t).epsilon(1e-12));
    REQUIRE(g_hi(t) == Approx(pi_t).epsilon(1e-12));
    for (int i = 0; i < 1000; ++i) {
      double x = rng.uniform(-10.0, 10.0);
      double pi_x = eval_pi(d, x);
      REQUIRE(g_lo(x) <= pi_x * (1.0 + 1e-12));
      REQUIRE(g_hi(x) >= pi_x * (1.0 - 1e-12));
    }
  }
}

TEST_CASE("tangent curves, concave-shouldered target", "[envelope]") {
  // standalone cauchy: the curvature floor is negative, so no tangent
  // Gaussian can cap it, while the lower curve is unaffected
  auto c = make_table1(Table1Family::cauchy, 2.0);
  REQUIRE_THROWS_AS(tangent_majorant(c, 0.0), NuUnavailable);
  REQUIRE_NOTHROW(tangent_minorant(c, 0.0));

  // paired with a quadratic the floor turns positive, and the majorant must
  // hold even where the cauchy term bends concave (|x| > delta)
  std::vector<CurvatureBoundedDensity> parts;
  parts.push_back(make_table1(Table1Family::quadratic));
  parts.push_back(make_table1(Table1Family::cauchy, 2.0));
  auto d = sum_densities(std::move(parts));
  SplitMix64 rng(37u);
  for (double t : {-4.0, 0.0, 3.0, 5.0}) {
    auto g_lo = tangent_minorant(d, t);
    auto g_hi = tangent_majorant(d, t);
    double pi_t = eval_pi(d, t);
    REQUIRE(g_lo(t) == Approx(pi_t).epsilon(1e-12));
    REQUIRE(g_hi(t) == Approx(pi_t).epsilon(1e-12));
    for (int i = 0; i < 1000; ++i) {
      double x = rng.uniform(-25.0, 25.0);
      double pi_x = eval_pi(d, x);
      REQUIRE(g_lo(x) <= pi_x * (1.0 + 1e-12));
      REQUIRE(g_hi(x) >= pi_x * (1.0 - 1e-12));
    }
  }
}

TEST_CASE("gaussian crossings", "[envelope]") {
  UnnormGaussian left{1.0, -1.0, 1.0, 0.0};
  UnnormGaussian right{1.0, 1.0, 1.0, 0.0};
  auto roots = intersections(left, right);
  REQUIRE(roots.size() == 1);
  REQUIRE(roots[0] == Approx(0.0).margin(1e-14));

  UnnormGaussian narrow{1.0, 0.0, 1.0, 0.0};
  UnnormGaussian wide{1.0, 0.0, 2.0, 0.0};
  roots = intersections(narrow, wide);
  REQUIRE(roots.size() == 2);
  REQUIRE(roots[0] == Approx(-roots[1]).epsilon(1e-12));
  REQUIRE(narrow(roots[0]) == Approx(wide(roots[0])).epsilon(1e-10));
  REQUIRE(narrow(roots[1]) == Approx(wide(roots[1])).epsilon(1e-10));

  UnnormGaussian low{0.1, 0.0, 1.0, 0.0};
  REQUIRE(intersections(narrow, low).empty());

  REQUIRE_THROWS_AS(intersections(narrow, narrow), IdenticalFunctions);
}

TEST_CASE("envelope structure", "[envelope]") {
  UnnormGaussian a{1.0, -1.0, 1.0, -1.0};
  UnnormGaussian b{1.0, 1.0, 1.0, 1.0};

  auto single = upper_envelope({a});
  REQUIRE(single.breakpoints.empty());
  REQUIRE(single.pieces.size() == 1);

  auto pair_hi = upper_envelope({a, b});
  REQUIRE(pair_hi.breakpoints.size() == 1);
  REQUIRE(pair_hi.pieces.size() == 2);
  REQUIRE(pair_hi.breakpoints[0] == Approx(0.0).margin(1e-12));
  // upper envelope picks the left bump left of 0
  REQUIRE(pair_hi.piece_at(-3.0).mu == -1.0);
  REQUIRE(pair_hi.piece_at(3.0).mu == 1.0);

  auto pair_lo = lower_envelope({a, b});
  REQUIRE(pair_lo.breakpoints.size() == 1);
  REQUIRE(pair_lo.piece_at(-3.0).mu == 1.0);
  REQUIRE(pair_lo.piece_at(3.0).mu == -1.0);
}

TEST_CASE("envelope equals brute-force extremum", "[envelope]") {
  auto d = testutil::default_instance(17u);
  SplitMix64 rng(18u);
  auto ts = sorted_points(rng, 8, -6.0, 6.0);

  std::vector<UnnormGaussian> minorants, majorants;
  for (double t : ts) {
    minorants.push_back(tangent_minorant(d, t));
    majorants.push_back(tangent_majorant(d, t));
  }
  auto env_hi = upper_envelope(minorants);
  auto env_lo = lower_envelope(majorants);
  REQUIRE(env_hi.pieces.size() == env_hi.breakpoints.size() + 1);
  REQUIRE(env_lo.pieces.size() == env_lo.breakpoints.size() + 1);
  REQUIRE(std::is_sorted(env_hi.breakpoints.begin(), env_hi.breakpoints.end()));

  for (double x : testutil::linspace(-12.0, 12.0, 10001)) {
    double best_max = 0.0, best_min = std::numeric_limits<double>::infinity();
    for (const auto& g : minorants) best_max = std::max(best_max, g(x));
    for (const auto& g : majorants) best_min = std::min(best_min, g(x));
    REQUIRE(env_hi(x) == Approx(best_max).epsilon(1e-10));
    REQUIRE(env_lo(x) == Approx(best_min).epsilon(1e-10));
  }
}

TEST_CASE("envelope is permutation invariant", "[envelope]") {
  auto d = testutil::default_instance(23u);
  SplitMix64 rng(24u);
  auto ts = sorted_points(rng, 7, -5.0, 5.0);
  std::vector<UnnormGaussian> fs;
  for (double t : ts) fs.push_back(tangent_minorant(d, t));

  auto ref = upper_envelope(fs);
  std::mt19937 shuffler(12345);
  for (int trial = 0; trial < 10; ++trial) {
    auto shuffled = fs;
    std::shuffle(shuffled.begin(), shuffled.end(), shuffler);
    auto env = upper_envelope(shuffled);
    REQUIRE(env.breakpoints == ref.breakpoints);
    REQUIRE(env.pieces.size() == ref.pieces.size());
    for (std::size_t i = 0; i < env.pieces.size(); ++i) {
      REQUIRE(env.pieces[i].scale == ref.pieces[i].scale);
      REQUIRE(env.pieces[i].mu == ref.pieces[i].mu);
      REQUIRE(env.pieces[i].sigma == ref.pieces[i].sigma);
    }
  }
}

TEST_CASE("piecewise evaluation", "[envelope]") {
  auto d = testutil::default_instance(29u);
  SplitMix64 rng(30u);
  auto ts = sorted_points(rng, 6, -4.0, 4.0);
  auto env = minorant_envelope(d, ts);

  // continuity across breakpoints
  for (double b : env.breakpoints) {
    std::size_t i = env.index_at(b);
    double here = env.pieces[i](b);
    double prev = i > 0 ? env.pieces[i - 1](b) : here;
    REQUIRE(prev == Approx(here).epsilon(1e-9));
  }

  // piece lookup matches the interval structure
  std::vector<double> edges = env.breakpoints;
  edges.insert(edges.begin(), -20.0);
  edges.push_back(20.0);
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    for (int s = 1; s <= 16; ++s) {
      double x = edges[i] + (edges[i + 1] - edges[i]) * s / 17.0;
      REQUIRE(env.index_at(x) == i);
      REQUIRE(env(x) == env.pieces[i](x));
    }
  }
}

TEST_CASE("sandwich and refinement", "[envelope]") {
  auto d = testutil::default_instance(41u);
  SplitMix64 rng(42u);
  auto grid = testutil::linspace(-10.0, 10.0, 2001);

  for (int n : {1, 2, 5, 12, 25}) {
    auto ts = sorted_points(rng, n, -6.0, 6.0);
    auto lo_env = minorant_envelope(d, ts);
    auto hi_env = majorant_envelope(d, ts);

    for (double x : grid) {
      double pi_x = eval_pi(d, x);
      REQUIRE(lo_env(x) <= pi_x + 1e-12 * pi_x);
      REQUIRE(hi_env(x) >= pi_x - 1e-12 * pi_x);
    }
    for (double t : ts) {
      double pi_t = eval_pi(d, t);
      REQUIRE(lo_env(t) == Approx(pi_t).epsilon(1e-9));
      REQUIRE(hi_env(t) == Approx(pi_t).epsilon(1e-9));
    }

    // adding tangency points can only tighten both envelopes
    auto extra = ts;
    auto more = sorted_points(rng, 4, -6.0, 6.0);
    extra.insert(extra.end(), more.begin(), more.end());
    std::sort(extra.begin(), extra.end());
    auto lo2 = minorant_envelope(d, extra);
    auto hi2 = majorant_envelope(d, extra);
    for (double x : grid) {
      double pi_x = eval_pi(d, x);
      REQUIRE(lo2(x) >= lo_env(x) - 1e-12 * pi_x - 1e-300);
      REQUIRE(hi2(x) <= hi_env(x) + 1e-12 * pi_x + 1e-300);
    }
  }
}
