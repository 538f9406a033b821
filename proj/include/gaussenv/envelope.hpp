#pragma once

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <stdexcept>
#include <vector>

#include "gaussenv/density.hpp"
#include "gaussenv/gaussmath.hpp"

namespace gaussenv {

struct IdenticalFunctions : std::runtime_error {
  IdenticalFunctions() : std::runtime_error("curves coincide everywhere") {}
};

// Gaussian curve tangent to pi from below at t: the quadratic upper expansion
// of phi with curvature beta(t) exponentiates to a scaled Gaussian minorant.
inline UnnormGaussian tangent_minorant(const CurvatureBoundedDensity& d, double t) {
  double curv = d.beta(t);
  if (!(curv > 0.0)) throw std::invalid_argument("tangent_minorant: beta(t) must be positive");
  double s2 = 1.0 / curv;
  double slope = d.dphi(t);
  double phi_t = d.phi(t);
  double expo = -phi_t + 0.5 * s2 * slope * slope;
  UnnormGaussian g{sqrt_2pi * std::sqrt(s2) * std::exp(expo), t - s2 * slope, std::sqrt(s2), t,
                   expo + std::log(sqrt_2pi * std::sqrt(s2))};
  if (std::isfinite(g.scale)) {
    double at_t = g(t), pi_t = std::exp(-phi_t);
    if (!(std::abs(at_t - pi_t) <= 1e-12 * pi_t + 1e-300))
      throw std::logic_error("tangent_minorant: tangency check failed");
  } else {
    double big = std::max({1.0, std::abs(phi_t), 0.5 * s2 * slope * slope});
    if (!(std::abs(g.log_value(t) + phi_t) <= 1e-8 * big))
      throw std::logic_error("tangent_minorant: tangency check failed");
  }
  return g;
}

// Same construction from below on phi (curvature nu) gives a majorant of pi.
inline UnnormGaussian tangent_majorant(const CurvatureBoundedDensity& d, double t) {
  if (!d.has_nu()) throw NuUnavailable();
  double curv = d.nu(t);
  // A non-positive lower curvature means the quadratic under phi opens the
  // wrong way: no integrable Gaussian can sit above pi from this tangent.
  if (!(curv > 0.0)) throw NuUnavailable();
  double s2 = 1.0 / curv;
  double slope = d.dphi(t);
  double phi_t = d.phi(t);
  double expo = -phi_t + 0.5 * s2 * slope * slope;
  UnnormGaussian g{sqrt_2pi * std::sqrt(s2) * std::exp(expo), t - s2 * slope, std::sqrt(s2), t,
                   expo + std::log(sqrt_2pi * std::sqrt(s2))};
  if (std::isfinite(g.scale)) {
    double at_t = g(t), pi_t = std::exp(-phi_t);
    if (!(std::abs(at_t - pi_t) <= 1e-12 * pi_t + 1e-300))
      throw std::logic_error("tangent_majorant: tangency check failed");
  } else {
    double big = std::max({1.0, std::abs(phi_t), 0.5 * s2 * slope * slope});
    if (!(std::abs(g.log_value(t) + phi_t) <= 1e-8 * big))
      throw std::logic_error("tangent_majorant: tangency check failed");
  }
  return g;
}

// Crossings of two scaled Gaussians: a quadratic in log space,
// a2 x^2 + a1 x + a0 = 0. Returns 0, 1 or 2 ascending roots; throws
// IdenticalFunctions when every coefficient vanishes (callers treat that as
// no crossing).
inline std::vector<double> intersections(const UnnormGaussian& fa, const UnnormGaussian& fb) {
  double ia = 1.0 / (fa.sigma * fa.sigma), ib = 1.0 / (fb.sigma * fb.sigma);
  double a2 = 0.5 * (ib - ia);
  double a1 = fa.mu * ia - fb.mu * ib;
  double a0 = 0.5 * (fb.mu * fb.mu * ib - fa.mu * fa.mu * ia) + fa.log_amp() - fb.log_amp() +
              std::log(fb.sigma / fa.sigma);

  if (std::abs(a2) < 1e-14 * std::max(std::abs(a1), 1.0)) {
    if (std::abs(a1) < 1e-14 * std::max(std::abs(a0), 1.0)) {
      if (std::abs(a0) < 1e-12) throw IdenticalFunctions();
      return {};  // parallel in log space
    }
    return {-a0 / a1};
  }
  double disc = a1 * a1 - 4.0 * a2 * a0;
  double scale = a1 * a1 + std::abs(4.0 * a2 * a0);
  if (disc < -1e-12 * scale) return {};
  if (std::abs(disc) <= 1e-12 * scale) return {-a1 / (2.0 * a2)};
  double sq = std::sqrt(std::max(disc, 0.0));
  double r1, r2;
  if (a1 == 0.0) {
    r1 = -sq / (2.0 * a2);
    r2 = sq / (2.0 * a2);
  } else {
    double qq = -0.5 * (a1 + std::copysign(sq, a1));
    r1 = qq / a2;
    r2 = a0 / qq;
  }
  if (r1 > r2) std::swap(r1, r2);
  return {r1, r2};
}

// Piecewise selection among a family of scaled Gaussians: pieces[i] is active
// on (breakpoints[i-1], breakpoints[i]).
struct PiecewiseGaussian {
  std::vector<double> breakpoints;    // strictly increasing, finite
  std::vector<UnnormGaussian> pieces; // breakpoints.size() + 1

  std::size_t index_at(double x) const {
    return static_cast<std::size_t>(
        std::upper_bound(breakpoints.begin(), breakpoints.end(), x) - breakpoints.begin());
  }
  const UnnormGaussian& piece_at(double x) const { return pieces[index_at(x)]; }
  double operator()(double x) const { return piece_at(x)(x); }
  double log_value(double x) const { return piece_at(x).log_value(x); }
};

namespace detail {

inline bool same_curve(const UnnormGaussian& a, const UnnormGaussian& b) {
  return a.scale == b.scale && a.mu == b.mu && a.sigma == b.sigma && a.tangent == b.tangent;
}

// Prefer the curve with the greater (upper) / smaller (lower) log value;
// exact ties go to the lower tangency point.
inline bool prefer_first(const UnnormGaussian& a, const UnnormGaussian& b, double x, bool upper) {
  double la = a.log_value(x), lb = b.log_value(x);
  if (la != lb) return upper ? la > lb : la < lb;
  if (a.tangent != b.tangent) return a.tangent < b.tangent;
  if (a.mu != b.mu) return a.mu < b.mu;
  if (a.sigma != b.sigma) return a.sigma < b.sigma;
  return a.scale <= b.scale;
}

inline double interval_probe(double lo, double hi) {
  bool lo_inf = std::isinf(lo), hi_inf = std::isinf(hi);
  if (lo_inf && hi_inf) return 0.0;
  if (lo_inf) return hi - 1.0;
  if (hi_inf) return lo + 1.0;
  return 0.5 * (lo + hi);
}

inline PiecewiseGaussian merge_envelopes(const PiecewiseGaussian& A, const PiecewiseGaussian& B,
                                         bool upper) {
  // refined partition: both breakpoint lists plus pairwise crossings inside
  std::vector<double> base;
  base.reserve(A.breakpoints.size() + B.breakpoints.size());
  std::merge(A.breakpoints.begin(), A.breakpoints.end(), B.breakpoints.begin(),
             B.breakpoints.end(), std::back_inserter(base));
  base.erase(std::unique(base.begin(), base.end()), base.end());

  std::vector<double> cuts;
  cuts.reserve(base.size() * 2 + 4);
  double neg_inf = -std::numeric_limits<double>::infinity();
  double pos_inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= base.size(); ++i) {
    double lo = i == 0 ? neg_inf : base[i - 1];
    double hi = i == base.size() ? pos_inf : base[i];
    if (i > 0) cuts.push_back(lo);
    double probe = interval_probe(lo, hi);
    const UnnormGaussian& a = A.piece_at(probe);
    const UnnormGaussian& b = B.piece_at(probe);
    std::vector<double> xs;
    try {
      xs = intersections(a, b);
    } catch (const IdenticalFunctions&) {
    }
    for (double x : xs)
      if (x > lo && x < hi && std::isfinite(x)) cuts.push_back(x);
  }
  // fuse near-coincident cuts
  std::vector<double> fused;
  fused.reserve(cuts.size());
  for (double v : cuts) {
    if (!fused.empty() && v - fused.back() < 1e-12 * (1.0 + std::abs(v))) continue;
    fused.push_back(v);
  }

  PiecewiseGaussian out;
  out.pieces.reserve(fused.size() + 1);
  for (std::size_t i = 0; i <= fused.size(); ++i) {
    double lo = i == 0 ? neg_inf : fused[i - 1];
    double hi = i == fused.size() ? pos_inf : fused[i];
    double probe = interval_probe(lo, hi);
    const UnnormGaussian& a = A.piece_at(probe);
    const UnnormGaussian& b = B.piece_at(probe);
    const UnnormGaussian& winner = prefer_first(a, b, probe, upper) ? a : b;
    if (!out.pieces.empty() && same_curve(out.pieces.back(), winner)) {
      out.breakpoints.pop_back();  // same curve on both sides: cut is redundant
    } else {
      out.pieces.push_back(winner);
    }
    if (i < fused.size()) out.breakpoints.push_back(fused[i]);
  }
  return out;
}

inline PiecewiseGaussian envelope_rec(const std::vector<UnnormGaussian>& fs, std::size_t lo,
                                      std::size_t hi, bool upper) {
  if (hi - lo == 1) return PiecewiseGaussian{{}, {fs[lo]}};
  std::size_t mid = lo + (hi - lo + 1) / 2;
  return merge_envelopes(envelope_rec(fs, lo, mid, upper), envelope_rec(fs, mid, hi, upper),
                         upper);
}

inline PiecewiseGaussian build_envelope(std::vector<UnnormGaussian> fs, bool upper) {
  if (fs.empty()) throw std::invalid_argument("envelope of an empty family");
  // canonical order makes the result independent of input permutation
  std::sort(fs.begin(), fs.end(), [](const UnnormGaussian& a, const UnnormGaussian& b) {
    if (a.tangent != b.tangent) return a.tangent < b.tangent;
    if (a.mu != b.mu) return a.mu < b.mu;
    if (a.sigma != b.sigma) return a.sigma < b.sigma;
    return a.scale < b.scale;
  });
  return envelope_rec(fs, 0, fs.size(), upper);
}

}  // namespace detail

// Pointwise max of the family (used on minorants: the curve below pi).
inline PiecewiseGaussian upper_envelope(std::vector<UnnormGaussian> fs) {
  return detail::build_envelope(std::move(fs), true);
}

// Pointwise min of the family (used on majorants: the curve above pi).
inline PiecewiseGaussian lower_envelope(std::vector<UnnormGaussian> fs) {
  return detail::build_envelope(std::move(fs), false);
}

inline double eval_piecewise(const PiecewiseGaussian& pw, double x) { return pw(x); }

}  // namespace gaussenv
