#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaussenv/density.hpp"
#include "gaussenv/format.hpp"
#include "gaussenv/gaussmath.hpp"

namespace gaussenv {

// Integrand together with derivatives up to max_order.
struct DifferentiableIntegrand {
  int max_order = 0;
  std::function<double(int, double)> eval;  // (order, x)
};

namespace detail {

// pi = e^-phi and its first three derivatives from the phi chain.
inline void pi_derivs(const CurvatureBoundedDensity& d, double x, double out[4]) {
  double p0 = std::exp(-d.phi_deriv(0, x));
  double f1 = d.phi_deriv(1, x), f2 = d.phi_deriv(2, x), f3 = d.phi_deriv(3, x);
  out[0] = p0;
  out[1] = -f1 * p0;
  out[2] = (f1 * f1 - f2) * p0;
  out[3] = (-f1 * f1 * f1 + 3.0 * f1 * f2 - f3) * p0;
}

}  // namespace detail

inline DifferentiableIntegrand make_pi_integrand(const CurvatureBoundedDensity& d) {
  if (!d.has_derivs())
    throw std::invalid_argument("make_pi_integrand: density exposes no derivatives");
  return DifferentiableIntegrand{3, [d](int order, double x) {
                                   double buf[4];
                                   detail::pi_derivs(d, x, buf);
                                   return buf[order];
                                 }};
}

// f = x^k pi via the Leibniz rule.
inline DifferentiableIntegrand make_moment_integrand(const CurvatureBoundedDensity& d, int k) {
  if (!d.has_derivs())
    throw std::invalid_argument("make_moment_integrand: density exposes no derivatives");
  if (k < 0) throw std::invalid_argument("make_moment_integrand: k must be >= 0");
  return DifferentiableIntegrand{
      3, [d, k](int order, double x) {
        double pd[4];
        detail::pi_derivs(d, x, pd);
        double total = 0.0, binom = 1.0;
        for (int j = 0; j <= order && j <= k; ++j) {
          double mono = 1.0;  // d^j/dx^j x^k = k!/(k-j)! x^(k-j)
          for (int i = 0; i < j; ++i) mono *= double(k - i);
          for (int i = 0; i < k - j; ++i) mono *= x;
          total += binom * mono * pd[order - j];
          binom = binom * double(order - j) / double(j + 1);
        }
        return total;
      }};
}

struct CurvatureSegment {
  Interval iv;
  int sign;  // sign of f^(d+2): -1 -> f^(d) concave, +1 -> convex
};

// Maximal constant-sign runs of f^(d+2) on iv, boundaries bisected to
// 1e-12 * (1+|x|) width from a 2048-point sign scan.
inline std::vector<CurvatureSegment> segment_by_curvature(const DifferentiableIntegrand& f,
                                                          Interval iv, int d) {
  if (d + 2 > f.max_order)
    throw std::invalid_argument("segment_by_curvature: order d+2 not available");
  constexpr int grid_n = 2048;
  double a = iv.lo, b = iv.hi;
  auto sgn = [&](double x) {
    double v = f.eval(d + 2, x);
    return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0);
  };
  std::vector<double> cuts;
  int prev_sign = 0;
  double prev_x = a;
  for (int i = 0; i <= grid_n; ++i) {
    double x = a + (b - a) * double(i) / grid_n;
    int s = sgn(x);
    if (s != 0 && prev_sign != 0 && s != prev_sign) {
      double lo = prev_x, hi = x;
      while (hi - lo > 1e-12 * (1.0 + std::abs(hi))) {
        double mid = 0.5 * (lo + hi);
        int sm = sgn(mid);
        if (sm == prev_sign || sm == 0)
          lo = mid;
        else
          hi = mid;
      }
      cuts.push_back(0.5 * (lo + hi));
    }
    if (s != 0) {
      prev_sign = s;
      prev_x = x;
    }
  }
  std::vector<CurvatureSegment> segs;
  double lo = a;
  for (double c : cuts) {
    segs.push_back(CurvatureSegment{{lo, c}, 0});
    lo = c;
  }
  segs.push_back(CurvatureSegment{{lo, b}, 0});
  for (auto& s : segs) {
    // classify by majority sign inside the segment
    int pos = 0, neg = 0;
    for (int i = 1; i < 8; ++i) {
      double x = s.iv.lo + (s.iv.hi - s.iv.lo) * double(i) / 8.0;
      int v = sgn(x);
      if (v > 0) ++pos;
      if (v < 0) ++neg;
    }
    s.sign = pos >= neg ? (pos == 0 ? 0 : 1) : -1;
  }
  return segs;
}

struct PanelBounds {
  double lower, upper;
};

// Panel enclosure driven by the signed curvature of f^(d):
// one side is the order-(d+1) Taylor polynomial from the left endpoint, the
// other replaces the top coefficient with the chord slope of f^(d).
inline PanelBounds evans_panel_bounds(const DifferentiableIntegrand& f, double a, double b, int d,
                                      bool concave) {
  if (!(b > a)) throw std::invalid_argument("evans_panel_bounds: empty panel");
  if (d + 1 > f.max_order)
    throw std::invalid_argument("evans_panel_bounds: order d+1 not available");
  double h = b - a;
  double taylor_d = 0.0;  // sum_{k<=d} f^(k)(a) h^(k+1)/(k+1)!
  double h_pow = h, fact = 1.0;
  for (int k = 0; k <= d; ++k) {
    fact *= k + 1;
    taylor_d += f.eval(k, a) * h_pow / fact;
    h_pow *= h;
  }
  double fact_d2 = fact * (d + 2);  // (d+2)!
  double chord = (f.eval(d, b) - f.eval(d, a)) / h;
  double chord_term = taylor_d + chord * h_pow / fact_d2;
  double taylor_term = taylor_d + f.eval(d + 1, a) * h_pow / fact_d2;
  return concave ? PanelBounds{chord_term, taylor_term} : PanelBounds{taylor_term, chord_term};
}

struct EvansResult {
  double lower, upper;
  int n_panels;
  std::vector<CurvatureSegment> segments;
};

// Compound rule: n_points equally spaced knots, panels split further at
// curvature-sign changes so every panel carries a valid label.
inline EvansResult evans_compound(const DifferentiableIntegrand& f, Interval iv, int n_points,
                                  int d) {
  if (n_points < 2) throw std::invalid_argument("evans_compound: need at least 2 points");
  auto segs = segment_by_curvature(f, iv, d);
  std::vector<double> knots;
  knots.reserve(n_points + segs.size());
  for (int i = 0; i < n_points; ++i)
    knots.push_back(iv.lo + (iv.hi - iv.lo) * double(i) / (n_points - 1));
  for (std::size_t i = 0; i + 1 < segs.size(); ++i) knots.push_back(segs[i].iv.hi);
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end(),
                          [](double x, double y) { return y - x < 1e-13 * (1.0 + std::abs(y)); }),
              knots.end());

  auto label_at = [&](double x) {
    for (const auto& s : segs)
      if (x <= s.iv.hi) return s.sign;
    return segs.back().sign;
  };
  EvansResult out{0.0, 0.0, 0, segs};
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    double a = knots[i], b = knots[i + 1];
    bool concave = label_at(0.5 * (a + b)) < 0;
    PanelBounds pb = evans_panel_bounds(f, a, b, d, concave);
    out.lower += pb.lower;
    out.upper += pb.upper;
    ++out.n_panels;
  }
  return out;
}

struct ComparisonRow {
  std::string method;
  int budget;
  double lower, upper;
  double abs_err, rel_err;  // of the midpoint against the reference value
};

inline void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  os << "method,budget,lower,upper,abs_err,rel_err\n";
  for (const auto& r : rows) {
    os << r.method << ',' << r.budget << ',' << format_double(r.lower) << ','
       << format_double(r.upper) << ',' << format_double(r.abs_err) << ','
       << format_double(r.rel_err) << '\n';
  }
}

}  // namespace gaussenv
