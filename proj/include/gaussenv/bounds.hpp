#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "gaussenv/envelope.hpp"
#include "gaussenv/format.hpp"

namespace gaussenv {

struct MomentSpec {
  int k = 0;  // integrand x^k against the target density
};

struct EnvelopePair {
  PiecewiseGaussian under;  // max of minorants, sits below pi
  PiecewiseGaussian over;   // min of majorants, sits above pi
};

inline EnvelopePair build_envelopes(const CurvatureBoundedDensity& d,
                                    const std::vector<double>& ts) {
  std::vector<UnnormGaussian> minor, major;
  minor.reserve(ts.size());
  major.reserve(ts.size());
  for (double t : ts) {
    minor.push_back(tangent_minorant(d, t));
    major.push_back(tangent_majorant(d, t));
  }
  return EnvelopePair{upper_envelope(std::move(minor)), lower_envelope(std::move(major))};
}

// Difference between the two envelopes at x, both rebuilt from ts.
inline double envelope_gap(const CurvatureBoundedDensity& d, const std::vector<double>& ts,
                           double x) {
  auto envs = build_envelopes(d, ts);
  return envs.over(x) - envs.under(x);
}

namespace detail {

// integral of x^k pw(x) over S, split at the piece boundaries
inline double piecewise_moment(const PiecewiseGaussian& pw, int k, Interval S) {
  if (!(S.lo < S.hi)) return 0.0;
  std::size_t i = pw.index_at(S.lo);
  double total = 0.0;
  double lo = S.lo;
  while (true) {
    double cut = i < pw.breakpoints.size() ? pw.breakpoints[i] : S.hi;
    double hi = std::min(cut, S.hi);
    if (hi > lo) total += partial_moment(k, pw.pieces[i], Interval{lo, hi});
    if (hi >= S.hi) break;
    lo = hi;
    ++i;
  }
  return total;
}

}  // namespace detail

struct PieceBounds {
  double lower, upper;
};

// Certified enclosure of the signed integral of x^k pi over S: on regions
// where x^k is negative the roles of the two envelopes swap.
inline PieceBounds signed_piece_integral(const EnvelopePair& envs, MomentSpec spec, Interval S) {
  int k = spec.k;
  if (k % 2 == 0)
    return PieceBounds{detail::piecewise_moment(envs.under, k, S),
                       detail::piecewise_moment(envs.over, k, S)};
  PieceBounds out{0.0, 0.0};
  if (S.hi > 0.0) {
    Interval pos{std::max(S.lo, 0.0), S.hi};
    out.lower += detail::piecewise_moment(envs.under, k, pos);
    out.upper += detail::piecewise_moment(envs.over, k, pos);
  }
  if (S.lo < 0.0) {
    Interval neg{S.lo, std::min(S.hi, 0.0)};
    out.lower += detail::piecewise_moment(envs.over, k, neg);
    out.upper += detail::piecewise_moment(envs.under, k, neg);
  }
  return out;
}

struct IntervalBound {
  Interval iv;
  double lower, upper;
};

struct BoundsTotals {
  double lower = 0.0, upper = 0.0;
  std::vector<IntervalBound> per_interval;
};

// Whole-line bounds accumulated over the tangency partition
// (-inf,t_1], [t_1,t_2], ..., [t_M,+inf).
inline BoundsTotals total_bounds(const EnvelopePair& envs, MomentSpec spec,
                                 const std::vector<double>& ts) {
  double inf = std::numeric_limits<double>::infinity();
  BoundsTotals out;
  out.per_interval.reserve(ts.size() + 1);
  for (std::size_t i = 0; i <= ts.size(); ++i) {
    Interval S{i == 0 ? -inf : ts[i - 1], i == ts.size() ? inf : ts[i]};
    PieceBounds pb = signed_piece_integral(envs, spec, S);
    out.per_interval.push_back(IntervalBound{S, pb.lower, pb.upper});
    out.lower += pb.lower;
    out.upper += pb.upper;
  }
  return out;
}

inline BoundsTotals total_bounds(const CurvatureBoundedDensity& d, const std::vector<double>& ts,
                                 MomentSpec spec) {
  return total_bounds(build_envelopes(d, ts), spec, ts);
}

// Working compact [a,b]: quantiles of the initial majorant, stretched to keep
// t1 interior. Spanning both the majorant's center and the anchor point keeps
// the discarded-tail guarantee (a superset only shrinks the outside mass)
// while still covering the target's bulk when the tangent at t1 sits far from
// it in a steep tail.
inline Interval compact_interval(const CurvatureBoundedDensity& d, double t1, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("compact_interval: eps in (0,1)");
  UnnormGaussian g = tangent_majorant(d, t1);
  double q = std_normal_inv_cdf(0.5 * eps);  // negative lower-tail quantile
  return Interval{std::min(g.mu, t1) + g.sigma * q, std::max(g.mu, t1) - g.sigma * q};
}

// Dyadic candidate grid on [floor(a), ceil(b)] with spacing 2^-d2 chosen so the
// pool holds roughly ell points; always contains every integer of the range.
inline std::vector<double> dyadic_pool(Interval iv, long long ell) {
  if (!(std::isfinite(iv.lo) && std::isfinite(iv.hi) && iv.lo < iv.hi))
    throw std::invalid_argument("dyadic_pool: interval must be finite");
  if (ell < 1) throw std::invalid_argument("dyadic_pool: ell must be >= 1");
  double flo = std::floor(iv.lo), fhi = std::ceil(iv.hi);
  long long n_int = static_cast<long long>(fhi - flo);
  if (n_int < 1) n_int = 1;
  long long d1 = std::max<long long>(1, ell / n_int);
  int d2 = std::bit_width(static_cast<std::uint64_t>(d1)) - 1;  // floor(log2 d1)
  if (d2 > 40) d2 = 40;
  double step = std::ldexp(1.0, -d2);
  long long count = (n_int << d2) + 1;
  std::vector<double> pool;
  pool.reserve(static_cast<std::size_t>(count));
  for (long long i = 0; i < count; ++i) pool.push_back(flo + static_cast<double>(i) * step);
  return pool;
}

struct TangencyState {
  std::vector<double> points;  // sorted tangency abscissae
  std::vector<double> pool;    // sorted unused candidates
  Interval compact{0.0, 0.0};
  double boundary_spacing = 1.0;  // stand-in spacing while fewer than 2 points
};

// One step of candidate selection: pick the widest-gap interval that still has
// pool candidates, aim at its midpoint (or one mean spacing beyond the border
// for the unbounded outer intervals), then snap to the nearest pool candidate
// inside the interval, ties to the smaller value. Returns nothing when the
// pool cannot serve any interval.
inline std::optional<double> select_candidate(TangencyState& st,
                                              const std::vector<double>& interval_gaps) {
  if (st.pool.empty()) return std::nullopt;
  std::size_t m = st.points.size();
  double inf = std::numeric_limits<double>::infinity();

  auto range_of = [&](std::size_t i) {
    double lo = i == 0 ? -inf : st.points[i - 1];
    double hi = i == m ? inf : st.points[i];
    auto first = std::lower_bound(st.pool.begin(), st.pool.end(), lo);
    auto last = std::upper_bound(st.pool.begin(), st.pool.end(), hi);
    return std::pair(first, last);
  };

  std::size_t best = interval_gaps.size();
  double best_gap = -inf;
  for (std::size_t i = 0; i < interval_gaps.size(); ++i) {
    auto [first, last] = range_of(i);
    if (first == last) continue;
    if (interval_gaps[i] > best_gap) {
      best_gap = interval_gaps[i];
      best = i;
    }
  }
  if (best == interval_gaps.size()) return std::nullopt;

  double spacing = m >= 2 ? (st.points.back() - st.points.front()) / double(m - 1)
                          : st.boundary_spacing;
  double target;
  if (best == 0) {
    target = st.points.front() - spacing;
  } else if (best == m) {
    target = st.points.back() + spacing;
  } else {
    target = 0.5 * (st.points[best - 1] + st.points[best]);
  }

  auto [first, last] = range_of(best);
  auto it = std::lower_bound(first, last, target);
  double chosen;
  if (it == last) {
    chosen = *(last - 1);
  } else if (it == first) {
    chosen = *first;
  } else {
    double above = *it, below = *(it - 1);
    chosen = (target - below <= above - target) ? below : above;  // ties to the smaller
  }
  st.pool.erase(std::lower_bound(st.pool.begin(), st.pool.end(), chosen));
  st.points.insert(std::upper_bound(st.points.begin(), st.points.end(), chosen), chosen);
  return chosen;
}

struct HistoryRow {
  int n;
  double lower, upper, gap;
  std::optional<double> new_point;  // candidate added after this iteration
};

enum class RefineStatus { converged, pool_exhausted, budget_reached };

inline const char* to_string(RefineStatus s) {
  switch (s) {
    case RefineStatus::converged: return "converged";
    case RefineStatus::pool_exhausted: return "pool_exhausted";
    default: return "budget_reached";
  }
}

struct BoundsReport {
  double lower = 0.0, upper = 0.0, gap = 0.0;
  std::vector<IntervalBound> per_interval;
  std::vector<HistoryRow> history;
  std::vector<double> tangency_points;
  int n_stop = 0;
  RefineStatus status = RefineStatus::converged;
};

struct RefineOptions {
  double tau = 1e-4;
  bool tau_absolute = false;  // default threshold is tau * max(|lower|,|upper|)
  double t1 = 1.0;
  double eps = 1e-6;
  long long ell = 10000;
  int max_points = 0;  // 0 = no budget cap
  std::function<void(int, const std::vector<double>&, const EnvelopePair&, const BoundsTotals&)>
      observer;
};

// Iteratively tightens the envelope pair by inserting tangency points where the
// bound gap is largest, until the gap meets tau, the pool runs dry, or the
// point budget is hit.
inline BoundsReport refine(const CurvatureBoundedDensity& d, MomentSpec spec,
                           const RefineOptions& opts = {}) {
  if (!(opts.tau > 0.0)) throw std::invalid_argument("refine: tau must be positive");
  Interval compact = compact_interval(d, opts.t1, opts.eps);
  std::vector<double> pool = dyadic_pool(compact, opts.ell);
  double t1 = std::clamp(std::round(opts.t1), std::floor(compact.lo), std::ceil(compact.hi));
  pool.erase(std::remove(pool.begin(), pool.end(), t1), pool.end());

  TangencyState st;
  st.points = {t1};
  st.pool = std::move(pool);
  st.compact = compact;
  st.boundary_spacing = tangent_majorant(d, t1).sigma;

  BoundsReport rep;
  for (int n = 1;; ++n) {
    EnvelopePair envs = build_envelopes(d, st.points);
    BoundsTotals totals = total_bounds(envs, spec, st.points);
    if (opts.observer) opts.observer(n, st.points, envs, totals);
    double gap = totals.upper - totals.lower;
    double thresh = opts.tau_absolute
                        ? opts.tau
                        : opts.tau * std::max({std::abs(totals.lower), std::abs(totals.upper),
                                               1e-300});
    bool done_conv = gap <= thresh;
    bool done_budget =
        opts.max_points > 0 && static_cast<int>(st.points.size()) >= opts.max_points;
    if (done_conv || done_budget) {
      rep.history.push_back(HistoryRow{n, totals.lower, totals.upper, gap, std::nullopt});
      rep.status = done_conv ? RefineStatus::converged : RefineStatus::budget_reached;
      rep.lower = totals.lower;
      rep.upper = totals.upper;
      rep.gap = gap;
      rep.per_interval = std::move(totals.per_interval);
      break;
    }
    std::vector<double> gaps;
    gaps.reserve(totals.per_interval.size());
    for (const auto& ib : totals.per_interval) gaps.push_back(ib.upper - ib.lower);
    std::optional<double> added = select_candidate(st, gaps);
    if (!added) {
      rep.history.push_back(HistoryRow{n, totals.lower, totals.upper, gap, std::nullopt});
      rep.status = RefineStatus::pool_exhausted;
      rep.lower = totals.lower;
      rep.upper = totals.upper;
      rep.gap = gap;
      rep.per_interval = std::move(totals.per_interval);
      break;
    }
    rep.history.push_back(HistoryRow{n, totals.lower, totals.upper, gap, added});
  }
  rep.tangency_points = st.points;
  rep.n_stop = static_cast<int>(rep.history.size());
  return rep;
}

inline void write_history_csv(std::ostream& os, const std::vector<HistoryRow>& rows) {
  os << "n,lower,upper,gap,new_point\n";
  for (const auto& r : rows) {
    os << r.n << ',' << format_double(r.lower) << ',' << format_double(r.upper) << ','
       << format_double(r.gap) << ',';
    if (r.new_point) os << format_double(*r.new_point);
    os << '\n';
  }
}

}  // namespace gaussenv
