#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gaussenv {

inline constexpr double sqrt_2pi = 2.5066282746310002;
inline constexpr double inv_sqrt_2pi = 0.3989422804014327;
inline constexpr double inv_sqrt_2 = 0.7071067811865476;
inline constexpr double inv_sqrt_pi = 0.5641895835477563;

// Interval masses below this are treated as degenerate (tail pieces beyond the
// working compact carry no certified weight).
inline constexpr double mass_underflow_guard = 1e-300;

struct Interval {
  double lo, hi;  // lo < hi; either endpoint may be infinite
};

struct GaussianParams {
  double mu, sigma;  // sigma > 0
};

// scale * N(mu, sigma^2) density. `tangent` records the abscissa a tangent
// curve was fitted at; plain scaled Gaussians leave it at the mean.
struct UnnormGaussian {
  double scale;
  double mu;
  double sigma;
  double tangent;
  // Exact log of scale when the linear value can over- or underflow (a tangent
  // curve's peak may exceed double range even though its values on the cells
  // it serves are moderate); NaN means "derive from scale".
  double log_scale = std::numeric_limits<double>::quiet_NaN();

  double log_amp() const { return std::isnan(log_scale) ? std::log(scale) : log_scale; }

  double operator()(double x) const {
    double z = (x - mu) / sigma;
    if (std::isfinite(scale)) return scale * inv_sqrt_2pi / sigma * std::exp(-0.5 * z * z);
    return std::exp(log_value(x));
  }

  double log_value(double x) const {
    double z = (x - mu) / sigma;
    return log_amp() - std::log(sigma * sqrt_2pi) - 0.5 * z * z;
  }
};

struct DegenerateMass : std::runtime_error {
  DegenerateMass() : std::runtime_error("interval carries no Gaussian mass") {}
};

inline double std_normal_pdf(double x) { return inv_sqrt_2pi * std::exp(-0.5 * x * x); }

// Complimentary-error-function path keeps relative accuracy deep in the lower tail.
inline double std_normal_cdf(double x) {
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  return 0.5 * std::erfc(-x * inv_sqrt_2);
}

namespace detail {

// exp(x^2) erfc(x) for x >= 0. Direct product below the range where both
// factors stay representable; Lentz continued fraction beyond it.
inline double erfcx_pos(double x) {
  if (x < 6.0) return std::exp(x * x) * std::erfc(x);
  constexpr double tiny = 1e-300;
  double f = tiny, c = f, d = 0.0;
  for (int j = 1; j <= 300; ++j) {
    double a = (j == 1) ? 1.0 : 0.5 * (j - 1);
    d = x + a * d;
    if (d == 0.0) d = tiny;
    c = x + a / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return inv_sqrt_pi * f;
}

struct TruncStats {
  double mass;      // P(X in iv) for X ~ N(mu, sigma^2)
  double r_lo;      // pdf(alpha_std) / mass, 0 for an infinite endpoint
  double r_hi;      // pdf(beta_std) / mass, 0 for an infinite endpoint
  double log_mass;  // log of mass, finite even where mass underflows
};

// Mass and boundary pdf/mass ratios of a truncated Gaussian. Both standardized
// endpoints beyond 8 with a shared sign switch to scaled-erfc arithmetic, where
// the common exp(-z^2/2) factor cancels out of the ratios.
inline TruncStats trunc_stats(GaussianParams p, Interval iv) {
  double alpha = std::isinf(iv.lo) ? -std::numeric_limits<double>::infinity()
                                   : (iv.lo - p.mu) / p.sigma;
  double beta = std::isinf(iv.hi) ? std::numeric_limits<double>::infinity()
                                  : (iv.hi - p.mu) / p.sigma;
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  TruncStats ts{0.0, 0.0, 0.0, neg_inf};
  if (alpha > 8.0) {  // upper tail (beta may be +inf)
    double shift = std::isinf(beta) ? 0.0 : std::exp(-0.5 * (beta - alpha) * (beta + alpha));
    double d = erfcx_pos(alpha * inv_sqrt_2);
    if (!std::isinf(beta)) d -= erfcx_pos(beta * inv_sqrt_2) * shift;
    ts.mass = 0.5 * std::exp(-0.5 * alpha * alpha) * d;
    if (d > 0.0) {
      ts.log_mass = std::log(0.5 * d) - 0.5 * alpha * alpha;
      ts.r_lo = 2.0 * inv_sqrt_2pi / d;
      ts.r_hi = std::isinf(beta) ? 0.0 : 2.0 * inv_sqrt_2pi * shift / d;
    }
    return ts;
  }
  if (beta < -8.0) {  // lower tail, mirrored
    double shift = std::isinf(alpha) ? 0.0 : std::exp(-0.5 * (alpha - beta) * (alpha + beta));
    double d = erfcx_pos(-beta * inv_sqrt_2);
    if (!std::isinf(alpha)) d -= erfcx_pos(-alpha * inv_sqrt_2) * shift;
    ts.mass = 0.5 * std::exp(-0.5 * beta * beta) * d;
    if (d > 0.0) {
      ts.log_mass = std::log(0.5 * d) - 0.5 * beta * beta;
      ts.r_hi = 2.0 * inv_sqrt_2pi / d;
      ts.r_lo = std::isinf(alpha) ? 0.0 : 2.0 * inv_sqrt_2pi * shift / d;
    }
    return ts;
  }
  // Difference through whichever tail keeps both cdf values away from 1, so
  // an interval several sigmas out still gets its mass to full relative
  // precision instead of cancelling between two near-unit cdfs.
  ts.mass = alpha + beta > 0.0 ? std_normal_cdf(-alpha) - std_normal_cdf(-beta)
                               : std_normal_cdf(beta) - std_normal_cdf(alpha);
  if (ts.mass > 0.0) {
    ts.log_mass = std::log(ts.mass);
    if (!std::isinf(alpha)) ts.r_lo = std_normal_pdf(alpha) / ts.mass;
    if (!std::isinf(beta)) ts.r_hi = std_normal_pdf(beta) / ts.mass;
  }
  return ts;
}

// m_k recursion with precomputed boundary ratios; m_{-1} = 0, m_0 = 1.
inline double trunc_moment_from(const TruncStats& ts, int k, GaussianParams p, Interval iv) {
  if (k <= -1) return 0.0;
  if (k == 0) return 1.0;
  double sig2 = p.sigma * p.sigma;
  double mk2 = 0.0, mk1 = 1.0;
  double lo_pow = 1.0, hi_pow = 1.0;  // iv.lo^(j-1), iv.hi^(j-1)
  bool lo_fin = std::isfinite(iv.lo), hi_fin = std::isfinite(iv.hi);
  double m = 1.0;
  for (int j = 1; j <= k; ++j) {
    double boundary = 0.0;
    if (hi_fin && ts.r_hi != 0.0) boundary += hi_pow * ts.r_hi;
    if (lo_fin && ts.r_lo != 0.0) boundary -= lo_pow * ts.r_lo;
    m = (j - 1) * sig2 * mk2 + p.mu * mk1 - p.sigma * boundary;
    mk2 = mk1;
    mk1 = m;
    if (hi_fin) hi_pow *= iv.hi;
    if (lo_fin) lo_pow *= iv.lo;
  }
  return m;
}

// Nodes and weights of the 10-point Gauss-Legendre rule on [-1, 1]
// (positive half; the nodes are symmetric about zero).
inline constexpr double gl10_node[5] = {0.14887433898163122, 0.43339539412924719,
                                        0.67940956829902441, 0.86506336668898451,
                                        0.97390652851717172};
inline constexpr double gl10_w[5] = {0.29552422471475287, 0.26926671930999635,
                                     0.21908636251598204, 0.14945134915058059,
                                     0.066671344308688138};

// x^k against a scaled Gaussian over a cell lying 8+ sigma away from its mean.
// The cell's mass is an exponential boundary layer at the near edge, and the
// moment recurrences cancel catastrophically there (mu^k-sized terms for an
// edge^k-sized result), so integrate the layer numerically in log space,
// where every exponent stays non-positive.
inline double tail_layer_moment(int k, const UnnormGaussian& g, double z_near, Interval iv) {
  double edge = z_near > 0.0 ? iv.lo : iv.hi;  // densest endpoint
  double dir = z_near > 0.0 ? 1.0 : -1.0;      // toward the cell interior
  double lam = std::abs(z_near) / g.sigma;     // e-folds per unit x at the edge
  double L0 = g.log_value(edge);
  if (!std::isfinite(L0)) return 0.0;  // amplitude underflowed entirely
  double vmax = std::min((iv.hi - iv.lo) * lam, 50.0);  // e-folds that matter
  int panels = std::max(1, static_cast<int>(std::ceil(vmax / 1.25)));
  double h = vmax / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    double c = (p + 0.5) * h, hh = 0.5 * h;
    double acc = 0.0;
    for (int j = 0; j < 5; ++j) {
      for (double sgn : {-1.0, 1.0}) {
        double x = edge + dir * ((c + sgn * hh * gl10_node[j]) / lam);
        acc += gl10_w[j] * std::pow(x, k) * std::exp(g.log_value(x) - L0);
      }
    }
    total += acc * hh;
  }
  return std::exp(L0) * total / lam;
}

}  // namespace detail

// Quantile via a rational initializer plus one Newton correction on the cdf;
// mirrored around 1/2 so inv_cdf(1-p) == -inv_cdf(p) exactly.
inline double std_normal_inv_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("std_normal_inv_cdf: p outside (0,1)");
  if (p == 0.5) return 0.0;
  if (p > 0.5) return -std_normal_inv_cdf(1.0 - p);

  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};

  double x;
  if (p < 0.02425) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  double pdf = std_normal_pdf(x);
  if (pdf > 0.0) x -= (std_normal_cdf(x) - p) / pdf;
  return x;
}

// E[X^k] for X ~ N(mu, sigma^2): sum_j C(k,2j) mu^(k-2j) sigma^(2j) (2j-1)!!
inline double gaussian_moment(int k, GaussianParams p) {
  if (k < 0) throw std::domain_error("gaussian_moment: k < 0");
  double sig2 = p.sigma * p.sigma;
  double binom = 1.0, dfact = 1.0, total = 0.0;
  for (int j = 0; 2 * j <= k; ++j) {
    if (j > 0) {
      binom *= double(k - 2 * j + 2) * double(k - 2 * j + 1) / (double(2 * j - 1) * double(2 * j));
      dfact *= 2 * j - 1;
    }
    double mu_pow = 1.0;
    for (int i = 0; i < k - 2 * j; ++i) mu_pow *= p.mu;
    double s_pow = 1.0;
    for (int i = 0; i < j; ++i) s_pow *= sig2;
    total += binom * dfact * mu_pow * s_pow;
  }
  return total;
}

// E[X^k | X in iv], iterative recursion over orders.
inline double truncated_moment(int k, GaussianParams p, Interval iv) {
  auto ts = detail::trunc_stats(p, iv);
  if (!(ts.mass >= mass_underflow_guard)) throw DegenerateMass();
  return detail::trunc_moment_from(ts, k, p, iv);
}

// Integral of x^k * g(x) over iv for a scaled Gaussian g; 0 on degenerate tails.
inline double partial_moment(int k, const UnnormGaussian& g, Interval iv) {
  GaussianParams p{g.mu, g.sigma};
  double alpha = (iv.lo - p.mu) / p.sigma;
  double beta = (iv.hi - p.mu) / p.sigma;
  if (alpha > 8.0 || beta < -8.0)
    return detail::tail_layer_moment(k, g, alpha > 8.0 ? alpha : beta, iv);
  auto ts = detail::trunc_stats(p, iv);
  // Drop on the amplitude-mass product, not the mass alone: a piece with a
  // huge amplitude can carry real weight on a cell whose normalized Gaussian
  // mass underflows.
  double lg = g.log_amp() + ts.log_mass;
  if (!(lg >= -708.0)) return 0.0;
  double m = detail::trunc_moment_from(ts, k, p, iv);
  if (std::isfinite(g.scale) && g.scale <= 1e290 && ts.mass >= mass_underflow_guard)
    return g.scale * ts.mass * m;
  return std::exp(lg) * m;
}

}  // namespace gaussenv
