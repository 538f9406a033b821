#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaussenv/rng.hpp"

namespace gaussenv {

struct NuUnavailable : std::runtime_error {
  NuUnavailable() : std::runtime_error("density exposes no strong-convexity curvature") {}
};

struct IllPosedRatio : std::runtime_error {
  explicit IllPosedRatio(const std::string& what) : std::runtime_error(what) {}
};

// Target pi(x) = exp(-phi(x)) together with the curvature maps that make
// Gaussian tangent bounds valid: beta(t) majorizes the local curvature from
// above (always required), nu(t) minorizes it (present only for strongly
// convex targets). phi_deriv serves orders 0..3 when closed forms exist.
struct CurvatureBoundedDensity {
  std::function<double(double)> phi;
  std::function<double(double)> dphi;
  std::function<double(double)> beta;
  std::function<double(double)> nu;
  std::function<double(int, double)> phi_deriv;
  double nu_floor = 0.0;  // known uniform lower bound of nu (may be negative); 0 when unknown

  bool has_nu() const { return static_cast<bool>(nu); }
  bool has_derivs() const { return static_cast<bool>(phi_deriv); }
};

inline double eval_pi(const CurvatureBoundedDensity& d, double x) { return std::exp(-d.phi(x)); }

// (sigmoid(t) - 1/2)/t: the sharp quadratic curvature of log(1+e^t). Even,
// positive, 1/4 at the origin; series there to dodge 0/0.
inline double logistic_curvature(double t) {
  if (std::abs(t) < 1e-4) return 0.25 - t * t / 48.0;
  return (1.0 / (1.0 + std::exp(-t)) - 0.5) / t;
}

namespace detail {
inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}
inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
}  // namespace detail

enum class Table1Family { quadratic, hyperbolic, huber, logistic, cauchy };

inline CurvatureBoundedDensity make_table1(Table1Family fam, double delta = 1.0) {
  if (!(delta > 0.0)) throw std::invalid_argument("make_table1: delta must be positive");
  CurvatureBoundedDensity d;
  switch (fam) {
    case Table1Family::quadratic:
      d.phi = [](double x) { return 0.5 * x * x; };
      d.dphi = [](double x) { return x; };
      d.beta = [](double) { return 1.0; };
      d.nu = [](double) { return 1.0; };
      d.nu_floor = 1.0;
      d.phi_deriv = [](int k, double x) {
        switch (k) {
          case 0: return 0.5 * x * x;
          case 1: return x;
          case 2: return 1.0;
          default: return 0.0;
        }
      };
      break;
    case Table1Family::hyperbolic: {
      double d2 = delta * delta;
      d.phi = [d2](double x) { return std::sqrt(1.0 + x * x / d2); };
      d.dphi = [d2](double x) { return x / (d2 * std::sqrt(1.0 + x * x / d2)); };
      d.beta = [d2](double t) { return 1.0 / (d2 * std::sqrt(1.0 + t * t / d2)); };
      d.phi_deriv = [d2](int k, double x) {
        double r = 1.0 + x * x / d2;
        switch (k) {
          case 0: return std::sqrt(r);
          case 1: return x / (d2 * std::sqrt(r));
          case 2: return 1.0 / (d2 * r * std::sqrt(r));
          default: return -3.0 * x / (d2 * d2 * r * r * std::sqrt(r));
        }
      };
      break;
    }
    case Table1Family::huber:
      d.phi = [delta](double x) {
        double a = std::abs(x);
        return a < delta ? x * x : 2.0 * delta * a - delta * delta;
      };
      d.dphi = [delta](double x) {
        return std::abs(x) < delta ? 2.0 * x : 2.0 * delta * (x < 0 ? -1.0 : 1.0);
      };
      d.beta = [delta](double t) {
        double a = std::abs(t);
        return a < delta ? 2.0 : 2.0 * delta / a;
      };
      d.phi_deriv = [delta](int k, double x) {
        double a = std::abs(x);
        switch (k) {
          case 0: return a < delta ? x * x : 2.0 * delta * a - delta * delta;
          case 1: return a < delta ? 2.0 * x : 2.0 * delta * (x < 0 ? -1.0 : 1.0);
          case 2: return a < delta ? 2.0 : 0.0;
          default: return 0.0;
        }
      };
      break;
    case Table1Family::logistic:
      d.phi = [](double x) { return detail::softplus(x); };
      d.dphi = [](double x) { return detail::sigmoid(x); };
      d.beta = [](double t) { return logistic_curvature(t); };
      d.phi_deriv = [](int k, double x) {
        double s = detail::sigmoid(x);
        switch (k) {
          case 0: return detail::softplus(x);
          case 1: return s;
          case 2: return s * (1.0 - s);
          default: return s * (1.0 - s) * (1.0 - 2.0 * s);
        }
      };
      break;
    case Table1Family::cauchy: {
      double d2 = delta * delta;
      d.phi = [d2](double x) { return std::log1p(x * x / d2); };
      d.dphi = [d2](double x) { return 2.0 * x / (x * x + d2); };
      d.beta = [d2](double t) { return 2.0 / (t * t + d2); };
      // phi'' dips to -1/(4 delta^2) at x^2 = 3 delta^2, so this family is
      // not convex and may not contribute 0 to a sum's nu: the concave
      // shoulder would silently break the majorant. Expose the global
      // curvature floor instead (Taylor with integral remainder turns a
      // pointwise floor into a valid tangent quadratic for any sign).
      // Standalone, nu stays negative and majorants are refused.
      d.nu = [d2](double) { return -0.25 / d2; };
      d.nu_floor = -0.25 / d2;
      d.phi_deriv = [d2](int k, double x) {
        double den = x * x + d2;
        switch (k) {
          case 0: return std::log1p(x * x / d2);
          case 1: return 2.0 * x / den;
          case 2: return 2.0 * (d2 - x * x) / (den * den);
          default: return 4.0 * x * (x * x - 3.0 * d2) / (den * den * den);
        }
      };
      break;
    }
  }
  return d;
}

// phi, dphi, beta add; nu adds over the components that expose it, and only
// convex components may omit nu (omission contributes 0, which understates
// any concave stretch — non-convex families must expose their floor, possibly
// negative); derivatives add when all present.
inline CurvatureBoundedDensity sum_densities(std::vector<CurvatureBoundedDensity> parts) {
  if (parts.empty()) throw std::invalid_argument("sum_densities: empty list");
  auto shared = std::make_shared<std::vector<CurvatureBoundedDensity>>(std::move(parts));
  CurvatureBoundedDensity d;
  d.phi = [shared](double x) {
    double s = 0.0;
    for (const auto& p : *shared) s += p.phi(x);
    return s;
  };
  d.dphi = [shared](double x) {
    double s = 0.0;
    for (const auto& p : *shared) s += p.dphi(x);
    return s;
  };
  d.beta = [shared](double t) {
    double s = 0.0;
    for (const auto& p : *shared) s += p.beta(t);
    return s;
  };
  bool any_nu = false, all_derivs = true;
  double floor = 0.0;
  for (const auto& p : *shared) {
    if (p.has_nu()) {
      any_nu = true;
      floor += p.nu_floor;
    }
    if (!p.has_derivs()) all_derivs = false;
  }
  if (!any_nu) throw NuUnavailable();
  d.nu = [shared](double t) {
    double s = 0.0;
    for (const auto& p : *shared)
      if (p.has_nu()) s += p.nu(t);
    return s;
  };
  d.nu_floor = floor;
  if (all_derivs) {
    d.phi_deriv = [shared](int k, double x) {
      double s = 0.0;
      for (const auto& p : *shared) s += p.phi_deriv(k, x);
      return s;
    };
  }
  return d;
}

// Bayesian logistic-regression posterior on one scalar parameter:
// phi(x) = x^2/(2 s^2) + sum_j softplus(y_j w_j x) - log A.
struct LogRegConfig {
  double s = 1.2;
  double A = 1.0;
  std::vector<double> labels;    // each +1 or -1
  std::vector<double> features;  // same length as labels
};

inline CurvatureBoundedDensity make_logreg_target(const LogRegConfig& cfg) {
  if (!(cfg.s > 0.0)) throw std::invalid_argument("make_logreg_target: s must be positive");
  if (!(cfg.A > 0.0)) throw std::invalid_argument("make_logreg_target: A must be positive");
  if (cfg.labels.size() != cfg.features.size())
    throw std::invalid_argument("make_logreg_target: labels/features size mismatch");
  auto c = std::make_shared<std::vector<double>>();
  c->reserve(cfg.labels.size());
  for (std::size_t j = 0; j < cfg.labels.size(); ++j) {
    double y = cfg.labels[j];
    if (y != 1.0 && y != -1.0)
      throw std::invalid_argument("make_logreg_target: labels must be +1/-1");
    c->push_back(y * cfg.features[j]);
  }
  double inv_s2 = 1.0 / (cfg.s * cfg.s);
  double log_a = std::log(cfg.A);

  CurvatureBoundedDensity d;
  d.phi = [c, inv_s2, log_a](double x) {
    double s = 0.5 * inv_s2 * x * x - log_a;
    for (double cj : *c) s += detail::softplus(cj * x);
    return s;
  };
  d.dphi = [c, inv_s2](double x) {
    double s = inv_s2 * x;
    for (double cj : *c) s += cj * detail::sigmoid(cj * x);
    return s;
  };
  d.beta = [c, inv_s2](double t) {
    double s = inv_s2;
    for (double cj : *c) s += cj * cj * logistic_curvature(cj * t);
    return s;
  };
  d.nu = [inv_s2](double) { return inv_s2; };
  d.nu_floor = inv_s2;
  d.phi_deriv = [c, inv_s2, log_a](int k, double x) {
    switch (k) {
      case 0: {
        double s = 0.5 * inv_s2 * x * x - log_a;
        for (double cj : *c) s += detail::softplus(cj * x);
        return s;
      }
      case 1: {
        double s = inv_s2 * x;
        for (double cj : *c) s += cj * detail::sigmoid(cj * x);
        return s;
      }
      case 2: {
        double s = inv_s2;
        for (double cj : *c) {
          double sg = detail::sigmoid(cj * x);
          s += cj * cj * sg * (1.0 - sg);
        }
        return s;
      }
      default: {
        double s = 0.0;
        for (double cj : *c) {
          double sg = detail::sigmoid(cj * x);
          s += cj * cj * cj * sg * (1.0 - sg) * (1.0 - 2.0 * sg);
        }
        return s;
      }
    }
  };
  return d;
}

// Reproducible synthetic dataset: Rademacher labels, uniform features.
struct LogRegInstanceSpec {
  std::uint64_t seed = 0;
  int J = 10;
  double s = 1.2;
  double A = 1.0;
  double w_lo = -2.0;
  double w_hi = 2.0;
};

inline LogRegConfig make_seeded_logreg(const LogRegInstanceSpec& spec) {
  if (spec.J < 1) throw std::invalid_argument("make_seeded_logreg: J must be >= 1");
  LogRegConfig cfg;
  cfg.s = spec.s;
  cfg.A = spec.A;
  SplitMix64 g(derive_seed(spec.seed, "dataset"));
  for (int j = 0; j < spec.J; ++j) {
    cfg.labels.push_back(static_cast<double>(g.sign()));
    cfg.features.push_back(g.uniform(spec.w_lo, spec.w_hi));
  }
  return cfg;
}

struct ProposalConfig {
  double mu = 0.0;
  double theta = 1.0;  // proposal variance
};

namespace detail {
inline double probed_nu_floor(const CurvatureBoundedDensity& p) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 4096; ++i) {
    double t = -64.0 + i * (128.0 / 4096.0);
    best = std::min(best, p.nu(t));
  }
  return best;
}
}  // namespace detail

// Unnormalized density of p(x)^2 / q(x) with q = N(mu_q, theta):
// phi_new = 2 phi_p - (x-mu_q)^2/(2 theta) - log(2 pi theta)/2.
// The subtracted quadratic lowers both curvatures by 1/theta, so the result
// is well posed only when 2 inf nu_p > 1/theta.
inline CurvatureBoundedDensity make_squared_ratio_target(const CurvatureBoundedDensity& p,
                                                         const ProposalConfig& q) {
  if (!(q.theta > 0.0)) throw std::invalid_argument("make_squared_ratio_target: theta <= 0");
  if (!p.has_nu())
    throw IllPosedRatio("squared-ratio target needs a strongly convex p (no nu available)");
  double floor = p.nu_floor > 0.0 ? p.nu_floor : detail::probed_nu_floor(p);
  double inv_theta = 1.0 / q.theta;
  if (!(2.0 * floor > inv_theta))
    throw IllPosedRatio("proposal variance too small: 2*inf(nu) <= 1/theta");

  double mu_q = q.mu;
  double log_norm = 0.5 * std::log(2.0 * 3.141592653589793238462643383279502884 * q.theta);
  auto base = std::make_shared<CurvatureBoundedDensity>(p);

  CurvatureBoundedDensity d;
  d.phi = [base, mu_q, inv_theta, log_norm](double x) {
    double r = x - mu_q;
    return 2.0 * base->phi(x) - 0.5 * inv_theta * r * r - log_norm;
  };
  d.dphi = [base, mu_q, inv_theta](double x) {
    return 2.0 * base->dphi(x) - inv_theta * (x - mu_q);
  };
  d.beta = [base, inv_theta](double t) {
    double b = 2.0 * base->beta(t) - inv_theta;
    if (!(b > 0.0)) throw IllPosedRatio("squared-ratio curvature became non-positive");
    return b;
  };
  d.nu = [base, inv_theta](double t) {
    double n = 2.0 * base->nu(t) - inv_theta;
    if (!(n > 0.0)) throw IllPosedRatio("squared-ratio curvature became non-positive");
    return n;
  };
  d.nu_floor = 2.0 * floor - inv_theta;
  if (p.has_derivs()) {
    d.phi_deriv = [base, mu_q, inv_theta, log_norm](int k, double x) {
      switch (k) {
        case 0: {
          double r = x - mu_q;
          return 2.0 * base->phi_deriv(0, x) - 0.5 * inv_theta * r * r - log_norm;
        }
        case 1: return 2.0 * base->phi_deriv(1, x) - inv_theta * (x - mu_q);
        case 2: return 2.0 * base->phi_deriv(2, x) - inv_theta;
        default: return 2.0 * base->phi_deriv(k, x);
      }
    };
  }
  return d;
}

}  // namespace gaussenv
