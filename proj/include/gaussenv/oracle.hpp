#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace gaussenv {

struct NoConvergence : std::runtime_error {
  NoConvergence() : std::runtime_error("quadrature did not reach tolerance") {}
};

struct QuadResult {
  double value;
  double est_error;
  int panels;
};

namespace detail {

// Gauss-Kronrod 15/7 nodes and weights (positive half).
inline constexpr double gk_node[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0};
inline constexpr double gk_wk[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
inline constexpr double gk_wg[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

struct Panel {
  double lo, hi, value, err;
  bool operator<(const Panel& o) const { return err < o.err; }
};

}  // namespace detail

// Adaptive Gauss-Kronrod integration. Infinite endpoints are brought to a
// finite range with x = t/(1-t^2); Kronrod nodes are interior, so mapped
// endpoints are never evaluated.
inline QuadResult integrate(const std::function<double(double)>& f, double lo, double hi,
                            double rel_tol = 1e-10, double abs_tol = 1e-14) {
  if (!(lo < hi)) throw std::invalid_argument("integrate: lo >= hi");

  std::function<double(double)> g;
  double tlo, thi;
  if (std::isinf(lo) || std::isinf(hi)) {
    auto map_inv = [](double x) {
      if (std::isinf(x)) return x > 0 ? 1.0 : -1.0;
      if (x == 0.0) return 0.0;
      return (-1.0 + std::sqrt(1.0 + 4.0 * x * x)) / (2.0 * x);
    };
    tlo = map_inv(lo);
    thi = map_inv(hi);
    g = [&f](double t) {
      double om = 1.0 - t * t;
      double v = f(t / om);
      if (v == 0.0) return 0.0;
      return v * (1.0 + t * t) / (om * om);
    };
  } else {
    tlo = lo;
    thi = hi;
    g = f;
  }

  auto panel15 = [&g](double a, double b) {
    double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double k15 = 0.0, g7 = 0.0;
    for (int i = 0; i < 7; ++i) {
      double fsum = g(c - h * detail::gk_node[i]) + g(c + h * detail::gk_node[i]);
      k15 += detail::gk_wk[i] * fsum;
      if (i % 2 == 1) g7 += detail::gk_wg[i / 2] * fsum;
    }
    double fc = g(c);
    k15 += detail::gk_wk[7] * fc;
    g7 += detail::gk_wg[3] * fc;
    k15 *= h;
    g7 *= h;
    return detail::Panel{a, b, k15, std::abs(k15 - g7)};
  };

  // A sharp feature can slip between the nodes of one wide panel with a
  // deceptively small error estimate, so start from a uniform pre-split.
  std::vector<detail::Panel> heap;
  auto add_panel = [&heap](detail::Panel p) {
    if (!std::isfinite(p.value) || !std::isfinite(p.err)) throw NoConvergence();
    heap.push_back(p);
    std::push_heap(heap.begin(), heap.end());
  };
  constexpr int kInitial = 16;
  double total = 0.0, total_err = 0.0;
  for (int i = 0; i < kInitial; ++i) {
    double a = tlo + (thi - tlo) * (double(i) / kInitial);
    double b = i + 1 == kInitial ? thi : tlo + (thi - tlo) * (double(i + 1) / kInitial);
    detail::Panel p = panel15(a, b);
    add_panel(p);
    total += p.value;
    total_err += p.err;
  }
  int splits = 0;
  while (total_err > std::max(abs_tol, rel_tol * std::abs(total))) {
    if (++splits > 10000) throw NoConvergence();
    std::pop_heap(heap.begin(), heap.end());
    detail::Panel worst = heap.back();
    heap.pop_back();
    total -= worst.value;
    total_err -= worst.err;
    double mid = 0.5 * (worst.lo + worst.hi);
    detail::Panel left = panel15(worst.lo, mid);
    detail::Panel right = panel15(mid, worst.hi);
    total += left.value + right.value;
    total_err += left.err + right.err;
    add_panel(left);
    add_panel(right);
    if (splits % 256 == 0) {  // drop the drift of the running sums
      total = total_err = 0.0;
      for (const detail::Panel& p : heap) {
        total += p.value;
        total_err += p.err;
      }
    }
  }
  return QuadResult{total, total_err, static_cast<int>(heap.size())};
}

}  // namespace gaussenv
