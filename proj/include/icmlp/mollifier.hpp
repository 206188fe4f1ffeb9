#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "icmlp/errors.hpp"
#include "icmlp/grid.hpp"
#include "icmlp/net.hpp"

namespace icmlp {

namespace detail {

inline double raw_bump(double t) {
  const double s = 1.0 - t * t;
  return s > 0.0 ? std::exp(-1.0 / s) : 0.0;
}

}  // namespace detail

/// Z with Z * int_{-1}^{1} exp(-1/(1-t^2)) dt = 1. The integrand is flat to all
/// orders at +-1, so the trapezoid rule converges faster than any power.
inline double bump_normalizer() {
  static const double z = [] {
    constexpr std::size_t n = 1 << 14;
    const double h = 2.0 / n;
    double sum = 0.0;
    for (std::size_t i = 1; i < n; ++i) sum += detail::raw_bump(-1.0 + h * static_cast<double>(i));
    return 1.0 / (sum * h);
  }();
  return z;
}

/// Unit-mass bump supported on (-1, 1).
inline double bump(double t) { return bump_normalizer() * detail::raw_bump(t); }

/// Midpoint-rule discretization of x -> int sigma(a(x - y) + b) phi_eps(y) dy.
struct MollifierSpec {
  double width = 0.1;     // eps
  std::size_t nodes = 64;  // m
  double slope = 1.0;     // a
  double shift = 0.0;     // b

  static constexpr double mass_tolerance = 1e-6;

  std::vector<double> positions() const {
    std::vector<double> y(nodes);
    const double step = 2.0 * width / static_cast<double>(nodes);
    for (std::size_t k = 0; k < nodes; ++k) y[k] = -width + (static_cast<double>(k) + 0.5) * step;
    return y;
  }

  /// lambda_k = phi_eps(y_k) * dy with phi_eps(y) = phi(y / eps) / eps.
  std::vector<double> weights() const {
    const double step = 2.0 * width / static_cast<double>(nodes);
    std::vector<double> lambda;
    lambda.reserve(nodes);
    for (double y : positions()) lambda.push_back(bump(y / width) / width * step);
    return lambda;
  }

  double mass() const {
    double total = 0.0;
    for (double w : weights()) total += w;
    return total;
  }

  void validate() const {
    if (!(width > 0.0) || !std::isfinite(width)) throw StructuralError("mollifier width must be positive");
    if (nodes < 2) throw StructuralError("mollifier needs at least 2 quadrature nodes");
    if (slope == 0.0 || !std::isfinite(slope) || !std::isfinite(shift)) {
      throw StructuralError("mollifier slope must be nonzero and finite");
    }
    const double defect = std::abs(mass() - 1.0);
    if (defect > mass_tolerance) {
      throw StructuralError("quadrature mass " + std::to_string(mass()) + " is off by more than 1e-6; use more nodes");
    }
  }
};

/// Depth-1 net S(x) = sum_k lambda_k sigma(a(x - y_k) + b).
inline ScalarNet build_mollified(const MollifierSpec& spec, const Activation& activation) {
  if (activation.is_affine()) {
    throw NonlinearityRequiredError("mollifying an affine activation cannot produce curvature");
  }
  spec.validate();
  Layer layer;
  for (double y : spec.positions()) {
    layer.a.push_back(spec.slope);
    layer.b.push_back(spec.shift - spec.slope * y);
  }
  NetParams p;
  p.layers.push_back(std::move(layer));
  p.v = spec.weights();
  p.c = {0.0};
  return ScalarNet(activation, std::move(p));
}

struct CurvaturePoint {
  double x0 = 0.0;
  double s2 = 0.0;       // estimate of S''(x0)
  double fd_step = 0.0;  // h
};

struct CurvatureSearch {
  double window = 3.0;        // scan [-window, window]
  std::size_t points = 1201;  // scan grid size
  double fd_step = 0.005;     // h; eps / 20 for a mollifier of width eps
  double floor = 1e-4;        // minimum |S''| / max|S| on the window

  static CurvatureSearch for_mollifier(const MollifierSpec& spec) {
    CurvatureSearch search;
    search.fd_step = spec.width / 20.0;
    return search;
  }
};

inline double second_difference(const ScalarNet& s, double x, double h) {
  return (s(x + h) - 2.0 * s(x) + s(x - h)) / (h * h);
}

/// Point of largest |second difference| on the scan grid. The returned s2 is
/// the Richardson combination (4 D(h/2) - D(h)) / 3, which cancels the O(h^2)
/// bias of the plain difference D(h).
inline CurvaturePoint find_curvature(const ScalarNet& s, const CurvatureSearch& search = {}) {
  if (s.depth() != 1) throw StructuralError("find_curvature expects a depth-1 network");
  if (!(search.fd_step > 0.0) || !(search.window > 0.0) || search.points < 3) {
    throw StructuralError("bad curvature search settings");
  }
  const double h = search.fd_step;
  double best_x = 0.0;
  double best = -1.0;
  double scale = 0.0;
  for (double x : linspace(-search.window, search.window, search.points)) {
    scale = std::max(scale, std::abs(s(x)));
    const double d = std::abs(second_difference(s, x, h));
    if (d > best) {
      best = d;
      best_x = x;
    }
  }
  const double s2 = (4.0 * second_difference(s, best_x, 0.5 * h) - second_difference(s, best_x, h)) / 3.0;
  if (!(scale > 0.0) || !(std::abs(s2) / scale >= search.floor)) {
    throw CurvatureNotFoundError("no point with |S''| above the curvature floor on [-" +
                                 std::to_string(search.window) + ", " + std::to_string(search.window) +
                                 "]; shrink eps or widen the window");
  }
  return {best_x, s2, h};
}

}  // namespace icmlp
