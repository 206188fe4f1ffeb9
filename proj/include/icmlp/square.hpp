#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "icmlp/algebra.hpp"
#include "icmlp/chebyshev.hpp"
#include "icmlp/errors.hpp"
#include "icmlp/grid.hpp"
#include "icmlp/mollifier.hpp"
#include "icmlp/net.hpp"

namespace icmlp {

/// Depth-1 network P with c = 0 and |P(x) - x^2| <= certified_error on [-radius, radius].
struct SquareApproximator {
  ScalarNet net;
  double radius = 1.0;
  double certified_error = 0.0;
  double delta = 0.0;
  double x0 = 0.0;
  double s2 = 0.0;
};

/// Sup of |P(x) - x^2| on [-radius, radius]: the maximum over `points`
/// equally spaced samples plus half a grid step times the largest observed
/// slope of the error between neighbours.
inline double certify_square(const ScalarNet& p, double radius, std::size_t points = 4001) {
  const auto xs = linspace(-radius, radius, points);
  const double step = xs[1] - xs[0];
  double sup = 0.0;
  double slope = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double err = p(xs[i]) - xs[i] * xs[i];
    if (!std::isfinite(err)) return std::numeric_limits<double>::infinity();
    sup = std::max(sup, std::abs(err));
    if (i > 0) slope = std::max(slope, std::abs(err - prev) / step);
    prev = err;
  }
  return sup + 0.5 * step * slope;
}

namespace detail {

/// Neurons of a depth-1 net whose pre-activation crosses a kink of a
/// piecewise-linear activation somewhere on [lo, hi]. The others are affine
/// there and cancel exactly in a second difference.
inline ScalarNet active_part(const ScalarNet& s, double lo, double hi) {
  const auto kinks = s.activation().breakpoints();
  if (kinks.empty()) return s;
  const Layer& layer = s.layer(0);
  NetParams p;
  Layer kept;
  for (std::size_t j = 0; j < layer.width(); ++j) {
    const double z1 = layer.a[j] * lo + layer.b[j];
    const double z2 = layer.a[j] * hi + layer.b[j];
    const double zmin = std::min(z1, z2);
    const double zmax = std::max(z1, z2);
    bool crosses = false;
    for (double k : kinks) crosses = crosses || (zmin < k && k < zmax);
    if (!crosses) continue;
    kept.a.push_back(layer.a[j]);
    kept.b.push_back(layer.b[j]);
    p.v.push_back(s.params().v[j]);
  }
  if (kept.width() == 0) return s;
  p.layers.push_back(std::move(kept));
  p.c = s.params().c;
  p.d = s.params().d;
  return ScalarNet(s.activation(), std::move(p));
}

}  // namespace detail

struct SquareOptions {
  std::size_t certify_points = 4001;
  double stage_budget = std::numeric_limits<double>::infinity();
};

/// T(x) = [S(x0 + delta x) + S(x0 - delta x) - 2 S(x0)] / (delta^2 s2) as one depth-1 net.
///
/// For a piecewise-linear activation only neurons with a kink inside
/// [x0 - delta R, x0 + delta R] are kept; on [-R, R] the result is unchanged.
inline SquareApproximator build_square(const CurvaturePoint& curv, const ScalarNet& s, double delta,
                                       double radius, const SquareOptions& options = {}) {
  if (!(delta > 0.0) || !(radius > 0.0)) throw StructuralError("build_square needs delta > 0 and R > 0");
  if (s.depth() != 1) throw StructuralError("build_square expects a depth-1 mollified network");
  if (curv.s2 == 0.0 || !std::isfinite(curv.s2)) throw StructuralError("curvature estimate must be nonzero");

  const ScalarNet local = detail::active_part(s, curv.x0 - delta * radius, curv.x0 + delta * radius);
  const double scale = 1.0 / (delta * delta * curv.s2);
  const std::vector<ScalarNet> parts{reparam_affine(local, curv.x0, delta), reparam_affine(local, curv.x0, -delta),
                                     affine_net<ScalarNet>(s.activation(), {0.0}, -2.0 * local(curv.x0))};
  const ScalarNet combined = linear_combine(parts, std::vector<double>{scale, scale, scale});
  NetParams p = combined.params();
  p.c[0] = 0.0;  // delta c_S - delta c_S: zero by construction
  ScalarNet net(s.activation(), std::move(p));

  const double err = certify_square(net, radius, options.certify_points);
  if (err > options.stage_budget) {
    throw StageBudgetExceededError(err, options.stage_budget,
                                   "square approximator error " + std::to_string(err) + " exceeds stage budget " +
                                       std::to_string(options.stage_budget) + "; shrink delta");
  }
  return {std::move(net), radius, err, delta, curv.x0, curv.s2};
}

/// x -> R^2 P(x / R): valid on [-R r, R r] with error R^2 e when P is valid on [-r, r] with error e.
inline SquareApproximator rescale_square(const SquareApproximator& unit, double radius) {
  const ScalarNet stretched = reparam_affine(unit.net, 0.0, 1.0 / radius);
  const std::vector<ScalarNet> one{stretched};
  ScalarNet net = linear_combine(one, std::vector<double>{radius * radius});
  return {std::move(net), unit.radius * radius, unit.certified_error * radius * radius, unit.delta, unit.x0, unit.s2};
}

/// Search schedule for square approximators.
struct SquareSearch {
  double epsilon = 0.1;
  std::size_t smooth_nodes = 64;
  std::size_t first_pl_nodes = 1024;  // piecewise-linear activations start here and double
  std::size_t max_nodes = 65536;
  double first_delta = 0.25;
  double min_delta = 1e-6;
  std::size_t certify_points = 4001;
};

/// Builds and caches unit square approximators (valid on [-1, 1]) for one activation.
class Squarer {
 public:
  explicit Squarer(Activation activation, SquareSearch search = {})
      : activation_(std::move(activation)), search_(search) {
    if (activation_.is_affine()) {
      throw NonlinearityRequiredError("an affine activation cannot approximate x^2");
    }
  }

  const Activation& activation() const noexcept { return activation_; }
  const SquareSearch& search() const noexcept { return search_; }

  /// Narrowest approximator with certified error <= kappa on [-1, 1]. Node
  /// counts are tried in increasing order; for each one the whole delta ladder
  /// is built (halving until the error has failed to improve twice), since for
  /// piecewise-linear activations a smaller delta also means fewer active neurons.
  const SquareApproximator& unit(double kappa) {
    if (const auto* hit = lookup(kappa)) return *hit;
    for (std::size_t m : node_ladder()) {
      if (scanned_.count(m)) continue;
      scanned_.insert(m);
      const Source* src = source(m);
      if (!src) continue;
      double prev = std::numeric_limits<double>::infinity();
      int worse = 0;
      for (double delta = search_.first_delta; delta >= search_.min_delta; delta *= 0.5) {
        const SquareApproximator& p = build(*src, m, delta);
        if (p.certified_error >= prev) {
          if (++worse >= 2) break;
        } else {
          worse = 0;
        }
        if (p.certified_error < prev) floor_delta_[m] = delta;
        prev = std::min(prev, p.certified_error);
      }
      if (const auto* hit = lookup(kappa)) return *hit;
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [key, p] : built_) best = std::min(best, p->certified_error);
    throw StageBudgetExceededError(best, kappa,
                                   "no square approximator reaches error " + std::to_string(kappa) +
                                       " (best " + std::to_string(best) + ")");
  }

  /// Largest |sum lambda - 1| over the mollifiers used so far.
  double mass_defect() const noexcept { return mass_defect_; }

 private:
  struct Source {
    ScalarNet net;
    CurvaturePoint curv;
  };

  std::vector<std::size_t> node_ladder() const {
    if (!activation_.is_piecewise_linear()) return {search_.smooth_nodes};
    std::vector<std::size_t> out;
    for (std::size_t m = search_.first_pl_nodes; m <= search_.max_nodes; m *= 2) out.push_back(m);
    if (out.empty()) out.push_back(search_.max_nodes);
    return out;
  }

  /// Among equal widths the largest delta wins: the output scale grows like
  /// 1/delta^2 and amplifies rounding in the layers a square is fused into.
  /// Deltas past the error minimum of their ladder are rounding-dominated and skipped.
  const SquareApproximator* lookup(double kappa) const {
    const SquareApproximator* pick = nullptr;
    for (const auto& [key, p] : built_) {
      const auto floor = floor_delta_.find(key.first);
      if (floor != floor_delta_.end() && key.second < floor->second) continue;
      if (!(p->certified_error <= kappa)) continue;
      if (!pick || p->net.neuron_count() < pick->net.neuron_count() ||
          (p->net.neuron_count() == pick->net.neuron_count() && p->delta > pick->delta)) {
        pick = p.get();
      }
    }
    return pick;
  }

  const Source* source(std::size_t m) {
    if (auto it = sources_.find(m); it != sources_.end()) return it->second ? &*it->second : nullptr;
    std::optional<Source> found;
    for (double b : {0.0, 0.5, -0.5}) {
      for (double a : {1.0, 2.0, 4.0}) {
        MollifierSpec spec{search_.epsilon, m, a, b};
        try {
          ScalarNet s = build_mollified(spec, activation_);
          CurvaturePoint curv = find_curvature(s, CurvatureSearch::for_mollifier(spec));
          mass_defect_ = std::max(mass_defect_, std::abs(spec.mass() - 1.0));
          found.emplace(Source{std::move(s), curv});
        } catch (const CurvatureNotFoundError&) {
          continue;
        }
        break;
      }
      if (found) break;
    }
    auto& slot = sources_[m];
    if (found) slot = std::make_unique<Source>(std::move(*found));
    return slot ? slot.get() : nullptr;
  }

  const SquareApproximator& build(const Source& src, std::size_t m, double delta) {
    auto& slot = built_[{m, delta}];
    if (!slot) {
      SquareOptions options;
      options.certify_points = search_.certify_points;
      slot = std::make_unique<SquareApproximator>(build_square(src.curv, src.net, delta, 1.0, options));
    }
    return *slot;
  }

  Activation activation_;
  SquareSearch search_;
  std::map<std::size_t, std::unique_ptr<Source>> sources_;
  std::set<std::size_t> scanned_;
  std::map<std::size_t, double> floor_delta_;  // delta of least error per node count
  std::map<std::pair<std::size_t, double>, std::unique_ptr<SquareApproximator>> built_;
  double mass_defect_ = 0.0;
};

/// A network together with a bound on the function it approximates and on its error.
template <class Tag>
struct Approximant {
  BasicNet<Tag> net;
  double magnitude = 0.0;  // sup |target| over the working domain
  double error = 0.0;      // sup |net - target| over the working domain
};

/// Largest |net| over a grid of the box (per-axis point count).
template <class Tag>
double sampled_range(const BasicNet<Tag>& net, const Box& domain, std::size_t points_per_axis = 0) {
  if (points_per_axis == 0) points_per_axis = domain.dim() == 1 ? 2001 : domain.dim() == 2 ? 101 : 21;
  const BoxGrid grid(domain, points_per_axis);
  return grid_sup(grid, [&](std::span<const double> x) { return net.evaluate_at(x.data()); });
}

/// compose_shallow(P, w) after checking that the sampled range of w, widened
/// by 10%, fits inside P's radius.
template <class Tag>
BasicNet<Tag> square_net(const SquareApproximator& p, const BasicNet<Tag>& w, const Box& domain,
                         std::size_t points_per_axis = 0) {
  if (domain.dim() != w.input_dim()) throw StructuralError("square_net: domain dimension mismatch");
  const double needed = 1.1 * sampled_range(w, domain, points_per_axis);
  if (needed > p.radius) {
    throw RangeOverflowError(needed, p.radius,
                             "inner range " + std::to_string(needed) + " exceeds square radius " +
                                 std::to_string(p.radius));
  }
  return compose_shallow(p.net, w);
}

/// Bounds carried through the square and product constructions: magnitude
/// bounds the exact function, error bounds |network - exact function|.
struct RangeBound {
  double magnitude = 0.0;
  double error = 0.0;
};

constexpr double square_margin = 1.1;

/// Radius of the square approximator applied to u: 10% above sup |u~|.
inline double square_radius(const RangeBound& u) { return square_margin * (u.magnitude + u.error); }

/// P_R(u~) = u~^2 + eta with |eta| <= R^2 kappa, and |u~^2 - u^2| <= e (2|u| + e).
inline RangeBound square_bound(const RangeBound& u, double kappa) {
  const double r = square_radius(u);
  return {u.magnitude * u.magnitude, u.error * (2.0 * u.magnitude + u.error) + r * r * kappa};
}

/// (1/2)[P(u~ + v~) - P(u~) - P(v~)] = u~ v~ + (eta_s - eta_u - eta_v) / 2.
inline RangeBound product_bound(const RangeBound& u, const RangeBound& v, double kappa) {
  const double rs = square_radius({u.magnitude + v.magnitude, u.error + v.error});
  const double ru = square_radius(u);
  const double rv = square_radius(v);
  const double exact = u.magnitude * v.error + v.magnitude * u.error + u.error * v.error;
  return {u.magnitude * v.magnitude, exact + 0.5 * kappa * (rs * rs + ru * ru + rv * rv)};
}

/// Squares and products of approximants driven by one unit square approximator.
template <class Tag>
class ProductBuilder {
 public:
  explicit ProductBuilder(const SquareApproximator& unit) : unit_(unit) {}

  Approximant<Tag> square(const Approximant<Tag>& u) const {
    const RangeBound in{u.magnitude, u.error};
    const double r = square_radius(in);
    if (r == 0.0) return {zero(u.net), 0.0, 0.0};
    const RangeBound out = square_bound(in, unit_.certified_error);
    return {compose_shallow(rescale_square(unit_, r).net, u.net), out.magnitude, out.error};
  }

  Approximant<Tag> product(const Approximant<Tag>& u, const Approximant<Tag>& v) const {
    const std::vector<BasicNet<Tag>> pair{u.net, v.net};
    const Approximant<Tag> sum{linear_combine(pair, std::vector<double>{1.0, 1.0}), u.magnitude + v.magnitude,
                               u.error + v.error};
    const std::vector<BasicNet<Tag>> parts{square(sum).net, square(u).net, square(v).net};
    const RangeBound out = product_bound({u.magnitude, u.error}, {v.magnitude, v.error}, unit_.certified_error);
    return {linear_combine(parts, std::vector<double>{0.5, -0.5, -0.5}), out.magnitude, out.error};
  }

 private:
  static BasicNet<Tag> zero(const BasicNet<Tag>& like) {
    return affine_net<BasicNet<Tag>>(like.activation(), std::vector<double>(like.input_dim(), 0.0), 0.0);
  }
  const SquareApproximator& unit_;
};

/// Approximant for a network taken as exact, with its range sampled on the domain.
template <class Tag>
Approximant<Tag> sampled_approximant(const BasicNet<Tag>& net, const Box& domain, std::size_t points_per_axis = 0) {
  return {net, sampled_range(net, domain, points_per_axis), 0.0};
}

/// Network for u * v via (1/2)[(u+v)^2 - u^2 - v^2] with certified error.
template <class Tag>
Approximant<Tag> product_net(const Approximant<Tag>& u, const Approximant<Tag>& v, Squarer& squarer,
                             double kappa = 1e-4) {
  if (u.net.input_dim() != v.net.input_dim()) throw StructuralError("product_net: input dimension mismatch");
  return ProductBuilder<Tag>(squarer.unit(kappa)).product(u, v);
}

}  // namespace icmlp
