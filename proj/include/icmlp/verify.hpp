#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "icmlp/activation.hpp"
#include "icmlp/affine_fit.hpp"
#include "icmlp/algebra.hpp"
#include "icmlp/errors.hpp"
#include "icmlp/grid.hpp"
#include "icmlp/net.hpp"
#include "icmlp/rng.hpp"
#include "icmlp/train.hpp"

// Self-check suites behind `icmlp verify`. Each suite draws seeded random
// networks and compares a library transform against direct evaluation.

namespace icmlp {

/// Network with uniform(-1, 1) parameters, depth and widths as given.
template <class Net = VectorNet>
Net random_net(SplitMix64& rng, const Activation& activation, std::size_t input_dim,
               const std::vector<std::size_t>& widths) {
  NetParams p;
  p.input_dim = input_dim;
  std::size_t prev = 0;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    Layer layer;
    if (l > 0) {
      layer.w = WeightMatrix::builder(prev);
      for (std::size_t j = 0; j < widths[l]; ++j) {
        for (std::size_t i = 0; i < prev; ++i) layer.w.push(static_cast<WeightMatrix::index_type>(i), rng.uniform(-1, 1));
        layer.w.end_row();
      }
    }
    for (std::size_t k = 0; k < widths[l] * input_dim; ++k) layer.a.push_back(rng.uniform(-1, 1));
    for (std::size_t j = 0; j < widths[l]; ++j) layer.b.push_back(rng.uniform(-1, 1));
    p.layers.push_back(std::move(layer));
    prev = widths[l];
  }
  for (std::size_t j = 0; j < prev; ++j) p.v.push_back(rng.uniform(-1, 1));
  for (std::size_t k = 0; k < input_dim; ++k) p.c.push_back(rng.uniform(-1, 1));
  p.d = rng.uniform(-1, 1);
  return Net(activation, std::move(p));
}

/// Random architecture: depth in [0, max_depth], widths in [1, max_width].
inline std::vector<std::size_t> random_widths(SplitMix64& rng, std::size_t max_depth, std::size_t max_width) {
  std::vector<std::size_t> widths(rng.below(max_depth + 1));
  for (auto& w : widths) w = 1 + rng.below(max_width);
  return widths;
}

inline std::vector<double> random_point(SplitMix64& rng, std::size_t dim, double radius = 1.0) {
  std::vector<double> x(dim);
  for (auto& v : x) v = rng.uniform(-radius, radius);
  return x;
}

struct SuiteReport {
  std::string name;
  bool passed = false;
  std::size_t trials = 0;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct SuiteOptions {
  Activation activation = Activation::tanh();
  std::uint64_t seed = 1;
  std::size_t trials = 200;
};

inline const std::vector<std::string_view>& suite_names() {
  static const std::vector<std::string_view> names = {"affine-collapse", "pad-depth", "linear-combine",
                                                      "reparam", "compose", "gradient-check"};
  return names;
}

namespace detail {

inline SuiteReport finish(std::string name, std::size_t trials, double dev, double tol) {
  SuiteReport r{std::move(name), dev <= tol, trials, dev, tol, {}};
  return r;
}

inline SuiteReport suite_affine_collapse(const SuiteOptions& o) {
  SplitMix64 rng(o.seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < o.trials; ++t) {
    const std::size_t n = rng.below(2) ? 3 : 1;
    const VectorNet net = random_net(rng, o.activation, n, random_widths(rng, 4, 8));
    std::vector<double> probes;
    for (std::size_t i = 0; i < 1000; ++i) {
      const auto x = random_point(rng, n);
      probes.insert(probes.end(), x.begin(), x.end());
    }
    worst = std::max(worst, fit_affine(net, probes).max_residual);
  }
  SuiteReport r = finish("affine-collapse", o.trials, worst, 1e-9);
  if (!o.activation.is_affine()) r.detail = "activation " + o.activation.to_string() + " is not affine";
  return r;
}

inline SuiteReport suite_pad_depth(const SuiteOptions& o) {
  SplitMix64 rng(o.seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < o.trials; ++t) {
    const std::size_t n = 1 + rng.below(3);
    const VectorNet net = random_net(rng, o.activation, n, random_widths(rng, 3, 6));
    const VectorNet padded = pad_depth(net, DepthPadPlan{net.depth() + 1 + rng.below(3), 1 + rng.below(4)});
    for (int k = 0; k < 20; ++k) {
      const auto x = random_point(rng, n);
      worst = std::max(worst, std::abs(padded(x) - net(x)));
    }
  }
  return finish("pad-depth", o.trials, worst, 1e-11);
}

inline SuiteReport suite_linear_combine(const SuiteOptions& o) {
  SplitMix64 rng(o.seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < o.trials; ++t) {
    const std::size_t n = 1 + rng.below(3);
    std::vector<VectorNet> nets;
    std::vector<double> coeffs;
    const std::size_t count = 1 + rng.below(4);
    for (std::size_t k = 0; k < count; ++k) {
      nets.push_back(random_net(rng, o.activation, n, random_widths(rng, 3, 6)));
      coeffs.push_back(rng.uniform(-3, 3));
    }
    const VectorNet sum = linear_combine(nets, coeffs);
    for (int k = 0; k < 20; ++k) {
      const auto x = random_point(rng, n);
      double direct = 0.0;
      for (std::size_t i = 0; i < count; ++i) direct += coeffs[i] * nets[i](x);
      worst = std::max(worst, std::abs(sum(x) - direct));
    }
  }
  return finish("linear-combine", o.trials, worst, 1e-11);
}

inline SuiteReport suite_reparam(const SuiteOptions& o) {
  SplitMix64 rng(o.seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < o.trials; ++t) {
    const ScalarNet net = random_net<ScalarNet>(rng, o.activation, 1, random_widths(rng, 3, 6));
    const double shift = rng.uniform(-2, 2);
    const double scale = rng.uniform(-2, 2);
    const ScalarNet moved = reparam_affine(net, shift, scale);
    for (int k = 0; k < 20; ++k) {
      const double x = rng.uniform(-1, 1);
      worst = std::max(worst, std::abs(moved(x) - net(shift + scale * x)));
    }
  }
  return finish("reparam", o.trials, worst, 1e-11);
}

inline SuiteReport suite_compose(const SuiteOptions& o) {
  SplitMix64 rng(o.seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < o.trials; ++t) {
    const std::size_t n = 1 + rng.below(3);
    ScalarNet outer = random_net<ScalarNet>(rng, o.activation, 1, {1 + rng.below(6)});
    NetParams op = outer.params();
    op.c = {0.0};
    outer = ScalarNet(o.activation, std::move(op));
    const VectorNet inner = random_net(rng, o.activation, n, random_widths(rng, 3, 6));
    const VectorNet both = compose_shallow(outer, inner);
    for (int k = 0; k < 20; ++k) {
      const auto x = random_point(rng, n);
      worst = std::max(worst, std::abs(both(x) - outer(inner(x))));
    }
  }
  return finish("compose", o.trials, worst, 1e-11);
}

/// Central differences with h = 1e-5. The deviation |g - fd| / max(|fd|, 1e-3)
/// is at most 1e-5 exactly when the relative error is <= 1e-5 or the absolute
/// error is <= 1e-8.
inline SuiteReport suite_gradient_check(const SuiteOptions& o) {
  SplitMix64 rng(o.seed);
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t t = 0; t < o.trials; ++t) {
    const std::size_t n = rng.below(2) ? 3 : 1;
    const VectorNet net = random_net(rng, o.activation, n, random_widths(rng, 3, 5));
    const auto x = random_point(rng, n);
    const std::vector<double> grad = backward(net, x).flat();
    std::vector<double> theta = flatten(net);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double keep = theta[k];
      theta[k] = keep + h;
      const double up = unflatten(net, theta)(x);
      theta[k] = keep - h;
      const double down = unflatten(net, theta)(x);
      theta[k] = keep;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(grad[k] - fd) / std::max(std::abs(fd), 1e-3));
    }
  }
  return finish("gradient-check", o.trials, worst, 1e-5);
}

}  // namespace detail

/// Runs the named suite; throws StructuralError for an unknown name.
inline SuiteReport run_suite(std::string_view name, const SuiteOptions& options) {
  if (name == "affine-collapse") return detail::suite_affine_collapse(options);
  if (name == "pad-depth") return detail::suite_pad_depth(options);
  if (name == "linear-combine") return detail::suite_linear_combine(options);
  if (name == "reparam") return detail::suite_reparam(options);
  if (name == "compose") return detail::suite_compose(options);
  if (name == "gradient-check") return detail::suite_gradient_check(options);
  std::string known;
  for (auto s : suite_names()) known += (known.empty() ? "" : ", ") + std::string(s);
  throw StructuralError("unknown suite '" + std::string(name) + "'; known suites: " + known);
}

}  // namespace icmlp
