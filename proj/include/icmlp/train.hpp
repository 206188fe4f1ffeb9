#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "icmlp/errors.hpp"
#include "icmlp/net.hpp"
#include "icmlp/rng.hpp"

namespace icmlp {

/// Partials for one hidden layer. `w` is dense (width x previous width) even
/// where the network stores no weight: a structural zero still has a gradient.
struct LayerGradient {
  std::vector<std::vector<double>> w;
  std::vector<double> a;  // width x input_dim, row-major like Layer::a
  std::vector<double> b;
};

struct GradientBundle {
  std::vector<LayerGradient> layers;
  std::vector<double> v;
  std::vector<double> c;
  double d = 0.0;
  double output = 0.0;  // H(x) for a single-point backward
  double loss = 0.0;    // mean squared error for a batch gradient

  /// Same order as flatten().
  std::vector<double> flat() const {
    std::vector<double> out;
    for (const auto& layer : layers) {
      for (const auto& row : layer.w) out.insert(out.end(), row.begin(), row.end());
      out.insert(out.end(), layer.a.begin(), layer.a.end());
      out.insert(out.end(), layer.b.begin(), layer.b.end());
    }
    out.insert(out.end(), v.begin(), v.end());
    out.insert(out.end(), c.begin(), c.end());
    out.push_back(d);
    return out;
  }
};

namespace detail {

inline GradientBundle zero_gradient(const NetParams& p) {
  GradientBundle g;
  std::size_t prev = 0;
  for (const auto& layer : p.layers) {
    LayerGradient lg;
    lg.w.assign(&layer == &p.layers.front() ? 0 : layer.width(), std::vector<double>(prev, 0.0));
    lg.a.assign(layer.a.size(), 0.0);
    lg.b.assign(layer.width(), 0.0);
    g.layers.push_back(std::move(lg));
    prev = layer.width();
  }
  g.v.assign(p.v.size(), 0.0);
  g.c.assign(p.input_dim, 0.0);
  return g;
}

/// Adds upstream * dH/dtheta at x into g and returns H(x).
inline double accumulate_gradient(const Activation& act, const NetParams& p, const double* x, double upstream,
                                  GradientBundle& g) {
  const std::size_t n = p.input_dim;
  const std::size_t depth = p.layers.size();
  std::vector<std::vector<double>> z(depth);
  std::vector<std::vector<double>> h(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    const Layer& layer = p.layers[l];
    z[l].assign(layer.width(), 0.0);
    for (std::size_t j = 0; j < layer.width(); ++j) {
      double s = 0.0;
      if (l > 0) {
        const auto idx = layer.w.row_indices(j);
        const auto val = layer.w.row_values(j);
        for (std::size_t k = 0; k < idx.size(); ++k) s += val[k] * h[l - 1][idx[k]];
      }
      s += dot(layer.input_weights(j, n), x);
      z[l][j] = s + layer.b[j];
    }
    check_layer(z[l], l + 1);
    h[l] = z[l];
    act.apply(h[l]);
    check_layer(h[l], l + 1);
  }
  double out = p.d;
  if (depth > 0) {
    for (std::size_t j = 0; j < p.v.size(); ++j) out += p.v[j] * h[depth - 1][j];
  }
  for (std::size_t k = 0; k < n; ++k) out += p.c[k] * x[k];
  if (!std::isfinite(out)) throw NumericOverflowError(depth + 1, "non-finite network output");

  for (std::size_t k = 0; k < n; ++k) g.c[k] += upstream * x[k];
  g.d += upstream;
  if (depth == 0) return out;

  std::vector<double> delta(p.v.size());
  for (std::size_t j = 0; j < p.v.size(); ++j) {
    g.v[j] += upstream * h[depth - 1][j];
    delta[j] = upstream * p.v[j] * act.derivative(z[depth - 1][j]);
  }
  for (std::size_t l = depth; l-- > 0;) {
    const Layer& layer = p.layers[l];
    LayerGradient& lg = g.layers[l];
    for (std::size_t j = 0; j < layer.width(); ++j) {
      lg.b[j] += delta[j];
      for (std::size_t k = 0; k < n; ++k) lg.a[j * n + k] += delta[j] * x[k];
    }
    if (l == 0) break;
    const std::vector<double>& below = h[l - 1];
    for (std::size_t j = 0; j < layer.width(); ++j) {
      for (std::size_t i = 0; i < below.size(); ++i) lg.w[j][i] += delta[j] * below[i];
    }
    std::vector<double> next(below.size(), 0.0);
    for (std::size_t j = 0; j < layer.width(); ++j) {
      const auto idx = layer.w.row_indices(j);
      const auto val = layer.w.row_values(j);
      for (std::size_t k = 0; k < idx.size(); ++k) next[idx[k]] += val[k] * delta[j];
    }
    for (std::size_t i = 0; i < next.size(); ++i) next[i] *= act.derivative(z[l - 1][i]);
    delta = std::move(next);
  }
  return out;
}

}  // namespace detail

/// Reverse-mode partials of upstream * H(x) with respect to every parameter.
template <class Tag>
GradientBundle backward(const BasicNet<Tag>& net, typename Tag::argument_type x, double upstream = 1.0) {
  if (!net.activation().has_derivative()) {
    throw UnsupportedActivationError("activation " + net.activation().name() + " has no derivative");
  }
  GradientBundle g = detail::zero_gradient(net.params());
  if constexpr (BasicNet<Tag>::is_scalar) {
    g.output = detail::accumulate_gradient(net.activation(), net.params(), &x, upstream, g);
  } else {
    if (x.size() != net.input_dim()) throw StructuralError("input dimension mismatch in backward");
    g.output = detail::accumulate_gradient(net.activation(), net.params(), x.data(), upstream, g);
  }
  return g;
}

/// Regression samples; x is row-major with input_dim coordinates per row.
struct Dataset {
  std::size_t input_dim = 1;
  std::vector<double> x;
  std::vector<double> y;

  std::size_t size() const noexcept { return y.size(); }
  const double* point(std::size_t i) const { return x.data() + i * input_dim; }

  void validate() const {
    if (input_dim == 0) throw StructuralError("dataset input dimension must be positive");
    if (x.size() != y.size() * input_dim) throw StructuralError("dataset x/y sizes disagree");
    if (y.empty()) throw StructuralError("dataset is empty");
  }
};

/// Mean squared error and its gradient over the listed samples, summed in index order.
template <class Tag>
GradientBundle mse_gradient(const BasicNet<Tag>& net, const Dataset& data, std::span<const std::size_t> rows) {
  if (!net.activation().has_derivative()) {
    throw UnsupportedActivationError("activation " + net.activation().name() + " has no derivative");
  }
  GradientBundle g = detail::zero_gradient(net.params());
  const double scale = 2.0 / static_cast<double>(rows.size());
  double loss = 0.0;
  for (std::size_t i : rows) {
    const double out = net.evaluate_at(data.point(i));
    const double r = out - data.y[i];
    loss += r * r;
    detail::accumulate_gradient(net.activation(), net.params(), data.point(i), scale * r, g);
  }
  g.loss = loss / static_cast<double>(rows.size());
  return g;
}

template <class Tag>
double mse(const BasicNet<Tag>& net, const Dataset& data) {
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double r = net.evaluate_at(data.point(i)) - data.y[i];
    loss += r * r;
  }
  return loss / static_cast<double>(data.size());
}

enum class Optimizer { plain, momentum };

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t steps = 1000;
  std::size_t batch = 32;  // clipped to the dataset size
  std::uint64_t seed = 42;
  Optimizer optimizer = Optimizer::plain;
  double momentum = 0.9;

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw StructuralError("learning rate must be finite and nonnegative");
    }
    if (batch == 0) throw StructuralError("batch size must be positive");
  }
};

/// Random network drawn from splitmix64(seed). Layer l with fan-in
/// N_{l-1} (n for the first layer) uses s = 1/sqrt(fan-in): w, b and the
/// first-layer a are uniform(-s, s); the skips a[l >= 2] and c are 0.1 times
/// a uniform(-s, s) draw; v uses s = 1/sqrt(N_L); d = 0. Draws happen layer
/// by layer (w row-major, a, b), then v, c, so networks of equal shape built
/// from the same seed share every value.
template <class Net = VectorNet>
Net init_net(const Activation& activation, std::size_t input_dim, const std::vector<std::size_t>& widths,
             std::uint64_t seed) {
  SplitMix64 rng(seed);
  NetParams p;
  p.input_dim = input_dim;
  std::size_t prev = 0;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const std::size_t width = widths[l];
    if (width == 0) throw StructuralError("hidden layers need at least one neuron");
    const double s = 1.0 / std::sqrt(static_cast<double>(l == 0 ? input_dim : prev));
    const double skip = l == 0 ? 1.0 : 0.1;
    Layer layer;
    if (l > 0) {
      layer.w = WeightMatrix::builder(prev);
      for (std::size_t j = 0; j < width; ++j) {
        for (std::size_t i = 0; i < prev; ++i) {
          layer.w.push(static_cast<WeightMatrix::index_type>(i), rng.uniform(-s, s));
        }
        layer.w.end_row();
      }
    }
    for (std::size_t k = 0; k < width * input_dim; ++k) layer.a.push_back(skip * rng.uniform(-s, s));
    for (std::size_t j = 0; j < width; ++j) layer.b.push_back(rng.uniform(-s, s));
    p.layers.push_back(std::move(layer));
    prev = width;
  }
  const double s = 1.0 / std::sqrt(static_cast<double>(widths.empty() ? input_dim : prev));
  for (std::size_t j = 0; j < prev; ++j) p.v.push_back(rng.uniform(-s, s));
  for (std::size_t k = 0; k < input_dim; ++k) p.c.push_back(0.1 * rng.uniform(-s, s));
  return Net(activation, std::move(p));
}

/// Copy of `net` with a[l >= 2] and c zeroed: the standard-MLP twin.
template <class Tag>
BasicNet<Tag> zero_skips(const BasicNet<Tag>& net) {
  NetParams p = net.params();
  for (std::size_t l = 1; l < p.layers.size(); ++l) std::fill(p.layers[l].a.begin(), p.layers[l].a.end(), 0.0);
  std::fill(p.c.begin(), p.c.end(), 0.0);
  return BasicNet<Tag>(net.activation(), std::move(p));
}

/// Flat mask (flatten() order) that is false exactly on a[l >= 2] and c.
template <class Tag>
std::vector<bool> standard_mask(const BasicNet<Tag>& net) {
  const NetParams& p = net.params();
  std::vector<bool> mask;
  std::size_t prev = 0;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const Layer& layer = p.layers[l];
    mask.insert(mask.end(), l == 0 ? 0 : layer.width() * prev, true);
    mask.insert(mask.end(), layer.a.size(), l == 0);
    mask.insert(mask.end(), layer.width(), true);
    prev = layer.width();
  }
  mask.insert(mask.end(), p.v.size(), true);
  mask.insert(mask.end(), p.input_dim, false);
  mask.push_back(true);
  return mask;
}

template <class Tag>
struct FitResult {
  BasicNet<Tag> net;
  std::vector<double> loss;  // full-data MSE before training and after each step
};

/// Minibatch gradient descent on the mean squared error. Samples are visited
/// in epochs shuffled by splitmix64(seed); a trailing partial batch is
/// dropped and the next epoch reshuffles. Entries where `trainable` is false
/// keep their initial value. Bit-reproducible for identical arguments.
template <class Tag>
FitResult<Tag> fit(const BasicNet<Tag>& start, const Dataset& data, const TrainConfig& config,
                   const std::vector<bool>& trainable = {}) {
  config.validate();
  data.validate();
  if (data.input_dim != start.input_dim()) throw StructuralError("dataset and network input dimensions differ");
  std::vector<double> theta = flatten(start);
  if (!trainable.empty() && trainable.size() != theta.size()) {
    throw StructuralError("trainable mask length differs from the parameter count");
  }
  std::vector<double> velocity(theta.size(), 0.0);
  const std::size_t batch = std::min(config.batch, data.size());
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SplitMix64 rng(config.seed);
  std::size_t cursor = order.size();

  BasicNet<Tag> net = start;
  FitResult<Tag> result{start, {}};
  result.loss.reserve(config.steps + 1);
  auto record = [&](std::size_t step) {
    const double loss = mse(net, data);
    if (!std::isfinite(loss)) {
      throw DivergenceError(step, "loss became non-finite at step " + std::to_string(step));
    }
    result.loss.push_back(loss);
  };
  record(0);
  for (std::size_t step = 1; step <= config.steps; ++step) {
    if (cursor + batch > order.size()) {
      rng.shuffle(order);
      cursor = 0;
    }
    const std::span<const std::size_t> rows(order.data() + cursor, batch);
    cursor += batch;
    std::vector<double> grad;
    try {
      grad = mse_gradient(net, data, rows).flat();
    } catch (const NumericOverflowError&) {
      throw DivergenceError(step, "non-finite activation at step " + std::to_string(step));
    }
    for (std::size_t k = 0; k < theta.size(); ++k) {
      if (!trainable.empty() && !trainable[k]) continue;
      double g = grad[k];
      if (config.optimizer == Optimizer::momentum) {
        velocity[k] = config.momentum * velocity[k] + g;
        g = velocity[k];
      }
      theta[k] -= config.learning_rate * g;
      if (!std::isfinite(theta[k])) {
        throw DivergenceError(step, "parameter became non-finite at step " + std::to_string(step));
      }
    }
    net = unflatten(start, theta);
    record(step);
  }
  result.net = std::move(net);
  return result;
}

}  // namespace icmlp
