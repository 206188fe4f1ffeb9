#pragma once

// Reference computations that share no code with the library's evaluators.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "icmlp/net.hpp"

namespace oracle {

/// Dense copy of a network's parameters, read once through the public accessors.
struct DenseNet {
  std::size_t n = 1;
  std::vector<std::vector<std::vector<double>>> w;  // w[l][j][i]; empty for l = 0
  std::vector<std::vector<std::vector<double>>> a;  // a[l][j][k]
  std::vector<std::vector<double>> b;
  std::vector<double> v;
  std::vector<double> c;
  double d = 0.0;
  std::function<double(double)> sigma;
  std::function<double(double)> dsigma;
};

template <class Net>
DenseNet densify(const Net& net) {
  DenseNet out;
  const auto& p = net.params();
  out.n = p.input_dim;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    out.w.push_back(l == 0 ? std::vector<std::vector<double>>{} : layer.w.to_dense());
    std::vector<std::vector<double>> a;
    for (std::size_t j = 0; j < layer.width(); ++j) {
      a.emplace_back(layer.a.begin() + static_cast<std::ptrdiff_t>(j * out.n),
                     layer.a.begin() + static_cast<std::ptrdiff_t>((j + 1) * out.n));
    }
    out.a.push_back(a);
    out.b.push_back(layer.b);
  }
  out.v = p.v;
  out.c = p.c;
  out.d = p.d;
  const icmlp::Activation act = net.activation();
  out.sigma = [act](double t) { return act(t); };
  out.dsigma = [act](double t) { return act.derivative(t); };
  return out;
}

/// h_{l,j}(x) by direct recursion on the nested formula: every call recomputes
/// the whole subtree below it.
inline double hidden(const DenseNet& net, std::size_t l, std::size_t j, const std::vector<double>& x) {
  double pre = net.b[l][j];
  for (std::size_t k = 0; k < net.n; ++k) pre += net.a[l][j][k] * x[k];
  if (l > 0) {
    for (std::size_t i = 0; i < net.w[l][j].size(); ++i) pre += net.w[l][j][i] * hidden(net, l - 1, i, x);
  }
  return net.sigma(pre);
}

inline double nested(const DenseNet& net, const std::vector<double>& x) {
  double out = net.d;
  for (std::size_t k = 0; k < net.n; ++k) out += net.c[k] * x[k];
  if (!net.b.empty()) {
    const std::size_t top = net.b.size() - 1;
    for (std::size_t j = 0; j < net.v.size(); ++j) out += net.v[j] * hidden(net, top, j, x);
  }
  return out;
}

/// Same value as nested(), computed one layer at a time.
inline double forward(const DenseNet& net, const std::vector<double>& x) {
  std::vector<double> h;
  for (std::size_t l = 0; l < net.b.size(); ++l) {
    std::vector<double> next(net.b[l].size());
    for (std::size_t j = 0; j < next.size(); ++j) {
      double pre = net.b[l][j];
      for (std::size_t k = 0; k < net.n; ++k) pre += net.a[l][j][k] * x[k];
      if (l > 0) {
        for (std::size_t i = 0; i < h.size(); ++i) pre += net.w[l][j][i] * h[i];
      }
      next[j] = net.sigma(pre);
    }
    h = std::move(next);
  }
  double out = net.d;
  for (std::size_t k = 0; k < net.n; ++k) out += net.c[k] * x[k];
  for (std::size_t j = 0; j < h.size(); ++j) out += net.v[j] * h[j];
  return out;
}

/// Classical MLP y = v . h_L + bias with h_1 = s(W_1 x + b_1), h_l = s(W_l h_{l-1} + b_l).
struct PlainMlp {
  std::vector<std::vector<std::vector<double>>> weights;
  std::vector<std::vector<double>> biases;
  std::vector<double> out_weights;
  double out_bias = 0.0;
};

struct PlainGrad {
  std::vector<std::vector<std::vector<double>>> weights;
  std::vector<std::vector<double>> biases;
  std::vector<double> out_weights;
  double out_bias = 0.0;
};

inline double plain_eval(const PlainMlp& m, const std::vector<double>& x, const std::function<double(double)>& s) {
  std::vector<double> h = x;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    std::vector<double> next(m.biases[l].size());
    for (std::size_t j = 0; j < next.size(); ++j) {
      double z = m.biases[l][j];
      for (std::size_t i = 0; i < h.size(); ++i) z += m.weights[l][j][i] * h[i];
      next[j] = s(z);
    }
    h = next;
  }
  double y = m.out_bias;
  for (std::size_t j = 0; j < h.size(); ++j) y += m.out_weights[j] * h[j];
  return y;
}

/// Textbook backpropagation for PlainMlp.
inline PlainGrad plain_backprop(const PlainMlp& m, const std::vector<double>& x, const std::function<double(double)>& s,
                                const std::function<double(double)>& ds) {
  const std::size_t depth = m.weights.size();
  std::vector<std::vector<double>> acts{x};
  std::vector<std::vector<double>> pres;
  for (std::size_t l = 0; l < depth; ++l) {
    std::vector<double> z(m.biases[l].size()), h(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) {
      z[j] = m.biases[l][j];
      for (std::size_t i = 0; i < acts.back().size(); ++i) z[j] += m.weights[l][j][i] * acts.back()[i];
      h[j] = s(z[j]);
    }
    pres.push_back(z);
    acts.push_back(h);
  }
  PlainGrad g;
  g.out_bias = 1.0;
  g.out_weights = acts.back();
  g.weights.resize(depth);
  g.biases.resize(depth);
  std::vector<double> err(m.out_weights.size());
  for (std::size_t j = 0; j < err.size(); ++j) err[j] = m.out_weights[j] * ds(pres[depth - 1][j]);
  for (std::size_t l = depth; l-- > 0;) {
    g.biases[l] = err;
    g.weights[l].assign(err.size(), std::vector<double>(acts[l].size()));
    for (std::size_t j = 0; j < err.size(); ++j) {
      for (std::size_t i = 0; i < acts[l].size(); ++i) g.weights[l][j][i] = err[j] * acts[l][i];
    }
    if (l == 0) break;
    std::vector<double> prev(acts[l].size(), 0.0);
    for (std::size_t i = 0; i < prev.size(); ++i) {
      for (std::size_t j = 0; j < err.size(); ++j) prev[i] += m.weights[l][j][i] * err[j];
      prev[i] *= ds(pres[l - 1][i]);
    }
    err = prev;
  }
  return g;
}

/// Central difference of f at theta along coordinate k.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f, std::vector<double> theta,
                                  std::size_t k, double h) {
  const double keep = theta[k];
  theta[k] = keep + h;
  const double up = f(theta);
  theta[k] = keep - h;
  const double down = f(theta);
  return (up - down) / (2.0 * h);
}

/// Composite Simpson rule with `panels` (even) subintervals.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, std::size_t panels) {
  const double h = (hi - lo) / static_cast<double>(panels);
  double sum = f(lo) + f(hi);
  for (std::size_t i = 1; i < panels; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(lo + h * static_cast<double>(i));
  return sum * h / 3.0;
}

/// Standard bump exp(-1/(1-t^2)) normalized by Simpson's rule, scaled to width eps.
inline std::function<double(double)> bump(double eps) {
  auto raw = [](double t) { return std::abs(t) < 1.0 ? std::exp(-1.0 / (1.0 - t * t)) : 0.0; };
  const double z = 1.0 / simpson(raw, -1.0, 1.0, 20000);
  return [raw, z, eps](double y) { return z * raw(y / eps) / eps; };
}

}  // namespace oracle
