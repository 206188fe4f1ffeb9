#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "icmlp/errors.hpp"
#include "icmlp/net.hpp"

// Structural transforms on IC-MLPs. Each one returns a new network whose
// function is an exact (up to rounding) closure-property image of its inputs.

namespace icmlp {

/// How to raise a network's depth without changing its function.
struct DepthPadPlan {
  std::size_t target_depth = 0;
  std::size_t dummy_width = 1;
};

/// Raises the depth to `plan.target_depth` by prepending dummy layers.
///
/// Dummy neurons have a = 0, b = 0 and all inter-layer weights leaving them
/// are zero, so the original first layer still sees only its direct input
/// connection. Parameter growth for k prepended layers of width m on a net
/// with first width N_1 (or L = 0) and input dimension n:
///   m(n+1) + (k-1) m(m+n+1) + (L > 0 ? m N_1 : m).
template <class Tag>
BasicNet<Tag> pad_depth(const BasicNet<Tag>& net, const DepthPadPlan& plan) {
  const std::size_t depth = net.depth();
  if (plan.target_depth < depth) {
    throw StructuralError("cannot pad a depth-" + std::to_string(depth) + " network down to depth " +
                          std::to_string(plan.target_depth));
  }
  if (plan.target_depth == depth) return net;
  if (plan.dummy_width == 0) throw StructuralError("dummy layers need at least one neuron");

  const NetParams& src = net.params();
  const std::size_t n = src.input_dim;
  const std::size_t m = plan.dummy_width;
  NetParams p;
  p.input_dim = n;
  for (std::size_t k = 0; k < plan.target_depth - depth; ++k) {
    Layer dummy;
    if (k > 0) dummy.w = WeightMatrix(m, m);
    dummy.a.assign(m * n, 0.0);
    dummy.b.assign(m, 0.0);
    p.layers.push_back(std::move(dummy));
  }
  for (std::size_t l = 0; l < src.layers.size(); ++l) {
    Layer layer = src.layers[l];
    if (l == 0) layer.w = WeightMatrix(layer.width(), m);
    p.layers.push_back(std::move(layer));
  }
  p.v = depth == 0 ? std::vector<double>(m, 0.0) : src.v;
  p.c = src.c;
  p.d = src.d;
  return BasicNet<Tag>(net.activation(), std::move(p));
}

template <class Tag>
BasicNet<Tag> pad_depth(const BasicNet<Tag>& net, std::size_t target_depth) {
  return pad_depth(net, DepthPadPlan{target_depth, 1});
}

/// Single network computing sum_k coeffs[k] * nets[k](x).
///
/// Inputs are padded to the common maximum depth, then merged block-diagonally
/// in argument order: widths add, input connections and biases are
/// concatenated, output weights become coeffs[k] * v_k, and the output skip
/// terms are summed.
template <class Tag>
BasicNet<Tag> linear_combine(std::span<const BasicNet<Tag>> nets, std::span<const double> coeffs) {
  if (nets.empty()) throw StructuralError("linear_combine needs at least one network");
  if (nets.size() != coeffs.size()) throw StructuralError("linear_combine: one coefficient per network");
  const Activation& activation = nets.front().activation();
  const std::size_t n = nets.front().input_dim();
  std::size_t depth = 0;
  for (const auto& net : nets) {
    if (!(net.activation() == activation)) {
      throw StructuralError("linear_combine: activation mismatch (" + activation.to_string() + " vs " +
                            net.activation().to_string() + ")");
    }
    if (net.input_dim() != n) throw StructuralError("linear_combine: input dimension mismatch");
    depth = std::max(depth, net.depth());
  }

  std::vector<BasicNet<Tag>> padded;
  padded.reserve(nets.size());
  for (const auto& net : nets) padded.push_back(pad_depth(net, depth));

  NetParams p;
  p.input_dim = n;
  p.c.assign(n, 0.0);
  for (std::size_t l = 0; l < depth; ++l) {
    Layer merged;
    std::size_t prev_total = 0;
    if (l > 0) {
      for (const auto& net : padded) prev_total += net.layer(l - 1).width();
      merged.w = WeightMatrix::builder(prev_total);
    }
    std::size_t col_offset = 0;
    for (const auto& net : padded) {
      const Layer& layer = net.layer(l);
      if (l > 0) {
        for (std::size_t j = 0; j < layer.width(); ++j) {
          const auto idx = layer.w.row_indices(j);
          const auto val = layer.w.row_values(j);
          for (std::size_t k = 0; k < idx.size(); ++k) {
            merged.w.push(static_cast<WeightMatrix::index_type>(idx[k] + col_offset), val[k]);
          }
          merged.w.end_row();
        }
        col_offset += net.layer(l - 1).width();
      }
      merged.a.insert(merged.a.end(), layer.a.begin(), layer.a.end());
      merged.b.insert(merged.b.end(), layer.b.begin(), layer.b.end());
    }
    p.layers.push_back(std::move(merged));
  }
  for (std::size_t k = 0; k < padded.size(); ++k) {
    const NetParams& src = padded[k].params();
    for (double v : src.v) p.v.push_back(coeffs[k] * v);
    for (std::size_t i = 0; i < n; ++i) p.c[i] += coeffs[k] * src.c[i];
    p.d += coeffs[k] * src.d;
  }
  return BasicNet<Tag>(activation, std::move(p));
}

template <class Tag>
BasicNet<Tag> linear_combine(const std::vector<BasicNet<Tag>>& nets, const std::vector<double>& coeffs) {
  return linear_combine(std::span<const BasicNet<Tag>>(nets), std::span<const double>(coeffs));
}

/// Network computing x -> net(shift + scale * x).
inline ScalarNet reparam_affine(const ScalarNet& net, double shift, double scale) {
  NetParams p = net.params();
  for (auto& layer : p.layers) {
    for (std::size_t j = 0; j < layer.width(); ++j) {
      const double a = layer.a[j];
      layer.a[j] = scale * a;
      layer.b[j] = layer.b[j] + a * shift;
    }
  }
  const double c = p.c[0];
  p.c[0] = scale * c;
  p.d = p.d + c * shift;
  return ScalarNet(net.activation(), std::move(p));
}

/// Realizes outer(inner(x)) as one network of depth inner.depth() + 1.
///
/// Each hidden neuron j of the one-layer `outer` becomes a neuron of a new
/// last layer with inter-weights a_j * v_inner, input connection a_j * c_inner
/// and bias a_j * d_inner + b_j. The outer output skip must be zero: the inner
/// value is not available at the output neuron of a strict IC-MLP.
template <class Tag>
BasicNet<Tag> compose_shallow(const ScalarNet& outer, const BasicNet<Tag>& inner) {
  if (outer.depth() != 1) {
    throw StructuralError("compose_shallow: outer network must have exactly one hidden layer, got " +
                          std::to_string(outer.depth()));
  }
  if (outer.params().c[0] != 0.0) {
    throw UnsupportedCompositionError("compose_shallow: outer network has a nonzero output skip c");
  }
  if (inner.depth() > 0 && !(inner.activation() == outer.activation())) {
    throw StructuralError("compose_shallow: activation mismatch");
  }
  const NetParams& in = inner.params();
  const Layer& top = outer.layer(0);
  const std::size_t n = in.input_dim;

  Layer fresh;
  if (inner.depth() > 0) fresh.w = WeightMatrix::builder(in.v.size());
  for (std::size_t j = 0; j < top.width(); ++j) {
    const double a = top.a[j];
    if (inner.depth() > 0) {
      for (std::size_t i = 0; i < in.v.size(); ++i) {
        fresh.w.push(static_cast<WeightMatrix::index_type>(i), a * in.v[i]);
      }
      fresh.w.end_row();
    }
    for (std::size_t k = 0; k < n; ++k) fresh.a.push_back(a * in.c[k]);
    fresh.b.push_back(a * in.d + top.b[j]);
  }

  NetParams p;
  p.input_dim = n;
  p.layers = in.layers;
  p.layers.push_back(std::move(fresh));
  p.v = outer.params().v;
  p.c.assign(n, 0.0);
  p.d = outer.params().d;
  return BasicNet<Tag>(outer.activation(), std::move(p));
}

/// Classical feedforward MLP: only the first hidden layer sees the input and
/// the output is <v, h_L> + bias.
struct StandardMlp {
  struct DenseLayer {
    std::vector<std::vector<double>> weights;  // width x fan-in
    std::vector<double> bias;
  };
  std::size_t input_dim = 1;
  std::vector<DenseLayer> hidden;
  std::vector<double> output_weights;
  double output_bias = 0.0;
};

/// IC-MLP with a[l] = 0 for l >= 2 and c = 0 computing the same function.
template <class Net = VectorNet>
Net embed_standard(const StandardMlp& mlp, const Activation& activation) {
  if (mlp.hidden.empty()) throw StructuralError("a standard MLP needs at least one hidden layer");
  NetParams p;
  p.input_dim = mlp.input_dim;
  for (std::size_t l = 0; l < mlp.hidden.size(); ++l) {
    const auto& src = mlp.hidden[l];
    Layer layer;
    if (l == 0) {
      for (const auto& row : src.weights) {
        if (row.size() != mlp.input_dim) throw StructuralError("first-layer weight row length != input_dim");
        layer.a.insert(layer.a.end(), row.begin(), row.end());
      }
    } else {
      const std::size_t fan_in = mlp.hidden[l - 1].bias.size();
      layer.w = WeightMatrix::from_dense(src.weights, fan_in);
      layer.a.assign(src.bias.size() * mlp.input_dim, 0.0);
    }
    layer.b = src.bias;
    p.layers.push_back(std::move(layer));
  }
  p.v = mlp.output_weights;
  p.c.assign(mlp.input_dim, 0.0);
  p.d = mlp.output_bias;
  return Net(activation, std::move(p));
}

/// Inverse of embed_standard(). Throws NotStandardMlpError listing every
/// neuron (1-based layer, neuron) with a nonzero input connection beyond the
/// first layer, and flags a nonzero output skip.
template <class Tag>
StandardMlp strip_to_standard(const BasicNet<Tag>& net) {
  if (net.depth() == 0) throw StructuralError("a depth-0 network has no standard MLP form");
  const NetParams& p = net.params();
  const std::size_t n = p.input_dim;
  std::vector<std::pair<std::size_t, std::size_t>> offending;
  for (std::size_t l = 1; l < p.layers.size(); ++l) {
    const Layer& layer = p.layers[l];
    for (std::size_t j = 0; j < layer.width(); ++j) {
      for (double a : layer.input_weights(j, n)) {
        if (a != 0.0) {
          offending.emplace_back(l + 1, j + 1);
          break;
        }
      }
    }
  }
  bool output_skip = false;
  for (double c : p.c) output_skip = output_skip || c != 0.0;
  if (!offending.empty() || output_skip) {
    std::ostringstream msg;
    msg << "not a standard MLP:";
    for (const auto& [l, j] : offending) msg << " (l=" << l << ", j=" << j << ")";
    if (output_skip) msg << " output skip c";
    throw NotStandardMlpError(std::move(offending), output_skip, msg.str());
  }

  StandardMlp mlp;
  mlp.input_dim = n;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const Layer& layer = p.layers[l];
    StandardMlp::DenseLayer dense;
    if (l == 0) {
      for (std::size_t j = 0; j < layer.width(); ++j) {
        const auto row = layer.input_weights(j, n);
        dense.weights.emplace_back(row.begin(), row.end());
      }
    } else {
      dense.weights = layer.w.to_dense();
    }
    dense.bias = layer.b;
    mlp.hidden.push_back(std::move(dense));
  }
  mlp.output_weights = p.v;
  mlp.output_bias = p.d;
  return mlp;
}

}  // namespace icmlp
