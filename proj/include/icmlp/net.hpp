#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "icmlp/activation.hpp"
#include "icmlp/errors.hpp"

namespace icmlp {

/// Inter-layer weight matrix in compressed-row form. Entries equal to zero are
/// not stored; reads of absent entries return 0. Rows are neurons of the
/// receiving layer, columns neurons of the previous layer.
class WeightMatrix {
 public:
  using index_type = std::uint32_t;

  WeightMatrix() = default;

  /// All-zero rows x cols matrix.
  WeightMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), row_start_(rows + 1, 0) {}

  static WeightMatrix from_dense(const std::vector<std::vector<double>>& dense, std::size_t cols) {
    WeightMatrix m;
    m.cols_ = cols;
    for (const auto& row : dense) {
      if (row.size() != cols) {
        throw StructuralError("dense weight row has " + std::to_string(row.size()) +
                              " entries, expected " + std::to_string(cols));
      }
      for (std::size_t i = 0; i < cols; ++i) {
        if (row[i] != 0.0) m.push(static_cast<index_type>(i), row[i]);
      }
      m.end_row();
    }
    return m;
  }

  /// Starts an empty matrix with `cols` columns to be filled row by row.
  static WeightMatrix builder(std::size_t cols) {
    WeightMatrix m;
    m.cols_ = cols;
    return m;
  }

  /// Appends an entry to the row under construction. Columns must increase.
  void push(index_type col, double value) {
    if (value == 0.0) return;
    if (col >= cols_) throw StructuralError("weight column index out of range");
    if (index_.size() > row_start_.back() && index_.back() >= col) {
      throw StructuralError("weight columns must be strictly increasing within a row");
    }
    index_.push_back(col);
    value_.push_back(value);
  }

  void end_row() {
    row_start_.push_back(index_.size());
    ++rows_;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nonzeros() const noexcept { return value_.size(); }
  bool empty() const noexcept { return rows_ == 0 && cols_ == 0; }

  std::span<const index_type> row_indices(std::size_t row) const {
    return {index_.data() + row_start_[row], row_start_[row + 1] - row_start_[row]};
  }
  std::span<const double> row_values(std::size_t row) const {
    return {value_.data() + row_start_[row], row_start_[row + 1] - row_start_[row]};
  }
  std::span<const double> values() const noexcept { return value_; }

  double operator()(std::size_t row, std::size_t col) const {
    const auto idx = row_indices(row);
    const auto it = std::lower_bound(idx.begin(), idx.end(), static_cast<index_type>(col));
    if (it == idx.end() || *it != col) return 0.0;
    return row_values(row)[static_cast<std::size_t>(it - idx.begin())];
  }

  std::vector<std::vector<double>> to_dense() const {
    std::vector<std::vector<double>> dense(rows_, std::vector<double>(cols_, 0.0));
    for (std::size_t j = 0; j < rows_; ++j) {
      const auto idx = row_indices(j);
      const auto val = row_values(j);
      for (std::size_t k = 0; k < idx.size(); ++k) dense[j][idx[k]] = val[k];
    }
    return dense;
  }

  friend bool operator==(const WeightMatrix& lhs, const WeightMatrix& rhs) {
    return lhs.rows_ == rhs.rows_ && lhs.cols_ == rhs.cols_ && lhs.row_start_ == rhs.row_start_ &&
           lhs.index_ == rhs.index_ && lhs.value_ == rhs.value_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_start_{0};
  std::vector<index_type> index_;
  std::vector<double> value_;
};

/// One hidden layer. `a` holds the input-connection vectors row-major
/// (width x input_dim). For the first hidden layer `w` is 0 x 0: its
/// pre-activation is a x + b only.
struct Layer {
  WeightMatrix w;
  std::vector<double> a;
  std::vector<double> b;

  std::size_t width() const noexcept { return b.size(); }

  std::span<const double> input_weights(std::size_t neuron, std::size_t input_dim) const {
    return {a.data() + neuron * input_dim, input_dim};
  }

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Raw parameter set. Validated when wrapped in a BasicNet.
struct NetParams {
  std::size_t input_dim = 1;
  std::vector<Layer> layers;
  std::vector<double> v;
  std::vector<double> c;
  double d = 0.0;

  friend bool operator==(const NetParams&, const NetParams&) = default;
};

struct scalar_input {
  using argument_type = double;
};
struct vector_input {
  using argument_type = std::span<const double>;
};

/// Hidden activations h[l][j] plus the network output.
struct Trace {
  std::vector<std::vector<double>> hidden;
  double output = 0.0;
};

namespace detail {

inline void check_finite(double value, const std::string& where) {
  if (!std::isfinite(value)) throw StructuralError("non-finite parameter " + where);
}

inline void validate(const NetParams& p) {
  if (p.input_dim == 0) throw StructuralError("input dimension must be at least 1");
  const std::size_t n = p.input_dim;
  std::size_t prev = 0;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const Layer& layer = p.layers[l];
    const std::string tag = "layer " + std::to_string(l + 1);
    const std::size_t width = layer.width();
    if (width == 0) throw StructuralError(tag + " is empty");
    if (layer.a.size() != width * n) {
      throw StructuralError(tag + ": input connections have " + std::to_string(layer.a.size()) +
                            " entries, expected " + std::to_string(width * n));
    }
    if (l == 0) {
      if (!layer.w.empty()) throw StructuralError("layer 1 cannot carry inter-layer weights");
    } else if (layer.w.rows() != width || layer.w.cols() != prev) {
      throw StructuralError(tag + ": inter-layer weights are " + std::to_string(layer.w.rows()) +
                            "x" + std::to_string(layer.w.cols()) + ", expected " +
                            std::to_string(width) + "x" + std::to_string(prev));
    }
    for (double x : layer.w.values()) check_finite(x, "in " + tag + " inter-layer weights");
    for (double x : layer.a) check_finite(x, "in " + tag + " input connections");
    for (double x : layer.b) check_finite(x, "in " + tag + " biases");
    prev = width;
  }
  if (p.v.size() != prev) {
    throw StructuralError("output weights have " + std::to_string(p.v.size()) + " entries, expected " +
                          std::to_string(prev));
  }
  if (p.c.size() != n) {
    throw StructuralError("output skip has " + std::to_string(p.c.size()) + " entries, expected " +
                          std::to_string(n));
  }
  for (double x : p.v) check_finite(x, "in output weights");
  for (double x : p.c) check_finite(x, "in output skip");
  check_finite(p.d, "output bias");
}

inline double dot(std::span<const double> lhs, const double* rhs) {
  double sum = 0.0;
  for (std::size_t i = 0; i < lhs.size(); ++i) sum += lhs[i] * rhs[i];
  return sum;
}

inline void check_layer(std::span<const double> h, std::size_t layer) {
  for (double value : h) {
    if (!std::isfinite(value)) {
      throw NumericOverflowError(layer, "non-finite activation in hidden layer " + std::to_string(layer));
    }
  }
}

/// Layer-by-layer evaluation of the recursion
///   h_l = sigma(W_l h_{l-1} + A_l x + b_l),  H = <v, h_L> + <c, x> + d.
inline double forward(const Activation& act, const NetParams& p, const double* x, Trace* trace) {
  const std::size_t n = p.input_dim;
  std::vector<double> prev;
  std::vector<double> cur;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const Layer& layer = p.layers[l];
    cur.assign(layer.width(), 0.0);
    for (std::size_t j = 0; j < cur.size(); ++j) {
      double z = 0.0;
      if (l > 0) {
        const auto idx = layer.w.row_indices(j);
        const auto val = layer.w.row_values(j);
        for (std::size_t k = 0; k < idx.size(); ++k) z += val[k] * prev[idx[k]];
      }
      z += dot(layer.input_weights(j, n), x);
      cur[j] = z + layer.b[j];
    }
    check_layer(cur, l + 1);
    act.apply(cur);
    check_layer(cur, l + 1);
    if (trace) trace->hidden.push_back(cur);
    std::swap(prev, cur);
  }
  double out = 0.0;
  for (std::size_t j = 0; j < p.v.size(); ++j) out += p.v[j] * prev[j];
  out += dot(p.c, x) + p.d;
  if (!std::isfinite(out)) {
    throw NumericOverflowError(p.layers.size() + 1, "non-finite network output");
  }
  if (trace) trace->output = out;
  return out;
}

}  // namespace detail

/// Immutable input-connected MLP. `Tag` selects scalar (double) or vector
/// (span) input; the parameter layout is shared, a scalar net being the
/// input_dim == 1 case.
template <class Tag>
class BasicNet {
 public:
  using argument_type = typename Tag::argument_type;
  static constexpr bool is_scalar = std::is_same_v<Tag, scalar_input>;

  BasicNet(Activation activation, NetParams params)
      : activation_(std::move(activation)), params_(std::move(params)) {
    if constexpr (is_scalar) {
      if (params_.input_dim != 1) throw StructuralError("scalar networks have input dimension 1");
    }
    detail::validate(params_);
  }

  double operator()(argument_type x) const {
    if constexpr (is_scalar) {
      return detail::forward(activation_, params_, &x, nullptr);
    } else {
      check_dim(x.size());
      return detail::forward(activation_, params_, x.data(), nullptr);
    }
  }

  Trace trace(argument_type x) const {
    Trace t;
    if constexpr (is_scalar) {
      detail::forward(activation_, params_, &x, &t);
    } else {
      check_dim(x.size());
      detail::forward(activation_, params_, x.data(), &t);
    }
    return t;
  }

  /// Evaluates at a raw pointer to input_dim() coordinates.
  double evaluate_at(const double* x) const { return detail::forward(activation_, params_, x, nullptr); }

  const Activation& activation() const noexcept { return activation_; }
  const NetParams& params() const noexcept { return params_; }
  std::size_t depth() const noexcept { return params_.layers.size(); }
  std::size_t input_dim() const noexcept { return params_.input_dim; }
  const Layer& layer(std::size_t index) const { return params_.layers.at(index); }
  std::vector<std::size_t> widths() const {
    std::vector<std::size_t> out;
    for (const auto& layer : params_.layers) out.push_back(layer.width());
    return out;
  }
  std::size_t neuron_count() const noexcept {
    std::size_t total = 0;
    for (const auto& layer : params_.layers) total += layer.width();
    return total;
  }

  /// Number of parameters of the dense parameterization (zeros included).
  std::size_t parameter_count() const noexcept {
    const std::size_t n = params_.input_dim;
    std::size_t total = n + 1;
    std::size_t prev = 0;
    for (const auto& layer : params_.layers) {
      total += layer.width() * prev + layer.width() * n + layer.width();
      prev = layer.width();
    }
    return total + prev;
  }

  /// Inter-layer weights actually stored (structural zeros excluded).
  std::size_t stored_weight_count() const noexcept {
    std::size_t total = 0;
    for (const auto& layer : params_.layers) total += layer.w.nonzeros();
    return total;
  }

  friend bool operator==(const BasicNet& lhs, const BasicNet& rhs) {
    return lhs.activation_ == rhs.activation_ && lhs.params_ == rhs.params_;
  }

 private:
  void check_dim(std::size_t got) const {
    if (got != params_.input_dim) {
      throw StructuralError("input has " + std::to_string(got) + " coordinates, network expects " +
                            std::to_string(params_.input_dim));
    }
  }

  Activation activation_;
  NetParams params_;
};

using ScalarNet = BasicNet<scalar_input>;
using VectorNet = BasicNet<vector_input>;

inline double eval_scalar(const ScalarNet& net, double x) { return net(x); }
inline double eval_vector(const VectorNet& net, std::span<const double> x) { return net(x); }

template <class Tag>
Trace eval_hidden(const BasicNet<Tag>& net, typename Tag::argument_type x) {
  return net.trace(x);
}

inline VectorNet to_vector(const ScalarNet& net) { return VectorNet(net.activation(), net.params()); }

inline ScalarNet to_scalar(const VectorNet& net) {
  if (net.input_dim() != 1) throw StructuralError("only one-dimensional networks convert to scalar form");
  return ScalarNet(net.activation(), net.params());
}

/// Depth-0 network x -> <c, x> + d.
template <class Net = VectorNet>
Net affine_net(Activation activation, std::vector<double> c, double d) {
  NetParams p;
  p.input_dim = c.size();
  p.c = std::move(c);
  p.d = d;
  return Net(std::move(activation), std::move(p));
}

/// Builds a layer from nested dense arrays; pass an empty `w` for the first layer.
inline Layer dense_layer(const std::vector<std::vector<double>>& w,
                         const std::vector<std::vector<double>>& a, std::vector<double> b) {
  Layer layer;
  if (!w.empty()) layer.w = WeightMatrix::from_dense(w, w.front().size());
  for (const auto& row : a) layer.a.insert(layer.a.end(), row.begin(), row.end());
  layer.b = std::move(b);
  return layer;
}

/// Dense parameter vector in the order: per layer (w row-major, a row-major, b),
/// then v, c, d. Absent inter-layer weights appear as zeros.
template <class Tag>
std::vector<double> flatten(const BasicNet<Tag>& net) {
  const NetParams& p = net.params();
  std::vector<double> out;
  out.reserve(net.parameter_count());
  for (const auto& layer : p.layers) {
    for (const auto& row : layer.w.to_dense()) out.insert(out.end(), row.begin(), row.end());
    out.insert(out.end(), layer.a.begin(), layer.a.end());
    out.insert(out.end(), layer.b.begin(), layer.b.end());
  }
  out.insert(out.end(), p.v.begin(), p.v.end());
  out.insert(out.end(), p.c.begin(), p.c.end());
  out.push_back(p.d);
  return out;
}

/// Inverse of flatten(): a net with the architecture of `shape` and the given values.
template <class Tag>
BasicNet<Tag> unflatten(const BasicNet<Tag>& shape, std::span<const double> values) {
  if (values.size() != shape.parameter_count()) {
    throw StructuralError("parameter vector has " + std::to_string(values.size()) + " entries, expected " +
                          std::to_string(shape.parameter_count()));
  }
  const NetParams& src = shape.params();
  NetParams p;
  p.input_dim = src.input_dim;
  std::size_t pos = 0;
  auto take = [&](std::size_t count) {
    std::vector<double> chunk(values.begin() + static_cast<std::ptrdiff_t>(pos),
                              values.begin() + static_cast<std::ptrdiff_t>(pos + count));
    pos += count;
    return chunk;
  };
  std::size_t prev = 0;
  for (std::size_t l = 0; l < src.layers.size(); ++l) {
    const std::size_t width = src.layers[l].width();
    Layer layer;
    if (l > 0) {
      layer.w = WeightMatrix::builder(prev);
      for (std::size_t j = 0; j < width; ++j) {
        for (std::size_t i = 0; i < prev; ++i) layer.w.push(static_cast<WeightMatrix::index_type>(i), values[pos + i]);
        pos += prev;
        layer.w.end_row();
      }
    }
    layer.a = take(width * p.input_dim);
    layer.b = take(width);
    p.layers.push_back(std::move(layer));
    prev = width;
  }
  p.v = take(prev);
  p.c = take(p.input_dim);
  p.d = values[pos];
  return BasicNet<Tag>(shape.activation(), std::move(p));
}

}  // namespace icmlp
