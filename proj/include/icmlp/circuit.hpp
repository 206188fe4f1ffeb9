#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "icmlp/chebyshev.hpp"
#include "icmlp/errors.hpp"
#include "icmlp/grid.hpp"
#include "icmlp/net.hpp"
#include "icmlp/square.hpp"

namespace icmlp {

/// Coordinates t_k = scale_k x_k + shift_k with |t_k| <= bound_k on a box.
struct MonomialFrame {
  CoordinateMap map;
  std::vector<double> bounds;

  static MonomialFrame on(const Box& box, CoordinateMap map) {
    box.validate();
    if (map.dim() != box.dim()) throw StructuralError("coordinate map dimension mismatch");
    MonomialFrame frame{std::move(map), {}};
    for (std::size_t k = 0; k < box.dim(); ++k) {
      frame.bounds.push_back(std::max(std::abs(frame.map.to_t(k, box.axes[k].lo)),
                                      std::abs(frame.map.to_t(k, box.axes[k].hi))));
    }
    return frame;
  }
  static MonomialFrame raw(const Box& box) { return on(box, CoordinateMap::identity(box.dim())); }
  static MonomialFrame normalized(const Box& box) { return on(box, CoordinateMap::normalizing(box)); }

  std::size_t dim() const noexcept { return map.dim(); }
};

/// Expression graph over affine leaves, squares, products and linear
/// combinations, compiled into a single IC-MLP.
///
/// Squares and products are hash-consed, so a subexpression used by several
/// terms is computed once. Every square lives in a block of |P| neurons at
/// some layer; an expression of height h can be placed at any layer >= h
/// because its affine leaves reach every layer through the input connections.
class Circuit {
 public:
  using Node = std::size_t;

  explicit Circuit(std::size_t input_dim) : n_(input_dim) {
    if (input_dim == 0) throw StructuralError("circuit input dimension must be positive");
  }

  std::size_t input_dim() const noexcept { return n_; }
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t height(Node node) const { return items_.at(node).height; }

  /// <c, x> + d with |value| <= magnitude on the working domain.
  Node affine(std::vector<double> c, double d, double magnitude) {
    check_dim(c);
    Item item{Kind::affine};
    item.c = std::move(c);
    item.d = d;
    item.magnitude = magnitude;
    return push(std::move(item));
  }

  Node square(Node u) {
    if (auto it = squares_.find(u); it != squares_.end()) return it->second;
    Item item{Kind::square};
    item.u = u;
    item.height = items_.at(u).height + 1;
    const Node node = push(std::move(item));
    squares_[u] = node;
    return node;
  }

  Node product(Node u, Node v) {
    if (u == v) return square(u);
    const auto key = std::minmax(u, v);
    if (auto it = products_.find(key); it != products_.end()) return it->second;
    Item item{Kind::product};
    item.u = key.first;
    item.v = key.second;
    const Node sum = combine({{key.first, 1.0}, {key.second, 1.0}}, std::vector<double>(n_, 0.0), 0.0);
    item.parts = {{square(sum), 0.5}, {square(key.first), -0.5}, {square(key.second), -0.5}};
    item.height = std::max(items_[key.first].height, items_[key.second].height) + 1;
    const Node node = push(std::move(item));
    products_[key] = node;
    return node;
  }

  /// sum_k coef_k node_k + <c, x> + d. `magnitude` caps the generic bound
  /// sum |coef_k| |node_k| + |d|, and is required when c != 0.
  Node combine(std::vector<std::pair<Node, double>> terms, std::vector<double> c, double d,
               double magnitude = std::numeric_limits<double>::infinity()) {
    check_dim(c);
    Item item{Kind::combine};
    for (const auto& [node, coef] : terms) item.height = std::max(item.height, items_.at(node).height);
    item.parts = std::move(terms);
    item.c = std::move(c);
    item.d = d;
    item.magnitude = magnitude;
    return push(std::move(item));
  }

  /// Magnitude and error bounds of every node when each square uses a unit
  /// approximator of accuracy kappa.
  std::vector<RangeBound> bounds(double kappa) const {
    std::vector<RangeBound> out(items_.size());
    for (Node i = 0; i < items_.size(); ++i) {
      const Item& item = items_[i];
      switch (item.kind) {
        case Kind::affine: out[i] = {item.magnitude, 0.0}; break;
        case Kind::square: out[i] = square_bound(out[item.u], kappa); break;
        case Kind::product: out[i] = product_bound(out[item.u], out[item.v], kappa); break;
        case Kind::combine: {
          double mag = std::abs(item.d);
          double err = 0.0;
          for (const auto& [node, coef] : item.parts) {
            mag += std::abs(coef) * out[node].magnitude;
            err += std::abs(coef) * out[node].error;
          }
          for (double c : item.c) {
            if (c != 0.0) mag = std::numeric_limits<double>::infinity();
          }
          out[i] = {std::min(mag, item.magnitude), err};
          break;
        }
      }
    }
    return out;
  }

  /// One network computing `output`, with every square realized by `unit`
  /// rescaled to the radius its operand needs.
  template <class Tag = vector_input>
  BasicNet<Tag> compile(Node output, const SquareApproximator& unit) const {
    Compiler<Tag> compiler{*this, unit, bounds(unit.certified_error)};
    return compiler.run(output);
  }

 private:
  enum class Kind { affine, square, product, combine };

  struct Item {
    Kind kind;
    Node u = 0;
    Node v = 0;
    std::vector<std::pair<Node, double>> parts;  // combine terms, or the three squares of a product
    std::vector<double> c;
    double d = 0.0;
    double magnitude = std::numeric_limits<double>::infinity();
    std::size_t height = 0;
  };

  /// Linear functional of one layer: sum over blocks of coef * (block output) + <c, x> + d.
  struct Readout {
    std::map<std::size_t, double> blocks;
    std::vector<double> c;
    double d = 0.0;

    void add(const Readout& other, double coef) {
      for (const auto& [b, w] : other.blocks) blocks[b] += coef * w;
      for (std::size_t k = 0; k < c.size(); ++k) c[k] += coef * other.c[k];
      d += coef * other.d;
    }
  };

  struct Block {
    ScalarNet square;  // P_R; its hidden layer becomes the block's neurons
    Readout input;
  };

  template <class Tag>
  struct Compiler {
    const Circuit& circuit;
    const SquareApproximator& unit;
    std::vector<RangeBound> bound;
    std::vector<std::vector<Block>> levels;  // levels[l - 1] = blocks of hidden layer l
    std::map<std::pair<Node, std::size_t>, Readout> memo;

    Readout zero() const { return {{}, std::vector<double>(circuit.n_, 0.0), 0.0}; }

    Readout instance(Node node, std::size_t level) {
      if (auto it = memo.find({node, level}); it != memo.end()) return it->second;
      const Item& item = circuit.items_[node];
      Readout out = zero();
      switch (item.kind) {
        case Kind::affine:
          out.c = item.c;
          out.d = item.d;
          break;
        case Kind::combine:
          for (const auto& [child, coef] : item.parts) out.add(instance(child, level), coef);
          for (std::size_t k = 0; k < out.c.size(); ++k) out.c[k] += item.c[k];
          out.d += item.d;
          break;
        case Kind::product:
          for (const auto& [child, coef] : item.parts) out.add(instance(child, level), coef);
          break;
        case Kind::square: {
          const double radius = square_radius(bound[item.u]);
          if (radius == 0.0) break;
          Readout input = instance(item.u, level - 1);
          SquareApproximator p = rescale_square(unit, radius);
          out.d = p.net.params().d;
          auto& blocks = levels.at(level - 1);
          out.blocks[blocks.size()] = 1.0;
          blocks.push_back({std::move(p.net), std::move(input)});
          break;
        }
      }
      memo.emplace(std::pair{node, level}, out);
      return out;
    }

    BasicNet<Tag> run(Node output) {
      const std::size_t depth = circuit.height(output);
      const Activation& act = unit.net.activation();
      levels.resize(depth);
      const Readout top = instance(output, depth);
      if (depth == 0) return affine_net<BasicNet<Tag>>(act, top.c, top.d);

      const std::size_t n = circuit.n_;
      NetParams p;
      p.input_dim = n;
      std::vector<std::size_t> prev_offset;
      std::size_t prev_width = 0;
      for (std::size_t l = 0; l < depth; ++l) {
        Layer layer;
        if (l > 0) layer.w = WeightMatrix::builder(prev_width);
        std::vector<std::size_t> offset;
        std::size_t width = 0;
        for (const Block& block : levels[l]) {
          offset.push_back(width);
          const Layer& sq = block.square.layer(0);
          const auto& in = block.input;
          for (std::size_t j = 0; j < sq.width(); ++j) {
            const double a = sq.a[j];
            if (l > 0) {
              for (const auto& [src, coef] : in.blocks) {
                const auto& v = levels[l - 1][src].square.params().v;
                for (std::size_t i = 0; i < v.size(); ++i) {
                  layer.w.push(static_cast<WeightMatrix::index_type>(prev_offset[src] + i), a * coef * v[i]);
                }
              }
              layer.w.end_row();
            }
            for (std::size_t k = 0; k < n; ++k) layer.a.push_back(a * in.c[k]);
            layer.b.push_back(a * in.d + sq.b[j]);
          }
          width += sq.width();
        }
        if (width == 0) {  // keeps the layer well-formed; nothing reads it
          if (l > 0) layer.w.end_row();
          layer.a.assign(n, 0.0);
          layer.b.push_back(0.0);
          width = 1;
        }
        p.layers.push_back(std::move(layer));
        prev_offset = std::move(offset);
        prev_width = width;
      }
      p.v.assign(prev_width, 0.0);
      for (const auto& [src, coef] : top.blocks) {
        const auto& v = levels[depth - 1][src].square.params().v;
        for (std::size_t i = 0; i < v.size(); ++i) p.v[prev_offset[src] + i] = coef * v[i];
      }
      p.c = top.c;
      p.d = top.d;
      return BasicNet<Tag>(act, std::move(p));
    }
  };

  Node push(Item item) {
    items_.push_back(std::move(item));
    return items_.size() - 1;
  }

  void check_dim(const std::vector<double>& c) const {
    if (c.size() != n_) throw StructuralError("circuit: affine part has the wrong dimension");
  }

  std::size_t n_;
  std::vector<Item> items_;
  std::map<Node, Node> squares_;
  std::map<std::pair<Node, Node>, Node> products_;
};

/// Accounting of a polynomial realization.
struct PolynomialReport {
  std::size_t network_terms = 0;   // terms of degree >= 2
  double kappa = 0.0;              // accuracy requested from the unit square approximator
  double unit_error = 0.0;         // certified error of the unit square approximator used
  double composition_error = 0.0;  // sum |coef_k| e_k
  std::size_t depth = 0;
};

namespace detail {

inline Circuit::Node balanced_product(Circuit& circuit, const std::vector<Circuit::Node>& factors, std::size_t lo,
                                      std::size_t hi) {
  if (hi - lo == 1) return factors[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  return circuit.product(balanced_product(circuit, factors, lo, mid), balanced_product(circuit, factors, mid, hi));
}

/// Powers t_k^e by repeated squaring: t^{2q} = (t^q)^2, t^{2q+1} = t^{2q} t.
class PowerBasis {
 public:
  PowerBasis(Circuit& circuit, const MonomialFrame& frame) : circuit_(circuit), frame_(frame) {}

  Circuit::Node power(std::size_t axis, unsigned e) {
    if (auto it = memo_.find({axis, e}); it != memo_.end()) return it->second;
    Circuit::Node node;
    if (e == 1) {
      std::vector<double> c(frame_.dim(), 0.0);
      c[axis] = frame_.map.scale[axis];
      node = circuit_.affine(std::move(c), frame_.map.shift[axis], frame_.bounds[axis]);
    } else if (e % 2 == 0) {
      node = circuit_.square(power(axis, e / 2));
    } else {
      node = circuit_.product(power(axis, e - 1), power(axis, 1));
    }
    memo_[{axis, e}] = node;
    return node;
  }

  Circuit::Node term(const std::vector<unsigned>& exponents) {
    std::vector<Circuit::Node> factors;
    for (std::size_t k = 0; k < exponents.size(); ++k) {
      if (exponents[k] > 0) factors.push_back(power(k, exponents[k]));
    }
    return balanced_product(circuit_, factors, 0, factors.size());
  }

 private:
  Circuit& circuit_;
  const MonomialFrame& frame_;
  std::map<std::pair<std::size_t, unsigned>, Circuit::Node> memo_;
};

/// Chebyshev polynomials of normalized coordinates via T_{2m} = 2 T_m^2 - 1 and
/// T_{2m+1} = 2 T_m T_{m+1} - t; every T_k has magnitude 1 on [-1, 1].
class ChebyshevBasis {
 public:
  ChebyshevBasis(Circuit& circuit, const CoordinateMap& map) : circuit_(circuit), map_(map) {}

  Circuit::Node poly(std::size_t axis, unsigned k) {
    if (auto it = memo_.find({axis, k}); it != memo_.end()) return it->second;
    const std::size_t n = map_.dim();
    Circuit::Node node;
    if (k == 1) {
      node = circuit_.affine(coordinate(axis, 1.0), map_.shift[axis], 1.0);
    } else if (k % 2 == 0) {
      node = circuit_.combine({{circuit_.square(poly(axis, k / 2)), 2.0}}, std::vector<double>(n, 0.0), -1.0, 1.0);
    } else {
      const unsigned m = k / 2;
      node = circuit_.combine({{circuit_.product(poly(axis, m), poly(axis, m + 1)), 2.0}}, coordinate(axis, -1.0),
                              -map_.shift[axis], 1.0);
    }
    memo_[{axis, k}] = node;
    return node;
  }

  Circuit::Node term(const std::vector<unsigned>& degrees) {
    std::vector<Circuit::Node> factors;
    for (std::size_t k = 0; k < degrees.size(); ++k) {
      if (degrees[k] > 0) factors.push_back(poly(k, degrees[k]));
    }
    return balanced_product(circuit_, factors, 0, factors.size());
  }

 private:
  std::vector<double> coordinate(std::size_t axis, double sign) const {
    std::vector<double> c(map_.dim(), 0.0);
    c[axis] = sign * map_.scale[axis];
    return c;
  }

  Circuit& circuit_;
  const CoordinateMap& map_;
  std::map<std::pair<std::size_t, unsigned>, Circuit::Node> memo_;
};

/// Picks the largest kappa for which every term satisfies
/// |coef_k| e_k(kappa) <= budget / (number of terms), builds the unit square
/// approximator and compiles sum_k coef_k node_k + <c, x> + d.
template <class Tag>
Approximant<Tag> realize(Circuit& circuit, const std::vector<std::pair<Circuit::Node, double>>& terms,
                         std::vector<double> c, double d, double magnitude, double budget, Squarer& squarer,
                         PolynomialReport* report) {
  const Circuit::Node output = circuit.combine(terms, std::move(c), d, magnitude);
  PolynomialReport rep;
  rep.network_terms = terms.size();
  if (terms.empty()) {
    if (report) *report = rep;
    const SquareApproximator unused{affine_net<ScalarNet>(squarer.activation(), {0.0}, 0.0)};
    return {circuit.compile<Tag>(output, unused), magnitude, 0.0};
  }
  const double share = budget / static_cast<double>(terms.size());
  auto worst = [&](double kappa) {
    const auto b = circuit.bounds(kappa);
    double ratio = 0.0;
    for (const auto& [node, coef] : terms) ratio = std::max(ratio, std::abs(coef) * b[node].error / share);
    return ratio;
  };
  constexpr double lo_limit = 1e-14;
  constexpr double hi_limit = 0.25;
  double kappa = hi_limit;
  if (worst(hi_limit) > 1.0) {
    if (worst(lo_limit) > 1.0) {
      throw StageBudgetExceededError(worst(lo_limit) * share, share,
                                     "polynomial terms cannot meet their share of the budget even with exact squares");
    }
    double lo = std::log(lo_limit);
    double hi = std::log(hi_limit);
    while (hi - lo > 0.01) {
      const double mid = 0.5 * (lo + hi);
      (worst(std::exp(mid)) <= 1.0 ? lo : hi) = mid;
    }
    kappa = std::exp(lo);
  }
  const SquareApproximator& unit = squarer.unit(kappa);
  const auto b = circuit.bounds(unit.certified_error);
  rep.kappa = kappa;
  rep.unit_error = unit.certified_error;
  for (const auto& [node, coef] : terms) rep.composition_error += std::abs(coef) * b[node].error;
  rep.depth = circuit.height(output);
  if (report) *report = rep;
  return {circuit.compile<Tag>(output, unit), magnitude, rep.composition_error};
}

inline void check_degree(const Monomial& term, unsigned max_degree) {
  if (term.degree() > max_degree) {
    throw StageBudgetExceededError(term.degree(), max_degree,
                                   "term degree " + std::to_string(term.degree()) + " exceeds the degree budget " +
                                       std::to_string(max_degree));
  }
}

}  // namespace detail

/// Network for sum_k coef_k t^{e_k} with t = frame.map(x). Terms of degree
/// <= 1 go exactly into (c, d); the budget is split equally across the others.
template <class Tag = vector_input>
Approximant<Tag> polynomial_net(const Polynomial& poly, const MonomialFrame& frame, double budget, Squarer& squarer,
                                unsigned max_degree = 64, PolynomialReport* report = nullptr) {
  const std::size_t n = frame.dim();
  if (poly.dim != n) throw StructuralError("polynomial dimension does not match the coordinate frame");
  Circuit circuit(n);
  detail::PowerBasis basis(circuit, frame);
  std::vector<double> c(n, 0.0);
  double d = 0.0;
  double magnitude = 0.0;
  std::vector<std::pair<Circuit::Node, double>> terms;
  for (const auto& term : poly.terms) {
    detail::check_degree(term, max_degree);
    double bound = std::abs(term.coef);
    for (std::size_t k = 0; k < n; ++k) bound *= std::pow(frame.bounds[k], term.exponents[k]);
    magnitude += bound;
    const unsigned deg = term.degree();
    if (deg == 0) {
      d += term.coef;
    } else if (deg == 1) {
      for (std::size_t k = 0; k < n; ++k) {
        if (term.exponents[k] == 1) {
          c[k] += term.coef * frame.map.scale[k];
          d += term.coef * frame.map.shift[k];
        }
      }
    } else {
      terms.emplace_back(basis.term(term.exponents), term.coef);
    }
  }
  return detail::realize<Tag>(circuit, terms, std::move(c), d, magnitude, budget, squarer, report);
}

/// Network for prod_k t_k^{e_k}, t = frame.map(x), within `budget` of the exact monomial.
template <class Tag = vector_input>
Approximant<Tag> monomial_net(const std::vector<unsigned>& exponents, const MonomialFrame& frame, double budget,
                              Squarer& squarer, unsigned max_degree = 64, PolynomialReport* report = nullptr) {
  if (exponents.size() != frame.dim()) throw StructuralError("one exponent per coordinate required");
  return polynomial_net<Tag>(Polynomial{frame.dim(), {Monomial{exponents, 1.0}}}, frame, budget, squarer, max_degree,
                             report);
}

/// Network for a Chebyshev series on `box` (normalized coordinates). Terms
/// of total degree <= 1 go exactly into (c, d).
template <class Tag = vector_input>
Approximant<Tag> chebyshev_net(const ChebyshevSeries& series, const Box& box, double budget, Squarer& squarer,
                               unsigned max_degree = 64, PolynomialReport* report = nullptr) {
  const std::size_t n = box.dim();
  if (series.dim != n) throw StructuralError("series dimension does not match the box");
  const CoordinateMap map = CoordinateMap::normalizing(box);
  Circuit circuit(n);
  detail::ChebyshevBasis basis(circuit, map);
  std::vector<double> c(n, 0.0);
  double d = 0.0;
  double magnitude = 0.0;
  std::vector<std::pair<Circuit::Node, double>> terms;
  for (const auto& term : series.terms) {
    for (unsigned e : term.exponents) {
      if (e > max_degree) {
        throw StageBudgetExceededError(e, max_degree, "Chebyshev degree exceeds the degree budget");
      }
    }
    magnitude += std::abs(term.coef);
    const unsigned deg = term.degree();
    if (deg == 0) {
      d += term.coef;
    } else if (deg == 1) {
      for (std::size_t k = 0; k < n; ++k) {
        if (term.exponents[k] == 1) {
          c[k] += term.coef * map.scale[k];
          d += term.coef * map.shift[k];
        }
      }
    } else {
      terms.emplace_back(basis.term(term.exponents), term.coef);
    }
  }
  return detail::realize<Tag>(circuit, terms, std::move(c), d, magnitude, budget, squarer, report);
}

}  // namespace icmlp
