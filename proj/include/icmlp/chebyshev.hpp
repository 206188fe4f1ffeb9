#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "icmlp/errors.hpp"
#include "icmlp/grid.hpp"

namespace icmlp {

struct Monomial {
  std::vector<unsigned> exponents;
  double coef = 0.0;

  unsigned degree() const noexcept {
    unsigned total = 0;
    for (unsigned e : exponents) total += e;
    return total;
  }
};

/// Polynomial in monomial form.
struct Polynomial {
  std::size_t dim = 1;
  std::vector<Monomial> terms;

  double operator()(std::span<const double> t) const {
    double sum = 0.0;
    for (const auto& term : terms) {
      double value = term.coef;
      for (std::size_t k = 0; k < dim; ++k) {
        for (unsigned e = 0; e < term.exponents[k]; ++e) value *= t[k];
      }
      sum += value;
    }
    return sum;
  }
};

/// Affine change of variables t_k = scale_k x_k + shift_k mapping a box onto [-1, 1]^n.
struct CoordinateMap {
  std::vector<double> scale;
  std::vector<double> shift;

  static CoordinateMap identity(std::size_t dim) {
    return {std::vector<double>(dim, 1.0), std::vector<double>(dim, 0.0)};
  }
  static CoordinateMap normalizing(const Box& box) {
    CoordinateMap map;
    for (const auto& axis : box.axes) {
      const double half = 0.5 * (axis.hi - axis.lo);
      const double mid = 0.5 * (axis.hi + axis.lo);
      map.scale.push_back(1.0 / half);
      map.shift.push_back(-mid / half);
    }
    return map;
  }

  std::size_t dim() const noexcept { return scale.size(); }
  double to_t(std::size_t axis, double x) const { return scale[axis] * x + shift[axis]; }
  double to_x(std::size_t axis, double t) const { return (t - shift[axis]) / scale[axis]; }
};

namespace detail {

/// Matrix mapping samples at the n+1 first-kind Chebyshev points to the
/// coefficients of the interpolating series sum_k c_k T_k.
inline std::vector<std::vector<double>> chebyshev_transform(unsigned degree) {
  const std::size_t count = degree + 1;
  std::vector<std::vector<double>> m(count, std::vector<double>(count));
  for (std::size_t k = 0; k < count; ++k) {
    for (std::size_t j = 0; j < count; ++j) {
      const double theta = std::numbers::pi * (static_cast<double>(j) + 0.5) / static_cast<double>(count);
      m[k][j] = (k == 0 ? 1.0 : 2.0) / static_cast<double>(count) * std::cos(static_cast<double>(k) * theta);
    }
  }
  return m;
}

/// conv[p][k] = coefficient of t^p in T_k(t).
inline std::vector<std::vector<double>> chebyshev_to_monomial_matrix(unsigned degree) {
  const std::size_t count = degree + 1;
  std::vector<std::vector<double>> cheb(count, std::vector<double>(count, 0.0));  // cheb[k][p]
  cheb[0][0] = 1.0;
  if (count > 1) cheb[1][1] = 1.0;
  for (std::size_t k = 2; k < count; ++k) {
    for (std::size_t p = 0; p < count; ++p) {
      double value = -cheb[k - 2][p];
      if (p > 0) value += 2.0 * cheb[k - 1][p - 1];
      cheb[k][p] = value;
    }
  }
  std::vector<std::vector<double>> conv(count, std::vector<double>(count));
  for (std::size_t p = 0; p < count; ++p) {
    for (std::size_t k = 0; k < count; ++k) conv[p][k] = cheb[k][p];
  }
  return conv;
}

inline std::vector<std::vector<double>> matmul(const std::vector<std::vector<double>>& lhs,
                                               const std::vector<std::vector<double>>& rhs) {
  std::vector<std::vector<double>> out(lhs.size(), std::vector<double>(rhs.front().size(), 0.0));
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    for (std::size_t k = 0; k < rhs.size(); ++k) {
      for (std::size_t j = 0; j < rhs[k].size(); ++j) out[i][j] += lhs[i][k] * rhs[k][j];
    }
  }
  return out;
}

/// In-place application of `m` along one axis of a row-major tensor.
inline void apply_along_axis(std::vector<double>& tensor, const std::vector<std::size_t>& shape,
                             std::size_t axis, const std::vector<std::vector<double>>& m) {
  std::size_t inner = 1;
  for (std::size_t k = axis + 1; k < shape.size(); ++k) inner *= shape[k];
  const std::size_t len = shape[axis];
  const std::size_t outer = tensor.size() / (inner * len);
  std::vector<double> line(len);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * len * inner + i;
      for (std::size_t r = 0; r < len; ++r) {
        double sum = 0.0;
        for (std::size_t s = 0; s < len; ++s) sum += m[r][s] * tensor[base + s * inner];
        line[r] = sum;
      }
      for (std::size_t r = 0; r < len; ++r) tensor[base + r * inner] = line[r];
    }
  }
}

}  // namespace detail

/// First-kind Chebyshev points cos((j + 1/2) pi / (n + 1)), j = 0..n.
inline std::vector<double> chebyshev_points(unsigned degree) {
  std::vector<double> out(degree + 1);
  for (std::size_t j = 0; j <= degree; ++j) {
    out[j] = std::cos(std::numbers::pi * (static_cast<double>(j) + 0.5) / static_cast<double>(degree + 1));
  }
  return out;
}

/// Tensor-product Chebyshev series sum_k coef_k prod_i T_{k_i}(t_i) in the
/// normalized coordinates t of a box.
struct ChebyshevSeries {
  std::size_t dim = 1;
  std::vector<Monomial> terms;  // exponents hold the Chebyshev degrees

  static double t_value(unsigned k, double t) {
    if (k == 0) return 1.0;
    double prev = 1.0;
    double cur = t;
    for (unsigned i = 1; i < k; ++i) {
      const double next = 2.0 * t * cur - prev;
      prev = cur;
      cur = next;
    }
    return cur;
  }

  double operator()(std::span<const double> t) const {
    double sum = 0.0;
    for (const auto& term : terms) {
      double value = term.coef;
      for (std::size_t k = 0; k < dim; ++k) value *= t_value(term.exponents[k], t[k]);
      sum += value;
    }
    return sum;
  }
};

namespace detail {

inline std::vector<double> sample_tensor(const std::function<double(std::span<const double>)>& f, const Box& box,
                                         const std::vector<unsigned>& degrees, std::vector<std::size_t>& shape) {
  box.validate();
  const std::size_t dim = box.dim();
  if (degrees.size() != dim) throw StructuralError("one Chebyshev degree per axis required");
  const CoordinateMap map = CoordinateMap::normalizing(box);
  std::vector<std::vector<double>> nodes;
  std::size_t total = 1;
  shape.clear();
  for (std::size_t k = 0; k < dim; ++k) {
    shape.push_back(degrees[k] + 1);
    nodes.push_back(chebyshev_points(degrees[k]));
    total *= shape[k];
  }
  std::vector<double> tensor(total);
  std::vector<double> x(dim);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    for (std::size_t k = dim; k-- > 0;) {
      x[k] = map.to_x(k, nodes[k][rest % shape[k]]);
      rest /= shape[k];
    }
    tensor[idx] = f(x);
    if (!std::isfinite(tensor[idx])) throw StructuralError("target is not finite on the domain");
  }
  return tensor;
}

inline std::vector<Monomial> tensor_terms(const std::vector<double>& tensor, const std::vector<std::size_t>& shape,
                                          double drop_below) {
  double largest = 0.0;
  for (double c : tensor) largest = std::max(largest, std::abs(c));
  std::vector<Monomial> terms;
  for (std::size_t idx = 0; idx < tensor.size(); ++idx) {
    if (std::abs(tensor[idx]) <= drop_below * largest) continue;
    Monomial term;
    term.exponents.resize(shape.size());
    std::size_t rest = idx;
    for (std::size_t k = shape.size(); k-- > 0;) {
      term.exponents[k] = static_cast<unsigned>(rest % shape[k]);
      rest /= shape[k];
    }
    term.coef = tensor[idx];
    terms.push_back(std::move(term));
  }
  return terms;
}

}  // namespace detail

/// Tensor-product Chebyshev interpolant of `f` on `box` at first-kind points.
/// Terms with |coef| <= drop_below * max|coef| are discarded.
inline ChebyshevSeries chebyshev_series(const std::function<double(std::span<const double>)>& f, const Box& box,
                                        const std::vector<unsigned>& degrees, double drop_below = 1e-13) {
  std::vector<std::size_t> shape;
  std::vector<double> tensor = detail::sample_tensor(f, box, degrees, shape);
  for (std::size_t k = 0; k < shape.size(); ++k) {
    detail::apply_along_axis(tensor, shape, k, detail::chebyshev_transform(degrees[k]));
  }
  return {box.dim(), detail::tensor_terms(tensor, shape, drop_below)};
}

/// Same interpolant in monomial form, in the normalized coordinates of the box.
inline Polynomial chebyshev_interpolant(const std::function<double(std::span<const double>)>& f, const Box& box,
                                        const std::vector<unsigned>& degrees, double drop_below = 1e-13) {
  std::vector<std::size_t> shape;
  std::vector<double> tensor = detail::sample_tensor(f, box, degrees, shape);
  for (std::size_t k = 0; k < shape.size(); ++k) {
    const auto m = detail::matmul(detail::chebyshev_to_monomial_matrix(degrees[k]),
                                  detail::chebyshev_transform(degrees[k]));
    detail::apply_along_axis(tensor, shape, k, m);
  }
  return {box.dim(), detail::tensor_terms(tensor, shape, drop_below)};
}

}  // namespace icmlp
