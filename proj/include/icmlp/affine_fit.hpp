#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "icmlp/errors.hpp"
#include "icmlp/net.hpp"

namespace icmlp {

/// Affine model x -> <alpha, x> + beta together with its worst residual on the
/// verification probes.
struct AffineFit {
  std::vector<double> alpha;
  double beta = 0.0;
  double max_residual = 0.0;
};

/// Fits an affine function to `net` by least squares on the first input_dim+1
/// probes and reports the largest deviation over all probes.
///
/// `probes` is row-major, one point of input_dim() coordinates per row. With an
/// affine activation every network is affine, so the residual sits at rounding
/// level; with a nonlinear activation it generally does not.
template <class Tag>
AffineFit fit_affine(const BasicNet<Tag>& net, std::span<const double> probes) {
  const std::size_t n = net.input_dim();
  if (probes.size() % n != 0) throw StructuralError("probe array length is not a multiple of input_dim");
  const std::size_t count = probes.size() / n;
  if (count < n + 1) throw StructuralError("affine fit needs at least input_dim + 1 probes");

  Eigen::MatrixXd design(n + 1, n + 1);
  Eigen::VectorXd rhs(n + 1);
  for (std::size_t r = 0; r <= n; ++r) {
    const double* x = probes.data() + r * n;
    for (std::size_t k = 0; k < n; ++k) design(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = x[k];
    design(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(n)) = 1.0;
    rhs(static_cast<Eigen::Index>(r)) = net.evaluate_at(x);
  }
  const Eigen::VectorXd sol = design.colPivHouseholderQr().solve(rhs);

  AffineFit fit;
  fit.alpha.assign(sol.data(), sol.data() + n);
  fit.beta = sol(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < count; ++r) {
    const double* x = probes.data() + r * n;
    double model = fit.beta;
    for (std::size_t k = 0; k < n; ++k) model += fit.alpha[k] * x[k];
    fit.max_residual = std::max(fit.max_residual, std::abs(net.evaluate_at(x) - model));
  }
  return fit;
}

}  // namespace icmlp
