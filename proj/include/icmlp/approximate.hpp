#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "icmlp/chebyshev.hpp"
#include "icmlp/errors.hpp"
#include "icmlp/grid.hpp"
#include "icmlp/net.hpp"
#include "icmlp/circuit.hpp"
#include "icmlp/square.hpp"

namespace icmlp {

using Target = std::function<double(std::span<const double>)>;

struct ApproxBudget {
  unsigned max_degree = 64;         // per axis
  std::size_t max_nodes = 65536;    // quadrature nodes of the mollifier
  std::size_t probe_points = 0;     // certification grid per axis; 0 picks 2000 (1-D) or 200
};

struct ApproxRequest {
  Target target;
  Box domain;
  double tolerance = 0.0;
  ApproxBudget budget;
};

struct ErrorLedger {
  double quadrature = 0.0;             // |sum lambda - 1| of the mollifiers used
  double second_difference = 0.0;      // largest certified error of a unit square approximator
  double composition = 0.0;            // bound on |net - p| from the square/product tree
  double polynomial_truncation = 0.0;  // sup |f - p| on the certification grid
};

struct Certificate {
  double tolerance = 0.0;
  double achieved_sup_error = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> grid_points;  // per axis
  ErrorLedger ledger;
  double claimed_bound = std::numeric_limits<double>::infinity();  // truncation + composition
  std::vector<unsigned> degrees;                                    // Chebyshev degree per axis
  std::size_t polynomial_terms = 0;
  std::size_t network_terms = 0;
  std::string activation;
  bool met() const noexcept { return achieved_sup_error <= tolerance; }
};

/// The tolerance could not be reached within the budget. Carries the best
/// certificate obtained so far and, when one was built, the network.
class BudgetExhaustedError : public Error {
 public:
  BudgetExhaustedError(Certificate best, std::optional<VectorNet> net, const std::string& what)
      : Error(what), best_(std::move(best)), net_(std::move(net)) {}
  const Certificate& best() const noexcept { return best_; }
  const std::optional<VectorNet>& net() const noexcept { return net_; }

 private:
  Certificate best_;
  std::optional<VectorNet> net_;
};

struct ApproxResult {
  VectorNet net;
  Certificate certificate;
};

struct ConstructionOptions {
  std::size_t threads = 1;
  SquareSearch search;
};

inline std::size_t default_probe_points(std::size_t dim) { return dim == 1 ? 2000 : 200; }

/// sup |net - f| over a tensor grid of the box.
inline double measure_sup_error(const VectorNet& net, const Target& f, const Box& domain,
                                const std::vector<std::size_t>& points, std::size_t threads = 1) {
  const BoxGrid grid(domain, points);
  return grid_sup(grid, [&](std::span<const double> x) { return net.evaluate_at(x.data()) - f(x); }, threads);
}

namespace detail {

inline std::string collinearity_probe(const Target& f, const Box& domain) {
  std::vector<double> lo, mid, hi;
  for (const auto& axis : domain.axes) {
    lo.push_back(axis.lo);
    hi.push_back(axis.hi);
    mid.push_back(0.5 * (axis.lo + axis.hi));
  }
  const double gap = f(mid) - 0.5 * (f(lo) + f(hi));
  std::ostringstream out;
  out << "midpoint deviation from the chord through the box corners is " << gap;
  return out.str();
}

}  // namespace detail

/// Builds a network within `req.tolerance` of the target on the domain.
///
/// Stage 1 fits a tensor Chebyshev interpolant p with sup |f - p| <= tol/2 on
/// the certification grid, doubling degrees (per axis, greedily) from 1.
/// Stage 2 realizes p in the Chebyshev basis of the normalized coordinates
/// (chebyshev_net) with budget tol/2 split equally across the terms of
/// degree >= 2; each T_k has magnitude 1 on the box, which keeps the
/// coefficients O(sup |f|) where monomial coefficients can grow like 2^k.
inline ApproxResult approximate(const ApproxRequest& req, const Activation& activation,
                                const ConstructionOptions& options = {}) {
  if (activation.is_affine()) {
    std::string probe;
    if (req.target && !req.domain.axes.empty()) probe = "; " + detail::collinearity_probe(req.target, req.domain);
    throw NonlinearityRequiredError("activation " + activation.to_string() +
                                    " is affine: every network built from it computes an affine function" + probe);
  }
  if (!req.target) throw StructuralError("approximate: no target function");
  req.domain.validate();
  if (!(req.tolerance > 0.0) || !std::isfinite(req.tolerance)) {
    throw StructuralError("approximate: tolerance must be positive");
  }
  const std::size_t dim = req.domain.dim();
  const std::size_t per_axis =
      req.budget.probe_points ? req.budget.probe_points : default_probe_points(dim);

  Certificate cert;
  cert.tolerance = req.tolerance;
  cert.grid_points.assign(dim, per_axis);
  cert.activation = activation.to_string();

  const BoxGrid grid(req.domain, cert.grid_points);
  const CoordinateMap map = CoordinateMap::normalizing(req.domain);
  auto truncation = [&](const ChebyshevSeries& p) {
    return grid_sup(
        grid,
        [&](std::span<const double> x) {
          std::vector<double> t(dim);
          for (std::size_t k = 0; k < dim; ++k) t[k] = map.to_t(k, x[k]);
          return req.target(x) - p(t);
        },
        options.threads);
  };

  // Stage 1: polynomial
  const double poly_budget = 0.5 * req.tolerance;
  std::vector<unsigned> degrees(dim, 1);
  ChebyshevSeries poly = chebyshev_series(req.target, req.domain, degrees);
  double poly_err = truncation(poly);
  while (!(poly_err <= poly_budget)) {
    std::optional<std::size_t> pick;
    ChebyshevSeries pick_poly;
    double pick_err = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < dim; ++k) {
      if (degrees[k] * 2 > req.budget.max_degree) continue;
      auto trial = degrees;
      trial[k] *= 2;
      ChebyshevSeries candidate = chebyshev_series(req.target, req.domain, trial);
      const double err = truncation(candidate);
      if (!pick || err < pick_err) {
        pick = k;
        pick_err = err;
        pick_poly = std::move(candidate);
      }
    }
    if (!pick) {
      cert.degrees = degrees;
      cert.polynomial_terms = poly.terms.size();
      cert.ledger.polynomial_truncation = poly_err;
      cert.achieved_sup_error = poly_err;
      throw BudgetExhaustedError(cert, std::nullopt,
                                 "polynomial stage stalled at sup error " + std::to_string(poly_err) +
                                     " > " + std::to_string(poly_budget) + " within the degree budget");
    }
    degrees[*pick] *= 2;
    poly = std::move(pick_poly);
    poly_err = pick_err;
  }
  cert.degrees = degrees;
  cert.polynomial_terms = poly.terms.size();
  cert.ledger.polynomial_truncation = poly_err;

  // Stage 2: network
  SquareSearch search = options.search;
  search.max_nodes = req.budget.max_nodes;
  Squarer squarer(activation, search);
  PolynomialReport report;
  std::optional<Approximant<vector_input>> built;
  try {
    built = chebyshev_net<vector_input>(poly, req.domain, req.tolerance - poly_budget, squarer,
                                        req.budget.max_degree, &report);
  } catch (const StageBudgetExceededError& e) {
    cert.ledger.quadrature = squarer.mass_defect();
    cert.achieved_sup_error = std::numeric_limits<double>::infinity();
    throw BudgetExhaustedError(cert, std::nullopt, std::string("network stage: ") + e.what());
  }
  cert.network_terms = report.network_terms;
  cert.ledger.quadrature = squarer.mass_defect();
  cert.ledger.composition = report.composition_error;
  cert.claimed_bound = cert.ledger.polynomial_truncation + cert.ledger.composition;
  cert.ledger.second_difference = report.unit_error;

  cert.achieved_sup_error = measure_sup_error(built->net, req.target, req.domain, cert.grid_points, options.threads);
  if (!cert.met()) {
    throw BudgetExhaustedError(cert, built->net,
                               "network error " + std::to_string(cert.achieved_sup_error) + " exceeds tolerance " +
                                   std::to_string(req.tolerance));
  }
  return {std::move(built->net), std::move(cert)};
}

/// Re-measures a certified network on a grid with twice the points per axis.
inline double verify_on_fresh_grid(const ApproxResult& result, const Target& f, const Box& domain,
                                   std::size_t threads = 1) {
  std::vector<std::size_t> points = result.certificate.grid_points;
  for (auto& p : points) p *= 2;
  return measure_sup_error(result.net, f, domain, points, threads);
}

}  // namespace icmlp
