#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "icmlp/approximate.hpp"
#include "icmlp/chebyshev.hpp"
#include "icmlp/circuit.hpp"
#include "icmlp/mollifier.hpp"
#include "icmlp/square.hpp"
#include "icmlp/verify.hpp"
#include "support/oracles.hpp"

using namespace icmlp;

namespace {

double sup_on(const std::function<double(double)>& f, double lo, double hi, std::size_t n = 4001) {
  double worst = 0.0;
  for (double x : linspace(lo, hi, n)) worst = std::max(worst, std::abs(f(x)));
  return worst;
}

struct Source {
  MollifierSpec spec;
  ScalarNet net;
  CurvaturePoint curv;
};

Source source_for(const Activation& act, std::size_t nodes) {
  MollifierSpec spec;
  spec.nodes = nodes;
  ScalarNet net = build_mollified(spec, act);
  const CurvaturePoint curv = find_curvature(net, CurvatureSearch::for_mollifier(spec));
  return {spec, net, curv};
}

Approximant<vector_input> coordinate(double c, double d, double magnitude) {
  return {affine_net<VectorNet>(Activation::tanh(), {c}, d), magnitude, 0.0};
}

}  // namespace

TEST(Mollifier, MassAndNodes) {
  for (std::size_t m : {64u, 256u, 1024u}) {
    const MollifierSpec spec{0.1, m};
    EXPECT_NEAR(spec.mass(), 1.0, 1e-6) << m;
    for (double y : spec.positions()) {
      EXPECT_GT(y, -spec.width);
      EXPECT_LT(y, spec.width);
    }
  }
}

TEST(Mollifier, BumpNormalizerMatchesSimpson) {
  const auto phi = oracle::bump(1.0);
  for (double t : {-0.9, -0.3, 0.0, 0.5}) EXPECT_NEAR(bump(t), phi(t), 1e-9);
}

TEST(Mollifier, NetworkLayout) {
  const MollifierSpec spec{0.2, 48, 2.0, 0.5};
  const ScalarNet s = build_mollified(spec, Activation::tanh());
  ASSERT_EQ(s.depth(), 1u);
  const auto y = spec.positions();
  const auto lambda = spec.weights();
  for (std::size_t k = 0; k < spec.nodes; ++k) {
    EXPECT_EQ(s.layer(0).a[k], 2.0);
    EXPECT_EQ(s.layer(0).b[k], 0.5 - 2.0 * y[k]);
    EXPECT_EQ(s.params().v[k], lambda[k]);
  }
  EXPECT_EQ(s.params().c[0], 0.0);
  EXPECT_EQ(s.params().d, 0.0);
}

TEST(Mollifier, SmoothedReluMatchesIntegral) {
  const MollifierSpec spec{0.5, 401};
  const ScalarNet s = build_mollified(spec, Activation::relu());
  const auto phi = oracle::bump(0.5);
  auto exact = [&](double x) {
    return oracle::simpson([&](double y) { return std::max(x - y, 0.0) * phi(y); }, -0.5, 0.5, 20000);
  };
  EXPECT_LE(std::abs(s(-1.0)), 1e-8);
  EXPECT_NEAR(s(1.0), 1.0, 1e-4);
  EXPECT_NEAR(s(1.0), exact(1.0), 1e-4);
  EXPECT_NEAR(s(0.1), exact(0.1), 1e-4);
}

TEST(Mollifier, RefinementConverges) {
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t m : {48u, 64u, 128u, 256u}) {
    const ScalarNet coarse = build_mollified(MollifierSpec{0.1, m}, Activation::tanh());
    const ScalarNet fine = build_mollified(MollifierSpec{0.1, 2 * m}, Activation::tanh());
    const double gap = sup_on([&](double x) { return coarse(x) - fine(x); }, -3, 3);
    EXPECT_LT(gap, prev) << m;
    prev = gap;
  }
}

TEST(Mollifier, Contract) {
  EXPECT_THROW(build_mollified(MollifierSpec{0.1, 1}, Activation::tanh()), StructuralError);
  EXPECT_THROW(build_mollified(MollifierSpec{0.1, 8}, Activation::tanh()), StructuralError);
  EXPECT_THROW(build_mollified(MollifierSpec{0.1, 64}, Activation::identity()), NonlinearityRequiredError);
}

TEST(Curvature, SmoothedReluPeaksAtKink) {
  const Source src = source_for(Activation::relu(), 1024);
  EXPECT_GE(src.curv.x0, -0.2);
  EXPECT_LE(src.curv.x0, 0.2);
  EXPECT_GT(src.curv.s2, 0.0);
  // S'' of the mollified relu is the bump itself
  EXPECT_NEAR(src.curv.s2, oracle::bump(0.1)(src.curv.x0), 0.02 * src.curv.s2);
}

TEST(Curvature, TanhMatchesIntegralOracle) {
  const Source src = source_for(Activation::tanh(), 64);
  const auto phi = oracle::bump(0.1);
  auto smooth = [&](double x) {
    return oracle::simpson([&](double y) { return std::tanh(x - y) * phi(y); }, -0.1, 0.1, 4000);
  };
  const double h = 1e-3;
  const double x0 = src.curv.x0;
  const double fd = (smooth(x0 + h) - 2 * smooth(x0) + smooth(x0 - h)) / (h * h);
  EXPECT_NEAR(src.curv.s2, fd, 0.05 * std::abs(fd));
}

TEST(Curvature, AffineActivationHasNone) {
  const MollifierSpec spec;
  NetParams p;
  Layer layer;
  for (double y : spec.positions()) {
    layer.a.push_back(1.0);
    layer.b.push_back(-y);
  }
  p.layers.push_back(layer);
  p.v = spec.weights();
  p.c = {0.0};
  const ScalarNet s(Activation::identity(), p);
  EXPECT_THROW(find_curvature(s, CurvatureSearch::for_mollifier(spec)), CurvatureNotFoundError);
}

TEST(SquareApprox, ErrorShrinksWithDelta) {
  const Source src = source_for(Activation::tanh(), 64);
  double prev = std::numeric_limits<double>::infinity();
  for (double delta : {0.1, 0.05, 0.025}) {
    const SquareApproximator p = build_square(src.curv, src.net, delta, 1.0);
    const double err = sup_on([&](double x) { return p.net(x) - x * x; }, -1, 1);
    EXPECT_LT(err, prev) << delta;
    EXPECT_LE(err, p.certified_error);
    prev = err;
  }
}

TEST(SquareApprox, ZeroAtOriginAndEven) {
  for (const auto& act : {Activation::tanh(), Activation::relu()}) {
    const Source src = source_for(act, act.is_piecewise_linear() ? 1024 : 64);
    const SquareApproximator p = build_square(src.curv, src.net, 0.05, 1.0);
    EXPECT_LE(std::abs(p.net(0.0)), 1e-9) << act.name();
    EXPECT_NEAR(p.net(1.0) + p.net(-1.0), 2.0 * p.net(1.0), 1e-10) << act.name();
    EXPECT_EQ(p.net.params().c[0], 0.0);
  }
}

TEST(SquareApprox, StageBudget) {
  const Source src = source_for(Activation::tanh(), 64);
  SquareOptions options;
  options.stage_budget = 1e-6;
  EXPECT_THROW(build_square(src.curv, src.net, 0.1, 1.0, options), StageBudgetExceededError);
}

TEST(SquareApprox, MonotoneInNodes) {
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t m : {48u, 64u, 128u, 256u}) {
    const Source src = source_for(Activation::tanh(), m);
    const double err = build_square(src.curv, src.net, 0.05, 1.0).certified_error;
    EXPECT_LE(err, 2.0 * prev) << m;
    prev = err;
  }
}

TEST(SquareApprox, RescaleKeepsCertificate) {
  Squarer squarer(Activation::tanh());
  const SquareApproximator& unit = squarer.unit(1e-4);
  EXPECT_LE(unit.certified_error, 1e-4);
  const SquareApproximator wide = rescale_square(unit, 3.0);
  EXPECT_DOUBLE_EQ(wide.radius, 3.0);
  EXPECT_LE(sup_on([&](double x) { return wide.net(x) - x * x; }, -3, 3), wide.certified_error);
}

TEST(Squarer, ReachesRequestedAccuracy) {
  for (const auto& act : {Activation::tanh(), Activation::relu(), Activation::sigmoid(), Activation::softplus()}) {
    Squarer squarer(act);
    const SquareApproximator& p = squarer.unit(1e-3);
    EXPECT_LE(p.certified_error, 1e-3) << act.name();
    EXPECT_LE(sup_on([&](double x) { return p.net(x) - x * x; }, -1, 1, 20001), p.certified_error) << act.name();
  }
  EXPECT_THROW(Squarer(Activation::affine(2, 1)), NonlinearityRequiredError);
}

TEST(SquareNet, ScaledIdentity) {
  Squarer squarer(Activation::tanh());
  const SquareApproximator p = rescale_square(squarer.unit(1e-5), 2.2);
  const Box unit{{{-1, 1}}};
  const auto w = affine_net<VectorNet>(Activation::tanh(), {2.0}, 0.0);
  const VectorNet sq = square_net(p, w, unit);
  EXPECT_EQ(sq.depth(), 1u);
  double worst = 0.0;
  for (double x : linspace(-1, 1, 2001)) {
    const double in[1] = {x};
    worst = std::max(worst, std::abs(sq(in) - 4 * x * x));
  }
  EXPECT_LE(worst, p.certified_error);
}

TEST(SquareNet, ConstantAndOverflow) {
  Squarer squarer(Activation::tanh());
  const SquareApproximator& p = squarer.unit(1e-5);
  const Box unit{{{-1, 1}}};
  const VectorNet half = square_net(p, affine_net<VectorNet>(Activation::tanh(), {0.0}, 0.5), unit);
  for (double x : {-1.0, 0.0, 0.7}) {
    const double in[1] = {x};
    EXPECT_NEAR(half(in), 0.25, p.certified_error);
  }
  EXPECT_THROW(square_net(p, affine_net<VectorNet>(Activation::tanh(), {2.0}, 0.0), unit), RangeOverflowError);
}

TEST(ProductNet, SquareAnnihilationAndClosedForm) {
  Squarer squarer(Activation::tanh());
  const double kappa = 1e-5;
  const auto x = coordinate(1.0, 0.0, 1.0);
  const auto zero = coordinate(0.0, 0.0, 0.0);

  const auto xx = product_net(x, x, squarer, kappa);
  const auto x0 = product_net(x, zero, squarer, kappa);
  double e_sq = 0.0, e_zero = 0.0;
  for (double t : linspace(-1, 1, 2001)) {
    const double in[1] = {t};
    e_sq = std::max(e_sq, std::abs(xx.net(in) - t * t));
    e_zero = std::max(e_zero, std::abs(x0.net(in)));
  }
  EXPECT_LE(e_sq, xx.error);
  EXPECT_LE(xx.error, 3.0 * 4.0 * 1.21 * squarer.unit(kappa).certified_error);
  EXPECT_LE(e_zero, x0.error);

  const auto one_minus = coordinate(-1.0, 1.0, 1.0);
  const auto prod = product_net(x, one_minus, squarer, kappa);
  double e_prod = 0.0;
  for (double t : linspace(0, 1, 2001)) {
    const double in[1] = {t};
    e_prod = std::max(e_prod, std::abs(prod.net(in) - (t - t * t)));
  }
  EXPECT_LE(e_prod, prod.error);
}

TEST(Monomials, ConstantIsExact) {
  Squarer squarer(Activation::tanh());
  const Box box{{{-1, 1}, {-1, 1}, {-1, 1}}};
  const auto one = monomial_net({0, 0, 0}, MonomialFrame::raw(box), 1e-3, squarer);
  EXPECT_EQ(one.net.depth(), 0u);
  const std::vector<double> x{0.3, -0.2, 0.9};
  EXPECT_EQ(one.net(x), 1.0);
  EXPECT_EQ(one.error, 0.0);
}

TEST(Monomials, BilinearWithinLedger) {
  for (const auto& act : {Activation::tanh(), Activation::relu()}) {
    Squarer squarer(act);
    const Box box{{{-1, 1}, {-1, 1}}};
    const auto xy = monomial_net({1, 1}, MonomialFrame::raw(box), 1e-2, squarer);
    const BoxGrid grid(box, 101);
    const double err = grid_sup(grid, [&](std::span<const double> x) { return xy.net(x) - x[0] * x[1]; });
    EXPECT_LE(err, xy.error) << act.name();
    EXPECT_LE(xy.error, 1e-2) << act.name();
  }
}

TEST(Monomials, CubicPolynomialWithinLedger) {
  Squarer squarer(Activation::tanh());
  const Box box{{{-1, 1}}};
  const Polynomial p{1, {Monomial{{3}, 2.0}, Monomial{{1}, -1.0}, Monomial{{0}, 0.5}}};
  PolynomialReport report;
  const auto net = polynomial_net(p, MonomialFrame::raw(box), 1e-3, squarer, 64, &report);
  EXPECT_EQ(report.network_terms, 1u);
  double err = 0.0;
  for (double x : linspace(-1, 1, 4001)) {
    const double in[1] = {x};
    err = std::max(err, std::abs(net.net(in) - (2 * x * x * x - x + 0.5)));
  }
  EXPECT_LE(err, net.error);
  EXPECT_LE(net.error, 1e-3);
}

TEST(Monomials, DegreeBudget) {
  Squarer squarer(Activation::tanh());
  const Box box{{{-1, 1}}};
  EXPECT_THROW(monomial_net({9}, MonomialFrame::raw(box), 1e-3, squarer, 8), StageBudgetExceededError);
}

TEST(Chebyshev, SeriesReproducesPolynomials) {
  const Box box{{{-2, 3}}};
  auto f = [](std::span<const double> x) { return 2 * x[0] * x[0] * x[0] - x[0] + 0.5; };
  const ChebyshevSeries s = chebyshev_series(f, box, {3});
  const CoordinateMap map = CoordinateMap::normalizing(box);
  for (double x : linspace(-2, 3, 50)) {
    const double t[1] = {map.to_t(0, x)};
    const double in[1] = {x};
    EXPECT_NEAR(s(t), f(in), 1e-12);
  }
  const Polynomial mono = chebyshev_interpolant(f, Box{{{-1, 1}}}, {3});
  for (const auto& term : mono.terms) {
    const double expect = term.exponents[0] == 3 ? 2.0 : term.exponents[0] == 1 ? -1.0 : term.exponents[0] == 0 ? 0.5 : 0.0;
    EXPECT_NEAR(term.coef, expect, 1e-13);
  }
}

TEST(Approximate, AffineTargetBypassesNetwork) {
  ApproxRequest req{[](std::span<const double> x) { return x[0]; }, Box{{{0, 1}}}, 1e-3, {}};
  const ApproxResult r = approximate(req, Activation::tanh());
  EXPECT_EQ(r.net.depth(), 0u);
  EXPECT_NEAR(r.net.params().c[0], 1.0, 1e-15);
  EXPECT_NEAR(r.net.params().d, 0.0, 1e-15);
  EXPECT_LE(r.certificate.achieved_sup_error, 1e-15);
}

TEST(Approximate, SineWithTanh) {
  ApproxRequest req{[](std::span<const double> x) { return std::sin(3 * x[0]); }, Box{{{-1, 1}}}, 0.05, {}};
  const ApproxResult r = approximate(req, Activation::tanh());
  EXPECT_LE(r.certificate.achieved_sup_error, 0.05);
  EXPECT_LE(r.certificate.achieved_sup_error, r.certificate.claimed_bound);
  EXPECT_LE(r.certificate.ledger.polynomial_truncation, 0.025);
  EXPECT_EQ(r.certificate.grid_points, std::vector<std::size_t>{2000});
  EXPECT_LE(verify_on_fresh_grid(r, req.target, req.domain), 0.05 * 1.05);
}

TEST(Approximate, ProductSurfaceWithRelu) {
  ApproxRequest req{[](std::span<const double> x) { return std::sin(x[0]) * std::cos(x[1]); },
                    Box{{{-1, 1}, {-1, 1}}}, 0.1, {}};
  const ApproxResult r = approximate(req, Activation::relu());
  EXPECT_LE(r.certificate.achieved_sup_error, 0.1);
  EXPECT_LE(r.certificate.achieved_sup_error, r.certificate.claimed_bound);
  EXPECT_EQ(r.certificate.grid_points, (std::vector<std::size_t>{200, 200}));
}

TEST(Approximate, LedgerSoundAcrossTargets) {
  const std::vector<std::pair<Target, double>> cases = {
      {[](std::span<const double> x) { return 1.0 / (1.0 + 25.0 * x[0] * x[0]); }, 0.02},
      {[](std::span<const double> x) { return std::abs(x[0]); }, 0.05},
      {[](std::span<const double> x) { return std::exp(x[0]) * std::cos(2 * x[0]); }, 1e-3}};
  for (const auto& [f, tol] : cases) {
    ApproxRequest req{f, Box{{{-1, 1}}}, tol, {}};
    const ApproxResult r = approximate(req, Activation::tanh());
    EXPECT_LE(r.certificate.achieved_sup_error, r.certificate.claimed_bound) << tol;
    EXPECT_LE(r.certificate.achieved_sup_error, tol);
    for (double e : {r.certificate.ledger.quadrature, r.certificate.ledger.second_difference,
                     r.certificate.ledger.composition, r.certificate.ledger.polynomial_truncation}) {
      EXPECT_GE(e, 0.0);
    }
  }
}

TEST(Approximate, NecessityGate) {
  ApproxRequest req{[](std::span<const double> x) { return x[0] * x[0]; }, Box{{{-1, 1}}}, 0.5, {}};
  for (const auto& act : {Activation::identity(), Activation::affine(2, 1)}) {
    try {
      approximate(req, act);
      FAIL() << "affine activation accepted";
    } catch (const NonlinearityRequiredError& e) {
      EXPECT_NE(std::string(e.what()).find("affine"), std::string::npos);
    }
  }
}

TEST(Approximate, BudgetExhaustionCarriesCertificate) {
  ApproxRequest req{[](std::span<const double> x) { return std::abs(x[0]); }, Box{{{-1, 1}}}, 1e-4, {}};
  req.budget.max_degree = 8;
  try {
    approximate(req, Activation::tanh());
    FAIL() << "budget should be exhausted";
  } catch (const BudgetExhaustedError& e) {
    EXPECT_EQ(e.best().degrees, std::vector<unsigned>{8});
    EXPECT_GT(e.best().ledger.polynomial_truncation, 5e-5);
  }
}

TEST(Approximate, InvalidRequests) {
  ApproxRequest req{[](std::span<const double> x) { return x[0]; }, Box{{{1, -1}}}, 0.1, {}};
  EXPECT_THROW(approximate(req, Activation::tanh()), StructuralError);
  req.domain = Box{{{-1, 1}}};
  req.tolerance = 0.0;
  EXPECT_THROW(approximate(req, Activation::tanh()), StructuralError);
}
