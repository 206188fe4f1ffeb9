#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "icmlp/algebra.hpp"
#include "icmlp/train.hpp"
#include "icmlp/verify.hpp"
#include "support/oracles.hpp"

using namespace icmlp;

namespace {

// |g - fd| / max(|fd|, 1e-3)
double deviation(double g, double fd) { return std::abs(g - fd) / std::max(std::abs(fd), 1e-3); }

std::vector<double> finite_difference(const VectorNet& net, const std::vector<double>& x, double h = 1e-5) {
  const auto f = [&](const std::vector<double>& theta) { return unflatten(net, theta)(x); };
  const std::vector<double> theta = flatten(net);
  std::vector<double> out(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) out[k] = oracle::central_difference(f, theta, k, h);
  return out;
}

Dataset sample_1d(double lo, double hi, std::size_t count, double (*f)(double)) {
  Dataset data;
  for (std::size_t i = 0; i < count; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    data.x.push_back(x);
    data.y.push_back(f(x));
  }
  return data;
}

oracle::PlainMlp to_plain(const StandardMlp& mlp) {
  oracle::PlainMlp plain;
  for (const auto& layer : mlp.hidden) {
    plain.weights.push_back(layer.weights);
    plain.biases.push_back(layer.bias);
  }
  plain.out_weights = mlp.output_weights;
  plain.out_bias = mlp.output_bias;
  return plain;
}

}  // namespace

TEST(Backward, DepthZeroGradientIsInput) {
  const auto net = affine_net<VectorNet>(Activation::tanh(), {2.0, -1.0}, 0.5);
  const std::vector<double> x{0.3, -0.7};
  const GradientBundle g = backward(net, x);
  EXPECT_TRUE(g.layers.empty());
  EXPECT_EQ(g.c, x);
  EXPECT_EQ(g.d, 1.0);
  EXPECT_DOUBLE_EQ(g.output, net(x));
}

TEST(Backward, SeededTanhMatchesFiniteDifferences) {
  const VectorNet net = init_net(Activation::tanh(), 1, {4, 3}, 42);
  const std::vector<double> x{0.3};
  const auto grad = backward(net, x).flat();
  const auto fd = finite_difference(net, x);
  ASSERT_EQ(grad.size(), fd.size());
  for (std::size_t k = 0; k < grad.size(); ++k) EXPECT_LE(deviation(grad[k], fd[k]), 1e-5) << k;
}

TEST(Backward, ZeroedSkipsStillHaveGradients) {
  SplitMix64 rng(11);
  const VectorNet net = zero_skips(random_net(rng, Activation::sigmoid(), 2, {3, 3, 2}));
  const auto x = random_point(rng, 2);
  const auto grad = backward(net, x).flat();
  const auto fd = finite_difference(net, x);
  double nonzero_skip = 0.0;
  const auto mask = standard_mask(net);
  for (std::size_t k = 0; k < grad.size(); ++k) {
    EXPECT_LE(deviation(grad[k], fd[k]), 1e-5) << k;
    if (!mask[k]) nonzero_skip = std::max(nonzero_skip, std::abs(grad[k]));
  }
  EXPECT_GT(nonzero_skip, 0.0);
}

TEST(Backward, RandomShapesAllActivations) {
  SplitMix64 rng(12);
  for (const auto& act : {Activation::tanh(), Activation::sigmoid(), Activation::softplus()}) {
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 1 + rng.below(3);
      const VectorNet net = random_net(rng, act, n, random_widths(rng, 3, 5));
      const auto x = random_point(rng, n);
      const auto grad = backward(net, x).flat();
      const auto fd = finite_difference(net, x);
      for (std::size_t k = 0; k < grad.size(); ++k) EXPECT_LE(deviation(grad[k], fd[k]), 1e-5) << act.name();
    }
  }
}

TEST(Backward, EmbeddedStandardMlpMatchesTextbookBackprop) {
  SplitMix64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(3);
    const VectorNet net = zero_skips(random_net(rng, Activation::tanh(), n, random_widths(rng, 3, 5)));
    if (net.depth() == 0) continue;
    const oracle::PlainMlp plain = to_plain(strip_to_standard(net));
    const auto x = random_point(rng, n);
    const GradientBundle g = backward(net, x);
    const oracle::PlainGrad ref = oracle::plain_backprop(
        plain, x, [](double t) { return std::tanh(t); }, [](double t) { return 1.0 - std::tanh(t) * std::tanh(t); });
    EXPECT_NEAR(g.d, ref.out_bias, 1e-15);
    for (std::size_t j = 0; j < g.v.size(); ++j) EXPECT_NEAR(g.v[j], ref.out_weights[j], 1e-13);
    for (std::size_t l = 0; l < g.layers.size(); ++l) {
      for (std::size_t j = 0; j < g.layers[l].b.size(); ++j) {
        EXPECT_NEAR(g.layers[l].b[j], ref.biases[l][j], 1e-13);
        if (l == 0) {
          for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(g.layers[0].a[j * n + k], ref.weights[0][j][k], 1e-13);
        } else {
          for (std::size_t i = 0; i < g.layers[l].w[j].size(); ++i) {
            EXPECT_NEAR(g.layers[l].w[j][i], ref.weights[l][j][i], 1e-13);
          }
        }
      }
    }
  }
}

TEST(Backward, ReluGateFollowsSign) {
  NetParams p;
  p.layers.push_back(dense_layer({}, {{1.0}}, {0.0}));
  p.v = {1.0};
  p.c = {0.0};
  const ScalarNet relu(Activation::relu(), p);
  EXPECT_EQ(backward(relu, 2.0).layers[0].a[0], 2.0);
  EXPECT_EQ(backward(relu, -2.0).layers[0].a[0], 0.0);
}

TEST(Fit, LinearTargetWithDepthZero) {
  const Dataset data = sample_1d(-1, 1, 64, [](double x) { return 2 * x + 1; });
  const VectorNet start = init_net(Activation::tanh(), 1, {}, 42);
  TrainConfig config;
  config.learning_rate = 0.1;
  config.steps = 500;
  const auto result = fit(start, data, config);
  ASSERT_EQ(result.loss.size(), 501u);
  EXPECT_LE(result.loss.back(), 1e-6);
  EXPECT_NEAR(result.net.params().c[0], 2.0, 1e-3);
  EXPECT_NEAR(result.net.params().d, 1.0, 1e-3);
}

TEST(Fit, SineWithTanhDecreasesLossTenfold) {
  const Dataset data = sample_1d(-1, 1, 200, [](double x) { return std::sin(3 * x); });
  const VectorNet start = init_net(Activation::tanh(), 1, {8, 8}, 42);
  TrainConfig config;
  config.learning_rate = 0.05;
  config.steps = 5000;
  const auto result = fit(start, data, config);
  EXPECT_LT(result.loss.back(), result.loss.front() / 10);
}

TEST(Fit, ZeroLearningRateIsIdentity) {
  const Dataset data = sample_1d(-1, 1, 20, [](double x) { return x * x; });
  const VectorNet start = init_net(Activation::tanh(), 1, {4}, 7);
  TrainConfig config;
  config.learning_rate = 0.0;
  config.steps = 10;
  const auto result = fit(start, data, config);
  EXPECT_EQ(result.net, start);
  for (double l : result.loss) EXPECT_EQ(l, result.loss.front());
}

TEST(Fit, BitReproducible) {
  const Dataset data = sample_1d(-1, 1, 50, [](double x) { return std::abs(x); });
  const VectorNet start = init_net(Activation::tanh(), 1, {5, 5}, 3);
  TrainConfig config;
  config.steps = 200;
  config.batch = 8;
  config.optimizer = Optimizer::momentum;
  const auto a = fit(start, data, config);
  const auto b = fit(start, data, config);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(flatten(a.net), flatten(b.net));
  config.seed = 4;
  EXPECT_NE(fit(start, data, config).loss, a.loss);
}

TEST(Fit, MaskFreezesSkips) {
  const Dataset data = sample_1d(-1, 1, 40, [](double x) { return std::sin(2 * x); });
  const VectorNet start = zero_skips(init_net(Activation::tanh(), 1, {4, 4}, 5));
  TrainConfig config;
  config.steps = 100;
  const auto mask = standard_mask(start);
  const auto result = fit(start, data, config, mask);
  const auto before = flatten(start);
  const auto after = flatten(result.net);
  for (std::size_t k = 0; k < mask.size(); ++k) {
    if (!mask[k]) EXPECT_EQ(after[k], before[k]);
  }
  EXPECT_LT(result.loss.back(), result.loss.front());
}

TEST(Fit, DivergenceIsReported) {
  Dataset data = sample_1d(-1, 1, 16, [](double x) { return 1e3 * x; });
  const VectorNet start = init_net(Activation::softplus(), 1, {4}, 1);
  TrainConfig config;
  config.learning_rate = 1e6;
  config.steps = 100;
  EXPECT_THROW(fit(start, data, config), DivergenceError);
}

TEST(Fit, ContractErrors) {
  const Dataset data = sample_1d(-1, 1, 8, [](double x) { return x; });
  const VectorNet start = init_net(Activation::tanh(), 1, {2}, 1);
  TrainConfig config;
  config.batch = 0;
  EXPECT_THROW(fit(start, data, config), StructuralError);
  config.batch = 4;
  EXPECT_THROW(fit(start, data, config, std::vector<bool>(3, true)), StructuralError);
  const VectorNet wide = init_net(Activation::tanh(), 2, {2}, 1);
  EXPECT_THROW(fit(wide, data, config), StructuralError);
}

TEST(Init, SameSeedSameNet) {
  const VectorNet a = init_net(Activation::tanh(), 2, {3, 4}, 99);
  const VectorNet b = init_net(Activation::tanh(), 2, {3, 4}, 99);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.params().d, 0.0);
  const double s = 1.0 / std::sqrt(3.0);
  for (double a2 : a.params().layers[1].a) EXPECT_LE(std::abs(a2), 0.1 * s);
}
