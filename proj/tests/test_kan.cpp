#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "prokan/error.hpp"
#include "prokan/kan.hpp"

using namespace prokan;

namespace {

void randomize(KanLayer& layer, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& c : layer.coefficients()) c = u(rng);
}

std::vector<double> random_input(int n, std::mt19937_64& rng, double lim = 0.95) {
  std::uniform_real_distribution<double> u(-lim, lim);
  std::vector<double> x(n);
  for (double& v : x) v = u(rng);
  return x;
}

ProKanNetwork random_net(int input_dim, int hidden, int blocks, std::uint64_t seed, int grid = 5,
                         int degree = 3) {
  std::mt19937_64 rng(seed);
  NetworkShape shape;
  shape.input_dim = input_dim;
  shape.hidden_width = hidden;
  shape.init_scale = 0.5;
  const HyperParams hp{0, grid, degree, 1e-2, 1e-4};
  ProKanNetwork net = make_network(shape, hp, rng);
  while (static_cast<int>(net.block_count()) < blocks) {
    net = insert_block(net, hp, blocks);
    auto layers = net.layers();
    randomize(*layers[layers.size() - 2], rng, 0.3);
    randomize(*layers[layers.size() - 3], rng, 0.3);
  }
  return net;
}

}  // namespace

TEST(KanLayer, ZeroCoefficientsGiveZeroOutput) {
  const KanLayer layer(3, 2, 5, 3);
  const auto y = layer_forward(layer, std::vector<double>{0.1, -0.4, 0.9});
  EXPECT_EQ(y, (std::vector<double>{0, 0}));
}

TEST(KanLayer, ConstantEdgesAdd) {
  KanLayer layer(2, 1, 5, 3);
  for (double& c : layer.edge_coefficients(0, 0)) c = 1.5;
  for (double& c : layer.edge_coefficients(1, 0)) c = 2.5;
  const auto y = layer_forward(layer, std::vector<double>{0.3, -0.7});
  ASSERT_EQ(y.size(), 1u);
  EXPECT_NEAR(y[0], 4.0, 1e-12);
  const auto g = layer_backward(layer, std::vector<double>{0.3, -0.7}, std::vector<double>{1.0});
  EXPECT_NEAR(g.input_grad[0], 0.0, 1e-12);
  EXPECT_NEAR(g.input_grad[1], 0.0, 1e-12);
}

TEST(KanLayer, GrevilleCoefficientsReproduceIdentity) {
  for (int k = 1; k <= 3; ++k) {
    KanLayer layer(1, 1, 6, k);
    const auto& t = layer.knots();
    auto c = layer.edge_coefficients(0, 0);
    for (int i = 0; i < layer.num_basis(); ++i) {
      double xi = 0;
      for (int j = 1; j <= k; ++j) xi += t[i + j];
      c[i] = xi / k;
    }
    for (double x = -0.97; x < 0.98; x += 0.061) {
      EXPECT_NEAR(layer_forward(layer, std::vector<double>{x})[0], x, 1e-9) << "k=" << k;
    }
  }
}

TEST(KanLayer, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  KanLayer layer(3, 2, 5, 3);
  randomize(layer, rng, 1.0);
  const auto x = random_input(3, rng);
  const std::vector<double> w{0.7, -1.3};  // scalar objective sum_q w_q y_q
  auto objective = [&](const KanLayer& l, const std::vector<double>& in) {
    const auto y = layer_forward(l, in);
    return w[0] * y[0] + w[1] * y[1];
  };
  const auto g = layer_backward(layer, x, w);
  const double h = 1e-5;
  auto rel = [](double a, double b) {
    const double d = std::abs(a - b);
    return d <= 1e-8 ? 0.0 : d / std::max(std::abs(a), std::abs(b));
  };
  for (int p = 0; p < 3; ++p) {
    auto up = x, dn = x;
    up[p] += h;
    dn[p] -= h;
    EXPECT_LT(rel(g.input_grad[p], (objective(layer, up) - objective(layer, dn)) / (2 * h)), 1e-4);
  }
  for (std::size_t i = 0; i < layer.parameter_count(); ++i) {
    KanLayer up = layer, dn = layer;
    up.coefficients()[i] += h;
    dn.coefficients()[i] -= h;
    EXPECT_LT(rel(g.coeff_grads[i], (objective(up, x) - objective(dn, x)) / (2 * h)), 1e-4);
  }
}

TEST(KanLayer, ZeroUpstreamGivesZeroGradients) {
  std::mt19937_64 rng(2);
  KanLayer layer(3, 2, 4, 2);
  randomize(layer, rng, 1.0);
  const auto g = layer_backward(layer, random_input(3, rng), std::vector<double>{0, 0});
  for (double v : g.input_grad) EXPECT_EQ(v, 0.0);
  for (double v : g.coeff_grads) EXPECT_EQ(v, 0.0);
}

TEST(KanLayer, DimensionChecks) {
  const KanLayer layer(3, 2, 4, 2);
  EXPECT_THROW(layer_forward(layer, std::vector<double>{0.1}), Error);
  EXPECT_THROW(layer_backward(layer, std::vector<double>{0, 0, 0}, std::vector<double>{1}), Error);
}

TEST(Network, ForwardIsComposition) {
  const auto net = random_net(4, 3, 3, 9);
  std::mt19937_64 rng(1);
  for (int n = 0; n < 20; ++n) {
    const auto x = random_input(4, rng);
    std::vector<double> h(x);
    for (const auto& block : net.blocks()) {
      std::vector<double> z = h;
      for (const auto& layer : block.layers) z = layer_forward(layer, z);
      if (block.residual) {
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += h[i];
      }
      h = z;
    }
    const double manual = layer_forward(net.head(), h)[0];
    EXPECT_EQ(network_logit(net, x), manual);
    EXPECT_EQ(network_forward(net, x).logit, manual);
  }
}

TEST(Network, ForwardIsDeterministic) {
  const auto net = random_net(5, 4, 2, 4);
  std::mt19937_64 rng(6);
  const auto x = random_input(5, rng);
  EXPECT_EQ(network_logit(net, x), network_logit(net, x));
}

TEST(Network, BackwardMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto net = random_net(4, 3, 2, seed, 4, 2);
    std::mt19937_64 rng(seed + 100);
    const auto x = random_input(4, rng);
    const auto fwd = network_forward(net, x);
    const auto g = network_backward(net, fwd.cache, 1.0);
    ProKanNetwork probe = net;
    auto layers = probe.layers();
    double worst = 0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      for (std::size_t i = 0; i < layers[l]->parameter_count(); ++i) {
        double& c = layers[l]->coefficients()[i];
        const double saved = c;
        c = saved + 1e-5;
        const double up = network_logit(probe, x);
        c = saved - 1e-5;
        const double dn = network_logit(probe, x);
        c = saved;
        const double fd = (up - dn) / 2e-5;
        const double d = std::abs(fd - g.layers[l][i]);
        if (d > 1e-8) worst = std::max(worst, d / std::max(std::abs(fd), std::abs(g.layers[l][i])));
      }
    }
    EXPECT_LT(worst, 1e-4) << "seed " << seed;
    for (int p = 0; p < 4; ++p) {
      auto up = x, dn = x;
      up[p] += 1e-5;
      dn[p] -= 1e-5;
      EXPECT_NEAR(g.input_grad[p], (network_logit(net, up) - network_logit(net, dn)) / 2e-5, 1e-6);
    }
  }
}

TEST(Network, ZeroLossGradientGivesZeroGradients) {
  const auto net = random_net(4, 3, 2, 3);
  std::mt19937_64 rng(3);
  const auto fwd = network_forward(net, random_input(4, rng));
  const auto g = network_backward(net, fwd.cache, 0.0);
  EXPECT_EQ(g.max_abs(), 0.0);
}

TEST(Network, ZeroResidualBodyPassesGradientThrough) {
  // Gradient into a zero-body residual block equals the gradient leaving it.
  const auto base = random_net(4, 3, 1, 12);
  const auto grown = insert_block(base, HyperParams{1, 8, 3, 1e-2, 2e-4}, 4);
  std::mt19937_64 rng(5);
  const auto x = random_input(4, rng);
  const auto gb = network_backward(base, network_forward(base, x).cache, 0.8);
  const auto gg = network_backward(grown, network_forward(grown, x).cache, 0.8);
  EXPECT_EQ(gb.input_grad, gg.input_grad);
  EXPECT_EQ(gb.layers.front(), gg.layers.front());
  EXPECT_EQ(gb.layers.back(), gg.layers.back());
}

TEST(Network, StaleCacheRejected) {
  const auto small = random_net(4, 3, 1, 2);
  const auto big = random_net(4, 3, 2, 2);
  std::mt19937_64 rng(1);
  const auto fwd = network_forward(small, random_input(4, rng));
  EXPECT_THROW(network_backward(big, fwd.cache, 1.0), Error);
}

TEST(InsertBlock, PreservesFunction) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto net = random_net(6, 5, 1, seed);
    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> inputs;
    for (int n = 0; n < 50; ++n) inputs.push_back(random_input(6, rng, 1.3));
    HyperParams hp{0, 5, 3, 1e-2, 1e-4};
    for (int b = 1; b < 4; ++b) {
      hp.block_index = b;
      hp.grid_size += 3;
      const auto grown = insert_block(net, hp, 4);
      for (const auto& x : inputs) EXPECT_NEAR(network_logit(grown, x), network_logit(net, x), 1e-9);
      net = grown;
    }
  }
}

TEST(InsertBlock, ParameterCountGrowth) {
  std::mt19937_64 rng(0);
  NetworkShape shape;
  shape.hidden_width = 8;
  const HyperParams hp{0, 5, 3, 1e-2, 1e-4};
  const auto net = make_network(shape, hp, rng);
  EXPECT_EQ(count_parameters(net), static_cast<std::size_t>(27 * 8 * 8 + 8 * 8 * 8 + 8 * 1 * 8));
  const auto grown = insert_block(net, hp, 4);
  EXPECT_EQ(count_parameters(grown) - count_parameters(net), 2u * 512u);
  EXPECT_EQ(grown.blocks().back().parameter_count(), 1024u);
}

TEST(InsertBlock, MaxBlocksExceeded) {
  auto net = random_net(3, 2, 4, 1);
  try {
    insert_block(net, HyperParams{}, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMaxBlocksExceeded);
  }
}

TEST(CountParameters, SingleEdgeAndScaling) {
  EXPECT_EQ(KanLayer(1, 1, 5, 3).parameter_count(), 8u);
  EXPECT_EQ(KanLayer(3, 4, 5, 3).parameter_count(), 2 * KanLayer(3, 2, 5, 3).parameter_count());
}
