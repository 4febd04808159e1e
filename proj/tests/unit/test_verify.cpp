#include <gtest/gtest.h>

#include <cmath>

#include "sfnn/error.hpp"
#include "sfnn/verify.hpp"

using namespace sfnn;

namespace {

NetworkSpec stochastic_net(std::size_t width, bool centered = false) {
  NetworkSpec s;
  s.input_dim = 3;
  const StochasticBinary lower = centered ? StochasticBinary{ClippedScaled{0.5, ActivationKind::Tanh, true}}
                                          : StochasticBinary{DirectSigmoid{}};
  s.layers = {{lower, width},
              {Squash{2.0, centered ? SquashKind::Tanh : SquashKind::Sigmoid, ActivationKind::Tanh, centered}, 4}};
  s.output = GaussianHead{1, 0.1};
  return s;
}

Params seeded(const NetworkSpec& spec, std::uint64_t seed) {
  Params p = init_params(spec, RngStream(seed));
  RngStream r(seed, 3);
  for (auto& l : p.layers) {
    for (double& b : l.bias) b = r.uniform(-1, 1);
  }
  return p;
}

}  // namespace

TEST(Oracle, SingleUnitClosedForm) {
  const std::vector<double> p = {0.3}, w = {1.5};
  const double expect = 0.3 * sigmoid(1.5 - 0.2) + 0.7 * sigmoid(-0.2);
  EXPECT_NEAR(enum_expectation_oracle(p, w, -0.2, SquashKind::Sigmoid), expect, 1e-15);
}

TEST(Oracle, AllOnesCollapsesToDeterministicUnit) {
  const std::vector<double> p(7, 1.0), w = {0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.05};
  double sum = 0.0;
  for (double v : w) sum += v;
  EXPECT_NEAR(enum_expectation_oracle(p, w, 0.25, SquashKind::Tanh), std::tanh(sum + 0.25), 1e-15);
  const std::vector<double> q(7, 0.0);
  EXPECT_NEAR(enum_expectation_oracle(q, w, 0.25, SquashKind::Tanh), std::tanh(0.25), 1e-15);
}

TEST(Oracle, RejectsOversizedInput) {
  const std::vector<double> p(21, 0.5), w(21, 0.1);
  EXPECT_THROW(enum_expectation_oracle(p, w, 0.0, SquashKind::Sigmoid), ValidationError);
  const std::vector<double> w2(3, 0.1);
  EXPECT_THROW(enum_expectation_oracle(std::vector<double>(2, 0.5), w2, 0.0, SquashKind::Sigmoid), ValidationError);
}

TEST(Oracle, TwelveUnitsAgreeWithEngineAndMonteCarlo) {
  const auto spec = stochastic_net(12);
  const Params params = seeded(spec, 1);
  const Matrix x = sample_inputs(RngStream(2), 1, 3);
  const ForwardTrace exact = forward_traced(spec, params, x, mode::ExactEnum{});
  const auto p = exact.layers[0].post.row(0);
  const double s0 = squash_constants(SquashKind::Sigmoid).s0;
  const ForwardTrace mc = forward_traced(spec, params, x, mode::SimplifiedMC{100000, RngStream(3)});
  for (std::size_t j = 0; j < 4; ++j) {
    const double oracle =
        enum_expectation_oracle(p, params.layers[1].weights.row(j), params.layers[1].bias[j], SquashKind::Sigmoid);
    EXPECT_NEAR(exact.layers[1].expect(0, j), oracle - s0, 1e-12);
    // Sigmoid values lie in (0,1), so the standard error is at most 0.5/sqrt(M).
    EXPECT_NEAR(mc.layers[1].expect(0, j), oracle - s0, 5 * 0.5 / std::sqrt(100000.0));
  }
}

TEST(TheoremCheck, BoundHoldsOnSmallNets) {
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 10; ++s) seeds.push_back(s);
  const CheckReport rep = check_theorem1_bound(seeds, {1.0, 50.0}, 32);
  EXPECT_TRUE(rep.pass);
  EXPECT_LE(rep.measured, 1.0);
  EXPECT_EQ(rep.values[1].second, 20.0);
}

TEST(TheoremCheck, BiasOnlyUpperLayerStaysBounded) {
  // With W2 = 0 only the bias term of the bound is active.
  auto [spec, params] = sample_small_dnn(RngStream(4), ActivationKind::Sigmoid);
  params.layers[1].weights = Matrix(params.layers[1].weights.rows(), params.layers[1].weights.cols());
  const Matrix data = sample_inputs(RngStream(5), 16, spec.input_dim);
  TransferConfig cfg;
  cfg.kind = TransferKind::Theorem1;
  cfg.gamma_upper = {1.0};
  const TransferResult tr = transform_theorem1(spec, params, data, cfg);
  const double gap = activation_gap(spec, params, tr.spec, tr.params, data, 1).max_abs;
  EXPECT_LE(gap, tr.report.layers[0].bound);
  cfg.gamma_upper = {50.0};
  const TransferResult tight = transform_theorem1(spec, params, data, cfg);
  EXPECT_LT(activation_gap(spec, params, tight.spec, tight.params, data, 1).max_abs, gap);
}

TEST(GammaSweep, LossFallsWithGamma) {
  const auto [spec, params] = sample_small_dnn(RngStream(6), ActivationKind::ReLU);
  const Matrix data = sample_inputs(RngStream(7), 64, spec.input_dim);
  const CheckReport rep = gamma_sweep(spec, params, data, {2.0, 10.0, 50.0, 250.0});
  EXPECT_TRUE(rep.pass) << rep.measured;
  EXPECT_GE(rep.measured, 10.0);
  EXPECT_THROW(gamma_sweep(spec, params, data, {10.0, 2.0}), ValidationError);
}

TEST(McBias, DegenerateMarginalsGiveZeroScore) {
  const auto spec = stochastic_net(6);
  Params params = seeded(spec, 8);
  params.layers[0].weights = Matrix(params.layers[0].weights.rows(), params.layers[0].weights.cols());
  params.layers[0].bias.assign(6, 800.0);  // sigmoid saturates to exactly 1
  const Matrix x = sample_inputs(RngStream(9), 1, 3);
  const CheckReport rep = mc_bias_test(spec, params, x, 10, 20, RngStream(10));
  EXPECT_TRUE(rep.pass);
  EXPECT_EQ(rep.measured, 0.0);
}

TEST(McBias, PassesOnRandomNetworks) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto spec = stochastic_net(8, seed % 2 == 1);
    const Params params = seeded(spec, 20 + seed);
    const Matrix x = sample_inputs(RngStream(30 + seed), 1, 3);
    const CheckReport rep = mc_bias_test(spec, params, x, 50, 200, RngStream(40 + seed));
    EXPECT_TRUE(rep.pass) << "seed " << seed << " z " << rep.measured;
  }
}

TEST(McBias, VarianceShrinksWithSamples) {
  const auto spec = stochastic_net(8);
  const Params params = seeded(spec, 50);
  const Matrix x = sample_inputs(RngStream(51), 1, 3);
  auto variance = [&](std::size_t m) {
    double sum = 0.0, sq = 0.0;
    const std::size_t runs = 400;
    for (std::size_t r = 0; r < runs; ++r) {
      const double u = forward_traced(spec, params, x, mode::SimplifiedMC{m, RngStream(m, r)}).layers[1].expect(0, 0);
      sum += u;
      sq += u * u;
    }
    return (sq - sum * sum / runs) / (runs - 1);
  };
  const double ratio = variance(10) / variance(40);
  EXPECT_GT(ratio, 2.5);
  EXPECT_LT(ratio, 6.4);
}

TEST(GradCheck, ZeroGradientPasses) {
  NetworkSpec spec;
  spec.input_dim = 2;
  spec.output = GaussianHead{1, 0.5};
  Params p = zero_params(spec);
  p.layers[0].bias = {0.75};
  const Matrix x{{0.3, -0.1}, {-0.6, 0.2}};
  const Matrix y{{0.75}, {0.75}};
  const CheckReport rep = grad_check(spec, p, x, y, mode::Dnn{}, 1e-5);
  EXPECT_TRUE(rep.pass);
  EXPECT_EQ(rep.measured, 0.0);
}

TEST(GradCheck, DetectsAWrongGradient) {
  // Monte Carlo with a fresh seed per evaluation is not differentiable in the
  // finite-difference sense; the check must notice.
  const auto spec = stochastic_net(6);
  const Params p = seeded(spec, 60);
  const Matrix x = sample_inputs(RngStream(61), 4, 3);
  const Matrix y = sample_inputs(RngStream(62), 4, 1);
  const CheckReport exact = grad_check(spec, p, x, y, mode::ExactEnum{}, 1e-4, 30);
  EXPECT_TRUE(exact.pass) << exact.measured;
  const CheckReport mc = grad_check(spec, p, x, y, mode::SimplifiedMC{3, RngStream(1)}, 1e-4, 30);
  EXPECT_FALSE(mc.pass);
}

TEST(Report, JsonlShape) {
  CheckReport r{"gradcheck", true, 2e-7, 1e-5, {7}, {{"coordinates", 100.0}}};
  EXPECT_EQ(to_jsonl(r),
            R"({"bound":1e-05,"check":"gradcheck","measured":2e-07,"pass":true,"seeds":[7],"values":{"coordinates":100.0}})");
}
