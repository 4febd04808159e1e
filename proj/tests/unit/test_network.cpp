#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sfnn/error.hpp"
#include "sfnn/network.hpp"
#include "sfnn/verify.hpp"

using namespace sfnn;

namespace {

LayerSpec det(std::size_t w, ActivationKind a = ActivationKind::ReLU) { return {Deterministic{a}, w}; }
LayerSpec stoch_sigmoid(std::size_t w) { return {StochasticBinary{DirectSigmoid{}}, w}; }
LayerSpec stoch_clipped(std::size_t w, double alpha, ActivationKind a = ActivationKind::ReLU, bool centered = false) {
  return {StochasticBinary{ClippedScaled{alpha, a, centered}}, w};
}
LayerSpec squash_layer(std::size_t w, double alpha = 1.0, SquashKind s = SquashKind::Sigmoid,
                       ActivationKind a = ActivationKind::ReLU, bool centered = false) {
  return {Squash{alpha, s, a, centered}, w};
}

NetworkSpec make_spec(std::size_t input, std::vector<LayerSpec> layers, OutputHead head = GaussianHead{}) {
  NetworkSpec s;
  s.input_dim = input;
  s.layers = std::move(layers);
  s.output = head;
  return s;
}

Params random_params(const NetworkSpec& spec, std::uint64_t seed, double bias = 0.5) {
  Params p = init_params(spec, RngStream(seed));
  RngStream r(seed, 1);
  for (auto& l : p.layers) {
    for (double& b : l.bias) b = r.uniform(-bias, bias);
  }
  return p;
}

Matrix random_inputs(std::size_t n, std::size_t d, std::uint64_t seed) {
  return sample_inputs(RngStream(seed), n, d);
}

// 1 input -> 1 stochastic unit -> 1 squash unit; stochastic pre-activation is b0.
struct Tiny {
  NetworkSpec spec;
  Params params;
};

Tiny tiny(LayerSpec stochastic, double b0, double w1, double b1) {
  Tiny t{make_spec(1, {stochastic, squash_layer(1)}), {}};
  t.params = zero_params(t.spec);
  t.params.layers[0].bias = {b0};
  t.params.layers[1].weights = Matrix{{w1}};
  t.params.layers[1].bias = {b1};
  return t;
}

}  // namespace

TEST(Validate, Examples) {
  EXPECT_TRUE(validate_spec(make_spec(3, {det(4), det(4), det(4)})).empty());
  const auto v = validate_spec(make_spec(3, {stoch_sigmoid(4), stoch_sigmoid(4), det(4)}));
  ASSERT_FALSE(v.empty());
  bool found = false;
  for (const auto& x : v) found = found || x.message == "adjacent stochastic at 0,1";
  EXPECT_TRUE(found);
  EXPECT_TRUE(validate_spec(make_spec(3, {stoch_sigmoid(4), squash_layer(4), det(4)})).empty());
}

TEST(Validate, StructuralRules) {
  EXPECT_FALSE(validate_spec(make_spec(3, {det(4), stoch_sigmoid(4)})).empty());
  EXPECT_FALSE(validate_spec(make_spec(3, {det(4), squash_layer(4)})).empty());
  EXPECT_FALSE(validate_spec(make_spec(3, {stoch_clipped(4, 0.5, ActivationKind::Tanh, true), squash_layer(4)})).empty());
  EXPECT_FALSE(validate_spec(make_spec(3, {stoch_clipped(4, 0.5), squash_layer(4, 1.0, SquashKind::Sigmoid,
                                                                               ActivationKind::ReLU, true)}))
                   .empty());
  EXPECT_TRUE(validate_spec(make_spec(3, {stoch_clipped(4, 0.5, ActivationKind::Tanh, true),
                                          squash_layer(4, 1.0, SquashKind::Sigmoid, ActivationKind::Tanh, true)}))
                  .empty());
  EXPECT_FALSE(validate_spec(make_spec(3, {stoch_clipped(4, -1.0), squash_layer(4)})).empty());
  EXPECT_FALSE(validate_spec(make_spec(3, {det(0)})).empty());
  EXPECT_FALSE(validate_spec(make_spec(3, {det(2)}, GaussianHead{1, 0.0})).empty());
  // A stochastic layer under a plain deterministic layer (simple transforms).
  EXPECT_TRUE(validate_spec(make_spec(3, {stoch_sigmoid(4), det(4)})).empty());
  EXPECT_THROW(require_valid(make_spec(3, {stoch_sigmoid(4)})), ValidationError);
}

TEST(Params, ShapesAndFiniteness) {
  const auto spec = make_spec(3, {det(4), det(2)}, SoftmaxHead{5});
  Params p = zero_params(spec);
  ASSERT_EQ(p.layers.size(), 3u);
  EXPECT_EQ(p.layers[2].weights.rows(), 5u);
  EXPECT_EQ(p.layers[2].weights.cols(), 2u);
  EXPECT_NO_THROW(validate_params(spec, p));
  p.layers[1].bias[0] = std::nan("");
  EXPECT_THROW(validate_params(spec, p), NumericalError);
  p.layers.pop_back();
  EXPECT_THROW(validate_params(spec, p), ValidationError);
  const Params g = init_params(spec, RngStream(1));
  const double limit = std::sqrt(6.0 / 7.0);
  for (double w : g.layers[0].weights.values()) EXPECT_LE(std::abs(w), limit);
}

TEST(Marginals, Examples) {
  EXPECT_EQ(stochastic_marginals(StochasticBinary{DirectSigmoid{}}, Matrix{{0.0}})(0, 0), 0.5);
  const StochasticBinary half{ClippedScaled{0.5, ActivationKind::ReLU, false}};
  EXPECT_EQ(stochastic_marginals(half, Matrix{{3.0}})(0, 0), 1.0);
  EXPECT_EQ(stochastic_marginals(half, Matrix{{1.0}})(0, 0), 0.5);
  const StochasticBinary centered{ClippedScaled{0.5, ActivationKind::Tanh, true}};
  EXPECT_EQ(stochastic_marginals(centered, Matrix{{0.0}})(0, 0), 0.5);
  const StochasticBinary big{ClippedScaled{3.0, ActivationKind::Tanh, true}};
  EXPECT_EQ(stochastic_marginals(big, Matrix{{-5.0}})(0, 0), 0.0);
  EXPECT_THROW(stochastic_marginals(half, Matrix{{std::nan("")}}), NumericalError);
}

TEST(ExactEnum, ZeroWeightCase) {
  const Tiny t = tiny(stoch_clipped(1, 1.0), 5.0, 0.0, 0.0);
  const Matrix x{{0.0}};
  EXPECT_EQ(forward_simplified_exact(t.spec, t.params, x).hidden[1](0, 0), 0.0);
}

TEST(ExactEnum, TwoTermClosedForm) {
  const double w = std::log(0.7 / 0.3);  // sigmoid(w) = 0.7
  const Tiny t = tiny(stoch_sigmoid(1), 0.0, w, 0.0);
  const Matrix h = forward_simplified_exact(t.spec, t.params, Matrix{{0.0}}).hidden[1];
  EXPECT_NEAR(h(0, 0), 0.1, 1e-15);
}

TEST(ExactEnum, MatchesOracleOnTwelveUnits) {
  const auto spec = make_spec(5, {stoch_sigmoid(12), squash_layer(6, 2.0), det(3)});
  const Params p = random_params(spec, 21, 1.0);
  const Matrix x = random_inputs(4, 5, 22);
  const ForwardTrace tr = forward_traced(spec, p, x, mode::ExactEnum{});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t j = 0; j < 6; ++j) {
      const double oracle =
          enum_expectation_oracle(tr.layers[0].post.row(r), p.layers[1].weights.row(j), p.layers[1].bias[j],
                                  SquashKind::Sigmoid) -
          0.5;
      EXPECT_NEAR(tr.layers[1].expect(r, j), oracle, 1e-12);
      EXPECT_EQ(tr.layers[1].post(r, j), std::max(0.0, 2.0 * tr.layers[1].expect(r, j)));
    }
  }
}

TEST(ExactEnum, SingleUnitClosedForm) {
  RngStream rng(5);
  for (int i = 0; i < 100; ++i) {
    const double b0 = rng.uniform(-3, 3), w = rng.uniform(-3, 3), b = rng.uniform(-3, 3);
    const Tiny t = tiny(stoch_sigmoid(1), b0, w, b);
    const ForwardTrace tr = forward_traced(t.spec, t.params, Matrix{{0.0}}, mode::ExactEnum{});
    const double p = sigmoid(b0);
    const double closed = p * sigmoid(w + b) + (1 - p) * sigmoid(b);
    EXPECT_NEAR(tr.layers[1].expect(0, 0) + 0.5, closed, 1e-12);
  }
}

TEST(ExactEnum, RejectsWideLayers) {
  const auto spec = make_spec(2, {stoch_sigmoid(21), squash_layer(2)});
  EXPECT_THROW(forward_simplified_exact(spec, zero_params(spec), Matrix(1, 2)), ValidationError);
  EXPECT_THROW(forward_dnn(spec, zero_params(spec), Matrix(1, 2)), ValidationError);
}

TEST(MonteCarlo, DegenerateMarginalsEqualExactBitwise) {
  const auto spec = make_spec(3, {stoch_clipped(6, 1.0), squash_layer(5, 3.0), det(4)});
  Params p = random_params(spec, 31);
  // Saturate every marginal at 0 or 1.
  for (std::size_t i = 0; i < 6; ++i) p.layers[0].bias[i] = i % 2 == 0 ? 50.0 : -50.0;
  const Matrix x = random_inputs(7, 3, 32);
  const Activations exact = forward_simplified_exact(spec, p, x);
  for (std::size_t m : {1u, 3u, 20u}) {
    const Activations mc = forward_simplified_mc(spec, p, x, m, RngStream(m));
    EXPECT_EQ(mc.output, exact.output);
    EXPECT_EQ(mc.hidden[1], exact.hidden[1]);
    const SampledOutputs sf = forward_sfnn(spec, p, x, m, RngStream(m));
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t c = 0; c < sf.output.cols(); ++c) EXPECT_EQ(sf.output(r * m + k, c), exact.output(r, c));
      }
    }
  }
}

TEST(MonteCarlo, DeterministicUnderSeed) {
  const auto spec = make_spec(3, {stoch_sigmoid(8), squash_layer(5), det(4)});
  const Params p = random_params(spec, 41);
  const Matrix x = random_inputs(9, 3, 42);
  EXPECT_EQ(forward_simplified_mc(spec, p, x, 20, RngStream(3)).output,
            forward_simplified_mc(spec, p, x, 20, RngStream(3)).output);
  EXPECT_NE(forward_simplified_mc(spec, p, x, 20, RngStream(3)).output,
            forward_simplified_mc(spec, p, x, 20, RngStream(4)).output);
  EXPECT_EQ(forward_sfnn(spec, p, x, 7, RngStream(3)).output, forward_sfnn(spec, p, x, 7, RngStream(3)).output);
  EXPECT_THROW(forward_simplified_mc(spec, p, x, 0, RngStream(3)), ValidationError);
}

TEST(MonteCarlo, ErrorShrinksWithSamples) {
  const auto spec = make_spec(4, {stoch_sigmoid(12), squash_layer(6, 1.0, SquashKind::Sigmoid, ActivationKind::Sigmoid)});
  const Params p = random_params(spec, 51, 1.0);
  const Matrix x = random_inputs(8, 4, 52);
  const Matrix exact = forward_traced(spec, p, x, mode::ExactEnum{}).layers[1].expect;
  std::vector<double> err;
  for (std::size_t m : {100u, 1000u, 10000u}) {
    const Matrix mc = forward_traced(spec, p, x, mode::SimplifiedMC{m, RngStream(m)}).layers[1].expect;
    double e = 0.0;
    for (std::size_t i = 0; i < mc.size(); ++i) e += std::abs(mc.values()[i] - exact.values()[i]);
    err.push_back(e / static_cast<double>(mc.size()));
  }
  // Expected factor sqrt(10) per step.
  EXPECT_LT(err[1], err[0]);
  EXPECT_LT(err[2], err[1]);
  EXPECT_GT(err[0] / err[2], 4.0);
  EXPECT_LT(err[0] / err[2], 25.0);
}

TEST(MonteCarlo, SpreadMatchesEnumeratedVariance) {
  const auto spec = make_spec(3, {stoch_sigmoid(6), squash_layer(3, 1.0, SquashKind::Tanh, ActivationKind::Tanh)});
  const Params p = random_params(spec, 61, 1.0);
  const Matrix x = random_inputs(1, 3, 62);
  const Matrix marg = forward_dnn_star(spec, p, x).hidden[0];
  const std::size_t m = 50;
  for (std::size_t j = 0; j < 3; ++j) {
    // Enumerated variance of s(beta_j).
    double mean = 0.0, sq = 0.0;
    for (std::uint32_t mask = 0; mask < 64; ++mask) {
      double prob = 1.0, beta = p.layers[1].bias[j];
      for (std::size_t i = 0; i < 6; ++i) {
        const bool on = (mask >> i) & 1U;
        prob *= on ? marg(0, i) : 1 - marg(0, i);
        if (on) beta += p.layers[1].weights(j, i);
      }
      mean += prob * std::tanh(beta);
      sq += prob * std::tanh(beta) * std::tanh(beta);
    }
    const double expected_sd = std::sqrt((sq - mean * mean) / static_cast<double>(m));
    double a = 0.0, b = 0.0;
    const int runs = 100;
    for (int r = 0; r < runs; ++r) {
      const double u = forward_traced(spec, p, x, mode::SimplifiedMC{m, RngStream(1000 + r)}).layers[1].expect(0, j);
      a += u;
      b += u * u;
    }
    const double sd = std::sqrt((b - a * a / runs) / (runs - 1));
    EXPECT_GT(sd, expected_sd / 2);
    EXPECT_LT(sd, expected_sd * 2);
  }
}

TEST(DnnStar, Examples) {
  // All marginals 1: squash input is s(sum_i W_ji + b_j).
  const auto spec = make_spec(2, {stoch_clipped(3, 1.0), squash_layer(2, 1.0, SquashKind::Sigmoid, ActivationKind::Tanh)});
  Params p = random_params(spec, 71);
  p.layers[0].weights = Matrix(3, 2);
  p.layers[0].bias = {5, 5, 5};
  const Matrix x{{0.3, -0.2}};
  const Matrix h = forward_dnn_star(spec, p, x).hidden[1];
  for (std::size_t j = 0; j < 2; ++j) {
    const auto w = p.layers[1].weights.row(j);
    const double beta = ((0.0 + w[0]) + w[1]) + w[2] + p.layers[1].bias[j];
    EXPECT_DOUBLE_EQ(h(0, j), std::tanh(sigmoid(beta) - 0.5));
  }
  // Zero weights at the squash layer.
  p.layers[1].weights = Matrix(2, 3);
  const Matrix z = forward_dnn_star(spec, p, x).hidden[1];
  for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(z(0, j), std::tanh(sigmoid(p.layers[1].bias[j]) - 0.5));
}

TEST(Modes, NoStochasticLayersAgreeEverywhere) {
  const auto spec = make_spec(4, {det(6, ActivationKind::Tanh), det(5, ActivationKind::Sigmoid)}, SoftmaxHead{3});
  const Params p = random_params(spec, 81);
  const Matrix x = random_inputs(10, 4, 82);
  const Matrix dnn = forward_dnn(spec, p, x).output;
  EXPECT_EQ(forward_dnn_star(spec, p, x).output, dnn);
  EXPECT_EQ(forward_simplified_exact(spec, p, x).output, dnn);
  EXPECT_EQ(forward_simplified_mc(spec, p, x, 5, RngStream(1)).output, dnn);
  const SampledOutputs sf = forward_sfnn(spec, p, x, 4, RngStream(1));
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t k = 0; k < 4; ++k) {
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(sf.output(r * 4 + k, c), dnn(r, c));
    }
  }
}

TEST(Modes, MarginalsValidAndFinite) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto spec = make_spec(3, {stoch_clipped(5, 0.7, ActivationKind::Tanh, true),
                                    squash_layer(4, 30.0, SquashKind::Tanh, ActivationKind::Tanh, true),
                                    stoch_sigmoid(4), squash_layer(3, 5.0), det(2)});
    const Params p = random_params(spec, seed, 2.0);
    const Matrix x = random_inputs(6, 3, seed + 100);
    for (const ForwardMode& m : std::vector<ForwardMode>{mode::DnnStar{}, mode::ExactEnum{},
                                                         mode::SimplifiedMC{10, RngStream(seed)}}) {
      const ForwardTrace tr = forward_traced(spec, p, x, m);
      for (std::size_t l : {0u, 2u}) {
        for (double v : tr.layers[l].post.values()) {
          EXPECT_GE(v, 0.0);
          EXPECT_LE(v, 1.0);
        }
      }
      for (const auto& lt : tr.layers) {
        EXPECT_TRUE(lt.post.all_finite());
        for (double v : lt.samples.values()) EXPECT_TRUE(v == 0.0 || v == 1.0);
      }
      EXPECT_TRUE(tr.output.all_finite());
    }
    EXPECT_TRUE(forward_sfnn(spec, p, x, 10, RngStream(seed)).output.all_finite());
  }
}

TEST(Nll, GaussianAtTheMean) {
  const auto spec = make_spec(1, {det(2)}, GaussianHead{1, 0.05});
  Params p = zero_params(spec);
  p.layers[1].bias = {0.25};
  const Evaluation ev = evaluate(spec, p, Matrix{{0.0}}, Matrix{{0.25}}, mode::Dnn{});
  EXPECT_NEAR(ev.mean_nll, std::log(0.05 * std::sqrt(2 * std::numbers::pi)), 1e-14);
  EXPECT_NEAR(ev.mean_nll, -2.0768, 1e-4);
  EXPECT_FALSE(ev.error_rate.has_value());
}

TEST(Nll, SoftmaxUniform) {
  const auto spec = make_spec(2, {det(2)}, SoftmaxHead{10});
  const Params p = zero_params(spec);
  const Evaluation ev = evaluate(spec, p, Matrix(3, 2), Matrix{{0}, {4}, {9}}, mode::Dnn{});
  EXPECT_NEAR(ev.mean_nll, std::log(10.0), 1e-14);
  EXPECT_THROW(evaluate(spec, p, Matrix(1, 2), Matrix{{10}}, mode::Dnn{}), ValidationError);
}

TEST(Nll, SfnnIdenticalSamplesCollapse) {
  const auto spec = make_spec(2, {stoch_clipped(3, 1.0), squash_layer(3), det(2)}, SoftmaxHead{4});
  Params p = random_params(spec, 91);
  p.layers[0].bias = {40, -40, 40};
  const Matrix x = random_inputs(5, 2, 92);
  const Matrix y{{0}, {1}, {2}, {3}, {1}};
  const auto single = predict_nll(spec, p, x, y, mode::ExactEnum{});
  const auto sfnn = predict_nll(spec, p, x, y, mode::SfnnPropagate{50, RngStream(1)});
  for (std::size_t r = 0; r < 5; ++r) EXPECT_NEAR(sfnn[r], single[r], 1e-12);
}

TEST(Nll, SfnnApproachesSimplifiedWhenSquashIsNearLinear) {
  const auto spec = make_spec(1, {stoch_sigmoid(8), squash_layer(4, 1.0, SquashKind::Sigmoid, ActivationKind::Sigmoid)},
                              GaussianHead{1, 0.05});
  Params p = random_params(spec, 101, 1.0);
  for (double& w : p.layers[1].weights.values()) w *= 0.02;
  const Matrix x = random_inputs(50, 1, 102);
  Matrix y = forward_simplified_exact(spec, p, x).output;
  RngStream r(103);
  for (double& v : y.values()) v += r.uniform(-0.03, 0.03);
  const double mc = evaluate(spec, p, x, y, mode::SimplifiedMC{500, RngStream(1)}).mean_nll;
  const double sf10 = evaluate(spec, p, x, y, mode::SfnnPropagate{10, RngStream(2)}).mean_nll;
  const double sf500 = evaluate(spec, p, x, y, mode::SfnnPropagate{500, RngStream(2)}).mean_nll;
  EXPECT_LE(std::abs(sf500 - mc), 0.05);
  EXPECT_TRUE(std::isfinite(sf10));
}

TEST(Evaluate, ChunkedSamplingMatchesOnePass) {
  // 100 units x 50000 samples forces one row per chunk.
  const auto spec = make_spec(3,
                              {{StochasticBinary{DirectSigmoid{}}, 100},
                               {Squash{2.0, SquashKind::Sigmoid, ActivationKind::Tanh, false}, 4}},
                              SoftmaxHead{3});
  const Params p = random_params(spec, 5);
  const Matrix x = random_inputs(3, 3, 6);
  const Matrix y{{0}, {1}, {2}};
  const std::size_t m = 50000;
  const Evaluation mc = evaluate(spec, p, x, y, mode::SimplifiedMC{m, RngStream(7)});
  const Activations whole = forward_simplified_mc(spec, p, x, m, RngStream(7));
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(mc.nll[r], head_nll(spec.output, whole.output.row(r), y.row(r)));

  const Evaluation sf = evaluate(spec, p, x, y, mode::SfnnPropagate{m, RngStream(8)});
  const SampledOutputs so = forward_sfnn(spec, p, x, m, RngStream(8));
  for (std::size_t r = 0; r < 3; ++r) {
    std::vector<double> logp(m);
    for (std::size_t k = 0; k < m; ++k) logp[k] = -head_nll(spec.output, so.output.row(r * m + k), y.row(r));
    double mx = logp[0], sum = 0.0;
    for (double v : logp) mx = std::max(mx, v);
    for (double v : logp) sum += std::exp(v - mx);
    EXPECT_EQ(sf.nll[r], -((mx + std::log(sum)) - std::log(double(m))));
  }
}
