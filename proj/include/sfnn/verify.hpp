#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sfnn/network.hpp"
#include "sfnn/transfer.hpp"

namespace sfnn {

struct CheckReport {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double bound = 0.0;
  std::vector<std::uint64_t> seeds;
  // Named auxiliary values (per-seed results, loss curves, counts).
  std::vector<std::pair<std::string, double>> values;
};

std::string to_jsonl(const CheckReport& r);

// Brute force over all 2^N binary vectors: sum_h s(w . h + b) prod_i p_i^h_i (1 - p_i)^(1 - h_i).
double enum_expectation_oracle(std::span<const double> p, std::span<const double> w, double b, SquashKind s);

struct SmallNetOptions {
  std::size_t max_input = 8;
  std::size_t max_stochastic = 12;
  std::size_t max_upper = 8;
  std::size_t extra_layers = 0;  // deterministic layers above the upper layer
  double bias_scale = 0.5;
};

// Random small DNN (input -> hidden -> hidden [-> ...] -> 1-d Gaussian output)
// with the given hidden activation; Glorot weights, uniform biases.
std::pair<NetworkSpec, Params> sample_small_dnn(RngStream rng, ActivationKind activation,
                                                const SmallNetOptions& options = {});
// Random Simplified-SFNN (input -> stochastic -> squash -> 1-d Gaussian output).
// Centered nets use tanh marginals under a tanh squash; otherwise sigmoid
// marginals under a sigmoid squash.
std::pair<NetworkSpec, Params> sample_small_simplified(RngStream rng, bool centered,
                                                       const SmallNetOptions& options = {});

// Uniform(-1, 1) inputs.
Matrix sample_inputs(RngStream rng, std::size_t rows, std::size_t dim);

// For each seed and each gamma_upper: a random ReLU or sigmoid DNN is
// transferred with Theorem 1 at layer 0, and the enumerated gap at layer 1 is
// compared with the reported bound. measured = worst gap / bound.
CheckReport check_theorem1_bound(const std::vector<std::uint64_t>& seeds, const std::vector<double>& gamma_uppers,
                                 std::size_t data_rows = 64, const SmallNetOptions& options = {});

// Transfer loss at layer `layer + 1` for each gamma_upper (ascending). Passes
// when the curve is non-increasing and first / last >= min_ratio.
CheckReport gamma_sweep(const NetworkSpec& spec, const Params& params, const Matrix& data,
                        const std::vector<double>& gammas, TransferKind kind = TransferKind::Theorem1,
                        std::size_t layer = 0, double min_ratio = 10.0);

// Central differences with step 1e-5 on `coords` random coordinates against
// the analytic gradient (Dnn) or the exact enumerated gradient (ExactEnum).
// measured = max relative error.
CheckReport grad_check(const NetworkSpec& spec, const Params& params, const Matrix& x, const Matrix& y,
                       const ForwardMode& mode, double tolerance, std::size_t coords = 100,
                       RngStream rng = RngStream(7));

// Cosine similarity between the Monte Carlo estimator gradient and the exact
// gradient of the enumerated objective.
CheckReport estimator_cosine(const NetworkSpec& spec, const Params& params, const Matrix& x, const Matrix& y,
                             std::size_t samples, const RngStream& rng, double min_cosine = 0.9);

// `runs` reseeded Monte Carlo estimates of E[s(beta_j)] at the layer above
// the first stochastic layer, for input row `x`, against the enumeration
// oracle. Passes when |z| <= 4 for every unit. measured = max |z|.
CheckReport mc_bias_test(const NetworkSpec& spec, const Params& params, const Matrix& x, std::size_t samples,
                         std::size_t runs, const RngStream& rng);

}  // namespace sfnn
