#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "sfnn/network.hpp"
#include "sfnn/training.hpp"

namespace sfnn {

enum class TransferKind { SimpleSigmoid, SimpleReLU, Theorem1, Theorem2, Theorem3 };

std::string_view to_string(TransferKind k);
TransferKind parse_transfer_kind(std::string_view s);

inline constexpr double kDefaultGammaUpper = 50.0;
inline constexpr double kGammaFloor = 1e-6;

struct TransferConfig {
  TransferKind kind = TransferKind::Theorem1;
  // Hidden layers (0-based) that become stochastic. Ignored by the simple
  // transforms, which always convert layer 0.
  std::vector<std::size_t> layers = {0};
  // gamma_{l+1} per converted layer; a single value applies to all of them.
  std::vector<double> gamma_upper = {kDefaultGammaUpper};
  SquashKind squash = SquashKind::Sigmoid;
  // When positive, a dead layer (gamma = 0) uses this value instead of failing.
  double gamma_floor = 0.0;
};

// Constants of one layer of the source DNN used by the propagation lemmas.
struct LayerConstants {
  std::size_t fan_in = 0;  // N^{l-1}
  double w_max = 0.0;      // max_ij |W^l_ij|
  double b_max = 0.0;      // max_i |b^l_i|
};

struct StochasticLayerReport {
  std::size_t layer = 0;         // hidden-layer index of the stochastic layer
  double gamma_lower = 0.0;      // gamma_l
  double gamma_upper = 0.0;      // gamma_{l+1}
  double max_preactivation = 0.0;  // max |W h + b| of the stochastic layer over D
  double bound = 0.0;            // per-unit bound on the upper layer, maximised over units
  double bound_uniform = 0.0;    // same bound with N * W_max and b_max in place of row sums
  double tau = 1.0;              // propagation factor to the last hidden layer
};

struct TransferReport {
  TransferKind kind = TransferKind::Theorem1;
  SquashKind squash = SquashKind::Sigmoid;
  std::vector<StochasticLayerReport> layers;
  std::vector<LayerConstants> constants;  // hidden layers then output layer
  double composed_bound = 0.0;            // at the last hidden layer
};

struct TransferResult {
  NetworkSpec spec;
  Params params;
  TransferReport report;
};

// max over units and inputs of |f(W h + b)| at hidden layer `layer`, from the
// deterministic pass. A zero result is an error unless `floor` > 0.
double compute_gamma(const NetworkSpec& spec, const Params& params, std::size_t layer, const Matrix& data,
                     double floor = 0.0);

// Layer 0 becomes stochastic with marginals equal to the DNN activations.
TransferResult simple_transform(const NetworkSpec& spec, const Params& params, TransferKind kind,
                                const Matrix& data, double gamma_floor = 0.0);

// Theorem 1 (one layer) and Theorem 2 (several non-adjacent layers).
TransferResult transform_theorem1(const NetworkSpec& spec, const Params& params, const Matrix& data,
                                  const TransferConfig& config);
// Centered transfer for activations that may be negative.
TransferResult transform_theorem3(const NetworkSpec& spec, const Params& params, const Matrix& data,
                                  const TransferConfig& config);
// Dispatch on config.kind.
TransferResult transfer(const NetworkSpec& spec, const Params& params, const Matrix& data,
                        const TransferConfig& config);

// Theorem 1 bound for a single upper layer: max_j gamma (sum_i |W_ji| + |b_j| / gamma)^2 / (2 s'(0) gamma_up).
double theorem1_bound(const Matrix& w_upper, std::span<const double> b_upper, double gamma_lower,
                      double gamma_upper, SquashKind squash);
// Theorem 3 analogue: max_j gamma (sum_i |W_ji| + |b_j| / (2 gamma))^2 / (s'(0) gamma_up).
double theorem3_bound(const Matrix& w_upper, std::span<const double> b_upper, double gamma_lower,
                      double gamma_upper, SquashKind squash);

// Lemma 1: a gap B at layer l-1 becomes at most B * N^{l-1} * W_max^l at layer l.
double lemma1_propagate(double gap, std::size_t fan_in, double w_max);

// Sum over stochastic layers of tau_l times the uniform per-layer bound,
// measured at hidden layer `target` (default: last hidden layer).
double lemma_bounds(const TransferReport& report, std::optional<std::size_t> target = std::nullopt);

struct ActivationGap {
  double mean_abs = 0.0;  // (1/|D|)(1/N) sum |h - h_hat|
  double max_abs = 0.0;
};

// Hidden-layer activations using the most faithful deterministic semantics:
// Dnn without stochastic layers, otherwise ExactEnum when every stochastic
// layer has width <= 20, otherwise SimplifiedMC with 10^4 samples.
Matrix reference_activations(const NetworkSpec& spec, const Params& params, const Matrix& data,
                             std::size_t layer, const RngStream& rng = RngStream(0x5eed));

ActivationGap activation_gap(const NetworkSpec& spec_a, const Params& params_a, const NetworkSpec& spec_b,
                             const Params& params_b, const Matrix& data, std::size_t layer,
                             const RngStream& rng = RngStream(0x5eed));

// Mean absolute activation gap at hidden layer `layer`.
double transfer_loss(const NetworkSpec& spec_a, const Params& params_a, const NetworkSpec& spec_b,
                     const Params& params_b, const Matrix& data, std::size_t layer,
                     const RngStream& rng = RngStream(0x5eed));

// A network together with the semantics it is meant to be evaluated under.
struct Model {
  NetworkSpec spec;
  Params params;
  EvalMode default_mode = EvalMode::Dnn;
  std::optional<TransferReport> report;
};

// Tags a Simplified-SFNN for DnnStar evaluation. Parameters are untouched; a
// network without stochastic layers is tagged as a plain DNN.
Model export_dnn_star(const Model& simplified);

}  // namespace sfnn
