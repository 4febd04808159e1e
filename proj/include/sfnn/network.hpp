#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sfnn/activation.hpp"
#include "sfnn/matrix.hpp"
#include "sfnn/rng.hpp"

namespace sfnn {

// ---------------------------------------------------------------------------
// Layer stack
// ---------------------------------------------------------------------------

// h = f(W h_prev + b).
struct Deterministic {
  ActivationKind activation = ActivationKind::ReLU;
};

// P(h_i = 1 | x) = sigmoid(W_i x + b_i).
struct DirectSigmoid {};

// P(h_i = 1 | x) = clamp(alpha * f(W_i x + b_i) [+ 1/2 when centered], 0, 1).
struct ClippedScaled {
  double alpha = 1.0;
  ActivationKind activation = ActivationKind::ReLU;
  bool centered = false;
};

// Binary random units with factorised marginals.
struct StochasticBinary {
  std::variant<DirectSigmoid, ClippedScaled> marginal;
};

// Deterministic layer directly above a stochastic one:
//   h_j = f(alpha * (E[s(W_j h + b_j)] - s(0) - [centered] s'(0)/2 * sum_i W_ji)).
struct Squash {
  double alpha = 1.0;
  SquashKind squash = SquashKind::Sigmoid;
  ActivationKind activation = ActivationKind::ReLU;
  bool centered = false;
};

struct LayerSpec {
  std::variant<Deterministic, StochasticBinary, Squash> kind;
  std::size_t width = 0;

  bool is_stochastic() const { return std::holds_alternative<StochasticBinary>(kind); }
  bool is_squash() const { return std::holds_alternative<Squash>(kind); }
  bool is_deterministic() const { return std::holds_alternative<Deterministic>(kind); }
};

struct SoftmaxHead {
  std::size_t classes = 10;
};

// Isotropic Gaussian with fixed standard deviation around the network output.
struct GaussianHead {
  std::size_t dim = 1;
  double sigma_y = 0.05;
};

using OutputHead = std::variant<SoftmaxHead, GaussianHead>;

std::size_t output_dim(const OutputHead& head);

// Hidden layers in bottom-up order followed by an implicit linear output
// layer feeding the head.
struct NetworkSpec {
  std::vector<LayerSpec> layers;
  std::size_t input_dim = 0;
  OutputHead output = GaussianHead{};

  std::size_t hidden_count() const { return layers.size(); }
  // Width of the input to hidden layer `l` (l == hidden_count() is the output layer).
  std::size_t fan_in(std::size_t l) const;
  std::size_t fan_out(std::size_t l) const;
  bool has_stochastic() const;
};

struct LayerParams {
  Matrix weights;             // fan_out x fan_in
  std::vector<double> bias;   // fan_out

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

// One entry per hidden layer plus a final entry for the output layer.
struct Params {
  std::vector<LayerParams> layers;

  friend bool operator==(const Params&, const Params&) = default;
};

struct Violation {
  std::size_t layer = 0;
  std::string message;
};

// Every structural rule the layer stack breaks. Empty means valid.
std::vector<Violation> validate_spec(const NetworkSpec& spec);
// Throws ValidationError listing every violation.
void require_valid(const NetworkSpec& spec);
// Throws ValidationError on shape mismatch or non-finite values.
void validate_params(const NetworkSpec& spec, const Params& params);

// Zero-initialised parameters shaped for `spec`.
Params zero_params(const NetworkSpec& spec);
// Glorot-uniform weights and zero biases.
Params init_params(const NetworkSpec& spec, RngStream rng);

// ---------------------------------------------------------------------------
// Forward semantics
// ---------------------------------------------------------------------------

namespace mode {
struct Dnn {};
struct DnnStar {};
struct ExactEnum {};
struct SimplifiedMC {
  std::size_t samples = 20;
  RngStream rng;
};
struct SfnnPropagate {
  std::size_t samples = 500;
  RngStream rng;
};
}  // namespace mode

using ForwardMode =
    std::variant<mode::Dnn, mode::DnnStar, mode::ExactEnum, mode::SimplifiedMC, mode::SfnnPropagate>;

std::string mode_name(const ForwardMode& mode);

// Largest stochastic layer that exact enumeration accepts.
inline constexpr std::size_t kMaxEnumWidth = 20;

// Per-layer outputs of a deterministic-output forward pass. hidden[l] is
// rows x width(l); for stochastic layers it holds the marginals.
struct Activations {
  std::vector<Matrix> hidden;
  Matrix output;
};

// SFNN samples: row r * samples + m holds sample m of input row r.
struct SampledOutputs {
  std::size_t samples = 0;
  std::vector<Matrix> hidden;
  Matrix output;
};

struct ExactOptions {
  // Replace s by its linearisation s(0) + s'(0) x inside every squash layer.
  // Test hook for first-order recovery checks.
  bool linearize_squash = false;
};

Matrix stochastic_marginals(const StochasticBinary& layer, const Matrix& preactivation);
Matrix stochastic_marginals(const LayerSpec& layer, const Matrix& input, const LayerParams& params);

// Plain DNN: every layer deterministic. Rejects stochastic layers.
Activations forward_dnn(const NetworkSpec& spec, const Params& params, const Matrix& x);
// Mean-field pass: squash layers use s(sum_i W_ji P_i + b_j).
Activations forward_dnn_star(const NetworkSpec& spec, const Params& params, const Matrix& x);
// Simplified-SFNN with expectations by full enumeration of each stochastic layer.
Activations forward_simplified_exact(const NetworkSpec& spec, const Params& params, const Matrix& x,
                                     ExactOptions options = {});
// Simplified-SFNN with Monte Carlo expectations at each layer above a stochastic one.
Activations forward_simplified_mc(const NetworkSpec& spec, const Params& params, const Matrix& x,
                                  std::size_t samples, const RngStream& rng);
// SFNN: binary samples propagate to the output.
SampledOutputs forward_sfnn(const NetworkSpec& spec, const Params& params, const Matrix& x,
                            std::size_t samples, const RngStream& rng);

// Intermediate values of a forward pass, kept for backpropagation.
struct LayerTrace {
  Matrix input;    // h_{l-1}
  Matrix pre;      // W h_{l-1} + b, or alpha * (u - c) for a squash layer
  Matrix post;     // layer output; marginals for a stochastic layer
  Matrix samples;  // Monte Carlo only, stochastic layers: (rows * M) x width
  Matrix beta;     // Monte Carlo only, layers above a stochastic one: (rows * M) x width
  Matrix expect;   // layers above a stochastic one: the averaged E[s(beta) - s(0)] or E[f(beta)]
};

struct ForwardTrace {
  std::size_t samples = 0;
  std::vector<LayerTrace> layers;
  Matrix output;
};

// Traced pass for Dnn, DnnStar, ExactEnum and SimplifiedMC modes.
ForwardTrace forward_traced(const NetworkSpec& spec, const Params& params, const Matrix& x,
                            const ForwardMode& mode, ExactOptions options = {});

// Dispatch for the four modes with a single output per row.
Activations forward(const NetworkSpec& spec, const Params& params, const Matrix& x,
                    const ForwardMode& mode);

// ---------------------------------------------------------------------------
// Likelihood
// ---------------------------------------------------------------------------

// Targets: for a softmax head an n x 1 matrix of class indices, for a
// Gaussian head an n x dim matrix.
struct Evaluation {
  std::vector<double> nll;  // per row
  double mean_nll = 0.0;
  std::optional<double> error_rate;  // classification only, fraction in [0, 1]
};

Evaluation evaluate(const NetworkSpec& spec, const Params& params, const Matrix& x,
                    const Matrix& targets, const ForwardMode& mode);

std::vector<double> predict_nll(const NetworkSpec& spec, const Params& params, const Matrix& x,
                                const Matrix& targets, const ForwardMode& mode);

// Per-example -log p(y | output) for a single output vector.
double head_nll(const OutputHead& head, std::span<const double> output,
                std::span<const double> target);

}  // namespace sfnn
