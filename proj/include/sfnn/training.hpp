#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sfnn/network.hpp"

namespace sfnn {

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

struct LossGrad {
  double loss = 0.0;  // mean over rows
  Matrix grad;        // d loss / d prediction, same shape as the prediction
};

// Mean negative log-likelihood of a batch and its gradient. Softmax targets
// are n x 1 class indices; Gaussian targets are n x dim.
LossGrad loss_and_grad(const OutputHead& head, const Matrix& prediction, const Matrix& targets);

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

struct GradResult {
  double loss = 0.0;
  Params grads;
};

// Exact gradient of the mean batch loss of a network without stochastic layers.
GradResult backprop_dnn(const NetworkSpec& spec, const Params& params, const Matrix& x,
                        const Matrix& y);

// Estimator gradient for the Simplified-SFNN objective. The same binary
// samples serve the forward estimate and the backward estimators.
GradResult estimator_grad_simplified(const NetworkSpec& spec, const Params& params, const Matrix& x,
                                     const Matrix& y, std::size_t samples, const RngStream& rng);

// Exact gradient of the enumerated Simplified-SFNN objective.
GradResult exact_grad_simplified(const NetworkSpec& spec, const Params& params, const Matrix& x,
                                 const Matrix& y, ExactOptions options = {});

// Exact gradient of the DNN* objective.
GradResult grad_dnn_star(const NetworkSpec& spec, const Params& params, const Matrix& x,
                         const Matrix& y);

// Dispatch on Dnn, DnnStar, ExactEnum or SimplifiedMC.
GradResult compute_gradient(const NetworkSpec& spec, const Params& params, const Matrix& x,
                            const Matrix& y, const ForwardMode& mode);

// ---------------------------------------------------------------------------
// Optimiser
// ---------------------------------------------------------------------------

struct AdamState {
  Params m;
  Params v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState adam_init(const Params& params);
// One bias-corrected ADAM update with learning rate `lr`.
void adam_step(AdamState& state, Params& params, const Params& grads, double lr);

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

enum class TrainMode { Dnn, SimplifiedMC };
enum class EvalMode { Dnn, DnnStar, SimplifiedMC, Sfnn };

std::string_view to_string(TrainMode m);
std::string_view to_string(EvalMode m);
TrainMode parse_train_mode(std::string_view s);
EvalMode parse_eval_mode(std::string_view s);

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 128;
  std::size_t samples_train = 20;
  std::size_t samples_eval = 500;
  double base_lr = 1e-3;
  double lr_decay = 0.98;  // per epoch
  std::uint64_t seed = 1;
  TrainMode mode = TrainMode::Dnn;
  // Semantics used for validation scoring and model selection.
  EvalMode val_mode = EvalMode::Dnn;
  bool record_wall_time = true;
};

// Learning rates tried by select_learning_rate.
inline const std::vector<double> kLearningRateGrid = {5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4};
// Fine-tuning starts from a trained net, so the useful steps are smaller.
inline const std::vector<double> kFinetuneLearningRateGrid = {1e-4, 3e-5, 1e-5};

struct MetricRecord {
  std::size_t epoch = 0;
  std::string split;
  double loss = 0.0;
  std::optional<double> error_rate;
  std::optional<double> nll;
  std::optional<double> wall_ms;
};

std::string to_jsonl(const MetricRecord& r);

struct TrainResult {
  Params params;              // best validation epoch (or last epoch without validation)
  std::size_t best_epoch = 0; // 0 means the initial parameters
  std::vector<MetricRecord> metrics;
};

// Converts an evaluation mode into a forward mode with the given stream.
ForwardMode make_forward_mode(EvalMode mode, std::size_t samples, const RngStream& rng);

// Minibatch ADAM training. `val_x` may have zero rows.
TrainResult train(const NetworkSpec& spec, const Params& init, const Matrix& x, const Matrix& y,
                  const Matrix& val_x, const Matrix& val_y, const TrainConfig& config);

struct LrSearchResult {
  double best_lr = 0.0;
  TrainResult best;
  std::vector<std::pair<double, double>> scores;  // (lr, validation score)
};

// Trains once per learning rate in `grid` and keeps the best validation score.
LrSearchResult select_learning_rate(const NetworkSpec& spec, const Params& init, const Matrix& x,
                                    const Matrix& y, const Matrix& val_x, const Matrix& val_y,
                                    TrainConfig config, const std::vector<double>& grid = kLearningRateGrid);

}  // namespace sfnn
