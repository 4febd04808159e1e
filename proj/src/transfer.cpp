#include "sfnn/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "sfnn/error.hpp"

namespace sfnn {

namespace {

void require_plain_dnn(const NetworkSpec& spec, const Params& params) {
  require_valid(spec);
  validate_params(spec, params);
  for (const auto& l : spec.layers) {
    if (!l.is_deterministic()) throw ValidationError("transfer source must be a deterministic DNN");
  }
}

ActivationKind activation_of(const LayerSpec& l) { return std::get<Deterministic>(l.kind).activation; }

std::vector<LayerConstants> layer_constants(const NetworkSpec& spec, const Params& params) {
  std::vector<LayerConstants> out;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    LayerConstants c;
    c.fan_in = spec.fan_in(l);
    for (double w : params.layers[l].weights.values()) c.w_max = std::max(c.w_max, std::abs(w));
    for (double b : params.layers[l].bias) c.b_max = std::max(c.b_max, std::abs(b));
    out.push_back(c);
  }
  return out;
}

// Shared body of the Theorem 1/2/3 transfers.
TransferResult convert(const NetworkSpec& spec, const Params& params, const Matrix& data,
                       const TransferConfig& config, bool centered) {
  require_plain_dnn(spec, params);
  if (data.rows() == 0) throw ValidationError("transfer needs a non-empty dataset");
  const std::set<std::size_t> chosen(config.layers.begin(), config.layers.end());
  if (chosen.empty()) throw ValidationError("transfer: no layers selected");
  if (config.gamma_upper.size() != 1 && config.gamma_upper.size() != chosen.size()) {
    throw ValidationError("transfer: gamma_upper needs one value or one per converted layer");
  }
  for (double g : config.gamma_upper) {
    if (!std::isfinite(g) || g <= 0.0) throw ValidationError("transfer: gamma_upper must be positive");
  }
  const std::size_t depth = spec.layers.size();
  for (std::size_t l : chosen) {
    if (l + 1 >= depth) {
      throw ValidationError("transfer: layer " + std::to_string(l) + " has no hidden layer above it");
    }
    if (chosen.count(l + 1) != 0) {
      throw ValidationError("transfer: stochastic layers " + std::to_string(l) + " and " +
                            std::to_string(l + 1) + " would be adjacent");
    }
    if (!centered && !is_non_negative(activation_of(spec.layers[l]))) {
      throw ValidationError("theorem 1 transfer needs a non-negative activation at layer " + std::to_string(l) +
                            "; use the theorem 3 transfer");
    }
  }

  const ForwardTrace trace = forward_traced(spec, params, data, mode::Dnn{});
  const double sp0 = squash_constants(config.squash).sp0;

  TransferResult result{spec, params, {}};
  result.report.kind = config.kind;
  result.report.squash = config.squash;
  result.report.constants = layer_constants(spec, params);

  std::size_t k = 0;
  for (std::size_t l : chosen) {
    const double gamma_up = config.gamma_upper.size() == 1 ? config.gamma_upper[0] : config.gamma_upper[k];
    ++k;
    double gamma = 0.0;
    for (double v : trace.layers[l].post.values()) gamma = std::max(gamma, std::abs(v));
    if (gamma == 0.0) {
      if (config.gamma_floor <= 0.0) {
        throw NumericalError("degenerate gamma=0 at layer " + std::to_string(l) +
                             ": retrain the DNN or set the gamma floor (e.g. 1e-6)");
      }
      gamma = config.gamma_floor;
    }
    double max_pre = 0.0;
    for (double v : trace.layers[l].pre.values()) max_pre = std::max(max_pre, std::abs(v));

    const ActivationKind f_low = activation_of(spec.layers[l]);
    const ActivationKind f_up = activation_of(spec.layers[l + 1]);
    const double scale = centered ? 2.0 * gamma : gamma;
    result.spec.layers[l].kind = StochasticBinary{ClippedScaled{1.0 / scale, f_low, centered}};
    result.spec.layers[l + 1].kind = Squash{scale * gamma_up / sp0, config.squash, f_up, centered};

    LayerParams& up = result.params.layers[l + 1];
    for (double& w : up.weights.values()) w /= gamma_up;
    for (double& b : up.bias) b /= scale * gamma_up;

    const LayerParams& orig = params.layers[l + 1];
    StochasticLayerReport rep;
    rep.layer = l;
    rep.gamma_lower = gamma;
    rep.gamma_upper = gamma_up;
    rep.max_preactivation = max_pre;
    rep.bound = centered ? theorem3_bound(orig.weights, orig.bias, gamma, gamma_up, config.squash)
                         : theorem1_bound(orig.weights, orig.bias, gamma, gamma_up, config.squash);
    const auto& c = result.report.constants[l + 1];
    const double spread = static_cast<double>(c.fan_in) * c.w_max + c.b_max / scale;
    rep.bound_uniform = centered ? gamma * spread * spread / (sp0 * gamma_up)
                                 : gamma * spread * spread / (2.0 * sp0 * gamma_up);
    result.report.layers.push_back(rep);
  }
  for (auto& rep : result.report.layers) {
    rep.tau = 1.0;
    for (std::size_t t = rep.layer + 2; t < depth; ++t) {
      const auto& c = result.report.constants[t];
      rep.tau *= static_cast<double>(c.fan_in) * c.w_max;
    }
  }
  result.report.composed_bound = lemma_bounds(result.report);
  require_valid(result.spec);
  return result;
}

double row_bound(const Matrix& w, std::span<const double> b, double bias_scale, double& out_max) {
  out_max = 0.0;
  for (std::size_t j = 0; j < w.rows(); ++j) {
    double s = 0.0;
    for (double v : w.row(j)) s += std::abs(v);
    s += std::abs(b[j]) / bias_scale;
    out_max = std::max(out_max, s * s);
  }
  return out_max;
}

}  // namespace

std::string_view to_string(TransferKind k) {
  switch (k) {
    case TransferKind::SimpleSigmoid: return "simple-sigmoid";
    case TransferKind::SimpleReLU: return "simple-relu";
    case TransferKind::Theorem1: return "thm1";
    case TransferKind::Theorem2: return "thm2";
    case TransferKind::Theorem3: return "thm3";
  }
  return "";
}

TransferKind parse_transfer_kind(std::string_view s) {
  for (auto k : {TransferKind::SimpleSigmoid, TransferKind::SimpleReLU, TransferKind::Theorem1,
                 TransferKind::Theorem2, TransferKind::Theorem3}) {
    if (to_string(k) == s) return k;
  }
  throw ValidationError("unknown transfer mode: " + std::string(s));
}

double compute_gamma(const NetworkSpec& spec, const Params& params, std::size_t layer, const Matrix& data,
                     double floor) {
  if (data.rows() == 0) throw ValidationError("compute_gamma: dataset is empty");
  if (layer >= spec.layers.size()) throw ValidationError("compute_gamma: layer index out of range");
  const Activations acts = forward_dnn(spec, params, data);
  double gamma = 0.0;
  for (double v : acts.hidden[layer].values()) gamma = std::max(gamma, std::abs(v));
  if (gamma == 0.0) {
    if (floor > 0.0) return floor;
    throw NumericalError("degenerate gamma=0 at layer " + std::to_string(layer) +
                         ": retrain the DNN or set the gamma floor (e.g. 1e-6)");
  }
  return gamma;
}

TransferResult simple_transform(const NetworkSpec& spec, const Params& params, TransferKind kind,
                                const Matrix& data, double gamma_floor) {
  require_plain_dnn(spec, params);
  if (spec.layers.size() < 2) throw ValidationError("simple transform needs at least two hidden layers");
  const ActivationKind f = activation_of(spec.layers[0]);
  TransferResult result{spec, params, {}};
  result.report.kind = kind;
  result.report.constants = layer_constants(spec, params);
  StochasticLayerReport rep;
  rep.layer = 0;
  if (kind == TransferKind::SimpleSigmoid) {
    if (f != ActivationKind::Sigmoid) throw ValidationError("simple-sigmoid transform needs a sigmoid first layer");
    result.spec.layers[0].kind = StochasticBinary{DirectSigmoid{}};
    rep.gamma_lower = 1.0;
  } else if (kind == TransferKind::SimpleReLU) {
    if (f != ActivationKind::ReLU) throw ValidationError("simple-relu transform needs a ReLU first layer");
    const double gamma = compute_gamma(spec, params, 0, data, gamma_floor);
    result.spec.layers[0].kind = StochasticBinary{ClippedScaled{1.0 / gamma, ActivationKind::ReLU, false}};
    for (double& w : result.params.layers[1].weights.values()) w *= gamma;
    rep.gamma_lower = gamma;
  } else {
    throw ValidationError("simple_transform: kind must be simple-sigmoid or simple-relu");
  }
  result.report.layers.push_back(rep);
  require_valid(result.spec);
  return result;
}

TransferResult transform_theorem1(const NetworkSpec& spec, const Params& params, const Matrix& data,
                                  const TransferConfig& config) {
  return convert(spec, params, data, config, false);
}

TransferResult transform_theorem3(const NetworkSpec& spec, const Params& params, const Matrix& data,
                                  const TransferConfig& config) {
  return convert(spec, params, data, config, true);
}

TransferResult transfer(const NetworkSpec& spec, const Params& params, const Matrix& data,
                        const TransferConfig& config) {
  switch (config.kind) {
    case TransferKind::SimpleSigmoid:
    case TransferKind::SimpleReLU:
      return simple_transform(spec, params, config.kind, data, config.gamma_floor);
    case TransferKind::Theorem1:
    case TransferKind::Theorem2:
      return transform_theorem1(spec, params, data, config);
    case TransferKind::Theorem3:
      return transform_theorem3(spec, params, data, config);
  }
  throw ValidationError("unknown transfer kind");
}

double theorem1_bound(const Matrix& w_upper, std::span<const double> b_upper, double gamma_lower,
                      double gamma_upper, SquashKind squash) {
  double sq = 0.0;
  row_bound(w_upper, b_upper, gamma_lower, sq);
  return gamma_lower * sq / (2.0 * squash_constants(squash).sp0 * gamma_upper);
}

double theorem3_bound(const Matrix& w_upper, std::span<const double> b_upper, double gamma_lower,
                      double gamma_upper, SquashKind squash) {
  double sq = 0.0;
  row_bound(w_upper, b_upper, 2.0 * gamma_lower, sq);
  return gamma_lower * sq / (squash_constants(squash).sp0 * gamma_upper);
}

double lemma1_propagate(double gap, std::size_t fan_in, double w_max) {
  return gap * static_cast<double>(fan_in) * w_max;
}

double lemma_bounds(const TransferReport& report, std::optional<std::size_t> target) {
  if (report.constants.empty()) return 0.0;
  const std::size_t hidden = report.constants.size() - 1;
  const std::size_t top = target.value_or(hidden == 0 ? 0 : hidden - 1);
  double total = 0.0;
  for (const auto& rep : report.layers) {
    if (rep.layer + 1 > top) continue;
    double tau = 1.0;
    for (std::size_t t = rep.layer + 2; t <= top; ++t) {
      tau = lemma1_propagate(tau, report.constants[t].fan_in, report.constants[t].w_max);
    }
    total += tau * rep.bound_uniform;
  }
  return total;
}

Matrix reference_activations(const NetworkSpec& spec, const Params& params, const Matrix& data,
                             std::size_t layer, const RngStream& rng) {
  if (layer >= spec.layers.size()) throw ValidationError("activation gap: layer index out of range");
  if (!spec.has_stochastic()) return forward_dnn(spec, params, data).hidden[layer];
  const bool enumerable = std::all_of(spec.layers.begin(), spec.layers.end(), [](const LayerSpec& l) {
    return !l.is_stochastic() || l.width <= kMaxEnumWidth;
  });
  if (enumerable) return forward_simplified_exact(spec, params, data).hidden[layer];
  return forward_simplified_mc(spec, params, data, 10000, rng).hidden[layer];
}

ActivationGap activation_gap(const NetworkSpec& spec_a, const Params& params_a, const NetworkSpec& spec_b,
                             const Params& params_b, const Matrix& data, std::size_t layer,
                             const RngStream& rng) {
  if (layer >= spec_a.layers.size() || layer >= spec_b.layers.size() ||
      spec_a.layers[layer].width != spec_b.layers[layer].width) {
    throw ValidationError("activation gap: layer widths do not match");
  }
  const Matrix a = reference_activations(spec_a, params_a, data, layer, rng);
  const Matrix b = reference_activations(spec_b, params_b, data, layer, rng);
  ActivationGap gap;
  if (a.size() == 0) return gap;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a.values()[i] - b.values()[i]);
    gap.mean_abs += d;
    gap.max_abs = std::max(gap.max_abs, d);
  }
  gap.mean_abs /= static_cast<double>(a.size());
  return gap;
}

double transfer_loss(const NetworkSpec& spec_a, const Params& params_a, const NetworkSpec& spec_b,
                     const Params& params_b, const Matrix& data, std::size_t layer, const RngStream& rng) {
  return activation_gap(spec_a, params_a, spec_b, params_b, data, layer, rng).mean_abs;
}

Model export_dnn_star(const Model& simplified) {
  require_valid(simplified.spec);
  Model out = simplified;
  out.default_mode = simplified.spec.has_stochastic() ? EvalMode::DnnStar : EvalMode::Dnn;
  return out;
}

}  // namespace sfnn
