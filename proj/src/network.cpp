#include "sfnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "sfnn/error.hpp"
#include "sfnn/kernels.hpp"

namespace sfnn {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

enum class Semantics { Dnn, DnnStar, Exact, MonteCarlo };

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

// Value accumulated by the expectation in a layer above a stochastic layer.
// Squash layers average s(beta) - s(0) (or its linearisation); deterministic
// layers average f(beta).
struct UpperFunction {
  const LayerSpec* layer;
  bool linearize;

  double operator()(double beta) const {
    if (const auto* sq = std::get_if<Squash>(&layer->kind)) {
      const auto c = squash_constants(sq->squash);
      if (linearize) return c.sp0 * beta;
      return squash(sq->squash, beta) - c.s0;
    }
    return activate(std::get<Deterministic>(layer->kind).activation, beta);
  }
};

// Centering offsets c_j = s'(0)/2 * sum_i W_ji for centered squash layers.
std::vector<double> centering_offsets(const LayerSpec& layer, const LayerParams& params) {
  std::vector<double> c(layer.width, 0.0);
  const auto* sq = std::get_if<Squash>(&layer.kind);
  if (sq == nullptr || !sq->centered) return c;
  const double half_slope = 0.5 * squash_constants(sq->squash).sp0;
  for (std::size_t j = 0; j < layer.width; ++j) {
    double sum = 0.0;
    for (double w : params.weights.row(j)) sum += w;
    c[j] = half_slope * sum;
  }
  return c;
}

// Turns expectations u (rows x width) into the layer output. For squash
// layers `pre` receives alpha * (u - c).
Matrix finish_upper(const LayerSpec& layer, const LayerParams& params, Matrix u, Matrix* pre) {
  if (const auto* sq = std::get_if<Squash>(&layer.kind)) {
    const auto c = centering_offsets(layer, params);
    Matrix z(u.rows(), u.cols());
    for (std::size_t r = 0; r < u.rows(); ++r) {
      for (std::size_t j = 0; j < u.cols(); ++j) z(r, j) = sq->alpha * (u(r, j) - c[j]);
    }
    Matrix h = activation_apply(sq->activation, z);
    if (pre != nullptr) *pre = std::move(z);
    return h;
  }
  if (pre != nullptr) *pre = Matrix();
  return u;
}

// Per-sample output of a layer above a stochastic one, given its incoming
// signals beta (SFNN semantics).
Matrix sampled_upper(const LayerSpec& layer, const LayerParams& params, const Matrix& beta) {
  const UpperFunction g{&layer, false};
  Matrix u(beta.rows(), beta.cols());
  for (std::size_t i = 0; i < beta.size(); ++i) u.values()[i] = g(beta.values()[i]);
  return finish_upper(layer, params, std::move(u), nullptr);
}

// Depth-first enumeration of every binary configuration with non-zero
// probability. beta accumulates 0 + W_{j,i1} + W_{j,i2} + ... in ascending
// unit order and the bias is added at the leaf, matching kernels::affine.
class Enumerator {
 public:
  Enumerator(std::span<const double> p, const Matrix& w, std::span<const double> b,
             const UpperFunction& g, std::span<double> out)
      : p_(p), w_(w), b_(b), g_(g), out_(out), n_(p.size()), width_(w.rows()),
        partial_((n_ + 1) * width_, 0.0) {}

  void run() {
    std::fill(out_.begin(), out_.end(), 0.0);
    visit(0, 1.0);
  }

 private:
  void visit(std::size_t depth, double weight) {
    double* acc = partial_.data() + depth * width_;
    if (depth == n_) {
      for (std::size_t j = 0; j < width_; ++j) out_[j] += weight * g_(acc[j] + b_[j]);
      return;
    }
    const double p = p_[depth];
    double* next = acc + width_;
    if (p < 1.0) {
      std::copy(acc, acc + width_, next);
      visit(depth + 1, weight * (1.0 - p));
    }
    if (p > 0.0) {
      for (std::size_t j = 0; j < width_; ++j) next[j] = acc[j] + w_(j, depth);
      visit(depth + 1, weight * p);
    }
  }

  std::span<const double> p_;
  const Matrix& w_;
  std::span<const double> b_;
  const UpperFunction& g_;
  std::span<double> out_;
  std::size_t n_;
  std::size_t width_;
  std::vector<double> partial_;
};

// (rows * M) x N binary samples; row r * M + m is drawn from stream
// (layer, row_offset + r), so a batch evaluated in chunks sees the same draws.
Matrix draw_samples(const Matrix& marginals, std::size_t samples, const RngStream& layer_rng,
                    std::size_t sample_rows_per_input, std::size_t row_offset) {
  // marginals has either `inputs` rows (shared across samples) or
  // inputs * samples rows (one per sample).
  const std::size_t n = marginals.cols();
  const std::size_t inputs =
      sample_rows_per_input == 1 ? marginals.rows() : marginals.rows() / samples;
  Matrix out(inputs * samples, n);
  const auto total = static_cast<std::ptrdiff_t>(inputs);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ri = 0; ri < total; ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    RngStream rng = layer_rng.split(row_offset + r);
    for (std::size_t m = 0; m < samples; ++m) {
      const std::size_t src = sample_rows_per_input == 1 ? r : r * samples + m;
      auto p = marginals.row(src);
      auto dst = out.row(r * samples + m);
      for (std::size_t i = 0; i < n; ++i) dst[i] = rng.uniform() < p[i] ? 1.0 : 0.0;
    }
  }
  return out;
}

void check_marginals_finite(const Matrix& z) {
  if (!z.all_finite()) throw NumericalError("stochastic layer: non-finite pre-activation");
}

struct Engine {
  const NetworkSpec& spec;
  const Params& params;
  Semantics semantics;
  ExactOptions options;
  std::size_t samples = 0;
  RngStream rng;
  std::size_t row_offset = 0;

  Activations run(const Matrix& x, ForwardTrace* trace) const {
    require_shape(x, x.rows(), spec.input_dim, "forward input");
    Activations acts;
    acts.hidden.reserve(spec.layers.size());
    if (trace != nullptr) {
      trace->samples = semantics == Semantics::MonteCarlo ? samples : 0;
      trace->layers.assign(spec.layers.size(), {});
    }
    Matrix h = x;
    Matrix last_samples;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
      const LayerSpec& layer = spec.layers[l];
      const LayerParams& lp = params.layers[l];
      const bool above_stochastic = l > 0 && spec.layers[l - 1].is_stochastic();
      LayerTrace* lt = trace != nullptr ? &trace->layers[l] : nullptr;
      if (lt != nullptr) lt->input = h;
      Matrix out;
      if (layer.is_stochastic()) {
        Matrix z = kernels::affine(h, lp.weights, lp.bias);
        check_marginals_finite(z);
        out = stochastic_marginals(std::get<StochasticBinary>(layer.kind), z);
        if (semantics == Semantics::MonteCarlo) {
          last_samples = draw_samples(out, samples, rng.split(l), 1, row_offset);
          if (lt != nullptr) lt->samples = last_samples;
        }
        if (lt != nullptr) lt->pre = std::move(z);
      } else if (above_stochastic) {
        out = upper_layer(l, h, last_samples, lt);
      } else {
        const auto& det = std::get<Deterministic>(layer.kind);
        Matrix z = kernels::affine(h, lp.weights, lp.bias);
        out = activation_apply(det.activation, z);
        if (lt != nullptr) lt->pre = std::move(z);
      }
      if (lt != nullptr) lt->post = out;
      acts.hidden.push_back(out);
      h = std::move(out);
    }
    const LayerParams& head = params.layers.back();
    acts.output = kernels::affine(h, head.weights, head.bias);
    if (trace != nullptr) trace->output = acts.output;
    return acts;
  }

  Matrix upper_layer(std::size_t l, const Matrix& marginals, const Matrix& sampled,
                     LayerTrace* lt) const {
    const LayerSpec& layer = spec.layers[l];
    const LayerParams& lp = params.layers[l];
    const UpperFunction g{&layer, options.linearize_squash};
    const std::size_t rows = marginals.rows();
    Matrix u(rows, layer.width);
    switch (semantics) {
      case Semantics::Dnn:
        throw ValidationError("Dnn mode cannot evaluate stochastic layers");
      case Semantics::DnnStar: {
        Matrix beta = kernels::affine(marginals, lp.weights, lp.bias);
        for (std::size_t i = 0; i < beta.size(); ++i) u.values()[i] = g(beta.values()[i]);
        break;
      }
      case Semantics::Exact: {
        const auto total = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t ri = 0; ri < total; ++ri) {
          const auto r = static_cast<std::size_t>(ri);
          Enumerator(marginals.row(r), lp.weights, lp.bias, g, u.row(r)).run();
        }
        break;
      }
      case Semantics::MonteCarlo: {
        Matrix beta = kernels::affine(sampled, lp.weights, lp.bias);
        for (std::size_t r = 0; r < rows; ++r) {
          auto ur = u.row(r);
          for (std::size_t m = 0; m < samples; ++m) {
            auto br = beta.row(r * samples + m);
            const double inv = 1.0 / static_cast<double>(m + 1);
            // Running mean: exact when every sample agrees.
            for (std::size_t j = 0; j < ur.size(); ++j) ur[j] += (g(br[j]) - ur[j]) * inv;
          }
        }
        if (lt != nullptr) lt->beta = std::move(beta);
        break;
      }
    }
    if (lt != nullptr) lt->expect = u;
    Matrix pre;
    Matrix out = finish_upper(layer, lp, std::move(u), lt != nullptr ? &pre : nullptr);
    if (lt != nullptr) lt->pre = std::move(pre);
    return out;
  }
};

void require_admissible(const NetworkSpec& spec, const Params& params, Semantics semantics) {
  require_valid(spec);
  validate_params(spec, params);
  if (semantics == Semantics::Dnn && spec.has_stochastic()) {
    throw ValidationError("Dnn mode requires a network without stochastic layers");
  }
  if (semantics == Semantics::Exact) {
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
      if (spec.layers[l].is_stochastic() && spec.layers[l].width > kMaxEnumWidth) {
        throw ValidationError("exact enumeration needs stochastic width <= 20 (layer " +
                              std::to_string(l) + " has " +
                              std::to_string(spec.layers[l].width) + ")");
      }
    }
  }
}

double log_sum_exp(std::span<const double> v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - mx);
  return mx + std::log(sum);
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

// ---------------------------------------------------------------------------

std::size_t output_dim(const OutputHead& head) {
  return std::visit(overloaded{[](const SoftmaxHead& h) { return h.classes; },
                               [](const GaussianHead& h) { return h.dim; }},
                    head);
}

std::size_t NetworkSpec::fan_in(std::size_t l) const {
  return l == 0 ? input_dim : layers[l - 1].width;
}

std::size_t NetworkSpec::fan_out(std::size_t l) const {
  return l < layers.size() ? layers[l].width : output_dim(output);
}

bool NetworkSpec::has_stochastic() const {
  return std::any_of(layers.begin(), layers.end(), [](const LayerSpec& l) { return l.is_stochastic(); });
}

std::vector<Violation> validate_spec(const NetworkSpec& spec) {
  std::vector<Violation> out;
  auto add = [&](std::size_t l, std::string msg) { out.push_back({l, std::move(msg)}); };
  if (spec.input_dim == 0) add(0, "input_dim must be positive");
  std::visit(overloaded{[&](const SoftmaxHead& h) {
                          if (h.classes < 2) add(spec.layers.size(), "softmax head needs >= 2 classes");
                        },
                        [&](const GaussianHead& h) {
                          if (h.dim == 0) add(spec.layers.size(), "gaussian head needs dim >= 1");
                          if (!positive_finite(h.sigma_y)) add(spec.layers.size(), "sigma_y must be positive");
                        }},
             spec.output);
  const std::size_t n = spec.layers.size();
  for (std::size_t l = 0; l < n; ++l) {
    const LayerSpec& layer = spec.layers[l];
    if (layer.width == 0) add(l, "layer width must be positive");
    if (const auto* st = std::get_if<StochasticBinary>(&layer.kind)) {
      if (l + 1 < n && spec.layers[l + 1].is_stochastic()) {
        add(l, "adjacent stochastic at " + std::to_string(l) + "," + std::to_string(l + 1));
      }
      if (l + 1 == n) add(l, "last hidden layer is stochastic");
      if (const auto* cs = std::get_if<ClippedScaled>(&st->marginal)) {
        if (!positive_finite(cs->alpha)) add(l, "stochastic alpha must be positive");
        if (cs->centered && l + 1 < n) {
          const auto* up = std::get_if<Squash>(&spec.layers[l + 1].kind);
          if (up == nullptr || !up->centered) {
            add(l, "centered stochastic layer needs a centered squash layer above");
          }
        }
      }
    }
    if (const auto* sq = std::get_if<Squash>(&layer.kind)) {
      if (l == 0 || !spec.layers[l - 1].is_stochastic()) {
        add(l, "squash layer not directly above a stochastic layer");
      } else if (sq->centered) {
        const auto& below = std::get<StochasticBinary>(spec.layers[l - 1].kind);
        const auto* cs = std::get_if<ClippedScaled>(&below.marginal);
        if (cs == nullptr || !cs->centered) {
          add(l, "centered squash layer needs a centered stochastic layer below");
        }
      }
      if (!positive_finite(sq->alpha)) add(l, "squash alpha must be positive");
    }
  }
  return out;
}

void require_valid(const NetworkSpec& spec) {
  const auto violations = validate_spec(spec);
  if (violations.empty()) return;
  std::ostringstream os;
  os << "invalid network:";
  for (const auto& v : violations) os << " [layer " << v.layer << "] " << v.message << ";";
  throw ValidationError(os.str());
}

void validate_params(const NetworkSpec& spec, const Params& params) {
  if (params.layers.size() != spec.layers.size() + 1) {
    throw ValidationError("params: expected " + std::to_string(spec.layers.size() + 1) +
                          " layers, got " + std::to_string(params.layers.size()));
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& lp = params.layers[l];
    require_shape(lp.weights, spec.fan_out(l), spec.fan_in(l), "layer weights");
    if (lp.bias.size() != spec.fan_out(l)) throw ValidationError("params: bias length mismatch");
    if (!lp.weights.all_finite() ||
        !std::all_of(lp.bias.begin(), lp.bias.end(), [](double v) { return std::isfinite(v); })) {
      throw NumericalError("params: non-finite value in layer " + std::to_string(l));
    }
  }
}

Params zero_params(const NetworkSpec& spec) {
  Params p;
  for (std::size_t l = 0; l <= spec.layers.size(); ++l) {
    p.layers.push_back({Matrix(spec.fan_out(l), spec.fan_in(l)), std::vector<double>(spec.fan_out(l), 0.0)});
  }
  return p;
}

Params init_params(const NetworkSpec& spec, RngStream rng) {
  Params p = zero_params(spec);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const double fan = static_cast<double>(spec.fan_in(l) + spec.fan_out(l));
    const double limit = std::sqrt(6.0 / fan);
    for (double& w : p.layers[l].weights.values()) w = rng.uniform(-limit, limit);
  }
  return p;
}

std::string mode_name(const ForwardMode& mode) {
  return std::visit(overloaded{[](const mode::Dnn&) { return std::string("dnn"); },
                               [](const mode::DnnStar&) { return std::string("dnn-star"); },
                               [](const mode::ExactEnum&) { return std::string("exact"); },
                               [](const mode::SimplifiedMC&) { return std::string("simplified-mc"); },
                               [](const mode::SfnnPropagate&) { return std::string("sfnn"); }},
                    mode);
}

Matrix stochastic_marginals(const StochasticBinary& layer, const Matrix& preactivation) {
  check_marginals_finite(preactivation);
  Matrix p(preactivation.rows(), preactivation.cols());
  std::visit(overloaded{[&](const DirectSigmoid&) {
                          for (std::size_t i = 0; i < p.size(); ++i) {
                            p.values()[i] = sigmoid(preactivation.values()[i]);
                          }
                        },
                        [&](const ClippedScaled& cs) {
                          const double shift = cs.centered ? 0.5 : 0.0;
                          for (std::size_t i = 0; i < p.size(); ++i) {
                            const double v = cs.alpha * activate(cs.activation, preactivation.values()[i]) + shift;
                            p.values()[i] = std::clamp(v, 0.0, 1.0);
                          }
                        }},
             layer.marginal);
  return p;
}

Matrix stochastic_marginals(const LayerSpec& layer, const Matrix& input, const LayerParams& params) {
  const auto* st = std::get_if<StochasticBinary>(&layer.kind);
  if (st == nullptr) throw ValidationError("stochastic_marginals: layer is not stochastic");
  return stochastic_marginals(*st, kernels::affine(input, params.weights, params.bias));
}

Activations forward_dnn(const NetworkSpec& spec, const Params& params, const Matrix& x) {
  require_admissible(spec, params, Semantics::Dnn);
  return Engine{spec, params, Semantics::Dnn, {}, 0, RngStream()}.run(x, nullptr);
}

Activations forward_dnn_star(const NetworkSpec& spec, const Params& params, const Matrix& x) {
  require_admissible(spec, params, Semantics::DnnStar);
  return Engine{spec, params, Semantics::DnnStar, {}, 0, RngStream()}.run(x, nullptr);
}

Activations forward_simplified_exact(const NetworkSpec& spec, const Params& params, const Matrix& x,
                                     ExactOptions options) {
  require_admissible(spec, params, Semantics::Exact);
  return Engine{spec, params, Semantics::Exact, options, 0, RngStream()}.run(x, nullptr);
}

Activations forward_simplified_mc(const NetworkSpec& spec, const Params& params, const Matrix& x,
                                  std::size_t samples, const RngStream& rng) {
  if (samples == 0) throw ValidationError("Monte Carlo forward needs at least one sample");
  require_admissible(spec, params, Semantics::MonteCarlo);
  return Engine{spec, params, Semantics::MonteCarlo, {}, samples, rng}.run(x, nullptr);
}

ForwardTrace forward_traced(const NetworkSpec& spec, const Params& params, const Matrix& x,
                            const ForwardMode& mode, ExactOptions options) {
  ForwardTrace trace;
  std::visit(overloaded{
                 [&](const mode::Dnn&) {
                   require_admissible(spec, params, Semantics::Dnn);
                   Engine{spec, params, Semantics::Dnn, options, 0, RngStream()}.run(x, &trace);
                 },
                 [&](const mode::DnnStar&) {
                   require_admissible(spec, params, Semantics::DnnStar);
                   Engine{spec, params, Semantics::DnnStar, options, 0, RngStream()}.run(x, &trace);
                 },
                 [&](const mode::ExactEnum&) {
                   require_admissible(spec, params, Semantics::Exact);
                   Engine{spec, params, Semantics::Exact, options, 0, RngStream()}.run(x, &trace);
                 },
                 [&](const mode::SimplifiedMC& m) {
                   if (m.samples == 0) throw ValidationError("Monte Carlo forward needs at least one sample");
                   require_admissible(spec, params, Semantics::MonteCarlo);
                   Engine{spec, params, Semantics::MonteCarlo, options, m.samples, m.rng}.run(x, &trace);
                 },
                 [&](const mode::SfnnPropagate&) {
                   throw ValidationError("forward_traced does not support SFNN sampling");
                 }},
             mode);
  return trace;
}

namespace {

SampledOutputs sample_sfnn(const NetworkSpec& spec, const Params& params, const Matrix& x, std::size_t samples,
                           const RngStream& rng, std::size_t row_offset) {
  if (samples == 0) throw ValidationError("SFNN forward needs at least one sample");
  require_admissible(spec, params, Semantics::MonteCarlo);
  require_shape(x, x.rows(), spec.input_dim, "forward input");
  SampledOutputs result;
  result.samples = samples;
  // Layers below the first stochastic one see identical replicas, so they run
  // once per input row; rows are replicated when the first samples are drawn.
  std::vector<std::size_t> index(x.rows() * samples);
  for (std::size_t i = 0; i < index.size(); ++i) index[i] = i / samples;
  bool replicated = false;
  Matrix h = x;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const LayerSpec& layer = spec.layers[l];
    const LayerParams& lp = params.layers[l];
    Matrix out;
    if (layer.is_stochastic()) {
      Matrix z = kernels::affine(h, lp.weights, lp.bias);
      check_marginals_finite(z);
      Matrix marginals = stochastic_marginals(std::get<StochasticBinary>(layer.kind), z);
      out = draw_samples(marginals, samples, rng.split(l), replicated ? samples : 1, row_offset);
      replicated = true;
    } else if (l > 0 && spec.layers[l - 1].is_stochastic()) {
      out = sampled_upper(layer, lp, kernels::affine(h, lp.weights, lp.bias));
    } else {
      out = activation_apply(std::get<Deterministic>(layer.kind).activation,
                             kernels::affine(h, lp.weights, lp.bias));
    }
    result.hidden.push_back(replicated ? out : out.gather_rows(index));
    h = std::move(out);
  }
  if (!replicated) h = h.gather_rows(index);
  const LayerParams& head = params.layers.back();
  result.output = kernels::affine(h, head.weights, head.bias);
  return result;
}

}  // namespace

SampledOutputs forward_sfnn(const NetworkSpec& spec, const Params& params, const Matrix& x,
                            std::size_t samples, const RngStream& rng) {
  return sample_sfnn(spec, params, x, samples, rng, 0);
}

Activations forward(const NetworkSpec& spec, const Params& params, const Matrix& x,
                    const ForwardMode& mode) {
  return std::visit(
      overloaded{[&](const mode::Dnn&) { return forward_dnn(spec, params, x); },
                 [&](const mode::DnnStar&) { return forward_dnn_star(spec, params, x); },
                 [&](const mode::ExactEnum&) { return forward_simplified_exact(spec, params, x); },
                 [&](const mode::SimplifiedMC& m) {
                   return forward_simplified_mc(spec, params, x, m.samples, m.rng);
                 },
                 [&](const mode::SfnnPropagate&) -> Activations {
                   throw ValidationError("use forward_sfnn for SFNN sampling");
                 }},
      mode);
}

// ---------------------------------------------------------------------------

double head_nll(const OutputHead& head, std::span<const double> output,
                std::span<const double> target) {
  return std::visit(
      overloaded{
          [&](const SoftmaxHead& h) {
            if (target.size() != 1) throw ValidationError("softmax target must be a class index");
            const auto label = static_cast<std::size_t>(target[0]);
            if (target[0] < 0 || label >= h.classes) throw ValidationError("class label out of range");
            // Probabilities are floored at 1e-300.
            const double nll = log_sum_exp(output) - output[label];
            return std::min(nll, -std::log(1e-300));
          },
          [&](const GaussianHead& h) {
            if (target.size() != output.size()) throw ValidationError("gaussian target dimension mismatch");
            double sq = 0.0;
            for (std::size_t i = 0; i < output.size(); ++i) {
              const double d = (target[i] - output[i]) / h.sigma_y;
              sq += d * d;
            }
            return 0.5 * sq +
                   static_cast<double>(output.size()) * std::log(h.sigma_y * std::sqrt(2.0 * std::numbers::pi));
          }},
      head);
}

Evaluation evaluate(const NetworkSpec& spec, const Params& params, const Matrix& x,
                    const Matrix& targets, const ForwardMode& mode) {
  if (targets.rows() != x.rows()) throw ValidationError("evaluate: row count mismatch");
  const bool classify = std::holds_alternative<SoftmaxHead>(spec.output);
  Evaluation ev;
  ev.nll.resize(x.rows());
  std::size_t errors = 0;
  // Sampled modes materialize rows * M * width values per layer; keep that
  // near 2^22 by evaluating in row chunks. Sample streams are keyed by the
  // global row index, so chunking does not change the result.
  std::size_t widest = output_dim(spec.output);
  for (const auto& l : spec.layers) widest = std::max(widest, l.width);
  std::size_t per_row = widest;
  if (const auto* sf = std::get_if<mode::SfnnPropagate>(&mode)) per_row *= sf->samples;
  if (const auto* mc = std::get_if<mode::SimplifiedMC>(&mode)) per_row *= mc->samples;
  const std::size_t chunk = std::max<std::size_t>(1, (std::size_t{1} << 22) / std::max<std::size_t>(1, per_row));
  for (std::size_t first = 0; first < x.rows(); first += chunk) {
    const std::size_t n = std::min(chunk, x.rows() - first);
    const Matrix xc = x.slice_rows(first, n);
    if (const auto* sf = std::get_if<mode::SfnnPropagate>(&mode)) {
      if (sf->samples == 0) throw ValidationError("SFNN forward needs at least one sample");
      const SampledOutputs so = sample_sfnn(spec, params, xc, sf->samples, sf->rng, first);
      const std::size_t m = so.samples;
      std::vector<double> logp(m);
      std::vector<double> mean_prob(classify ? output_dim(spec.output) : 0);
      for (std::size_t r = 0; r < n; ++r) {
        std::fill(mean_prob.begin(), mean_prob.end(), 0.0);
        for (std::size_t k = 0; k < m; ++k) {
          auto out = so.output.row(r * m + k);
          logp[k] = -head_nll(spec.output, out, targets.row(first + r));
          if (classify) {
            const double lse = log_sum_exp(out);
            for (std::size_t c = 0; c < mean_prob.size(); ++c) mean_prob[c] += std::exp(out[c] - lse);
          }
        }
        ev.nll[first + r] = -(log_sum_exp(logp) - std::log(static_cast<double>(m)));
        if (classify && argmax(mean_prob) != static_cast<std::size_t>(targets(first + r, 0))) ++errors;
      }
    } else {
      Activations acts;
      if (const auto* mc = std::get_if<mode::SimplifiedMC>(&mode)) {
        if (mc->samples == 0) throw ValidationError("Monte Carlo forward needs at least one sample");
        require_admissible(spec, params, Semantics::MonteCarlo);
        acts = Engine{spec, params, Semantics::MonteCarlo, {}, mc->samples, mc->rng, first}.run(xc, nullptr);
      } else {
        acts = forward(spec, params, xc, mode);
      }
      for (std::size_t r = 0; r < n; ++r) {
        ev.nll[first + r] = head_nll(spec.output, acts.output.row(r), targets.row(first + r));
        if (classify && argmax(acts.output.row(r)) != static_cast<std::size_t>(targets(first + r, 0))) ++errors;
      }
    }
  }
  double sum = 0.0;
  for (double v : ev.nll) sum += v;
  ev.mean_nll = x.rows() == 0 ? 0.0 : sum / static_cast<double>(x.rows());
  if (classify && x.rows() > 0) ev.error_rate = static_cast<double>(errors) / static_cast<double>(x.rows());
  return ev;
}

std::vector<double> predict_nll(const NetworkSpec& spec, const Params& params, const Matrix& x,
                                const Matrix& targets, const ForwardMode& mode) {
  return evaluate(spec, params, x, targets, mode).nll;
}

}  // namespace sfnn
