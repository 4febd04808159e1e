#include "sfnn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

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

enum class Kind { Dnn, DnnStar, Exact, MonteCarlo };

// g and g' for the quantity averaged in a layer above a stochastic one.
struct Upper {
  const LayerSpec* layer;
  bool linearize;

  double value(double beta) const {
    if (const auto* sq = std::get_if<Squash>(&layer->kind)) {
      const auto c = squash_constants(sq->squash);
      return linearize ? c.sp0 * beta : squash(sq->squash, beta) - c.s0;
    }
    return activate(std::get<Deterministic>(layer->kind).activation, beta);
  }
  double slope(double beta) const {
    if (const auto* sq = std::get_if<Squash>(&layer->kind)) {
      return linearize ? squash_constants(sq->squash).sp0 : squash_derivative(sq->squash, beta);
    }
    return activate_derivative(std::get<Deterministic>(layer->kind).activation, beta);
  }
};

void add_into(std::vector<double>& dst, const std::vector<double>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Enumerates binary configurations of one row. When `free_unit` is set, that
// unit is visited in both states with factors +1 (on) and -1 (off), which
// yields d E / d p_free. Other units with probability 0 or 1 are pruned.
class ConfigWalker {
 public:
  ConfigWalker(std::span<const double> p, const Matrix& w, std::span<const double> b)
      : p_(p), w_(w), b_(b), n_(p.size()), width_(w.rows()),
        partial_((n_ + 1) * width_, 0.0), on_(n_, 0) {}

  template <class Leaf>
  void run(std::size_t free_unit, Leaf&& leaf) {
    free_ = free_unit;
    std::fill(partial_.begin(), partial_.begin() + static_cast<std::ptrdiff_t>(width_), 0.0);
    beta_.assign(width_, 0.0);
    visit(0, 1.0, leaf);
  }

  std::span<const char> on() const { return on_; }

 private:
  template <class Leaf>
  void visit(std::size_t depth, double weight, Leaf& leaf) {
    double* acc = partial_.data() + depth * width_;
    if (depth == n_) {
      for (std::size_t j = 0; j < width_; ++j) beta_[j] = acc[j] + b_[j];
      leaf(weight, std::span<const double>(beta_));
      return;
    }
    const double p = p_[depth];
    const bool is_free = depth == free_;
    double* next = acc + width_;
    if (is_free || p < 1.0) {
      std::copy(acc, acc + width_, next);
      on_[depth] = 0;
      visit(depth + 1, is_free ? -weight : weight * (1.0 - p), leaf);
    }
    if (is_free || p > 0.0) {
      for (std::size_t j = 0; j < width_; ++j) next[j] = acc[j] + w_(j, depth);
      on_[depth] = 1;
      visit(depth + 1, weight * (is_free ? 1.0 : p), leaf);
      on_[depth] = 0;
    }
  }

  std::span<const double> p_;
  const Matrix& w_;
  std::span<const double> b_;
  std::size_t n_;
  std::size_t width_;
  std::size_t free_ = std::numeric_limits<std::size_t>::max();
  std::vector<double> partial_;
  std::vector<double> beta_;
  std::vector<char> on_;
};

// d marginal / d pre-activation.
Matrix marginal_slope(const StochasticBinary& st, const Matrix& pre, const Matrix& p) {
  Matrix out(pre.rows(), pre.cols());
  std::visit(overloaded{[&](const DirectSigmoid&) {
                          for (std::size_t i = 0; i < out.size(); ++i) {
                            const double q = p.values()[i];
                            out.values()[i] = q * (1.0 - q);
                          }
                        },
                        [&](const ClippedScaled& cs) {
                          const double shift = cs.centered ? 0.5 : 0.0;
                          for (std::size_t i = 0; i < out.size(); ++i) {
                            const double z = pre.values()[i];
                            const double v = cs.alpha * activate(cs.activation, z) + shift;
                            // The clamp passes no gradient outside (0, 1).
                            out.values()[i] = (v > 0.0 && v < 1.0)
                                                  ? cs.alpha * activate_derivative(cs.activation, z)
                                                  : 0.0;
                          }
                        }},
             st.marginal);
  return out;
}

void hadamard_inplace(Matrix& a, const Matrix& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a.values()[i] *= b.values()[i];
}

// Gradients of a layer above a stochastic one. `du` is dL/du where u is the
// averaged quantity; returns dL/dP for the marginals below.
Matrix upper_backward(Kind kind, const Upper& g, const LayerTrace& lower, const LayerTrace& lt,
                      const LayerParams& lp, const Matrix& du, std::size_t samples,
                      LayerParams& out) {
  const Matrix& p = lower.post;
  const std::size_t rows = p.rows();
  const std::size_t width = lp.weights.rows();
  switch (kind) {
    case Kind::Dnn:
      throw ValidationError("Dnn gradient cannot pass through stochastic layers");
    case Kind::DnnStar: {
      Matrix d = kernels::affine(p, lp.weights, lp.bias);
      for (std::size_t i = 0; i < d.size(); ++i) d.values()[i] = du.values()[i] * g.slope(d.values()[i]);
      out.weights = kernels::matmul_tn(d, p);
      out.bias = kernels::column_sums(d);
      return kernels::matmul(d, lp.weights);
    }
    case Kind::MonteCarlo: {
      const Matrix& beta = lt.beta;
      Matrix d(beta.rows(), beta.cols());
      Matrix s(rows, width);
      const double inv = 1.0 / static_cast<double>(samples);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t m = 0; m < samples; ++m) {
          auto br = beta.row(r * samples + m);
          auto dr = d.row(r * samples + m);
          for (std::size_t j = 0; j < width; ++j) {
            dr[j] = du(r, j) * g.slope(br[j]) * inv;
            s(r, j) += dr[j];
          }
        }
      }
      out.weights = kernels::matmul_tn(d, lower.samples);
      out.bias = kernels::column_sums(d);
      return kernels::matmul(s, lp.weights);
    }
    case Kind::Exact: {
      const std::size_t n = p.cols();
      std::vector<std::vector<double>> gw(rows), gb(rows);
      Matrix dp(rows, n);
      const auto total = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(dynamic)
      for (std::ptrdiff_t ri = 0; ri < total; ++ri) {
        const auto r = static_cast<std::size_t>(ri);
        auto dur = du.row(r);
        ConfigWalker walker(p.row(r), lp.weights, lp.bias);
        std::vector<double> w_acc(width * n, 0.0), b_acc(width, 0.0);
        walker.run(std::numeric_limits<std::size_t>::max(), [&](double weight, std::span<const double> beta) {
          const auto on = walker.on();
          for (std::size_t j = 0; j < width; ++j) {
            const double t = weight * dur[j] * g.slope(beta[j]);
            b_acc[j] += t;
            for (std::size_t i = 0; i < n; ++i) {
              if (on[i]) w_acc[j * n + i] += t;
            }
          }
        });
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          walker.run(i, [&](double weight, std::span<const double> beta) {
            double v = 0.0;
            for (std::size_t j = 0; j < width; ++j) v += dur[j] * g.value(beta[j]);
            acc += weight * v;
          });
          dp(r, i) = acc;
        }
        gw[r] = std::move(w_acc);
        gb[r] = std::move(b_acc);
      }
      out.weights = Matrix(width, n);
      out.bias.assign(width, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        add_into(out.weights.values(), gw[r]);
        add_into(out.bias, gb[r]);
      }
      return dp;
    }
  }
  return {};
}

Kind kind_of(const ForwardMode& mode) {
  return std::visit(overloaded{[](const mode::Dnn&) { return Kind::Dnn; },
                               [](const mode::DnnStar&) { return Kind::DnnStar; },
                               [](const mode::ExactEnum&) { return Kind::Exact; },
                               [](const mode::SimplifiedMC&) { return Kind::MonteCarlo; },
                               [](const mode::SfnnPropagate&) -> Kind {
                                 throw ValidationError("no gradient is defined for SFNN sampling mode");
                               }},
                    mode);
}

GradResult backward(const NetworkSpec& spec, const Params& params, const Matrix& x, const Matrix& y,
                    const ForwardMode& mode, ExactOptions options) {
  const Kind kind = kind_of(mode);
  const ForwardTrace trace = forward_traced(spec, params, x, mode, options);
  LossGrad lg = loss_and_grad(spec.output, trace.output, y);
  GradResult result{lg.loss, zero_params(spec)};
  const std::size_t depth = spec.layers.size();

  Matrix delta = std::move(lg.grad);
  {
    const Matrix& top = depth == 0 ? x : trace.layers.back().post;
    auto& out = result.grads.layers[depth];
    out.weights = kernels::matmul_tn(delta, top);
    out.bias = kernels::column_sums(delta);
    if (depth > 0) delta = kernels::matmul(delta, params.layers[depth].weights);
  }
  for (std::size_t l = depth; l-- > 0;) {
    const LayerSpec& layer = spec.layers[l];
    const LayerParams& lp = params.layers[l];
    const LayerTrace& lt = trace.layers[l];
    LayerParams& out = result.grads.layers[l];
    Matrix dz;
    if (layer.is_stochastic()) {
      const auto& st = std::get<StochasticBinary>(layer.kind);
      dz = std::move(delta);
      hadamard_inplace(dz, marginal_slope(st, lt.pre, lt.post));
    } else if (l > 0 && spec.layers[l - 1].is_stochastic()) {
      Matrix du = std::move(delta);
      const auto* sq = std::get_if<Squash>(&layer.kind);
      if (sq != nullptr) {
        for (std::size_t i = 0; i < du.size(); ++i) {
          du.values()[i] *= sq->alpha * activate_derivative(sq->activation, lt.pre.values()[i]);
        }
      }
      const Upper g{&layer, options.linearize_squash};
      const std::size_t samples = kind == Kind::MonteCarlo ? trace.samples : 0;
      delta = upper_backward(kind, g, trace.layers[l - 1], lt, lp, du, samples, out);
      if (sq != nullptr && sq->centered) {
        // u - c with c_j = s'(0)/2 * sum_i W_ji.
        const double half_slope = 0.5 * squash_constants(sq->squash).sp0;
        const auto du_sum = kernels::column_sums(du);
        for (std::size_t j = 0; j < out.weights.rows(); ++j) {
          for (double& v : out.weights.row(j)) v -= half_slope * du_sum[j];
        }
      }
      continue;
    } else {
      dz = std::move(delta);
      hadamard_inplace(dz, activation_derivative(std::get<Deterministic>(layer.kind).activation, lt.pre));
    }
    out.weights = kernels::matmul_tn(dz, lt.input);
    out.bias = kernels::column_sums(dz);
    if (l > 0) delta = kernels::matmul(dz, lp.weights);
  }
  return result;
}

bool all_finite(const Params& p) {
  for (const auto& l : p.layers) {
    if (!l.weights.all_finite()) return false;
    for (double b : l.bias) {
      if (!std::isfinite(b)) return false;
    }
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------

LossGrad loss_and_grad(const OutputHead& head, const Matrix& prediction, const Matrix& targets) {
  const std::size_t n = prediction.rows();
  if (targets.rows() != n) throw ValidationError("loss: row count mismatch");
  require_shape(prediction, n, output_dim(head), "loss prediction");
  LossGrad lg{0.0, Matrix(n, prediction.cols())};
  if (n == 0) return lg;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    auto o = prediction.row(r);
    auto g = lg.grad.row(r);
    lg.loss += head_nll(head, o, targets.row(r));
    std::visit(overloaded{[&](const SoftmaxHead&) {
                            double mx = *std::max_element(o.begin(), o.end());
                            double sum = 0.0;
                            for (double v : o) sum += std::exp(v - mx);
                            for (std::size_t c = 0; c < o.size(); ++c) g[c] = std::exp(o[c] - mx) / sum;
                            g[static_cast<std::size_t>(targets(r, 0))] -= 1.0;
                          },
                          [&](const GaussianHead& h) {
                            const double inv_var = 1.0 / (h.sigma_y * h.sigma_y);
                            for (std::size_t c = 0; c < o.size(); ++c) g[c] = (o[c] - targets(r, c)) * inv_var;
                          }},
               head);
    for (double& v : g) v *= inv_n;
  }
  lg.loss *= inv_n;
  return lg;
}

GradResult backprop_dnn(const NetworkSpec& spec, const Params& params, const Matrix& x, const Matrix& y) {
  return backward(spec, params, x, y, mode::Dnn{}, {});
}

GradResult estimator_grad_simplified(const NetworkSpec& spec, const Params& params, const Matrix& x,
                                     const Matrix& y, std::size_t samples, const RngStream& rng) {
  return backward(spec, params, x, y, mode::SimplifiedMC{samples, rng}, {});
}

GradResult exact_grad_simplified(const NetworkSpec& spec, const Params& params, const Matrix& x,
                                 const Matrix& y, ExactOptions options) {
  return backward(spec, params, x, y, mode::ExactEnum{}, options);
}

GradResult grad_dnn_star(const NetworkSpec& spec, const Params& params, const Matrix& x, const Matrix& y) {
  return backward(spec, params, x, y, mode::DnnStar{}, {});
}

GradResult compute_gradient(const NetworkSpec& spec, const Params& params, const Matrix& x,
                            const Matrix& y, const ForwardMode& mode) {
  return backward(spec, params, x, y, mode, {});
}

// ---------------------------------------------------------------------------

AdamState adam_init(const Params& params) {
  AdamState s;
  s.m.layers.reserve(params.layers.size());
  for (const auto& l : params.layers) {
    s.m.layers.push_back({Matrix(l.weights.rows(), l.weights.cols()), std::vector<double>(l.bias.size(), 0.0)});
  }
  s.v = s.m;
  return s;
}

void adam_step(AdamState& state, Params& params, const Params& grads, double lr) {
  if (state.m.layers.size() != params.layers.size() || grads.layers.size() != params.layers.size()) {
    throw ValidationError("adam_step: parameter structure mismatch");
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v) {
    if (g.size() != p.size() || m.size() != p.size()) throw ValidationError("adam_step: shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      p[i] -= lr * mh / (std::sqrt(vh) + state.eps);
    }
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].weights.values(), grads.layers[l].weights.values(), state.m.layers[l].weights.values(),
           state.v.layers[l].weights.values());
    update(params.layers[l].bias, grads.layers[l].bias, state.m.layers[l].bias, state.v.layers[l].bias);
  }
}

// ---------------------------------------------------------------------------

std::string_view to_string(TrainMode m) { return m == TrainMode::Dnn ? "dnn" : "simplified-mc"; }

std::string_view to_string(EvalMode m) {
  switch (m) {
    case EvalMode::Dnn: return "dnn";
    case EvalMode::DnnStar: return "dnn-star";
    case EvalMode::SimplifiedMC: return "simplified-mc";
    case EvalMode::Sfnn: return "sfnn";
  }
  return "";
}

TrainMode parse_train_mode(std::string_view s) {
  if (s == "dnn") return TrainMode::Dnn;
  if (s == "simplified-mc") return TrainMode::SimplifiedMC;
  throw ValidationError("unknown training mode: " + std::string(s));
}

EvalMode parse_eval_mode(std::string_view s) {
  for (EvalMode m : {EvalMode::Dnn, EvalMode::DnnStar, EvalMode::SimplifiedMC, EvalMode::Sfnn}) {
    if (to_string(m) == s) return m;
  }
  throw ValidationError("unknown evaluation mode: " + std::string(s));
}

std::string to_jsonl(const MetricRecord& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["split"] = r.split;
  j["loss"] = r.loss;
  if (r.error_rate) j["error_rate"] = *r.error_rate;
  if (r.nll) j["nll"] = *r.nll;
  if (r.wall_ms) j["wall_ms"] = *r.wall_ms;
  return j.dump();
}

ForwardMode make_forward_mode(EvalMode mode, std::size_t samples, const RngStream& rng) {
  switch (mode) {
    case EvalMode::Dnn: return mode::Dnn{};
    case EvalMode::DnnStar: return mode::DnnStar{};
    case EvalMode::SimplifiedMC: return mode::SimplifiedMC{samples, rng};
    case EvalMode::Sfnn: return mode::SfnnPropagate{samples, rng};
  }
  return mode::Dnn{};
}

TrainResult train(const NetworkSpec& spec, const Params& init, const Matrix& x, const Matrix& y,
                  const Matrix& val_x, const Matrix& val_y, const TrainConfig& config) {
  require_valid(spec);
  validate_params(spec, init);
  if (config.batch_size == 0) throw ValidationError("batch_size must be at least 1");
  if (config.samples_train == 0 || config.samples_eval == 0) throw ValidationError("sample counts must be at least 1");
  if (config.mode == TrainMode::Dnn && spec.has_stochastic()) {
    throw ValidationError("dnn training mode requires a network without stochastic layers");
  }
  if (x.rows() != y.rows() || val_x.rows() != val_y.rows()) throw ValidationError("train: row count mismatch");
  require_shape(x, x.rows(), spec.input_dim, "training inputs");

  using Clock = std::chrono::steady_clock;
  const RngStream base(config.seed);
  const RngStream shuffle_rng = base.split(0);
  const RngStream sample_rng = base.split(1);
  const RngStream eval_rng = base.split(2);

  TrainResult result;
  result.params = init;
  Params params = init;
  AdamState adam = adam_init(params);
  const bool has_val = val_x.rows() > 0;
  double best_score = std::numeric_limits<double>::infinity();

  auto validate = [&](std::size_t epoch, double wall_ms) {
    const Evaluation ev = evaluate(spec, params, val_x, val_y,
                                   make_forward_mode(config.val_mode, config.samples_eval, eval_rng.split(epoch)));
    MetricRecord rec{epoch, "val", ev.mean_nll, ev.error_rate, ev.mean_nll, std::nullopt};
    if (config.record_wall_time) rec.wall_ms = wall_ms;
    result.metrics.push_back(rec);
    const double score = ev.error_rate.value_or(ev.mean_nll);
    if (score < best_score) {
      best_score = score;
      result.params = params;
      result.best_epoch = epoch;
    }
  };

  const auto start = Clock::now();
  auto elapsed_ms = [&] { return std::chrono::duration<double, std::milli>(Clock::now() - start).count(); };
  if (has_val) validate(0, elapsed_ms());

  const std::size_t n = x.rows();
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = config.base_lr * std::pow(config.lr_decay, static_cast<double>(epoch - 1));
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream shuffle = shuffle_rng.split(epoch);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double loss_sum = 0.0;
    std::size_t batch = 0;
    for (std::size_t first = 0; first < n; first += config.batch_size, ++batch) {
      const std::size_t count = std::min(config.batch_size, n - first);
      const std::span<const std::size_t> idx(order.data() + first, count);
      const Matrix bx = x.gather_rows(idx);
      const Matrix by = y.gather_rows(idx);
      GradResult gr = config.mode == TrainMode::Dnn
                          ? backprop_dnn(spec, params, bx, by)
                          : estimator_grad_simplified(spec, params, bx, by, config.samples_train,
                                                      sample_rng.split(epoch).split(batch));
      if (!std::isfinite(gr.loss) || !all_finite(gr.grads)) {
        throw NumericalError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch) + " (loss " + std::to_string(gr.loss) +
                             "); lower the learning rate");
      }
      loss_sum += gr.loss * static_cast<double>(count);
      adam_step(adam, params, gr.grads, lr);
    }
    if (!all_finite(params)) {
      throw NumericalError("training diverged at epoch " + std::to_string(epoch) + ": non-finite parameters");
    }
    MetricRecord rec{epoch, "train", n == 0 ? 0.0 : loss_sum / static_cast<double>(n), std::nullopt, std::nullopt,
                     std::nullopt};
    if (config.record_wall_time) rec.wall_ms = elapsed_ms();
    result.metrics.push_back(rec);
    if (has_val) validate(epoch, elapsed_ms());
  }
  if (!has_val) {
    result.params = params;
    result.best_epoch = config.epochs;
  }
  return result;
}

LrSearchResult select_learning_rate(const NetworkSpec& spec, const Params& init, const Matrix& x,
                                    const Matrix& y, const Matrix& val_x, const Matrix& val_y,
                                    TrainConfig config, const std::vector<double>& grid) {
  if (val_x.rows() == 0) throw ValidationError("learning-rate selection needs a validation set");
  if (grid.empty()) throw ValidationError("learning-rate grid is empty");
  LrSearchResult out;
  double best = std::numeric_limits<double>::infinity();
  for (double lr : grid) {
    config.base_lr = lr;
    TrainResult tr = train(spec, init, x, y, val_x, val_y, config);
    double score = std::numeric_limits<double>::infinity();
    for (const auto& m : tr.metrics) {
      if (m.split == "val" && m.epoch == tr.best_epoch) score = m.error_rate.value_or(m.loss);
    }
    out.scores.emplace_back(lr, score);
    if (score < best) {
      best = score;
      out.best_lr = lr;
      out.best = std::move(tr);
    }
  }
  return out;
}

}  // namespace sfnn
