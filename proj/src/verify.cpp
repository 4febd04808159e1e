#include "sfnn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "sfnn/error.hpp"
#include "sfnn/training.hpp"

namespace sfnn {

namespace {

struct Coord {
  std::size_t layer;
  bool bias;
  std::size_t index;
};

double& at(Params& p, const Coord& c) {
  return c.bias ? p.layers[c.layer].bias[c.index] : p.layers[c.layer].weights.values()[c.index];
}

double at(const Params& p, const Coord& c) {
  return c.bias ? p.layers[c.layer].bias[c.index] : p.layers[c.layer].weights.values()[c.index];
}

std::vector<Coord> all_coords(const Params& p) {
  std::vector<Coord> out;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    for (std::size_t i = 0; i < p.layers[l].weights.size(); ++i) out.push_back({l, false, i});
    for (std::size_t i = 0; i < p.layers[l].bias.size(); ++i) out.push_back({l, true, i});
  }
  return out;
}

std::vector<double> flatten(const Params& p) {
  std::vector<double> out;
  for (const auto& l : p.layers) {
    out.insert(out.end(), l.weights.values().begin(), l.weights.values().end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

double objective(const NetworkSpec& spec, const Params& params, const Matrix& x, const Matrix& y,
                 const ForwardMode& mode) {
  return loss_and_grad(spec.output, forward(spec, params, x, mode).output, y).loss;
}

std::string format_gamma(double g) {
  std::ostringstream os;
  os << "gamma=" << g;
  return os.str();
}

}  // namespace

std::string to_jsonl(const CheckReport& r) {
  nlohmann::json j;
  j["check"] = r.name;
  j["pass"] = r.pass;
  j["measured"] = std::isfinite(r.measured) ? nlohmann::json(r.measured) : nlohmann::json(nullptr);
  j["bound"] = r.bound;
  j["seeds"] = r.seeds;
  nlohmann::json values = nlohmann::json::object();
  for (const auto& [k, v] : r.values) values[k] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  j["values"] = values;
  return j.dump();
}

double enum_expectation_oracle(std::span<const double> p, std::span<const double> w, double b, SquashKind s) {
  const std::size_t n = p.size();
  if (n > kMaxEnumWidth) throw ValidationError("enumeration oracle: dimension above 20");
  if (w.size() != n) throw ValidationError("enumeration oracle: weight length mismatch");
  double total = 0.0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double prob = 1.0;
    double beta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if ((mask >> i) & 1U) {
        prob *= p[i];
        beta += w[i];
      } else {
        prob *= 1.0 - p[i];
      }
    }
    if (prob == 0.0) continue;
    total += prob * squash(s, beta + b);
  }
  return total;
}

std::pair<NetworkSpec, Params> sample_small_dnn(RngStream rng, ActivationKind activation,
                                                const SmallNetOptions& options) {
  auto draw = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng.below(hi - lo + 1)); };
  NetworkSpec spec;
  spec.input_dim = draw(2, std::max<std::size_t>(2, options.max_input));
  spec.output = GaussianHead{1, 0.05};
  spec.layers.push_back({Deterministic{activation}, draw(2, std::max<std::size_t>(2, options.max_stochastic))});
  spec.layers.push_back({Deterministic{activation}, draw(2, std::max<std::size_t>(2, options.max_upper))});
  for (std::size_t i = 0; i < options.extra_layers; ++i) {
    spec.layers.push_back({Deterministic{activation}, draw(2, std::max<std::size_t>(2, options.max_upper))});
  }
  Params params = init_params(spec, rng.split(1));
  RngStream brng = rng.split(2);
  for (auto& l : params.layers) {
    for (double& b : l.bias) b = brng.uniform(-options.bias_scale, options.bias_scale);
  }
  return {spec, params};
}

std::pair<NetworkSpec, Params> sample_small_simplified(RngStream rng, bool centered,
                                                       const SmallNetOptions& options) {
  auto draw = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng.below(hi - lo + 1)); };
  NetworkSpec spec;
  spec.input_dim = draw(2, std::max<std::size_t>(2, options.max_input));
  spec.output = GaussianHead{1, 0.1};
  const StochasticBinary lower = centered ? StochasticBinary{ClippedScaled{0.5, ActivationKind::Tanh, true}}
                                          : StochasticBinary{DirectSigmoid{}};
  spec.layers.push_back({lower, draw(2, std::max<std::size_t>(2, options.max_stochastic))});
  spec.layers.push_back({Squash{2.0, centered ? SquashKind::Tanh : SquashKind::Sigmoid, ActivationKind::Tanh, centered},
                         draw(2, std::max<std::size_t>(2, options.max_upper))});
  Params params = init_params(spec, rng.split(1));
  RngStream brng = rng.split(2);
  for (auto& l : params.layers) {
    for (double& b : l.bias) b = brng.uniform(-options.bias_scale, options.bias_scale);
  }
  return {spec, params};
}

Matrix sample_inputs(RngStream rng, std::size_t rows, std::size_t dim) {
  Matrix x(rows, dim);
  for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);
  return x;
}

CheckReport check_theorem1_bound(const std::vector<std::uint64_t>& seeds, const std::vector<double>& gamma_uppers,
                                 std::size_t data_rows, const SmallNetOptions& options) {
  CheckReport rep;
  rep.name = "theorem1";
  rep.seeds = seeds;
  rep.bound = 1.0;
  std::size_t passed = 0;
  std::size_t total = 0;
  double worst = 0.0;
  for (std::uint64_t seed : seeds) {
    const RngStream rng(seed);
    const ActivationKind act = seed % 2 == 0 ? ActivationKind::ReLU : ActivationKind::Sigmoid;
    const auto [spec, params] = sample_small_dnn(rng, act, options);
    const Matrix data = sample_inputs(rng.split(3), data_rows, spec.input_dim);
    for (double g : gamma_uppers) {
      ++total;
      TransferConfig cfg;
      cfg.kind = TransferKind::Theorem1;
      cfg.gamma_upper = {g};
      const TransferResult tr = transform_theorem1(spec, params, data, cfg);
      const double gap = activation_gap(spec, params, tr.spec, tr.params, data, 1).max_abs;
      const double bound = tr.report.layers[0].bound;
      // 1e-12 absorbs rounding when the bound itself is zero.
      const bool ok = gap <= bound + 1e-12;
      if (ok) ++passed;
      const double ratio = bound > 0.0 ? gap / bound : (ok ? 0.0 : std::numeric_limits<double>::infinity());
      worst = std::max(worst, ratio);
    }
  }
  rep.measured = worst;
  rep.pass = passed == total;
  rep.values = {{"passed", static_cast<double>(passed)}, {"total", static_cast<double>(total)}};
  return rep;
}

CheckReport gamma_sweep(const NetworkSpec& spec, const Params& params, const Matrix& data,
                        const std::vector<double>& gammas, TransferKind kind, std::size_t layer, double min_ratio) {
  if (gammas.empty()) throw ValidationError("gamma sweep needs at least one gamma");
  if (!std::is_sorted(gammas.begin(), gammas.end())) throw ValidationError("gamma sweep needs ascending gammas");
  CheckReport rep;
  rep.name = "gamma-sweep";
  rep.bound = min_ratio;
  std::vector<double> losses;
  for (double g : gammas) {
    TransferConfig cfg;
    cfg.kind = kind;
    cfg.layers = {layer};
    cfg.gamma_upper = {g};
    const TransferResult tr = transfer(spec, params, data, cfg);
    losses.push_back(transfer_loss(spec, params, tr.spec, tr.params, data, layer + 1));
    rep.values.emplace_back(format_gamma(g), losses.back());
  }
  bool monotone = true;
  for (std::size_t i = 1; i < losses.size(); ++i) monotone = monotone && losses[i] <= losses[i - 1];
  const double ratio = losses.back() > 0.0 ? losses.front() / losses.back()
                                           : (losses.front() > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
  rep.measured = ratio;
  const bool all_zero = std::all_of(losses.begin(), losses.end(), [](double v) { return v == 0.0; });
  rep.pass = monotone && (all_zero || ratio >= min_ratio);
  rep.values.emplace_back("monotone", monotone ? 1.0 : 0.0);
  return rep;
}

CheckReport grad_check(const NetworkSpec& spec, const Params& params, const Matrix& x, const Matrix& y,
                       const ForwardMode& mode, double tolerance, std::size_t coords, RngStream rng) {
  constexpr double kStep = 1e-5;
  const GradResult analytic = compute_gradient(spec, params, x, y, mode);
  std::vector<Coord> pool = all_coords(params);
  if (coords < pool.size()) {
    for (std::size_t i = 0; i < coords; ++i) {
      std::swap(pool[i], pool[i + static_cast<std::size_t>(rng.below(pool.size() - i))]);
    }
    pool.resize(coords);
  }
  CheckReport rep;
  rep.name = "gradcheck";
  rep.bound = tolerance;
  Params probe = params;
  double worst = 0.0;
  double worst_abs = 0.0;
  for (const Coord& c : pool) {
    const double orig = at(params, c);
    at(probe, c) = orig + kStep;
    const double up = objective(spec, probe, x, y, mode);
    at(probe, c) = orig - kStep;
    const double down = objective(spec, probe, x, y, mode);
    at(probe, c) = orig;
    const double fd = (up - down) / (2.0 * kStep);
    const double a = at(analytic.grads, c);
    const double diff = std::abs(a - fd);
    worst_abs = std::max(worst_abs, diff);
    // Both sides below 1e-8 count as an exact zero.
    const double scale = std::max(std::abs(a), std::abs(fd));
    const double rel = scale <= 1e-8 ? 0.0 : diff / scale;
    worst = std::max(worst, rel);
  }
  rep.measured = worst;
  rep.pass = worst <= tolerance;
  rep.values = {{"coordinates", static_cast<double>(pool.size())}, {"max_abs_error", worst_abs}};
  return rep;
}

CheckReport estimator_cosine(const NetworkSpec& spec, const Params& params, const Matrix& x, const Matrix& y,
                             std::size_t samples, const RngStream& rng, double min_cosine) {
  const auto est = flatten(estimator_grad_simplified(spec, params, x, y, samples, rng).grads);
  const auto exact = flatten(exact_grad_simplified(spec, params, x, y).grads);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    dot += est[i] * exact[i];
    na += est[i] * est[i];
    nb += exact[i] * exact[i];
  }
  CheckReport rep;
  rep.name = "estimator-cosine";
  rep.bound = min_cosine;
  rep.seeds = {rng.seed()};
  rep.measured = (na > 0.0 && nb > 0.0) ? dot / std::sqrt(na * nb) : 0.0;
  rep.pass = rep.measured >= min_cosine;
  rep.values = {{"samples", static_cast<double>(samples)}};
  return rep;
}

CheckReport mc_bias_test(const NetworkSpec& spec, const Params& params, const Matrix& x, std::size_t samples,
                         std::size_t runs, const RngStream& rng) {
  if (runs < 2) throw ValidationError("mc bias test needs at least two runs");
  std::size_t l = 0;
  while (l < spec.layers.size() && !spec.layers[l].is_stochastic()) ++l;
  if (l + 1 >= spec.layers.size()) throw ValidationError("mc bias test needs a stochastic layer");
  if (spec.layers[l].width > 12) throw ValidationError("mc bias test needs stochastic width <= 12");
  const auto* sq = std::get_if<Squash>(&spec.layers[l + 1].kind);
  if (sq == nullptr) throw ValidationError("mc bias test needs a squash layer above the stochastic layer");
  const Matrix row = x.slice_rows(0, 1);

  const ForwardTrace ref = forward_traced(spec, params, row, mode::SimplifiedMC{1, rng});
  const auto p = ref.layers[l].post.row(0);
  const LayerParams& up = params.layers[l + 1];
  const double s0 = squash_constants(sq->squash).s0;
  const std::size_t width = spec.layers[l + 1].width;
  std::vector<double> exact(width);
  for (std::size_t j = 0; j < width; ++j) {
    exact[j] = enum_expectation_oracle(p, up.weights.row(j), up.bias[j], sq->squash) - s0;
  }

  std::vector<double> mean(width, 0.0), m2(width, 0.0);
  for (std::size_t r = 0; r < runs; ++r) {
    const ForwardTrace tr = forward_traced(spec, params, row, mode::SimplifiedMC{samples, rng.split(r + 1)});
    const auto u = tr.layers[l + 1].expect.row(0);
    for (std::size_t j = 0; j < width; ++j) {
      const double d = u[j] - mean[j];
      mean[j] += d / static_cast<double>(r + 1);
      m2[j] += d * (u[j] - mean[j]);
    }
  }
  CheckReport rep;
  rep.name = "mc-bias";
  rep.bound = 4.0;
  rep.seeds = {rng.seed()};
  double worst = 0.0;
  for (std::size_t j = 0; j < width; ++j) {
    const double sd = std::sqrt(m2[j] / static_cast<double>(runs - 1));
    const double diff = mean[j] - exact[j];
    double z = 0.0;
    if (sd > 0.0) {
      z = diff / (sd / std::sqrt(static_cast<double>(runs)));
    } else if (diff != 0.0) {
      z = std::numeric_limits<double>::infinity();
    }
    worst = std::max(worst, std::abs(z));
  }
  rep.measured = worst;
  rep.pass = worst <= 4.0;
  rep.values = {{"samples", static_cast<double>(samples)}, {"runs", static_cast<double>(runs)}};
  return rep;
}

}  // namespace sfnn
