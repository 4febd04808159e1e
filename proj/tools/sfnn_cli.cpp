// sfnn: command-line driver for the DNN -> SFNN pipeline.
//
// Exit codes: 0 success, 1 validation failure (bad flags, bad config, stage
// order, failed verification), 2 I/O failure, 3 numerical divergence. Errors
// are reported as one JSON object on stderr.
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sfnn/checkpoint.hpp"
#include "sfnn/config.hpp"
#include "sfnn/data.hpp"
#include "sfnn/error.hpp"
#include "sfnn/training.hpp"
#include "sfnn/transfer.hpp"
#include "sfnn/verify.hpp"
#include "sfnn/version.hpp"

using namespace sfnn;
using nlohmann::json;

namespace {

std::vector<std::string> g_args;

json provenance(const std::string& command, const std::string& config_hash, std::uint64_t seed) {
  json p;
  p["tool"] = "sfnn";
  p["version"] = kVersion;
  p["command"] = command;
  p["args"] = g_args;
  p["config_hash"] = config_hash;
  p["seed"] = seed;
  p["checkpoint_format_version"] = kCheckpointVersion;
  p["compiler"] = __VERSION__;
#ifdef _OPENMP
  p["openmp"] = _OPENMP;
#endif
  return p;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw IoError("write failed for " + path);
}

std::string provenance_line(const json& p) { return json{{"provenance", p}}.dump(); }

// --- data -------------------------------------------------------------------

struct DataOptions {
  std::string path;
  std::string rows;  // "first:count"
  bool binarize = false;
  double threshold = 0.5;
  bool half_digit = false;
};

void add_data_options(CLI::App* app, DataOptions& d) {
  app->add_option("--data", d.path, "CSV file, IDX directory, or images,labels IDX pair")->required();
  app->add_option("--rows", d.rows, "Row range first:count");
  app->add_flag("--binarize", d.binarize, "Binarize pixels at --threshold");
  app->add_option("--threshold", d.threshold, "Binarization threshold");
  app->add_flag("--half-digit", d.half_digit, "Upper half of each digit predicts the lower half (implies --binarize)");
}

Dataset load_data(const DataOptions& o) {
  namespace fs = std::filesystem;
  Dataset d;
  const auto comma = o.path.find(',');
  if (comma != std::string::npos) {
    d = load_idx(o.path.substr(0, comma), o.path.substr(comma + 1));
  } else if (fs::is_directory(o.path)) {
    d = load_idx(fs::path(o.path) / "images-idx3-ubyte", fs::path(o.path) / "labels-idx1-ubyte");
  } else if (fs::path(o.path).extension() == ".csv") {
    d = read_csv(o.path);
  } else if (!fs::exists(o.path)) {
    throw IoError("data not found: " + o.path);
  } else {
    throw ValidationError("unrecognized data format: " + o.path + " (expected .csv, IDX directory or pair)");
  }
  if (!o.rows.empty()) {
    const auto colon = o.rows.find(':');
    if (colon == std::string::npos) throw ValidationError("--rows expects first:count");
    std::size_t first = 0, count = 0;
    try {
      first = std::stoul(o.rows.substr(0, colon));
      count = std::stoul(o.rows.substr(colon + 1));
    } catch (const std::exception&) {
      throw ValidationError("--rows expects first:count");
    }
    if (first + count > d.size()) throw ValidationError("--rows range exceeds the dataset");
    d = take_rows(d, first, count);
  }
  if (o.binarize || o.half_digit) d = binarize(d, o.threshold);
  if (o.half_digit) d = split_half_digit(d);
  validate_dataset(d);
  return d;
}

// --- models -----------------------------------------------------------------

Checkpoint load_stage(const std::string& path, std::initializer_list<Stage> allowed, const char* command) {
  Checkpoint c = load_checkpoint(path);
  if (std::find(allowed.begin(), allowed.end(), c.meta.stage) == allowed.end()) {
    std::string want;
    for (Stage s : allowed) want += (want.empty() ? "" : " or ") + std::string(to_string(s));
    throw ValidationError(std::string(command) + " needs a " + want + " checkpoint, got stage '" +
                          std::string(to_string(c.meta.stage)) + "'");
  }
  return c;
}

json final_metrics(const std::vector<MetricRecord>& metrics) {
  json j = json::object();
  for (const auto& m : metrics) j[m.split] = json::parse(to_jsonl(m));
  return j;
}

std::vector<std::string> metric_lines(const std::vector<MetricRecord>& metrics, const json& prov) {
  std::vector<std::string> lines;
  for (const auto& m : metrics) lines.push_back(to_jsonl(m));
  lines.push_back(provenance_line(prov));
  return lines;
}

// --- subcommands ----------------------------------------------------------------

struct GenData {
  std::string kind = "synthetic";
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  double noise = 0.1;
  std::string out;
};

int run_gen_data(const GenData& o) {
  if (o.kind != "synthetic") throw ValidationError("gen-data: unknown generator '" + o.kind + "'");
  const Dataset d = gen_synthetic(o.n, o.noise, RngStream(o.seed));
  const json prov = provenance("gen-data", "", o.seed);
  write_csv(d, o.out, provenance_line(prov));
  std::cout << json{{"command", "gen-data"}, {"rows", o.n}, {"out", o.out}}.dump() << '\n';
  return 0;
}

struct TrainOpts {
  std::string config, out, metrics;
  DataOptions data;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  bool no_wall_time = false;
};

int run_train(const TrainOpts& o) {
  ExperimentConfig cfg = load_config(o.config);
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.no_wall_time) cfg.train.record_wall_time = false;
  cfg.train.mode = TrainMode::Dnn;
  const Dataset d = load_data(o.data);
  check_compatible(d, cfg.model);
  const auto [tr, val] = cfg.n_val > 0 ? train_val_split(d, cfg.n_val) : std::pair{d, take_rows(d, 0, 0)};
  const std::string hash = config_hash(cfg);
  const Params init = init_params(cfg.model, RngStream(cfg.train.seed).split(3));

  TrainResult result;
  json search = nullptr;
  if (cfg.lr_search && val.size() > 0) {
    LrSearchResult s = select_learning_rate(cfg.model, init, tr.inputs, tr.targets, val.inputs, val.targets, cfg.train);
    search = json::array();
    for (const auto& [lr, score] : s.scores) search.push_back({{"lr", lr}, {"score", score}});
    cfg.train.base_lr = s.best_lr;
    result = std::move(s.best);
  } else {
    result = train(cfg.model, init, tr.inputs, tr.targets, val.inputs, val.targets, cfg.train);
  }

  const json prov = provenance("train", hash, cfg.train.seed);
  Checkpoint c;
  c.model = Model{cfg.model, result.params, EvalMode::Dnn, std::nullopt};
  c.meta = {Stage::Dnn, cfg.train.seed, cfg.train.epochs, hash};
  c.provenance = prov;
  save_checkpoint(o.out, c);
  if (!o.metrics.empty()) write_lines(o.metrics, metric_lines(result.metrics, prov));
  json summary{{"command", "train"}, {"out", o.out}, {"best_epoch", result.best_epoch},
               {"lr", cfg.train.base_lr}, {"final", final_metrics(result.metrics)}};
  if (!search.is_null()) summary["lr_search"] = search;
  std::cout << summary.dump() << '\n';
  return 0;
}

struct TransferOpts {
  std::string model, out, mode = "thm1";
  DataOptions data;
  std::vector<double> gamma = {kDefaultGammaUpper};
  std::vector<std::size_t> layers = {0};
  double gamma_floor = 0.0;
};

int run_transfer(const TransferOpts& o) {
  const Checkpoint in = load_stage(o.model, {Stage::Dnn}, "transfer");
  const Dataset d = load_data(o.data);
  check_compatible(d, in.model.spec);
  TransferConfig tc;
  tc.kind = parse_transfer_kind(o.mode);
  tc.layers = o.layers;
  tc.gamma_upper = o.gamma;
  tc.gamma_floor = o.gamma_floor;
  const TransferResult tr = transfer(in.model.spec, in.model.params, d.inputs, tc);
  const bool simple = tc.kind == TransferKind::SimpleSigmoid || tc.kind == TransferKind::SimpleReLU;

  Checkpoint c;
  c.model = Model{tr.spec, tr.params, simple ? EvalMode::Sfnn : EvalMode::DnnStar, tr.report};
  c.meta = {Stage::Transferred, in.meta.seed, in.meta.epochs, in.meta.config_hash};
  c.provenance = provenance("transfer", in.meta.config_hash, in.meta.seed);
  save_checkpoint(o.out, c);
  std::cout << json{{"command", "transfer"}, {"out", o.out}, {"report", report_to_json(tr.report)}}.dump() << '\n';
  return 0;
}

struct FinetuneOpts {
  std::string model, out, metrics, config, val_mode;
  DataOptions data;
  std::optional<std::size_t> samples, epochs, batch_size, n_val;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  bool no_wall_time = false;
};

int run_finetune(const FinetuneOpts& o) {
  const Checkpoint in = load_stage(o.model, {Stage::Transferred, Stage::Finetuned}, "finetune");
  TrainConfig cfg = default_finetune_config();
  std::size_t n_val = 0;
  bool lr_search = false;
  if (!o.config.empty()) {
    const ExperimentConfig ec = load_config(o.config);
    cfg = ec.finetune;
    n_val = ec.n_val;
    lr_search = ec.lr_search;
  }
  cfg.seed = in.meta.seed;
  if (o.samples) cfg.samples_train = *o.samples;
  if (o.epochs) cfg.epochs = *o.epochs;
  if (o.batch_size) cfg.batch_size = *o.batch_size;
  if (o.lr) cfg.base_lr = *o.lr;
  if (o.seed) cfg.seed = *o.seed;
  if (o.n_val) n_val = *o.n_val;
  if (!o.val_mode.empty()) cfg.val_mode = parse_eval_mode(o.val_mode);
  if (o.no_wall_time) cfg.record_wall_time = false;
  cfg.mode = TrainMode::SimplifiedMC;
  if (cfg.samples_train == 0 || cfg.batch_size == 0) throw ValidationError("finetune: samples and batch size must be >= 1");

  const Dataset d = load_data(o.data);
  check_compatible(d, in.model.spec);
  const auto [tr, val] = n_val > 0 ? train_val_split(d, n_val) : std::pair{d, take_rows(d, 0, 0)};
  TrainResult result;
  json search = nullptr;
  if (lr_search && !o.lr && val.size() > 0) {
    LrSearchResult s = select_learning_rate(in.model.spec, in.model.params, tr.inputs, tr.targets, val.inputs,
                                            val.targets, cfg, kFinetuneLearningRateGrid);
    search = json::array();
    cfg.base_lr = s.best_lr;
    for (const auto& [lr, score] : s.scores) search.push_back({{"lr", lr}, {"score", score}});
    result = std::move(s.best);
  } else {
    result = train(in.model.spec, in.model.params, tr.inputs, tr.targets, val.inputs, val.targets, cfg);
  }

  // Chain the upstream hash with the settings of this stage.
  ExperimentConfig stage;
  stage.model = in.model.spec;
  stage.finetune = cfg;
  stage.n_val = n_val;
  stage.lr_search = lr_search;
  const std::string hash = fnv1a_hex(in.meta.config_hash + config_hash(stage));
  const json prov = provenance("finetune", hash, cfg.seed);
  Checkpoint c;
  c.model = Model{in.model.spec, result.params, in.model.default_mode, in.model.report};
  c.meta = {Stage::Finetuned, cfg.seed, cfg.epochs, hash};
  c.provenance = prov;
  save_checkpoint(o.out, c);
  if (!o.metrics.empty()) write_lines(o.metrics, metric_lines(result.metrics, prov));
  json summary{{"command", "finetune"}, {"out", o.out}, {"best_epoch", result.best_epoch}, {"lr", cfg.base_lr},
               {"final", final_metrics(result.metrics)}};
  if (!search.is_null()) summary["lr_search"] = search;
  std::cout << summary.dump() << '\n';
  return 0;
}

struct EvalOpts {
  std::string model, out, mode;
  DataOptions data;
  std::size_t samples = 500;
  std::uint64_t seed = 1;
};

double quantile(std::vector<double> sorted, double q) {
  // Linear interpolation between closest ranks.
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

int run_eval(const EvalOpts& o) {
  const Checkpoint c = load_checkpoint(o.model);
  const EvalMode mode = o.mode.empty() ? c.model.default_mode : parse_eval_mode(o.mode);
  if (o.samples == 0) throw ValidationError("eval: --samples must be >= 1");
  const Dataset d = load_data(o.data);
  check_compatible(d, c.model.spec);
  const Evaluation ev = evaluate(c.model.spec, c.model.params, d.inputs, d.targets,
                                 make_forward_mode(mode, o.samples, RngStream(o.seed)));
  std::vector<double> sorted = ev.nll;
  std::sort(sorted.begin(), sorted.end());
  json q = json::object();
  for (auto [name, p] : {std::pair{"p05", 0.05}, {"p25", 0.25}, {"p50", 0.5}, {"p75", 0.75}, {"p95", 0.95}}) {
    q[name] = quantile(sorted, p);
  }
  q["max"] = sorted.empty() ? 0.0 : sorted.back();
  const bool sampled = mode == EvalMode::Sfnn || mode == EvalMode::SimplifiedMC;
  json rec{{"split", "eval"},
           {"mode", std::string(to_string(mode))},
           {"rows", d.size()},
           {"mean_nll", ev.mean_nll},
           {"nll_quantiles", q},
           {"samples", sampled ? json(o.samples) : json(nullptr)},
           {"error_rate", ev.error_rate ? json(*ev.error_rate) : json(nullptr)}};
  const json prov = provenance("eval", c.meta.config_hash, o.seed);
  if (!o.out.empty()) write_lines(o.out, {rec.dump(), provenance_line(prov)});
  std::cout << rec.dump() << '\n';
  return 0;
}

struct VerifyOpts {
  std::string check;
  std::size_t seeds = 100;
  std::uint64_t first_seed = 0;
  std::vector<double> gamma;
  std::size_t samples = 100;
  std::size_t runs = 1000;
  std::string out;
};

int run_verify(const VerifyOpts& o) {
  if (o.seeds == 0) throw ValidationError("verify: --seeds must be >= 1");
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < o.seeds; ++i) seeds.push_back(o.first_seed + i);
  std::vector<CheckReport> reports;
  if (o.check == "theorem1") {
    reports.push_back(check_theorem1_bound(seeds, o.gamma.empty() ? std::vector<double>{1.0, 50.0} : o.gamma, 64));
  } else if (o.check == "gamma-sweep") {
    const std::vector<double> gammas = o.gamma.empty() ? std::vector<double>{2.0, 10.0, 50.0, 250.0} : o.gamma;
    for (std::uint64_t s : seeds) {
      const ActivationKind act = s % 2 == 0 ? ActivationKind::ReLU : ActivationKind::Sigmoid;
      const auto [spec, params] = sample_small_dnn(RngStream(s), act);
      reports.push_back(gamma_sweep(spec, params, sample_inputs(RngStream(s).split(3), 64, spec.input_dim), gammas));
      reports.back().seeds = {s};
    }
  } else if (o.check == "gradcheck") {
    for (std::uint64_t s : seeds) {
      const RngStream r(s);
      const ActivationKind acts[] = {ActivationKind::Sigmoid, ActivationKind::ReLU, ActivationKind::Tanh};
      const auto [dspec, dparams] = sample_small_dnn(r, acts[s % 3]);
      const Matrix x = sample_inputs(r.split(3), 8, dspec.input_dim);
      const Matrix y = sample_inputs(r.split(4), 8, 1);
      reports.push_back(grad_check(dspec, dparams, x, y, mode::Dnn{}, 1e-5));
      reports.back().name = "gradcheck-dnn";
      reports.back().seeds = {s};
      SmallNetOptions opts;
      opts.max_stochastic = 10;
      const auto [sspec, sparams] = sample_small_simplified(r.split(5), s % 2 == 1, opts);
      const Matrix sx = sample_inputs(r.split(6), 8, sspec.input_dim);
      reports.push_back(grad_check(sspec, sparams, sx, y, mode::ExactEnum{}, 1e-4));
      reports.back().name = "gradcheck-exact";
      reports.back().seeds = {s};
    }
  } else if (o.check == "mc-bias") {
    if (o.runs < 2 || o.samples == 0) throw ValidationError("verify mc-bias: --runs >= 2 and --samples >= 1 required");
    for (std::uint64_t s : seeds) {
      const RngStream r(s);
      const auto [spec, params] = sample_small_simplified(r, s % 2 == 1);
      reports.push_back(mc_bias_test(spec, params, sample_inputs(r.split(3), 1, spec.input_dim), o.samples, o.runs,
                                     r.split(4)));
      reports.back().seeds = {s};
    }
  } else {
    throw ValidationError("verify: unknown check '" + o.check + "' (theorem1, gamma-sweep, gradcheck, mc-bias)");
  }
  std::vector<std::string> lines;
  std::size_t passed = 0;
  for (const auto& r : reports) {
    lines.push_back(to_jsonl(r));
    if (r.pass) ++passed;
  }
  const json summary{{"check", o.check}, {"passed", passed}, {"total", reports.size()}};
  lines.push_back(json{{"summary", summary}}.dump());
  lines.push_back(provenance_line(provenance("verify", "", o.first_seed)));
  if (!o.out.empty()) write_lines(o.out, lines);
  for (std::size_t i = 0; i + 1 < lines.size(); ++i) std::cout << lines[i] << '\n';
  return passed == reports.size() ? 0 : 1;
}

int report_error(const char* kind, const std::string& message, int code) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}, {"exit_code", code}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) g_args.emplace_back(argv[i]);
  CLI::App app{"Transfer trained DNNs to stochastic feedforward networks and fine-tune them."};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  GenData gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a dataset");
  gen_cmd->add_option("kind", gen.kind, "Generator (synthetic)")->required();
  gen_cmd->add_option("--n", gen.n, "Number of rows")->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Random seed");
  gen_cmd->add_option("--noise", gen.noise, "Half-width of the uniform input noise")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--out", gen.out, "Output CSV")->required();

  TrainOpts tr;
  auto* train_cmd = app.add_subcommand("train", "Train a DNN");
  train_cmd->add_option("--config", tr.config, "Experiment config (JSON)")->required();
  add_data_options(train_cmd, tr.data);
  train_cmd->add_option("--out", tr.out, "Output checkpoint")->required();
  train_cmd->add_option("--metrics", tr.metrics, "Per-epoch metrics JSONL");
  train_cmd->add_option("--seed", tr.seed, "Override train.seed");
  train_cmd->add_option("--epochs", tr.epochs, "Override train.epochs");
  train_cmd->add_flag("--no-wall-time", tr.no_wall_time, "Omit wall_ms from metrics");

  TransferOpts tf;
  auto* transfer_cmd = app.add_subcommand("transfer", "Convert a trained DNN into an SFNN or Simplified-SFNN");
  transfer_cmd->add_option("--model", tf.model, "DNN checkpoint")->required();
  add_data_options(transfer_cmd, tf.data);
  transfer_cmd->add_option("--mode", tf.mode, "simple-sigmoid, simple-relu, thm1, thm2 or thm3");
  transfer_cmd->add_option("--gamma", tf.gamma, "gamma for each transferred layer (one value is broadcast)");
  transfer_cmd->add_option("--layers", tf.layers, "Hidden layers to make stochastic");
  transfer_cmd->add_option("--gamma-floor", tf.gamma_floor, "Lower bound for the measured gamma");
  transfer_cmd->add_option("--out", tf.out, "Output checkpoint")->required();

  FinetuneOpts ft;
  auto* finetune_cmd = app.add_subcommand("finetune", "Fine-tune a transferred Simplified-SFNN");
  finetune_cmd->add_option("--model", ft.model, "Transferred checkpoint")->required();
  add_data_options(finetune_cmd, ft.data);
  finetune_cmd->add_option("--config", ft.config, "Experiment config; its finetune section and n_val are used");
  finetune_cmd->add_option("--samples", ft.samples, "Monte Carlo samples per example (default 20)");
  finetune_cmd->add_option("--epochs", ft.epochs, "Epochs (default 50)");
  finetune_cmd->add_option("--batch-size", ft.batch_size, "Minibatch size (default 128)");
  finetune_cmd->add_option("--lr", ft.lr, "Base learning rate (default 1e-3)");
  finetune_cmd->add_option("--seed", ft.seed, "Seed (default: the checkpoint's)");
  finetune_cmd->add_option("--n-val", ft.n_val, "Tail rows held out for validation");
  finetune_cmd->add_option("--val-mode", ft.val_mode, "Validation semantics (default dnn-star)");
  finetune_cmd->add_option("--out", ft.out, "Output checkpoint")->required();
  finetune_cmd->add_option("--metrics", ft.metrics, "Per-epoch metrics JSONL");
  finetune_cmd->add_flag("--no-wall-time", ft.no_wall_time, "Omit wall_ms from metrics");

  EvalOpts ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--model", ev.model, "Checkpoint")->required();
  add_data_options(eval_cmd, ev.data);
  eval_cmd->add_option("--mode", ev.mode, "dnn, dnn-star, simplified-mc or sfnn (default: the model's)");
  eval_cmd->add_option("--samples", ev.samples, "Samples for simplified-mc and sfnn");
  eval_cmd->add_option("--seed", ev.seed, "Sampling seed");
  eval_cmd->add_option("--out", ev.out, "Metrics JSONL");

  VerifyOpts vf;
  auto* verify_cmd = app.add_subcommand("verify", "Run a numerical verification");
  verify_cmd->add_option("check", vf.check, "theorem1, gamma-sweep, gradcheck or mc-bias")->required();
  verify_cmd->add_option("--seeds", vf.seeds, "Number of random networks");
  verify_cmd->add_option("--first-seed", vf.first_seed, "First seed");
  verify_cmd->add_option("--gamma", vf.gamma, "gamma values (theorem1, gamma-sweep)");
  verify_cmd->add_option("--samples", vf.samples, "Samples per estimate (mc-bias)");
  verify_cmd->add_option("--runs", vf.runs, "Independent estimates (mc-bias)");
  verify_cmd->add_option("--out", vf.out, "Report JSONL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), 1);
  }

  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*train_cmd) return run_train(tr);
    if (*transfer_cmd) return run_transfer(tf);
    if (*finetune_cmd) return run_finetune(ft);
    if (*eval_cmd) return run_eval(ev);
    if (*verify_cmd) return run_verify(vf);
  } catch (const ValidationError& e) {
    return report_error("validation", e.what(), 1);
  } catch (const IoError& e) {
    return report_error("io", e.what(), 2);
  } catch (const NumericalError& e) {
    return report_error("numerical", e.what(), 3);
  } catch (const std::exception& e) {
    return report_error("validation", e.what(), 1);
  }
  return 1;
}
