#include "sfnn/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "sfnn/checkpoint.hpp"
#include "sfnn/error.hpp"

namespace sfnn {

namespace {

using nlohmann::json;

void only_keys(const json& j, const char* section, std::set<std::string> allowed) {
  if (!j.is_object()) throw ValidationError(std::string("config: '") + section + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    if (allowed.count(k) == 0) throw ValidationError(std::string("config: unknown key '") + k + "' in " + section);
  }
}

template <class T>
T get(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("config: bad value for '") + key + "'");
  }
}

TrainConfig parse_train(const json& j, TrainConfig t, const char* section) {
  only_keys(j, section, {"epochs", "batch_size", "samples_train", "samples_eval", "lr", "lr_decay", "seed", "mode",
                         "val_mode", "record_wall_time"});
  t.epochs = get(j, "epochs", t.epochs);
  t.batch_size = get(j, "batch_size", t.batch_size);
  t.samples_train = get(j, "samples_train", t.samples_train);
  t.samples_eval = get(j, "samples_eval", t.samples_eval);
  t.base_lr = get(j, "lr", t.base_lr);
  t.lr_decay = get(j, "lr_decay", t.lr_decay);
  t.seed = get(j, "seed", t.seed);
  t.record_wall_time = get(j, "record_wall_time", t.record_wall_time);
  if (j.contains("mode")) t.mode = parse_train_mode(get<std::string>(j, "mode", ""));
  if (j.contains("val_mode")) t.val_mode = parse_eval_mode(get<std::string>(j, "val_mode", ""));
  if (t.batch_size == 0 || t.samples_train == 0 || t.samples_eval == 0) {
    throw ValidationError(std::string("config: ") + section + " batch size and sample counts must be >= 1");
  }
  if (!(t.base_lr > 0.0) || !(t.lr_decay > 0.0)) {
    throw ValidationError(std::string("config: ") + section + " learning rate and decay must be positive");
  }
  return t;
}

json train_to_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"samples_train", t.samples_train},
          {"samples_eval", t.samples_eval},
          {"lr", t.base_lr},
          {"lr_decay", t.lr_decay},
          {"seed", t.seed},
          {"mode", std::string(to_string(t.mode))},
          {"val_mode", std::string(to_string(t.val_mode))},
          {"record_wall_time", t.record_wall_time}};
}

}  // namespace

TrainConfig default_finetune_config() {
  TrainConfig t;
  t.mode = TrainMode::SimplifiedMC;
  t.val_mode = EvalMode::DnnStar;
  t.epochs = 50;
  return t;
}

ExperimentConfig parse_config(const json& j) {
  only_keys(j, "config", {"model", "train", "finetune", "transfer", "n_val", "lr_search"});
  if (!j.contains("model")) throw ValidationError("config: missing 'model'");
  ExperimentConfig c;
  try {
    c.model = spec_from_json(j.at("model"));
  } catch (const IoError& e) {
    throw ValidationError(std::string("config model: ") + e.what());
  }
  require_valid(c.model);
  c.finetune = default_finetune_config();
  if (j.contains("train")) c.train = parse_train(j.at("train"), c.train, "train");
  if (j.contains("finetune")) c.finetune = parse_train(j.at("finetune"), c.finetune, "finetune");
  if (j.contains("transfer")) {
    const json& t = j.at("transfer");
    only_keys(t, "transfer", {"layers", "gamma_upper", "squash", "gamma_floor"});
    c.transfer.layers = get(t, "layers", c.transfer.layers);
    c.transfer.gamma_upper = get(t, "gamma_upper", c.transfer.gamma_upper);
    if (t.contains("squash")) c.transfer.squash = parse_squash(get<std::string>(t, "squash", ""));
    c.transfer.gamma_floor = get(t, "gamma_floor", c.transfer.gamma_floor);
  }
  c.n_val = get(j, "n_val", c.n_val);
  c.lr_search = get(j, "lr_search", c.lr_search);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

json config_to_json(const ExperimentConfig& c) {
  return {{"model", spec_to_json(c.model)},
          {"train", train_to_json(c.train)},
          {"finetune", train_to_json(c.finetune)},
          {"transfer",
           {{"layers", c.transfer.layers},
            {"gamma_upper", c.transfer.gamma_upper},
            {"squash", std::string(to_string(c.transfer.squash))},
            {"gamma_floor", c.transfer.gamma_floor}}},
          {"n_val", c.n_val},
          {"lr_search", c.lr_search}};
}

std::string config_hash(const ExperimentConfig& c) { return fnv1a_hex(config_to_json(c).dump()); }

}  // namespace sfnn
