#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "sfnn/training.hpp"
#include "sfnn/transfer.hpp"

namespace sfnn {

// Everything a pipeline run depends on besides the data files.
struct ExperimentConfig {
  NetworkSpec model;  // the DNN architecture
  TrainConfig train;
  TrainConfig finetune;
  TransferConfig transfer;
  std::size_t n_val = 0;    // tail rows of the training data kept for validation
  bool lr_search = false;   // pick base_lr from the grid by validation score (train and finetune)
};

// Defaults for the fine-tuning stage: Monte Carlo estimator training scored
// under DNN* semantics.
TrainConfig default_finetune_config();

// Keys are optional except `model`; unknown keys are rejected.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& c);
// Hash of the canonical JSON form.
std::string config_hash(const ExperimentConfig& c);

}  // namespace sfnn
