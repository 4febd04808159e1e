#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "sfnn/transfer.hpp"

namespace sfnn {

inline constexpr const char* kCheckpointFormat = "sfnn-checkpoint";
inline constexpr int kCheckpointVersion = 1;

// Pipeline position of a checkpoint: transfer needs a trained DNN, finetune
// needs a transferred model.
enum class Stage { Dnn, Transferred, Finetuned };

std::string_view to_string(Stage s);
Stage parse_stage(std::string_view s);

struct TrainingMeta {
  Stage stage = Stage::Dnn;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::string config_hash;
};

struct Checkpoint {
  Model model;
  TrainingMeta meta;
  nlohmann::json provenance;  // free-form; null when absent
};

nlohmann::json spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);
nlohmann::json params_to_json(const Params& params);
Params params_from_json(const nlohmann::json& j);
nlohmann::json report_to_json(const TransferReport& r);
TransferReport report_from_json(const nlohmann::json& j);

// Canonical text: sorted keys, shortest round-trip decimals, trailing newline.
std::string serialize_checkpoint(const Checkpoint& c);
Checkpoint parse_checkpoint(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// 64-bit FNV-1a of a string, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

}  // namespace sfnn
