#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lkaseg/model.hpp"
#include "lkaseg/train.hpp"

namespace lkaseg {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DataConfig {
  std::string dir;
  /// Map clutter to the ignore label for training and evaluation.
  bool foreground_only = false;
  /// Classes averaged into mF1 / mIoU; empty = every class.
  std::vector<int> eval_classes;
};

/// {"model": {...}, "train": {...}, "data": {...}}. Every section and key is
/// optional; unknown keys are rejected.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
  [[nodiscard]] nlohmann::json to_json() const;
  void validate() const;
};

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace lkaseg
