#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "orunet/augment.hpp"
#include "orunet/metrics.hpp"
#include "orunet/model.hpp"
#include "orunet/trainer.hpp"

namespace orunet::cli {

/// Experiment configuration backing every CLI command. Stored as a flat,
/// sectioned key = value file ([data], [model], [train], [augment]).
struct ExperimentConfig {
  std::filesystem::path data_root;
  std::filesystem::path output_dir;
  model::ModelConfig model;
  train::TrainConfig train;
  augment::AugmentConfig augment;
  std::vector<int> folds;  // empty = all folds
  eval::Convention eval_convention = eval::Convention::Train;

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& config);
void write_config_file(const std::filesystem::path& path, const ExperimentConfig& config);

}  // namespace orunet::cli
