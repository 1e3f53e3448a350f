#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "orunet/model.hpp"

namespace orunet::model {

/// Checkpoint archive: model config as structured text, string metadata
/// (epoch counter, rng states, train settings), and every named tensor with
/// dtype, shape and raw little-endian data. Parameters, normalization
/// buffers and optimizer momentum live side by side under distinct names.
struct CheckpointData {
  ModelConfig config;
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

std::string serialize_model_config(const ModelConfig& cfg);
ModelConfig parse_model_config(const std::map<std::string, std::string>& values);

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::filesystem::path& path);

/// Reads only the model config (cheap header peek plus config block).
ModelConfig read_checkpoint_config(const std::filesystem::path& path);

/// Collects model parameters and buffers into checkpoint tensor entries.
void collect_model_tensors(ResUNet& model, std::vector<std::pair<std::string, Tensor>>& out);

/// Restores parameters and buffers from a checkpoint into a model built from
/// the same config. Every expected tensor must be present with the exact
/// shape of the config-derived parameter walk. Entries with other names
/// (e.g. optimizer state) are ignored here.
void restore_model_tensors(ResUNet& model, const CheckpointData& data);

}  // namespace orunet::model
