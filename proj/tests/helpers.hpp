#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "orunet/model.hpp"
#include "orunet/tensor.hpp"

namespace testutil {

inline orunet::TensorT<double> random_tensor_d(std::vector<int64_t> shape, std::mt19937_64& rng,
                                               double lo = 0.0, double hi = 1.0) {
  orunet::TensorT<double> t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.data) v = d(rng);
  return t;
}

inline orunet::Tensor random_tensor_f(std::vector<int64_t> shape, std::mt19937_64& rng,
                                      double lo = 0.0, double hi = 1.0) {
  orunet::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.data) v = static_cast<float>(d(rng));
  return t;
}

/// Small model config used across tests: 3 stages, 8 base features, 2 heads.
inline orunet::model::ModelConfig tiny_model_config() {
  orunet::model::ModelConfig cfg;
  cfg.base_features = 8;
  cfg.max_features = 512;
  cfg.num_stages = 3;
  cfg.blocks_per_stage = {1, 1, 2};
  cfg.num_classes = 2;
  cfg.deep_supervision_heads = 2;
  cfg.input_channels = 3;
  return cfg;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("orunet_test_" + tag);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace testutil
