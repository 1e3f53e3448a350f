#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "orunet/layers.hpp"
#include "orunet/tensor.hpp"

namespace orunet::model {

struct ModelConfig {
  int base_features = 48;
  int max_features = 512;
  int num_stages = 6;  // 6 stages = 5 downsamplings
  std::vector<int> blocks_per_stage = {1, 2, 3, 4, 5, 5};
  int num_classes = 2;
  int deep_supervision_heads = 4;
  int input_channels = 3;
  double norm_epsilon = 1e-5;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Feature width at stage s: min(base * 2^s, max). Widths double on every
/// downsampling and saturate at max_features.
std::vector<int> feature_counts(const ModelConfig& cfg);

/// Logits per supervised resolution; index 0 is full resolution, index i is
/// at spatial scale 1/2^i.
using MultiScaleLogits = std::vector<Tensor>;

/// Residual U-Net: pre-activation residual blocks in the encoder (stride-2
/// convolution with 1x1 projection shortcut on the first block of each
/// downsampling stage), plain two-convolution decoder levels fed by 2x2
/// transposed convolutions, 1x1 segmentation heads on the top decoder
/// resolutions.
class ResUNet {
 public:
  ResUNet(ModelConfig cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  /// Training-mode forward: batch statistics, caches activations for
  /// backward(). Returns logits at each supervised resolution.
  MultiScaleLogits forward_train(const Tensor& batch);

  /// Eval-mode forward: running statistics, no caching, deterministic.
  /// Returns the full-resolution softmax (n, num_classes, h, w).
  Tensor forward_eval(const Tensor& batch) const;

  /// Backpropagates one gradient tensor per head (as produced by
  /// loss::total_loss) through the cached forward_train activations,
  /// accumulating parameter gradients.
  void backward(const MultiScaleLogits& grad_logits);

  void zero_grad();

  /// Visits every learnable parameter as (name, value, gradient), in a fixed
  /// order that is stable across runs and processes.
  void visit_params(const std::function<void(const std::string&, Tensor&, Tensor&)>& fn);
  /// Visits non-learnable state (normalization running statistics).
  void visit_buffers(const std::function<void(const std::string&, Tensor&)>& fn);

  int64_t parameter_count();

 private:
  struct ResidualBlock {
    bool project = false;  // stride-2 downsampling block with 1x1 shortcut
    nn::BatchNorm2d<float> bn1, bn2;
    nn::Conv2d<float> conv1, conv2, proj;
    struct Cache {
      Tensor x, r1, r2;
      nn::BatchNorm2d<float>::Cache bn1c, bn2c;
    };
    Tensor forward_train(const Tensor& x, Cache* cache);
    Tensor forward_eval(const Tensor& x) const;
    Tensor backward(const Tensor& grad_y, Cache& cache);
  };

  struct DecoderLevel {
    nn::ConvTranspose2x2<float> up;
    nn::Conv2d<float> conv1, conv2;
    nn::BatchNorm2d<float> bn1, bn2;
    struct Cache {
      Tensor deep, cat, r1, r2;
      nn::BatchNorm2d<float>::Cache bn1c, bn2c;
    };
    Tensor forward_train(const Tensor& deep, const Tensor& skip, Cache* cache);
    Tensor forward_eval(const Tensor& deep, const Tensor& skip) const;
    // Returns gradients wrt (deep, skip).
    std::pair<Tensor, Tensor> backward(const Tensor& grad_y, Cache& cache);
  };

  void check_input(const Tensor& batch) const;

  ModelConfig cfg_;
  std::vector<int> features_;
  nn::Conv2d<float> stem_;
  std::vector<std::vector<ResidualBlock>> stages_;
  std::vector<DecoderLevel> decoder_;          // index r = output resolution level
  std::vector<nn::Conv2d<float>> heads_;       // index i = resolution 1/2^i

  // forward_train caches, consumed by backward()
  struct TrainCache {
    Tensor stem_in;
    std::vector<std::vector<ResidualBlock::Cache>> stage_caches;
    std::vector<DecoderLevel::Cache> dec_caches;
    std::vector<Tensor> head_inputs;
    bool valid = false;
  };
  TrainCache cache_;
};

}  // namespace orunet::model
