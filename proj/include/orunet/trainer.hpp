#pragma once

#include <filesystem>
#include <vector>

#include "orunet/augment.hpp"
#include "orunet/dataset.hpp"
#include "orunet/model.hpp"

namespace orunet::train {

struct TrainConfig {
  int batch_size = 64;
  int epochs = 2000;
  int batches_per_epoch = 100;  // an epoch is 100 optimizer steps, not a data pass
  double initial_lr = 1.0;
  double momentum = 0.9;
  double poly_exponent = 0.9;
  double weight_decay = 0.0;
  uint64_t seed = 0;
  int checkpoint_every = 0;  // epochs between periodic checkpoints; 0 = final only
  bool mixed_precision = false;  // throughput hint only; this backend ignores it
  int patch_h = 256;
  int patch_w = 448;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// polyLR schedule: initial_lr * (1 - epoch / epochs)^poly_exponent,
/// decaying to exactly 0 at epoch == epochs.
double poly_lr(int epoch, const TrainConfig& cfg);

/// Nesterov-momentum SGD update: v <- mu*v + g; p <- p - lr*(g + mu*v).
void sgd_nesterov_step(Tensor& param, const Tensor& grad, Tensor& momentum_buffer, double lr,
                       double momentum);

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::vector<double> epoch_losses;
};

/// Runs the optimization loop for one fold: epochs x batches_per_epoch
/// iterations of (sample patches, augment, forward, total loss, SGD step)
/// over the fold's labeled training frames. Writes periodic and final
/// checkpoints plus an append-only per-epoch log into out_dir. Seed-
/// deterministic; resuming from a checkpoint continues the identical
/// trajectory.
TrainResult train_fold(const std::filesystem::path& data_root, const data::FoldSplit& fold,
                       const model::ModelConfig& model_cfg, const TrainConfig& train_cfg,
                       const augment::AugmentConfig& aug_cfg,
                       const std::filesystem::path& out_dir,
                       const std::filesystem::path& resume_from = {});

}  // namespace orunet::train
