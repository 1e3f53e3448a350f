#include "orunet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "orunet/checkpoint.hpp"
#include "orunet/kv.hpp"
#include "orunet/losses.hpp"

namespace orunet::train {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (batches_per_epoch < 1)
    throw std::invalid_argument("TrainConfig: batches_per_epoch must be >= 1");
  if (initial_lr <= 0) throw std::invalid_argument("TrainConfig: initial_lr must be > 0");
  if (momentum < 0 || momentum >= 1)
    throw std::invalid_argument("TrainConfig: momentum must be in [0, 1)");
  if (poly_exponent <= 0) throw std::invalid_argument("TrainConfig: poly_exponent must be > 0");
  if (weight_decay < 0) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
  if (patch_h < 1 || patch_w < 1) throw std::invalid_argument("TrainConfig: bad patch size");
}

double poly_lr(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch > cfg.epochs)
    throw std::invalid_argument("poly_lr: epoch " + std::to_string(epoch) + " outside [0, " +
                                std::to_string(cfg.epochs) + "]");
  if (epoch == cfg.epochs) return 0.0;
  return cfg.initial_lr * std::pow(1.0 - double(epoch) / double(cfg.epochs), cfg.poly_exponent);
}

void sgd_nesterov_step(Tensor& param, const Tensor& grad, Tensor& momentum_buffer, double lr,
                       double momentum) {
  if (!param.same_shape(grad) || !param.same_shape(momentum_buffer))
    throw std::invalid_argument("sgd_nesterov_step: shape mismatch");
  for (int64_t i = 0; i < param.numel(); ++i) {
    const double g = grad[i];
    const double v = momentum * momentum_buffer[i] + g;
    momentum_buffer[i] = static_cast<float>(v);
    param[i] = static_cast<float>(param[i] - lr * (g + momentum * v));
  }
}

namespace {

std::string serialize_train_config(const TrainConfig& cfg) {
  std::string s;
  s += "batch_size = " + std::to_string(cfg.batch_size) + "\n";
  s += "epochs = " + std::to_string(cfg.epochs) + "\n";
  s += "batches_per_epoch = " + std::to_string(cfg.batches_per_epoch) + "\n";
  s += "initial_lr = " + kv::format_double(cfg.initial_lr) + "\n";
  s += "momentum = " + kv::format_double(cfg.momentum) + "\n";
  s += "poly_exponent = " + kv::format_double(cfg.poly_exponent) + "\n";
  s += "weight_decay = " + kv::format_double(cfg.weight_decay) + "\n";
  s += "seed = " + std::to_string(cfg.seed) + "\n";
  s += "checkpoint_every = " + std::to_string(cfg.checkpoint_every) + "\n";
  s += "mixed_precision = " + std::string(cfg.mixed_precision ? "true" : "false") + "\n";
  s += "patch_h = " + std::to_string(cfg.patch_h) + "\n";
  s += "patch_w = " + std::to_string(cfg.patch_w) + "\n";
  return s;
}

std::string rng_to_string(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void rng_from_string(Rng& rng, const std::string& s) {
  std::istringstream in(s);
  in >> rng;
  if (!in) throw std::runtime_error("corrupt rng state in checkpoint");
}

struct TrainingFrame {
  Tensor image;      // (3, h/2, w/2)
  img::MaskU8 mask;  // half resolution, {0,1}
};

struct OptimizerState {
  std::map<std::string, Tensor> momentum;
};

void save_training_checkpoint(const fs::path& path, model::ResUNet& model,
                              const TrainConfig& cfg, OptimizerState& opt, int next_epoch,
                              const Rng& patch_rng, const Rng& aug_rng) {
  model::CheckpointData data;
  data.config = model.config();
  data.meta["epoch"] = std::to_string(next_epoch);
  data.meta["train_config"] = serialize_train_config(cfg);
  data.meta["rng_patch"] = rng_to_string(patch_rng);
  data.meta["rng_augment"] = rng_to_string(aug_rng);
  model::collect_model_tensors(model, data.tensors);
  for (auto& [name, buf] : opt.momentum) data.tensors.emplace_back("opt." + name, buf);
  model::write_checkpoint(path, data);
}

}  // namespace

TrainResult train_fold(const fs::path& data_root, const data::FoldSplit& fold,
                       const model::ModelConfig& model_cfg, const TrainConfig& train_cfg,
                       const augment::AugmentConfig& aug_cfg, const fs::path& out_dir,
                       const fs::path& resume_from) {
  model_cfg.validate();
  train_cfg.validate();
  aug_cfg.validate();

  const int64_t div = int64_t(1) << (model_cfg.num_stages - 1);
  if (train_cfg.patch_h % div != 0 || train_cfg.patch_w % div != 0)
    throw std::invalid_argument("train_fold: patch " + std::to_string(train_cfg.patch_h) + "x" +
                                std::to_string(train_cfg.patch_w) + " not divisible by " +
                                std::to_string(div));

  // Labeled frames of the fold's training surgeries, preprocessed up front.
  const auto records = data::load_dataset_index(data_root);
  std::vector<TrainingFrame> frames;
  for (const auto& rec : records) {
    if (!rec.labeled()) continue;
    if (std::find(fold.train_surgeries.begin(), fold.train_surgeries.end(), rec.surgery()) ==
        fold.train_surgeries.end())
      continue;
    TrainingFrame frame;
    frame.image = data::preprocess(img::read_image(rec.image_path));
    frame.mask = data::preprocess_mask(img::read_mask(*rec.mask_path));
    frames.push_back(std::move(frame));
  }
  if (frames.empty())
    throw std::runtime_error("train_fold: no labeled training frames in fold " +
                             std::to_string(fold.fold_index));

  fs::create_directories(out_dir);
  model::ResUNet net(model_cfg, train_cfg.seed);
  OptimizerState opt;
  net.visit_params([&opt](const std::string& name, Tensor& value, Tensor&) {
    opt.momentum.emplace(name, Tensor(value.shape));
  });
  Rng patch_rng = substream(train_cfg.seed, "patch");
  Rng aug_rng = substream(train_cfg.seed, "augment");
  int start_epoch = 0;

  if (!resume_from.empty()) {
    model::CheckpointData data = model::read_checkpoint(resume_from);
    if (!(data.config == model_cfg))
      throw std::runtime_error("resume checkpoint config does not match requested model config");
    model::restore_model_tensors(net, data);
    for (const auto& [name, tensor] : data.tensors) {
      if (!name.starts_with("opt.")) continue;
      auto it = opt.momentum.find(name.substr(4));
      if (it == opt.momentum.end())
        throw std::runtime_error("resume checkpoint has unknown optimizer tensor " + name);
      if (it->second.shape != tensor.shape)
        throw std::runtime_error("resume checkpoint momentum shape mismatch for " + name);
      it->second.data = tensor.data;
    }
    kv::Reader meta{data.meta, "checkpoint meta"};
    start_epoch = meta.get_int("epoch");
    rng_from_string(patch_rng, meta.get("rng_patch"));
    rng_from_string(aug_rng, meta.get("rng_augment"));
  }

  const std::string prefix = "fold" + std::to_string(fold.fold_index);
  std::ofstream log(out_dir / (prefix + "_train.log"), std::ios::app);

  TrainResult result;
  const int heads = model_cfg.deep_supervision_heads;
  Tensor batch({train_cfg.batch_size, 3, train_cfg.patch_h, train_cfg.patch_w});
  Tensor target({train_cfg.batch_size, 1, train_cfg.patch_h, train_cfg.patch_w});

  for (int epoch = start_epoch; epoch < train_cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = poly_lr(epoch, train_cfg);
    double epoch_loss = 0;

    for (int it = 0; it < train_cfg.batches_per_epoch; ++it) {
      for (int b = 0; b < train_cfg.batch_size; ++b) {
        const auto& frame = frames[static_cast<size_t>(
            uniform_int(patch_rng, 0, static_cast<int64_t>(frames.size()) - 1))];
        data::Patch patch = data::sample_patch(frame.image, frame.mask, train_cfg.patch_h,
                                               train_cfg.patch_w, patch_rng);
        patch = augment::apply_augmentations(patch, aug_cfg, aug_rng);
        std::copy(patch.image.data.begin(), patch.image.data.end(), &batch.at(b, 0, 0, 0));
        float* t = &target.at(b, 0, 0, 0);
        for (int64_t i = 0; i < patch.mask.height * patch.mask.width; ++i)
          t[i] = static_cast<float>(patch.mask.labels[static_cast<size_t>(i)]);
      }

      const auto soft_targets = loss::downsample_soft_gt(target, heads);
      model::MultiScaleLogits logits = net.forward_train(batch);
      std::vector<Tensor> grad_logits;
      const float loss_value = loss::total_loss<float>(logits, soft_targets, &grad_logits);
      epoch_loss += loss_value;

      net.zero_grad();
      net.backward(grad_logits);
      net.visit_params([&](const std::string& name, Tensor& value, Tensor& grad) {
        if (train_cfg.weight_decay > 0)
          for (int64_t i = 0; i < grad.numel(); ++i)
            grad[i] += static_cast<float>(train_cfg.weight_decay * value[i]);
        sgd_nesterov_step(value, grad, opt.momentum.at(name), lr, train_cfg.momentum);
      });
    }

    epoch_loss /= train_cfg.batches_per_epoch;
    result.epoch_losses.push_back(epoch_loss);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log << "epoch " << epoch << " lr " << lr << " loss " << epoch_loss << " seconds " << seconds
        << "\n";
    log.flush();

    if (train_cfg.checkpoint_every > 0 && (epoch + 1) % train_cfg.checkpoint_every == 0 &&
        epoch + 1 < train_cfg.epochs)
      save_training_checkpoint(out_dir / (prefix + "_epoch" + std::to_string(epoch) + ".ckpt"),
                               net, train_cfg, opt, epoch + 1, patch_rng, aug_rng);
  }

  result.final_checkpoint = out_dir / (prefix + "_final.ckpt");
  save_training_checkpoint(result.final_checkpoint, net, train_cfg, opt, train_cfg.epochs,
                           patch_rng, aug_rng);
  return result;
}

}  // namespace orunet::train
