// Acceptance suite. Each criterion is pinned here with its tolerance and
// prints exactly one line: [PASS]/[FAIL] criterion <n>: <name>.
// Usage: acceptance [criterion-number]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "orunet/augment.hpp"
#include "orunet/checkpoint.hpp"
#include "orunet/config_file.hpp"
#include "orunet/dataset.hpp"
#include "orunet/inference.hpp"
#include "orunet/losses.hpp"
#include "orunet/metrics.hpp"
#include "orunet/model.hpp"
#include "orunet/synthetic.hpp"
#include "orunet/trainer.hpp"

using namespace orunet;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path path;
  explicit Scratch(const std::string& tag) {
    path = fs::temp_directory_path() / ("orunet_accept_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Scratch() { fs::remove_all(path); }
};

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// --- criterion 1: loss hand values -----------------------------------------

bool crit_loss_hand_values(std::string& detail) {
  TensorD x({1, 1, 1, 1}), y({1, 1, 1, 1});
  x[0] = 0.7;
  y[0] = 0.5;
  const double single = loss::soft_dice_soft_gt(x, y);
  if (!close(single, -0.75, 1e-6)) {
    detail = "single-pixel case gave " + std::to_string(single);
    return false;
  }
  std::mt19937_64 rng(1);
  TensorD z({2, 1, 4, 4});
  std::uniform_real_distribution<double> d(0.1, 0.9);
  for (auto& v : z.data) v = d(rng);
  const double perfect = loss::soft_dice_soft_gt(z, z);
  if (!close(perfect, -1.0, 1e-6)) {
    detail = "perfect-match case gave " + std::to_string(perfect);
    return false;
  }
  TensorD zero(z.shape);
  const double empty = loss::soft_dice_soft_gt(z, zero);
  if (!close(empty, 0.0, 1e-6)) {
    detail = "zero-target case gave " + std::to_string(empty);
    return false;
  }
  return true;
}

// --- criterion 2: gradient checks -------------------------------------------

bool kink_clear(double x, double y, double margin) {
  return std::abs(x - y) > margin && x > margin && std::abs(x - 2 * y) > margin;
}

template <typename F>
TensorD numeric_grad(TensorD x, F&& f, double h = 1e-4) {
  TensorD g(x.shape);
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

bool grads_match(const TensorD& analytic, const TensorD& numeric, std::string& detail) {
  for (int64_t i = 0; i < analytic.numel(); ++i) {
    const double a = analytic[i], n = numeric[i];
    if (std::abs(a - n) > 1e-3 * std::max({std::abs(a), std::abs(n), 1e-6})) {
      detail = "rel error " + std::to_string(std::abs(a - n) / std::max(std::abs(a), 1e-12)) +
               " at element " + std::to_string(i);
      return false;
    }
  }
  return true;
}

bool crit_gradient_checks(std::string& detail) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  TensorD y({2, 2, 4, 6});
  for (auto& v : y.data) v = unit(rng);
  TensorD x(y.shape);
  for (int64_t i = 0; i < x.numel(); ++i)
    do {
      x[i] = unit(rng);
    } while (!kink_clear(x[i], y[i], 1e-3));
  TensorD analytic;
  loss::soft_dice_soft_gt(x, y, &analytic);
  if (!grads_match(analytic,
                   numeric_grad(x, [&](const TensorD& t) { return double(loss::soft_dice_soft_gt(t, y)); }),
                   detail)) {
    detail = "soft_dice_soft_gt: " + detail;
    return false;
  }

  TensorD yb({2, 2, 4, 6});
  std::bernoulli_distribution coin(0.45);
  for (auto& v : yb.data) v = coin(rng) ? 1.0 : 0.0;
  TensorD x2({2, 2, 4, 6});
  for (auto& v : x2.data) v = 0.05 + 0.9 * unit(rng);
  loss::soft_dice_loss(x2, yb, &analytic);
  if (!grads_match(analytic,
                   numeric_grad(x2, [&](const TensorD& t) { return double(loss::soft_dice_loss(t, yb)); }),
                   detail)) {
    detail = "soft_dice_loss: " + detail;
    return false;
  }

  TensorD target({2, 1, 4, 6});
  for (auto& v : target.data) v = coin(rng) ? 1.0 : 0.0;
  TensorD logits({2, 2, 4, 6});
  std::uniform_real_distribution<double> wide(-3.0, 3.0);
  for (auto& v : logits.data) v = wide(rng);
  loss::cross_entropy_loss(logits, target, &analytic);
  if (!grads_match(
          analytic,
          numeric_grad(logits, [&](const TensorD& t) { return double(loss::cross_entropy_loss(t, target)); }),
          detail)) {
    detail = "cross_entropy_loss: " + detail;
    return false;
  }

  TensorD my({2, 2, 4, 6}), mx({2, 2, 4, 6});
  for (auto& v : my.data) v = unit(rng);
  for (auto& v : mx.data) v = unit(rng);
  loss::mse_loss(mx, my, &analytic);
  if (!grads_match(analytic,
                   numeric_grad(mx, [&](const TensorD& t) { return double(loss::mse_loss(t, my)); }),
                   detail)) {
    detail = "mse_loss: " + detail;
    return false;
  }

  // total_loss through the softmax, two heads
  const auto targets = loss::downsample_soft_gt(target, 2);
  std::vector<TensorD> heads;
  heads.push_back(logits);
  for (;;) {
    TensorD z({2, 2, 2, 3});
    for (auto& v : z.data) v = wide(rng) / 2;
    const TensorD probs = loss::channel_softmax(z);
    bool ok = true;
    for (int64_t b = 0; b < 2 && ok; ++b)
      for (int64_t yy = 0; yy < 2 && ok; ++yy)
        for (int64_t xx = 0; xx < 3 && ok; ++xx)
          ok = kink_clear(probs.at(b, 1, yy, xx), targets[1].at(b, 0, yy, xx), 1e-3);
    if (ok) {
      heads.push_back(std::move(z));
      break;
    }
  }
  std::vector<TensorD> grads;
  loss::total_loss(heads, targets, &grads);
  for (size_t h = 0; h < heads.size(); ++h) {
    const TensorD num = numeric_grad(heads[h], [&](const TensorD& t) {
      std::vector<TensorD> probe = heads;
      probe[h] = t;
      return double(loss::total_loss(probe, targets));
    });
    if (!grads_match(grads[h], num, detail)) {
      detail = "total_loss head " + std::to_string(h) + ": " + detail;
      return false;
    }
  }
  return true;
}

// --- criterion 3: deep-supervision weights ----------------------------------

bool crit_ds_weights(std::string& detail) {
  const auto w = loss::ds_weights(4);
  // exact rational values: 2^(3-i) / (2^4 - 1)
  const double expected[4] = {8.0 / 15.0, 4.0 / 15.0, 2.0 / 15.0, 1.0 / 15.0};
  for (int i = 0; i < 4; ++i)
    if (w[i] != expected[i]) {
      detail = "weight " + std::to_string(i) + " = " + std::to_string(w[i]);
      return false;
    }
  double sum = 0;
  for (double v : w) sum += v;
  if (!close(sum, 1.0, 1e-9)) {
    detail = "sum = " + std::to_string(sum);
    return false;
  }
  return true;
}

// --- criterion 4: soft-label stack ------------------------------------------

bool crit_soft_label_stack(std::string& detail) {
  TensorD block({1, 1, 2, 2});
  block[0] = block[1] = 1.0;
  const auto stack = loss::downsample_soft_gt(block, 2);
  if (stack[1][0] != 0.5) {
    detail = "[1,1,0,0] block pooled to " + std::to_string(stack[1][0]);
    return false;
  }
  std::mt19937_64 rng(4);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 100; ++trial) {
    TensorD mask({1, 1, 16, 24});
    for (auto& v : mask.data) v = coin(rng) ? 1.0 : 0.0;
    const auto levels = loss::downsample_soft_gt(mask, 3);
    double mean0 = 0;
    for (auto v : levels[0].data) mean0 += v;
    mean0 /= double(levels[0].numel());
    for (size_t l = 1; l < levels.size(); ++l) {
      double m = 0;
      for (auto v : levels[l].data) m += v;
      m /= double(levels[l].numel());
      if (!close(m, mean0, 1e-6)) {
        detail = "level " + std::to_string(l) + " mean drifted by " + std::to_string(m - mean0);
        return false;
      }
    }
  }
  return true;
}

// --- criterion 5: architecture shape law ------------------------------------

int64_t shape_walk_param_count(const model::ModelConfig& cfg) {
  const auto f = model::feature_counts(cfg);
  int64_t total = int64_t(cfg.input_channels) * f[0] * 9;
  for (int s = 0; s < cfg.num_stages; ++s)
    for (int b = 0; b < cfg.blocks_per_stage[s]; ++b) {
      const int64_t in = b == 0 ? (s == 0 ? f[0] : f[s - 1]) : f[s];
      const int64_t out = f[s];
      total += 2 * in + 9 * in * out + 2 * out + 9 * out * out;
      if (s > 0 && b == 0) total += in * out;
    }
  for (int r = 0; r < cfg.num_stages - 1; ++r)
    total += 4 * int64_t(f[r + 1]) * f[r] + 9 * (2 * int64_t(f[r])) * f[r] + 2 * f[r] +
             9 * int64_t(f[r]) * f[r] + 2 * f[r];
  for (int i = 0; i < cfg.deep_supervision_heads; ++i)
    total += int64_t(f[i]) * cfg.num_classes + cfg.num_classes;
  return total;
}

bool crit_architecture_shape_law(std::string& detail) {
  const model::ModelConfig cfg;  // paper-scale defaults
  const auto widths = model::feature_counts(cfg);
  const std::vector<int> expected_widths = {48, 96, 192, 384, 512, 512};
  if (widths != expected_widths) {
    detail = "feature widths differ";
    return false;
  }

  model::ResUNet net(cfg, 0);
  const int64_t oracle = shape_walk_param_count(cfg);
  if (net.parameter_count() != oracle) {
    detail = "parameter count " + std::to_string(net.parameter_count()) + " vs oracle " +
             std::to_string(oracle);
    return false;
  }

  std::mt19937_64 rng(5);
  Tensor x({2, 3, 256, 448});
  std::uniform_real_distribution<float> d(0, 1);
  for (auto& v : x.data) v = d(rng);
  const auto logits = net.forward_train(x);
  const std::vector<std::vector<int64_t>> expected_shapes = {
      {2, 2, 256, 448}, {2, 2, 128, 224}, {2, 2, 64, 112}, {2, 2, 32, 56}};
  if (logits.size() != expected_shapes.size()) {
    detail = "expected 4 heads, got " + std::to_string(logits.size());
    return false;
  }
  for (size_t i = 0; i < logits.size(); ++i)
    if (logits[i].shape != expected_shapes[i]) {
      detail = "head " + std::to_string(i) + " shape " + logits[i].shape_str();
      return false;
    }
  return true;
}

// --- criterion 6: gradient reach --------------------------------------------

bool crit_gradient_reach(std::string& detail) {
  // default topology (6 stages, blocks 1,2,3,4,5,5, 4 heads) at reduced width
  model::ModelConfig cfg;
  cfg.base_features = 8;
  model::ResUNet net(cfg, 6);
  std::mt19937_64 rng(7);
  Tensor x({2, 3, 64, 96});
  std::uniform_real_distribution<float> d(0, 1);
  for (auto& v : x.data) v = d(rng);
  Tensor target({2, 1, 64, 96});
  std::bernoulli_distribution coin(0.5);
  for (auto& v : target.data) v = coin(rng) ? 1.0f : 0.0f;

  const auto logits = net.forward_train(x);
  const auto targets = loss::downsample_soft_gt(target, cfg.deep_supervision_heads);
  std::vector<Tensor> grads;
  loss::total_loss<float>(logits, targets, &grads);
  net.zero_grad();
  net.backward(grads);

  bool ok = true;
  std::string first_dead;
  net.visit_params([&](const std::string& name, Tensor&, Tensor& grad) {
    bool nonzero = false;
    for (float g : grad.data)
      if (g != 0.0f) {
        nonzero = true;
        break;
      }
    if (!nonzero && ok) {
      ok = false;
      first_dead = name;
    }
  });
  if (!ok) detail = "zero gradient in " + first_dead;
  return ok;
}

// --- criterion 7: desk-scale overfit ----------------------------------------

bool crit_overfit(std::string& detail) {
  Scratch tmp("overfit");
  data::SynthSpec spec;
  spec.surgeries_per_type = 1;
  spec.frames_per_surgery = 4;  // 8 frames total
  spec.height = 128;
  spec.width = 224;
  spec.p_zero_instruments = 0.0;
  data::make_synthetic_dataset(spec, tmp.path / "data", 7);

  model::ModelConfig mcfg;
  mcfg.base_features = 8;
  mcfg.num_stages = 3;
  mcfg.blocks_per_stage = {1, 2, 2};
  mcfg.deep_supervision_heads = 2;

  train::TrainConfig tcfg;
  tcfg.batch_size = 4;
  tcfg.epochs = 50;
  tcfg.batches_per_epoch = 10;
  tcfg.initial_lr = 0.1;  // paper settings scaled to desk size
  tcfg.momentum = 0.9;
  tcfg.poly_exponent = 0.9;
  tcfg.patch_h = 64;
  tcfg.patch_w = 112;
  tcfg.seed = 11;

  data::FoldSplit all_train;
  all_train.fold_index = 0;
  all_train.train_surgeries = {{data::SurgeryType::Prokto, 1}, {data::SurgeryType::Rectum, 1}};

  const auto result = train::train_fold(tmp.path / "data", all_train, mcfg, tcfg,
                                        augment::AugmentConfig::disabled(), tmp.path / "run");

  // training loss is eventually decreasing
  const auto& losses = result.epoch_losses;
  double first10 = 0, last10 = 0;
  for (int i = 0; i < 10; ++i) {
    first10 += losses[i];
    last10 += losses[losses.size() - 10 + i];
  }
  if (!(last10 / 10 < first10 / 10)) {
    detail = "loss not decreasing";
    return false;
  }
  if (!(losses.back() < -0.5)) {
    detail = "final training loss " + std::to_string(losses.back()) + " not < -0.5";
    return false;
  }

  const auto ckpt = model::read_checkpoint(result.final_checkpoint);
  model::ResUNet net(ckpt.config, 0);
  model::restore_model_tensors(net, ckpt);

  const auto records = data::load_dataset_index(tmp.path / "data");
  std::vector<eval::DiceValue> scores;
  for (const auto& rec : records) {
    const Tensor image = data::preprocess(img::read_image(rec.image_path));
    const auto plan = infer::plan_windows({image.dim(1), image.dim(2)}, {64, 112});
    const auto pred = infer::ensemble_predict({&net}, image, plan);
    const img::MaskU8 binary = infer::binarize(pred.softmax);
    const img::MaskU8 gt = data::binarize_mask(img::read_mask(*rec.mask_path));
    scores.push_back(eval::dice_score(binary, gt, eval::Convention::Train));
  }
  const auto summary = eval::summarize(scores);
  if (summary.mean < 0.90) {
    detail = "mean training-set dice " + std::to_string(summary.mean) + " < 0.90";
    return false;
  }
  detail = "mean dice " + std::to_string(summary.mean);
  return true;
}

// --- criterion 8: sliding-window and ensemble identities ----------------------

bool crit_sliding_ensemble(std::string& detail) {
  const auto plan = infer::plan_windows({270, 480}, {256, 448});
  const std::vector<std::pair<int64_t, int64_t>> expected = {{0, 0}, {0, 32}, {14, 0}, {14, 32}};
  if (plan.origins != expected) {
    detail = "window origins differ from {0,14}x{0,32}";
    return false;
  }

  model::ModelConfig cfg;
  cfg.base_features = 8;
  cfg.num_stages = 3;
  cfg.blocks_per_stage = {1, 1, 2};
  cfg.deep_supervision_heads = 2;
  model::ResUNet net(cfg, 8);
  std::mt19937_64 rng(9);
  Tensor image({3, 64, 96});
  std::uniform_real_distribution<float> d(0, 1);
  for (auto& v : image.data) v = d(rng);

  const auto single = infer::plan_windows({64, 96}, {64, 96});
  const Tensor sliding = infer::sliding_window_predict(net, image, single);
  Tensor batch({1, 3, 64, 96});
  std::copy(image.data.begin(), image.data.end(), batch.data.begin());
  const Tensor direct = net.forward_eval(batch);
  for (int64_t c = 0; c < 2; ++c)
    for (int64_t y = 0; y < 64; ++y)
      for (int64_t x = 0; x < 96; ++x)
        if (std::abs(sliding.at(c, y, x) - direct.at(0, c, y, x)) >= 1e-5) {
          detail = "single-window plan differs from direct forward";
          return false;
        }

  const auto one = infer::ensemble_predict({&net}, image, single);
  const auto three = infer::ensemble_predict({&net, &net, &net}, image, single);
  for (int64_t i = 0; i < one.softmax.numel(); ++i)
    if (std::abs(one.softmax[i] - three.softmax[i]) >= 1e-6) {
      detail = "ensemble of three copies differs from the single member";
      return false;
    }
  return true;
}

// --- criterion 9: connected components ---------------------------------------

infer::InstanceLabels flood_fill_reference(const img::MaskU8& binary) {
  infer::InstanceLabels out;
  out.height = binary.height;
  out.width = binary.width;
  out.labels.assign(static_cast<size_t>(binary.height * binary.width), 0);
  for (int64_t y = 0; y < binary.height; ++y)
    for (int64_t x = 0; x < binary.width; ++x) {
      if (!binary.at(y, x) || out.labels[static_cast<size_t>(y * binary.width + x)]) continue;
      const int32_t id = ++out.count;
      std::deque<std::pair<int64_t, int64_t>> queue{{y, x}};
      out.labels[static_cast<size_t>(y * binary.width + x)] = id;
      while (!queue.empty()) {
        const auto [cy, cx] = queue.front();
        queue.pop_front();
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int64_t ny = cy + dy, nx = cx + dx;
            if (ny < 0 || ny >= binary.height || nx < 0 || nx >= binary.width) continue;
            if (!binary.at(ny, nx)) continue;
            auto& lab = out.labels[static_cast<size_t>(ny * binary.width + nx)];
            if (!lab) {
              lab = id;
              queue.emplace_back(ny, nx);
            }
          }
      }
    }
  return out;
}

bool crit_connected_components(std::string& detail) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    img::MaskU8 mask(32, 32);
    std::bernoulli_distribution coin(trial % 2 ? 0.5 : 0.3);
    for (auto& v : mask.labels) v = coin(rng) ? 1 : 0;
    const auto got = infer::connected_components(mask);
    const auto want = flood_fill_reference(mask);
    if (got.count != want.count || got.labels != want.labels) {
      detail = "disagreement with the flood-fill oracle on trial " + std::to_string(trial);
      return false;
    }
  }
  img::MaskU8 diag(5, 5);
  diag.at(0, 0) = diag.at(1, 1) = diag.at(2, 2) = diag.at(3, 3) = 1;
  if (infer::connected_components(diag).count != 1) {
    detail = "diagonal-touching pixels split under 8-connectivity";
    return false;
  }
  return true;
}

// --- criterion 10: evaluation convention --------------------------------------

bool crit_eval_convention(std::string& detail) {
  img::MaskU8 empty(4, 4), one_fp(4, 4);
  one_fp.at(2, 2) = 1;

  const auto fp_train = eval::dice_score(one_fp, empty, eval::Convention::Train);
  if (fp_train.excluded || fp_train.value != 0.0) {
    detail = "single false positive on empty GT should score 0 under train convention";
    return false;
  }
  if (!eval::dice_score(empty, empty, eval::Convention::Train).excluded) {
    detail = "both-empty frame must be excluded";
    return false;
  }
  if (!eval::dice_score(one_fp, empty, eval::Convention::Test).excluded ||
      !eval::dice_score(empty, empty, eval::Convention::Test).excluded) {
    detail = "test convention must exclude every empty-GT frame";
    return false;
  }

  const auto summary = eval::summarize({{false, 0.0}, {false, 1.0}, {true, 0.0}});
  if (!close(summary.mean, 0.5, 1e-12) || summary.count_excluded != 1) {
    detail = "cohort [0, 1, EXCLUDED] summarized wrongly";
    return false;
  }
  return true;
}

// --- criterion 11: polyLR ------------------------------------------------------

bool crit_poly_lr(std::string& detail) {
  train::TrainConfig cfg;
  cfg.epochs = 2000;
  cfg.initial_lr = 1.0;
  cfg.poly_exponent = 0.9;
  if (train::poly_lr(0, cfg) != 1.0) {
    detail = "epoch 0 lr != 1.0";
    return false;
  }
  if (train::poly_lr(2000, cfg) != 0.0) {
    detail = "final epoch lr != 0.0";
    return false;
  }
  if (!close(train::poly_lr(1000, cfg), 0.535887, 1e-6)) {
    detail = "midpoint lr " + std::to_string(train::poly_lr(1000, cfg));
    return false;
  }
  double prev = train::poly_lr(0, cfg);
  for (int e = 1; e <= 2000; ++e) {
    const double lr = train::poly_lr(e, cfg);
    if (!(lr < prev)) {
      detail = "sequence not strictly decreasing at epoch " + std::to_string(e);
      return false;
    }
    prev = lr;
  }
  return true;
}

// --- criterion 12: end-to-end pipeline smoke -----------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ORUNET_BIN) + " " + args + " >/dev/null 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

bool crit_end_to_end(std::string& detail) {
  Scratch tmp("e2e");

  {
    std::ofstream spec(tmp.path / "synth.spec");
    spec << "surgeries_per_type = 2\nframes_per_surgery = 3\nheight = 128\nwidth = 224\n"
         << "p_zero_instruments = 0.15\n";
  }
  if (run_cli("synth --spec " + (tmp.path / "synth.spec").string() + " --out " +
              (tmp.path / "data").string() + " --seed 42") != 0) {
    detail = "synth failed";
    return false;
  }
  if (run_cli("split --data-root " + (tmp.path / "data").string() + " --out " +
              (tmp.path / "folds.txt").string()) != 0) {
    detail = "split failed";
    return false;
  }

  cli::ExperimentConfig cfg;
  cfg.data_root = tmp.path / "data";
  cfg.output_dir = tmp.path / "run";
  cfg.model.base_features = 8;
  cfg.model.num_stages = 3;
  cfg.model.blocks_per_stage = {1, 2, 2};
  cfg.model.deep_supervision_heads = 2;
  cfg.train.batch_size = 4;
  cfg.train.epochs = 8;
  cfg.train.batches_per_epoch = 10;
  cfg.train.initial_lr = 0.1;
  cfg.train.patch_h = 64;
  cfg.train.patch_w = 112;
  cfg.train.seed = 3;
  cfg.augment = augment::AugmentConfig::disabled();
  cli::write_config_file(tmp.path / "cfg.ini", cfg);

  for (int fold : {0, 1})
    if (run_cli("train --config " + (tmp.path / "cfg.ini").string() + " --fold " +
                std::to_string(fold)) != 0) {
      detail = "train fold " + std::to_string(fold) + " failed";
      return false;
    }

  if (run_cli("predict --config " + (tmp.path / "cfg.ini").string() + " --checkpoints " +
              (tmp.path / "run" / "fold0_final.ckpt").string() + " " +
              (tmp.path / "run" / "fold1_final.ckpt").string() + " --out " +
              (tmp.path / "pred").string()) != 0) {
    detail = "predict failed";
    return false;
  }
  if (run_cli("evaluate --pred " + (tmp.path / "pred").string() + " --gt " +
              (tmp.path / "data").string() + " --convention train --out " +
              (tmp.path / "eval").string()) != 0) {
    detail = "evaluate failed";
    return false;
  }

  // recount independently: a frame is excluded iff prediction and GT are both
  // empty (train convention)
  const auto records = data::load_dataset_index(tmp.path / "data");
  int64_t expect_included = 0, expect_excluded = 0;
  for (const auto& rec : records) {
    const img::MaskU8 gt = img::read_mask(*rec.mask_path);
    const img::MaskU8 pred =
        img::read_mask(tmp.path / "pred" / data::to_string(rec.surgery_type) /
                       std::to_string(rec.surgery_id) / std::to_string(rec.frame_id) /
                       "binary.png");
    bool gt_any = false, pred_any = false;
    for (auto v : gt.labels) gt_any = gt_any || v > 0;
    for (auto v : pred.labels) pred_any = pred_any || v > 0;
    if (!gt_any && !pred_any)
      ++expect_excluded;
    else
      ++expect_included;
  }

  std::ifstream summary(tmp.path / "eval" / "summary.txt");
  std::map<std::string, std::string> kv;
  std::string key, value;
  while (summary >> key >> value) kv[key] = value;
  if (kv.count("count_included") == 0) {
    detail = "summary.txt missing counts";
    return false;
  }
  const int64_t got_included = std::stoll(kv["count_included"]);
  const int64_t got_excluded = std::stoll(kv["count_excluded"]);
  if (got_included != expect_included || got_excluded != expect_excluded) {
    detail = "summary counts " + std::to_string(got_included) + "/" +
             std::to_string(got_excluded) + " vs recount " + std::to_string(expect_included) +
             "/" + std::to_string(expect_excluded);
    return false;
  }
  if (got_included + got_excluded != static_cast<int64_t>(records.size())) {
    detail = "summary counts do not cover every frame";
    return false;
  }
  detail = "included " + std::to_string(got_included) + ", excluded " +
           std::to_string(got_excluded) + ", mean " + kv["mean"];
  return true;
}

struct Criterion {
  int number;
  const char* name;
  std::function<bool(std::string&)> fn;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "loss hand values", crit_loss_hand_values},
      {2, "loss gradient checks vs finite differences", crit_gradient_checks},
      {3, "deep-supervision weights", crit_ds_weights},
      {4, "soft-label stack mean preservation", crit_soft_label_stack},
      {5, "architecture shape law and parameter count", crit_architecture_shape_law},
      {6, "gradient reach into every parameter", crit_gradient_reach},
      {7, "desk-scale overfit to mean dice >= 0.90", crit_overfit},
      {8, "sliding-window and ensemble identities", crit_sliding_ensemble},
      {9, "connected components vs flood-fill oracle", crit_connected_components},
      {10, "evaluation exclusion conventions", crit_eval_convention},
      {11, "polyLR schedule", crit_poly_lr},
      {12, "end-to-end pipeline smoke via the CLI", crit_end_to_end},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);

  int failures = 0;
  for (const auto& crit : criteria()) {
    if (only != 0 && crit.number != only) continue;
    std::string detail;
    bool ok = false;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      ok = crit.fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %d: %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", crit.number,
                crit.name, secs, detail.empty() ? "" : " — ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
