#include "orunet/model.hpp"

#include <cmath>
#include <stdexcept>

#include "orunet/losses.hpp"
#include "orunet/rng.hpp"

namespace orunet::model {

void ModelConfig::validate() const {
  if (base_features < 1) throw std::invalid_argument("ModelConfig: base_features must be >= 1");
  if (max_features < base_features)
    throw std::invalid_argument("ModelConfig: max_features must be >= base_features");
  if (num_stages < 2) throw std::invalid_argument("ModelConfig: num_stages must be >= 2");
  if (static_cast<int>(blocks_per_stage.size()) != num_stages)
    throw std::invalid_argument("ModelConfig: blocks_per_stage must have one entry per stage");
  for (size_t i = 0; i < blocks_per_stage.size(); ++i) {
    if (blocks_per_stage[i] < 1)
      throw std::invalid_argument("ModelConfig: blocks_per_stage entries must be >= 1");
    if (i > 0 && blocks_per_stage[i] < blocks_per_stage[i - 1])
      throw std::invalid_argument("ModelConfig: blocks_per_stage must be nondecreasing");
  }
  if (num_classes < 2) throw std::invalid_argument("ModelConfig: num_classes must be >= 2");
  if (deep_supervision_heads < 1 || deep_supervision_heads > num_stages - 1)
    throw std::invalid_argument(
        "ModelConfig: deep_supervision_heads must be in [1, num_stages - 1]");
  if (input_channels < 1) throw std::invalid_argument("ModelConfig: input_channels must be >= 1");
  if (norm_epsilon <= 0) throw std::invalid_argument("ModelConfig: norm_epsilon must be > 0");
}

std::vector<int> feature_counts(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<int> f(static_cast<size_t>(cfg.num_stages));
  for (int s = 0; s < cfg.num_stages; ++s) {
    const int64_t doubled = int64_t(cfg.base_features) << s;
    f[s] = static_cast<int>(std::min<int64_t>(doubled, cfg.max_features));
  }
  return f;
}

namespace {

void he_init(Tensor& w, int64_t fan_in, Rng& rng) {
  std::normal_distribution<double> d(0.0, std::sqrt(2.0 / double(fan_in)));
  for (float& v : w.data) v = static_cast<float>(d(rng));
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const int64_t n = a.dim(0), ha = a.dim(2), wa = a.dim(3);
  Tensor out({n, a.dim(1) + b.dim(1), ha, wa});
  for (int64_t ni = 0; ni < n; ++ni) {
    std::copy(&a.at(ni, 0, 0, 0), &a.at(ni, 0, 0, 0) + a.dim(1) * ha * wa,
              &out.at(ni, 0, 0, 0));
    std::copy(&b.at(ni, 0, 0, 0), &b.at(ni, 0, 0, 0) + b.dim(1) * ha * wa,
              &out.at(ni, a.dim(1), 0, 0));
  }
  return out;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& cat, int64_t c_first) {
  const int64_t n = cat.dim(0), h = cat.dim(2), w = cat.dim(3);
  const int64_t c_second = cat.dim(1) - c_first;
  Tensor a({n, c_first, h, w}), b({n, c_second, h, w});
  for (int64_t ni = 0; ni < n; ++ni) {
    std::copy(&cat.at(ni, 0, 0, 0), &cat.at(ni, 0, 0, 0) + c_first * h * w, &a.at(ni, 0, 0, 0));
    std::copy(&cat.at(ni, c_first, 0, 0), &cat.at(ni, c_first, 0, 0) + c_second * h * w,
              &b.at(ni, 0, 0, 0));
  }
  return {std::move(a), std::move(b)};
}

void add_inplace(Tensor& a, const Tensor& b) {
  for (int64_t i = 0; i < a.numel(); ++i) a[i] += b[i];
}

}  // namespace

// ---------------------------------------------------------------------------
// ResidualBlock: pre-activation ordering (norm -> ReLU -> conv, twice) with an
// additive shortcut. Downsampling blocks use stride 2 on the first convolution
// and a stride-2 1x1 projection that consumes the pre-activated input.

Tensor ResUNet::ResidualBlock::forward_train(const Tensor& x, Cache* cache) {
  cache->x = x;
  Tensor a = bn1.forward_train(x, &cache->bn1c);
  cache->r1 = nn::relu(a);
  Tensor c1 = conv1.forward(cache->r1);
  Tensor b = bn2.forward_train(c1, &cache->bn2c);
  cache->r2 = nn::relu(b);
  Tensor y = conv2.forward(cache->r2);
  if (project)
    add_inplace(y, proj.forward(cache->r1));
  else
    add_inplace(y, x);
  return y;
}

Tensor ResUNet::ResidualBlock::forward_eval(const Tensor& x) const {
  Tensor r1 = nn::relu(bn1.forward_eval(x));
  Tensor y = conv2.forward(nn::relu(bn2.forward_eval(conv1.forward(r1))));
  if (project)
    add_inplace(y, proj.forward(r1));
  else
    add_inplace(y, x);
  return y;
}

Tensor ResUNet::ResidualBlock::backward(const Tensor& grad_y, Cache& cache) {
  Tensor dr2 = conv2.backward(cache.r2, grad_y);
  Tensor db = nn::relu_backward(cache.r2, dr2);
  Tensor dc1 = bn2.backward(db, cache.bn2c);
  Tensor dr1 = conv1.backward(cache.r1, dc1);
  if (project) add_inplace(dr1, proj.backward(cache.r1, grad_y));
  Tensor da = nn::relu_backward(cache.r1, dr1);
  Tensor dx = bn1.backward(da, cache.bn1c);
  if (!project) add_inplace(dx, grad_y);
  return dx;
}

// ---------------------------------------------------------------------------
// DecoderLevel: transposed-conv upsampling, skip concatenation, then exactly
// two 3x3 convolutions each followed by normalization and ReLU.

Tensor ResUNet::DecoderLevel::forward_train(const Tensor& deep, const Tensor& skip,
                                            Cache* cache) {
  cache->deep = deep;
  cache->cat = concat_channels(skip, up.forward(deep));
  Tensor c1 = conv1.forward(cache->cat);
  cache->r1 = nn::relu(bn1.forward_train(c1, &cache->bn1c));
  Tensor c2 = conv2.forward(cache->r1);
  cache->r2 = nn::relu(bn2.forward_train(c2, &cache->bn2c));
  return cache->r2;
}

Tensor ResUNet::DecoderLevel::forward_eval(const Tensor& deep, const Tensor& skip) const {
  Tensor cat = concat_channels(skip, up.forward(deep));
  Tensor r1 = nn::relu(bn1.forward_eval(conv1.forward(cat)));
  return nn::relu(bn2.forward_eval(conv2.forward(r1)));
}

std::pair<Tensor, Tensor> ResUNet::DecoderLevel::backward(const Tensor& grad_y, Cache& cache) {
  Tensor db2 = nn::relu_backward(cache.r2, grad_y);
  Tensor dc2 = bn2.backward(db2, cache.bn2c);
  Tensor dr1 = conv2.backward(cache.r1, dc2);
  Tensor db1 = nn::relu_backward(cache.r1, dr1);
  Tensor dc1 = bn1.backward(db1, cache.bn1c);
  Tensor dcat = conv1.backward(cache.cat, dc1);
  auto [dskip, dup] = split_channels(dcat, cache.cat.dim(1) - up.out_ch);
  Tensor ddeep = up.backward(cache.deep, dup);
  return {std::move(ddeep), std::move(dskip)};
}

// ---------------------------------------------------------------------------

ResUNet::ResUNet(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  features_ = feature_counts(cfg_);
  const double eps = cfg_.norm_epsilon;

  stem_ = nn::Conv2d<float>(cfg_.input_channels, features_[0], 3, 1, 1, false);

  stages_.resize(static_cast<size_t>(cfg_.num_stages));
  for (int s = 0; s < cfg_.num_stages; ++s) {
    const int in_stage = s == 0 ? features_[0] : features_[s - 1];
    for (int b = 0; b < cfg_.blocks_per_stage[s]; ++b) {
      ResidualBlock blk;
      const int in_ch = b == 0 ? in_stage : features_[s];
      const int out_ch = features_[s];
      const int stride = (b == 0 && s > 0) ? 2 : 1;
      blk.project = stride == 2;
      blk.bn1 = nn::BatchNorm2d<float>(in_ch, eps);
      blk.conv1 = nn::Conv2d<float>(in_ch, out_ch, 3, stride, 1, false);
      blk.bn2 = nn::BatchNorm2d<float>(out_ch, eps);
      blk.conv2 = nn::Conv2d<float>(out_ch, out_ch, 3, 1, 1, false);
      if (blk.project) blk.proj = nn::Conv2d<float>(in_ch, out_ch, 1, 2, 0, false);
      stages_[s].push_back(std::move(blk));
    }
  }

  decoder_.resize(static_cast<size_t>(cfg_.num_stages - 1));
  for (int r = cfg_.num_stages - 2; r >= 0; --r) {
    DecoderLevel lvl;
    lvl.up = nn::ConvTranspose2x2<float>(features_[r + 1], features_[r]);
    lvl.conv1 = nn::Conv2d<float>(2 * features_[r], features_[r], 3, 1, 1, false);
    lvl.bn1 = nn::BatchNorm2d<float>(features_[r], eps);
    lvl.conv2 = nn::Conv2d<float>(features_[r], features_[r], 3, 1, 1, false);
    lvl.bn2 = nn::BatchNorm2d<float>(features_[r], eps);
    decoder_[r] = std::move(lvl);
  }

  for (int i = 0; i < cfg_.deep_supervision_heads; ++i)
    heads_.emplace_back(features_[i], cfg_.num_classes, 1, 1, 0, true);

  // Seed-deterministic initialization: He fan-in for every convolution
  // kernel, unit scale / zero shift for normalization.
  Rng rng = substream(seed, "init");
  visit_params([&rng](const std::string& name, Tensor& value, Tensor&) {
    if (name.ends_with(".weight")) {
      int64_t fan_in;
      if (name.find(".up.") != std::string::npos)
        fan_in = value.dim(0);  // transposed 2x2: one input site per output site
      else
        fan_in = value.dim(1) * value.dim(2) * value.dim(3);
      // visit order is fixed, so draws are reproducible
      he_init(value, fan_in, rng);
    }
    // scale/shift/bias keep their constructed values (1 / 0 / 0)
  });
}

void ResUNet::check_input(const Tensor& batch) const {
  if (batch.rank() != 4 || batch.dim(1) != cfg_.input_channels)
    throw std::invalid_argument("ResUNet: expected (n, " + std::to_string(cfg_.input_channels) +
                                ", h, w) input, got " + batch.shape_str());
  const int64_t div = int64_t(1) << (cfg_.num_stages - 1);
  if (batch.dim(2) % div != 0 || batch.dim(3) % div != 0)
    throw std::invalid_argument("ResUNet: spatial size " + std::to_string(batch.dim(2)) + "x" +
                                std::to_string(batch.dim(3)) + " must be divisible by " +
                                std::to_string(div));
}

MultiScaleLogits ResUNet::forward_train(const Tensor& batch) {
  check_input(batch);
  cache_ = TrainCache{};
  cache_.stem_in = batch;
  Tensor x = stem_.forward(batch);

  std::vector<Tensor> skips;  // output of each encoder stage
  cache_.stage_caches.resize(stages_.size());
  for (size_t s = 0; s < stages_.size(); ++s) {
    cache_.stage_caches[s].resize(stages_[s].size());
    for (size_t b = 0; b < stages_[s].size(); ++b)
      x = stages_[s][b].forward_train(x, &cache_.stage_caches[s][b]);
    skips.push_back(x);
  }

  cache_.dec_caches.resize(decoder_.size());
  std::vector<Tensor> dec_out(decoder_.size());
  Tensor deep = skips.back();
  for (int r = cfg_.num_stages - 2; r >= 0; --r) {
    deep = decoder_[r].forward_train(deep, skips[r], &cache_.dec_caches[r]);
    dec_out[r] = deep;
  }

  MultiScaleLogits logits;
  cache_.head_inputs.resize(heads_.size());
  for (size_t i = 0; i < heads_.size(); ++i) {
    cache_.head_inputs[i] = dec_out[i];
    logits.push_back(heads_[i].forward(dec_out[i]));
  }
  cache_.valid = true;
  return logits;
}

Tensor ResUNet::forward_eval(const Tensor& batch) const {
  check_input(batch);
  Tensor x = stem_.forward(batch);
  std::vector<Tensor> skips;
  for (const auto& stage : stages_) {
    for (const auto& blk : stage) x = blk.forward_eval(x);
    skips.push_back(x);
  }
  Tensor deep = skips.back();
  for (int r = cfg_.num_stages - 2; r >= 0; --r)
    deep = decoder_[r].forward_eval(deep, skips[r]);
  return loss::channel_softmax(heads_[0].forward(deep));
}

void ResUNet::backward(const MultiScaleLogits& grad_logits) {
  if (!cache_.valid) throw std::logic_error("ResUNet::backward without forward_train");
  if (grad_logits.size() != heads_.size())
    throw std::invalid_argument("ResUNet::backward: expected one gradient per head");

  // Head gradients enter the decoder outputs at their resolutions.
  std::vector<Tensor> d_dec(decoder_.size());
  for (size_t i = 0; i < heads_.size(); ++i)
    d_dec[i] = heads_[i].backward(cache_.head_inputs[i], grad_logits[i]);

  // Walk the decoder from the full-resolution level down to the bottleneck,
  // accumulating the gradient flowing into each encoder skip.
  std::vector<Tensor> d_skip(stages_.size());
  Tensor d_deep;
  for (size_t r = 0; r < decoder_.size(); ++r) {
    Tensor grad_out = r == 0 ? Tensor(cache_.dec_caches[r].r2.shape) : std::move(d_deep);
    if (r == 0) grad_out.zero();
    if (r < d_dec.size() && d_dec[r].numel() > 0) add_inplace(grad_out, d_dec[r]);
    auto [dd, ds] = decoder_[r].backward(grad_out, cache_.dec_caches[r]);
    d_deep = std::move(dd);
    d_skip[r] = std::move(ds);
  }
  d_skip[stages_.size() - 1] = std::move(d_deep);  // bottleneck skip is the stage output itself

  // Encoder stages in reverse; each stage's input gradient joins the skip
  // gradient of the previous stage.
  Tensor dx = std::move(d_skip[stages_.size() - 1]);
  for (int s = cfg_.num_stages - 1; s >= 0; --s) {
    if (s != cfg_.num_stages - 1) add_inplace(dx, d_skip[s]);
    for (int b = static_cast<int>(stages_[s].size()) - 1; b >= 0; --b)
      dx = stages_[s][b].backward(dx, cache_.stage_caches[s][b]);
  }
  stem_.backward(cache_.stem_in, dx);
  cache_ = TrainCache{};  // caches are single-use
}

void ResUNet::zero_grad() {
  visit_params([](const std::string&, Tensor&, Tensor& grad) { grad.zero(); });
}

void ResUNet::visit_params(const std::function<void(const std::string&, Tensor&, Tensor&)>& fn) {
  fn("stem.conv.weight", stem_.weight, stem_.grad_weight);
  for (size_t s = 0; s < stages_.size(); ++s)
    for (size_t b = 0; b < stages_[s].size(); ++b) {
      auto& blk = stages_[s][b];
      const std::string p = "enc.s" + std::to_string(s) + ".b" + std::to_string(b) + ".";
      fn(p + "bn1.scale", blk.bn1.scale, blk.bn1.grad_scale);
      fn(p + "bn1.shift", blk.bn1.shift, blk.bn1.grad_shift);
      fn(p + "conv1.weight", blk.conv1.weight, blk.conv1.grad_weight);
      fn(p + "bn2.scale", blk.bn2.scale, blk.bn2.grad_scale);
      fn(p + "bn2.shift", blk.bn2.shift, blk.bn2.grad_shift);
      fn(p + "conv2.weight", blk.conv2.weight, blk.conv2.grad_weight);
      if (blk.project) fn(p + "proj.weight", blk.proj.weight, blk.proj.grad_weight);
    }
  for (size_t r = 0; r < decoder_.size(); ++r) {
    auto& lvl = decoder_[r];
    const std::string p = "dec.r" + std::to_string(r) + ".";
    fn(p + "up.weight", lvl.up.weight, lvl.up.grad_weight);
    fn(p + "conv1.weight", lvl.conv1.weight, lvl.conv1.grad_weight);
    fn(p + "bn1.scale", lvl.bn1.scale, lvl.bn1.grad_scale);
    fn(p + "bn1.shift", lvl.bn1.shift, lvl.bn1.grad_shift);
    fn(p + "conv2.weight", lvl.conv2.weight, lvl.conv2.grad_weight);
    fn(p + "bn2.scale", lvl.bn2.scale, lvl.bn2.grad_scale);
    fn(p + "bn2.shift", lvl.bn2.shift, lvl.bn2.grad_shift);
  }
  for (size_t i = 0; i < heads_.size(); ++i) {
    const std::string p = "head.r" + std::to_string(i) + ".";
    fn(p + "weight", heads_[i].weight, heads_[i].grad_weight);
    fn(p + "bias", heads_[i].bias, heads_[i].grad_bias);
  }
}

void ResUNet::visit_buffers(const std::function<void(const std::string&, Tensor&)>& fn) {
  auto bn_buffers = [&fn](const std::string& p, nn::BatchNorm2d<float>& bn) {
    fn(p + ".running_mean", bn.running_mean);
    fn(p + ".running_var", bn.running_var);
  };
  for (size_t s = 0; s < stages_.size(); ++s)
    for (size_t b = 0; b < stages_[s].size(); ++b) {
      auto& blk = stages_[s][b];
      const std::string p = "enc.s" + std::to_string(s) + ".b" + std::to_string(b) + ".";
      bn_buffers(p + "bn1", blk.bn1);
      bn_buffers(p + "bn2", blk.bn2);
    }
  for (size_t r = 0; r < decoder_.size(); ++r) {
    const std::string p = "dec.r" + std::to_string(r) + ".";
    bn_buffers(p + "bn1", decoder_[r].bn1);
    bn_buffers(p + "bn2", decoder_[r].bn2);
  }
}

int64_t ResUNet::parameter_count() {
  int64_t total = 0;
  visit_params([&total](const std::string&, Tensor& v, Tensor&) { total += v.numel(); });
  return total;
}

}  // namespace orunet::model
