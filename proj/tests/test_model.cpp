#include <doctest.h>

#include <fstream>
#include <random>

#include "helpers.hpp"
#include "orunet/checkpoint.hpp"
#include "orunet/losses.hpp"
#include "orunet/model.hpp"

using namespace orunet;

namespace {

// Independent shape walk: parameter element count derived purely from the
// architecture rules, never from the model object.
int64_t shape_walk_param_count(const model::ModelConfig& cfg) {
  const auto f = model::feature_counts(cfg);
  int64_t total = int64_t(cfg.input_channels) * f[0] * 9;  // stem conv, no bias
  for (int s = 0; s < cfg.num_stages; ++s)
    for (int b = 0; b < cfg.blocks_per_stage[s]; ++b) {
      const int64_t in = b == 0 ? (s == 0 ? f[0] : f[s - 1]) : f[s];
      const int64_t out = f[s];
      total += 2 * in;         // bn1 scale+shift
      total += 9 * in * out;   // conv1 3x3
      total += 2 * out;        // bn2
      total += 9 * out * out;  // conv2 3x3
      if (s > 0 && b == 0) total += in * out;  // 1x1 stride-2 projection
    }
  for (int r = 0; r < cfg.num_stages - 1; ++r) {
    total += 4 * int64_t(f[r + 1]) * f[r];    // transposed conv 2x2
    total += 9 * (2 * int64_t(f[r])) * f[r];  // conv1 on the concatenation
    total += 2 * f[r];
    total += 9 * int64_t(f[r]) * f[r];        // conv2
    total += 2 * f[r];
  }
  for (int i = 0; i < cfg.deep_supervision_heads; ++i)
    total += int64_t(f[i]) * cfg.num_classes + cfg.num_classes;
  return total;
}

}  // namespace

TEST_CASE("feature_counts doubling with cap") {
  model::ModelConfig cfg;  // defaults: base 48, max 512, 6 stages
  CHECK(model::feature_counts(cfg) == std::vector<int>{48, 96, 192, 384, 512, 512});

  cfg = testutil::tiny_model_config();
  CHECK(model::feature_counts(cfg) == std::vector<int>{8, 16, 32});

  cfg = model::ModelConfig{};
  cfg.max_features = 48;
  CHECK(model::feature_counts(cfg) == std::vector<int>{48, 48, 48, 48, 48, 48});
}

TEST_CASE("ModelConfig invariants") {
  model::ModelConfig cfg = testutil::tiny_model_config();
  CHECK_NOTHROW(cfg.validate());

  model::ModelConfig bad = cfg;
  bad.blocks_per_stage = {2, 1, 1};  // must be nondecreasing
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = cfg;
  bad.deep_supervision_heads = 3;  // > num_stages - 1
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = cfg;
  bad.blocks_per_stage = {1, 1};  // wrong length
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("head shapes follow the halving law") {
  model::ResUNet net(testutil::tiny_model_config(), 1);
  std::mt19937_64 rng(5);
  const Tensor x = testutil::random_tensor_f({2, 3, 32, 48}, rng);
  const auto logits = net.forward_train(x);
  REQUIRE(logits.size() == 2);
  CHECK(logits[0].shape == std::vector<int64_t>{2, 2, 32, 48});
  CHECK(logits[1].shape == std::vector<int64_t>{2, 2, 16, 24});
}

TEST_CASE("parameter count equals the shape-walk oracle") {
  model::ModelConfig tiny = testutil::tiny_model_config();
  model::ResUNet net(tiny, 0);
  CHECK(net.parameter_count() == shape_walk_param_count(tiny));

  model::ModelConfig wider = tiny;
  wider.base_features = 12;
  wider.num_stages = 4;
  wider.blocks_per_stage = {1, 2, 2, 3};
  wider.deep_supervision_heads = 3;
  model::ResUNet net2(wider, 0);
  CHECK(net2.parameter_count() == shape_walk_param_count(wider));
}

TEST_CASE("initialization is seed-deterministic") {
  const auto cfg = testutil::tiny_model_config();
  model::ResUNet a(cfg, 42), b(cfg, 42), c(cfg, 43);
  std::vector<Tensor> pa, pb, pc;
  a.visit_params([&](const std::string&, Tensor& v, Tensor&) { pa.push_back(v); });
  b.visit_params([&](const std::string&, Tensor& v, Tensor&) { pb.push_back(v); });
  c.visit_params([&](const std::string&, Tensor& v, Tensor&) { pc.push_back(v); });
  bool same = true, differ = false;
  for (size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].data != pb[i].data) same = false;
    if (pa[i].data != pc[i].data) differ = true;
  }
  CHECK(same);
  CHECK(differ);
}

TEST_CASE("zero-initialized head yields uniform softmax") {
  const auto cfg = testutil::tiny_model_config();
  model::ResUNet net(cfg, 7);
  net.visit_params([](const std::string& name, Tensor& value, Tensor&) {
    if (name.starts_with("head.r0.")) value.zero();
  });
  std::mt19937_64 rng(9);
  const Tensor x = testutil::random_tensor_f({1, 3, 16, 24}, rng);
  const Tensor softmax = net.forward_eval(x);
  for (float v : softmax.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("eval forward is deterministic and normalized") {
  model::ResUNet net(testutil::tiny_model_config(), 11);
  std::mt19937_64 rng(13);
  const Tensor x = testutil::random_tensor_f({2, 3, 16, 24}, rng);
  const Tensor p1 = net.forward_eval(x);
  const Tensor p2 = net.forward_eval(x);
  CHECK(p1.data == p2.data);  // bitwise

  for (int64_t n = 0; n < 2; ++n)
    for (int64_t y = 0; y < 16; ++y)
      for (int64_t xx = 0; xx < 24; ++xx)
        CHECK(p1.at(n, 0, y, xx) + p1.at(n, 1, y, xx) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("indivisible input is rejected with the required divisor") {
  model::ResUNet net(testutil::tiny_model_config(), 0);
  const Tensor x({1, 3, 18, 24});  // 18 % 4 != 0
  try {
    net.forward_eval(x);
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("divisible by 4") != std::string::npos);
  }
}

TEST_CASE("one backward pass reaches every parameter") {
  const auto cfg = testutil::tiny_model_config();
  model::ResUNet net(cfg, 21);
  std::mt19937_64 rng(23);
  const Tensor x = testutil::random_tensor_f({2, 3, 16, 24}, rng);
  Tensor target({2, 1, 16, 24});
  std::bernoulli_distribution coin(0.5);
  for (auto& v : target.data) v = coin(rng) ? 1.0f : 0.0f;

  const auto logits = net.forward_train(x);
  const auto targets = loss::downsample_soft_gt(target, cfg.deep_supervision_heads);
  std::vector<Tensor> grads;
  loss::total_loss<float>(logits, targets, &grads);
  net.zero_grad();
  net.backward(grads);

  net.visit_params([](const std::string& name, Tensor&, Tensor& grad) {
    bool nonzero = false;
    for (float g : grad.data)
      if (g != 0.0f) nonzero = true;
    INFO("parameter ", name);
    CHECK(nonzero);
  });
}

TEST_CASE("checkpoint round trip is byte-identical and validates shapes") {
  testutil::TempDir tmp("ckpt");
  const auto cfg = testutil::tiny_model_config();
  model::ResUNet net(cfg, 31);

  model::CheckpointData data;
  data.config = cfg;
  data.meta["epoch"] = "0";
  model::collect_model_tensors(net, data.tensors);
  const auto path1 = tmp.path / "a.ckpt";
  const auto path2 = tmp.path / "b.ckpt";
  model::write_checkpoint(path1, data);

  const auto loaded = model::read_checkpoint(path1);
  CHECK(loaded.config == cfg);
  CHECK(loaded.meta.at("epoch") == "0");
  model::write_checkpoint(path2, loaded);

  std::ifstream f1(path1, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);

  // restore into a model of matching config reproduces eval outputs
  model::ResUNet other(cfg, 99);
  model::restore_model_tensors(other, loaded);
  std::mt19937_64 rng(3);
  const Tensor x = testutil::random_tensor_f({1, 3, 16, 24}, rng);
  CHECK(net.forward_eval(x).data == other.forward_eval(x).data);

  // a model with a different shape walk must reject the tensors
  model::ModelConfig bigger = cfg;
  bigger.base_features = 16;
  model::ResUNet mismatch(bigger, 0);
  CHECK_THROWS(model::restore_model_tensors(mismatch, loaded));

  CHECK(model::read_checkpoint_config(path1) == cfg);
}
