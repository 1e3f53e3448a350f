#include "orunet/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace orunet::infer {

SlidingWindowPlan plan_windows(std::pair<int64_t, int64_t> image_size,
                               std::pair<int64_t, int64_t> window) {
  const auto [h_img, w_img] = image_size;
  const auto [h_win, w_win] = window;
  if (h_win > h_img || w_win > w_img)
    throw std::invalid_argument("plan_windows: window " + std::to_string(h_win) + "x" +
                                std::to_string(w_win) + " larger than image " +
                                std::to_string(h_img) + "x" + std::to_string(w_img));
  auto axis_origins = [](int64_t image, int64_t win) {
    std::vector<int64_t> origins;
    for (int64_t k = 0; k * win < image; ++k) {
      const int64_t o = std::min(k * win, image - win);
      if (origins.empty() || origins.back() != o) origins.push_back(o);
    }
    return origins;
  };

  SlidingWindowPlan plan;
  plan.image_h = h_img;
  plan.image_w = w_img;
  plan.window_h = h_win;
  plan.window_w = w_win;
  for (int64_t oy : axis_origins(h_img, h_win))
    for (int64_t ox : axis_origins(w_img, w_win)) plan.origins.emplace_back(oy, ox);

  plan.coverage.assign(static_cast<size_t>(h_img * w_img), 0);
  for (const auto& [oy, ox] : plan.origins)
    for (int64_t y = oy; y < oy + h_win; ++y)
      for (int64_t x = ox; x < ox + w_win; ++x) ++plan.coverage[static_cast<size_t>(y * w_img + x)];
  return plan;
}

Tensor sliding_window_predict(const model::ResUNet& net, const Tensor& image,
                              const SlidingWindowPlan& plan) {
  if (image.rank() != 3) throw std::invalid_argument("sliding_window_predict: expected (3, H, W)");
  if (image.dim(1) != plan.image_h || image.dim(2) != plan.image_w)
    throw std::invalid_argument("sliding_window_predict: plan does not match image size");
  const int64_t classes = net.config().num_classes;
  Tensor acc({classes, plan.image_h, plan.image_w});

  Tensor window({1, image.dim(0), plan.window_h, plan.window_w});
  for (const auto& [oy, ox] : plan.origins) {
    for (int64_t c = 0; c < image.dim(0); ++c)
      for (int64_t y = 0; y < plan.window_h; ++y)
        for (int64_t x = 0; x < plan.window_w; ++x)
          window.at(0, c, y, x) = image.at(c, oy + y, ox + x);
    const Tensor softmax = net.forward_eval(window);
    for (int64_t c = 0; c < classes; ++c)
      for (int64_t y = 0; y < plan.window_h; ++y)
        for (int64_t x = 0; x < plan.window_w; ++x)
          acc.at(c, oy + y, ox + x) += softmax.at(0, c, y, x);
  }

  for (int64_t y = 0; y < plan.image_h; ++y)
    for (int64_t x = 0; x < plan.image_w; ++x) {
      const int cov = plan.coverage_at(y, x);
      if (cov == 0)
        throw std::logic_error("sliding_window_predict: uncovered pixel");
      double sum = 0;
      for (int64_t c = 0; c < classes; ++c) sum += acc.at(c, y, x) / cov;
      for (int64_t c = 0; c < classes; ++c)
        acc.at(c, y, x) = static_cast<float>(acc.at(c, y, x) / cov / sum);
    }
  return acc;
}

Tensor upsample_bilinear_2x(const Tensor& softmax) {
  if (softmax.rank() != 3) throw std::invalid_argument("upsample_bilinear_2x: expected (C, H, W)");
  const int64_t c_n = softmax.dim(0), h = softmax.dim(1), w = softmax.dim(2);
  Tensor out({c_n, 2 * h, 2 * w});
  for (int64_t y = 0; y < 2 * h; ++y) {
    const double sy = (y + 0.5) / 2.0 - 0.5;
    const int64_t y0 = std::clamp<int64_t>(static_cast<int64_t>(std::floor(sy)), 0, h - 1);
    const int64_t y1 = std::clamp<int64_t>(y0 + 1, 0, h - 1);
    const double fy = std::clamp(sy - std::floor(sy), 0.0, 1.0);
    for (int64_t x = 0; x < 2 * w; ++x) {
      const double sx = (x + 0.5) / 2.0 - 0.5;
      const int64_t x0 = std::clamp<int64_t>(static_cast<int64_t>(std::floor(sx)), 0, w - 1);
      const int64_t x1 = std::clamp<int64_t>(x0 + 1, 0, w - 1);
      const double fx = std::clamp(sx - std::floor(sx), 0.0, 1.0);
      for (int64_t c = 0; c < c_n; ++c) {
        const double v = (1 - fy) * ((1 - fx) * softmax.at(c, y0, x0) + fx * softmax.at(c, y0, x1)) +
                         fy * ((1 - fx) * softmax.at(c, y1, x0) + fx * softmax.at(c, y1, x1));
        out.at(c, y, x) = static_cast<float>(v);
      }
    }
  }
  return out;
}

EnsemblePrediction ensemble_predict(const std::vector<const model::ResUNet*>& members,
                                    const Tensor& image, const SlidingWindowPlan& plan) {
  if (members.empty()) throw std::invalid_argument("ensemble_predict: need at least one member");
  for (const auto* m : members)
    if (!(m->config() == members[0]->config()))
      throw std::invalid_argument("ensemble_predict: members have mismatched model configs");

  Tensor mean;
  for (size_t i = 0; i < members.size(); ++i) {
    Tensor pred = sliding_window_predict(*members[i], image, plan);
    if (i == 0)
      mean = std::move(pred);
    else
      for (int64_t k = 0; k < mean.numel(); ++k) mean[k] += pred[k];
  }
  const float inv = 1.0f / static_cast<float>(members.size());
  for (int64_t k = 0; k < mean.numel(); ++k) mean[k] *= inv;

  EnsemblePrediction out;
  out.member_count = static_cast<int>(members.size());
  out.softmax = upsample_bilinear_2x(mean);
  return out;
}

img::MaskU8 binarize(const Tensor& softmax) {
  if (softmax.rank() != 3) throw std::invalid_argument("binarize: expected (C, H, W)");
  const int64_t c_n = softmax.dim(0), h = softmax.dim(1), w = softmax.dim(2);
  img::MaskU8 mask(h, w);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      int64_t best = 0;
      float best_p = softmax.at(0, y, x);
      for (int64_t c = 1; c < c_n; ++c)
        if (softmax.at(c, y, x) > best_p) {  // strict: ties stay with background
          best_p = softmax.at(c, y, x);
          best = c;
        }
      mask.at(y, x) = best > 0 ? 1 : 0;
    }
  return mask;
}

InstanceLabels connected_components(const img::MaskU8& binary) {
  const int64_t h = binary.height, w = binary.width;
  const int64_t n = h * w;
  std::vector<int32_t> parent(static_cast<size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);

  auto find = [&parent](int32_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  auto unite = [&](int32_t a, int32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };

  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      if (!binary.at(y, x)) continue;
      const int32_t idx = static_cast<int32_t>(y * w + x);
      if (x > 0 && binary.at(y, x - 1)) unite(idx, idx - 1);
      if (y > 0) {
        if (binary.at(y - 1, x)) unite(idx, static_cast<int32_t>(idx - w));
        if (x > 0 && binary.at(y - 1, x - 1)) unite(idx, static_cast<int32_t>(idx - w - 1));
        if (x < w - 1 && binary.at(y - 1, x + 1)) unite(idx, static_cast<int32_t>(idx - w + 1));
      }
    }

  InstanceLabels out;
  out.height = h;
  out.width = w;
  out.labels.assign(static_cast<size_t>(n), 0);
  std::vector<int32_t> id_of_root(static_cast<size_t>(n), 0);
  for (int64_t i = 0; i < n; ++i) {
    if (!binary.labels[static_cast<size_t>(i)]) continue;
    const int32_t root = find(static_cast<int32_t>(i));
    if (id_of_root[root] == 0) id_of_root[root] = ++out.count;
    out.labels[static_cast<size_t>(i)] = id_of_root[root];
  }
  return out;
}

img::MaskU8 instance_labels_to_u8(const InstanceLabels& labels) {
  img::MaskU8 mask(labels.height, labels.width);
  for (size_t i = 0; i < labels.labels.size(); ++i)
    mask.labels[i] = static_cast<uint8_t>(std::min<int32_t>(labels.labels[i], 255));
  return mask;
}

}  // namespace orunet::infer
