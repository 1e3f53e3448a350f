#pragma once

#include <utility>
#include <vector>

#include "orunet/image.hpp"
#include "orunet/model.hpp"
#include "orunet/tensor.hpp"

namespace orunet::infer {

struct SlidingWindowPlan {
  int64_t image_h = 0, image_w = 0;
  int64_t window_h = 0, window_w = 0;
  std::vector<std::pair<int64_t, int64_t>> origins;  // (y, x)
  std::vector<int> coverage;                         // per-pixel window count, row-major

  int coverage_at(int64_t y, int64_t x) const {
    return coverage[static_cast<size_t>(y * image_w + x)];
  }
};

/// Minimal tiling: origins at multiples of the window size, clamped so the
/// last window ends at the image edge, duplicates removed. Every pixel is
/// covered at least once.
SlidingWindowPlan plan_windows(std::pair<int64_t, int64_t> image_size,
                               std::pair<int64_t, int64_t> window);

/// Eval-mode forward on every window; overlapping softmax values are averaged
/// uniformly (divided by coverage) and renormalized per pixel.
/// image is (3, H, W); returns (num_classes, H, W).
Tensor sliding_window_predict(const model::ResUNet& net, const Tensor& image,
                              const SlidingWindowPlan& plan);

/// Bilinear x2 upsampling (half-pixel-aligned, edge-clamped). Applying the
/// same convex weights to every channel preserves per-pixel normalization.
Tensor upsample_bilinear_2x(const Tensor& softmax);

struct EnsemblePrediction {
  Tensor softmax;  // (num_classes, 2H, 2W): averaged, then upsampled to raw size
  int member_count = 0;
};

/// Arithmetic mean of the members' sliding-window softmax maps, upsampled by
/// factor 2 to the raw resolution. Members must share one ModelConfig.
EnsemblePrediction ensemble_predict(const std::vector<const model::ResUNet*>& members,
                                    const Tensor& image, const SlidingWindowPlan& plan);

/// Per-pixel argmax; an exact tie goes to background. Returns {0,1} labels.
img::MaskU8 binarize(const Tensor& softmax);

struct InstanceLabels {
  int64_t height = 0, width = 0;
  std::vector<int32_t> labels;  // row-major; 0 = background
  int32_t count = 0;            // number of components; IDs are 1..count

  int32_t at(int64_t y, int64_t x) const { return labels[static_cast<size_t>(y * width + x)]; }
};

/// 8-connectivity connected components; IDs are assigned 1..K in raster order
/// of each component's first-encountered pixel, background stays 0.
InstanceLabels connected_components(const img::MaskU8& binary);

/// Instance IDs as an 8-bit mask for the instances.png output; IDs above 255
/// saturate (the file format cannot represent them).
img::MaskU8 instance_labels_to_u8(const InstanceLabels& labels);

}  // namespace orunet::infer
