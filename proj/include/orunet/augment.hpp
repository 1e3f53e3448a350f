#pragma once

#include "orunet/dataset.hpp"
#include "orunet/rng.hpp"
#include "orunet/tensor.hpp"

namespace orunet::augment {

/// On-the-fly augmentation settings. Spatial transforms (rotation, elastic,
/// scaling, mirroring) act on image and mask with shared geometry; intensity
/// transforms (noise, brightness, contrast, gamma) act on the image only.
struct AugmentConfig {
  bool rotation_enabled = true;
  double rotation_prob = 0.15;
  double rotation_degrees = 30.0;  // drawn from [-r, r]

  bool elastic_enabled = true;
  double elastic_prob = 0.15;
  double elastic_alpha_lo = 0.0, elastic_alpha_hi = 200.0;
  double elastic_sigma_lo = 9.0, elastic_sigma_hi = 13.0;

  bool scale_enabled = true;
  double scale_prob = 0.15;
  double scale_lo = 0.85, scale_hi = 1.25;

  bool mirror_enabled = true;
  double mirror_prob = 0.5;  // per axis
  bool mirror_vertical = true, mirror_horizontal = true;

  bool noise_enabled = true;
  double noise_prob = 0.15;
  double noise_sigma_lo = 0.0, noise_sigma_hi = 0.05;

  bool brightness_enabled = true;
  double brightness_prob = 0.15;
  double brightness_lo = -0.15, brightness_hi = 0.15;

  bool contrast_enabled = true;
  double contrast_prob = 0.15;
  double contrast_lo = 0.75, contrast_hi = 1.25;

  bool gamma_enabled = true;
  double gamma_prob = 0.15;
  double gamma_lo = 0.7, gamma_hi = 1.5;

  void validate() const;
  bool operator==(const AugmentConfig&) const = default;

  static AugmentConfig disabled() {
    AugmentConfig cfg;
    cfg.rotation_enabled = cfg.elastic_enabled = cfg.scale_enabled = cfg.mirror_enabled = false;
    cfg.noise_enabled = cfg.brightness_enabled = cfg.contrast_enabled = cfg.gamma_enabled = false;
    return cfg;
  }
};

/// Applies the configured transforms. Spatial transforms are composed into a
/// single displacement field so the image is resampled once (bilinear for the
/// image, nearest for the mask, out-of-bounds filled with 0); intensity
/// transforms follow in the order noise, brightness, contrast, gamma. Output
/// image values are clipped to [0, 1]; the mask stays binary. Deterministic
/// given the rng state.
data::Patch apply_augmentations(const data::Patch& patch, const AugmentConfig& config, Rng& rng);

// Elementary transforms (each a special case of the composed pipeline).
void rotate(Tensor& image, img::MaskU8& mask, double degrees);
void elastic_deform(Tensor& image, img::MaskU8& mask, double alpha, double sigma, Rng& rng);
void scale(Tensor& image, img::MaskU8& mask, double factor);
void mirror(Tensor& image, img::MaskU8& mask, bool vertical, bool horizontal);
void add_gaussian_noise(Tensor& image, double sigma, Rng& rng);
void shift_brightness(Tensor& image, double delta);
void scale_contrast(Tensor& image, double factor);
void apply_gamma(Tensor& image, double exponent);

}  // namespace orunet::augment
