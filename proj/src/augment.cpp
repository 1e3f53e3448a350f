#include "orunet/augment.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace orunet::augment {

void AugmentConfig::validate() const {
  auto check_prob = [](double p, const char* what) {
    if (p < 0 || p > 1) throw std::invalid_argument(std::string("AugmentConfig: ") + what +
                                                    " probability outside [0,1]");
  };
  check_prob(rotation_prob, "rotation");
  check_prob(elastic_prob, "elastic");
  check_prob(scale_prob, "scale");
  check_prob(mirror_prob, "mirror");
  check_prob(noise_prob, "noise");
  check_prob(brightness_prob, "brightness");
  check_prob(contrast_prob, "contrast");
  check_prob(gamma_prob, "gamma");
  if (rotation_degrees < 0) throw std::invalid_argument("AugmentConfig: rotation range negative");
  if (elastic_alpha_hi < elastic_alpha_lo || elastic_sigma_hi < elastic_sigma_lo ||
      scale_hi < scale_lo || noise_sigma_hi < noise_sigma_lo ||
      brightness_hi < brightness_lo || contrast_hi < contrast_lo || gamma_hi < gamma_lo)
    throw std::invalid_argument("AugmentConfig: empty parameter range");
  if (scale_lo <= 0 || gamma_lo <= 0)
    throw std::invalid_argument("AugmentConfig: scale and gamma ranges must be positive");
  if (elastic_sigma_lo < 0 || noise_sigma_lo < 0)
    throw std::invalid_argument("AugmentConfig: sigma ranges must be nonnegative");
}

namespace {

struct Warp {
  // inverse map: source = center + A * (p' - center) + displacement(p),
  // where p' is the output coordinate after optional axis flips
  double a00 = 1, a01 = 0, a10 = 0, a11 = 1;
  bool flip_v = false, flip_h = false;
  const Tensor* disp_y = nullptr;  // (h, w) per-pixel displacement, optional
  const Tensor* disp_x = nullptr;

  bool identity() const {
    return a00 == 1 && a01 == 0 && a10 == 0 && a11 == 1 && !flip_v && !flip_h && !disp_y;
  }
};

float sample_bilinear(const Tensor& img, int64_t c, double sy, double sx) {
  const int64_t h = img.dim(1), w = img.dim(2);
  const int64_t y0 = static_cast<int64_t>(std::floor(sy));
  const int64_t x0 = static_cast<int64_t>(std::floor(sx));
  const double fy = sy - y0, fx = sx - x0;
  double acc = 0;
  for (int dy = 0; dy <= 1; ++dy)
    for (int dx = 0; dx <= 1; ++dx) {
      const int64_t yy = y0 + dy, xx = x0 + dx;
      const double wgt = (dy ? fy : 1 - fy) * (dx ? fx : 1 - fx);
      if (wgt == 0) continue;
      const double v = (yy >= 0 && yy < h && xx >= 0 && xx < w) ? img.at(c, yy, xx) : 0.0;
      acc += wgt * v;
    }
  return static_cast<float>(acc);
}

uint8_t sample_nearest(const img::MaskU8& mask, double sy, double sx) {
  const int64_t yy = static_cast<int64_t>(std::lround(sy));
  const int64_t xx = static_cast<int64_t>(std::lround(sx));
  if (yy < 0 || yy >= mask.height || xx < 0 || xx >= mask.width) return 0;
  return mask.at(yy, xx);
}

void apply_warp(Tensor& image, img::MaskU8& mask, const Warp& warp) {
  if (warp.identity()) return;
  const int64_t h = image.dim(1), w = image.dim(2);
  const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
  Tensor out_img(image.shape);
  img::MaskU8 out_mask(h, w);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      const double py = warp.flip_v ? h - 1 - y : y;
      const double px = warp.flip_h ? w - 1 - x : x;
      double sy = cy + warp.a00 * (py - cy) + warp.a01 * (px - cx);
      double sx = cx + warp.a10 * (py - cy) + warp.a11 * (px - cx);
      if (warp.disp_y) {
        sy += warp.disp_y->at(y, x);
        sx += warp.disp_x->at(y, x);
      }
      for (int64_t c = 0; c < image.dim(0); ++c)
        out_img.at(c, y, x) = sample_bilinear(image, c, sy, sx);
      out_mask.at(y, x) = sample_nearest(mask, sy, sx);
    }
  image = std::move(out_img);
  mask = std::move(out_mask);
}

// separable gaussian blur with edge clamping, used on elastic displacement fields
void gaussian_blur(Tensor& field, double sigma) {
  if (sigma <= 0) return;
  const int64_t radius = std::max<int64_t>(1, static_cast<int64_t>(std::ceil(3 * sigma)));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  double sum = 0;
  for (int64_t i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  const int64_t h = field.dim(0), w = field.dim(1);
  Tensor tmp({h, w});
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      double acc = 0;
      for (int64_t i = -radius; i <= radius; ++i)
        acc += kernel[i + radius] * field.at(y, std::clamp<int64_t>(x + i, 0, w - 1));
      tmp.at(y, x) = static_cast<float>(acc);
    }
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      double acc = 0;
      for (int64_t i = -radius; i <= radius; ++i)
        acc += kernel[i + radius] * tmp.at(std::clamp<int64_t>(y + i, 0, h - 1), x);
      field.at(y, x) = static_cast<float>(acc);
    }
}

void make_elastic_field(int64_t h, int64_t w, double alpha, double sigma, Rng& rng, Tensor& dy,
                        Tensor& dx) {
  dy = Tensor({h, w});
  dx = Tensor({h, w});
  for (int64_t i = 0; i < dy.numel(); ++i) dy[i] = static_cast<float>(uniform_real(rng, -1, 1));
  for (int64_t i = 0; i < dx.numel(); ++i) dx[i] = static_cast<float>(uniform_real(rng, -1, 1));
  gaussian_blur(dy, sigma);
  gaussian_blur(dx, sigma);
  for (int64_t i = 0; i < dy.numel(); ++i) {
    dy[i] = static_cast<float>(dy[i] * alpha);
    dx[i] = static_cast<float>(dx[i] * alpha);
  }
}

void clip_unit(Tensor& image) {
  for (float& v : image.data) v = std::clamp(v, 0.0f, 1.0f);
}

}  // namespace

void rotate(Tensor& image, img::MaskU8& mask, double degrees) {
  const double rad = degrees * 3.14159265358979323846 / 180.0;
  Warp warp;
  warp.a00 = std::cos(rad);
  warp.a01 = -std::sin(rad);
  warp.a10 = std::sin(rad);
  warp.a11 = std::cos(rad);
  apply_warp(image, mask, warp);
}

void elastic_deform(Tensor& image, img::MaskU8& mask, double alpha, double sigma, Rng& rng) {
  if (alpha == 0 || sigma <= 0) return;  // degenerate parameters act as identity
  Tensor dy, dx;
  make_elastic_field(image.dim(1), image.dim(2), alpha, sigma, rng, dy, dx);
  Warp warp;
  warp.disp_y = &dy;
  warp.disp_x = &dx;
  apply_warp(image, mask, warp);
}

void scale(Tensor& image, img::MaskU8& mask, double factor) {
  if (factor <= 0) throw std::invalid_argument("scale: factor must be positive");
  Warp warp;
  warp.a00 = warp.a11 = 1.0 / factor;
  apply_warp(image, mask, warp);
}

void mirror(Tensor& image, img::MaskU8& mask, bool vertical, bool horizontal) {
  Warp warp;
  warp.flip_v = vertical;
  warp.flip_h = horizontal;
  apply_warp(image, mask, warp);
}

void add_gaussian_noise(Tensor& image, double sigma, Rng& rng) {
  if (sigma == 0) return;
  std::normal_distribution<double> noise(0.0, sigma);
  for (float& v : image.data) v = static_cast<float>(v + noise(rng));
  clip_unit(image);
}

void shift_brightness(Tensor& image, double delta) {
  for (float& v : image.data) v = static_cast<float>(v + delta);
  clip_unit(image);
}

void scale_contrast(Tensor& image, double factor) {
  double mean = 0;
  for (float v : image.data) mean += v;
  mean /= std::max<int64_t>(1, image.numel());
  for (float& v : image.data) v = static_cast<float>(mean + (v - mean) * factor);
  clip_unit(image);
}

void apply_gamma(Tensor& image, double exponent) {
  if (exponent == 1.0) return;
  for (float& v : image.data) v = static_cast<float>(std::pow(std::clamp(v, 0.0f, 1.0f), exponent));
}

data::Patch apply_augmentations(const data::Patch& patch, const AugmentConfig& config, Rng& rng) {
  config.validate();
  data::Patch out = patch;

  // Draw every decision in a fixed order so the stream layout is stable.
  Warp warp;
  bool spatial = false;
  if (config.rotation_enabled && uniform_real(rng, 0, 1) < config.rotation_prob) {
    const double deg = uniform_real(rng, -config.rotation_degrees, config.rotation_degrees);
    const double rad = deg * 3.14159265358979323846 / 180.0;
    warp.a00 = std::cos(rad);
    warp.a01 = -std::sin(rad);
    warp.a10 = std::sin(rad);
    warp.a11 = std::cos(rad);
    spatial = true;
  }
  if (config.scale_enabled && uniform_real(rng, 0, 1) < config.scale_prob) {
    const double s = uniform_real(rng, config.scale_lo, config.scale_hi);
    warp.a00 /= s;
    warp.a01 /= s;
    warp.a10 /= s;
    warp.a11 /= s;
    spatial = true;
  }
  Tensor dy, dx;
  if (config.elastic_enabled && uniform_real(rng, 0, 1) < config.elastic_prob) {
    const double alpha = uniform_real(rng, config.elastic_alpha_lo, config.elastic_alpha_hi);
    const double sigma = uniform_real(rng, config.elastic_sigma_lo, config.elastic_sigma_hi);
    if (alpha > 0 && sigma > 0) {
      make_elastic_field(out.image.dim(1), out.image.dim(2), alpha, sigma, rng, dy, dx);
      warp.disp_y = &dy;
      warp.disp_x = &dx;
      spatial = true;
    }
  }
  if (config.mirror_enabled) {
    if (config.mirror_vertical && uniform_real(rng, 0, 1) < config.mirror_prob) {
      warp.flip_v = true;
      spatial = true;
    }
    if (config.mirror_horizontal && uniform_real(rng, 0, 1) < config.mirror_prob) {
      warp.flip_h = true;
      spatial = true;
    }
  }
  if (spatial) apply_warp(out.image, out.mask, warp);

  if (config.noise_enabled && uniform_real(rng, 0, 1) < config.noise_prob)
    add_gaussian_noise(out.image, uniform_real(rng, config.noise_sigma_lo, config.noise_sigma_hi),
                       rng);
  if (config.brightness_enabled && uniform_real(rng, 0, 1) < config.brightness_prob)
    shift_brightness(out.image, uniform_real(rng, config.brightness_lo, config.brightness_hi));
  if (config.contrast_enabled && uniform_real(rng, 0, 1) < config.contrast_prob)
    scale_contrast(out.image, uniform_real(rng, config.contrast_lo, config.contrast_hi));
  if (config.gamma_enabled && uniform_real(rng, 0, 1) < config.gamma_prob)
    apply_gamma(out.image, uniform_real(rng, config.gamma_lo, config.gamma_hi));

  clip_unit(out.image);
  return out;
}

}  // namespace orunet::augment
