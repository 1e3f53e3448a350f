#include "orunet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "orunet/dataset.hpp"
#include "orunet/image.hpp"
#include "orunet/rng.hpp"

namespace orunet::data {

namespace fs = std::filesystem;

void SynthSpec::validate() const {
  if (surgeries_per_type < 1 || frames_per_surgery < 1)
    throw std::invalid_argument("SynthSpec: need at least one surgery and frame per type");
  if (height < 32 || width < 32 || height % 2 != 0 || width % 2 != 0)
    throw std::invalid_argument("SynthSpec: frame size must be even and >= 32x32");
  if (p_zero_instruments < 0 || p_zero_instruments > 1)
    throw std::invalid_argument("SynthSpec: p_zero_instruments must be in [0,1]");
  if (max_instruments < 1 || max_instruments > 3)
    throw std::invalid_argument("SynthSpec: max_instruments must be in [1,3]");
}

namespace {

struct Capsule {
  double cy, cx;      // center
  double dy, dx;      // unit direction
  double half_len;
  double radius;
  uint8_t color[3];
};

double segment_distance(const Capsule& c, double y, double x) {
  const double ry = y - c.cy, rx = x - c.cx;
  double t = ry * c.dy + rx * c.dx;
  t = std::clamp(t, -c.half_len, c.half_len);
  const double py = c.cy + t * c.dy, px = c.cx + t * c.dx;
  return std::hypot(y - py, x - px);
}

bool capsules_overlap(const Capsule& a, const Capsule& b) {
  // coarse: bounding-circle test with a safety margin
  const double d = std::hypot(a.cy - b.cy, a.cx - b.cx);
  return d < a.half_len + a.radius + b.half_len + b.radius + 3.0;
}

void render_frame(const SynthSpec& spec, Rng& rng, img::ImageU8& image, img::MaskU8& mask) {
  const int h = spec.height, w = spec.width;
  image = img::ImageU8(h, w);
  mask = img::MaskU8(h, w);

  // tissue-like background: dark warm base + two low-frequency waves + grain
  double base[3] = {uniform_real(rng, 70, 120), uniform_real(rng, 25, 60),
                    uniform_real(rng, 25, 65)};
  double amp1 = uniform_real(rng, 6, 18), amp2 = uniform_real(rng, 4, 12);
  double fy1 = uniform_real(rng, 0.5, 2.5), fx1 = uniform_real(rng, 0.5, 2.5);
  double fy2 = uniform_real(rng, 1.5, 4.0), fx2 = uniform_real(rng, 1.5, 4.0);
  double ph1 = uniform_real(rng, 0, 6.283), ph2 = uniform_real(rng, 0, 6.283);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double wave = amp1 * std::sin(6.283 * (fy1 * y / h + fx1 * x / w) + ph1) +
                          amp2 * std::sin(6.283 * (fy2 * y / h + fx2 * x / w) + ph2);
      for (int c = 0; c < 3; ++c) {
        const double grain = uniform_real(rng, -8, 8);
        image.at(y, x, c) =
            static_cast<uint8_t>(std::clamp(base[c] * (c == 0 ? 1.0 : 0.9) + wave + grain, 0.0, 150.0));
      }
    }

  int count = 0;
  if (uniform_real(rng, 0, 1) >= spec.p_zero_instruments)
    count = static_cast<int>(uniform_int(rng, 1, spec.max_instruments));

  std::vector<Capsule> placed;
  const double min_dim = std::min(h, w);
  for (int k = 0; k < count; ++k) {
    Capsule cap;
    bool ok = false;
    for (int attempt = 0; attempt < 40 && !ok; ++attempt) {
      cap.half_len = uniform_real(rng, 0.14, 0.26) * min_dim;
      cap.radius = std::max(3.0, uniform_real(rng, 0.035, 0.07) * min_dim);
      const double margin = cap.half_len + cap.radius + 2;
      if (2 * margin >= h || 2 * margin >= w) continue;
      cap.cy = uniform_real(rng, margin, h - 1 - margin);
      cap.cx = uniform_real(rng, margin, w - 1 - margin);
      const double angle = uniform_real(rng, 0, 3.14159265);
      cap.dy = std::sin(angle);
      cap.dx = std::cos(angle);
      ok = true;
      for (const Capsule& prev : placed)
        if (capsules_overlap(cap, prev)) ok = false;
    }
    if (!ok) continue;  // crowded frame; keep labels contiguous by skipping
    const double gray = uniform_real(rng, 185, 240);
    for (int c = 0; c < 3; ++c)
      cap.color[c] = static_cast<uint8_t>(std::clamp(gray + uniform_real(rng, -12, 12), 160.0, 255.0));
    placed.push_back(cap);
  }

  for (size_t k = 0; k < placed.size(); ++k) {
    const Capsule& cap = placed[k];
    const int y0 = std::max(0, static_cast<int>(cap.cy - cap.half_len - cap.radius - 1));
    const int y1 = std::min(h - 1, static_cast<int>(cap.cy + cap.half_len + cap.radius + 1));
    const int x0 = std::max(0, static_cast<int>(cap.cx - cap.half_len - cap.radius - 1));
    const int x1 = std::min(w - 1, static_cast<int>(cap.cx + cap.half_len + cap.radius + 1));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (segment_distance(cap, y, x) <= cap.radius) {
          for (int c = 0; c < 3; ++c) image.at(y, x, c) = cap.color[c];
          mask.at(y, x) = static_cast<uint8_t>(k + 1);
        }
  }
}

}  // namespace

void make_synthetic_dataset(const SynthSpec& spec, const fs::path& root, uint64_t seed) {
  spec.validate();
  Rng rng = substream(seed, "synth");
  for (SurgeryType type : {SurgeryType::Prokto, SurgeryType::Rectum})
    for (int sid = 1; sid <= spec.surgeries_per_type; ++sid)
      for (int fid = 1; fid <= spec.frames_per_surgery; ++fid) {
        const fs::path dir = root / to_string(type) / std::to_string(sid) / std::to_string(fid);
        fs::create_directories(dir);
        img::ImageU8 image;
        img::MaskU8 mask;
        render_frame(spec, rng, image, mask);
        img::write_image(dir / "raw.png", image);
        img::write_mask(dir / "instrument_instances.png", mask);
      }
}

}  // namespace orunet::data
