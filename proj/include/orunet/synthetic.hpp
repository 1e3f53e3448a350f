#pragma once

#include <cstdint>
#include <filesystem>

namespace orunet::data {

/// Parameters of the synthetic desk-scale dataset: textured dark backgrounds
/// with a few bright elongated instrument-like capsules, written in the same
/// directory layout as real data.
struct SynthSpec {
  int surgeries_per_type = 2;
  int frames_per_surgery = 3;
  int height = 128;  // raw-frame size; must be even
  int width = 224;
  double p_zero_instruments = 0.2;
  int max_instruments = 3;

  void validate() const;
};

/// Writes `<root>/<Prokto|Rectum>/<id>/<frame>/raw.png` plus
/// `instrument_instances.png` per frame. Instance labels are contiguous
/// 1..K with non-overlapping shapes. Bit-identical output for equal seeds.
void make_synthetic_dataset(const SynthSpec& spec, const std::filesystem::path& root,
                            uint64_t seed);

}  // namespace orunet::data
