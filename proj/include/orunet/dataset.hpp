#pragma once

#include <compare>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "orunet/image.hpp"
#include "orunet/rng.hpp"
#include "orunet/tensor.hpp"

namespace orunet::data {

enum class SurgeryType { Prokto, Rectum };

std::string to_string(SurgeryType type);
SurgeryType surgery_type_from_string(const std::string& name);

struct SurgeryKey {
  SurgeryType type;
  int id;
  auto operator<=>(const SurgeryKey&) const = default;
};

/// One annotated (or unlabeled) frame. mask_path is absent for frames that
/// only exist for prediction.
struct DatasetRecord {
  SurgeryType surgery_type;
  int surgery_id = 0;
  int frame_id = 0;
  std::filesystem::path image_path;
  std::optional<std::filesystem::path> mask_path;

  SurgeryKey surgery() const { return {surgery_type, surgery_id}; }
  bool labeled() const { return mask_path.has_value(); }
};

/// Scans `<root>/<Prokto|Rectum>/<surgery_id>/<frame_id>/raw.png` (mask file
/// `instrument_instances.png` alongside, optional). Returns records sorted by
/// (type, surgery_id, frame_id). Throws if root does not exist.
std::vector<DatasetRecord> load_dataset_index(const std::filesystem::path& root);

/// Half-resolution float image: output pixel = mean of its 2x2 block, then
/// divided by 255. Shape (3, h/2, w/2), values in [0, 1]. Requires even
/// spatial dimensions.
Tensor preprocess(const img::ImageU8& raw);

/// Instance mask -> binary foreground at half resolution. Binarity is kept by
/// order-0 subsampling (top-left site of each 2x2 block).
img::MaskU8 preprocess_mask(const img::MaskU8& instance_mask);

/// Instance mask -> binary foreground at full resolution.
img::MaskU8 binarize_mask(const img::MaskU8& instance_mask);

struct FoldSplit {
  int fold_index = 0;
  std::vector<SurgeryKey> train_surgeries;
  std::vector<SurgeryKey> val_surgeries;
};

/// Leave-one-surgery-out-per-type splits: with k surgeries per intervention
/// type this yields k folds; fold i validates on the i-th surgery of each
/// type. Requires equal surgery counts per type.
std::vector<FoldSplit> make_folds(const std::vector<DatasetRecord>& records);

void write_fold_file(const std::filesystem::path& path, const std::vector<FoldSplit>& folds);

struct Patch {
  Tensor image;        // (3, ph, pw)
  img::MaskU8 mask;    // (ph, pw), values {0, 1}
  int64_t origin_y = 0;
  int64_t origin_x = 0;
};

/// Crops a patch at a uniformly random valid origin; image and mask share the
/// origin. Throws if the image is smaller than the patch.
Patch sample_patch(const Tensor& image, const img::MaskU8& mask, int64_t patch_h,
                   int64_t patch_w, Rng& rng);

}  // namespace orunet::data
