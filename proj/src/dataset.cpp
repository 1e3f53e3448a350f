#include "orunet/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

namespace orunet::data {

namespace fs = std::filesystem;

std::string to_string(SurgeryType type) {
  return type == SurgeryType::Prokto ? "Prokto" : "Rectum";
}

SurgeryType surgery_type_from_string(const std::string& name) {
  if (name == "Prokto") return SurgeryType::Prokto;
  if (name == "Rectum") return SurgeryType::Rectum;
  throw std::invalid_argument("unknown surgery type: " + name);
}

namespace {

std::optional<int> parse_int_name(const fs::path& p) {
  const std::string s = p.filename().string();
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

}  // namespace

std::vector<DatasetRecord> load_dataset_index(const fs::path& root) {
  if (!fs::exists(root)) throw std::runtime_error("dataset root does not exist: " + root.string());
  std::vector<DatasetRecord> records;
  for (SurgeryType type : {SurgeryType::Prokto, SurgeryType::Rectum}) {
    const fs::path type_dir = root / to_string(type);
    if (!fs::exists(type_dir)) continue;
    for (const auto& surgery_entry : fs::directory_iterator(type_dir)) {
      if (!surgery_entry.is_directory()) continue;
      const auto surgery_id = parse_int_name(surgery_entry.path());
      if (!surgery_id) continue;
      for (const auto& frame_entry : fs::directory_iterator(surgery_entry.path())) {
        if (!frame_entry.is_directory()) continue;
        const auto frame_id = parse_int_name(frame_entry.path());
        if (!frame_id) continue;
        const fs::path image = frame_entry.path() / "raw.png";
        if (!fs::exists(image)) continue;
        DatasetRecord rec;
        rec.surgery_type = type;
        rec.surgery_id = *surgery_id;
        rec.frame_id = *frame_id;
        rec.image_path = image;
        const fs::path mask = frame_entry.path() / "instrument_instances.png";
        if (fs::exists(mask)) rec.mask_path = mask;
        records.push_back(std::move(rec));
      }
    }
  }
  std::sort(records.begin(), records.end(), [](const DatasetRecord& a, const DatasetRecord& b) {
    return std::tie(a.surgery_type, a.surgery_id, a.frame_id) <
           std::tie(b.surgery_type, b.surgery_id, b.frame_id);
  });
  return records;
}

Tensor preprocess(const img::ImageU8& raw) {
  if (raw.height % 2 != 0 || raw.width % 2 != 0)
    throw std::invalid_argument("preprocess: spatial dimensions must be even, got " +
                                std::to_string(raw.height) + "x" + std::to_string(raw.width));
  const int64_t h = raw.height / 2, w = raw.width / 2;
  Tensor out({3, h, w});
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        const int sum = int(raw.at(2 * y, 2 * x, c)) + raw.at(2 * y, 2 * x + 1, c) +
                        raw.at(2 * y + 1, 2 * x, c) + raw.at(2 * y + 1, 2 * x + 1, c);
        out.at(c, y, x) = static_cast<float>(sum) / (4.0f * 255.0f);
      }
  return out;
}

img::MaskU8 preprocess_mask(const img::MaskU8& instance_mask) {
  if (instance_mask.height % 2 != 0 || instance_mask.width % 2 != 0)
    throw std::invalid_argument("preprocess_mask: spatial dimensions must be even");
  img::MaskU8 out(instance_mask.height / 2, instance_mask.width / 2);
  for (int64_t y = 0; y < out.height; ++y)
    for (int64_t x = 0; x < out.width; ++x)
      out.at(y, x) = instance_mask.at(2 * y, 2 * x) > 0 ? 1 : 0;
  return out;
}

img::MaskU8 binarize_mask(const img::MaskU8& instance_mask) {
  img::MaskU8 out(instance_mask.height, instance_mask.width);
  for (size_t i = 0; i < instance_mask.labels.size(); ++i)
    out.labels[i] = instance_mask.labels[i] > 0 ? 1 : 0;
  return out;
}

std::vector<FoldSplit> make_folds(const std::vector<DatasetRecord>& records) {
  std::map<SurgeryType, std::set<int>> ids;
  for (const auto& rec : records) ids[rec.surgery_type].insert(rec.surgery_id);
  const auto& prokto = ids[SurgeryType::Prokto];
  const auto& rectum = ids[SurgeryType::Rectum];
  if (prokto.size() != rectum.size())
    throw std::runtime_error("make_folds: unequal surgery counts per type (" +
                             std::to_string(prokto.size()) + " Prokto vs " +
                             std::to_string(rectum.size()) + " Rectum)");
  if (prokto.empty()) throw std::runtime_error("make_folds: no surgeries found");

  const std::vector<int> prokto_ids(prokto.begin(), prokto.end());
  const std::vector<int> rectum_ids(rectum.begin(), rectum.end());
  const int k = static_cast<int>(prokto_ids.size());

  std::vector<FoldSplit> folds;
  for (int i = 0; i < k; ++i) {
    FoldSplit fold;
    fold.fold_index = i;
    fold.val_surgeries = {{SurgeryType::Prokto, prokto_ids[i]},
                          {SurgeryType::Rectum, rectum_ids[i]}};
    for (int j = 0; j < k; ++j) {
      if (j == i) continue;
      fold.train_surgeries.push_back({SurgeryType::Prokto, prokto_ids[j]});
      fold.train_surgeries.push_back({SurgeryType::Rectum, rectum_ids[j]});
    }
    std::sort(fold.train_surgeries.begin(), fold.train_surgeries.end());
    folds.push_back(std::move(fold));
  }
  return folds;
}

void write_fold_file(const fs::path& path, const std::vector<FoldSplit>& folds) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write fold file: " + path.string());
  for (const auto& fold : folds) {
    out << "fold " << fold.fold_index << " val";
    for (const auto& key : fold.val_surgeries) out << ' ' << to_string(key.type) << '/' << key.id;
    out << '\n';
  }
}

Patch sample_patch(const Tensor& image, const img::MaskU8& mask, int64_t patch_h,
                   int64_t patch_w, Rng& rng) {
  const int64_t h = image.dim(1), w = image.dim(2);
  if (mask.height != h || mask.width != w)
    throw std::invalid_argument("sample_patch: image/mask size mismatch");
  if (h < patch_h || w < patch_w)
    throw std::invalid_argument("sample_patch: image " + std::to_string(h) + "x" +
                                std::to_string(w) + " smaller than patch " +
                                std::to_string(patch_h) + "x" + std::to_string(patch_w));
  const int64_t oy = uniform_int(rng, 0, h - patch_h);
  const int64_t ox = uniform_int(rng, 0, w - patch_w);

  Patch patch;
  patch.origin_y = oy;
  patch.origin_x = ox;
  patch.image = Tensor({3, patch_h, patch_w});
  patch.mask = img::MaskU8(patch_h, patch_w);
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < patch_h; ++y)
      for (int64_t x = 0; x < patch_w; ++x)
        patch.image.at(c, y, x) = image.at(c, oy + y, ox + x);
  for (int64_t y = 0; y < patch_h; ++y)
    for (int64_t x = 0; x < patch_w; ++x) patch.mask.at(y, x) = mask.at(oy + y, ox + x);
  return patch;
}

}  // namespace orunet::data
