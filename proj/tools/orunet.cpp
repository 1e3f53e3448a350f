// Command-line front end: synth | split | train | predict | evaluate.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "orunet/checkpoint.hpp"
#include "orunet/config_file.hpp"
#include "orunet/dataset.hpp"
#include "orunet/inference.hpp"
#include "orunet/kv.hpp"
#include "orunet/metrics.hpp"
#include "orunet/synthetic.hpp"
#include "orunet/trainer.hpp"

namespace fs = std::filesystem;
using namespace orunet;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path resolve_data_root(const std::string& flag_value, const fs::path& config_value) {
  if (!flag_value.empty()) return flag_value;
  if (!config_value.empty()) return config_value;
  if (const char* env = std::getenv("ORUNET_DATA_ROOT"); env && *env) return env;
  throw UsageError("no data root given (flag, config, or ORUNET_DATA_ROOT)");
}

std::vector<data::DatasetRecord> load_index_checked(const fs::path& root) {
  try {
    return data::load_dataset_index(root);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
}

// failed runs must not leave partially-valid files behind
void write_text_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

void write_tensor_dump(const fs::path& path, const Tensor& t) {
  // raw tensor dump: 16-byte header (magic "ORTD", dtype code, rank,
  // reserved), then rank u32 dims, then little-endian float32 payload
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const uint32_t header[4] = {0x4454524fu, 0u, static_cast<uint32_t>(t.rank()), 0u};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  for (int i = 0; i < t.rank(); ++i) {
    const uint32_t d = static_cast<uint32_t>(t.dim(i));
    out.write(reinterpret_cast<const char*>(&d), sizeof(d));
  }
  out.write(reinterpret_cast<const char*>(t.ptr()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
}

std::string frame_rel_dir(const data::DatasetRecord& rec) {
  return data::to_string(rec.surgery_type) + "/" + std::to_string(rec.surgery_id) + "/" +
         std::to_string(rec.frame_id);
}

int run_synth(const fs::path& spec_path, const fs::path& out_root, uint64_t seed) {
  std::ifstream in(spec_path);
  if (!in) throw UsageError("cannot read synth spec: " + spec_path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  auto values = kv::parse_block(buf.str());
  kv::Reader r{values, "synth spec"};
  data::SynthSpec spec;
  spec.surgeries_per_type = r.get_int_or("surgeries_per_type", spec.surgeries_per_type);
  spec.frames_per_surgery = r.get_int_or("frames_per_surgery", spec.frames_per_surgery);
  spec.height = r.get_int_or("height", spec.height);
  spec.width = r.get_int_or("width", spec.width);
  spec.p_zero_instruments = r.get_double_or("p_zero_instruments", spec.p_zero_instruments);
  spec.max_instruments = r.get_int_or("max_instruments", spec.max_instruments);
  data::make_synthetic_dataset(spec, out_root, seed);
  std::cout << "wrote " << 2 * spec.surgeries_per_type * spec.frames_per_surgery
            << " synthetic frames under " << out_root.string() << "\n";
  return 0;
}

int run_split(const std::string& data_root_flag, const fs::path& out_path) {
  const fs::path root = resolve_data_root(data_root_flag, {});
  const auto records = load_index_checked(root);
  std::vector<data::FoldSplit> folds;
  try {
    folds = data::make_folds(records);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  std::ostringstream text;
  for (const auto& fold : folds) {
    text << "fold " << fold.fold_index << " val";
    for (const auto& key : fold.val_surgeries)
      text << ' ' << data::to_string(key.type) << '/' << key.id;
    text << '\n';
  }
  write_text_atomic(out_path, text.str());
  std::cout << "wrote " << folds.size() << " folds to " << out_path.string() << "\n";
  return 0;
}

int run_train(const fs::path& config_path, int fold_index, const std::string& resume) {
  const cli::ExperimentConfig cfg = cli::parse_config_file(config_path);
  const fs::path root = resolve_data_root("", cfg.data_root);
  if (!fs::exists(root)) throw DataError("data root does not exist: " + root.string());
  const auto records = load_index_checked(root);
  std::vector<data::FoldSplit> folds;
  try {
    folds = data::make_folds(records);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  if (fold_index < 0 || fold_index >= static_cast<int>(folds.size()))
    throw UsageError("fold " + std::to_string(fold_index) + " out of range; valid folds are 0.." +
                     std::to_string(folds.size() - 1));
  if (cfg.output_dir.empty()) throw UsageError("config has no output_dir");

  const auto result = train::train_fold(root, folds[static_cast<size_t>(fold_index)], cfg.model,
                                        cfg.train, cfg.augment, cfg.output_dir,
                                        resume.empty() ? fs::path{} : fs::path(resume));
  std::cout << "fold " << fold_index << " finished; final checkpoint "
            << result.final_checkpoint.string() << "\n";
  return 0;
}

int run_predict(const fs::path& config_path, const std::vector<std::string>& checkpoint_paths,
                const std::string& frames_flag, const fs::path& out_root, bool dump_softmax) {
  const cli::ExperimentConfig cfg = cli::parse_config_file(config_path);

  std::vector<std::unique_ptr<model::ResUNet>> members;
  int win_h = cfg.train.patch_h, win_w = cfg.train.patch_w;
  for (const auto& path : checkpoint_paths) {
    model::CheckpointData data = model::read_checkpoint(path);
    if (!members.empty() && !(data.config == members.front()->config()))
      throw UsageError("checkpoint " + path + " has a different model config than the first one");
    auto net = std::make_unique<model::ResUNet>(data.config, 0);
    model::restore_model_tensors(*net, data);
    if (auto it = data.meta.find("train_config"); it != data.meta.end()) {
      auto tc = kv::parse_block(it->second);
      kv::Reader r{tc, "checkpoint train_config"};
      win_h = r.get_int_or("patch_h", win_h);
      win_w = r.get_int_or("patch_w", win_w);
    }
    members.push_back(std::move(net));
  }
  std::vector<const model::ResUNet*> member_ptrs;
  for (const auto& m : members) member_ptrs.push_back(m.get());

  const fs::path frames_root = resolve_data_root(frames_flag, cfg.data_root);
  const auto records = load_index_checked(frames_root);
  if (records.empty()) throw DataError("no frames found under " + frames_root.string());

  int done = 0;
  for (const auto& rec : records) {
    const Tensor image = data::preprocess(img::read_image(rec.image_path));
    const auto plan = infer::plan_windows({image.dim(1), image.dim(2)},
                                          {std::min<int64_t>(win_h, image.dim(1)),
                                           std::min<int64_t>(win_w, image.dim(2))});
    const auto pred = infer::ensemble_predict(member_ptrs, image, plan);
    const img::MaskU8 binary = infer::binarize(pred.softmax);
    const auto instances = infer::connected_components(binary);

    const fs::path dir = out_root / frame_rel_dir(rec);
    fs::create_directories(dir);
    img::MaskU8 binary_png(binary.height, binary.width);
    for (size_t i = 0; i < binary.labels.size(); ++i)
      binary_png.labels[i] = binary.labels[i] ? 255 : 0;
    img::write_mask(dir / "binary.png", binary_png);
    img::write_mask(dir / "instances.png", infer::instance_labels_to_u8(instances));
    if (dump_softmax) write_tensor_dump(dir / "softmax.npyish", pred.softmax);
    ++done;
  }
  std::cout << "predicted " << done << " frames with " << members.size() << " ensemble member"
            << (members.size() == 1 ? "" : "s") << " into " << out_root.string() << "\n";
  return 0;
}

int run_evaluate(const fs::path& pred_root, const fs::path& gt_root,
                 const std::string& convention_name, const fs::path& out_dir) {
  const eval::Convention convention = eval::convention_from_string(convention_name);
  const auto gt_records = load_index_checked(gt_root);

  struct Scored {
    const data::DatasetRecord* rec;
    eval::DiceValue dice;
  };
  std::vector<Scored> scored;
  std::vector<std::string> missing;
  for (const auto& rec : gt_records) {
    if (!rec.labeled()) continue;
    const fs::path pred_path = pred_root / frame_rel_dir(rec) / "binary.png";
    if (!fs::exists(pred_path)) {
      missing.push_back(frame_rel_dir(rec));
      continue;
    }
    const img::MaskU8 gt = data::binarize_mask(img::read_mask(*rec.mask_path));
    img::MaskU8 pred = img::read_mask(pred_path);
    for (auto& v : pred.labels) v = v ? 1 : 0;
    scored.push_back({&rec, eval::dice_score(pred, gt, convention)});
  }
  if (scored.empty()) {
    std::string msg = "no overlapping frames between predictions and ground truth";
    if (!missing.empty()) {
      msg += "; missing predictions for:";
      for (size_t i = 0; i < missing.size() && i < 10; ++i) msg += " " + missing[i];
      if (missing.size() > 10) msg += " (+" + std::to_string(missing.size() - 10) + " more)";
    }
    throw DataError(msg);
  }

  std::vector<eval::DiceValue> values;
  for (const auto& s : scored) values.push_back(s.dice);
  const eval::CohortSummary summary = eval::summarize(values);

  fs::create_directories(out_dir);
  std::ostringstream csv;
  csv << "surgery_type,surgery_id,frame_id,dice\n";
  for (const auto& s : scored) {
    csv << data::to_string(s.rec->surgery_type) << ',' << s.rec->surgery_id << ','
        << s.rec->frame_id << ',';
    if (s.dice.excluded)
      csv << "EXCLUDED";
    else
      csv << s.dice.value;
    csv << '\n';
  }
  write_text_atomic(out_dir / "scores.csv", csv.str());

  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "mean %.6f\nmedian %.6f\nq25 %.6f\nq75 %.6f\ncount_included %lld\n"
                "count_excluded %lld\n",
                summary.mean, summary.median, summary.q25, summary.q75,
                static_cast<long long>(summary.count_included),
                static_cast<long long>(summary.count_excluded));
  write_text_atomic(out_dir / "summary.txt", buf);
  eval::histogram_report(summary, out_dir / "histogram.txt", out_dir / "histogram.png");

  std::cout << buf;
  if (!missing.empty())
    std::cout << "note: " << missing.size() << " ground-truth frames had no prediction\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"binary instrument segmentation pipeline (residual U-Net ensemble)"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a synthetic desk-scale dataset");
  std::string synth_spec, synth_out;
  uint64_t synth_seed = 0;
  synth->add_option("--spec", synth_spec, "synth spec file (key = value)")->required();
  synth->add_option("--out", synth_out, "output dataset root")->required();
  synth->add_option("--seed", synth_seed, "generation seed");

  auto* split = app.add_subcommand("split", "write leave-one-surgery-out fold assignments");
  std::string split_root, split_out;
  split->add_option("--data-root", split_root, "dataset root (or ORUNET_DATA_ROOT)");
  split->add_option("--out", split_out, "fold file to write")->required();

  auto* train_cmd = app.add_subcommand("train", "train one cross-validation fold");
  std::string train_config, train_resume;
  int train_fold_idx = 0;
  train_cmd->add_option("--config", train_config, "experiment config file")->required();
  train_cmd->add_option("--fold", train_fold_idx, "fold index")->required();
  train_cmd->add_option("--resume", train_resume, "checkpoint to resume from");

  auto* predict = app.add_subcommand("predict", "ensemble prediction for every frame");
  std::string pred_config, pred_frames, pred_out;
  std::vector<std::string> pred_ckpts;
  bool pred_dump = false;
  predict->add_option("--config", pred_config, "experiment config file")->required();
  predict->add_option("--checkpoints", pred_ckpts, "ensemble member checkpoints")
      ->required()
      ->expected(-1);
  predict->add_option("--frames", pred_frames, "dataset root to predict (default: config root)");
  predict->add_option("--out", pred_out, "output directory")->required();
  predict->add_flag("--dump-softmax", pred_dump, "also write raw softmax tensors");

  auto* evaluate = app.add_subcommand("evaluate", "score predictions against ground truth");
  std::string eval_pred, eval_gt, eval_conv = "train", eval_out;
  evaluate->add_option("--pred", eval_pred, "prediction directory")->required();
  evaluate->add_option("--gt", eval_gt, "ground-truth dataset root")->required();
  evaluate->add_option("--convention", eval_conv, "train|test exclusion convention");
  evaluate->add_option("--out", eval_out, "output directory for scores and summary")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (synth->parsed()) return run_synth(synth_spec, synth_out, synth_seed);
    if (split->parsed()) return run_split(split_root, split_out);
    if (train_cmd->parsed()) return run_train(train_config, train_fold_idx, train_resume);
    if (predict->parsed())
      return run_predict(pred_config, pred_ckpts, pred_frames, pred_out, pred_dump);
    if (evaluate->parsed()) return run_evaluate(eval_pred, eval_gt, eval_conv, eval_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
