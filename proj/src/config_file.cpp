#include "orunet/config_file.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "orunet/checkpoint.hpp"
#include "orunet/kv.hpp"

namespace orunet::cli {

namespace {

std::map<std::string, std::map<std::string, std::string>> split_sections(const std::string& text) {
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::istringstream in(text);
  std::string line, current, body;
  auto flush = [&]() {
    if (!current.empty()) sections[current] = kv::parse_block(body);
    body.clear();
  };
  while (std::getline(in, line)) {
    const std::string t = kv::trim(line);
    if (t.size() >= 2 && t.front() == '[' && t.back() == ']') {
      flush();
      current = t.substr(1, t.size() - 2);
    } else if (!current.empty()) {
      body += line + "\n";
    } else if (!t.empty() && t[0] != '#') {
      throw std::runtime_error("config: key outside any section: " + t);
    }
  }
  flush();
  return sections;
}

train::TrainConfig parse_train_section(const std::map<std::string, std::string>& values) {
  kv::Reader r{values, "[train]"};
  train::TrainConfig cfg;
  cfg.batch_size = r.get_int_or("batch_size", cfg.batch_size);
  cfg.epochs = r.get_int_or("epochs", cfg.epochs);
  cfg.batches_per_epoch = r.get_int_or("batches_per_epoch", cfg.batches_per_epoch);
  cfg.initial_lr = r.get_double_or("initial_lr", cfg.initial_lr);
  cfg.momentum = r.get_double_or("momentum", cfg.momentum);
  cfg.poly_exponent = r.get_double_or("poly_exponent", cfg.poly_exponent);
  cfg.weight_decay = r.get_double_or("weight_decay", cfg.weight_decay);
  cfg.seed = static_cast<uint64_t>(std::stoull(r.get_or("seed", std::to_string(cfg.seed))));
  cfg.checkpoint_every = r.get_int_or("checkpoint_every", cfg.checkpoint_every);
  cfg.mixed_precision = r.get_bool_or("mixed_precision", cfg.mixed_precision);
  cfg.patch_h = r.get_int_or("patch_h", cfg.patch_h);
  cfg.patch_w = r.get_int_or("patch_w", cfg.patch_w);
  return cfg;
}

augment::AugmentConfig parse_augment_section(const std::map<std::string, std::string>& values) {
  kv::Reader r{values, "[augment]"};
  augment::AugmentConfig cfg;
  cfg.rotation_enabled = r.get_bool_or("rotation_enabled", cfg.rotation_enabled);
  cfg.rotation_prob = r.get_double_or("rotation_prob", cfg.rotation_prob);
  cfg.rotation_degrees = r.get_double_or("rotation_degrees", cfg.rotation_degrees);
  cfg.elastic_enabled = r.get_bool_or("elastic_enabled", cfg.elastic_enabled);
  cfg.elastic_prob = r.get_double_or("elastic_prob", cfg.elastic_prob);
  cfg.elastic_alpha_lo = r.get_double_or("elastic_alpha_lo", cfg.elastic_alpha_lo);
  cfg.elastic_alpha_hi = r.get_double_or("elastic_alpha_hi", cfg.elastic_alpha_hi);
  cfg.elastic_sigma_lo = r.get_double_or("elastic_sigma_lo", cfg.elastic_sigma_lo);
  cfg.elastic_sigma_hi = r.get_double_or("elastic_sigma_hi", cfg.elastic_sigma_hi);
  cfg.scale_enabled = r.get_bool_or("scale_enabled", cfg.scale_enabled);
  cfg.scale_prob = r.get_double_or("scale_prob", cfg.scale_prob);
  cfg.scale_lo = r.get_double_or("scale_lo", cfg.scale_lo);
  cfg.scale_hi = r.get_double_or("scale_hi", cfg.scale_hi);
  cfg.mirror_enabled = r.get_bool_or("mirror_enabled", cfg.mirror_enabled);
  cfg.mirror_prob = r.get_double_or("mirror_prob", cfg.mirror_prob);
  cfg.mirror_vertical = r.get_bool_or("mirror_vertical", cfg.mirror_vertical);
  cfg.mirror_horizontal = r.get_bool_or("mirror_horizontal", cfg.mirror_horizontal);
  cfg.noise_enabled = r.get_bool_or("noise_enabled", cfg.noise_enabled);
  cfg.noise_prob = r.get_double_or("noise_prob", cfg.noise_prob);
  cfg.noise_sigma_lo = r.get_double_or("noise_sigma_lo", cfg.noise_sigma_lo);
  cfg.noise_sigma_hi = r.get_double_or("noise_sigma_hi", cfg.noise_sigma_hi);
  cfg.brightness_enabled = r.get_bool_or("brightness_enabled", cfg.brightness_enabled);
  cfg.brightness_prob = r.get_double_or("brightness_prob", cfg.brightness_prob);
  cfg.brightness_lo = r.get_double_or("brightness_lo", cfg.brightness_lo);
  cfg.brightness_hi = r.get_double_or("brightness_hi", cfg.brightness_hi);
  cfg.contrast_enabled = r.get_bool_or("contrast_enabled", cfg.contrast_enabled);
  cfg.contrast_prob = r.get_double_or("contrast_prob", cfg.contrast_prob);
  cfg.contrast_lo = r.get_double_or("contrast_lo", cfg.contrast_lo);
  cfg.contrast_hi = r.get_double_or("contrast_hi", cfg.contrast_hi);
  cfg.gamma_enabled = r.get_bool_or("gamma_enabled", cfg.gamma_enabled);
  cfg.gamma_prob = r.get_double_or("gamma_prob", cfg.gamma_prob);
  cfg.gamma_lo = r.get_double_or("gamma_lo", cfg.gamma_lo);
  cfg.gamma_hi = r.get_double_or("gamma_hi", cfg.gamma_hi);
  return cfg;
}

std::string bool_str(bool v) { return v ? "true" : "false"; }

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  auto sections = split_sections(text);
  ExperimentConfig cfg;
  if (sections.count("data")) {
    kv::Reader r{sections.at("data"), "[data]"};
    cfg.data_root = r.get_or("root", "");
    cfg.output_dir = r.get_or("output_dir", "");
    const std::string folds = r.get_or("folds", "all");
    if (folds != "all") cfg.folds = kv::parse_int_list(folds);
    cfg.eval_convention = eval::convention_from_string(r.get_or("eval_convention", "train"));
  }
  if (sections.count("model")) cfg.model = model::parse_model_config(sections.at("model"));
  if (sections.count("train")) cfg.train = parse_train_section(sections.at("train"));
  if (sections.count("augment")) cfg.augment = parse_augment_section(sections.at("augment"));
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const ExperimentConfig& config) {
  std::ostringstream out;
  out << "[data]\n";
  out << "root = " << config.data_root.string() << "\n";
  out << "output_dir = " << config.output_dir.string() << "\n";
  out << "folds = " << (config.folds.empty() ? "all" : kv::join_int_list(config.folds)) << "\n";
  out << "eval_convention = " << eval::to_string(config.eval_convention) << "\n";
  out << "\n[model]\n" << model::serialize_model_config(config.model);

  const auto& t = config.train;
  out << "\n[train]\n";
  out << "batch_size = " << t.batch_size << "\n";
  out << "epochs = " << t.epochs << "\n";
  out << "batches_per_epoch = " << t.batches_per_epoch << "\n";
  out << "initial_lr = " << kv::format_double(t.initial_lr) << "\n";
  out << "momentum = " << kv::format_double(t.momentum) << "\n";
  out << "poly_exponent = " << kv::format_double(t.poly_exponent) << "\n";
  out << "weight_decay = " << kv::format_double(t.weight_decay) << "\n";
  out << "seed = " << t.seed << "\n";
  out << "checkpoint_every = " << t.checkpoint_every << "\n";
  out << "mixed_precision = " << bool_str(t.mixed_precision) << "\n";
  out << "patch_h = " << t.patch_h << "\n";
  out << "patch_w = " << t.patch_w << "\n";

  const auto& a = config.augment;
  out << "\n[augment]\n";
  out << "rotation_enabled = " << bool_str(a.rotation_enabled) << "\n";
  out << "rotation_prob = " << kv::format_double(a.rotation_prob) << "\n";
  out << "rotation_degrees = " << kv::format_double(a.rotation_degrees) << "\n";
  out << "elastic_enabled = " << bool_str(a.elastic_enabled) << "\n";
  out << "elastic_prob = " << kv::format_double(a.elastic_prob) << "\n";
  out << "elastic_alpha_lo = " << kv::format_double(a.elastic_alpha_lo) << "\n";
  out << "elastic_alpha_hi = " << kv::format_double(a.elastic_alpha_hi) << "\n";
  out << "elastic_sigma_lo = " << kv::format_double(a.elastic_sigma_lo) << "\n";
  out << "elastic_sigma_hi = " << kv::format_double(a.elastic_sigma_hi) << "\n";
  out << "scale_enabled = " << bool_str(a.scale_enabled) << "\n";
  out << "scale_prob = " << kv::format_double(a.scale_prob) << "\n";
  out << "scale_lo = " << kv::format_double(a.scale_lo) << "\n";
  out << "scale_hi = " << kv::format_double(a.scale_hi) << "\n";
  out << "mirror_enabled = " << bool_str(a.mirror_enabled) << "\n";
  out << "mirror_prob = " << kv::format_double(a.mirror_prob) << "\n";
  out << "mirror_vertical = " << bool_str(a.mirror_vertical) << "\n";
  out << "mirror_horizontal = " << bool_str(a.mirror_horizontal) << "\n";
  out << "noise_enabled = " << bool_str(a.noise_enabled) << "\n";
  out << "noise_prob = " << kv::format_double(a.noise_prob) << "\n";
  out << "noise_sigma_lo = " << kv::format_double(a.noise_sigma_lo) << "\n";
  out << "noise_sigma_hi = " << kv::format_double(a.noise_sigma_hi) << "\n";
  out << "brightness_enabled = " << bool_str(a.brightness_enabled) << "\n";
  out << "brightness_prob = " << kv::format_double(a.brightness_prob) << "\n";
  out << "brightness_lo = " << kv::format_double(a.brightness_lo) << "\n";
  out << "brightness_hi = " << kv::format_double(a.brightness_hi) << "\n";
  out << "contrast_enabled = " << bool_str(a.contrast_enabled) << "\n";
  out << "contrast_prob = " << kv::format_double(a.contrast_prob) << "\n";
  out << "contrast_lo = " << kv::format_double(a.contrast_lo) << "\n";
  out << "contrast_hi = " << kv::format_double(a.contrast_hi) << "\n";
  out << "gamma_enabled = " << bool_str(a.gamma_enabled) << "\n";
  out << "gamma_prob = " << kv::format_double(a.gamma_prob) << "\n";
  out << "gamma_lo = " << kv::format_double(a.gamma_lo) << "\n";
  out << "gamma_hi = " << kv::format_double(a.gamma_hi) << "\n";
  return out.str();
}

void write_config_file(const std::filesystem::path& path, const ExperimentConfig& config) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path.string());
  out << serialize_config(config);
}

}  // namespace orunet::cli
