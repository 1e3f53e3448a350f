#include "orunet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "orunet/kv.hpp"

namespace orunet::model {

namespace {

constexpr char kMagic[8] = {'O', 'R', 'U', 'N', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kDtypeF32 = 0;

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_str(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
uint64_t read_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::string read_str(std::istream& in) {
  const uint32_t len = read_u32(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  return s;
}

}  // namespace

std::string serialize_model_config(const ModelConfig& cfg) {
  std::string s;
  s += "base_features = " + std::to_string(cfg.base_features) + "\n";
  s += "max_features = " + std::to_string(cfg.max_features) + "\n";
  s += "num_stages = " + std::to_string(cfg.num_stages) + "\n";
  s += "blocks_per_stage = " + kv::join_int_list(cfg.blocks_per_stage) + "\n";
  s += "num_classes = " + std::to_string(cfg.num_classes) + "\n";
  s += "deep_supervision_heads = " + std::to_string(cfg.deep_supervision_heads) + "\n";
  s += "input_channels = " + std::to_string(cfg.input_channels) + "\n";
  s += "norm_epsilon = " + kv::format_double(cfg.norm_epsilon) + "\n";
  return s;
}

ModelConfig parse_model_config(const std::map<std::string, std::string>& values) {
  kv::Reader r{values, "model config"};
  ModelConfig cfg;
  cfg.base_features = r.get_int_or("base_features", cfg.base_features);
  cfg.max_features = r.get_int_or("max_features", cfg.max_features);
  cfg.num_stages = r.get_int_or("num_stages", cfg.num_stages);
  if (values.count("blocks_per_stage"))
    cfg.blocks_per_stage = kv::parse_int_list(values.at("blocks_per_stage"));
  cfg.num_classes = r.get_int_or("num_classes", cfg.num_classes);
  cfg.deep_supervision_heads = r.get_int_or("deep_supervision_heads", cfg.deep_supervision_heads);
  cfg.input_channels = r.get_int_or("input_channels", cfg.input_channels);
  cfg.norm_epsilon = r.get_double_or("norm_epsilon", cfg.norm_epsilon);
  cfg.validate();
  return cfg;
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  write_str(out, serialize_model_config(data.config));
  write_u32(out, static_cast<uint32_t>(data.meta.size()));
  for (const auto& [key, value] : data.meta) {
    write_str(out, key);
    write_str(out, value);
  }
  write_u32(out, static_cast<uint32_t>(data.tensors.size()));
  for (const auto& [name, tensor] : data.tensors) {
    write_str(out, name);
    write_u32(out, kDtypeF32);
    write_u32(out, static_cast<uint32_t>(tensor.rank()));
    for (int i = 0; i < tensor.rank(); ++i) write_u64(out, static_cast<uint64_t>(tensor.dim(i)));
    out.write(reinterpret_cast<const char*>(tensor.ptr()),
              static_cast<std::streamsize>(tensor.numel() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path.string());
  const uint32_t version = read_u32(in);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

  CheckpointData data;
  data.config = parse_model_config(kv::parse_block(read_str(in)));
  const uint32_t meta_count = read_u32(in);
  for (uint32_t i = 0; i < meta_count; ++i) {
    std::string key = read_str(in);
    data.meta[key] = read_str(in);
  }
  const uint32_t tensor_count = read_u32(in);
  for (uint32_t i = 0; i < tensor_count; ++i) {
    std::string name = read_str(in);
    const uint32_t dtype = read_u32(in);
    if (dtype != kDtypeF32) throw std::runtime_error("unsupported tensor dtype in checkpoint");
    const uint32_t rank = read_u32(in);
    std::vector<int64_t> shape(rank);
    for (uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int64_t>(read_u64(in));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.ptr()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
    data.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (!in) throw std::runtime_error("truncated checkpoint: " + path.string());
  return data;
}

ModelConfig read_checkpoint_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path.string());
  read_u32(in);  // version
  return parse_model_config(kv::parse_block(read_str(in)));
}

void collect_model_tensors(ResUNet& model, std::vector<std::pair<std::string, Tensor>>& out) {
  model.visit_params(
      [&out](const std::string& name, Tensor& value, Tensor&) { out.emplace_back(name, value); });
  model.visit_buffers(
      [&out](const std::string& name, Tensor& value) { out.emplace_back(name, value); });
}

void restore_model_tensors(ResUNet& model, const CheckpointData& data) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, tensor] : data.tensors) by_name[name] = &tensor;

  auto restore = [&by_name](const std::string& name, Tensor& value) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw std::runtime_error("checkpoint is missing tensor '" + name + "'");
    if (it->second->shape != value.shape)
      throw std::runtime_error("checkpoint tensor '" + name + "' has shape " +
                               it->second->shape_str() + ", expected " + value.shape_str());
    value.data = it->second->data;
  };
  model.visit_params(
      [&restore](const std::string& name, Tensor& value, Tensor&) { restore(name, value); });
  model.visit_buffers([&restore](const std::string& name, Tensor& value) { restore(name, value); });
}

}  // namespace orunet::model
