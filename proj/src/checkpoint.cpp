#include "olnmt/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O writes raw little-endian words");

namespace olnmt {

namespace {

constexpr char kMagic[8] = {'O', 'L', 'N', 'M', 'T', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) { os.write((const char*)&v, 4); }
void put_f32(std::ostream& os, float v) { os.write((const char*)&v, 4); }

std::uint32_t get_u32(std::istream& is, const std::string& what) {
  std::uint32_t v;
  is.read((char*)&v, 4);
  if (!is) throw CheckpointError("truncated checkpoint while reading " + what);
  return v;
}

float get_f32(std::istream& is, const std::string& what) {
  float v;
  is.read((char*)&v, 4);
  if (!is) throw CheckpointError("truncated checkpoint while reading " + what);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const ParameterSet<float>& params) {
  config.validate();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot write checkpoint: " + path);
  f.write(kMagic, sizeof(kMagic));
  put_u32(f, kVersion);
  put_u32(f, (std::uint32_t)config.src_vocab_size);
  put_u32(f, (std::uint32_t)config.tgt_vocab_size);
  put_u32(f, (std::uint32_t)config.embedding_dim);
  put_u32(f, (std::uint32_t)config.hidden_dim);
  put_u32(f, (std::uint32_t)config.attention_dim);
  put_u32(f, (std::uint32_t)config.deep_output_dim);
  put_u32(f, (std::uint32_t)config.beam_size);
  put_u32(f, (std::uint32_t)config.max_output_length);
  put_f32(f, config.weight_noise_sigma);
  put_u32(f, (std::uint32_t)params.count());
  for (const auto& item : params.items) {
    put_u32(f, (std::uint32_t)item.name.size());
    f.write(item.name.data(), (std::streamsize)item.name.size());
    put_u32(f, (std::uint32_t)item.data.shape.size());
    for (int d : item.data.shape) put_u32(f, (std::uint32_t)d);
    f.write((const char*)item.data.v.data(), (std::streamsize)(item.data.v.size() * 4));
  }
  if (!f) throw CheckpointError("write failed for checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot read checkpoint: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0)
    throw CheckpointError(path + ": not a checkpoint file (bad magic)");
  std::uint32_t version = get_u32(f, "version");
  if (version != kVersion)
    throw CheckpointError(path + ": unsupported checkpoint version " + std::to_string(version) +
                          ", expected " + std::to_string(kVersion));
  Checkpoint ck;
  ck.config.src_vocab_size = (int)get_u32(f, "src_vocab_size");
  ck.config.tgt_vocab_size = (int)get_u32(f, "tgt_vocab_size");
  ck.config.embedding_dim = (int)get_u32(f, "embedding_dim");
  ck.config.hidden_dim = (int)get_u32(f, "hidden_dim");
  ck.config.attention_dim = (int)get_u32(f, "attention_dim");
  ck.config.deep_output_dim = (int)get_u32(f, "deep_output_dim");
  ck.config.beam_size = (int)get_u32(f, "beam_size");
  ck.config.max_output_length = (int)get_u32(f, "max_output_length");
  ck.config.weight_noise_sigma = get_f32(f, "weight_noise_sigma");
  ck.config.validate();

  auto spec = parameter_spec(ck.config);
  std::uint32_t count = get_u32(f, "parameter count");
  if (count != spec.size())
    throw CheckpointError(path + ": " + std::to_string(count) + " parameters, expected " +
                          std::to_string(spec.size()));
  for (size_t i = 0; i < spec.size(); ++i) {
    std::uint32_t name_len = get_u32(f, "parameter name length");
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    if (!f) throw CheckpointError("truncated checkpoint while reading a parameter name");
    if (name != spec[i].first)
      throw CheckpointError(path + ": parameter " + std::to_string(i) + " is '" + name +
                            "', expected '" + spec[i].first + "'");
    std::uint32_t rank = get_u32(f, "parameter rank");
    Shape shape(rank);
    for (auto& d : shape) d = (int)get_u32(f, "parameter dimension");
    if (shape != spec[i].second)
      throw CheckpointError(path + ": parameter '" + name + "' has shape " + shape_str(shape) +
                            ", expected " + shape_str(spec[i].second));
    ck.params.add(name, shape);
    auto& v = ck.params[i].v;
    f.read((char*)v.data(), (std::streamsize)(v.size() * 4));
    if (!f) throw CheckpointError(path + ": truncated data for parameter '" + name + "'");
  }
  return ck;
}

}  // namespace olnmt
