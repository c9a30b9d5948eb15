#include "dictdis/checkpoint.hpp"

#include <cstring>

#include <json.hpp>

#include "dictdis/common.hpp"
#include "dictdis/data_io.hpp"

namespace dictdis {

using nlohmann::json;

const char kCheckpointMagic[8] = {'D', 'D', 'I', 'S', 'C', 'K', 'P', 'T'};

namespace {

void put_u64_le(std::string& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

std::uint64_t get_u64_le(const std::string& in, std::size_t off) {
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i)
    x |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
  return x;
}

void put_f32_le(std::string& out, float f) {
  std::uint32_t b;
  std::memcpy(&b, &f, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((b >> (8 * i)) & 0xff));
}

float get_f32_le(const std::string& in, std::size_t off) {
  std::uint32_t b = 0;
  for (int i = 0; i < 4; ++i)
    b |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
  float f;
  std::memcpy(&f, &b, 4);
  return f;
}

}  // namespace

const Tensor* CheckpointData::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::string serialize_checkpoint(const CheckpointData& data) {
  json manifest;
  manifest["format_version"] = 1;
  manifest["config"] = json::parse(data.config.to_json());
  manifest["vocab_fingerprint"] = to_hex(data.vocab_fingerprint);
  manifest["step"] = data.step;
  json tensors = json::array();
  for (const auto& [name, t] : data.tensors) {
    json entry;
    entry["name"] = name;
    entry["shape"] = t.shape;
    entry["dtype"] = "float32";
    tensors.push_back(entry);
  }
  manifest["tensors"] = tensors;
  std::string mtext = manifest.dump();

  std::string out;
  out.reserve(16 + mtext.size() + 4 * 1024);
  out.append(kCheckpointMagic, 8);
  put_u64_le(out, mtext.size());
  out += mtext;
  for (const auto& [name, t] : data.tensors) {
    (void)name;
    for (double x : t.v) put_f32_le(out, static_cast<float>(x));
  }
  return out;
}

CheckpointData parse_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
    throw Error(ErrorCategory::Format, "not a checkpoint file (bad magic)");
  std::uint64_t mlen = get_u64_le(bytes, 8);
  if (16 + mlen > bytes.size())
    throw Error(ErrorCategory::Format, "checkpoint truncated in manifest");
  json manifest;
  try {
    manifest = json::parse(bytes.substr(16, mlen));
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::Format, std::string("checkpoint manifest: ") + e.what());
  }
  if (manifest.value("format_version", 0) != 1)
    throw Error(ErrorCategory::Format, "unsupported checkpoint format version");

  CheckpointData data;
  data.config = ModelConfig::from_json(manifest.at("config").dump());
  std::string fp = manifest.value("vocab_fingerprint", std::string());
  data.vocab_fingerprint = fp.empty() ? 0 : std::stoull(fp, nullptr, 16);
  data.step = manifest.value("step", std::uint64_t{0});

  std::size_t off = 16 + mlen;
  for (const json& entry : manifest.at("tensors")) {
    std::string name = entry.at("name").get<std::string>();
    if (entry.value("dtype", "") != "float32")
      throw Error(ErrorCategory::Format, "checkpoint tensor " + name + ": unsupported dtype");
    std::vector<std::size_t> shape = entry.at("shape").get<std::vector<std::size_t>>();
    Tensor t(shape);
    std::size_t need = t.numel() * 4;
    if (off + need > bytes.size())
      throw Error(ErrorCategory::Format, "checkpoint truncated in tensor " + name);
    for (std::size_t i = 0; i < t.numel(); ++i)
      t.v[i] = static_cast<double>(get_f32_le(bytes, off + 4 * i));
    off += need;
    data.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (off != bytes.size())
    throw Error(ErrorCategory::Format, "checkpoint has trailing bytes");
  return data;
}

void save_checkpoint(const std::string& path, const CheckpointData& data) {
  write_file(path, serialize_checkpoint(data));
}

CheckpointData load_checkpoint(const std::string& path) {
  return parse_checkpoint(read_file(path));
}

void restore_parameters(const CheckpointData& data, Parameters& params,
                        std::uint64_t expect_fingerprint) {
  if (!(data.config == params.config()))
    throw Error(ErrorCategory::Config, "checkpoint model config does not match");
  if (data.vocab_fingerprint != expect_fingerprint)
    throw Error(ErrorCategory::Config, "checkpoint vocabulary fingerprint does not match");
  for (std::size_t i = 0; i < params.count(); ++i) {
    const Tensor* src = data.find(params.name_at(i));
    if (!src)
      throw Error(ErrorCategory::Config,
                  "checkpoint missing tensor: " + params.name_at(i));
    if (!src->same_shape(params.at(i)))
      throw Error(ErrorCategory::Config,
                  "checkpoint tensor shape mismatch: " + params.name_at(i));
    params.at(i) = *src;
  }
}

}  // namespace dictdis
