#include "dictdis/params.hpp"

#include <cmath>
#include <random>

#include <json.hpp>

#include "dictdis/common.hpp"

namespace dictdis {

using nlohmann::json;

void ModelConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0)
    throw Error(ErrorCategory::Config, "d_model must be a positive multiple of n_heads");
  if (n_layers == 0) throw Error(ErrorCategory::Config, "n_layers must be positive");
  if (d_ffn == 0) throw Error(ErrorCategory::Config, "d_ffn must be positive");
  if (vocab_size < 6)
    throw Error(ErrorCategory::Config, "vocab_size must cover the special tokens");
  if (max_aug_len < 4) throw Error(ErrorCategory::Config, "max_aug_len too small");
  if (max_tgt_len == 0) throw Error(ErrorCategory::Config, "max_tgt_len must be positive");
  if (max_segments < 2) throw Error(ErrorCategory::Config, "max_segments must be at least 2");
  if (p_offset == 0) throw Error(ErrorCategory::Config, "p_offset must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw Error(ErrorCategory::Config, "dropout must be in [0, 1)");
  if (max_tgt_len + 1 > position_rows())
    throw Error(ErrorCategory::Config, "position table too small for max_tgt_len");
}

std::string ModelConfig::to_json() const {
  json j;
  j["d_model"] = d_model;
  j["n_heads"] = n_heads;
  j["n_layers"] = n_layers;
  j["d_ffn"] = d_ffn;
  j["vocab_size"] = vocab_size;
  j["max_aug_len"] = max_aug_len;
  j["max_tgt_len"] = max_tgt_len;
  j["max_segments"] = max_segments;
  j["p_offset"] = p_offset;
  j["gate_hidden"] = gate_hidden;
  j["dropout"] = dropout;
  j["seed"] = seed;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::Format, std::string("model config: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCategory::Format, "model config must be an object");
  ModelConfig c;
  try {
    c.d_model = j.value("d_model", c.d_model);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.n_layers = j.value("n_layers", c.n_layers);
    c.d_ffn = j.value("d_ffn", c.d_ffn);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.max_aug_len = j.value("max_aug_len", c.max_aug_len);
    c.max_tgt_len = j.value("max_tgt_len", c.max_tgt_len);
    c.max_segments = j.value("max_segments", c.max_segments);
    c.p_offset = j.value("p_offset", c.p_offset);
    c.gate_hidden = j.value("gate_hidden", c.gate_hidden);
    c.dropout = j.value("dropout", c.dropout);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::Format, std::string("model config: ") + e.what());
  }
  return c;
}

Parameters::Parameters(const ModelConfig& config) : config_(config) {
  config_.validate();
  const std::size_t d = config_.d_model;
  const std::size_t f = config_.d_ffn;
  const std::size_t v = config_.vocab_size;
  const std::size_t gh = config_.gate_hidden_dim();

  reg("embed.tok", {v, d});
  reg("embed.pos", {config_.position_rows(), d});
  reg("embed.seg", {config_.max_segments, d});

  auto reg_attn = [&](const std::string& p) {
    reg(p + ".wq", {d, d});
    reg(p + ".bq", {d});
    reg(p + ".wk", {d, d});
    reg(p + ".bk", {d});
    reg(p + ".wv", {d, d});
    reg(p + ".bv", {d});
    reg(p + ".wo", {d, d});
    reg(p + ".bo", {d});
    reg(p + ".ln.g", {d});
    reg(p + ".ln.b", {d});
  };
  auto reg_ffn = [&](const std::string& p) {
    reg(p + ".w1", {d, f});
    reg(p + ".b1", {f});
    reg(p + ".w2", {f, d});
    reg(p + ".b2", {d});
    reg(p + ".ln.g", {d});
    reg(p + ".ln.b", {d});
  };

  for (std::size_t i = 0; i < config_.n_layers; ++i) {
    std::string base = "enc." + std::to_string(i);
    reg_attn(base + ".attn");
    reg_ffn(base + ".ffn");
  }
  for (std::size_t i = 0; i < config_.n_layers; ++i) {
    std::string base = "dec." + std::to_string(i);
    reg_attn(base + ".self");
    reg_attn(base + ".cross");
    reg_ffn(base + ".ffn");
  }
  reg("out.w", {d, v});
  reg("gate.w1", {2 * d, gh});
  reg("gate.b1", {gh});
  reg("gate.w2", {gh, 1});
  reg("gate.b2", {1});
}

void Parameters::reg(const std::string& name, std::vector<std::size_t> shape) {
  index_.emplace(name, names_.size());
  names_.push_back(name);
  tensors_.emplace_back(std::move(shape));
}

Tensor& Parameters::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCategory::State, "unknown parameter: " + name);
  return tensors_[it->second];
}

const Tensor& Parameters::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCategory::State, "unknown parameter: " + name);
  return tensors_[it->second];
}

std::size_t Parameters::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCategory::State, "unknown parameter: " + name);
  return it->second;
}

void Parameters::init(std::uint64_t seed) {
  const double embed_std = 1.0 / std::sqrt(static_cast<double>(config_.d_model));
  for (std::size_t i = 0; i < names_.size(); ++i) {
    const std::string& n = names_[i];
    Tensor& t = tensors_[i];
    std::mt19937_64 rng(derived_seed(seed, fnv1a64(n)));
    bool is_embed = n.rfind("embed.", 0) == 0;
    bool is_ln_gain = n.size() > 5 && n.substr(n.size() - 5) == ".ln.g";
    if (is_embed) {
      for (double& x : t.v) x = rng_normal(rng) * embed_std;
    } else if (t.rank() == 2) {
      double std = std::sqrt(2.0 / static_cast<double>(t.rows() + t.cols()));
      for (double& x : t.v) x = rng_normal(rng) * std;
    } else if (is_ln_gain) {
      t.fill(1.0);
    } else {
      t.fill(0.0);
    }
  }
  round_to_f32();
}

void round_tensor_to_f32(Tensor& t) {
  for (double& x : t.v) x = static_cast<double>(static_cast<float>(x));
}

void Parameters::round_to_f32() {
  for (Tensor& t : tensors_) round_tensor_to_f32(t);
}

std::size_t Parameters::total_values() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors_) n += t.numel();
  return n;
}

}  // namespace dictdis
