#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "dictdis/tensor.hpp"

namespace dictdis {

struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t d_ffn = 256;
  std::size_t vocab_size = 0;
  std::size_t max_aug_len = 192;
  std::size_t max_tgt_len = 64;
  std::size_t max_segments = 16;
  std::size_t p_offset = 128;
  std::size_t gate_hidden = 0;  // 0 means 2 * d_model
  double dropout = 0.1;
  std::uint64_t seed = 1;

  std::size_t gate_hidden_dim() const { return gate_hidden ? gate_hidden : 2 * d_model; }
  std::size_t head_dim() const { return d_model / n_heads; }
  // Largest position id + 1 the shared position table must cover.
  std::size_t position_rows() const { return p_offset + max_aug_len; }
  void validate() const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  bool operator==(const ModelConfig& o) const = default;
};

// Named parameter tensors in a fixed registration order. Order is part of the
// on-disk format, so registration happens in one place only.
class Parameters {
 public:
  explicit Parameters(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::size_t count() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  Tensor& at(std::size_t i) { return tensors_[i]; }
  const Tensor& at(std::size_t i) const { return tensors_[i]; }
  const std::string& name_at(std::size_t i) const { return names_[i]; }
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const;

  // Seeded init: embeddings N(0, d^-1/2), weights Xavier-normal, biases zero,
  // layer-norm gains one. Streams are derived per tensor name, so the values
  // do not depend on registration order.
  void init(std::uint64_t seed);

  // Rounds every value through float32. Checkpoints store f32, and training
  // applies this at every save so a resumed run replays bit-exactly.
  void round_to_f32();

  std::size_t total_values() const;

 private:
  void reg(const std::string& name, std::vector<std::size_t> shape);

  ModelConfig config_;
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

void round_tensor_to_f32(Tensor& t);

}  // namespace dictdis
