#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dictdis/params.hpp"
#include "dictdis/tensor.hpp"

namespace dictdis {

// On-disk model snapshot: 8-byte magic, u64 little-endian manifest length,
// manifest JSON, then one raw little-endian float32 payload per tensor in
// manifest order. Optimizer moments ride along as "opt.m.*" / "opt.v.*".
struct CheckpointData {
  ModelConfig config;
  std::uint64_t vocab_fingerprint = 0;
  std::uint64_t step = 0;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
};

extern const char kCheckpointMagic[8];

std::string serialize_checkpoint(const CheckpointData& data);
CheckpointData parse_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

// Restores parameter values (not moments) into an existing registry. Throws
// Error(Config) when the checkpoint config or fingerprint disagrees.
void restore_parameters(const CheckpointData& data, Parameters& params,
                        std::uint64_t expect_fingerprint);

}  // namespace dictdis
