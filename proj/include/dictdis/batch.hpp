#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dictdis/augment.hpp"

namespace dictdis {

// A (source, constraints, target) triplet in id space.
struct Example {
  std::vector<int> source;
  std::vector<int> target;
  std::vector<ConstraintMatch> constraints;
};

// Right-padded batch. Masks mark real positions; PAD positions are excluded
// from attention and from the loss.
struct Batch {
  std::vector<AugmentedInput> inputs;            // padded to the batch max
  std::vector<std::vector<int>> targets;         // padded with pad_id
  std::vector<std::size_t> target_lens;          // true lengths (pre padding)
  std::vector<std::vector<std::uint8_t>> enc_mask;  // 1 = real position
  std::vector<std::vector<std::uint8_t>> tgt_mask;

  std::size_t size() const { return inputs.size(); }
  // loss steps per example = target_len + 1 (the final <eos> prediction)
  std::size_t total_steps() const {
    std::size_t n = 0;
    for (std::size_t len : target_lens) n += len + 1;
    return n;
  }
};

Batch pad_batch(std::vector<AugmentedInput> inputs,
                std::vector<std::vector<int>> targets,
                int pad_id);

}  // namespace dictdis
