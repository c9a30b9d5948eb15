#include "dictdis/batch.hpp"

#include <algorithm>

#include "dictdis/common.hpp"

namespace dictdis {

Batch pad_batch(std::vector<AugmentedInput> inputs,
                std::vector<std::vector<int>> targets,
                int pad_id) {
  if (inputs.empty() || inputs.size() != targets.size())
    throw Error(ErrorCategory::State, "pad_batch needs a nonempty, aligned batch");

  std::size_t max_in = 0, max_tgt = 0;
  for (const auto& in : inputs) max_in = std::max(max_in, in.size());
  for (const auto& t : targets) max_tgt = std::max(max_tgt, t.size());

  Batch batch;
  batch.inputs = std::move(inputs);
  batch.targets = std::move(targets);
  for (auto& in : batch.inputs) {
    std::vector<std::uint8_t> mask(max_in, 0);
    std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(in.size()), 1);
    while (in.size() < max_in) {
      in.token_ids.push_back(pad_id);
      in.position_ids.push_back(0);
      in.segment_ids.push_back(0);
      in.region.push_back(Region::Pad);
      in.cand_index.emplace_back(-1, -1);
    }
    batch.enc_mask.push_back(std::move(mask));
  }
  for (auto& t : batch.targets) {
    batch.target_lens.push_back(t.size());
    std::vector<std::uint8_t> mask(max_tgt, 0);
    std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(t.size()), 1);
    t.resize(max_tgt, pad_id);
    batch.tgt_mask.push_back(std::move(mask));
  }
  return batch;
}

}  // namespace dictdis
