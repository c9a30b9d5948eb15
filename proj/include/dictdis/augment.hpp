#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dictdis/constraints.hpp"
#include "dictdis/vocab.hpp"

namespace dictdis {

enum class Region : std::uint8_t { Source, Sep, Constraint, Isep, Eos, Pad };

// The augmented encoder input
//   X <sep> C1^1 <isep> C1^2 <sep> C2^1 ... <eos>
// with per-position ids. Source positions carry position ids 0..S-1 and
// segment 0; everything appended after the source carries position ids
// counted up from p_offset. All positions of constraint i (including its
// leading <sep> and internal <isep>s) carry segment min(i+1, max_segments-1).
struct AugmentedInput {
  std::vector<int> token_ids;
  std::vector<int> position_ids;
  std::vector<int> segment_ids;
  std::vector<Region> region;
  // (constraint index, candidate index), both 0-based; (-1,-1) off CONSTRAINT positions
  std::vector<std::pair<int, int>> cand_index;

  std::size_t source_len = 0;
  std::vector<std::size_t> degrees;        // per retained constraint
  std::size_t dropped_constraints = 0;     // trailing constraints dropped to fit max_aug_len

  std::size_t size() const { return token_ids.size(); }
  std::size_t n_constraints() const { return degrees.size(); }
  bool has_constraints() const { return !degrees.empty(); }
};

AugmentedInput build_augmented_input(const std::vector<int>& source,
                                     const std::vector<ConstraintMatch>& matches,
                                     int p_offset,
                                     int max_segments,
                                     std::size_t max_aug_len);

// Inverse of build_augmented_input over the token sequence alone: recovers
// the source tokens and the ordered candidate lists from the separators.
struct ParsedAugmented {
  std::vector<int> source;
  std::vector<std::vector<std::vector<int>>> constraints;  // [i][j] -> token ids
};

ParsedAugmented parse_augmented(const std::vector<int>& token_ids);

}  // namespace dictdis
