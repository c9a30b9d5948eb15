#include "dictdis/augment.hpp"

#include "dictdis/common.hpp"

namespace dictdis {

namespace {

std::size_t augmented_length(std::size_t source_len,
                             const std::vector<ConstraintMatch>& matches,
                             std::size_t n_matches) {
  std::size_t len = source_len + 1;  // source + <eos>
  for (std::size_t i = 0; i < n_matches; ++i) {
    const auto& m = matches[i];
    len += 1 + (m.degree() - 1);  // <sep> and <isep>s
    for (const auto& cand : m.candidates) len += cand.size();
  }
  return len;
}

}  // namespace

AugmentedInput build_augmented_input(const std::vector<int>& source,
                                     const std::vector<ConstraintMatch>& matches,
                                     int p_offset,
                                     int max_segments,
                                     std::size_t max_aug_len) {
  if (source.empty()) throw Error(ErrorCategory::State, "cannot augment an empty source");
  if (static_cast<int>(source.size()) > p_offset)
    throw Error(ErrorCategory::Config,
                "source length " + std::to_string(source.size()) + " exceeds p_offset " +
                    std::to_string(p_offset));
  for (const auto& m : matches) {
    if (m.end <= m.start || m.end > source.size() || m.candidates.empty())
      throw Error(ErrorCategory::State, "invalid constraint match for source");
  }
  if (source.size() + 1 > max_aug_len)
    throw Error(ErrorCategory::Config, "source alone exceeds max_aug_len");

  // truncate by whole trailing constraints until the layout fits
  std::size_t keep = matches.size();
  while (keep > 0 && augmented_length(source.size(), matches, keep) > max_aug_len) --keep;

  AugmentedInput aug;
  aug.source_len = source.size();
  aug.dropped_constraints = matches.size() - keep;
  std::size_t total = augmented_length(source.size(), matches, keep);
  aug.token_ids.reserve(total);
  aug.position_ids.reserve(total);
  aug.segment_ids.reserve(total);
  aug.region.reserve(total);
  aug.cand_index.reserve(total);

  auto push = [&](int tok, int pos, int seg, Region r, int ci, int cj) {
    aug.token_ids.push_back(tok);
    aug.position_ids.push_back(pos);
    aug.segment_ids.push_back(seg);
    aug.region.push_back(r);
    aug.cand_index.emplace_back(ci, cj);
  };

  for (std::size_t s = 0; s < source.size(); ++s)
    push(source[s], static_cast<int>(s), 0, Region::Source, -1, -1);

  int tail_pos = p_offset;
  for (std::size_t i = 0; i < keep; ++i) {
    const auto& m = matches[i];
    int seg = std::min(static_cast<int>(i) + 1, max_segments - 1);
    push(Vocabulary::kSep, tail_pos++, seg, Region::Sep, -1, -1);
    for (std::size_t j = 0; j < m.candidates.size(); ++j) {
      if (j > 0) push(Vocabulary::kIsep, tail_pos++, seg, Region::Isep, -1, -1);
      for (int tok : m.candidates[j])
        push(tok, tail_pos++, seg, Region::Constraint, static_cast<int>(i), static_cast<int>(j));
    }
    aug.degrees.push_back(m.degree());
  }
  push(Vocabulary::kEos, tail_pos++, 0, Region::Eos, -1, -1);
  return aug;
}

ParsedAugmented parse_augmented(const std::vector<int>& token_ids) {
  ParsedAugmented parsed;
  std::size_t i = 0;
  while (i < token_ids.size() && token_ids[i] != Vocabulary::kSep && token_ids[i] != Vocabulary::kEos) {
    parsed.source.push_back(token_ids[i]);
    ++i;
  }
  while (i < token_ids.size() && token_ids[i] == Vocabulary::kSep) {
    ++i;  // consume <sep>
    std::vector<std::vector<int>> candidates(1);
    while (i < token_ids.size() && token_ids[i] != Vocabulary::kSep && token_ids[i] != Vocabulary::kEos) {
      if (token_ids[i] == Vocabulary::kIsep) {
        candidates.emplace_back();
      } else if (token_ids[i] == Vocabulary::kPad) {
        throw Error(ErrorCategory::Format, "pad token inside constraint block");
      } else {
        candidates.back().push_back(token_ids[i]);
      }
      ++i;
    }
    for (const auto& cand : candidates)
      if (cand.empty()) throw Error(ErrorCategory::Format, "empty candidate in augmented input");
    parsed.constraints.push_back(std::move(candidates));
  }
  if (i >= token_ids.size() || token_ids[i] != Vocabulary::kEos)
    throw Error(ErrorCategory::Format, "augmented input does not end with <eos>");
  return parsed;
}

}  // namespace dictdis
