#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dictdis {

// Seeded toy corpora. "copy": every dictionary source word has exactly one
// translation and the mapping is deterministic, so high token accuracy is
// reachable. "disambig": ambiguous words translate two ways; a marker token
// in the sentence decides which way, and two random filler tokens are
// appended to every target to keep the task noisy on purpose.
struct SyntheticData {
  std::vector<std::string> train_src, train_tgt;
  std::vector<std::string> dev_src, dev_tgt;
  std::vector<std::string> test_src, test_tgt;
  std::string dict_tsv;
};

SyntheticData make_synthetic(const std::string& kind, std::size_t train_n,
                             std::size_t dev_n, std::size_t test_n, std::uint64_t seed);

}  // namespace dictdis
