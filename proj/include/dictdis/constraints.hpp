#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <vector>

#include "dictdis/dictionary.hpp"

namespace dictdis {

// A matched dictionary phrase in a source sentence. The span is a half-open
// token range; candidates are target-side id phrases in dictionary order.
struct ConstraintMatch {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive, end > start
  std::vector<std::vector<int>> candidates;

  std::size_t degree() const { return candidates.size(); }
};

// Greedy longest-match left-to-right scanner over phrase lists, shared by
// id-level constraint matching and string-level corpus statistics.
template <typename Token>
class PhraseScanner {
 public:
  struct Hit {
    std::size_t start;
    std::size_t end;
    std::size_t phrase_index;
  };

  explicit PhraseScanner(const std::vector<std::vector<Token>>& phrases) : phrases_(phrases) {
    for (std::size_t i = 0; i < phrases.size(); ++i) {
      if (phrases[i].empty()) continue;
      by_first_[phrases[i][0]].push_back(i);
    }
    // longest first so the scan can stop at the first hit per position
    for (auto& [tok, idxs] : by_first_) {
      std::stable_sort(idxs.begin(), idxs.end(), [&](std::size_t a, std::size_t b) {
        return phrases[a].size() > phrases[b].size();
      });
    }
  }

  std::vector<Hit> scan(const std::vector<Token>& tokens, std::size_t max_hits) const {
    std::vector<Hit> hits;
    std::size_t pos = 0;
    while (pos < tokens.size() && hits.size() < max_hits) {
      auto it = by_first_.find(tokens[pos]);
      bool matched = false;
      if (it != by_first_.end()) {
        for (std::size_t idx : it->second) {
          const auto& phrase = phrases_[idx];
          if (pos + phrase.size() > tokens.size()) continue;
          if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(pos))) {
            hits.push_back({pos, pos + phrase.size(), idx});
            pos += phrase.size();
            matched = true;
            break;
          }
        }
      }
      if (!matched) ++pos;
    }
    return hits;
  }

 private:
  const std::vector<std::vector<Token>>& phrases_;
  std::map<Token, std::vector<std::size_t>> by_first_;
};

// Greedy left-to-right longest-match scan of the dictionary against a
// source sentence. Spans never overlap; at most max_constraints matches are
// kept (leftmost first); the result is sorted by span start.
std::vector<ConstraintMatch> match_constraints(const std::vector<int>& source,
                                               const IdDictionary& dict,
                                               std::size_t max_constraints);

}  // namespace dictdis
