#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "dictdis/vocab.hpp"

namespace dictdis {

// One dictionary entry: a source phrase and its ordered candidate
// translations. Candidate order comes from the file and defines the
// candidate index j; the candidate count is the polysemy degree.
struct DictEntry {
  std::vector<std::string> source;
  std::vector<std::vector<std::string>> candidates;
  std::size_t line = 0;

  std::size_t degree() const { return candidates.size(); }
};

struct Dictionary {
  std::vector<DictEntry> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
};

// Parses the TSV dictionary format:
//   source phrase<TAB>cand1|cand2|...
// Lines beginning with '#' and blank lines are ignored; fields are trimmed.
Dictionary load_dictionary(const std::string& text);

// Dictionary with both sides encoded to vocabulary ids, ready for matching.
// Entries whose source side contains a token outside the vocabulary are
// dropped (a phrase of <unk>s would match arbitrary rare words).
struct IdDictEntry {
  std::vector<int> source;
  std::vector<std::vector<int>> candidates;
};

struct IdDictionary {
  std::vector<IdDictEntry> entries;
  std::size_t dropped_oov = 0;

  static IdDictionary from(const Dictionary& dict, const Vocabulary& vocab);
};

// Polysemy histogram and corpus coverage.
struct DictionaryStats {
  std::map<std::size_t, double> polysemy_histogram;  // degree -> % of entries
  double coverage_percent = 0.0;                     // % sentences with >= 1 match
  std::size_t total_entries = 0;
  std::size_t sentences = 0;
  std::size_t sentences_with_match = 0;
};

DictionaryStats dictionary_stats(const Dictionary& dict,
                                 const std::vector<std::vector<std::string>>& corpus);

}  // namespace dictdis
