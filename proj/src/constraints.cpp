#include "dictdis/constraints.hpp"

namespace dictdis {

std::vector<ConstraintMatch> match_constraints(const std::vector<int>& source,
                                               const IdDictionary& dict,
                                               std::size_t max_constraints) {
  std::vector<ConstraintMatch> matches;
  if (dict.entries.empty() || source.empty() || max_constraints == 0) return matches;

  std::vector<std::vector<int>> sources;
  sources.reserve(dict.entries.size());
  for (const auto& e : dict.entries) sources.push_back(e.source);
  PhraseScanner<int> scanner(sources);

  for (const auto& hit : scanner.scan(source, max_constraints)) {
    ConstraintMatch m;
    m.start = hit.start;
    m.end = hit.end;
    m.candidates = dict.entries[hit.phrase_index].candidates;
    matches.push_back(std::move(m));
  }
  return matches;
}

}  // namespace dictdis
