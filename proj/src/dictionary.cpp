#include "dictdis/dictionary.hpp"

#include <algorithm>
#include <sstream>

#include "dictdis/common.hpp"
#include "dictdis/constraints.hpp"

namespace dictdis {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string phrase_key(const std::vector<std::string>& tokens) {
  std::string key;
  for (const auto& t : tokens) {
    key += t;
    key += ' ';
  }
  return key;
}

}  // namespace

Dictionary load_dictionary(const std::string& text) {
  Dictionary dict;
  std::map<std::string, std::size_t> seen;  // phrase key -> first line
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(ErrorCategory::Format,
                  "dictionary line " + std::to_string(lineno) + ": missing TAB separator");
    DictEntry entry;
    entry.line = lineno;
    entry.source = tokenize(trim(line.substr(0, tab)));
    if (entry.source.empty())
      throw Error(ErrorCategory::Format,
                  "dictionary line " + std::to_string(lineno) + ": empty source phrase");
    std::string rhs = line.substr(tab + 1);
    std::size_t pos = 0;
    while (true) {
      std::size_t bar = rhs.find('|', pos);
      std::string field = bar == std::string::npos ? rhs.substr(pos) : rhs.substr(pos, bar - pos);
      std::vector<std::string> cand = tokenize(trim(field));
      if (cand.empty())
        throw Error(ErrorCategory::Format,
                    "dictionary line " + std::to_string(lineno) + ": empty candidate field");
      entry.candidates.push_back(std::move(cand));
      if (bar == std::string::npos) break;
      pos = bar + 1;
    }
    std::string key = phrase_key(entry.source);
    auto [it, inserted] = seen.emplace(key, lineno);
    if (!inserted)
      throw Error(ErrorCategory::Format,
                  "dictionary line " + std::to_string(lineno) + ": duplicate source phrase (first at line " +
                      std::to_string(it->second) + ")");
    dict.entries.push_back(std::move(entry));
  }
  return dict;
}

IdDictionary IdDictionary::from(const Dictionary& dict, const Vocabulary& vocab) {
  IdDictionary out;
  for (const auto& e : dict.entries) {
    IdDictEntry ide;
    bool oov = false;
    for (const auto& tok : e.source) {
      int id = vocab.id(tok);
      if (id == Vocabulary::kUnk) {
        oov = true;
        break;
      }
      ide.source.push_back(id);
    }
    if (oov) {
      ++out.dropped_oov;
      continue;
    }
    for (const auto& cand : e.candidates) ide.candidates.push_back(vocab.encode(cand));
    out.entries.push_back(std::move(ide));
  }
  return out;
}

DictionaryStats dictionary_stats(const Dictionary& dict,
                                 const std::vector<std::vector<std::string>>& corpus) {
  DictionaryStats stats;
  stats.total_entries = dict.size();
  stats.sentences = corpus.size();
  if (!dict.empty()) {
    std::map<std::size_t, std::size_t> counts;
    for (const auto& e : dict.entries) ++counts[e.degree()];
    for (const auto& [degree, count] : counts)
      stats.polysemy_histogram[degree] =
          100.0 * static_cast<double>(count) / static_cast<double>(dict.size());
  }
  if (!corpus.empty() && !dict.empty()) {
    std::vector<std::vector<std::string>> sources;
    sources.reserve(dict.size());
    for (const auto& e : dict.entries) sources.push_back(e.source);
    PhraseScanner<std::string> scanner(sources);
    for (const auto& sent : corpus) {
      if (!scanner.scan(sent, 1).empty()) ++stats.sentences_with_match;
    }
    stats.coverage_percent = 100.0 * static_cast<double>(stats.sentences_with_match) /
                             static_cast<double>(corpus.size());
  }
  return stats;
}

}  // namespace dictdis
