#include "dictdis/vocab.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "dictdis/common.hpp"

namespace dictdis {

namespace {
const char* kSpecialSurfaces[Vocabulary::kNumSpecials] = {
    "<pad>", "<unk>", "<bos>", "<eos>", "<sep>", "<isep>"};
}

Vocabulary::Vocabulary() {
  for (const char* s : kSpecialSurfaces) tokens_.emplace_back(s);
  for (int i = 0; i < size(); ++i) index_[tokens_[static_cast<std::size_t>(i)]] = i;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kNumSpecials)
    throw Error(ErrorCategory::Format, "vocabulary missing reserved symbols");
  for (int i = 0; i < kNumSpecials; ++i) {
    if (tokens_[static_cast<std::size_t>(i)] != kSpecialSurfaces[i])
      throw Error(ErrorCategory::Format,
                  "vocabulary id " + std::to_string(i) + " must be " + kSpecialSurfaces[i]);
  }
  for (int i = 0; i < size(); ++i) {
    auto [it, inserted] = index_.emplace(tokens_[static_cast<std::size_t>(i)], i);
    (void)it;
    if (!inserted)
      throw Error(ErrorCategory::Format, "duplicate vocabulary token: " + tokens_[static_cast<std::size_t>(i)]);
  }
}

bool Vocabulary::is_special_surface(const std::string& token) {
  for (const char* s : kSpecialSurfaces)
    if (token == s) return true;
  return false;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size())
    throw Error(ErrorCategory::State, "token id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocabulary::id(const std::string& token) const {
  if (is_special_surface(token)) return kUnk;
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return !is_special_surface(token) && index_.count(token) > 0;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

std::uint64_t Vocabulary::fingerprint() const {
  std::string joined;
  for (const auto& t : tokens_) {
    joined += t;
    joined += '\n';
  }
  return fnv1a64(joined);
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::deserialize(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus,
                            std::size_t min_freq) {
  if (min_freq < 1) throw Error(ErrorCategory::Config, "min_freq must be >= 1");
  std::map<std::string, std::size_t> freq;
  std::size_t total_tokens = 0;
  for (const auto& sent : corpus) {
    for (const auto& tok : sent) {
      if (Vocabulary::is_special_surface(tok)) continue;
      ++freq[tok];
      ++total_tokens;
    }
  }
  if (corpus.empty() || total_tokens == 0)
    throw Error(ErrorCategory::Format, "cannot build a vocabulary from an empty corpus");

  std::vector<std::pair<std::string, std::size_t>> items(freq.begin(), freq.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  std::vector<std::string> tokens = vocab.tokens();
  for (const auto& [tok, count] : items)
    if (count >= min_freq) tokens.push_back(tok);
  return Vocabulary(std::move(tokens));
}

}  // namespace dictdis
