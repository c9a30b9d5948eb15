#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace dictdis {

// Token <-> id mapping with six reserved symbols at fixed ids 0..5.
// Ids are contiguous; the special surface strings never survive
// tokenized corpus text (encode maps them to <unk>).
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kSep = 4;
  static constexpr int kIsep = 5;
  static constexpr int kNumSpecials = 6;

  Vocabulary();
  explicit Vocabulary(std::vector<std::string> tokens);  // full list incl. specials

  static bool is_special_surface(const std::string& token);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const;
  int id(const std::string& token) const;  // <unk> fallback; specials map to <unk>
  bool contains(const std::string& token) const;

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  const std::vector<std::string>& tokens() const { return tokens_; }

  // FNV-1a over the newline-joined token list; ties checkpoints to the vocab.
  std::uint64_t fingerprint() const;

  std::string serialize() const;  // one token per line, id = line index
  static Vocabulary deserialize(const std::string& text);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Frequency-thresholded vocabulary over a token-sequence stream.
// Ordering after the specials: frequency descending, ties lexicographic.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus,
                            std::size_t min_freq);

}  // namespace dictdis
