#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dictdis {

// Error categories surfaced by the CLI as a single machine-parsable line.
enum class ErrorCategory { Usage, Io, Format, Config, State, Numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory cat, const std::string& msg)
      : std::runtime_error(msg), cat_(cat) {}
  ErrorCategory category() const { return cat_; }

 private:
  ErrorCategory cat_;
};

const char* error_category_name(ErrorCategory cat);

// Whitespace word-level tokenizer. Splits on blanks/tabs, collapses runs.
std::vector<std::string> tokenize(const std::string& line);

// FNV-1a 64-bit over a byte string. Used for vocabulary fingerprints.
std::uint64_t fnv1a64(const std::string& bytes);

std::string to_hex(std::uint64_t value);

// splitmix64 step; used to derive independent RNG streams from (seed, tag).
std::uint64_t splitmix64(std::uint64_t x);

inline std::uint64_t derived_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(base ^ 0x9e3779b97f4a7c15ULL) ^ splitmix64(a + 0x1000003) ^ (b * 0xda942042e4dd58b5ULL + 1));
}

// Deterministic sampling helpers. The std:: distributions are not pinned
// across standard library implementations, so anything that must reproduce
// byte-exactly goes through these.
inline std::uint64_t rng_u64(std::mt19937_64& rng) { return rng(); }

inline std::size_t rng_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

inline double rng_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double rng_normal(std::mt19937_64& rng);

// In-place Fisher-Yates with the deterministic index sampler.
template <typename T>
void rng_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rng_index(rng, i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace dictdis
