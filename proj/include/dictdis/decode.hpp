#pragma once

#include <cstdint>
#include <vector>

#include "dictdis/model.hpp"
#include "dictdis/params.hpp"

namespace dictdis {

struct DecodeConfig {
  std::size_t beam_size = 5;
  std::size_t max_len = 64;
  double alpha = 0.0;           // copy pressure on sole-candidate constraints
  double length_penalty = 0.0;  // ranks by score / len^penalty

  void validate() const;
};

struct StepTrace {
  int token = -1;
  double logp = 0.0;
  double gate = -1.0;  // -1 when no constraints are attached
};

struct DecodeResult {
  std::vector<int> tokens;  // emitted ids, trailing <eos> stripped
  double score = 0.0;       // sum of log p over emitted tokens incl. <eos>
  bool reached_eos = false;
  std::vector<StepTrace> trace;
};

// Multiplies p by exp(alpha * attention mass) on tokens of single-candidate
// constraints, then renormalizes. alpha = 0 leaves p untouched. The relative
// order of all non-boosted tokens is preserved.
void alpha_boost(Tensor& p, const Tensor& attn, const AugmentedInput& in, double alpha);

DecodeResult greedy_decode(const Parameters& params, const AugmentedInput& in,
                           const DecodeConfig& cfg, bool want_trace = false);

DecodeResult beam_decode(const Parameters& params, const AugmentedInput& in,
                         const DecodeConfig& cfg, bool want_trace = false);

}  // namespace dictdis
