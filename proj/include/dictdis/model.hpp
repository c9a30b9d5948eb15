#pragma once

#include <random>
#include <vector>

#include "dictdis/augment.hpp"
#include "dictdis/params.hpp"
#include "dictdis/tape.hpp"

namespace dictdis {

// Parameter tensors bound as leaves on one tape, plus the per-pass knobs
// (train mode switches dropout on; rng drives the dropout masks).
struct Bound {
  Tape* tape = nullptr;
  const Parameters* params = nullptr;
  std::vector<Var> vars;
  bool train = false;
  std::mt19937_64* rng = nullptr;

  const ModelConfig& cfg() const { return params->config(); }
  Var p(const std::string& name) const { return vars[params->index_of(name)]; }
};

Bound bind(Tape& tape, const Parameters& params, bool requires_grad);

struct EncodeResult {
  Var h;                             // [S_aug, d] final encoder states
  std::vector<std::uint8_t> valid;   // 1 where the position is not padding
};

// Row t = E_tok[token_ids[t]] + E_pos[position_ids[t]] + E_seg[segment_ids[t]],
// before dropout. Throws when any id is outside its table.
Var encoder_embedding(Bound& b, const AugmentedInput& in);

EncodeResult encode(Bound& b, const AugmentedInput& in);

// Per-step output distributions and the pieces they are mixed from. p_copy /
// p_dis are invalid when the input carries no constraints (the gate path is
// bypassed and p_final aliases p_pred exactly).
struct StepHeads {
  Var s_t;       // [d]
  Var alpha;     // [S_aug]
  Var c_t;       // [d]
  Var p_pred;    // [V]
  Var p_copy;
  Var p_dis;
  std::vector<Var> dis_per_constraint;  // softmax over candidates, one per constraint
  Var g_t;       // scalar
  Var p_final;   // [V]
};

struct TeacherForcedOut {
  Var dec_states;               // [T+1, d]
  Var alpha_avg;                // [T+1, S_aug]
  std::vector<StepHeads> steps; // T+1 entries; step t predicts target[t] (eos last)
};

// One decoder pass over the whole shifted target with a causal mask.
TeacherForcedOut forward_teacher_forced(Bound& b, const AugmentedInput& in,
                                        const std::vector<int>& target);

// Incremental decoding: rebuilds the decoder stack over the prefix (tokens
// already emitted, bos excluded) on the same tape as `enc` and returns the
// head outputs of the last position.
StepHeads decode_next(Bound& b, const EncodeResult& enc, const AugmentedInput& in,
                      const std::vector<int>& prefix);

}  // namespace dictdis
