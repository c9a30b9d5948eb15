#include "dictdis/model.hpp"

#include <cmath>
#include <memory>

#include "dictdis/common.hpp"

namespace dictdis {

namespace {

constexpr double kCopyMassFloor = 1e-12;

Var maybe_dropout(Bound& b, Var x) {
  const double p = b.cfg().dropout;
  if (!b.train || p <= 0.0) return x;
  if (!b.rng) throw Error(ErrorCategory::State, "train-mode forward needs an rng");
  const double keep = 1.0 - p;
  Tensor mask(x.val().shape);
  for (double& m : mask.v) m = (rng_uniform(*b.rng) < keep) ? 1.0 / keep : 0.0;
  return b.tape->mul_const(x, std::move(mask));
}

void check_finite(const Var& v, const std::string& where) {
  if (!v.val().all_finite())
    throw Error(ErrorCategory::Numeric, "non-finite values in " + where);
}

// Multi-head attention sublayer body (projection output, pre-residual).
// When `head_attns` is given, the per-head post-softmax matrices are
// appended to it.
Var attention(Bound& b, const std::string& pfx, Var q_in, Var kv_in, MaskPtr mask,
              std::vector<Var>* head_attns) {
  Tape& t = *b.tape;
  const std::size_t heads = b.cfg().n_heads;
  const std::size_t dk = b.cfg().head_dim();
  Var q = t.add_bias(t.matmul(q_in, b.p(pfx + ".wq"), false, false), b.p(pfx + ".bq"));
  Var k = t.add_bias(t.matmul(kv_in, b.p(pfx + ".wk"), false, false), b.p(pfx + ".bk"));
  Var v = t.add_bias(t.matmul(kv_in, b.p(pfx + ".wv"), false, false), b.p(pfx + ".bv"));
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Var> ctx;
  ctx.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = t.slice_cols(q, h * dk, (h + 1) * dk);
    Var kh = t.slice_cols(k, h * dk, (h + 1) * dk);
    Var vh = t.slice_cols(v, h * dk, (h + 1) * dk);
    Var scores = t.affine(t.matmul(qh, kh, false, true), scale, 0.0);
    Var attn = t.softmax_rows(scores, mask);
    if (head_attns) head_attns->push_back(attn);
    ctx.push_back(t.matmul(attn, vh, false, false));
  }
  Var cat = t.concat_cols(ctx);
  return t.add_bias(t.matmul(cat, b.p(pfx + ".wo"), false, false), b.p(pfx + ".bo"));
}

Var sublayer(Bound& b, const std::string& ln_pfx, Var x, Var body) {
  Tape& t = *b.tape;
  Var sum = t.add(x, maybe_dropout(b, body));
  return t.layer_norm(sum, b.p(ln_pfx + ".ln.g"), b.p(ln_pfx + ".ln.b"));
}

Var ffn_body(Bound& b, const std::string& pfx, Var x) {
  Tape& t = *b.tape;
  Var h = t.relu(t.add_bias(t.matmul(x, b.p(pfx + ".w1"), false, false), b.p(pfx + ".b1")));
  return t.add_bias(t.matmul(h, b.p(pfx + ".w2"), false, false), b.p(pfx + ".b2"));
}

// Token positions of every candidate, plus the copy-head position mask.
struct ConstraintIndex {
  std::vector<std::vector<std::vector<std::size_t>>> cand_positions;
  std::vector<std::uint8_t> constraint_keep;
};

ConstraintIndex index_constraints(const AugmentedInput& in) {
  ConstraintIndex idx;
  idx.cand_positions.resize(in.n_constraints());
  for (std::size_t i = 0; i < in.n_constraints(); ++i)
    idx.cand_positions[i].resize(static_cast<std::size_t>(in.degrees[i]));
  idx.constraint_keep.assign(in.size(), 0);
  for (std::size_t p = 0; p < in.size(); ++p) {
    if (in.region[p] != Region::Constraint) continue;
    auto [i, j] = in.cand_index[p];
    if (i < 0 || static_cast<std::size_t>(i) >= idx.cand_positions.size() || j < 0 ||
        static_cast<std::size_t>(j) >= idx.cand_positions[static_cast<std::size_t>(i)].size())
      throw Error(ErrorCategory::State, "constraint candidate index out of range");
    idx.cand_positions[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].push_back(p);
    idx.constraint_keep[p] = 1;
  }
  for (std::size_t i = 0; i < idx.cand_positions.size(); ++i)
    for (std::size_t j = 0; j < idx.cand_positions[i].size(); ++j)
      if (idx.cand_positions[i][j].empty())
        throw Error(ErrorCategory::State, "constraint candidate with no token positions");
  return idx;
}

// Per-forward state reused across decoder steps.
struct HeadContext {
  ConstraintIndex cidx;
  std::vector<std::vector<Var>> cand_embed;  // [i][j] mean-pooled encoder states
  std::vector<Tensor> cand_proj;             // [i]: rows spread candidates over vocab
};

HeadContext make_head_context(Bound& b, const EncodeResult& enc, const AugmentedInput& in) {
  HeadContext hc;
  hc.cidx = index_constraints(in);
  const std::size_t vocab = b.cfg().vocab_size;
  hc.cand_embed.resize(hc.cidx.cand_positions.size());
  hc.cand_proj.reserve(hc.cidx.cand_positions.size());
  for (std::size_t i = 0; i < hc.cidx.cand_positions.size(); ++i) {
    const auto& cands = hc.cidx.cand_positions[i];
    Tensor proj = Tensor::mat(cands.size(), vocab);
    for (std::size_t j = 0; j < cands.size(); ++j) {
      hc.cand_embed[i].push_back(b.tape->mean_rows_subset(enc.h, cands[j]));
      double w = 1.0 / static_cast<double>(cands[j].size());
      for (std::size_t p : cands[j]) {
        int tok = in.token_ids[p];
        if (tok < 0 || static_cast<std::size_t>(tok) >= vocab)
          throw Error(ErrorCategory::State, "constraint token id outside vocabulary");
        proj.at(j, static_cast<std::size_t>(tok)) += w;
      }
    }
    hc.cand_proj.push_back(std::move(proj));
  }
  return hc;
}

StepHeads heads_for_step(Bound& b, const EncodeResult& enc, const AugmentedInput& in,
                         const HeadContext& hc, Var s_t, Var alpha_t, std::size_t step) {
  Tape& t = *b.tape;
  StepHeads out;
  out.s_t = s_t;
  out.alpha = alpha_t;
  out.p_pred = t.softmax_vec(t.vecmat(s_t, b.p("out.w")));
  out.c_t = t.vecmat(alpha_t, enc.h);

  const std::size_t nc = hc.cidx.cand_positions.size();
  if (nc == 0) {
    out.p_final = out.p_pred;
    check_finite(out.p_final, "decoder step " + std::to_string(step));
    return out;
  }

  // Copy head: cross-attention mass scattered onto the constraint token ids.
  double mass = 0.0;
  for (std::size_t p = 0; p < in.size(); ++p) {
    if (hc.cidx.constraint_keep[p]) mass += alpha_t.val().v[p];
  }
  if (mass >= kCopyMassFloor) {
    Var gathered = t.attn_to_vocab(alpha_t, in.token_ids, hc.cidx.constraint_keep,
                                   b.cfg().vocab_size);
    out.p_copy = t.normalize_sum(gathered);
  }

  // Disambiguation head: match the attention summary against each candidate's
  // pooled encoding, normalise per constraint, spread over candidate tokens.
  std::vector<Var> dis_terms;
  for (std::size_t i = 0; i < nc; ++i) {
    const auto& embeds = hc.cand_embed[i];
    Var scores;
    for (std::size_t j = 0; j < embeds.size(); ++j) {
      Var s = t.dot(out.c_t, embeds[j]);
      scores = (j == 0) ? s : t.concat_vec(scores, s);
    }
    Var pi = t.softmax_vec(scores);
    out.dis_per_constraint.push_back(pi);
    dis_terms.push_back(t.vecmat_const(pi, hc.cand_proj[i]));
  }
  Var dis_sum = dis_terms[0];
  for (std::size_t i = 1; i < dis_terms.size(); ++i) dis_sum = t.add(dis_sum, dis_terms[i]);
  out.p_dis = t.affine(dis_sum, 1.0 / static_cast<double>(nc), 0.0);

  // Gate over [attention summary; decoder state].
  Var cat = t.concat_vec(out.c_t, out.s_t);
  Var hid = t.relu(t.add_bias(t.vecmat(cat, b.p("gate.w1")), b.p("gate.b1")));
  Var z = t.add(t.vecmat(hid, b.p("gate.w2")), b.p("gate.b2"));
  out.g_t = t.sigmoid(z);

  Var gated_pred = t.scalar_mul_vec(out.g_t, out.p_pred);
  Var inv_g = t.affine(out.g_t, -1.0, 1.0);
  Var rest;
  if (out.p_copy.valid()) {
    Var half = t.affine(t.add(out.p_copy, out.p_dis), 0.5, 0.0);
    rest = t.scalar_mul_vec(inv_g, half);
  } else {
    rest = t.scalar_mul_vec(inv_g, out.p_dis);
  }
  out.p_final = t.add(gated_pred, rest);
  check_finite(out.p_final, "decoder step " + std::to_string(step));
  return out;
}

struct DecoderPassOut {
  Var states;
  Var alpha_avg;
};

DecoderPassOut decoder_pass(Bound& b, const EncodeResult& enc,
                            const std::vector<int>& tokens_with_bos) {
  Tape& t = *b.tape;
  const ModelConfig& cfg = b.cfg();
  const std::size_t L = tokens_with_bos.size();
  if (L == 0) throw Error(ErrorCategory::State, "decoder pass over empty prefix");
  if (L > cfg.max_tgt_len + 1)
    throw Error(ErrorCategory::Config, "target longer than max_tgt_len");

  std::vector<int> pos(L);
  for (std::size_t i = 0; i < L; ++i) {
    if (tokens_with_bos[i] < 0 ||
        static_cast<std::size_t>(tokens_with_bos[i]) >= cfg.vocab_size)
      throw Error(ErrorCategory::State, "target token id outside vocabulary");
    pos[i] = static_cast<int>(i);
  }
  Var x = t.add(t.rows_embed(b.p("embed.tok"), tokens_with_bos),
                t.rows_embed(b.p("embed.pos"), pos));
  x = maybe_dropout(b, x);

  const std::size_t S = enc.valid.size();
  auto causal = std::make_shared<MaskMatrix>(L, L);
  for (std::size_t r = 0; r < L; ++r)
    for (std::size_t c = 0; c < L; ++c) causal->set(r, c, c <= r);
  auto cross = std::make_shared<MaskMatrix>(L, S);
  for (std::size_t r = 0; r < L; ++r)
    for (std::size_t c = 0; c < S; ++c) cross->set(r, c, enc.valid[c] != 0);

  std::vector<Var> last_heads;
  for (std::size_t layer = 0; layer < cfg.n_layers; ++layer) {
    std::string base = "dec." + std::to_string(layer);
    bool last = layer + 1 == cfg.n_layers;
    Var self_out = attention(b, base + ".self", x, x, causal, nullptr);
    x = sublayer(b, base + ".self", x, self_out);
    Var cross_out =
        attention(b, base + ".cross", x, enc.h, cross, last ? &last_heads : nullptr);
    x = sublayer(b, base + ".cross", x, cross_out);
    Var f = ffn_body(b, base + ".ffn", x);
    x = sublayer(b, base + ".ffn", x, f);
    check_finite(x, "decoder layer " + std::to_string(layer) + " output");
  }

  Var sum = last_heads[0];
  for (std::size_t h = 1; h < last_heads.size(); ++h) sum = t.add(sum, last_heads[h]);
  Var alpha_avg = t.affine(sum, 1.0 / static_cast<double>(last_heads.size()), 0.0);
  return {x, alpha_avg};
}

}  // namespace

Bound bind(Tape& tape, const Parameters& params, bool requires_grad) {
  Bound b;
  b.tape = &tape;
  b.params = &params;
  b.vars.reserve(params.count());
  for (std::size_t i = 0; i < params.count(); ++i)
    b.vars.push_back(tape.leaf(params.at(i), requires_grad));
  return b;
}

Var encoder_embedding(Bound& b, const AugmentedInput& in) {
  Tape& t = *b.tape;
  const ModelConfig& cfg = b.cfg();
  const std::size_t S = in.size();
  if (S == 0) throw Error(ErrorCategory::State, "encode: empty input");
  if (S > cfg.max_aug_len)
    throw Error(ErrorCategory::Config, "augmented input longer than max_aug_len");

  std::vector<int> toks(S), pos(S), seg(S);
  for (std::size_t i = 0; i < S; ++i) {
    toks[i] = in.token_ids[i];
    pos[i] = in.position_ids[i];
    seg[i] = in.segment_ids[i];
    if (toks[i] < 0 || static_cast<std::size_t>(toks[i]) >= cfg.vocab_size)
      throw Error(ErrorCategory::State, "encoder token id outside vocabulary");
    if (pos[i] < 0 || static_cast<std::size_t>(pos[i]) >= cfg.position_rows())
      throw Error(ErrorCategory::Config, "position id outside position table");
    if (seg[i] < 0 || static_cast<std::size_t>(seg[i]) >= cfg.max_segments)
      throw Error(ErrorCategory::Config, "segment id outside segment table");
  }
  return t.add(t.add(t.rows_embed(b.p("embed.tok"), toks),
                     t.rows_embed(b.p("embed.pos"), pos)),
               t.rows_embed(b.p("embed.seg"), seg));
}

EncodeResult encode(Bound& b, const AugmentedInput& in) {
  const ModelConfig& cfg = b.cfg();
  const std::size_t S = in.size();

  Var x = encoder_embedding(b, in);
  EncodeResult res;
  res.valid.assign(S, 1);
  for (std::size_t i = 0; i < S; ++i) {
    if (in.region[i] == Region::Pad) res.valid[i] = 0;
  }
  x = maybe_dropout(b, x);

  // Pad rows keep a self-edge so their softmax stays defined; their output
  // never reaches valid positions because pad keys are masked everywhere.
  auto mask = std::make_shared<MaskMatrix>(S, S);
  for (std::size_t r = 0; r < S; ++r)
    for (std::size_t c = 0; c < S; ++c) mask->set(r, c, res.valid[c] != 0 || r == c);

  for (std::size_t layer = 0; layer < cfg.n_layers; ++layer) {
    std::string base = "enc." + std::to_string(layer);
    Var a = attention(b, base + ".attn", x, x, mask, nullptr);
    x = sublayer(b, base + ".attn", x, a);
    Var f = ffn_body(b, base + ".ffn", x);
    x = sublayer(b, base + ".ffn", x, f);
    check_finite(x, "encoder layer " + std::to_string(layer) + " output");
  }
  res.h = x;
  return res;
}

TeacherForcedOut forward_teacher_forced(Bound& b, const AugmentedInput& in,
                                        const std::vector<int>& target) {
  if (target.size() > b.cfg().max_tgt_len)
    throw Error(ErrorCategory::Config, "target longer than max_tgt_len");
  EncodeResult enc = encode(b, in);
  std::vector<int> tokens;
  tokens.reserve(target.size() + 1);
  tokens.push_back(Vocabulary::kBos);
  tokens.insert(tokens.end(), target.begin(), target.end());
  DecoderPassOut dp = decoder_pass(b, enc, tokens);

  TeacherForcedOut out;
  out.dec_states = dp.states;
  out.alpha_avg = dp.alpha_avg;
  HeadContext hc = make_head_context(b, enc, in);
  for (std::size_t st = 0; st < tokens.size(); ++st) {
    Var s_t = b.tape->row(dp.states, st);
    Var a_t = b.tape->row(dp.alpha_avg, st);
    out.steps.push_back(heads_for_step(b, enc, in, hc, s_t, a_t, st));
  }
  return out;
}

StepHeads decode_next(Bound& b, const EncodeResult& enc, const AugmentedInput& in,
                      const std::vector<int>& prefix) {
  std::vector<int> tokens;
  tokens.reserve(prefix.size() + 1);
  tokens.push_back(Vocabulary::kBos);
  tokens.insert(tokens.end(), prefix.begin(), prefix.end());
  DecoderPassOut dp = decoder_pass(b, enc, tokens);
  HeadContext hc = make_head_context(b, enc, in);
  std::size_t last = tokens.size() - 1;
  Var s_t = b.tape->row(dp.states, last);
  Var a_t = b.tape->row(dp.alpha_avg, last);
  return heads_for_step(b, enc, in, hc, s_t, a_t, last);
}

}  // namespace dictdis
