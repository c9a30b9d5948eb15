#include "dictdis/decode.hpp"

#include <algorithm>
#include <cmath>

#include "dictdis/common.hpp"

namespace dictdis {

namespace {

constexpr double kLogFloor = 1e-300;

std::vector<std::uint8_t> sole_candidate_positions(const AugmentedInput& in) {
  std::vector<std::uint8_t> keep(in.size(), 0);
  for (std::size_t p = 0; p < in.size(); ++p) {
    if (in.region[p] != Region::Constraint) continue;
    int ci = in.cand_index[p].first;
    if (ci >= 0 && in.degrees[static_cast<std::size_t>(ci)] == 1) keep[p] = 1;
  }
  return keep;
}

struct Hyp {
  std::vector<int> tokens;
  double score = 0.0;
  bool done = false;
  std::vector<StepTrace> trace;
};

bool hyp_better(const Hyp& a, const Hyp& b, double penalty) {
  auto ranked = [penalty](const Hyp& h) {
    double len = static_cast<double>(std::max<std::size_t>(h.tokens.size(), 1));
    return penalty == 0.0 ? h.score : h.score / std::pow(len, penalty);
  };
  double ra = ranked(a);
  double rb = ranked(b);
  if (ra != rb) return ra > rb;
  return a.tokens < b.tokens;
}

DecodeResult to_result(Hyp h, bool want_trace) {
  DecodeResult res;
  res.score = h.score;
  res.reached_eos = !h.tokens.empty() && h.tokens.back() == Vocabulary::kEos;
  res.tokens = std::move(h.tokens);
  if (res.reached_eos) res.tokens.pop_back();
  if (want_trace) res.trace = std::move(h.trace);
  return res;
}

}  // namespace

void DecodeConfig::validate() const {
  if (beam_size == 0) throw Error(ErrorCategory::Config, "beam_size must be positive");
  if (max_len == 0) throw Error(ErrorCategory::Config, "max_len must be positive");
  if (alpha < 0.0) throw Error(ErrorCategory::Config, "alpha must be nonnegative");
  if (length_penalty < 0.0)
    throw Error(ErrorCategory::Config, "length_penalty must be nonnegative");
}

void alpha_boost(Tensor& p, const Tensor& attn, const AugmentedInput& in, double alpha) {
  if (alpha == 0.0 || !in.has_constraints()) return;
  if (attn.numel() != in.size())
    throw Error(ErrorCategory::State, "alpha_boost: attention length mismatch");
  std::vector<std::uint8_t> keep = sole_candidate_positions(in);
  std::vector<double> mass(p.numel(), 0.0);
  bool any = false;
  for (std::size_t q = 0; q < in.size(); ++q) {
    if (!keep[q]) continue;
    int tok = in.token_ids[q];
    if (tok < 0 || static_cast<std::size_t>(tok) >= p.numel())
      throw Error(ErrorCategory::State, "alpha_boost: token id outside distribution");
    mass[static_cast<std::size_t>(tok)] += attn.v[q];
    any = true;
  }
  if (!any) return;
  double z = 0.0;
  for (std::size_t v = 0; v < p.numel(); ++v) {
    if (mass[v] > 0.0) p.v[v] *= std::exp(alpha * mass[v]);
    z += p.v[v];
  }
  if (z <= 0.0) throw Error(ErrorCategory::Numeric, "alpha_boost: zero mass");
  for (double& x : p.v) x /= z;
}

DecodeResult greedy_decode(const Parameters& params, const AugmentedInput& in,
                           const DecodeConfig& cfg, bool want_trace) {
  cfg.validate();
  Tape tape;
  Bound b = bind(tape, params, false);
  EncodeResult enc = encode(b, in);

  Hyp hyp;
  for (std::size_t step = 0; step < cfg.max_len; ++step) {
    StepHeads heads = decode_next(b, enc, in, hyp.tokens);
    Tensor p = heads.p_final.val();
    alpha_boost(p, heads.alpha.val(), in, cfg.alpha);
    std::size_t best = 0;
    for (std::size_t v = 1; v < p.numel(); ++v) {
      if (p.v[v] > p.v[best]) best = v;
    }
    double lp = std::log(std::max(p.v[best], kLogFloor));
    hyp.tokens.push_back(static_cast<int>(best));
    hyp.score += lp;
    if (want_trace) {
      StepTrace tr;
      tr.token = static_cast<int>(best);
      tr.logp = lp;
      if (heads.g_t.valid()) tr.gate = heads.g_t.val().v[0];
      hyp.trace.push_back(tr);
    }
    if (static_cast<int>(best) == Vocabulary::kEos) break;
  }
  return to_result(std::move(hyp), want_trace);
}

DecodeResult beam_decode(const Parameters& params, const AugmentedInput& in,
                         const DecodeConfig& cfg, bool want_trace) {
  cfg.validate();
  if (cfg.beam_size == 1) return greedy_decode(params, in, cfg, want_trace);
  Tape tape;
  Bound b = bind(tape, params, false);
  EncodeResult enc = encode(b, in);

  std::vector<Hyp> live(1);
  std::vector<Hyp> finished;

  for (std::size_t step = 0; step < cfg.max_len && !live.empty(); ++step) {
    std::vector<Hyp> candidates;
    for (const Hyp& hyp : live) {
      StepHeads heads = decode_next(b, enc, in, hyp.tokens);
      Tensor p = heads.p_final.val();
      alpha_boost(p, heads.alpha.val(), in, cfg.alpha);
      double gate = heads.g_t.valid() ? heads.g_t.val().v[0] : -1.0;
      for (std::size_t v = 0; v < p.numel(); ++v) {
        Hyp next = hyp;
        double lp = std::log(std::max(p.v[v], kLogFloor));
        next.tokens.push_back(static_cast<int>(v));
        next.score += lp;
        next.done = static_cast<int>(v) == Vocabulary::kEos;
        if (want_trace) {
          StepTrace tr;
          tr.token = static_cast<int>(v);
          tr.logp = lp;
          tr.gate = gate;
          next.trace.push_back(tr);
        }
        candidates.push_back(std::move(next));
      }
    }
    // Total order: raw score, then token sequence. The final ranking applies
    // the length penalty; expansion keeps the plain sum.
    std::sort(candidates.begin(), candidates.end(), [](const Hyp& a, const Hyp& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.tokens < b.tokens;
    });
    if (candidates.size() > cfg.beam_size) candidates.resize(cfg.beam_size);
    live.clear();
    for (Hyp& c : candidates) {
      if (c.done)
        finished.push_back(std::move(c));
      else
        live.push_back(std::move(c));
    }
    if (finished.size() >= cfg.beam_size) break;
  }
  for (Hyp& h : live) finished.push_back(std::move(h));
  if (finished.empty()) throw Error(ErrorCategory::State, "beam search produced nothing");
  std::sort(finished.begin(), finished.end(), [&cfg](const Hyp& a, const Hyp& b) {
    return hyp_better(a, b, cfg.length_penalty);
  });
  return to_result(std::move(finished.front()), want_trace);
}

}  // namespace dictdis
