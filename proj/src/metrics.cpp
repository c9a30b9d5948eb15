#include "dictdis/metrics.hpp"

#include <cmath>
#include <random>

#include <json.hpp>

#include "dictdis/common.hpp"

namespace dictdis {

using nlohmann::json;

bool contains_subseq(const std::vector<std::string>& haystack,
                     const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  for (std::size_t start = 0; start + needle.size() <= haystack.size(); ++start) {
    bool all = true;
    for (std::size_t i = 0; i < needle.size(); ++i) {
      if (haystack[start + i] != needle[i]) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

CsrResult compute_csr(const std::vector<EvalRecord>& records) {
  CsrResult res;
  for (const EvalRecord& rec : records) {
    for (const ConstraintEval& c : rec.constraints) {
      if (c.degree() == 0) throw Error(ErrorCategory::State, "constraint with no candidates");
      CsrBucket& bucket = res.by_degree[c.degree()];
      if (c.degree() == 1) {
        bucket.counted += 1;
        res.overall.counted += 1;
        if (contains_subseq(rec.hypothesis, c.candidates[0])) {
          bucket.satisfied += 1;
          res.overall.satisfied += 1;
        }
        continue;
      }
      std::vector<const std::vector<std::string>*> in_ref;
      for (const auto& cand : c.candidates) {
        if (contains_subseq(rec.reference, cand)) in_ref.push_back(&cand);
      }
      if (in_ref.empty()) {
        bucket.excluded += 1;
        res.overall.excluded += 1;
        continue;
      }
      bucket.counted += 1;
      res.overall.counted += 1;
      for (const auto* cand : in_ref) {
        if (contains_subseq(rec.hypothesis, *cand)) {
          bucket.satisfied += 1;
          res.overall.satisfied += 1;
          break;
        }
      }
    }
  }
  return res;
}

void BleuStats::add(const BleuStats& o) {
  for (std::size_t n = 0; n < 4; ++n) {
    match[n] += o.match[n];
    total[n] += o.total[n];
  }
  hyp_len += o.hyp_len;
  ref_len += o.ref_len;
}

namespace {

std::map<std::vector<std::string>, std::int64_t> ngram_counts(
    const std::vector<std::string>& toks, std::size_t n) {
  std::map<std::vector<std::string>, std::int64_t> counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i)
    counts[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                    toks.begin() + static_cast<std::ptrdiff_t>(i + n))] += 1;
  return counts;
}

}  // namespace

BleuStats sentence_bleu_stats(const std::vector<std::string>& hyp,
                              const std::vector<std::string>& ref) {
  BleuStats s;
  s.hyp_len = static_cast<std::int64_t>(hyp.size());
  s.ref_len = static_cast<std::int64_t>(ref.size());
  for (std::size_t n = 1; n <= 4; ++n) {
    auto hc = ngram_counts(hyp, n);
    auto rc = ngram_counts(ref, n);
    for (const auto& [gram, count] : hc) {
      s.total[n - 1] += count;
      auto it = rc.find(gram);
      if (it != rc.end()) s.match[n - 1] += std::min(count, it->second);
    }
  }
  return s;
}

double bleu_from_stats(const BleuStats& s) {
  if (s.hyp_len == 0 || s.match[0] == 0) return 0.0;
  double logsum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    double num = s.match[n] > 0 ? static_cast<double>(s.match[n]) : 1e-16;
    double den = s.total[n] > 0 ? static_cast<double>(s.total[n]) : 1.0;
    logsum += std::log(num / den);
  }
  double bp = 1.0;
  if (s.hyp_len < s.ref_len)
    bp = std::exp(1.0 - static_cast<double>(s.ref_len) / static_cast<double>(s.hyp_len));
  return 100.0 * bp * std::exp(logsum / 4.0);
}

double corpus_bleu(const std::vector<EvalRecord>& records) {
  BleuStats total;
  for (const EvalRecord& rec : records)
    total.add(sentence_bleu_stats(rec.hypothesis, rec.reference));
  return bleu_from_stats(total);
}

BootstrapResult paired_bootstrap_bleu(const std::vector<EvalRecord>& system_a,
                                      const std::vector<EvalRecord>& system_b,
                                      std::size_t resamples, std::uint64_t seed) {
  if (system_a.size() != system_b.size() || system_a.empty())
    throw Error(ErrorCategory::State, "bootstrap needs two same-size nonempty systems");
  if (resamples == 0) throw Error(ErrorCategory::State, "bootstrap needs resamples");
  const std::size_t n = system_a.size();
  std::vector<BleuStats> stats_a(n), stats_b(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (system_a[i].reference != system_b[i].reference)
      throw Error(ErrorCategory::State, "bootstrap systems must share references");
    stats_a[i] = sentence_bleu_stats(system_a[i].hypothesis, system_a[i].reference);
    stats_b[i] = sentence_bleu_stats(system_b[i].hypothesis, system_b[i].reference);
  }

  std::mt19937_64 rng(derived_seed(seed, 0xB0075));
  std::size_t wins_a = 0, wins_b = 0, ties = 0;
  double delta_sum = 0.0;
  for (std::size_t r = 0; r < resamples; ++r) {
    BleuStats agg_a, agg_b;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t idx = rng_index(rng, n);
      agg_a.add(stats_a[idx]);
      agg_b.add(stats_b[idx]);
    }
    double delta = bleu_from_stats(agg_a) - bleu_from_stats(agg_b);
    delta_sum += delta;
    if (delta > 0.0)
      ++wins_a;
    else if (delta < 0.0)
      ++wins_b;
    else
      ++ties;
  }
  double w = (static_cast<double>(wins_a) + 0.5 * static_cast<double>(ties)) /
             static_cast<double>(resamples);
  BootstrapResult res;
  res.p_value = 2.0 * std::min(w, 1.0 - w);
  if (res.p_value > 1.0) res.p_value = 1.0;
  res.mean_delta = delta_sum / static_cast<double>(resamples);
  res.resamples = resamples;
  res.significant = res.p_value < 0.05;
  return res;
}

std::string MetricsReport::to_json() const {
  json j;
  j["csr"] = csr.overall.percent();
  json by_degree = json::object();
  for (const auto& [deg, bucket] : csr.by_degree) {
    json b;
    b["csr"] = bucket.percent();
    b["satisfied"] = bucket.satisfied;
    b["counted"] = bucket.counted;
    b["excluded"] = bucket.excluded;
    by_degree[std::to_string(deg)] = b;
  }
  j["csr_by_degree"] = by_degree;
  j["csr_counts"] = {{"satisfied", csr.overall.satisfied},
                     {"counted", csr.overall.counted},
                     {"excluded", csr.overall.excluded}};
  j["bleu"] = bleu;
  j["sentences"] = sentences;
  if (bootstrap) {
    j["bootstrap"] = {{"p_value", bootstrap->p_value},
                      {"mean_delta", bootstrap->mean_delta},
                      {"resamples", bootstrap->resamples},
                      {"significant", bootstrap->significant}};
  }
  return j.dump(2);
}

MetricsReport evaluate_records(const std::vector<EvalRecord>& records) {
  MetricsReport rep;
  rep.csr = compute_csr(records);
  rep.bleu = corpus_bleu(records);
  rep.sentences = records.size();
  return rep;
}

}  // namespace dictdis
