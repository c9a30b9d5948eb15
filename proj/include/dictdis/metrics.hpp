#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dictdis {

struct ConstraintEval {
  std::vector<std::vector<std::string>> candidates;
  std::size_t degree() const { return candidates.size(); }
};

struct EvalRecord {
  std::vector<std::string> hypothesis;
  std::vector<std::string> reference;
  std::vector<ConstraintEval> constraints;
};

bool contains_subseq(const std::vector<std::string>& haystack,
                     const std::vector<std::string>& needle);

// Constraint satisfaction. A single-candidate constraint counts as satisfied
// when its candidate shows up contiguously in the hypothesis. A constraint
// with several candidates is judged against the candidates present in the
// reference: it is satisfied when one of those appears in the hypothesis,
// and it leaves the denominator entirely when the reference contains none.
struct CsrBucket {
  std::size_t satisfied = 0;
  std::size_t counted = 0;
  std::size_t excluded = 0;
  double percent() const {
    return counted == 0 ? 0.0
                        : 100.0 * static_cast<double>(satisfied) / static_cast<double>(counted);
  }
};

struct CsrResult {
  CsrBucket overall;
  std::map<std::size_t, CsrBucket> by_degree;
};

CsrResult compute_csr(const std::vector<EvalRecord>& records);

// Corpus BLEU-4, clipped n-gram precisions and brevity penalty. Zero when no
// unigram matches at all; zero-count higher-order precisions fall back to a
// 1e-16 numerator.
struct BleuStats {
  std::array<std::int64_t, 4> match{0, 0, 0, 0};
  std::array<std::int64_t, 4> total{0, 0, 0, 0};
  std::int64_t hyp_len = 0;
  std::int64_t ref_len = 0;

  void add(const BleuStats& o);
};

BleuStats sentence_bleu_stats(const std::vector<std::string>& hyp,
                              const std::vector<std::string>& ref);
double bleu_from_stats(const BleuStats& s);
double corpus_bleu(const std::vector<EvalRecord>& records);

// Paired bootstrap resampling over sentences (1000 draws by default). The
// two-sided p-value treats ties as half a win each.
struct BootstrapResult {
  double p_value = 1.0;
  double mean_delta = 0.0;
  std::size_t resamples = 0;
  bool significant = false;  // p < 0.05
};

BootstrapResult paired_bootstrap_bleu(const std::vector<EvalRecord>& system_a,
                                      const std::vector<EvalRecord>& system_b,
                                      std::size_t resamples, std::uint64_t seed);

struct MetricsReport {
  CsrResult csr;
  double bleu = 0.0;
  std::size_t sentences = 0;
  std::optional<BootstrapResult> bootstrap;

  std::string to_json() const;
};

MetricsReport evaluate_records(const std::vector<EvalRecord>& records);

}  // namespace dictdis
