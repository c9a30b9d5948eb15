#include "dictdis/synthetic.hpp"

#include <random>
#include <sstream>

#include "dictdis/common.hpp"

namespace dictdis {

namespace {

std::string numbered(const std::string& stem, std::size_t i) {
  std::string n = std::to_string(i);
  if (n.size() < 2) n = "0" + n;
  return stem + n;
}

std::string join(const std::vector<std::string>& toks) {
  std::ostringstream os;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) os << ' ';
    os << toks[i];
  }
  return os.str();
}

struct CopyTask {
  std::vector<std::string> src_words, tgt_words, fillers;

  CopyTask() {
    for (std::size_t i = 0; i < 40; ++i) {
      src_words.push_back(numbered("s", i));
      tgt_words.push_back(numbered("t", i));
    }
    for (std::size_t i = 0; i < 60; ++i) fillers.push_back(numbered("f", i));
  }

  void sentence(std::mt19937_64& rng, std::vector<std::string>& src,
                std::vector<std::string>& tgt) const {
    std::size_t len = 4 + rng_index(rng, 5);
    src.clear();
    tgt.clear();
    for (std::size_t i = 0; i < len; ++i) {
      if (rng_uniform(rng) < 0.45) {
        std::size_t w = rng_index(rng, src_words.size());
        src.push_back(src_words[w]);
        tgt.push_back(tgt_words[w]);
      } else {
        std::size_t w = rng_index(rng, fillers.size());
        src.push_back(fillers[w]);
        tgt.push_back(fillers[w]);
      }
    }
  }

  std::string dict() const {
    std::ostringstream os;
    os << "# copy task: one translation per source word\n";
    for (std::size_t i = 0; i < src_words.size(); ++i)
      os << src_words[i] << '\t' << tgt_words[i] << '\n';
    return os.str();
  }
};

struct DisambigTask {
  std::vector<std::string> amb, left, right, fillers;
  std::string marker_left = "mkl";
  std::string marker_right = "mkr";

  DisambigTask() {
    for (std::size_t i = 0; i < 20; ++i) {
      amb.push_back(numbered("amb", i));
      left.push_back(numbered("u", i));
      right.push_back(numbered("v", i));
    }
    for (std::size_t i = 0; i < 16; ++i) fillers.push_back(numbered("f", i));
  }

  // marked_count alternates the marker for an exact half/half split.
  void sentence(std::mt19937_64& rng, std::size_t& marked_count,
                std::vector<std::string>& src, std::vector<std::string>& tgt) const {
    src.clear();
    tgt.clear();
    if (rng_uniform(rng) < 0.2) {
      std::size_t len = 3 + rng_index(rng, 5);
      for (std::size_t i = 0; i < len; ++i)
        src.push_back(fillers[rng_index(rng, fillers.size())]);
      tgt = src;
    } else {
      bool use_left = (marked_count % 2) == 0;
      ++marked_count;
      std::size_t n_amb = 1 + rng_index(rng, 2);
      std::size_t n_fill = 1 + rng_index(rng, 3);
      std::vector<std::size_t> picks;
      while (picks.size() < n_amb) {
        std::size_t w = rng_index(rng, amb.size());
        bool dup = false;
        for (std::size_t p : picks) dup = dup || p == w;
        if (!dup) picks.push_back(w);
      }
      std::vector<std::pair<std::string, std::string>> items;
      items.emplace_back(use_left ? marker_left : marker_right,
                         use_left ? marker_left : marker_right);
      for (std::size_t w : picks)
        items.emplace_back(amb[w], use_left ? left[w] : right[w]);
      for (std::size_t i = 0; i < n_fill; ++i) {
        const std::string& f = fillers[rng_index(rng, fillers.size())];
        items.emplace_back(f, f);
      }
      rng_shuffle(items, rng);
      for (const auto& [s, t] : items) {
        src.push_back(s);
        tgt.push_back(t);
      }
    }
    // Unpredictable tail: keeps the best reachable loss away from zero on
    // constrained and unconstrained inputs alike.
    tgt.push_back(fillers[rng_index(rng, fillers.size())]);
    tgt.push_back(fillers[rng_index(rng, fillers.size())]);
  }

  std::string dict() const {
    std::ostringstream os;
    os << "# disambiguation task: two candidates per ambiguous word\n";
    for (std::size_t i = 0; i < amb.size(); ++i)
      os << amb[i] << '\t' << left[i] << '|' << right[i] << '\n';
    return os.str();
  }
};

template <typename Task>
void fill_split(const Task& task, std::uint64_t seed, std::size_t n,
                std::vector<std::string>& src_out, std::vector<std::string>& tgt_out) {
  std::mt19937_64 rng(seed);
  std::size_t marked_count = 0;
  std::vector<std::string> src, tgt;
  for (std::size_t i = 0; i < n; ++i) {
    if constexpr (std::is_same_v<Task, DisambigTask>) {
      task.sentence(rng, marked_count, src, tgt);
    } else {
      task.sentence(rng, src, tgt);
    }
    src_out.push_back(join(src));
    tgt_out.push_back(join(tgt));
  }
}

template <typename Task>
SyntheticData generate(const Task& task, std::size_t train_n, std::size_t dev_n,
                       std::size_t test_n, std::uint64_t seed) {
  SyntheticData data;
  fill_split(task, derived_seed(seed, 1), train_n, data.train_src, data.train_tgt);
  fill_split(task, derived_seed(seed, 2), dev_n, data.dev_src, data.dev_tgt);
  fill_split(task, derived_seed(seed, 3), test_n, data.test_src, data.test_tgt);
  data.dict_tsv = task.dict();
  return data;
}

}  // namespace

SyntheticData make_synthetic(const std::string& kind, std::size_t train_n,
                             std::size_t dev_n, std::size_t test_n, std::uint64_t seed) {
  if (train_n == 0 || dev_n == 0 || test_n == 0)
    throw Error(ErrorCategory::Usage, "synthetic splits must be nonempty");
  if (kind == "copy") return generate(CopyTask{}, train_n, dev_n, test_n, seed);
  if (kind == "disambig") return generate(DisambigTask{}, train_n, dev_n, test_n, seed);
  throw Error(ErrorCategory::Usage, "unknown synthetic task: " + kind +
                                        " (expected copy or disambig)");
}

}  // namespace dictdis
