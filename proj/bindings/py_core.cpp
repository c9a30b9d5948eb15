#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "dictdis/augment.hpp"
#include "dictdis/checkpoint.hpp"
#include "dictdis/cli.hpp"
#include "dictdis/common.hpp"
#include "dictdis/constraints.hpp"
#include "dictdis/data_io.hpp"
#include "dictdis/decode.hpp"
#include "dictdis/dictionary.hpp"
#include "dictdis/metrics.hpp"
#include "dictdis/params.hpp"
#include "dictdis/synthetic.hpp"
#include "dictdis/vocab.hpp"

namespace py = pybind11;
using namespace dictdis;

namespace {

std::string join_tokens(const std::vector<std::string>& toks) {
  std::ostringstream os;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) os << ' ';
    os << toks[i];
  }
  return os.str();
}

Parameters load_params(const std::string& ckpt_path, const Vocabulary& vocab) {
  CheckpointData data = load_checkpoint(ckpt_path);
  Parameters params(data.config);
  restore_parameters(data, params, vocab.fingerprint());
  return params;
}

// Checkpoint + vocabulary + optional dictionary, ready to translate lines.
// Mirrors the translate subcommand: encode, truncate to the position budget,
// match constraints, decode greedily for beam 1 and by beam search otherwise.
class Translator {
 public:
  Translator(const std::string& ckpt_path, const std::string& vocab_path,
             const std::string& dict_path, std::size_t max_constraints)
      : vocab_(Vocabulary::deserialize(read_file(vocab_path))),
        params_(load_params(ckpt_path, vocab_)),
        max_constraints_(max_constraints) {
    if (!dict_path.empty()) {
      Dictionary dict = load_dictionary(read_file(dict_path));
      id_dict_ = IdDictionary::from(dict, vocab_);
    }
  }

  py::dict translate(const std::string& line, std::size_t beam_size, double alpha,
                     std::size_t max_len, bool constrained, double length_penalty) const {
    const ModelConfig& mc = params_.config();
    std::vector<int> ids = vocab_.encode(tokenize(line));
    if (ids.empty()) ids.push_back(Vocabulary::kUnk);
    std::size_t cap = std::min<std::size_t>(mc.p_offset, mc.max_aug_len - 1);
    bool truncated = ids.size() > cap;
    if (truncated) ids.resize(cap);

    std::vector<ConstraintMatch> matches;
    if (constrained && !id_dict_.entries.empty())
      matches = match_constraints(ids, id_dict_, max_constraints_);
    AugmentedInput in =
        build_augmented_input(ids, matches, static_cast<int>(mc.p_offset),
                              static_cast<int>(mc.max_segments), mc.max_aug_len);

    DecodeConfig cfg;
    cfg.beam_size = beam_size;
    cfg.max_len = max_len == 0 ? mc.max_tgt_len : std::min(max_len, mc.max_tgt_len);
    cfg.alpha = alpha;
    cfg.length_penalty = length_penalty;
    cfg.validate();
    DecodeResult res = cfg.beam_size <= 1 ? greedy_decode(params_, in, cfg)
                                          : beam_decode(params_, in, cfg);

    py::dict out;
    out["text"] = join_tokens(vocab_.decode(res.tokens));
    out["tokens"] = vocab_.decode(res.tokens);
    out["token_ids"] = res.tokens;
    out["score"] = res.score;
    out["reached_eos"] = res.reached_eos;
    out["constraints_matched"] = in.n_constraints();
    out["source_truncated"] = truncated;
    return out;
  }

  int vocab_size() const { return vocab_.size(); }
  std::size_t dict_size() const { return id_dict_.entries.size(); }

 private:
  Vocabulary vocab_;
  Parameters params_;
  IdDictionary id_dict_;
  std::size_t max_constraints_;
};

EvalRecord make_record(const std::vector<std::string>& hyp,
                       const std::vector<std::string>& ref,
                       const std::vector<std::vector<std::vector<std::string>>>& constraints) {
  EvalRecord r;
  r.hypothesis = hyp;
  r.reference = ref;
  for (const auto& cands : constraints) r.constraints.push_back(ConstraintEval{cands});
  return r;
}

py::dict bucket_dict(const CsrBucket& b) {
  py::dict d;
  d["satisfied"] = b.satisfied;
  d["counted"] = b.counted;
  d["excluded"] = b.excluded;
  d["percent"] = b.percent();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "constrained translation core";

  py::register_exception<Error>(m, "DictdisError");

  py::class_<Vocabulary>(m, "Vocabulary")
      .def(py::init<std::vector<std::string>>(), py::arg("tokens"))
      .def_readonly_static("PAD", &Vocabulary::kPad)
      .def_readonly_static("UNK", &Vocabulary::kUnk)
      .def_readonly_static("BOS", &Vocabulary::kBos)
      .def_readonly_static("EOS", &Vocabulary::kEos)
      .def_readonly_static("SEP", &Vocabulary::kSep)
      .def_readonly_static("ISEP", &Vocabulary::kIsep)
      .def("__len__", &Vocabulary::size)
      .def("token", &Vocabulary::token, py::arg("id"))
      .def("id", &Vocabulary::id, py::arg("token"))
      .def("__contains__", &Vocabulary::contains)
      .def("encode", &Vocabulary::encode, py::arg("tokens"))
      .def("decode", &Vocabulary::decode, py::arg("ids"))
      .def("tokens", &Vocabulary::tokens)
      .def("fingerprint", &Vocabulary::fingerprint)
      .def("serialize", &Vocabulary::serialize)
      .def_static("deserialize", &Vocabulary::deserialize, py::arg("text"));

  m.def("build_vocabulary", &build_vocabulary, py::arg("corpus"), py::arg("min_freq"));
  m.def("tokenize", &tokenize, py::arg("line"));

  py::class_<DictEntry>(m, "DictEntry")
      .def_readonly("source", &DictEntry::source)
      .def_readonly("candidates", &DictEntry::candidates)
      .def("degree", &DictEntry::degree);

  py::class_<Dictionary>(m, "Dictionary")
      .def_readonly("entries", &Dictionary::entries)
      .def("__len__", &Dictionary::size);

  m.def("load_dictionary", &load_dictionary, py::arg("text"));

  py::class_<IdDictionary>(m, "IdDictionary")
      .def_static("from_dictionary", &IdDictionary::from, py::arg("dictionary"),
                  py::arg("vocab"))
      .def_readonly("dropped_oov", &IdDictionary::dropped_oov)
      .def("__len__", [](const IdDictionary& d) { return d.entries.size(); });

  m.def(
      "dictionary_stats",
      [](const Dictionary& dict, const std::vector<std::vector<std::string>>& corpus) {
        DictionaryStats s = dictionary_stats(dict, corpus);
        py::dict d;
        py::dict hist;
        for (const auto& [deg, pct] : s.polysemy_histogram)
          hist[py::int_(deg)] = pct;
        d["polysemy_histogram"] = hist;
        d["coverage_percent"] = s.coverage_percent;
        d["total_entries"] = s.total_entries;
        d["sentences"] = s.sentences;
        d["sentences_with_match"] = s.sentences_with_match;
        return d;
      },
      py::arg("dictionary"), py::arg("corpus"));

  py::class_<ConstraintMatch>(m, "ConstraintMatch")
      .def_readonly("start", &ConstraintMatch::start)
      .def_readonly("end", &ConstraintMatch::end)
      .def_readonly("candidates", &ConstraintMatch::candidates)
      .def("degree", &ConstraintMatch::degree);

  m.def("match_constraints", &match_constraints, py::arg("source"), py::arg("id_dict"),
        py::arg("max_constraints"));

  py::class_<AugmentedInput>(m, "AugmentedInput")
      .def_readonly("token_ids", &AugmentedInput::token_ids)
      .def_readonly("position_ids", &AugmentedInput::position_ids)
      .def_readonly("segment_ids", &AugmentedInput::segment_ids)
      .def_readonly("source_len", &AugmentedInput::source_len)
      .def_readonly("degrees", &AugmentedInput::degrees)
      .def_readonly("dropped_constraints", &AugmentedInput::dropped_constraints)
      .def("__len__", &AugmentedInput::size)
      .def("n_constraints", &AugmentedInput::n_constraints)
      .def("has_constraints", &AugmentedInput::has_constraints);

  m.def("build_augmented_input", &build_augmented_input, py::arg("source"),
        py::arg("matches"), py::arg("p_offset"), py::arg("max_segments"),
        py::arg("max_aug_len"));

  m.def(
      "parse_augmented",
      [](const std::vector<int>& token_ids) {
        ParsedAugmented p = parse_augmented(token_ids);
        return py::make_tuple(p.source, p.constraints);
      },
      py::arg("token_ids"));

  py::class_<EvalRecord>(m, "EvalRecord")
      .def(py::init(&make_record), py::arg("hypothesis"), py::arg("reference"),
           py::arg("constraints") = std::vector<std::vector<std::vector<std::string>>>{})
      .def_readonly("hypothesis", &EvalRecord::hypothesis)
      .def_readonly("reference", &EvalRecord::reference);

  m.def(
      "compute_csr",
      [](const std::vector<EvalRecord>& records) {
        CsrResult r = compute_csr(records);
        py::dict d;
        d["overall"] = bucket_dict(r.overall);
        py::dict by_degree;
        for (const auto& [deg, b] : r.by_degree) by_degree[py::int_(deg)] = bucket_dict(b);
        d["by_degree"] = by_degree;
        return d;
      },
      py::arg("records"));

  m.def("corpus_bleu", &corpus_bleu, py::arg("records"));

  m.def(
      "paired_bootstrap_bleu",
      [](const std::vector<EvalRecord>& a, const std::vector<EvalRecord>& b,
         std::size_t resamples, std::uint64_t seed) {
        BootstrapResult r = paired_bootstrap_bleu(a, b, resamples, seed);
        py::dict d;
        d["p_value"] = r.p_value;
        d["mean_delta"] = r.mean_delta;
        d["resamples"] = r.resamples;
        d["significant"] = r.significant;
        return d;
      },
      py::arg("system_a"), py::arg("system_b"), py::arg("resamples") = 1000,
      py::arg("seed") = 1);

  m.def(
      "evaluate_records",
      [](const std::vector<EvalRecord>& records) {
        return evaluate_records(records).to_json();
      },
      py::arg("records"));

  py::class_<SyntheticData>(m, "SyntheticData")
      .def_readonly("train_src", &SyntheticData::train_src)
      .def_readonly("train_tgt", &SyntheticData::train_tgt)
      .def_readonly("dev_src", &SyntheticData::dev_src)
      .def_readonly("dev_tgt", &SyntheticData::dev_tgt)
      .def_readonly("test_src", &SyntheticData::test_src)
      .def_readonly("test_tgt", &SyntheticData::test_tgt)
      .def_readonly("dict_tsv", &SyntheticData::dict_tsv);

  m.def("make_synthetic", &make_synthetic, py::arg("kind"), py::arg("train_n"),
        py::arg("dev_n"), py::arg("test_n"), py::arg("seed"));

  py::class_<Translator>(m, "Translator")
      .def(py::init<const std::string&, const std::string&, const std::string&,
                    std::size_t>(),
           py::arg("checkpoint"), py::arg("vocab"), py::arg("dictionary") = "",
           py::arg("max_constraints") = 8)
      .def("translate", &Translator::translate, py::arg("line"), py::arg("beam_size") = 5,
           py::arg("alpha") = 0.0, py::arg("max_len") = 0, py::arg("constrained") = true,
           py::arg("length_penalty") = 0.0)
      .def("vocab_size", &Translator::vocab_size)
      .def("dict_size", &Translator::dict_size);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) { return cli::run(args); },
      py::arg("args"), "Run a CLI subcommand in process; returns the exit code.");
}
