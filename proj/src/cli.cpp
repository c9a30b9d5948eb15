#include "dictdis/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "dictdis/checkpoint.hpp"
#include "dictdis/common.hpp"
#include "dictdis/data_io.hpp"
#include "dictdis/decode.hpp"
#include "dictdis/dictionary.hpp"
#include "dictdis/metrics.hpp"
#include "dictdis/synthetic.hpp"
#include "dictdis/train.hpp"

namespace dictdis::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DecodeConfig decode;
  std::size_t min_freq = 1;
  std::size_t max_constraints = 8;
};

json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::Format, what + ": " + e.what());
  }
}

template <typename T>
T json_get(const json& j, const char* key, T fallback, const std::string& what) {
  try {
    return j.value(key, fallback);
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::Config, what + "." + key + ": " + e.what());
  }
}

RunConfig load_run_config(const std::string& path) {
  RunConfig rc;
  if (path.empty()) return rc;
  json j = parse_json_text(read_file(path), "config " + path);
  if (!j.is_object()) throw Error(ErrorCategory::Config, "config must be a JSON object");
  if (j.contains("model")) rc.model = ModelConfig::from_json(j["model"].dump());
  if (j.contains("train")) {
    const json& t = j["train"];
    rc.train.lr_peak = json_get(t, "lr_peak", rc.train.lr_peak, "train");
    rc.train.warmup_steps = json_get(t, "warmup_steps", rc.train.warmup_steps, "train");
    rc.train.label_smoothing =
        json_get(t, "label_smoothing", rc.train.label_smoothing, "train");
    rc.train.beta1 = json_get(t, "beta1", rc.train.beta1, "train");
    rc.train.beta2 = json_get(t, "beta2", rc.train.beta2, "train");
    rc.train.adam_eps = json_get(t, "adam_eps", rc.train.adam_eps, "train");
    rc.train.clip_norm = json_get(t, "clip_norm", rc.train.clip_norm, "train");
    rc.train.batch_size = json_get(t, "batch_size", rc.train.batch_size, "train");
    rc.train.max_updates = json_get(t, "max_updates", rc.train.max_updates, "train");
    rc.train.threads = json_get(t, "threads", rc.train.threads, "train");
    rc.train.seed = json_get(t, "seed", rc.train.seed, "train");
    rc.train.checkpoint_every =
        json_get(t, "checkpoint_every", rc.train.checkpoint_every, "train");
    rc.train.log_every = json_get(t, "log_every", rc.train.log_every, "train");
  }
  if (j.contains("decode")) {
    const json& d = j["decode"];
    rc.decode.beam_size = json_get(d, "beam_size", rc.decode.beam_size, "decode");
    rc.decode.max_len = json_get(d, "max_len", rc.decode.max_len, "decode");
    rc.decode.alpha = json_get(d, "alpha", rc.decode.alpha, "decode");
    rc.decode.length_penalty =
        json_get(d, "length_penalty", rc.decode.length_penalty, "decode");
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    rc.min_freq = json_get(d, "min_freq", rc.min_freq, "data");
    rc.max_constraints = json_get(d, "max_constraints", rc.max_constraints, "data");
  }
  return rc;
}

std::string join_tokens(const std::vector<std::string>& toks) {
  std::ostringstream os;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) os << ' ';
    os << toks[i];
  }
  return os.str();
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::ostringstream os;
  for (const std::string& l : lines) os << l << '\n';
  return os.str();
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCategory::Io, "cannot create directory " + dir);
}

Vocabulary load_vocab_file(const std::string& path) {
  return Vocabulary::deserialize(read_file(path));
}

// ---------------------------------------------------------------- prepare

struct PreparedCorpus {
  std::vector<Example> examples;
  std::size_t skipped_length = 0;
  std::size_t skipped_empty = 0;
  std::size_t constraints_total = 0;
  std::size_t constraint_tokens_dropped = 0;
  std::size_t sentences_with_constraints = 0;
};

PreparedCorpus encode_corpus(const std::vector<std::vector<std::string>>& src,
                             const std::vector<std::vector<std::string>>& tgt,
                             const Vocabulary& vocab, const IdDictionary& id_dict,
                             const RunConfig& rc) {
  if (src.size() != tgt.size())
    throw Error(ErrorCategory::Format,
                "source and target line counts differ: " + std::to_string(src.size()) +
                    " vs " + std::to_string(tgt.size()));
  PreparedCorpus out;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].empty() || tgt[i].empty()) {
      ++out.skipped_empty;
      continue;
    }
    if (src[i].size() > rc.model.p_offset || tgt[i].size() > rc.model.max_tgt_len ||
        src[i].size() + 1 > rc.model.max_aug_len) {
      ++out.skipped_length;
      continue;
    }
    Example ex;
    ex.source = vocab.encode(src[i]);
    ex.target = vocab.encode(tgt[i]);
    ex.constraints = match_constraints(ex.source, id_dict, rc.max_constraints);
    // The augmented form must fit; count what the length cap throws away.
    AugmentedInput in = build_augmented_input(ex.source, ex.constraints,
                                              static_cast<int>(rc.model.p_offset),
                                              static_cast<int>(rc.model.max_segments),
                                              rc.model.max_aug_len);
    if (in.dropped_constraints > 0) {
      out.constraint_tokens_dropped += in.dropped_constraints;
      ex.constraints.resize(ex.constraints.size() - in.dropped_constraints);
    }
    out.constraints_total += ex.constraints.size();
    if (!ex.constraints.empty()) ++out.sentences_with_constraints;
    out.examples.push_back(std::move(ex));
  }
  if (out.examples.empty())
    throw Error(ErrorCategory::Format, "no usable sentence pairs after filtering");
  return out;
}

Vocabulary build_vocab_with_dict(const std::vector<std::vector<std::string>>& corpus,
                                 const Dictionary& dict, std::size_t min_freq) {
  Vocabulary base = build_vocabulary(corpus, min_freq);
  std::vector<std::string> tokens = base.tokens();
  auto add_missing = [&](const std::vector<std::string>& phrase) {
    for (const std::string& tok : phrase) {
      if (Vocabulary::is_special_surface(tok)) continue;
      if (base.contains(tok)) continue;
      if (std::find(tokens.begin() + Vocabulary::kNumSpecials, tokens.end(), tok) !=
          tokens.end())
        continue;
      tokens.push_back(tok);
    }
  };
  for (const DictEntry& e : dict.entries) {
    add_missing(e.source);
    for (const auto& cand : e.candidates) add_missing(cand);
  }
  return Vocabulary(std::move(tokens));
}

int cmd_prepare(const std::string& config_path, const std::string& src_path,
                const std::string& tgt_path, const std::string& dict_path,
                const std::string& dev_src_path, const std::string& dev_tgt_path,
                const std::string& vocab_path, const std::string& out_dir,
                std::size_t min_freq_flag, bool min_freq_set) {
  RunConfig rc = load_run_config(config_path);
  if (min_freq_set) rc.min_freq = min_freq_flag;
  ensure_out_dir(out_dir);

  auto src = read_token_lines(src_path);
  auto tgt = read_token_lines(tgt_path);
  Dictionary dict = load_dictionary(read_file(dict_path));

  Vocabulary vocab;
  if (!vocab_path.empty()) {
    vocab = load_vocab_file(vocab_path);
  } else {
    std::vector<std::vector<std::string>> corpus = src;
    corpus.insert(corpus.end(), tgt.begin(), tgt.end());
    vocab = build_vocab_with_dict(corpus, dict, rc.min_freq);
  }
  IdDictionary id_dict = IdDictionary::from(dict, vocab);

  PreparedCorpus train = encode_corpus(src, tgt, vocab, id_dict, rc);
  write_file(out_dir + "/vocab.txt", vocab.serialize());
  write_file(out_dir + "/train.jsonl", examples_to_jsonl(train.examples));

  json stats;
  stats["sentences"] = train.examples.size();
  stats["skipped_empty"] = train.skipped_empty;
  stats["skipped_length"] = train.skipped_length;
  stats["vocab_size"] = vocab.size();
  stats["vocab_fingerprint"] = to_hex(vocab.fingerprint());
  stats["dict_entries"] = dict.size();
  stats["dict_entries_dropped_oov"] = id_dict.dropped_oov;
  stats["constraints_total"] = train.constraints_total;
  stats["constraints_dropped_by_length"] = train.constraint_tokens_dropped;
  stats["sentences_with_constraints"] = train.sentences_with_constraints;
  stats["constraint_coverage_percent"] =
      train.examples.empty()
          ? 0.0
          : 100.0 * static_cast<double>(train.sentences_with_constraints) /
                static_cast<double>(train.examples.size());

  if (!dev_src_path.empty() || !dev_tgt_path.empty()) {
    if (dev_src_path.empty() || dev_tgt_path.empty())
      throw Error(ErrorCategory::Usage, "--dev-src and --dev-tgt must come together");
    auto dev_src = read_token_lines(dev_src_path);
    auto dev_tgt = read_token_lines(dev_tgt_path);
    PreparedCorpus dev = encode_corpus(dev_src, dev_tgt, vocab, id_dict, rc);
    write_file(out_dir + "/dev.jsonl", examples_to_jsonl(dev.examples));
    stats["dev_sentences"] = dev.examples.size();
  }

  write_file(out_dir + "/prepare_stats.json", stats.dump(2) + "\n");
  std::cout << "prepared " << train.examples.size() << " sentence pairs, vocab "
            << vocab.size() << ", constraints " << train.constraints_total << "\n";
  return 0;
}

// ------------------------------------------------------------------ train

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& src_path, const std::string& tgt_path,
              const std::string& dict_path, const std::string& vocab_path,
              const std::string& ckpt_path, const std::string& out_dir,
              std::uint64_t seed_flag, bool seed_set, std::size_t threads_flag,
              bool threads_set, std::size_t max_updates_flag, bool max_updates_set,
              std::size_t batch_flag, bool batch_set, bool deterministic) {
  RunConfig rc = load_run_config(config_path);
  if (seed_set) {
    rc.train.seed = seed_flag;
    rc.model.seed = seed_flag;
  }
  if (threads_set) rc.train.threads = threads_flag;
  if (deterministic) rc.train.threads = 1;
  if (max_updates_set) rc.train.max_updates = max_updates_flag;
  if (batch_set) rc.train.batch_size = batch_flag;
  rc.train.validate();
  ensure_out_dir(out_dir);

  Vocabulary vocab;
  std::vector<Example> examples;
  if (!data_path.empty()) {
    if (vocab_path.empty())
      throw Error(ErrorCategory::Usage, "--data needs --vocab from the same prepare run");
    vocab = load_vocab_file(vocab_path);
    examples = examples_from_jsonl(read_file(data_path));
  } else {
    if (src_path.empty() || tgt_path.empty() || dict_path.empty())
      throw Error(ErrorCategory::Usage,
                  "train needs either --data/--vocab or --src/--tgt/--dict");
    auto src = read_token_lines(src_path);
    auto tgt = read_token_lines(tgt_path);
    Dictionary dict = load_dictionary(read_file(dict_path));
    Vocabulary built;
    if (!vocab_path.empty()) {
      built = load_vocab_file(vocab_path);
    } else {
      std::vector<std::vector<std::string>> corpus = src;
      corpus.insert(corpus.end(), tgt.begin(), tgt.end());
      built = build_vocab_with_dict(corpus, dict, rc.min_freq);
    }
    IdDictionary id_dict = IdDictionary::from(dict, built);
    PreparedCorpus prep = encode_corpus(src, tgt, built, id_dict, rc);
    vocab = std::move(built);
    examples = std::move(prep.examples);
    write_file(out_dir + "/vocab.txt", vocab.serialize());
    write_file(out_dir + "/train.jsonl", examples_to_jsonl(examples));
  }
  if (examples.empty()) throw Error(ErrorCategory::State, "no training examples");

  rc.model.vocab_size = static_cast<std::size_t>(vocab.size());
  rc.model.validate();
  for (const Example& ex : examples) {
    for (int id : ex.source)
      if (id < 0 || id >= vocab.size())
        throw Error(ErrorCategory::Format, "prepared data id outside vocabulary");
    for (int id : ex.target)
      if (id < 0 || id >= vocab.size())
        throw Error(ErrorCategory::Format, "prepared data id outside vocabulary");
  }

  Parameters params(rc.model);
  AdamState opt = AdamState::fresh(params);
  if (!ckpt_path.empty()) {
    CheckpointData data = load_checkpoint(ckpt_path);
    opt = restore_train_checkpoint(data, params, vocab.fingerprint());
  } else {
    params.init(rc.model.seed);
  }

  const std::size_t n = examples.size();
  const std::size_t bs = std::min(rc.train.batch_size, n);
  const std::size_t batches_per_epoch = (n + bs - 1) / bs;
  std::vector<std::size_t> perm(n);
  std::uint64_t perm_epoch = ~std::uint64_t{0};

  std::vector<std::string> log_lines;
  const std::string ckpt_file = out_dir + "/checkpoint.ckpt";
  while (opt.step < rc.train.max_updates) {
    std::uint64_t epoch = opt.step / batches_per_epoch;
    std::size_t slot = static_cast<std::size_t>(opt.step % batches_per_epoch);
    if (epoch != perm_epoch) {
      for (std::size_t i = 0; i < n; ++i) perm[i] = i;
      std::mt19937_64 rng(derived_seed(rc.train.seed, 0x5E, epoch));
      rng_shuffle(perm, rng);
      perm_epoch = epoch;
    }
    std::size_t lo = slot * bs;
    std::size_t hi = std::min(n, lo + bs);
    std::vector<Example> batch;
    batch.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) batch.push_back(examples[perm[i]]);

    StepResult res = train_step(params, opt, rc.train, batch);
    if (opt.step % rc.train.log_every == 0 || opt.step == rc.train.max_updates) {
      json line;
      line["step"] = opt.step;
      line["loss"] = res.loss;
      line["lr"] = res.lr;
      line["grad_norm"] = res.grad_norm;
      log_lines.push_back(line.dump());
      std::cout << "step " << opt.step << " loss " << res.loss << " lr " << res.lr
                << "\n";
    }
    if (opt.step % rc.train.checkpoint_every == 0) {
      CheckpointData data = make_train_checkpoint(params, opt, vocab.fingerprint());
      save_checkpoint(ckpt_file, data);
    }
  }
  CheckpointData data = make_train_checkpoint(params, opt, vocab.fingerprint());
  save_checkpoint(ckpt_file, data);
  write_file(out_dir + "/train_log.jsonl", join_lines(log_lines));
  std::cout << "finished at step " << opt.step << ", checkpoint " << ckpt_file << "\n";
  return 0;
}

// -------------------------------------------------------------- translate

struct TranslateJob {
  const Parameters* params = nullptr;
  const DecodeConfig* dcfg = nullptr;
  bool want_trace = false;
};

void translate_one(const TranslateJob& job, const AugmentedInput& in, std::string& out_line,
                   std::string& trace_line, const Vocabulary& vocab,
                   std::exception_ptr& error) {
  try {
    DecodeResult res = job.dcfg->beam_size <= 1
                           ? greedy_decode(*job.params, in, *job.dcfg, job.want_trace)
                           : beam_decode(*job.params, in, *job.dcfg, job.want_trace);
    out_line = join_tokens(vocab.decode(res.tokens));
    if (job.want_trace) {
      json tr;
      tr["score"] = res.score;
      tr["reached_eos"] = res.reached_eos;
      tr["tokens"] = vocab.decode(res.tokens);
      json gates = json::array();
      json logps = json::array();
      for (const StepTrace& st : res.trace) {
        gates.push_back(st.gate);
        logps.push_back(st.logp);
      }
      tr["gate"] = gates;
      tr["logp"] = logps;
      trace_line = tr.dump();
    }
  } catch (...) {
    error = std::current_exception();
  }
}

int cmd_translate(const std::string& config_path, const std::string& ckpt_path,
                  const std::string& vocab_path, const std::string& src_path,
                  const std::string& dict_path, const std::string& out_path,
                  const std::string& trace_path, bool unconstrained, double alpha_flag,
                  bool alpha_set, std::size_t beam_flag, bool beam_set,
                  std::size_t max_len_flag, bool max_len_set, std::size_t threads,
                  bool deterministic) {
  RunConfig rc = load_run_config(config_path);
  if (alpha_set) rc.decode.alpha = alpha_flag;
  if (beam_set) rc.decode.beam_size = beam_flag;
  if (deterministic) threads = 1;

  Vocabulary vocab = load_vocab_file(vocab_path);
  CheckpointData data = load_checkpoint(ckpt_path);
  Parameters params(data.config);
  restore_parameters(data, params, vocab.fingerprint());

  if (max_len_set)
    rc.decode.max_len = max_len_flag;
  else
    rc.decode.max_len = params.config().max_tgt_len;
  rc.decode.max_len = std::min(rc.decode.max_len, params.config().max_tgt_len);
  rc.decode.validate();

  auto src = read_token_lines(src_path);
  IdDictionary id_dict;
  if (!unconstrained && !dict_path.empty()) {
    Dictionary dict = load_dictionary(read_file(dict_path));
    id_dict = IdDictionary::from(dict, vocab);
  }

  const ModelConfig& mc = params.config();
  std::vector<AugmentedInput> inputs;
  inputs.reserve(src.size());
  std::size_t truncated = 0;
  for (const auto& line : src) {
    std::vector<int> ids = vocab.encode(line);
    if (ids.empty()) ids.push_back(Vocabulary::kUnk);
    std::size_t cap = std::min<std::size_t>(mc.p_offset, mc.max_aug_len - 1);
    if (ids.size() > cap) {
      ids.resize(cap);
      ++truncated;
    }
    std::vector<ConstraintMatch> matches;
    if (!id_dict.entries.empty())
      matches = match_constraints(ids, id_dict, rc.max_constraints);
    inputs.push_back(build_augmented_input(ids, matches, static_cast<int>(mc.p_offset),
                                           static_cast<int>(mc.max_segments),
                                           mc.max_aug_len));
  }

  TranslateJob job;
  job.params = &params;
  job.dcfg = &rc.decode;
  job.want_trace = !trace_path.empty();

  std::vector<std::string> out_lines(inputs.size());
  std::vector<std::string> trace_lines(inputs.size());
  std::vector<std::exception_ptr> errors(inputs.size());
  const std::size_t workers = std::max<std::size_t>(1, threads);
  for (std::size_t wave = 0; wave < inputs.size(); wave += workers) {
    std::size_t wave_end = std::min(inputs.size(), wave + workers);
    if (wave_end - wave == 1) {
      translate_one(job, inputs[wave], out_lines[wave], trace_lines[wave], vocab,
                    errors[wave]);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t i = wave; i < wave_end; ++i)
        pool.emplace_back(translate_one, std::cref(job), std::cref(inputs[i]),
                          std::ref(out_lines[i]), std::ref(trace_lines[i]),
                          std::cref(vocab), std::ref(errors[i]));
      for (std::thread& th : pool) th.join();
    }
    for (std::size_t i = wave; i < wave_end; ++i)
      if (errors[i]) std::rethrow_exception(errors[i]);
  }

  write_file(out_path, join_lines(out_lines));
  if (!trace_path.empty()) write_file(trace_path, join_lines(trace_lines));
  std::cout << "translated " << inputs.size() << " sentences";
  if (truncated) std::cout << " (" << truncated << " truncated)";
  std::cout << " -> " << out_path << "\n";
  return 0;
}

// --------------------------------------------------------------- evaluate

std::vector<std::vector<ConstraintEval>> constraints_from_dict(
    const std::vector<std::vector<std::string>>& src, const Dictionary& dict) {
  std::vector<std::vector<std::string>> phrases;
  phrases.reserve(dict.size());
  for (const DictEntry& e : dict.entries) phrases.push_back(e.source);
  PhraseScanner<std::string> scanner(phrases);
  std::vector<std::vector<ConstraintEval>> out;
  out.reserve(src.size());
  for (const auto& sent : src) {
    std::vector<ConstraintEval> cs;
    for (const auto& hit : scanner.scan(sent, sent.size())) {
      ConstraintEval ce;
      ce.candidates = dict.entries[hit.phrase_index].candidates;
      cs.push_back(std::move(ce));
    }
    out.push_back(std::move(cs));
  }
  return out;
}

std::vector<std::vector<ConstraintEval>> constraints_from_jsonl(const std::string& text) {
  std::vector<std::vector<ConstraintEval>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      out.emplace_back();
      continue;
    }
    json j = parse_json_text(line, "constraints line " + std::to_string(lineno));
    std::vector<ConstraintEval> cs;
    try {
      for (const json& c : j.at("constraints")) {
        ConstraintEval ce;
        for (const json& cand : c.at("candidates"))
          ce.candidates.push_back(cand.get<std::vector<std::string>>());
        cs.push_back(std::move(ce));
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCategory::Format,
                  "constraints line " + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(std::move(cs));
  }
  return out;
}

int cmd_evaluate(const std::string& hyp_path, const std::string& ref_path,
                 const std::string& src_path, const std::string& dict_path,
                 const std::string& constraints_path, const std::string& hyp_b_path,
                 const std::string& out_path, std::size_t resamples, std::uint64_t seed) {
  auto hyp = read_token_lines(hyp_path);
  auto ref = read_token_lines(ref_path);
  if (hyp.size() != ref.size())
    throw Error(ErrorCategory::Format, "hypothesis and reference line counts differ");

  std::vector<std::vector<ConstraintEval>> constraints(hyp.size());
  if (!constraints_path.empty()) {
    constraints = constraints_from_jsonl(read_file(constraints_path));
    if (constraints.size() != hyp.size())
      throw Error(ErrorCategory::Format, "constraints line count differs from hypothesis");
  } else if (!src_path.empty() && !dict_path.empty()) {
    auto src = read_token_lines(src_path);
    if (src.size() != hyp.size())
      throw Error(ErrorCategory::Format, "source line count differs from hypothesis");
    constraints = constraints_from_dict(src, load_dictionary(read_file(dict_path)));
  }

  std::vector<EvalRecord> records(hyp.size());
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    records[i].hypothesis = hyp[i];
    records[i].reference = ref[i];
    records[i].constraints = constraints[i];
  }
  MetricsReport report = evaluate_records(records);

  if (!hyp_b_path.empty()) {
    auto hyp_b = read_token_lines(hyp_b_path);
    if (hyp_b.size() != ref.size())
      throw Error(ErrorCategory::Format, "second hypothesis line count differs");
    std::vector<EvalRecord> records_b(hyp_b.size());
    for (std::size_t i = 0; i < hyp_b.size(); ++i) {
      records_b[i].hypothesis = hyp_b[i];
      records_b[i].reference = ref[i];
    }
    report.bootstrap = paired_bootstrap_bleu(records, records_b, resamples, seed);
  }

  std::string text = report.to_json() + "\n";
  if (!out_path.empty()) write_file(out_path, text);
  std::cout << text;
  return 0;
}

// ------------------------------------------------------------------ stats

int cmd_stats(const std::string& dict_path, const std::string& src_path,
              const std::string& out_path) {
  Dictionary dict = load_dictionary(read_file(dict_path));
  auto src = read_token_lines(src_path);
  DictionaryStats st = dictionary_stats(dict, src);
  json j;
  j["total_entries"] = st.total_entries;
  json hist = json::object();
  for (const auto& [deg, pct] : st.polysemy_histogram) hist[std::to_string(deg)] = pct;
  j["polysemy_histogram"] = hist;
  j["coverage_percent"] = st.coverage_percent;
  j["sentences"] = st.sentences;
  j["sentences_with_match"] = st.sentences_with_match;
  std::string text = j.dump(2) + "\n";
  if (!out_path.empty()) write_file(out_path, text);
  std::cout << text;
  return 0;
}

// --------------------------------------------------------- make-synthetic

int cmd_make_synthetic(const std::string& task, const std::string& out_dir,
                       std::size_t train_n, std::size_t dev_n, std::size_t test_n,
                       std::uint64_t seed) {
  SyntheticData data = make_synthetic(task, train_n, dev_n, test_n, seed);
  ensure_out_dir(out_dir);
  write_file(out_dir + "/train.src", join_lines(data.train_src));
  write_file(out_dir + "/train.tgt", join_lines(data.train_tgt));
  write_file(out_dir + "/dev.src", join_lines(data.dev_src));
  write_file(out_dir + "/dev.tgt", join_lines(data.dev_tgt));
  write_file(out_dir + "/test.src", join_lines(data.test_src));
  write_file(out_dir + "/test.tgt", join_lines(data.test_tgt));
  write_file(out_dir + "/dict.tsv", data.dict_tsv);
  std::cout << "wrote " << task << " corpus (" << train_n << "/" << dev_n << "/" << test_n
            << ") to " << out_dir << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"dictionary-constrained translation toolkit"};
  app.require_subcommand(1);

  // prepare
  auto* prep = app.add_subcommand("prepare", "encode a parallel corpus with constraints");
  std::string p_config, p_src, p_tgt, p_dict, p_dev_src, p_dev_tgt, p_vocab, p_out;
  std::size_t p_min_freq = 1;
  prep->add_option("--config", p_config, "JSON config file");
  prep->add_option("--src", p_src, "source corpus")->required();
  prep->add_option("--tgt", p_tgt, "target corpus")->required();
  prep->add_option("--dict", p_dict, "dictionary TSV")->required();
  prep->add_option("--dev-src", p_dev_src, "held-out source corpus");
  prep->add_option("--dev-tgt", p_dev_tgt, "held-out target corpus");
  prep->add_option("--vocab", p_vocab, "reuse an existing vocabulary file");
  prep->add_option("--out", p_out, "output directory")->required();
  auto* p_mf = prep->add_option("--min-freq", p_min_freq, "vocabulary frequency cutoff");

  // train
  auto* tr = app.add_subcommand("train", "train a model");
  std::string t_config, t_data, t_src, t_tgt, t_dict, t_vocab, t_ckpt, t_out;
  std::uint64_t t_seed = 1;
  std::size_t t_threads = 1, t_max_updates = 0, t_batch = 0;
  bool t_det = false;
  tr->add_option("--config", t_config, "JSON config file");
  tr->add_option("--data", t_data, "prepared train.jsonl");
  tr->add_option("--src", t_src, "source corpus (runs preparation inline)");
  tr->add_option("--tgt", t_tgt, "target corpus");
  tr->add_option("--dict", t_dict, "dictionary TSV");
  tr->add_option("--vocab", t_vocab, "vocabulary file");
  tr->add_option("--ckpt", t_ckpt, "checkpoint to resume from");
  tr->add_option("--out", t_out, "output directory")->required();
  auto* t_seed_o = tr->add_option("--seed", t_seed, "training and init seed");
  auto* t_thr_o = tr->add_option("--threads", t_threads, "worker threads");
  auto* t_mu_o = tr->add_option("--max-updates", t_max_updates, "total optimizer steps");
  auto* t_bs_o = tr->add_option("--batch-size", t_batch, "examples per step");
  tr->add_flag("--deterministic", t_det, "force single-threaded execution");

  // translate
  auto* tl = app.add_subcommand("translate", "decode a source corpus");
  std::string l_config, l_ckpt, l_vocab, l_src, l_dict, l_out, l_trace;
  bool l_unconstrained = false, l_det = false;
  double l_alpha = 0.0;
  std::size_t l_beam = 5, l_max_len = 0, l_threads = 1;
  tl->add_option("--config", l_config, "JSON config file");
  tl->add_option("--ckpt", l_ckpt, "model checkpoint")->required();
  tl->add_option("--vocab", l_vocab, "vocabulary file")->required();
  tl->add_option("--src", l_src, "source corpus")->required();
  tl->add_option("--dict", l_dict, "dictionary TSV");
  tl->add_option("--out", l_out, "output hypothesis file")->required();
  tl->add_option("--trace", l_trace, "per-sentence decode trace JSONL");
  tl->add_flag("--unconstrained", l_unconstrained, "ignore the dictionary");
  auto* l_alpha_o = tl->add_option("--alpha", l_alpha, "constraint attention boost");
  auto* l_beam_o = tl->add_option("--beam", l_beam, "beam size (1 = greedy)");
  auto* l_ml_o = tl->add_option("--max-len", l_max_len, "decode length cap");
  tl->add_option("--threads", l_threads, "worker threads");
  tl->add_flag("--deterministic", l_det, "force single-threaded execution");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score hypotheses");
  std::string e_hyp, e_ref, e_src, e_dict, e_constraints, e_hyp_b, e_out;
  std::size_t e_resamples = 1000;
  std::uint64_t e_seed = 1;
  ev->add_option("--hyp", e_hyp, "hypothesis file")->required();
  ev->add_option("--ref", e_ref, "reference file")->required();
  ev->add_option("--src", e_src, "source corpus (for constraint matching)");
  ev->add_option("--dict", e_dict, "dictionary TSV (for constraint matching)");
  ev->add_option("--constraints", e_constraints, "constraints JSONL");
  ev->add_option("--hyp-b", e_hyp_b, "second hypothesis file for the significance test");
  ev->add_option("--out", e_out, "write the JSON report here");
  ev->add_option("--resamples", e_resamples, "bootstrap resamples");
  ev->add_option("--seed", e_seed, "bootstrap seed");

  // stats
  auto* st = app.add_subcommand("stats", "dictionary and coverage statistics");
  std::string s_dict, s_src, s_out;
  st->add_option("--dict", s_dict, "dictionary TSV")->required();
  st->add_option("--src", s_src, "source corpus")->required();
  st->add_option("--out", s_out, "write the JSON report here");

  // make-synthetic
  auto* mk = app.add_subcommand("make-synthetic", "generate a toy corpus");
  std::string m_task = "copy", m_out;
  std::size_t m_train = 2000, m_dev = 200, m_test = 200;
  std::uint64_t m_seed = 1;
  mk->add_option("--task", m_task, "copy or disambig");
  mk->add_option("--out", m_out, "output directory")->required();
  mk->add_option("--train", m_train, "training sentences");
  mk->add_option("--dev", m_dev, "dev sentences");
  mk->add_option("--test", m_test, "test sentences");
  mk->add_option("--seed", m_seed, "generator seed");

  std::vector<const char*> argv;
  argv.push_back("dictdis");
  for (const std::string& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // help text on stdout, exit 0
  } catch (const CLI::ParseError& e) {
    std::string what = e.what();
    std::cerr << "error:usage: " << (what.empty() ? e.get_name() : what) << "\n";
    return 2;
  }

  try {
    if (*prep)
      return cmd_prepare(p_config, p_src, p_tgt, p_dict, p_dev_src, p_dev_tgt, p_vocab,
                         p_out, p_min_freq, p_mf->count() > 0);
    if (*tr)
      return cmd_train(t_config, t_data, t_src, t_tgt, t_dict, t_vocab, t_ckpt, t_out,
                       t_seed, t_seed_o->count() > 0, t_threads, t_thr_o->count() > 0,
                       t_max_updates, t_mu_o->count() > 0, t_batch, t_bs_o->count() > 0,
                       t_det);
    if (*tl)
      return cmd_translate(l_config, l_ckpt, l_vocab, l_src, l_dict, l_out, l_trace,
                           l_unconstrained, l_alpha, l_alpha_o->count() > 0, l_beam,
                           l_beam_o->count() > 0, l_max_len, l_ml_o->count() > 0,
                           l_threads, l_det);
    if (*ev)
      return cmd_evaluate(e_hyp, e_ref, e_src, e_dict, e_constraints, e_hyp_b, e_out,
                          e_resamples, e_seed);
    if (*st) return cmd_stats(s_dict, s_src, s_out);
    if (*mk) return cmd_make_synthetic(m_task, m_out, m_train, m_dev, m_test, m_seed);
    std::cerr << "error:usage: no subcommand given\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error:" << error_category_name(e.category()) << ": " << e.what() << "\n";
    return e.category() == ErrorCategory::Usage ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error:state: " << e.what() << "\n";
    return 1;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace dictdis::cli
