"""End-to-end smoke tests for the python bindings."""

import json

import pytest

import dictdis as dd


def test_vocabulary_round_trip():
    corpus = [["the", "cat", "sat"], ["the", "dog", "sat"], ["the", "cat", "ran"]]
    vocab = dd.build_vocabulary(corpus, 1)
    assert len(vocab) == 6 + 5  # specials + {the, cat, sat, dog, ran}
    assert vocab.id("the") >= 6
    assert vocab.decode(vocab.encode(["the", "dog"])) == ["the", "dog"]
    assert vocab.id("never-seen") == dd.Vocabulary.UNK

    again = dd.Vocabulary.deserialize(vocab.serialize())
    assert again.tokens() == vocab.tokens()
    assert again.fingerprint() == vocab.fingerprint()


def test_dictionary_matching_and_augmentation():
    corpus = [["the", "bank", "is", "near"], ["a", "river", "bank"]]
    vocab = dd.build_vocabulary(corpus, 1)
    dictionary = dd.load_dictionary("bank\tufer|institut\nriver\tfluss\n")
    assert len(dictionary) == 2
    assert dictionary.entries[0].degree() == 2

    id_dict = dd.IdDictionary.from_dictionary(dictionary, vocab)
    # ufer/institut/fluss are not in the vocabulary, so both entries survive
    # only if their source side is known; target-side oov is allowed
    src = vocab.encode(["the", "bank", "is", "near"])
    matches = dd.match_constraints(src, id_dict, 8)
    assert len(matches) == 1
    assert (matches[0].start, matches[0].end) == (1, 2)
    assert matches[0].degree() == 2

    aug = dd.build_augmented_input(src, matches, 128, 16, 192)
    assert aug.source_len == 4
    assert aug.has_constraints()
    assert aug.n_constraints() == 1
    assert aug.token_ids[-1] == dd.Vocabulary.EOS
    assert dd.Vocabulary.SEP in aug.token_ids
    assert dd.Vocabulary.ISEP in aug.token_ids
    # positions restart above the source window, segments tag the constraint
    assert aug.position_ids[aug.source_len] == 128
    assert max(aug.segment_ids) == 1

    source, constraints = dd.parse_augmented(aug.token_ids)
    assert source == src
    assert len(constraints) == 1
    assert len(constraints[0]) == 2


def test_metrics():
    records = [
        dd.EvalRecord(["der", "fluss"], ["der", "fluss"], [[["fluss"]]]),
        dd.EvalRecord(["das", "ufer"], ["das", "institut"], [[["ufer"], ["institut"]]]),
    ]
    csr = dd.compute_csr(records)
    assert csr["overall"]["counted"] == 2
    assert csr["overall"]["satisfied"] == 1
    assert csr["by_degree"][2]["satisfied"] == 0

    perfect = [dd.EvalRecord(["a", "b", "c", "d"], ["a", "b", "c", "d"], [])] * 4
    assert dd.corpus_bleu(perfect) == pytest.approx(100.0)

    garbage = [dd.EvalRecord(["x", "y", "z", "w"], ["a", "b", "c", "d"], [])] * 4
    boot = dd.paired_bootstrap_bleu(perfect, garbage, resamples=200, seed=3)
    assert boot["resamples"] == 200
    assert boot["mean_delta"] > 0

    report = json.loads(dd.evaluate_records(perfect))
    assert report["bleu"] == pytest.approx(100.0)
    assert report["sentences"] == 4


def test_synthetic_generator_is_seeded():
    a = dd.make_synthetic("copy", 20, 4, 4, 11)
    b = dd.make_synthetic("copy", 20, 4, 4, 11)
    assert a.train_src == b.train_src
    assert a.dict_tsv == b.dict_tsv
    assert len(a.train_src) == 20
    assert len(a.test_tgt) == 4
    with pytest.raises(dd.DictdisError):
        dd.make_synthetic("nope", 1, 1, 1, 1)


def test_cli_pipeline_and_translator(tmp_path):
    root = str(tmp_path)
    cfg = {
        "model": {
            "d_model": 16, "n_heads": 2, "n_layers": 1, "d_ffn": 32,
            "max_aug_len": 64, "max_tgt_len": 16, "max_segments": 8,
            "p_offset": 16, "gate_hidden": 16, "dropout": 0.1,
        },
        "train": {
            "lr_peak": 0.002, "warmup_steps": 10, "label_smoothing": 0.1,
            "batch_size": 8, "max_updates": 30, "threads": 1, "seed": 9,
            "checkpoint_every": 30, "log_every": 10,
        },
        "decode": {"beam_size": 2, "max_len": 10, "alpha": 0.0},
        "data": {"min_freq": 1, "max_constraints": 4},
    }
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))

    assert dd.run_cli(["make-synthetic", "--task", "copy", "--train", "30", "--dev", "4",
                       "--test", "4", "--seed", "13", "--out", root]) == 0
    assert dd.run_cli(["prepare", "--config", root + "/cfg.json",
                       "--src", root + "/train.src", "--tgt", root + "/train.tgt",
                       "--dev-src", root + "/dev.src", "--dev-tgt", root + "/dev.tgt",
                       "--dict", root + "/dict.tsv", "--out", root + "/prep"]) == 0
    assert dd.run_cli(["train", "--config", root + "/cfg.json",
                       "--data", root + "/prep/train.jsonl",
                       "--vocab", root + "/prep/vocab.txt",
                       "--out", root + "/run", "--seed", "9", "--deterministic"]) == 0

    tr = dd.Translator(root + "/run/checkpoint.ckpt", root + "/prep/vocab.txt",
                       root + "/dict.tsv")
    assert tr.vocab_size() > 6
    assert tr.dict_size() > 0

    dictionary = dd.load_dictionary((tmp_path / "dict.tsv").read_text())
    vocab = dd.Vocabulary.deserialize((tmp_path / "prep/vocab.txt").read_text())
    id_dict = dd.IdDictionary.from_dictionary(dictionary, vocab)
    lines = (tmp_path / "test.src").read_text().splitlines()
    line = next(l for l in lines
                if dd.match_constraints(vocab.encode(dd.tokenize(l)), id_dict, 8))
    out = tr.translate(line, beam_size=2, alpha=0.1)
    assert isinstance(out["text"], str)
    assert all(isinstance(t, int) for t in out["token_ids"])
    assert len(out["tokens"]) == len(out["token_ids"])
    assert out["score"] <= 0.0
    assert out["constraints_matched"] >= 1

    # unconstrained mode drops the dictionary
    plain = tr.translate(line, beam_size=1, constrained=False)
    assert plain["constraints_matched"] == 0

    # an in-process usage error returns 2 without raising
    assert dd.run_cli(["translate", "--no-such-flag"]) == 2
