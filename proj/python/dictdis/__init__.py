"""Lexically constrained translation with multi-candidate dictionaries."""

from ._core import (
    AugmentedInput,
    ConstraintMatch,
    DictEntry,
    Dictionary,
    DictdisError,
    EvalRecord,
    IdDictionary,
    SyntheticData,
    Translator,
    Vocabulary,
    build_augmented_input,
    build_vocabulary,
    compute_csr,
    corpus_bleu,
    dictionary_stats,
    evaluate_records,
    load_dictionary,
    make_synthetic,
    match_constraints,
    paired_bootstrap_bleu,
    parse_augmented,
    run_cli,
    tokenize,
)

__all__ = [
    "AugmentedInput",
    "ConstraintMatch",
    "DictEntry",
    "Dictionary",
    "DictdisError",
    "EvalRecord",
    "IdDictionary",
    "SyntheticData",
    "Translator",
    "Vocabulary",
    "build_augmented_input",
    "build_vocabulary",
    "compute_csr",
    "corpus_bleu",
    "dictionary_stats",
    "evaluate_records",
    "load_dictionary",
    "make_synthetic",
    "match_constraints",
    "paired_bootstrap_bleu",
    "parse_augmented",
    "run_cli",
    "tokenize",
]
