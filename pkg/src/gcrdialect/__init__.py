"""Sentence-level dialect identification for Chinese varieties of the Greater China Region."""

from __future__ import annotations

from .alignment import ParallelPair, build_alignment_sets, extract_divergent, lcs
from .corpus import (GCR_TAGS, Corpus, DialectTag, LabeledSentence, ScriptConversionTable, apply_scenario,
                     load_tsv, stratified_kfold, to_simplified, write_tsv)
from .errors import (ConfigurationError, DataFormatError, DialectIDError, InsufficientDataError, InvariantError,
                     MissingResourceError, UndefinedPMIError)
from .evaluation import EvalReport, cross_validate, paired_t_test, render_report
from .features import (DialectWordSets, FeatureConfig, FeatureSpace, Resources, SparseFeatureVector,
                       build_pmi_sets, extract, fit_space, pmi_score)
from .model import LinearModel, TrainSettings, predict, train
from .segmentation import FMMSegmenter, Lexicon, WhitespaceSegmenter, char_ngrams, fmm_segment

__version__ = "0.1.0"

__all__ = [
    "GCR_TAGS", "ConfigurationError", "Corpus", "DataFormatError", "DialectIDError", "DialectTag",
    "DialectWordSets", "EvalReport", "FMMSegmenter", "FeatureConfig", "FeatureSpace", "InsufficientDataError",
    "InvariantError", "LabeledSentence", "Lexicon", "LinearModel", "MissingResourceError", "ParallelPair",
    "Resources", "ScriptConversionTable", "SparseFeatureVector", "TrainSettings", "UndefinedPMIError",
    "WhitespaceSegmenter", "apply_scenario", "build_alignment_sets", "build_pmi_sets", "char_ngrams",
    "cross_validate", "extract", "extract_divergent", "fit_space", "fmm_segment", "lcs", "load_tsv",
    "paired_t_test", "pmi_score", "predict", "render_report", "stratified_kfold", "to_simplified", "train",
    "write_tsv",
]
