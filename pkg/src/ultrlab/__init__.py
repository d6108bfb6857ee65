"""Unbiased learning-to-rank laboratory: click simulation, heuristic text
features, dual-learning debiasing with label correction, negative-sampling
list reconstruction and LambdaRank boosted trees."""

from .corpus_io import ClickLog, Document, FeatureRow, FormatError, LabeledList, Query
from .dla import DLARanker
from .gbdt import LambdaMART
from .labelfix import LabelCorrector, correct_label_matrix, correct_labels, train_dla_lc
from .metrics import dcg_at_k, evaluate_run, ndcg_at_k
from .negsample import NegSpec, sample_hard_negatives, train_negsample
from .nnrank import NeuralRanker
from .simulate import SimSpec, simulate
from .textfeat import HeuristicFeatures, build_index, extract_features

__version__ = "0.1.0"

__all__ = [
    "ClickLog",
    "DLARanker",
    "Document",
    "FeatureRow",
    "FormatError",
    "HeuristicFeatures",
    "LabelCorrector",
    "LabeledList",
    "LambdaMART",
    "NegSpec",
    "NeuralRanker",
    "Query",
    "SimSpec",
    "build_index",
    "correct_label_matrix",
    "correct_labels",
    "dcg_at_k",
    "evaluate_run",
    "extract_features",
    "ndcg_at_k",
    "sample_hard_negatives",
    "simulate",
    "train_dla_lc",
    "train_negsample",
]
