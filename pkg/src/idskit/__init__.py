"""idskit: flow-based network intrusion detection toolkit.

Entropy screening of collection intervals, random-forest feature ranking,
and a two-stage k-means++ / Adaboost flow classifier, with a KDD99-format
evaluation harness.
"""

from . import adaboost, cli, config, dataset, entropy, flow, forest, kmeans, metrics, pipeline
from .config import DEFAULT_REBALANCE_TARGETS, RunConfig
from .dataset import (
    ATTACK_CATEGORIES,
    ClassLabel,
    Dataset,
    EncodingState,
    FeatureSchema,
    KddParseError,
    apply_encode,
    fit_encode,
    from_matrix,
    kdd99_schema,
    parse_kdd,
    rebalance,
    serialize_kdd,
    split,
    stratified_sample,
)
from .metrics import DEFAULT_COST_MATRIX, ConfusionMatrix, confusion, macro_report
from .pipeline import HybridModel, classify, classify_many, cross_validate, detect_stream, train

__version__ = "0.1.0"

__all__ = [
    "ATTACK_CATEGORIES",
    "ClassLabel",
    "ConfusionMatrix",
    "DEFAULT_COST_MATRIX",
    "DEFAULT_REBALANCE_TARGETS",
    "Dataset",
    "EncodingState",
    "FeatureSchema",
    "HybridModel",
    "KddParseError",
    "RunConfig",
    "adaboost",
    "apply_encode",
    "classify",
    "classify_many",
    "cli",
    "config",
    "confusion",
    "cross_validate",
    "dataset",
    "detect_stream",
    "entropy",
    "fit_encode",
    "flow",
    "forest",
    "from_matrix",
    "kdd99_schema",
    "kmeans",
    "macro_report",
    "metrics",
    "parse_kdd",
    "pipeline",
    "rebalance",
    "serialize_kdd",
    "split",
    "stratified_sample",
    "train",
]
