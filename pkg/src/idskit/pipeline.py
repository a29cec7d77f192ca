"""End-to-end hybrid detector.

Training runs forest-based feature ranking, optional class rebalancing,
k-means++ coarse clustering, and Adaboost fine classification over the rows
that land in anomalous clusters. Classification short-circuits flows in
benign clusters to Normal and sends the rest to the boosted ensemble.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, replace

import numpy as np

from . import adaboost as ab
from . import entropy as ent
from . import flow as fl
from . import forest as rf
from . import kmeans as km
from .config import (
    RunConfig,
    SEED_ADABOOST,
    SEED_FOREST,
    SEED_IMPORTANCE,
    SEED_KMEANS,
    SEED_REBALANCE,
    SEED_SPLIT,
    config_from_text,
)
from .dataset import (
    ClassLabel,
    Dataset,
    EncodingState,
    FeatureSchema,
    load_encoding,
    rebalance,
    save_encoding,
    split,
)

MODEL_FORMAT_VERSION = 1
BUNDLE_FILES = ("manifest", "schema", "encoding", "features", "kmeans", "adaboost", "config")


@dataclass
class HybridModel:
    """Selected-feature subspace plus the two classification stages.

    ``feature_lo`` / ``feature_hi`` hold the training min/max of each
    selected column; both stages operate in that rescaled [0, 1] space so
    Euclidean distances stay commensurate (ordinal categorical codes would
    otherwise dwarf the unit-scaled continuous columns).
    """

    selected_features: list[int]
    encoding: EncodingState | None
    kmeans: km.KMeansModel
    boost: ab.AdaboostModel
    config: RunConfig
    schema: FeatureSchema
    feature_lo: np.ndarray | None = None
    feature_hi: np.ndarray | None = None
    importance: np.ndarray | None = None

    @property
    def width(self) -> int:
        return self.schema.width

    def project(self, X: np.ndarray) -> np.ndarray:
        """Select columns and rescale them into the cluster space."""
        Xs = X[:, self.selected_features].astype(np.float64, copy=True)
        if self.feature_lo is None:
            return Xs
        span = self.feature_hi - self.feature_lo
        keep = span > 0
        Xs[:, keep] = np.clip(
            (Xs[:, keep] - self.feature_lo[keep]) / span[keep], 0.0, 1.0
        )
        Xs[:, ~keep] = 0.0
        return Xs


def train(train_data: Dataset, config: RunConfig) -> HybridModel:
    """Fit the full hybrid detector on an encoded, labeled dataset."""
    if train_data.labels is None:
        raise ValueError("training requires labels")
    M = train_data.schema.width
    k = config.feature_count
    if k > M:
        raise ValueError(f"feature_count {k} exceeds schema width {M}")

    importance = None
    if k < M:
        model = rf.train_forest(
            train_data,
            num_trees=config.forest_size,
            seed=config.seed(SEED_FOREST),
            threads=config.threads,
        )
        importance = rf.permutation_importance(
            model, train_data, seed=config.seed(SEED_IMPORTANCE)
        )
        selected = rf.select_features(importance, k)
    else:
        selected = list(range(M))  # identity selection, no ranking needed

    if config.rebalance_targets:
        train_data = rebalance(
            train_data, config.rebalance_targets, seed=config.seed(SEED_REBALANCE)
        )

    X = train_data.matrix[:, selected].astype(np.float64)
    y = np.asarray(train_data.labels, dtype=np.int64)

    # rescale the working subspace to [0, 1] so cluster distances are
    # commensurate across columns
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = hi - lo
    keep = span > 0
    X[:, keep] = (X[:, keep] - lo[keep]) / span[keep]
    X[:, ~keep] = 0.0

    kmodel = km.train_kmeans(
        X,
        K=config.clusters,
        seed=config.seed(SEED_KMEANS),
        max_iter=config.kmeans_max_iter,
        tol=config.kmeans_tol,
    )
    assignments = km.assign_many(kmodel, X)
    dispositions = km.label_clusters(kmodel, assignments, y)

    anomalous = np.array([dispositions[a] == km.ANOMALOUS for a in assignments])
    if config.attack_classes_only:
        anomalous &= y != ClassLabel.NORMAL
    if not anomalous.any():
        raise ValueError(
            "degenerate training set: no rows fall in anomalous clusters"
        )
    boost = ab.train_adaboost(
        X[anomalous], y[anomalous], nt=config.nt, seed=config.seed(SEED_ADABOOST)
    )
    return HybridModel(
        selected_features=list(selected),
        encoding=train_data.encoding,
        kmeans=kmodel,
        boost=boost,
        config=config,
        schema=train_data.schema,
        feature_lo=lo,
        feature_hi=hi,
        importance=importance,
    )


def classify_many(model: HybridModel, X) -> np.ndarray:
    """Vectorized two-stage classification of full-width encoded rows."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.width:
        raise ValueError(f"expected rows of {model.width} features")
    Xs = model.project(X)
    assignments = km.assign_many(model.kmeans, Xs)
    benign = np.array(
        [model.kmeans.dispositions[a] == km.BENIGN for a in assignments]
    )
    out = np.full(len(X), int(ClassLabel.NORMAL), dtype=np.int8)
    if (~benign).any():
        out[~benign] = ab.predict_many(model.boost, Xs[~benign])
    return out


def classify(model: HybridModel, row) -> ClassLabel:
    """Benign-cluster rows are Normal; the rest take the ensemble's vote."""
    row = np.asarray(row, dtype=np.float64)
    if row.shape != (model.width,):
        raise ValueError(f"expected a row of {model.width} features")
    return ClassLabel(int(classify_many(model, row[None, :])[0]))


def encode_flow_vectors(model: HybridModel, X) -> np.ndarray:
    """Scale continuous columns of flow-derived vectors with the model's
    training ranges; categorical code columns pass through unchanged."""
    X = np.asarray(X, dtype=np.float64).copy()
    if model.encoding is None:
        return X
    for pos, (lo, hi) in model.encoding.ranges.items():
        if hi == lo:
            X[:, pos] = 0.0
        else:
            X[:, pos] = np.clip((X[:, pos] - lo) / (hi - lo), 0.0, 1.0)
    return X


@dataclass(frozen=True)
class StreamResult:
    verdicts: list[ClassLabel]          # aligned with the input flow order
    intervals: list[ent.IntervalScreenResult]


def detect_stream(
    model: HybridModel,
    flows,
    windows: dict[str, ent.EntropyWindow] | None = None,
    gate: bool = True,
) -> StreamResult:
    """Screen intervals and classify flows.

    With the gate on, only flows inside suspicious intervals reach the
    classifier; everything else passes as Normal. With the gate off every
    flow is classified and the screening report is informational.
    """
    flows = list(flows)
    windows = windows or ent.make_windows(
        window=model.config.entropy_window, warmup=model.config.entropy_warmup
    )
    positions: dict[int, list[int]] = {}
    for i, f in enumerate(flows):
        positions.setdefault(f.interval_index, []).append(i)

    verdicts: list[ClassLabel] = [ClassLabel.NORMAL] * len(flows)
    interval_results = []
    for interval_index in sorted(positions):
        members = [flows[i] for i in positions[interval_index]]
        screened = ent.screen_interval(members, windows, interval_index)
        interval_results.append(screened)
        if gate and screened.verdict != ent.SUSPICIOUS:
            continue  # classifier never consulted
        feats = np.vstack([fl.derive_features(f, members) for f in members])
        labels = classify_many(model, encode_flow_vectors(model, feats))
        for i, lab in zip(positions[interval_index], labels):
            verdicts[i] = ClassLabel(int(lab))
    return StreamResult(verdicts=verdicts, intervals=interval_results)


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class CrossValidationReport:
    """Per-class recall on the training split and the held-out split."""

    train_recall: dict[ClassLabel, float]
    test_recall: dict[ClassLabel, float]

    def to_text(self) -> str:
        header = "split," + ",".join(c.display for c in ClassLabel)
        row = lambda d: ",".join(f"{d[c] * 100:.2f}" for c in ClassLabel)
        return (
            f"{header}\n"
            f"train,{row(self.train_recall)}\n"
            f"test,{row(self.test_recall)}\n"
        )


def per_class_recall(true_labels, predicted) -> dict[ClassLabel, float]:
    """Recall per class; a class absent from true labels scores 0."""
    t = np.asarray(true_labels)
    p = np.asarray(predicted)
    out = {}
    for cls in ClassLabel:
        mask = t == cls
        out[cls] = float(np.mean(p[mask] == cls)) if mask.any() else 0.0
    return out


def cross_validate(
    data: Dataset, config: RunConfig, train_fraction: float = 0.9
) -> CrossValidationReport:
    """One seeded train/held-out split (default 90/10), one model, recall on
    both sides."""
    train_set, test_set = split(
        data, test_fraction=1.0 - train_fraction, seed=config.seed(SEED_SPLIT)
    )
    model = train(train_set, config)
    return CrossValidationReport(
        train_recall=per_class_recall(
            train_set.labels, classify_many(model, train_set.matrix)
        ),
        test_recall=per_class_recall(
            test_set.labels, classify_many(model, test_set.matrix)
        ),
    )


def rebalance_comparison(
    data: Dataset,
    config: RunConfig,
    targets: dict[ClassLabel, int],
    test_fraction: float = 0.4,
) -> dict[str, dict[ClassLabel, float]]:
    """Per-class recall of rebalanced vs original training on one shared
    test split (the class-imbalance experiment)."""
    train_set, test_set = split(
        data, test_fraction=test_fraction, seed=config.seed(SEED_SPLIT)
    )
    original = train(train_set, replace(config, rebalance_targets=None))
    balanced = train(train_set, replace(config, rebalance_targets=targets))
    return {
        "original": per_class_recall(
            test_set.labels, classify_many(original, test_set.matrix)
        ),
        "balanced": per_class_recall(
            test_set.labels, classify_many(balanced, test_set.matrix)
        ),
    }


def nt_sweep(
    train_set: Dataset, test_set: Dataset, config: RunConfig, nt_values
) -> list[tuple[int, float, float]]:
    """(NT, test accuracy, seconds) per boosting-round count, for tuning."""
    rows = []
    for nt in nt_values:
        start = time.perf_counter()
        model = train(train_set, replace(config, nt=nt))
        preds = classify_many(model, test_set.matrix)
        elapsed = time.perf_counter() - start
        acc = float(np.mean(preds == np.asarray(test_set.labels)))
        rows.append((int(nt), acc, elapsed))
    return rows


# ---------------------------------------------------------------------------
# model bundle persistence


def save_model(model: HybridModel, directory) -> None:
    """Write the bundle: manifest, schema, encoding, features, kmeans,
    adaboost, config. Content is reproducible byte-for-byte given the same
    training inputs and seeds."""
    os.makedirs(directory, exist_ok=True)
    p = lambda name: os.path.join(directory, name)
    with open(p("manifest"), "w") as fh:
        fh.write(f"format_version {MODEL_FORMAT_VERSION}\n")
        fh.write(f"master_seed {model.config.master_seed}\n")
        for name, off in (
            ("forest", SEED_FOREST),
            ("importance", SEED_IMPORTANCE),
            ("rebalance", SEED_REBALANCE),
            ("kmeans", SEED_KMEANS),
            ("adaboost", SEED_ADABOOST),
            ("split", SEED_SPLIT),
        ):
            fh.write(f"seed_{name} {model.config.seed(off)}\n")
    with open(p("schema"), "w") as fh:
        fh.write(f"#schema {model.schema.header()}\n")
    if model.encoding is None:
        with open(p("encoding"), "w") as fh:
            fh.write("#encoding none\n")
    else:
        save_encoding(model.encoding, p("encoding"))
    with open(p("features"), "w") as fh:
        for i, idx in enumerate(model.selected_features):
            if model.feature_lo is None:
                fh.write(f"{idx}\n")
            else:
                lo = float(model.feature_lo[i])
                hi = float(model.feature_hi[i])
                fh.write(f"{idx},{lo!r},{hi!r}\n")
    km.save_kmeans(model.kmeans, p("kmeans"))
    ab.save_adaboost(model.boost, p("adaboost"))
    with open(p("config"), "w") as fh:
        fh.write(model.config.to_text())


def load_model(directory) -> HybridModel:
    p = lambda name: os.path.join(directory, name)
    with open(p("manifest")) as fh:
        manifest = dict(line.split() for line in fh if line.strip())
    if int(manifest.get("format_version", -1)) != MODEL_FORMAT_VERSION:
        raise ValueError(f"{directory}: unsupported model format")
    with open(p("schema")) as fh:
        header = fh.readline()
    if not header.startswith("#schema "):
        raise ValueError(f"{directory}: bad schema file")
    pairs = [e.split(":") for e in header[len("#schema "):].strip().split(",")]
    schema = FeatureSchema(tuple(x[0] for x in pairs), tuple(x[1] for x in pairs))
    with open(p("encoding")) as fh:
        first = fh.readline().strip()
    encoding = None if first == "#encoding none" else load_encoding(p("encoding"))
    selected, los, his = [], [], []
    with open(p("features")) as fh:
        for line in fh:
            if not line.strip():
                continue
            parts = line.strip().split(",")
            selected.append(int(parts[0]))
            if len(parts) == 3:
                los.append(float(parts[1]))
                his.append(float(parts[2]))
    with open(p("config")) as fh:
        config = config_from_text(fh.read())
    return HybridModel(
        selected_features=selected,
        encoding=encoding,
        kmeans=km.load_kmeans(p("kmeans")),
        boost=ab.load_adaboost(p("adaboost")),
        config=config,
        schema=schema,
        feature_lo=np.array(los) if los else None,
        feature_hi=np.array(his) if his else None,
    )
