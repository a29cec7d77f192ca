"""Adaptive boosting of one-layer decision stumps for multi-class traffic
labeling.

Each round fits the weighted-error-optimal stump, gives it a vote weight
alpha that falls as its error rises, then boosts the weight of rows the
stump got wrong. With C classes a round only counts while its error stays
below (C - 1) / C, the multi-class no-better-than-chance bar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import ClassLabel

N_CLASSES = len(ClassLabel)

DEFAULT_NT = 5
_ALPHA_EPS = 1e-10  # caps alpha when a stump is perfect

WEIGHT_ATOL = 1e-9


@dataclass(frozen=True)
class Stump:
    """Depth-1 split: rows with value <= threshold take the left label."""

    feature_index: int
    threshold: float
    left_label: int
    right_label: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        go_left = X[:, self.feature_index] <= self.threshold
        return np.where(go_left, self.left_label, self.right_label).astype(np.int8)


@dataclass
class AdaboostModel:
    stumps: list[Stump]
    alphas: list[float]
    classes: list[int]  # label set in play, ascending
    nt: int


def train_stump(rows, labels, weights) -> tuple[Stump, float]:
    """Weighted-error-minimal stump over every feature and every midpoint
    threshold; each side predicts its weight-majority label. Ties break to
    the lower feature index, then the lower threshold."""
    X = np.asarray(rows, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    w = np.asarray(weights, dtype=np.float64)
    if len(y) < 1:
        raise ValueError("empty input")
    if (w < 0).any():
        raise ValueError("negative weights")
    if abs(w.sum() - 1.0) > WEIGHT_ATOL:
        raise ValueError("weights must sum to 1")

    class_w = np.zeros(N_CLASSES)
    np.add.at(class_w, y, w)
    majority = int(np.argmax(class_w))
    # fallback when no feature admits a split: a constant predictor
    best_stump = Stump(0, math.inf, majority, majority)
    best_err = float(w.sum() - class_w[majority])

    onehot = np.eye(N_CLASSES, dtype=np.float64)
    for f in range(X.shape[1]):
        vals = X[:, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        cut = np.flatnonzero(sv[1:] != sv[:-1])
        if cut.size == 0:
            continue
        wy = onehot[y[order]] * w[order][:, None]
        cum = np.cumsum(wy, axis=0)
        left = cum[cut]  # (cuts, C) class weight left of each threshold
        right = class_w - left
        err = (left.sum(axis=1) - left.max(axis=1)) + (
            right.sum(axis=1) - right.max(axis=1)
        )
        i = int(np.argmin(err))  # first min = lowest threshold
        if err[i] < best_err:
            best_err = float(err[i])
            thr = (sv[cut[i]] + sv[cut[i] + 1]) / 2.0
            best_stump = Stump(
                feature_index=f,
                threshold=float(thr),
                left_label=int(np.argmax(left[i])),
                right_label=int(np.argmax(right[i])),
            )
    return best_stump, max(0.0, best_err)


def alpha_for_error(e: float, n_classes: int) -> float:
    """Vote weight ln((1-e)/e) + ln(C-1); strictly decreasing in e."""
    e = max(e, _ALPHA_EPS)
    return math.log((1.0 - e) / e) + math.log(n_classes - 1)


def train_adaboost(rows, labels, nt: int = DEFAULT_NT, seed: int = 0) -> AdaboostModel:
    """Boost up to ``nt`` stumps. A round at or beyond chance error is
    discarded and training stops; a perfect round is kept with capped alpha
    and also stops training (nothing left to reweight).

    The procedure is deterministic; ``seed`` is accepted for interface
    symmetry with the other trainers.
    """
    del seed
    X = np.asarray(rows, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if nt < 1:
        raise ValueError("nt must be >= 1")
    if len(y) < 2:
        raise ValueError("need at least 2 rows")
    classes = sorted(int(c) for c in np.unique(y))
    C = len(classes)

    n = len(y)
    w = np.full(n, 1.0 / n)
    stumps: list[Stump] = []
    alphas: list[float] = []
    if C == 1:
        # degenerate single-class slice: one constant stump
        stump, _ = train_stump(X, y, w)
        return AdaboostModel(stumps=[stump], alphas=[1.0], classes=classes, nt=nt)

    chance = (C - 1) / C
    for _ in range(nt):
        stump, e = train_stump(X, y, w)
        if e >= chance:
            break  # stump discarded
        alpha = alpha_for_error(e, C)
        stumps.append(stump)
        alphas.append(alpha)
        if e == 0.0:
            break
        miss = stump.predict(X) != y
        w = w * np.exp(alpha * miss)
        w = w / w.sum()
    return AdaboostModel(stumps=stumps, alphas=alphas, classes=classes, nt=nt)


def predict_many(model: AdaboostModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if not model.stumps:
        raise ValueError("empty model")
    scores = np.zeros((len(X), N_CLASSES))
    for stump, alpha in zip(model.stumps, model.alphas):
        preds = stump.predict(X)
        scores[np.arange(len(X)), preds] += alpha
    return np.argmax(scores, axis=1).astype(np.int8)


def predict(model: AdaboostModel, row) -> ClassLabel:
    """Class with the largest alpha-weighted vote; ties to the lower index."""
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1:
        raise ValueError("expected a single feature row")
    return ClassLabel(int(predict_many(model, row[None, :])[0]))


# ---------------------------------------------------------------------------
# persistence


def save_adaboost(model: AdaboostModel, path) -> None:
    """One line per stump: feature_index threshold left right alpha."""
    with open(path, "w") as fh:
        fh.write(f"#adaboost v1 nt={model.nt} "
                 f"classes={','.join(str(c) for c in model.classes)}\n")
        for stump, alpha in zip(model.stumps, model.alphas):
            fh.write(
                f"{stump.feature_index} {stump.threshold!r} "
                f"{stump.left_label} {stump.right_label} {alpha!r}\n"
            )


def load_adaboost(path) -> AdaboostModel:
    with open(path) as fh:
        header = fh.readline().split()
        if not header or header[0] != "#adaboost" or header[1] != "v1":
            raise ValueError(f"{path}: unsupported adaboost file")
        meta = dict(kv.split("=") for kv in header[2:])
        stumps = []
        alphas = []
        for line in fh:
            f, thr, left, right, alpha = line.split()
            stumps.append(Stump(int(f), float(thr), int(left), int(right)))
            alphas.append(float(alpha))
    return AdaboostModel(
        stumps=stumps,
        alphas=alphas,
        classes=[int(c) for c in meta["classes"].split(",")],
        nt=int(meta["nt"]),
    )
