"""Confusion-matrix construction and evaluation metrics, including the
KDD99 per-sample misclassification cost."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import ClassLabel

N_CLASSES = len(ClassLabel)

# KDD99 cost matrix: rows = true class, columns = predicted class, in
# (Normal, Probe, DoS, U2R, R2L) order. Penalties for misrouting each kind
# of traffic; diagonal is zero.
DEFAULT_COST_MATRIX = np.array(
    [
        [0, 1, 2, 2, 2],
        [1, 0, 2, 2, 2],
        [2, 1, 0, 2, 2],
        [3, 2, 2, 0, 2],
        [4, 2, 2, 2, 0],
    ],
    dtype=np.float64,
)


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[i][j] = rows of true class i predicted as class j."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.shape != (N_CLASSES, N_CLASSES):
            raise ValueError(f"expected {N_CLASSES}x{N_CLASSES} counts")
        if (c < 0).any():
            raise ValueError("negative counts")
        object.__setattr__(self, "counts", c.astype(np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)


def confusion(true_labels, predicted_labels) -> ConfusionMatrix:
    t = np.asarray(true_labels, dtype=np.int64)
    p = np.asarray(predicted_labels, dtype=np.int64)
    if t.shape != p.shape:
        raise ValueError("label sequences differ in length")
    if t.size < 1:
        raise ValueError("empty label sequences")
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts)


def precision_recall_f(cm: ConfusionMatrix, cls: ClassLabel) -> tuple[float, float, float]:
    """One-vs-rest precision, recall, F-score. Zero denominators yield 0."""
    c = cm.counts
    tp = float(c[cls, cls])
    fp = float(c[:, cls].sum() - tp)
    fn = float(c[cls, :].sum() - tp)
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total < 1:
        raise ValueError("empty confusion matrix")
    return float(np.trace(cm.counts)) / cm.total


def false_positive_rate(cm: ConfusionMatrix) -> float:
    """Fraction of truly Normal rows predicted as any attack class."""
    normal_row = cm.counts[ClassLabel.NORMAL]
    total_normal = int(normal_row.sum())
    if total_normal == 0:
        raise ValueError("no Normal rows; FPR undefined")
    fp = total_normal - int(normal_row[ClassLabel.NORMAL])
    return fp / total_normal


def cost(cm: ConfusionMatrix, cost_matrix: np.ndarray | None = None) -> float:
    """Per-sample misclassification damage: (1/N) sum counts[i][j]*C[i][j]."""
    C = DEFAULT_COST_MATRIX if cost_matrix is None else np.asarray(cost_matrix, dtype=np.float64)
    if C.shape != (N_CLASSES, N_CLASSES):
        raise ValueError(f"cost matrix must be {N_CLASSES}x{N_CLASSES}")
    if cm.total < 1:
        raise ValueError("empty confusion matrix")
    return float((cm.counts * C).sum()) / cm.total


@dataclass(frozen=True)
class MetricsReport:
    """Per-class and aggregate metrics for one evaluation run.

    Macro averages are unweighted means over classes with any true or
    predicted samples; weighted averages use true-class support.
    """

    cm: ConfusionMatrix
    per_class: dict[ClassLabel, tuple[float, float, float]]
    macro_precision: float
    macro_recall: float
    macro_f: float
    weighted_precision: float
    weighted_recall: float
    weighted_f: float
    accuracy: float
    fpr: float
    cost: float
    time_seconds: float

    def summary_row(self) -> str:
        """Headline figures in report-table column order (percentages)."""
        return (
            f"{self.macro_precision * 100:.2f},{self.macro_recall * 100:.2f},"
            f"{self.macro_f * 100:.2f},{self.fpr * 100:.2f},"
            f"{self.cost:.4f},{self.time_seconds:.1f}"
        )

    def to_csv(self) -> str:
        out = ["class,precision,recall,fscore"]
        for cls, (p, r, f) in self.per_class.items():
            out.append(f"{cls.display},{p!r},{r!r},{f!r}")
        out.append(f"accuracy,{self.accuracy!r}")
        out.append(f"fpr,{self.fpr!r}")
        out.append(f"cost,{self.cost!r}")
        out.append(f"time_seconds,{self.time_seconds!r}")
        return "\n".join(out) + "\n"

    def to_text(self) -> str:
        lines = [
            f"{'class':<8} {'precision':>9} {'recall':>9} {'fscore':>9}",
        ]
        for cls, (p, r, f) in self.per_class.items():
            lines.append(f"{cls.display:<8} {p:>9.4f} {r:>9.4f} {f:>9.4f}")
        lines.append(
            f"macro    {self.macro_precision:>9.4f} {self.macro_recall:>9.4f} "
            f"{self.macro_f:>9.4f}"
        )
        lines.append(f"accuracy={self.accuracy:.4f} fpr={self.fpr:.4f} "
                     f"cost={self.cost:.4f} time={self.time_seconds:.1f}s")
        return "\n".join(lines) + "\n"


def macro_report(
    cm: ConfusionMatrix,
    cost_matrix: np.ndarray | None = None,
    time_seconds: float = 0.0,
) -> MetricsReport:
    """Aggregate all metrics for a confusion matrix.

    Classes with neither true nor predicted samples are excluded from the
    macro means. Wall-clock time is supplied by the caller.
    """
    per_class: dict[ClassLabel, tuple[float, float, float]] = {}
    present: list[ClassLabel] = []
    for cls in ClassLabel:
        prf = precision_recall_f(cm, cls)
        per_class[cls] = prf
        if cm.counts[cls, :].sum() > 0 or cm.counts[:, cls].sum() > 0:
            present.append(cls)
    if not present:
        raise ValueError("empty confusion matrix")
    macro = np.mean([per_class[c] for c in present], axis=0)
    support = cm.counts.sum(axis=1).astype(np.float64)
    weights = support / support.sum()
    weighted = np.sum(
        [np.array(per_class[c]) * weights[c] for c in ClassLabel], axis=0
    )
    try:
        fpr = false_positive_rate(cm)
    except ValueError:
        fpr = 0.0
    return MetricsReport(
        cm=cm,
        per_class=per_class,
        macro_precision=float(macro[0]),
        macro_recall=float(macro[1]),
        macro_f=float(macro[2]),
        weighted_precision=float(weighted[0]),
        weighted_recall=float(weighted[1]),
        weighted_f=float(weighted[2]),
        accuracy=accuracy(cm),
        fpr=fpr,
        cost=cost(cm, cost_matrix),
        time_seconds=time_seconds,
    )


def load_cost_matrix(path) -> np.ndarray:
    """Read a 5x5 cost matrix from comma-separated text (row per line)."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([float(v) for v in line.split(",")])
    M = np.asarray(rows, dtype=np.float64)
    if M.shape != (N_CLASSES, N_CLASSES):
        raise ValueError(f"cost matrix must be {N_CLASSES}x{N_CLASSES}, got {M.shape}")
    return M
