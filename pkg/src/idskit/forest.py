"""Bagged decision-tree ensemble with out-of-bag permutation importance.

Trees grow on bootstrap samples, splitting on the Gini impurity decrease of
m randomly drawn candidate features per node. Growth stops on purity, on a
gainless node, or when the winning feature repeats the parent node's split
feature. Feature importance is the drop in out-of-bag accuracy after
permuting one feature column.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataset import ClassLabel, Dataset

N_CLASSES = len(ClassLabel)

DEFAULT_NUM_TREES = 50
MAX_DEPTH = 64  # safety cap; the father-node rule is the paper-level stop

_LEAF = -1


def gini_impurity(class_counts) -> float:
    """1 - sum((count_c / total)^2) over classes."""
    counts = np.asarray(class_counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise ValueError("class counts sum to zero")
    p = counts / total
    return float(1.0 - np.dot(p, p))


def best_split(rows, labels, candidate_features) -> tuple[int, float, float] | None:
    """Exhaustive threshold search over the candidate features.

    Thresholds are midpoints between consecutive distinct sorted values.
    Returns (feature, threshold, gain) maximizing the Gini impurity decrease,
    or None when no split has positive gain. Ties break to the lower feature
    index, then the lower threshold.
    """
    X = np.asarray(rows, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    n = len(y)
    if n < 2:
        return None
    total_counts = np.bincount(y, minlength=N_CLASSES).astype(np.float64)
    parent = 1.0 - np.dot(total_counts / n, total_counts / n)
    if parent == 0.0:
        return None

    best: tuple[float, int, float] | None = None  # (gain, feature, threshold)
    onehot = np.eye(N_CLASSES, dtype=np.float64)
    for f in sorted(int(f) for f in candidate_features):
        vals = X[:, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        cut = np.flatnonzero(sv[1:] != sv[:-1])  # split after these positions
        if cut.size == 0:
            continue
        cum = np.cumsum(onehot[y[order]], axis=0)
        left = cum[cut]
        n_left = (cut + 1).astype(np.float64)
        right = total_counts - left
        n_right = n - n_left
        gini_l = 1.0 - (left * left).sum(axis=1) / (n_left * n_left)
        gini_r = 1.0 - (right * right).sum(axis=1) / (n_right * n_right)
        gain = parent - (n_left * gini_l + n_right * gini_r) / n
        i = int(np.argmax(gain))  # first max = lowest threshold
        if gain[i] > 0.0 and (best is None or gain[i] > best[0]):
            thr = (sv[cut[i]] + sv[cut[i] + 1]) / 2.0
            best = (float(gain[i]), f, float(thr))
    if best is None:
        return None
    return best[1], best[2], best[0]


@dataclass
class Tree:
    """Flat array representation; node 0 is the root, feature -1 marks leaves."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_label: np.ndarray
    class_counts: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def features_used(self) -> set[int]:
        return set(int(f) for f in self.feature if f != _LEAF)

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int32)
        active = np.flatnonzero(self.feature[node] != _LEAF)
        while active.size:
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] != _LEAF]
        return self.leaf_label[node]


class _TreeBuilder:
    def __init__(self, X, y, m, rng, max_depth):
        self.X = X
        self.y = y
        self.M = X.shape[1]
        self.m = m
        self.rng = rng
        self.max_depth = max_depth
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.leaf_label: list[int] = []
        self.counts: list[np.ndarray] = []

    def build(self) -> Tree:
        self._grow(np.arange(len(self.y)), parent_feature=_LEAF, depth=0)
        return self.assemble()

    def assemble(self) -> Tree:
        return Tree(
            feature=np.array(self.feature, dtype=np.int32),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int32),
            right=np.array(self.right, dtype=np.int32),
            leaf_label=np.array(self.leaf_label, dtype=np.int8),
            class_counts=np.vstack(self.counts),
        )

    def _new_node(self) -> int:
        self.feature.append(_LEAF)
        self.threshold.append(0.0)
        self.left.append(_LEAF)
        self.right.append(_LEAF)
        self.leaf_label.append(0)
        self.counts.append(np.zeros(N_CLASSES, dtype=np.int64))
        return len(self.feature) - 1

    def _grow(self, idx: np.ndarray, parent_feature: int, depth: int) -> int:
        node = self._new_node()
        y = self.y[idx]
        counts = np.bincount(y, minlength=N_CLASSES)
        self.counts[node] = counts
        self.leaf_label[node] = int(np.argmax(counts))

        if np.all(y == y[0]) or depth >= self.max_depth:
            return node
        cand = np.sort(self.rng.choice(self.M, size=self.m, replace=False))
        found = best_split(self.X[idx], y, cand)
        if found is None:
            return node
        f, thr, _gain = found
        if f == parent_feature:  # same attribute as the father node
            return node
        go_left = self.X[idx, f] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self._grow(idx[go_left], f, depth + 1)
        self.right[node] = self._grow(idx[~go_left], f, depth + 1)
        return node


@dataclass
class ForestModel:
    trees: list[Tree]
    oob_masks: list[np.ndarray]
    m: int
    M: int
    seed: int
    importance: np.ndarray | None = None


def _as_xy(data) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(data, Dataset):
        if data.labels is None:
            raise ValueError("labeled dataset required")
        return np.asfortranarray(data.matrix), np.asarray(data.labels, dtype=np.int64)
    raise TypeError("expected a Dataset")


def train_forest(
    data: Dataset,
    num_trees: int = DEFAULT_NUM_TREES,
    m: int | None = None,
    seed: int = 0,
    max_depth: int = MAX_DEPTH,
    threads: int = 1,
) -> ForestModel:
    """Grow ``num_trees`` trees, each on a bootstrap of N rows drawn with
    replacement; rows a tree never saw form its out-of-bag mask."""
    if num_trees < 1:
        raise ValueError("num_trees must be >= 1")
    X, y = _as_xy(data)
    N, M = X.shape
    if N < 2:
        raise ValueError("need at least 2 rows")
    if m is None:
        m = max(1, int(np.sqrt(M)))
    if not 1 <= m <= M:
        raise ValueError(f"m must be in [1, {M}]")

    def build_one(t: int) -> tuple[Tree, np.ndarray]:
        rng = np.random.default_rng([seed, t])
        boot = rng.integers(0, N, size=N)
        oob = np.setdiff1d(np.arange(N), boot)
        tree = _TreeBuilder(X[boot], y[boot], m, rng, max_depth).build()
        return tree, oob

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(build_one, range(num_trees)))
    else:
        results = [build_one(t) for t in range(num_trees)]
    trees = [r[0] for r in results]
    masks = [r[1] for r in results]
    return ForestModel(trees=trees, oob_masks=masks, m=m, M=M, seed=seed)


def predict_many(model: ForestModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.M:
        raise ValueError(f"expected rows of {model.M} features")
    votes = np.zeros((len(X), N_CLASSES), dtype=np.int32)
    rows = np.arange(len(X))
    for tree in model.trees:
        votes[rows, tree.predict(X)] += 1
    return np.argmax(votes, axis=1).astype(np.int8)


def predict(model: ForestModel, row) -> ClassLabel:
    """Majority vote over the trees; ties go to the lower class index."""
    row = np.asarray(row, dtype=np.float64)
    if row.shape != (model.M,):
        raise ValueError(f"expected a row of {model.M} features")
    return ClassLabel(int(predict_many(model, row[None, :])[0]))


def _oob_votes(model: ForestModel, X, per_tree_preds) -> np.ndarray:
    votes = np.zeros((len(X), N_CLASSES), dtype=np.int32)
    for mask, preds in zip(model.oob_masks, per_tree_preds):
        if mask.size:
            votes[mask, preds] += 1
    return votes


def _accuracy_from_votes(votes: np.ndarray, y: np.ndarray) -> float:
    covered = votes.sum(axis=1) > 0
    if not covered.any():
        raise ValueError("no row is out-of-bag for any tree")
    pred = np.argmax(votes[covered], axis=1)
    return float(np.mean(pred == y[covered]))


def oob_accuracy(model: ForestModel, data: Dataset) -> float:
    """Accuracy of majority votes restricted, per row, to trees that kept the
    row out of their bootstrap."""
    X, y = _as_xy(data)
    preds = [
        tree.predict(X[mask]) if mask.size else np.empty(0, dtype=np.int8)
        for tree, mask in zip(model.trees, model.oob_masks)
    ]
    return _accuracy_from_votes(_oob_votes(model, X, preds), y)


def permutation_importance(model: ForestModel, data: Dataset, seed: int = 0) -> np.ndarray:
    """Per-feature drop in OOB accuracy after one seeded permutation of that
    feature's column (clamped at zero). Stores the scores on the model."""
    X, y = _as_xy(data)
    N = len(X)
    base_preds = [
        tree.predict(X[mask]) if mask.size else np.empty(0, dtype=np.int8)
        for tree, mask in zip(model.trees, model.oob_masks)
    ]
    baseline = _accuracy_from_votes(_oob_votes(model, X, base_preds), y)
    used_by = [tree.features_used() for tree in model.trees]

    scores = np.zeros(model.M, dtype=np.float64)
    for j in range(model.M):
        perm = np.random.default_rng([seed, j]).permutation(N)
        permuted_col = X[perm, j]
        preds = []
        for t, (tree, mask) in enumerate(zip(model.trees, model.oob_masks)):
            if j not in used_by[t] or not mask.size:
                preds.append(base_preds[t])  # unchanged by this permutation
                continue
            Xt = X[mask].copy()
            Xt[:, j] = permuted_col[mask]
            preds.append(tree.predict(Xt))
        acc = _accuracy_from_votes(_oob_votes(model, X, preds), y)
        scores[j] = max(0.0, baseline - acc)
    model.importance = scores
    return scores


def select_features(importance, k: int) -> list[int]:
    """Indices of the k largest scores (ties to the lower index), ascending."""
    scores = np.asarray(importance, dtype=np.float64)
    if not 1 <= k <= len(scores):
        raise ValueError(f"k must be in [1, {len(scores)}]")
    ranked = np.argsort(-scores, kind="stable")
    return sorted(int(i) for i in ranked[:k])


def importance_report(importance, names) -> str:
    """CSV 'feature_index,feature_name,score', sorted by descending score."""
    scores = np.asarray(importance, dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    lines = ["feature_index,feature_name,score"]
    for i in order:
        lines.append(f"{i},{names[i]},{float(scores[i])!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# persistence


def save_forest(model: ForestModel, path) -> None:
    """Versioned text serialization: preorder node lines per tree; OOB masks
    are not persisted."""
    with open(path, "w") as fh:
        fh.write(f"#forest v1 trees={len(model.trees)} m={model.m} M={model.M} "
                 f"seed={model.seed}\n")
        if model.importance is not None:
            fh.write("#importance " + ",".join(repr(float(v)) for v in model.importance) + "\n")
        for t, tree in enumerate(model.trees):
            fh.write(f"tree {t}\n")
            _write_preorder(fh, tree, 0)


def _write_preorder(fh, tree: Tree, node: int) -> None:
    if tree.feature[node] == _LEAF:
        counts = " ".join(str(int(c)) for c in tree.class_counts[node])
        fh.write(f"L {int(tree.leaf_label[node])} {counts}\n")
    else:
        fh.write(f"I {int(tree.feature[node])} {float(tree.threshold[node])!r}\n")
        _write_preorder(fh, tree, int(tree.left[node]))
        _write_preorder(fh, tree, int(tree.right[node]))


def load_forest(path) -> ForestModel:
    with open(path) as fh:
        header = fh.readline().split()
        if not header or header[0] != "#forest" or header[1] != "v1":
            raise ValueError(f"{path}: unsupported forest file")
        meta = dict(kv.split("=") for kv in header[2:])
        lines = [ln.rstrip("\n") for ln in fh]
    importance = None
    if lines and lines[0].startswith("#importance "):
        importance = np.array(
            [float(v) for v in lines[0][len("#importance "):].split(",")]
        )
        lines = lines[1:]

    trees: list[Tree] = []
    pos = 0

    def read_node(builder) -> int:
        nonlocal pos
        parts = lines[pos].split()
        pos += 1
        node = builder._new_node()
        if parts[0] == "L":
            builder.leaf_label[node] = int(parts[1])
            builder.counts[node] = np.array([int(c) for c in parts[2:]], dtype=np.int64)
        elif parts[0] == "I":
            builder.feature[node] = int(parts[1])
            builder.threshold[node] = float(parts[2])
            builder.left[node] = read_node(builder)
            builder.right[node] = read_node(builder)
        else:
            raise ValueError(f"{path}: bad node line {lines[pos - 1]!r}")
        return node

    while pos < len(lines):
        if not lines[pos].startswith("tree "):
            raise ValueError(f"{path}: expected tree header at {lines[pos]!r}")
        pos += 1
        builder = _TreeBuilder(
            np.empty((0, int(meta["M"]))), np.empty(0, dtype=np.int64),
            int(meta["m"]), None, MAX_DEPTH,
        )
        read_node(builder)
        trees.append(builder.assemble())
    model = ForestModel(
        trees=trees,
        oob_masks=[np.empty(0, dtype=np.intp) for _ in trees],
        m=int(meta["m"]),
        M=int(meta["M"]),
        seed=int(meta.get("seed", 0)),
        importance=importance,
    )
    return model
