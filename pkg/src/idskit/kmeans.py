"""Coarse-grained flow clustering: k-means with roulette-wheel seeding.

Seeding picks the first centroid uniformly; each further centroid is drawn
by subtracting per-point nearest-centroid distances from a uniform draw in
[0, sum of distances) until it goes negative. Distant points therefore get
proportionally more chance, and a point already chosen (distance 0) is
never picked again. Clusters are then tagged benign or anomalous from the
majority of their training labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import ClassLabel

BENIGN = "benign"
ANOMALOUS = "anomalous"

DEFAULT_K = 3
DEFAULT_MAX_ITER = 100
DEFAULT_TOL = 1e-4


@dataclass
class KMeansModel:
    centroids: np.ndarray  # (K, dim)
    dispositions: list[str] | None = None
    inertia: float = float("nan")
    inertia_history: list[float] | None = None  # one entry per assignment step

    @property
    def k(self) -> int:
        return len(self.centroids)


def _squared_distances(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def next_centroid_index(distances: np.ndarray, rng: np.random.Generator) -> int:
    """Roulette step: draw lambda in [0, sum D), subtract D(x_i) in index
    order until it falls below zero; that index is the next centroid."""
    total = float(distances.sum())
    if total <= 0.0:
        raise ValueError("all candidate distances are zero")
    lam = rng.uniform(0.0, total)
    for i, d in enumerate(distances):
        lam -= d
        if lam < 0.0:
            return i
    # lam landed inside accumulated rounding slack; last positive-mass point
    return int(np.flatnonzero(distances > 0)[-1])


def init_centroids(data, K: int, seed: int) -> np.ndarray:
    """Roulette-wheel centroid seeding over nearest-centroid distances."""
    X = _as_matrix(data)
    n = len(X)
    if K < 1:
        raise ValueError("K must be >= 1")
    if K > n:
        raise ValueError(f"K={K} exceeds the {n} available rows")
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(0, n))]
    # distance (not squared) to the nearest chosen centroid
    dist = np.sqrt(((X - X[chosen[0]]) ** 2).sum(axis=1))
    while len(chosen) < K:
        if dist.sum() > 0.0:
            idx = next_centroid_index(dist, rng)
        else:
            # only duplicates of chosen points remain
            idx = int(np.setdiff1d(np.arange(n), chosen)[0])
        chosen.append(idx)
        dist = np.minimum(dist, np.sqrt(((X - X[idx]) ** 2).sum(axis=1)))
    return X[chosen].copy()


def lloyd(
    data,
    centroids: np.ndarray,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> KMeansModel:
    """Alternate nearest-centroid assignment and mean updates until the
    largest centroid movement drops below tol or max_iter is hit.

    An emptied cluster is reseeded to the point farthest from its assigned
    centroid, keeping K constant.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    X = _as_matrix(data)
    centroids = np.array(centroids, dtype=np.float64, copy=True)
    K = len(centroids)
    history: list[float] = []
    for _ in range(max_iter):
        d2 = _squared_distances(X, centroids)
        assign = np.argmin(d2, axis=1)  # ties to the lower cluster index
        history.append(float(d2[np.arange(len(X)), assign].sum()))

        new_centroids = centroids.copy()
        empties = []
        for c in range(K):
            members = assign == c
            if members.any():
                new_centroids[c] = X[members].mean(axis=0)
            else:
                empties.append(c)
        if empties:
            point_d2 = d2[np.arange(len(X)), assign].copy()
            for c in empties:
                far = int(np.argmax(point_d2))
                new_centroids[c] = X[far]
                point_d2[far] = -1.0  # one reseed per point
        movement = np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
        centroids = new_centroids
        if movement < tol:
            break
    d2 = _squared_distances(X, centroids)
    assign = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(len(X)), assign].sum())
    history.append(inertia)
    return KMeansModel(centroids=centroids, inertia=inertia, inertia_history=history)


def assign(model: KMeansModel, row) -> int:
    """Index of the nearest centroid (squared Euclidean, tie to lower index)."""
    row = np.asarray(row, dtype=np.float64)
    if row.shape != (model.centroids.shape[1],):
        raise ValueError(
            f"expected a row of {model.centroids.shape[1]} features, got {row.shape}"
        )
    d2 = ((model.centroids - row) ** 2).sum(axis=1)
    return int(np.argmin(d2))


def assign_many(model: KMeansModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.centroids.shape[1]:
        raise ValueError(f"expected rows of {model.centroids.shape[1]} features")
    return np.argmin(_squared_distances(X, model.centroids), axis=1)


def label_clusters(model: KMeansModel, assignments, labels) -> list[str]:
    """Benign iff the cluster's majority true label is Normal; an empty
    cluster is conservatively anomalous. Stores tags on the model."""
    assignments = np.asarray(assignments)
    labels = np.asarray(labels)
    dispositions = []
    for c in range(model.k):
        member_labels = labels[assignments == c]
        if member_labels.size == 0:
            dispositions.append(ANOMALOUS)
            continue
        counts = np.bincount(member_labels, minlength=len(ClassLabel))
        majority = int(np.argmax(counts))
        dispositions.append(BENIGN if majority == ClassLabel.NORMAL else ANOMALOUS)
    model.dispositions = dispositions
    return dispositions


def train_kmeans(data, K: int = DEFAULT_K, seed: int = 0,
                 max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL) -> KMeansModel:
    """Seeding followed by Lloyd iterations."""
    return lloyd(data, init_centroids(data, K, seed), max_iter=max_iter, tol=tol)


def _as_matrix(data) -> np.ndarray:
    if hasattr(data, "matrix"):
        return data.matrix
    X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("expected a 2-D array of rows")
    return X


# ---------------------------------------------------------------------------
# persistence


def save_kmeans(model: KMeansModel, path) -> None:
    """Text block: K, one centroid row per line, then the disposition tags."""
    with open(path, "w") as fh:
        fh.write(f"{model.k}\n")
        for row in model.centroids:
            fh.write(",".join(repr(v) for v in row.tolist()) + "\n")
        tags = model.dispositions or [ANOMALOUS] * model.k
        fh.write(" ".join(tags) + "\n")
        fh.write(f"inertia {model.inertia!r}\n")


def load_kmeans(path) -> KMeansModel:
    with open(path) as fh:
        k = int(fh.readline())
        centroids = np.array(
            [[float(v) for v in fh.readline().split(",")] for _ in range(k)]
        )
        tags = fh.readline().split()
        inertia_line = fh.readline().split()
        inertia = float(inertia_line[1]) if inertia_line else float("nan")
    if len(tags) != k:
        raise ValueError(f"{path}: expected {k} disposition tags")
    for t in tags:
        if t not in (BENIGN, ANOMALOUS):
            raise ValueError(f"{path}: bad disposition {t!r}")
    return KMeansModel(centroids=centroids, dispositions=tags, inertia=inertia)
