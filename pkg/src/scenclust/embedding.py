"""RBF kernel from DTW distances, kernel PCA, and DBSCAN."""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

DEFAULT_GAMMA = 100.0
TARGET_MEDIAN = 0.1
DEFAULT_COMPONENTS = 3
DEFAULT_MIN_PTS = 5


@dataclass
class KernelMatrix:
    K: np.ndarray
    gamma: float


@dataclass
class Embedding:
    ids: list
    coordinates: np.ndarray
    eigenvalues: np.ndarray
    gamma: float
    negative_mass: float = 0.0
    scale: float = 1.0

    @property
    def k(self) -> int:
        return self.coordinates.shape[1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eigenvalues"] + [repr(float(v)) for v in self.eigenvalues])
        w.writerow(["id"] + [f"c{i + 1}" for i in range(self.k)])
        for i, row in zip(self.ids, self.coordinates):
            w.writerow([str(i)] + [repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, gamma: float = DEFAULT_GAMMA) -> "Embedding":
        rows = list(csv.reader(io.StringIO(text)))
        eig = np.array([float(v) for v in rows[0][1:]])
        body = rows[2:]
        ids = [int(r[0]) for r in body]
        coords = np.array([[float(v) for v in r[1:]] for r in body]).reshape(len(ids), len(eig))
        return cls(ids, coords, eig, gamma)


@dataclass
class ClusterAssignment:
    ids: list
    labels: np.ndarray
    eps: float
    min_pts: int
    core: np.ndarray

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) and self.labels.max() >= 0 else 0

    @property
    def noise_fraction(self) -> float:
        return float(np.mean(self.labels < 0)) if len(self.labels) else 0.0

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "label"])
        for i, lab in zip(self.ids, self.labels):
            w.writerow([str(i), str(int(lab))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, eps: float, min_pts: int) -> "ClusterAssignment":
        rows = list(csv.reader(io.StringIO(text)))[1:]
        ids = [int(r[0]) for r in rows]
        labels = np.array([int(r[1]) for r in rows], dtype=int)
        return cls(ids, labels, eps, min_pts, np.zeros(len(ids), dtype=bool))


def median_rescale(D: np.ndarray, target: float = TARGET_MEDIAN) -> tuple[np.ndarray, float]:
    """Scale D so the median off-diagonal entry equals ``target``."""
    D = np.asarray(D, dtype=float)
    iu = np.triu_indices(len(D), k=1)
    med = float(np.median(D[iu])) if iu[0].size else 0.0
    if med <= 0.0:
        return D.copy(), 1.0
    scale = target / med
    return D * scale, scale


def rbf_kernel(D, gamma: float = DEFAULT_GAMMA) -> KernelMatrix:
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    D = np.asarray(getattr(D, "D", D), dtype=float)
    K = np.exp(-gamma * D ** 2)
    np.fill_diagonal(K, 1.0)
    return KernelMatrix(K, float(gamma))


def center_kernel(K: np.ndarray) -> np.ndarray:
    """K - 1K - K1 + 1K1 with 1 the all-1/n matrix."""
    row = K.mean(axis=0, keepdims=True)
    col = K.mean(axis=1, keepdims=True)
    return K - row - col + K.mean()


def kernel_pca(K, k: int = DEFAULT_COMPONENTS, ids=None) -> Embedding:
    """Top-``k`` kernel principal coordinates, negative eigenvalues clipped to 0."""
    gamma = getattr(K, "gamma", float("nan"))
    K = np.asarray(getattr(K, "K", K), dtype=float)
    n = K.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    Kc = center_kernel(0.5 * (K + K.T))
    Kc = 0.5 * (Kc + Kc.T)
    vals, vecs = np.linalg.eigh(Kc)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    total = np.abs(vals).sum()
    negative_mass = float(-vals[vals < 0].sum() / total) if total > 0 else 0.0
    vals = np.clip(vals, 0.0, None)
    # eigenvectors are only defined up to sign; fix it for reproducible output
    for c in range(vecs.shape[1]):
        j = np.argmax(np.abs(vecs[:, c]))
        if vecs[j, c] < 0:
            vecs[:, c] = -vecs[:, c]
    coords = vecs[:, :k] * np.sqrt(vals[:k])
    ids = list(range(n)) if ids is None else list(ids)
    return Embedding(ids, coords, vals[:k], gamma, negative_mass)


def embed_distances(dm, gamma: float = DEFAULT_GAMMA, k: int = DEFAULT_COMPONENTS,
                    target_median: float | None = TARGET_MEDIAN) -> Embedding:
    """Median-rescale a DistanceMatrix, build the RBF kernel and run kernel PCA."""
    D, scale = (median_rescale(dm.D, target_median) if target_median else (dm.D, 1.0))
    emb = kernel_pca(rbf_kernel(D, gamma), min(k, dm.n), ids=dm.ids)
    emb.scale = scale
    return emb


def _neighbors(points=None, distances=None, eps=0.5):
    if distances is None:
        X = np.asarray(points, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        distances = cdist(X, X)
    distances = np.asarray(distances, dtype=float)
    return [np.flatnonzero(row <= eps) for row in distances]


def dbscan(points=None, eps: float = 0.5, min_pts: int = DEFAULT_MIN_PTS,
           distances=None, ids=None) -> ClusterAssignment:
    """DBSCAN on coordinates or on a precomputed distance matrix.

    Neighbourhoods include the point itself. Clusters are numbered in the
    order of their lowest-index core point; a border point reachable from
    several clusters joins the lowest-numbered one.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    if points is None and distances is None:
        raise ValueError("pass points or distances")
    neigh = _neighbors(points, distances, eps)
    n = len(neigh)
    core = np.array([len(nb) >= min_pts for nb in neigh], dtype=bool)
    labels = np.full(n, -1, dtype=int)
    cluster = 0
    for i in range(n):
        if not core[i] or labels[i] >= 0:
            continue
        labels[i] = cluster
        queue = deque([i])
        while queue:
            p = queue.popleft()
            for q in neigh[p]:
                if labels[q] >= 0:
                    continue
                labels[q] = cluster
                if core[q]:
                    queue.append(q)
        cluster += 1
    ids = list(range(n)) if ids is None else list(ids)
    return ClusterAssignment(ids, labels, float(eps), int(min_pts), core)


def k_distance_profile(points, k: int) -> np.ndarray:
    """Sorted distances of every point to its k-th nearest other point."""
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = len(X)
    if not 1 <= k < n:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")
    D = cdist(X, X)
    np.fill_diagonal(D, np.inf)
    return np.sort(np.sort(D, axis=1)[:, k - 1])
