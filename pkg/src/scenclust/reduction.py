"""Archetypal analysis per cluster and medoid prototypes.

Archetypes are fitted by alternating simplex-constrained least squares
(Cutler & Breiman style): X ~ A Z with Z = B X, rows of A and B on the
probability simplex.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial.distance import cdist

logger = logging.getLogger(__name__)

DEFAULT_ARCHETYPES = 15
DEFAULT_PROTOTYPES = 1
RSS_FLOOR = 1e-10


def project_simplex_rows(V: np.ndarray) -> np.ndarray:
    """Euclidean projection of every row of V onto the probability simplex."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    n, m = V.shape
    U = -np.sort(-V, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    ind = np.arange(1, m + 1)
    cond = U - css / ind > 0
    rho = m - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(n), rho] / (rho + 1)
    return np.maximum(V - theta[:, None], 0.0)


def _mfista(W, grad_fn, objective, lipschitz, max_iter, tol=1e-12):
    """Monotone accelerated projected gradient over simplex rows (step 1/L).

    The returned iterate never has a larger objective than the input.
    """
    step = 1.0 / lipschitz
    x = W
    y = W
    f = objective(W)
    t = 1.0
    for _ in range(max_iter):
        z = project_simplex_rows(y - step * grad_fn(y))
        fz = objective(z)
        x_new = z if fz <= f else x
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x_new + (t / t_new) * (z - x_new) + ((t - 1.0) / t_new) * (x_new - x)
        decrease = f - fz
        if fz <= f:
            f = fz
        x, t = x_new, t_new
        if 0 <= decrease <= tol * max(f, 1e-300):
            break
    return x


def furthest_point_init(X: np.ndarray, m: int, seed=0) -> list[int]:
    """Greedy max-min selection; the first point is the one furthest from a
    seed-chosen random data point."""
    rng = np.random.default_rng(seed)
    n = len(X)
    start = int(rng.integers(n))
    first = int(np.argmax(np.linalg.norm(X - X[start], axis=1)))
    chosen = [first]
    dmin = np.linalg.norm(X - X[first], axis=1)
    while len(chosen) < m:
        dmin[chosen] = -1.0
        nxt = int(np.argmax(dmin))
        chosen.append(nxt)
        dmin = np.minimum(dmin, np.linalg.norm(X - X[nxt], axis=1))
    return chosen


@dataclass
class ArchetypeModel:
    cluster_id: int
    Z: np.ndarray
    A: np.ndarray
    B: np.ndarray
    rss: float
    converged: bool
    n_iter: int
    rss_history: list = field(default_factory=list)

    @property
    def m(self) -> int:
        return self.Z.shape[0]


def solve_weights(X: np.ndarray, Z: np.ndarray, A0=None, max_iter=500) -> np.ndarray:
    """Simplex-constrained least squares: rows a_i minimizing ||x_i - a_i Z||."""
    X = np.ascontiguousarray(X, dtype=float)
    Z = np.ascontiguousarray(Z, dtype=float)
    n, m = len(X), len(Z)
    A = np.full((n, m), 1.0 / m) if A0 is None else np.array(A0, dtype=float)
    L = float(np.linalg.eigvalsh(Z @ Z.T)[-1])
    if L <= 0:
        return A
    ZZt = Z @ Z.T
    XZt = X @ Z.T
    return _mfista(A, lambda W: W @ ZZt - XZt, lambda W: float(np.sum((X - W @ Z) ** 2)),
                   L, max_iter)


def archetypal_analysis(X, m: int, seed=0, max_iter: int = 500, tol: float = 1e-6,
                        cluster_id: int = 0, inner_iter: int = 50) -> ArchetypeModel:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    X = np.ascontiguousarray(X)
    n = len(X)
    if m < 1:
        raise ValueError("need at least one archetype")
    if n < m:
        raise ValueError(f"cluster has {n} points, fewer than m={m} archetypes")
    chosen = furthest_point_init(X, m, seed)
    B = np.zeros((m, n))
    B[np.arange(m), chosen] = 1.0
    Z = B @ X
    A = solve_weights(X, Z, max_iter=inner_iter)
    rss = float(np.sum((X - A @ Z) ** 2))
    history = [rss]
    # largest eigenvalue of X X^T equals that of the k x k matrix X^T X
    L_x = float(np.linalg.eigvalsh(X.T @ X)[-1])
    # rss this small relative to the scatter counts as an exact fit
    floor = RSS_FLOOR * max(float(np.sum((X - X.mean(axis=0)) ** 2)), 1e-300)
    converged = rss <= floor
    it = 0
    while not converged and it < max_iter:
        it += 1
        L = float(np.linalg.eigvalsh(A.T @ A)[-1]) * L_x
        if L > 0:
            AtA, AtX = A.T @ A, A.T @ X
            B = _mfista(B, lambda W: (AtA @ (W @ X) - AtX) @ X.T,
                        lambda W: float(np.sum((X - A @ (W @ X)) ** 2)), L, inner_iter)
        Z = B @ X
        A = solve_weights(X, Z, A0=A, max_iter=inner_iter)
        new_rss = float(np.sum((X - A @ Z) ** 2))
        history.append(new_rss)
        improvement = rss - new_rss
        rss = new_rss
        if improvement <= tol * max(rss, 1e-300) or rss <= floor:
            converged = True
    return ArchetypeModel(cluster_id, Z, A, B, rss, converged, it, history)


def medoid(members, D) -> int:
    """Member (scenario id) with the smallest distance sum to the other
    members; ties go to the lowest id.

    ``D`` is a DistanceMatrix; ``members`` are scenario ids.
    """
    members = sorted(int(m) for m in members)
    if not members:
        raise ValueError("empty cluster")
    pos = {sid: p for p, sid in enumerate(D.ids)}
    idx = np.array([pos[m] for m in members])
    sums = D.D[np.ix_(idx, idx)].sum(axis=1)
    return members[int(np.argmin(sums))]


class Role(str, Enum):
    ARCHETYPE = "Archetype"
    PROTOTYPE = "Prototype"


@dataclass
class ReducedEntry:
    scenario_id: int
    role: Role
    cluster_id: int


@dataclass
class ReducedScenarioSet:
    entries: list
    cluster_methods: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def total(self) -> int:
        return len(self.entries)

    @property
    def ids(self) -> list[int]:
        return [e.scenario_id for e in self.entries]

    def to_dict(self, parameters: dict | None = None) -> dict:
        out = []
        for e in self.entries:
            item = {"scenario_id": e.scenario_id, "role": e.role.value, "cluster_id": e.cluster_id}
            if parameters is not None:
                item["parameters"] = parameters[e.scenario_id]
            out.append(item)
        return {
            "total": self.total,
            "entries": out,
            "cluster_methods": {str(k): v for k, v in self.cluster_methods.items()},
            "warnings": list(self.warnings),
        }

    def to_json(self, parameters: dict | None = None) -> str:
        return json.dumps(self.to_dict(parameters), indent=2, sort_keys=True) + "\n"


def max_min_sample(D_sub: np.ndarray, m: int) -> list[int]:
    """The m mutually most distant members by greedy max-min selection."""
    n = len(D_sub)
    first = int(np.argmax(D_sub.sum(axis=1)))
    chosen = [first]
    dmin = D_sub[first].copy()
    while len(chosen) < min(m, n):
        dmin[chosen] = -1.0
        nxt = int(np.argmax(dmin))
        chosen.append(nxt)
        dmin = np.minimum(dmin, D_sub[nxt])
    return chosen


def hull_intrusion(model: ArchetypeModel, others: np.ndarray, rel_tol: float = 1e-3) -> int:
    """Number of non-member points lying inside the archetype hull."""
    if len(others) == 0:
        return 0
    A = solve_weights(others, model.Z)
    resid = np.linalg.norm(others - A @ model.Z, axis=1)
    scale = max(float(np.ptp(model.Z, axis=0).max()), 1e-12)
    return int(np.sum(resid <= rel_tol * scale))


def reduce(assignment, embedding, D, per_cluster_archetypes: int = DEFAULT_ARCHETYPES,
           prototypes_per_cluster: int = DEFAULT_PROTOTYPES, seed=0,
           nonconvex_threshold: float | None = 0.1) -> ReducedScenarioSet:
    """Representative scenarios: snapped archetypes plus medoid prototypes per cluster.

    A cluster whose archetype hull swallows more than ``nonconvex_threshold``
    (relative to its size) points of other clusters or noise is treated as
    non-convex; it is reduced by max-min boundary sampling instead.
    """
    labels = np.asarray(assignment.labels)
    clusters = sorted(int(c) for c in set(labels.tolist()) if c >= 0)
    if not clusters:
        raise ValueError("no non-noise cluster to reduce")
    ids = list(embedding.ids)
    X = np.asarray(embedding.coordinates)
    pos = {sid: p for p, sid in enumerate(D.ids)}
    entries, seen = [], set()
    methods, notes = {}, []

    def add(sid, role, c):
        if sid not in seen:
            seen.add(sid)
            entries.append(ReducedEntry(int(sid), role, c))

    for c in clusters:
        member_pos = np.flatnonzero(labels == c)
        member_ids = [ids[p] for p in member_pos]
        m = per_cluster_archetypes
        if len(member_pos) < m:
            msg = f"cluster {c}: {len(member_pos)} members < {m} archetypes, using {len(member_pos)}"
            warnings.warn(msg, stacklevel=2)
            notes.append(msg)
            m = len(member_pos)
        Xc = X[member_pos]
        chosen_ids = []
        method = "Archetypes"
        if m >= 1:
            model = archetypal_analysis(Xc, m, seed=seed, cluster_id=c)
            if nonconvex_threshold is not None:
                intruders = hull_intrusion(model, X[labels != c])
                if intruders > nonconvex_threshold * len(member_pos):
                    method = "NonConvexFallback"
            if method == "Archetypes":
                nearest = np.argmin(cdist(model.Z, Xc), axis=1)
                chosen_ids = [member_ids[j] for j in nearest]
            else:
                sub = D.D[np.ix_([pos[s] for s in member_ids], [pos[s] for s in member_ids])]
                chosen_ids = [member_ids[j] for j in max_min_sample(sub, m)]
        methods[c] = method
        # prototypes first so a member picked twice keeps its prototype role
        remaining = list(member_ids)
        for _ in range(prototypes_per_cluster):
            if not remaining:
                break
            proto = medoid(remaining, D)
            add(proto, Role.PROTOTYPE, c)
            remaining.remove(proto)
        for sid in chosen_ids:
            add(sid, Role.ARCHETYPE, c)
    return ReducedScenarioSet(entries, methods, notes)
