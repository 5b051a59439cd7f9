import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import cdist

from scenclust.embedding import ClusterAssignment, Embedding
from scenclust.reduction import (Role, archetypal_analysis, furthest_point_init, max_min_sample,
                                 medoid, project_simplex_rows, reduce, solve_weights)
from scenclust.similarity import DistanceMatrix


def simplex_oracle(v):
    """Euclidean projection onto the simplex via bisection on the shift."""
    lo, hi = v.min() - 1.0, v.max()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if np.maximum(v - mid, 0).sum() > 1 else (lo, mid)
    return np.maximum(v - 0.5 * (lo + hi), 0)


@given(st.lists(st.floats(-20, 20), min_size=1, max_size=12))
def test_simplex_projection(v):
    v = np.array(v)
    p = project_simplex_rows(v[None, :])[0]
    assert np.all(p >= 0) and p.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(p, simplex_oracle(v), atol=1e-9)


def check_convex(model, X):
    for W in (model.A, model.B):
        assert np.all(W >= -1e-12)
        assert np.allclose(W.sum(axis=1), 1.0, atol=1e-9)
    assert np.allclose(model.Z, model.B @ X, atol=1e-12)


def test_triangle_recovers_vertices(rng):
    V = np.array([[0.0, 0.0], [4.0, 0.0], [1.0, 3.0]])
    W = rng.dirichlet(np.ones(3), 30)
    X = np.vstack([V, W @ V])
    model = archetypal_analysis(X, 3)
    check_convex(model, X)
    d = cdist(V, model.Z)
    assert np.all(d.min(axis=1) < 1e-3)
    assert model.rss < 1e-6


def test_m_equals_n_is_exact(rng):
    X = rng.normal(size=(4, 3))  # affinely independent with probability 1
    model = archetypal_analysis(X, 4)
    check_convex(model, X)
    assert model.rss < 1e-8


def test_rss_history_monotone(rng):
    X = rng.normal(size=(40, 3))
    model = archetypal_analysis(X, 5)
    check_convex(model, X)
    h = np.array(model.rss_history)
    assert np.all(np.diff(h) <= 1e-12 * h[:-1])
    assert model.rss == h[-1] and model.n_iter == len(h) - 1


def test_rss_non_increasing_in_m():
    for seed in range(5):
        X = np.random.default_rng(seed).normal(size=(30, 3))
        # furthest-point selection is greedy, so initializations are nested
        assert furthest_point_init(X, 4, 0) == furthest_point_init(X, 7, 0)[:4]
        rss = [archetypal_analysis(X, m, seed=0).rss for m in range(2, 7)]
        assert all(b <= a * (1 + 1e-9) for a, b in zip(rss, rss[1:]))


def test_archetype_errors_and_flag(rng):
    X = rng.normal(size=(5, 2))
    with pytest.raises(ValueError):
        archetypal_analysis(X, 6)
    model = archetypal_analysis(rng.normal(size=(30, 3)), 6, max_iter=2)
    assert model.n_iter <= 2
    assert isinstance(model.converged, bool)


def test_deterministic_given_seed(rng):
    X = rng.normal(size=(25, 3))
    a, b = archetypal_analysis(X, 4, seed=3), archetypal_analysis(X, 4, seed=3)
    assert np.array_equal(a.Z, b.Z) and a.rss == b.rss


def test_solve_weights_inside_hull():
    Z = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    A = solve_weights(np.array([[0.2, 0.3]]), Z, max_iter=2000)
    assert np.allclose(A @ Z, [[0.2, 0.3]], atol=1e-8)


def dm(points, ids=None):
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    ids = list(range(len(points))) if ids is None else ids
    return DistanceMatrix(ids, cdist(points, points))


def test_medoid_examples():
    assert medoid([7], dm([0.0], [7])) == 7
    assert medoid([0, 1, 2], dm([0.0, 1.0, 10.0])) == 1
    # two symmetric points tie; lowest id wins
    assert medoid([5, 3], dm([0.0, 1.0], [3, 5])) == 3


def test_medoid_matches_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(1, 25))
        pts = rng.normal(size=(n, 2))
        ids = [int(i) for i in rng.permutation(1000)[:n]]
        D = dm(pts, ids)
        sums = {sid: sum(D.D[i, j] for j in range(n)) for i, sid in enumerate(ids)}
        best = min(sums.values())
        want = min(sid for sid, s in sums.items() if s == best)
        assert medoid(ids, D) == want


def test_max_min_sample():
    D = cdist(*(2 * [np.array([[0.0], [1.0], [5.0], [10.0]])]))
    assert sorted(max_min_sample(D, 2)) == [0, 3]
    assert len(max_min_sample(D, 9)) == 4


def blobs(rng, sizes, spread=0.05):
    centers = np.array([[0, 0, 0], [3, 0, 0], [0, 3, 0], [0, 0, 3]], dtype=float)
    X = np.vstack([c + rng.normal(0, spread, (n, 3)) for c, n in zip(centers, sizes)])
    labels = np.concatenate([np.full(n, i) for i, n in enumerate(sizes)])
    return X, labels


def inputs(X, labels, ids=None):
    ids = list(range(100, 100 + len(X))) if ids is None else ids
    emb = Embedding(ids, X, np.ones(X.shape[1]), 1.0)
    assignment = ClusterAssignment(ids, np.asarray(labels), 0.2, 5, np.ones(len(X), bool))
    return assignment, emb, DistanceMatrix(ids, cdist(X, X))


def test_two_clusters_give_32(rng):
    X, labels = blobs(rng, [60, 60])
    out = reduce(*inputs(X, labels), per_cluster_archetypes=15, prototypes_per_cluster=1)
    assert out.total == 32
    assert sum(e.role == Role.PROTOTYPE for e in out.entries) == 2
    assert out.cluster_methods == {0: "Archetypes", 1: "Archetypes"}


def test_singleton_cluster():
    X = np.array([[0.0, 0.0, 0.0], [5.0, 5.0, 5.0]])
    with pytest.warns(UserWarning):
        out = reduce(*inputs(X, [0, -1]))
    assert out.ids == [100] and out.entries[0].role == Role.PROTOTYPE
    assert out.warnings


def test_all_noise_rejected(rng):
    X = rng.normal(size=(5, 3))
    with pytest.raises(ValueError):
        reduce(*inputs(X, [-1] * 5))


@settings(max_examples=15)
@given(st.integers(0, 10 ** 6))
def test_reduced_set_structure(seed):
    rng = np.random.default_rng(seed)
    sizes = [int(s) for s in rng.integers(1, 20, 3)]
    X, labels = blobs(rng, sizes, spread=0.3)
    labels = labels.copy()
    labels[rng.random(len(labels)) < 0.1] = -1
    if not np.any(labels >= 0):
        labels[0] = 0
    m, p = 4, 1
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = reduce(*inputs(X, labels), per_cluster_archetypes=m, prototypes_per_cluster=p)
    clusters = sorted(set(labels[labels >= 0].tolist()))
    sizes = {c: int(np.sum(labels == c)) for c in clusters}
    assert out.total <= sum(min(m, sizes[c]) + p for c in clusters)
    assert len(set(out.ids)) == out.total
    label_of = dict(zip(range(100, 100 + len(X)), labels))
    for e in out.entries:
        assert label_of[e.scenario_id] == e.cluster_id >= 0
    for c in clusters:
        assert any(e.cluster_id == c and e.role == Role.PROTOTYPE for e in out.entries)


def test_nonconvex_fallback_flag(rng):
    # a ring around a compact cluster: the ring's hull swallows the inner cluster
    t = np.linspace(0, 2 * np.pi, 20, endpoint=False)
    ring = np.vstack([np.column_stack([3 * np.cos(t), 3 * np.sin(t), np.full(20, z)])
                      for z in (-1.0, 1.0)])
    inner = rng.normal(0, 0.1, (20, 3))
    X = np.vstack([ring, inner])
    labels = np.array([0] * 40 + [1] * 20)
    out = reduce(*inputs(X, labels), per_cluster_archetypes=6)
    assert out.cluster_methods[0] == "NonConvexFallback"
    assert out.cluster_methods[1] == "Archetypes"
    off = reduce(*inputs(X, labels), per_cluster_archetypes=6, nonconvex_threshold=None)
    assert off.cluster_methods[0] == "Archetypes"


def test_json_output(rng):
    X, labels = blobs(rng, [10, 10])
    out = reduce(*inputs(X, labels), per_cluster_archetypes=3)
    data = out.to_dict({sid: [float(sid)] for sid in range(100, 120)})
    assert data["total"] == out.total == len(data["entries"])
    assert all(e["parameters"] == [float(e["scenario_id"])] for e in data["entries"])
