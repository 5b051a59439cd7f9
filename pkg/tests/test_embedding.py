import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import cdist

from scenclust.embedding import (center_kernel, dbscan, embed_distances, k_distance_profile,
                                 kernel_pca, median_rescale, rbf_kernel)
from scenclust.similarity import DistanceMatrix


def test_rbf_examples():
    assert np.all(rbf_kernel(np.zeros((4, 4))).K == 1.0)
    D = np.array([[0, 0.1], [0.1, 0]])
    assert rbf_kernel(D, 100.0).K[0, 1] == pytest.approx(np.exp(-1.0), abs=1e-12)
    rng = np.random.default_rng(1)
    D = cdist(*(2 * [rng.normal(size=(10, 2))]))
    assert np.allclose(rbf_kernel(D, 1e-12).K, 1.0, atol=1e-9)
    with pytest.raises(ValueError):
        rbf_kernel(D, 0.0)


def test_median_rescale():
    D = np.array([[0, 1, 4], [1, 0, 2], [4, 2, 0]], dtype=float)
    R, scale = median_rescale(D, 0.1)
    assert scale == pytest.approx(0.05)
    assert np.median(R[np.triu_indices(3, 1)]) == pytest.approx(0.1)
    same, one = median_rescale(np.zeros((3, 3)))
    assert one == 1.0 and np.all(same == 0)


def test_constant_kernel_embeds_to_origin():
    emb = kernel_pca(np.ones((6, 6)), 3)
    assert np.allclose(emb.eigenvalues, 0) and np.allclose(emb.coordinates, 0)


@given(st.integers(2, 30), st.integers(0, 10 ** 6))
def test_centered_rows_sum_to_zero(n, seed):
    A = np.random.default_rng(seed).normal(size=(n, n))
    Kc = center_kernel(A + A.T)
    assert np.allclose(Kc.sum(axis=0), 0, atol=1e-9)
    assert np.allclose(Kc.sum(axis=1), 0, atol=1e-9)


def test_full_rank_embedding_reproduces_centered_gram(rng):
    X = rng.normal(size=(12, 3))
    K = rbf_kernel(cdist(X, X), 0.5).K
    emb = kernel_pca(K, 12)
    Kc = center_kernel(K)
    assert np.allclose(emb.coordinates @ emb.coordinates.T, Kc, atol=1e-9)


def test_line_order_preserved():
    x = np.sort(np.random.default_rng(3).uniform(0, 1, 15))
    D = np.abs(x[:, None] - x[None, :])
    emb = kernel_pca(rbf_kernel(D, 0.01), 3)
    assert emb.eigenvalues[0] > 10 * emb.eigenvalues[1]
    pc1 = emb.coordinates[:, 0]
    assert np.all(np.diff(pc1) > 0) or np.all(np.diff(pc1) < 0)


def test_embed_distances_keeps_ids_and_scale(rng):
    X = rng.normal(size=(8, 2))
    dm = DistanceMatrix(list(range(10, 18)), cdist(X, X))
    emb = embed_distances(dm, k=3)
    assert emb.ids == dm.ids and emb.coordinates.shape == (8, 3)
    assert emb.scale == pytest.approx(0.1 / np.median(dm.D[np.triu_indices(8, 1)]))


def test_embedding_csv_round_trip(rng):
    X = rng.normal(size=(7, 2))
    emb = kernel_pca(rbf_kernel(cdist(X, X), 1.0), 3, ids=[5, 3, 9, 1, 2, 8, 4])
    back = type(emb).from_csv(emb.to_csv(), 1.0)
    assert back.ids == emb.ids
    assert np.array_equal(back.coordinates, emb.coordinates)
    assert np.array_equal(back.eigenvalues, emb.eigenvalues)


def test_dbscan_two_blobs(rng):
    X = np.vstack([rng.normal(0, 0.1, (20, 2)), rng.normal(10, 0.1, (20, 2))])
    res = dbscan(X, eps=0.5, min_pts=5)
    assert res.n_clusters == 2 and res.noise_fraction == 0.0
    assert len(set(res.labels[:20])) == 1 and len(set(res.labels[20:])) == 1


def test_dbscan_all_noise():
    X = np.arange(10, dtype=float)[:, None] * 3
    res = dbscan(X, eps=1.0, min_pts=2)
    assert np.all(res.labels == -1) and res.n_clusters == 0 and res.noise_fraction == 1.0


def closure_oracle(X, eps, min_pts):
    """Clusters as connected components of the core graph, borders attached
    to any core neighbour. Returns (core mask, cluster sets of cores, border options)."""
    D = cdist(X, X)
    adj = D <= eps
    core = adj.sum(axis=1) >= min_pts
    n = len(X)
    comp = -np.ones(n, dtype=int)
    c = 0
    for i in range(n):
        if core[i] and comp[i] < 0:
            # transitive closure by repeated expansion
            member = np.zeros(n, dtype=bool)
            member[i] = True
            while True:
                grown = member | (adj[member & core].any(axis=0) & core)
                if np.array_equal(grown, member):
                    break
                member = grown
            comp[member] = c
            c += 1
    options = [set(comp[adj[i] & core]) for i in range(n)]
    return core, comp, options


def test_dbscan_matches_closure_oracle():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(2, 51))
        X = rng.uniform(0, 1, (n, 2))
        eps, min_pts = float(rng.uniform(0.05, 0.3)), int(rng.integers(2, 6))
        res = dbscan(X, eps=eps, min_pts=min_pts)
        core, comp, options = closure_oracle(X, eps, min_pts)
        assert np.array_equal(res.core, core)
        # core labels equal the component partition up to renaming
        mapping = {}
        for i in np.flatnonzero(core):
            assert mapping.setdefault(comp[i], res.labels[i]) == res.labels[i]
        assert len(set(mapping.values())) == len(mapping)
        for i in np.flatnonzero(~core):
            if options[i]:
                assert res.labels[i] in {mapping[o] for o in options[i]}
            else:
                assert res.labels[i] == -1


@settings(max_examples=30)
@given(st.integers(0, 10 ** 6))
def test_dbscan_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (40, 2))
    perm = rng.permutation(40)
    a = dbscan(X, eps=0.15, min_pts=4)
    b = dbscan(X[perm], eps=0.15, min_pts=4)
    assert np.array_equal(a.core[perm], b.core)
    # same partition of core points
    pairs_a = a.labels[perm][:, None] == a.labels[perm][None, :]
    pairs_b = b.labels[:, None] == b.labels[None, :]
    both_core = b.core[:, None] & b.core[None, :]
    assert np.array_equal(pairs_a[both_core], pairs_b[both_core])
    assert np.array_equal(a.labels[perm] < 0, b.labels < 0)


def test_dbscan_on_distance_matrix_matches_points(rng):
    X = rng.uniform(0, 1, (30, 3))
    a = dbscan(X, eps=0.3, min_pts=4)
    b = dbscan(distances=cdist(X, X), eps=0.3, min_pts=4)
    assert np.array_equal(a.labels, b.labels)


def test_dbscan_bad_arguments():
    with pytest.raises(ValueError):
        dbscan(np.zeros((3, 2)), eps=0.0)
    with pytest.raises(ValueError):
        dbscan()


def test_assignment_csv_round_trip(rng):
    res = dbscan(rng.uniform(0, 1, (25, 2)), eps=0.2, min_pts=3, ids=list(range(100, 125)))
    back = type(res).from_csv(res.to_csv(), 0.2, 3)
    assert back.ids == res.ids and np.array_equal(back.labels, res.labels)


def test_k_distance_examples():
    assert np.allclose(k_distance_profile([0.0, 1.0, 2.0], 1), [1, 1, 1])
    g = np.array([[i, j] for i in range(6) for j in range(6)], dtype=float) * 0.5
    assert np.allclose(k_distance_profile(g, 1), 0.5)
    with pytest.raises(ValueError):
        k_distance_profile([0.0, 1.0], 2)


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=30), st.integers(1, 2))
def test_k_distance_non_decreasing(xs, k):
    prof = k_distance_profile(xs, k)
    assert np.all(np.diff(prof) >= 0)
