"""Thompson sampling from a GP posterior via random Fourier features."""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .gp import GPModel

DEFAULT_FEATURES = 500


class RandomFeatures:
    """phi(x) = sqrt(2 s^2 / m) cos(W x + b), W ~ N(0, 1/l^2), b ~ U(0, 2 pi).

    phi(x) . phi(x') approximates the SE kernel s^2 exp(-|x - x'|^2 / 2 l^2).
    """

    def __init__(self, dim: int, n_features: int, lengthscale: float,
                 signal_var: float, rng: np.random.Generator):
        self.W = rng.standard_normal((n_features, dim)) / lengthscale
        self.b = rng.uniform(0.0, 2 * np.pi, n_features)
        self.scale = np.sqrt(2.0 * signal_var / n_features)

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return self.scale * np.cos(X @ self.W.T + self.b)


def sample_posterior_function(model: GPModel, rng: np.random.Generator,
                              n_features: int = DEFAULT_FEATURES):
    """One approximate posterior sample as a callable on [0,1]^d.

    Bayesian linear regression in feature space with prior w ~ N(0, I):
    posterior covariance noise * (Phi^T Phi + noise I)^-1.
    """
    feats = RandomFeatures(model.X.shape[1], n_features, model.lengthscale,
                           model.signal_var, rng)
    Phi = feats(model.X)
    A = Phi.T @ Phi
    A[np.diag_indices_from(A)] += model.noise_var
    L = np.linalg.cholesky(A)
    mean_w = cho_solve((L, True), Phi.T @ model.y)
    z = rng.standard_normal(n_features)
    # cov = noise * A^-1, and L^-T z has covariance A^-1
    w = mean_w + np.sqrt(model.noise_var) * solve_triangular(L.T, z, lower=False)
    return lambda X: feats(X) @ w


def thompson_next(model: GPModel, candidates, rng_seed, n_features: int = DEFAULT_FEATURES) -> int:
    """Index into ``candidates`` of the minimizer of one posterior sample."""
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    if len(candidates) == 0:
        raise ValueError("candidate pool is empty")
    if len(candidates) == 1:
        return 0
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    f = sample_posterior_function(model, rng, n_features)
    return int(np.argmin(f(candidates)))
