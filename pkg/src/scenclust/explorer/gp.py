"""Gaussian-process surrogate with a squared-exponential kernel."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

JITTER = 1e-8

DEFAULT_HYPER_GRID = {
    "lengthscale": (0.05, 0.1, 0.2, 0.4, 0.8),
    "signal_std": (0.5, 1.0, 2.0),
    "noise_std": (1e-4, 1e-2),
}


def sq_dists(X1, X2) -> np.ndarray:
    X1 = np.atleast_2d(X1)
    X2 = np.atleast_2d(X2)
    sq = (np.sum(X1 ** 2, axis=1)[:, None] + np.sum(X2 ** 2, axis=1)[None, :]
          - 2.0 * X1 @ X2.T)
    return np.maximum(sq, 0.0, out=sq)


def se_kernel(X1, X2, lengthscale: float, signal_var: float) -> np.ndarray:
    return signal_var * np.exp(-0.5 * sq_dists(X1, X2) / lengthscale ** 2)


def _lml(K: np.ndarray, y: np.ndarray) -> float:
    """Log marginal likelihood for a noisy kernel matrix K (raises if not PD)."""
    L = cho_factor(K, lower=True)
    alpha = cho_solve(L, y)
    return float(-0.5 * y @ alpha - np.log(np.diag(L[0])).sum()
                 - 0.5 * len(y) * np.log(2 * np.pi))


def standardize(y) -> tuple[np.ndarray, float, float]:
    y = np.asarray(y, dtype=float)
    mean = float(y.mean())
    std = float(y.std())
    if not std > 1e-12:
        std = 1.0
    return (y - mean) / std, mean, std


@dataclass
class GPModel:
    X: np.ndarray
    y: np.ndarray
    lengthscale: float
    signal_var: float
    noise_var: float
    y_mean: float = 0.0
    y_std: float = 1.0
    log_marginal_likelihood: float = float("nan")

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float)
        self.noise_var = max(float(self.noise_var), JITTER)
        K = se_kernel(self.X, self.X, self.lengthscale, self.signal_var)
        K[np.diag_indices_from(K)] += self.noise_var
        self._chol = cho_factor(K, lower=True)
        self._alpha = cho_solve(self._chol, self.y)

    def predict(self, Xs, return_var: bool = True):
        """Posterior mean and variance of the latent function (standardized scale)."""
        Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
        Ks = se_kernel(Xs, self.X, self.lengthscale, self.signal_var)
        mean = Ks @ self._alpha
        if not return_var:
            return mean
        v = solve_triangular(self._chol[0], Ks.T, lower=True)
        var = self.signal_var - np.sum(v ** 2, axis=0)
        return mean, np.maximum(var, 0.0)

    def lml(self) -> float:
        L = self._chol[0]
        n = len(self.y)
        return float(-0.5 * self.y @ self._alpha - np.log(np.diag(L)).sum()
                     - 0.5 * n * np.log(2 * np.pi))


def fit_gp(X, y, hyper_grid: dict | None = None, standardized: bool = False) -> GPModel:
    """Pick (lengthscale, signal std, noise std) on a grid by log marginal likelihood.

    ``y`` is standardized here unless ``standardized`` is set. Ties keep the
    first grid point in iteration order.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(y) < 1 or len(X) != len(y):
        raise ValueError("need at least one observation with matching X rows")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    if standardized:
        ys, mean, std = y, 0.0, 1.0
    else:
        ys, mean, std = standardize(y)
    grid = hyper_grid or DEFAULT_HYPER_GRID
    sq = sq_dists(X, X)
    diag = np.diag_indices(len(y))
    best, best_lml = None, -np.inf
    for ell in grid["lengthscale"]:
        base = np.exp(-0.5 * sq / ell ** 2)
        for sf, sn in itertools.product(grid["signal_std"], grid["noise_std"]):
            K = sf ** 2 * base
            K[diag] += max(sn ** 2, JITTER)
            try:
                value = _lml(K, ys)
            except np.linalg.LinAlgError:
                continue
            if best is None or value > best_lml:
                best, best_lml = (ell, sf, sn), value
    if best is None:
        raise np.linalg.LinAlgError("no hyperparameter setting gave a positive definite kernel")
    ell, sf, sn = best
    model = GPModel(X, ys, ell, sf ** 2, sn ** 2, mean, std)
    model.log_marginal_likelihood = model.lml()
    return model
