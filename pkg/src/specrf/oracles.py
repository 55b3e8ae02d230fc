"""Exact reference kernels and gram-based ridge regression.

These are the ground-truth computations the random-feature pipeline is
checked against: closed-form kernel values, dense gram matrices, and the
dual-form ridge solve alpha = (K + lambda*n*I)^{-1} y.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .features import FeatureMap, designer_basis, feature_matrix, sample_feature_map

GRAM_N_CAP = 5000
PSD_TOL = 1e-10  # eigenvalues >= -PSD_TOL * trace accepted as numerical zero


class ExactKernel:
    """Symmetric positive semidefinite kernel with exact (or reference) values."""

    input_dim: int

    def pair(self, x: np.ndarray, y: np.ndarray) -> float:
        x = self._check(x)
        y = self._check(y)
        return float(self.gram(x[None, :], y[None, :])[0, 0])

    def gram(self, X: np.ndarray, Y: np.ndarray | None = None) -> np.ndarray:
        raise NotImplementedError

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.input_dim,):
            raise ValueError(f"expected dimension {self.input_dim}, got {x.shape}")
        return x

    def _check_rows(self, X: np.ndarray, n_cap: int | None = GRAM_N_CAP) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValueError(f"expected n x {self.input_dim} matrix, got {X.shape}")
        if n_cap is not None and X.shape[0] > n_cap:
            raise MemoryError(f"gram capped at n <= {n_cap}, got n = {X.shape[0]}")
        return X


class GaussianKernel(ExactKernel):
    """k(x, y) = exp(-||x - y||^2 / (2 sigma^2))."""

    def __init__(self, input_dim: int, bandwidth: float = 1.0):
        if bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        self.input_dim = input_dim
        self.bandwidth = float(bandwidth)

    def gram(self, X, Y=None):
        X = self._check_rows(X)
        Y = X if Y is None else self._check_rows(Y)
        sq = (
            np.sum(X**2, axis=1)[:, None]
            + np.sum(Y**2, axis=1)[None, :]
            - 2.0 * X @ Y.T
        )
        return np.exp(-np.maximum(sq, 0.0) / (2.0 * self.bandwidth**2))


class DesignerKernel(ExactKernel):
    """Finite-rank kernel sum_j mu_j e_j(x) e_j(y) on X = [0,1]."""

    def __init__(self, eigenvalues: np.ndarray):
        mu = np.asarray(eigenvalues, dtype=float)
        if mu.ndim != 1 or mu.size == 0 or np.any(mu <= 0):
            raise ValueError("eigenvalues must be a nonempty positive vector")
        self.input_dim = 1
        self.eigenvalues = mu
        self.rank = mu.size

    def gram(self, X, Y=None):
        X = self._check_rows(X)
        EX = designer_basis(self.rank, X[:, 0]) * np.sqrt(self.eigenvalues)
        if Y is None:
            return EX @ EX.T
        Y = self._check_rows(Y)
        EY = designer_basis(self.rank, Y[:, 0]) * np.sqrt(self.eigenvalues)
        return EX @ EY.T


class MonteCarloKernel(ExactKernel):
    """High-sample-count feature map used as a sampled reference kernel."""

    def __init__(self, feature_map: FeatureMap):
        self.input_dim = feature_map.input_dim
        self.feature_map = feature_map

    @classmethod
    def sample(cls, kind: str, input_dim: int, num_samples: int, params: dict, seed: int):
        return cls(sample_feature_map(kind, input_dim, num_samples, params, seed))

    def gram(self, X, Y=None):
        X = self._check_rows(X)
        ZX = feature_matrix(self.feature_map, X)
        if Y is None:
            return ZX @ ZX.T
        Y = self._check_rows(Y)
        return ZX @ feature_matrix(self.feature_map, Y).T


class FeatureMapKernel(MonteCarloKernel):
    """The kernel K_M induced by a given feature map (no extra sampling)."""


def check_psd(gram: np.ndarray, tol: float = PSD_TOL) -> bool:
    eigs = np.linalg.eigvalsh(gram)
    return bool(eigs.min() >= -tol * max(np.trace(gram), 1.0))


def krr_gram_fit(
    kernel: ExactKernel, X: np.ndarray, y: np.ndarray, lam: float
) -> np.ndarray:
    """Dual ridge coefficients alpha = (K + lambda*n*I)^{-1} y."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    n = X.shape[0]
    if y.size != n:
        raise ValueError("X and y length mismatch")
    K = kernel.gram(X)
    try:
        factor = cho_factor(K + lam * n * np.eye(n), lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - lam > 0 keeps this SPD
        raise RuntimeError("gram factorization failed") from exc
    return cho_solve(factor, y)


def krr_predict(
    kernel: ExactKernel, X_train: np.ndarray, alpha: np.ndarray, X_test: np.ndarray
) -> np.ndarray:
    """Evaluate x -> sum_i alpha_i k(x_i, x)."""
    return kernel.gram(np.asarray(X_test, dtype=float), np.asarray(X_train, dtype=float)) @ alpha
