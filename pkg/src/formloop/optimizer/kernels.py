"""Matern covariance with smoothness 5/2 and per-dimension lengthscales.

Everything the surrogate needs from the kernel lives here: pairwise
covariance matrices, analytic derivatives with respect to the log
hyperparameters (for marginal-likelihood ascent) and with respect to the
query point (for posterior gradients). The closed form at smoothness 5/2 is

    k(x, x') = s2 * (1 + sqrt(5) d + 5 d^2 / 3) * exp(-sqrt(5) d)

with d the lengthscale-weighted Euclidean distance.
"""

from __future__ import annotations

import numpy as np

SQRT5 = np.sqrt(5.0)


class DimensionMismatch(Exception):
    pass


def _as_2d(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X[None, :] if X.ndim == 1 else X


def _check_hypers(dim: int, lengthscales, signal_variance: float) -> np.ndarray:
    ls = np.asarray(lengthscales, dtype=float)
    if ls.ndim == 0:
        ls = np.full(dim, float(ls))
    if ls.shape != (dim,):
        raise DimensionMismatch(
            f"need {dim} lengthscales, got shape {ls.shape}"
        )
    if np.any(ls <= 0) or signal_variance <= 0:
        raise ValueError("lengthscales and signal variance must be strictly positive")
    return ls


def scaled_distance(X, Z, lengthscales) -> np.ndarray:
    """Pairwise lengthscale-weighted distances, shape (n, m)."""
    X, Z = _as_2d(X), _as_2d(Z)
    if X.shape[1] != Z.shape[1]:
        raise DimensionMismatch(f"dimension mismatch: {X.shape[1]} vs {Z.shape[1]}")
    ls = _check_hypers(X.shape[1], lengthscales, 1.0)
    diff = (X[:, None, :] - Z[None, :, :]) / ls
    return np.sqrt(np.maximum((diff**2).sum(axis=-1), 0.0))


def matern52(x, x_prime, lengthscales, signal_variance: float) -> float:
    """Covariance between two design vectors."""
    value = matern52_matrix(
        np.atleast_2d(np.asarray(x, dtype=float)),
        np.atleast_2d(np.asarray(x_prime, dtype=float)),
        lengthscales,
        signal_variance,
    )
    return float(value[0, 0])


def matern52_matrix(X, Z, lengthscales, signal_variance: float) -> np.ndarray:
    X, Z = _as_2d(X), _as_2d(Z)
    if X.shape[1] != Z.shape[1]:
        raise DimensionMismatch(f"dimension mismatch: {X.shape[1]} vs {Z.shape[1]}")
    _check_hypers(X.shape[1], lengthscales, signal_variance)
    d = scaled_distance(X, Z, lengthscales)
    return signal_variance * (1.0 + SQRT5 * d + 5.0 * d**2 / 3.0) * np.exp(-SQRT5 * d)


def matern52_gradients(X, lengthscales, signal_variance: float):
    """Kernel matrix and its derivatives w.r.t. log hyperparameters.

    Returns (K, dK/dlog(s2), [dK/dlog(l_k) for each dimension k]). The
    per-lengthscale derivative has the d-free form

        dK/dlog(l_k) = s2 * (5/3) (1 + sqrt(5) d) exp(-sqrt(5) d) * (u_k/l_k)^2

    (u_k the coordinate difference), so it is exact at coincident points.
    """
    X = _as_2d(X)
    ls = _check_hypers(X.shape[1], lengthscales, signal_variance)
    d = scaled_distance(X, X, ls)
    decay = np.exp(-SQRT5 * d)
    K = signal_variance * (1.0 + SQRT5 * d + 5.0 * d**2 / 3.0) * decay
    base = signal_variance * (5.0 / 3.0) * (1.0 + SQRT5 * d) * decay
    grads = []
    for k in range(X.shape[1]):
        u2 = ((X[:, None, k] - X[None, :, k]) / ls[k]) ** 2
        grads.append(base * u2)
    return K, K.copy(), grads


def matern52_grad_x(x, Z, lengthscales, signal_variance: float):
    """Cross-covariance vector k(x, Z) and its Jacobian w.r.t. x.

    Returns (k, J) with k of shape (m,) and J of shape (m, dim);
    J[i, k] = d k(x, z_i) / d x_k = -(5 s2 / 3)(1 + sqrt(5) d) e^{-sqrt(5) d}
              (x_k - z_ik) / l_k^2.
    """
    x = np.asarray(x, dtype=float).ravel()
    Z = _as_2d(Z)
    if x.shape[0] != Z.shape[1]:
        raise DimensionMismatch(f"dimension mismatch: {x.shape[0]} vs {Z.shape[1]}")
    ls = _check_hypers(x.shape[0], lengthscales, signal_variance)
    d = scaled_distance(x, Z, ls)[0]
    decay = np.exp(-SQRT5 * d)
    k = signal_variance * (1.0 + SQRT5 * d + 5.0 * d**2 / 3.0) * decay
    base = -(5.0 * signal_variance / 3.0) * (1.0 + SQRT5 * d) * decay
    J = base[:, None] * (x[None, :] - Z) / ls[None, :] ** 2
    return k, J
