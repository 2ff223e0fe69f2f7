"""Gaussian-process surrogate: fitting, posteriors, and their gradients.

One GP per objective, zero prior mean, Matern-5/2 covariance with
per-dimension lengthscales, and fixed heteroskedastic observation noise
(each point carries the squared standard error of its replicate mean).
Hyperparameters are set by maximizing the log marginal likelihood with a
handful of restarts from log-uniform draws, each refined by L-BFGS-B using
the analytic gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.optimize import minimize

from .kernels import matern52_grad_x, matern52_gradients, matern52_matrix

JITTERS = (1e-10, 1e-8, 1e-6, 1e-4)

LENGTHSCALE_BOUNDS = (0.05, 4.0)
SIGNAL_VARIANCE_BOUNDS = (0.05, 20.0)


class GPError(Exception):
    pass


class InsufficientData(GPError):
    pass


class SingularCovariance(GPError):
    pass


@dataclass
class GPModel:
    """Fitted surrogate with a cached Cholesky factorization."""

    inputs: np.ndarray          # (n, d), unit-cube coordinates
    targets: np.ndarray         # (n,), standardized
    noise_variances: np.ndarray  # (n,), standardized observation noise
    lengthscales: np.ndarray    # (d,), > 0
    signal_variance: float      # > 0
    chol: np.ndarray = field(repr=False, default=None)  # lower factor of K + D + jitter I
    alpha: np.ndarray = field(repr=False, default=None)  # (K + D + jitter I)^{-1} y
    jitter: float = 0.0
    log_marginal: float = float("nan")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]


def _factorize(K: np.ndarray, noise: np.ndarray):
    """Cholesky with jitter escalation; returns (L, jitter)."""
    n = K.shape[0]
    base = K + np.diag(noise)
    for jitter in JITTERS:
        try:
            L = np.linalg.cholesky(base + jitter * np.eye(n))
            return L, jitter
        except np.linalg.LinAlgError:
            continue
    raise SingularCovariance(
        f"covariance not positive definite even at jitter {JITTERS[-1]:g}"
    )


def log_marginal_likelihood(
    X: np.ndarray,
    y: np.ndarray,
    noise: np.ndarray,
    lengthscales,
    signal_variance: float,
) -> float:
    """Marginal log-likelihood of the data under the given hyperparameters."""
    K = matern52_matrix(X, X, lengthscales, signal_variance)
    L, _ = _factorize(K, noise)
    alpha = cho_solve((L, True), y)
    return float(
        -0.5 * y @ alpha - np.log(np.diag(L)).sum() - 0.5 * len(y) * np.log(2 * np.pi)
    )


def _mll_and_grad(theta: np.ndarray, X, y, noise):
    """Negative MLL and its gradient in theta = [log l_1..log l_d, log s2]."""
    d = X.shape[1]
    ls = np.exp(theta[:d])
    s2 = float(np.exp(theta[d]))
    K, dK_ds2, dK_dls = matern52_gradients(X, ls, s2)
    try:
        L, _ = _factorize(K, noise)
    except SingularCovariance:
        return np.inf, np.zeros_like(theta)
    alpha = cho_solve((L, True), y)
    mll = -0.5 * y @ alpha - np.log(np.diag(L)).sum() - 0.5 * len(y) * np.log(2 * np.pi)
    Kinv = cho_solve((L, True), np.eye(len(y)))
    inner = np.outer(alpha, alpha) - Kinv
    grad = np.empty_like(theta)
    for k in range(d):
        grad[k] = 0.5 * np.sum(inner * dK_dls[k])
    grad[d] = 0.5 * np.sum(inner * dK_ds2)
    return -float(mll), -grad


def fit_gp(samples, seed: int | np.random.Generator = 0, n_restarts: int = 8) -> GPModel:
    """Fit hyperparameters by restarted marginal-likelihood maximization.

    `samples` is a sequence of (design vector, target, noise variance)
    triples. Conflicting duplicate inputs are only admissible with nonzero
    noise; noise-free conflicts cannot be explained by any function and are
    rejected outright.
    """
    rows = list(samples)
    if len(rows) < 2:
        raise InsufficientData(f"need at least 2 samples, got {len(rows)}")
    X = np.asarray([np.atleast_1d(np.asarray(r[0], dtype=float)) for r in rows])
    y = np.asarray([float(r[1]) for r in rows])
    noise = np.asarray([float(r[2]) for r in rows])
    if np.any(noise < 0):
        raise GPError("noise variances must be non-negative")
    _reject_noiseless_conflicts(X, y, noise)

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    d = X.shape[1]
    lo = np.log(np.array([LENGTHSCALE_BOUNDS[0]] * d + [SIGNAL_VARIANCE_BOUNDS[0]]))
    hi = np.log(np.array([LENGTHSCALE_BOUNDS[1]] * d + [SIGNAL_VARIANCE_BOUNDS[1]]))
    bounds = list(zip(lo, hi))

    best_theta, best_nll = None, np.inf
    for _ in range(n_restarts):
        theta0 = rng.uniform(lo, hi)
        res = minimize(
            _mll_and_grad,
            theta0,
            args=(X, y, noise),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": 60},
        )
        if np.isfinite(res.fun) and res.fun < best_nll:
            best_nll, best_theta = res.fun, res.x
    if best_theta is None:
        raise SingularCovariance("no hyperparameter draw produced a usable covariance")

    ls = np.exp(best_theta[:d])
    s2 = float(np.exp(best_theta[d]))
    K = matern52_matrix(X, X, ls, s2)
    L, jitter = _factorize(K, noise)
    alpha = cho_solve((L, True), y)
    return GPModel(
        inputs=X,
        targets=y,
        noise_variances=noise,
        lengthscales=ls,
        signal_variance=s2,
        chol=L,
        alpha=alpha,
        jitter=jitter,
        log_marginal=-best_nll,
    )


def _reject_noiseless_conflicts(X, y, noise) -> None:
    seen: dict[bytes, list[int]] = {}
    for i, x in enumerate(X):
        seen.setdefault(x.tobytes(), []).append(i)
    for idxs in seen.values():
        for a in idxs:
            for b in idxs:
                if a < b and y[a] != y[b] and noise[a] == 0 and noise[b] == 0:
                    raise SingularCovariance(
                        "duplicate inputs with conflicting targets and zero noise"
                    )


def gp_posterior(model: GPModel, x) -> tuple[float, float]:
    """Posterior mean and variance of the latent function at one point."""
    mean, var = gp_posterior_batch(model, np.atleast_2d(np.asarray(x, dtype=float)))
    return float(mean[0]), float(var[0])


def gp_posterior_batch(model: GPModel, X) -> tuple[np.ndarray, np.ndarray]:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Kxz = matern52_matrix(X, model.inputs, model.lengthscales, model.signal_variance)
    mean = Kxz @ model.alpha
    V = solve_triangular(model.chol, Kxz.T, lower=True)
    var = model.signal_variance - (V**2).sum(axis=0)
    return mean, np.maximum(var, 0.0)


def gp_posterior_cov(model: GPModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Joint posterior mean vector and covariance matrix at query points."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Kxz = matern52_matrix(X, model.inputs, model.lengthscales, model.signal_variance)
    Kxx = matern52_matrix(X, X, model.lengthscales, model.signal_variance)
    mean = Kxz @ model.alpha
    V = solve_triangular(model.chol, Kxz.T, lower=True)
    cov = Kxx - V.T @ V
    return mean, cov


def gp_posterior_cross(model: GPModel, A, B) -> np.ndarray:
    """Posterior covariance block cov(f(A), f(B)) given the training data."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Kab = matern52_matrix(A, B, model.lengthscales, model.signal_variance)
    Va = solve_triangular(model.chol, matern52_matrix(model.inputs, A, model.lengthscales, model.signal_variance), lower=True)
    Vb = solve_triangular(model.chol, matern52_matrix(model.inputs, B, model.lengthscales, model.signal_variance), lower=True)
    return Kab - Va.T @ Vb


def gp_posterior_gradient(model: GPModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the posterior mean and variance with respect to x."""
    x = np.asarray(x, dtype=float).ravel()
    k, J = matern52_grad_x(x, model.inputs, model.lengthscales, model.signal_variance)
    dmean = J.T @ model.alpha
    Kinv_k = cho_solve((model.chol, True), k)
    dvar = -2.0 * (J.T @ Kinv_k)
    return dmean, dvar


def with_observations(model: GPModel, X_new, y_new, noise_new) -> GPModel:
    """Model conditioned on extra observations, hyperparameters unchanged.

    Used for fantasy conditioning during sequential-greedy batch selection.
    """
    X = np.vstack([model.inputs, np.atleast_2d(np.asarray(X_new, dtype=float))])
    y = np.concatenate([model.targets, np.atleast_1d(np.asarray(y_new, dtype=float))])
    noise = np.concatenate(
        [model.noise_variances, np.atleast_1d(np.asarray(noise_new, dtype=float))]
    )
    K = matern52_matrix(X, X, model.lengthscales, model.signal_variance)
    L, jitter = _factorize(K, noise)
    alpha = cho_solve((L, True), y)
    return GPModel(
        inputs=X,
        targets=y,
        noise_variances=noise,
        lengthscales=model.lengthscales.copy(),
        signal_variance=model.signal_variance,
        chol=L,
        alpha=alpha,
        jitter=jitter,
        log_marginal=model.log_marginal,
    )
