import numpy as np
import pytest

from formloop.optimizer import (
    InsufficientData,
    SingularCovariance,
    fit_gp,
    gp_posterior,
    gp_posterior_batch,
    gp_posterior_gradient,
    log_marginal_likelihood,
    with_observations,
)
from formloop.optimizer.gp import gp_posterior_cov
from formloop.optimizer.kernels import matern52_matrix


def test_noiseless_interpolation_of_linear_function():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(5, 2))
    y = 2.0 * X[:, 0] - 1.0 * X[:, 1]
    model = fit_gp([(x, t, 0.0) for x, t in zip(X, y)], seed=1)
    mean, _ = gp_posterior_batch(model, X)
    assert np.max(np.abs(mean - y)) < 1e-6


def test_duplicate_inputs_with_noise_fit_without_error():
    X = np.array([[0.2, 0.2], [0.2, 0.2], [0.8, 0.5]])
    y = np.array([1.0, 1.4, 0.3])
    model = fit_gp(list(zip(X, y, [0.1, 0.1, 0.1])), seed=0)
    assert np.isfinite(model.log_marginal)


def test_noiseless_conflicting_duplicates_rejected():
    X = np.array([[0.2, 0.2], [0.2, 0.2], [0.8, 0.5]])
    y = np.array([1.0, 1.4, 0.3])
    with pytest.raises(SingularCovariance):
        fit_gp(list(zip(X, y, [0.0, 0.0, 0.0])), seed=0)


def test_insufficient_data():
    with pytest.raises(InsufficientData):
        fit_gp([([0.0], 1.0, 0.0)], seed=0)


def test_fitted_mll_beats_100_random_draws():
    rng = np.random.default_rng(42)
    X = rng.uniform(size=(12, 2))
    y = np.sin(3 * X[:, 0]) + 0.5 * X[:, 1] + rng.normal(0, 0.05, 12)
    noise = np.full(12, 0.05**2)
    model = fit_gp(list(zip(X, y, noise)), seed=7)
    fitted_mll = log_marginal_likelihood(X, y, noise, model.lengthscales, model.signal_variance)
    for _ in range(100):
        ls = np.exp(rng.uniform(np.log(0.05), np.log(4.0), 2))
        s2 = float(np.exp(rng.uniform(np.log(0.05), np.log(20.0))))
        assert fitted_mll >= log_marginal_likelihood(X, y, noise, ls, s2) - 1e-9


def test_posterior_matches_dense_inverse_oracle():
    rng = np.random.default_rng(9)
    for trial in range(10):
        X = rng.uniform(size=(6, 2))
        y = rng.normal(size=6)
        noise = rng.uniform(0.01, 0.2, 6)
        model = fit_gp(list(zip(X, y, noise)), seed=trial)
        K = (
            matern52_matrix(X, X, model.lengthscales, model.signal_variance)
            + np.diag(noise)
            + model.jitter * np.eye(6)
        )
        Kinv = np.linalg.inv(K)
        for x in rng.uniform(size=(5, 2)):
            kx = matern52_matrix(x[None], X, model.lengthscales, model.signal_variance)[0]
            mean_oracle = kx @ Kinv @ y
            var_oracle = model.signal_variance - kx @ Kinv @ kx
            mean, var = gp_posterior(model, x)
            assert abs(mean - mean_oracle) < 1e-8
            assert abs(var - var_oracle) < 1e-8


def test_posterior_at_noiseless_training_point():
    rng = np.random.default_rng(1)
    X = rng.uniform(size=(6, 2))
    y = rng.normal(size=6)
    model = fit_gp(list(zip(X, y, np.zeros(6))), seed=2)
    mean, var = gp_posterior(model, X[3])
    assert mean == pytest.approx(y[3], abs=1e-5)
    assert var < 1e-5 * model.signal_variance


def test_prior_reversion_far_from_data():
    X = np.random.default_rng(4).uniform(size=(8, 2)) * 0.05
    y = np.random.default_rng(5).normal(size=8)
    model = fit_gp(list(zip(X, y, np.full(8, 0.01))), seed=3)
    far = np.array([50.0, -50.0])
    mean, var = gp_posterior(model, far)
    assert abs(mean) < 1e-3 * max(1.0, np.abs(y).max())
    assert abs(var - model.signal_variance) < 0.01 * model.signal_variance


def test_posterior_gradient_matches_central_differences():
    rng = np.random.default_rng(12)
    X = rng.uniform(size=(10, 3))
    y = rng.normal(size=10)
    model = fit_gp(list(zip(X, y, np.full(10, 0.05))), seed=4)
    eps = 1e-6
    for x in rng.uniform(0.1, 0.9, size=(20, 3)):
        dmean, dvar = gp_posterior_gradient(model, x)
        for dim in range(3):
            xp, xm = x.copy(), x.copy()
            xp[dim] += eps
            xm[dim] -= eps
            mp, vp = gp_posterior(model, xp)
            mm, vm = gp_posterior(model, xm)
            fd_mean = (mp - mm) / (2 * eps)
            fd_var = (vp - vm) / (2 * eps)
            scale_m = max(1.0, abs(fd_mean))
            scale_v = max(1.0, abs(fd_var))
            assert abs(dmean[dim] - fd_mean) / scale_m < 1e-4
            assert abs(dvar[dim] - fd_var) / scale_v < 1e-4


def test_posterior_cov_diagonal_matches_variance():
    rng = np.random.default_rng(21)
    X = rng.uniform(size=(7, 2))
    y = rng.normal(size=7)
    model = fit_gp(list(zip(X, y, np.full(7, 0.02))), seed=5)
    Q = rng.uniform(size=(4, 2))
    mean_b, var_b = gp_posterior_batch(model, Q)
    mean_c, cov = gp_posterior_cov(model, Q)
    assert np.allclose(mean_b, mean_c)
    assert np.allclose(np.diag(cov), var_b, atol=1e-10)
    assert np.linalg.eigvalsh(cov).min() > -1e-8


def test_fantasy_conditioning_pins_the_point():
    rng = np.random.default_rng(8)
    X = rng.uniform(size=(6, 2))
    y = rng.normal(size=6)
    model = fit_gp(list(zip(X, y, np.full(6, 0.1))), seed=6)
    x_new = np.array([0.42, 0.58])
    mean_before, _ = gp_posterior(model, x_new)
    conditioned = with_observations(model, x_new[None], [mean_before], [1e-10])
    mean_after, var_after = gp_posterior(conditioned, x_new)
    assert mean_after == pytest.approx(mean_before, abs=1e-6)
    assert var_after < 1e-6
