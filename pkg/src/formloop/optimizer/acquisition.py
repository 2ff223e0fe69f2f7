"""Noisy expected-hypervolume-improvement acquisition and batch suggestion.

The score of a candidate is a Monte-Carlo average, over joint posterior
samples at the observed inputs, of the exact hypervolume improvement the
candidate's sampled outcome adds to the sampled (noisy) front. Base samples
are drawn once per scorer, so scores are deterministic for a fixed seed and
comparable across candidates (common random numbers).

Batches are built sequential-greedily: optimize one candidate, condition the
models on its posterior-mean fantasy at the (integer-rounded) suggestion,
then optimize the next slot against the enlarged front.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from ..clock import component_seed
from .pareto import Staircase2D, StaircaseEnsemble
from .spaces import ParameterConfiguration
from .study import ObjectiveModel, StudyState, fit_objective_models

_COV_JITTERS = (1e-12, 1e-10, 1e-8, 1e-6)


class AcquisitionError(Exception):
    pass


class ModelNotFitted(AcquisitionError):
    pass


class InsufficientData(AcquisitionError):
    pass


def _sample_chol(cov: np.ndarray) -> np.ndarray:
    n = cov.shape[0]
    for jitter in _COV_JITTERS:
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(n))
        except np.linalg.LinAlgError:
            continue
    # posterior covariance collapsed (noiseless limit); sampling is degenerate
    return np.zeros_like(cov)


class QNEHVI:
    """Monte-Carlo noisy hypervolume-improvement scorer for one batch slot.

    `models` are the per-objective surrogates, `observed` the unit-cube
    inputs whose posterior forms the uncertain front, `ref_min` the frozen
    reference point in minimization convention.
    """

    def __init__(
        self,
        models: list[ObjectiveModel],
        observed: np.ndarray,
        ref_min: np.ndarray,
        mc_samples: int = 128,
        seed: int | np.random.SeedSequence = 0,
    ):
        if mc_samples < 64:
            raise AcquisitionError("mc_samples must be at least 64")
        for m in models:
            if m.gp is None or m.gp.chol is None:
                raise ModelNotFitted(f"objective model '{m.name}' is not fitted")
        self.models = models
        self.observed = np.atleast_2d(np.asarray(observed, dtype=float))
        self.ref = np.asarray(ref_min, dtype=float)
        self.S = int(mc_samples)
        rng = np.random.default_rng(seed)

        n = self.observed.shape[0]
        self._front_samples = []  # per objective: (S, n) posterior draws, min units
        self._solves = []         # per objective: C^{-1} (F - mean)^T, shape (n, S)
        self._chols = []
        self._means = []
        self._w = []              # per objective: (S,) base normals for candidates
        for model in models:
            mean, cov = model.posterior_cov_min(self.observed)
            L = _sample_chol(cov)
            Z = rng.standard_normal((self.S, n))
            F = mean[None, :] + Z @ L.T
            self._front_samples.append(F)
            self._means.append(mean)
            self._chols.append((L, cov))
            self._w.append(rng.standard_normal(self.S))
            # beta-solve for conditional means: solve (cov+jit) X = (F - mean)^T
            self._solves.append(self._solve(cov, (F - mean[None, :]).T))
        self._staircases = [
            Staircase2D(
                np.column_stack([self._front_samples[0][s], self._front_samples[1][s]]),
                self.ref,
            )
            for s in range(self.S)
        ]
        self._ensemble = StaircaseEnsemble(self._staircases, self.ref)

    @staticmethod
    def _solve(cov: np.ndarray, B: np.ndarray) -> np.ndarray:
        n = cov.shape[0]
        for jitter in _COV_JITTERS:
            try:
                L = np.linalg.cholesky(cov + jitter * np.eye(n))
                Y = np.linalg.solve(L, B)
                return np.linalg.solve(L.T, Y)
            except np.linalg.LinAlgError:
                continue
        # degenerate covariance: conditional mean reduces to the marginal mean
        return np.zeros_like(B)

    def score_samples(self, candidates: np.ndarray) -> np.ndarray:
        """Per-sample hypervolume improvements, shape (n_candidates, S)."""
        U = np.atleast_2d(np.asarray(candidates, dtype=float))
        m = U.shape[0]
        f_cand = []
        for j, model in enumerate(self.models):
            mu, var = model.predict_min(U)
            cross = model.cross_cov_min(U, self.observed)  # (m, n)
            cond_mean = mu[:, None] + cross @ self._solves[j]  # (m, S)
            _, cov = self._chols[j]
            reduction = np.einsum("ij,ji->i", cross, self._solve(cov, cross.T))
            cond_var = np.maximum(var - reduction, 0.0)
            f = cond_mean + np.sqrt(cond_var)[:, None] * self._w[j][None, :]
            f_cand.append(f)
        return self._ensemble.hvi_grid(f_cand[0], f_cand[1])

    def scores(self, candidates: np.ndarray) -> np.ndarray:
        """Expected hypervolume improvement for each unit-cube candidate."""
        return self.score_samples(candidates).mean(axis=1)

    def scores_with_se(self, candidates: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Scores plus their Monte-Carlo standard errors."""
        samples = self.score_samples(candidates)
        return samples.mean(axis=1), samples.std(axis=1, ddof=1) / np.sqrt(self.S)


def optimize_candidate(
    acq: QNEHVI,
    dim: int,
    rng: np.random.Generator,
    n_screen: int = 128,
    n_polish: int = 3,
    polish_maxiter: int = 40,
) -> tuple[np.ndarray, float]:
    """Maximize the acquisition over the unit cube.

    Seeded uniform screening followed by Nelder-Mead polish of the best
    starts (the MC surface is piecewise-smooth, so a derivative-free local
    method is the robust choice).
    """
    screen = rng.uniform(size=(n_screen, dim))
    scores = acq.scores(screen)
    order = np.argsort(scores)[::-1]

    def negated(u):
        return -float(acq.scores(np.clip(u, 0.0, 1.0)[None, :])[0])

    best_u = screen[order[0]]
    best_score = float(scores[order[0]])
    for idx in order[:n_polish]:
        res = minimize(
            negated,
            screen[idx],
            method="Nelder-Mead",
            options={"maxiter": polish_maxiter, "xatol": 1e-3, "fatol": 1e-12},
        )
        u = np.clip(res.x, 0.0, 1.0)
        if -res.fun > best_score:
            best_score = -res.fun
            best_u = u
    return best_u, best_score


def acquisition_qnehvi(
    models: list[ObjectiveModel],
    candidates,
    observed,
    ref_min,
    mc_samples: int = 128,
    seed: int | np.random.SeedSequence = 0,
) -> np.ndarray:
    """Score candidates (unit cube) against the current noisy front."""
    acq = QNEHVI(models, observed, ref_min, mc_samples=mc_samples, seed=seed)
    return acq.scores(candidates)


def suggest_batch(
    state: StudyState,
    q: int | None = None,
    n_restarts: int = 8,
    n_screen: int = 128,
    fitted=None,
) -> list[ParameterConfiguration]:
    """Suggest the next q configurations.

    With fewer than the warm-start minimum of usable samples, the generation
    strategy falls back to random draws (phase "warm-start"); once enough
    data exist, candidates maximize the noisy hypervolume-improvement score
    sequential-greedily with posterior-mean fantasies between slots.
    Pass `fitted=(models, U_obs)` to reuse already-fitted surrogates.
    """
    q = state.batch_size if q is None else int(q)
    if q == 0:
        return []
    if q < 0:
        raise AcquisitionError("q must be non-negative")
    space = state.search_space
    usable = state.non_excluded()
    rng = np.random.default_rng(
        component_seed(state.seed, f"suggest-{len(state.completed)}")
    )
    if len(usable) < state.generation.min_model_points:
        if state.generation.n_initial <= 0 and not usable:
            raise InsufficientData(
                "no usable samples and the warm-start phase is disabled"
            )
        return space.sample_configs(q, rng)

    models, U_obs = fitted if fitted is not None else fit_objective_models(
        state, n_restarts=n_restarts
    )
    ref = state.freeze_reference()

    chosen: list[ParameterConfiguration] = []
    for slot in range(q):
        acq = QNEHVI(
            models,
            U_obs,
            ref,
            mc_samples=state.mc_samples,
            seed=component_seed(state.seed, f"acq-{len(state.completed)}-{slot}"),
        )
        u_best, _ = optimize_candidate(acq, space.dim, rng, n_screen=n_screen)
        config = space.config_from_unit(u_best)
        if any(config == c for c in chosen):
            config = _next_distinct(acq, space, rng, chosen, config, n_screen)
        chosen.append(config)
        u_round = space.unit_from_config(config)
        models = [m.fantasize(u_round) for m in models]
        U_obs = np.vstack([U_obs, u_round[None, :]])
    return chosen


def _next_distinct(acq, space, rng, chosen, fallback, n_screen):
    """Best-scoring screened candidate that rounds to an unchosen config."""
    screen = rng.uniform(size=(n_screen, space.dim))
    scores = acq.scores(screen)
    for idx in np.argsort(scores)[::-1]:
        config = space.config_from_unit(screen[idx])
        if not any(config == c for c in chosen):
            return config
    return fallback
