"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
Expect a few minutes of runtime; the closed-loop efficacy comparison alone
runs 40 short campaigns.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np
import pytest
from scipy.special import gamma as gamma_fn
from scipy.special import kv

import formloop
from formloop.analysis import CensoredAt, aggregate_batch, mean_and_se
from formloop.broker import AlreadyReserved, Broker, DuplicateResult, MemoryStore
from formloop.clock import SeededIds, SimClock
from formloop.config import StudyConfig
from formloop.optimizer import (
    QNEHVI,
    ObjectiveModel,
    Staircase2D,
    dump_results_table,
    fit_gp,
    gp_posterior,
    gp_posterior_gradient,
    load_warmstart_table,
    matern52,
    non_dominated_indices,
    pareto_front,
)
from formloop.optimizer.kernels import matern52_matrix
from formloop.orchestrator import Overlort
from formloop.broker import LocalBrokerClient
from formloop.runtime import (
    StudyRuntime,
    audit_workflow_sequencing,
    final_hypervolume,
    hypervolume_trace,
    paired_reference,
    replay_request_statuses,
    run_synthetic_campaign,
)
from tests.conftest import mc_hypervolume
from tests.test_acquisition import analytic_ehvi, make_models


def report(name: str, ok: bool, detail: str = ""):
    line = f"ACCEPTANCE {'PASS' if ok else 'FAIL'}: {name}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


# -- criterion: Pareto reproduction -------------------------------------------


def test_pareto_reproduction():
    table = load_warmstart_table(formloop.reference_campaign_path())
    started = time.monotonic()

    batches_16 = [s for s in table if s.batch_index <= 16]
    front = pareto_front(batches_16)
    members = sorted(batches_16[i].batch_index for i in front.indices)

    with_17 = [replace(s, excluded=False) for s in table]
    front_17 = pareto_front(with_17)
    members_17 = sorted(with_17[i].batch_index for i in front_17.indices)

    elapsed = time.monotonic() - started
    report(
        "pareto-reproduction",
        members == [0, 15, 16] and members_17 == [0, 15, 16, 17] and elapsed < 1.0,
        f"0-16 -> {members}, with 17 -> {members_17}, {elapsed * 1000:.0f} ms",
    )


# -- criterion: dominance/front oracle -----------------------------------------


def _oracle_front(Y: np.ndarray) -> list[int]:
    """Row-by-row O(n^2) pairwise dominance filter, independent of production."""
    out = []
    for i in range(Y.shape[0]):
        le = np.all(Y <= Y[i], axis=1)
        lt = np.any(Y < Y[i], axis=1)
        dominated = le & lt
        dominated[i] = False
        if not dominated.any():
            out.append(i)
    return out


def _oracle_front_python(Y) -> list[int]:
    from formloop.optimizer import dominates

    n = len(Y)
    return [
        i
        for i in range(n)
        if not any(j != i and dominates(Y[j], Y[i]) for j in range(n))
    ]


def test_front_oracle_1000_random_sets():
    rng = np.random.default_rng(20240501)
    mismatches = 0
    for case in range(1000):
        n = int(rng.integers(1, 201))
        m = int(rng.integers(2, 5))
        if case % 3 == 0:
            Y = rng.integers(0, 10, size=(n, m)).astype(float)  # heavy ties
        else:
            Y = rng.normal(size=(n, m))
        got = non_dominated_indices(Y)
        if got != _oracle_front(Y):
            mismatches += 1
        if case % 25 == 0 and n <= 40:
            if got != _oracle_front_python(Y):
                mismatches += 1
    report("dominance-front-oracle", mismatches == 0, "1000 sets, n<=200, 2-4 objectives")


# -- criterion: hypervolume oracle ----------------------------------------------


def test_hypervolume_oracle_50_fronts():
    failures = []
    for seed in range(50):
        rng = np.random.default_rng(seed)
        pts = rng.uniform(0.0, 1.0, size=(5, 2))
        ref = np.array([1.15, 1.15])
        exact = Staircase2D(pts, ref).hv
        estimate, se = mc_hypervolume(pts, ref, 1_000_000, np.random.default_rng(10_000 + seed))
        if abs(exact - estimate) > 3.0 * se:
            failures.append((seed, exact, estimate, se))
        # monotonicity under insertion on every case
        extra = rng.uniform(0.0, 1.1, size=2)
        grown = Staircase2D(np.vstack([pts, extra]), ref).hv
        if grown < exact - 1e-12:
            failures.append((seed, "monotonicity"))
    report(
        "hypervolume-oracle",
        not failures,
        "50 fronts x 1e6 MC samples, 3 sigma" + (f"; failures {failures[:3]}" if failures else ""),
    )


# -- criterion: kernel / GP numerics ----------------------------------------------


def _bessel_matern(d: float, nu: float = 2.5) -> float:
    if d == 0.0:
        return 1.0
    arg = math.sqrt(2 * nu) * d
    return (2.0 ** (1 - nu) / gamma_fn(nu)) * arg**nu * kv(nu, arg)


def test_kernel_and_gp_numerics():
    rng = np.random.default_rng(77)
    worst_kernel = 0.0
    for _ in range(100):
        d = rng.uniform(1e-3, 6.0)
        ell = rng.uniform(0.05, 4.0)
        s2 = rng.uniform(0.05, 20.0)
        closed = matern52([0.0], [d * ell], [ell], s2)
        worst_kernel = max(worst_kernel, abs(closed - s2 * _bessel_matern(d)))

    worst_post = 0.0
    for trial in range(10):
        X = rng.uniform(size=(6, 2))
        y = rng.normal(size=6)
        noise = rng.uniform(0.01, 0.2, 6)
        model = fit_gp(list(zip(X, y, noise)), seed=trial, n_restarts=4)
        K = (
            matern52_matrix(X, X, model.lengthscales, model.signal_variance)
            + np.diag(noise)
            + model.jitter * np.eye(6)
        )
        Kinv = np.linalg.inv(K)
        for x in rng.uniform(size=(5, 2)):
            kx = matern52_matrix(x[None], X, model.lengthscales, model.signal_variance)[0]
            mean, var = gp_posterior(model, x)
            worst_post = max(
                worst_post,
                abs(mean - kx @ Kinv @ y),
                abs(var - (model.signal_variance - kx @ Kinv @ kx)),
            )

    worst_grad = 0.0
    X = rng.uniform(size=(10, 3))
    y = rng.normal(size=10)
    model = fit_gp(list(zip(X, y, np.full(10, 0.05))), seed=1, n_restarts=4)
    eps = 1e-6
    for x in rng.uniform(0.1, 0.9, size=(20, 3)):
        dmean, dvar = gp_posterior_gradient(model, x)
        for dim in range(3):
            xp, xm = x.copy(), x.copy()
            xp[dim] += eps
            xm[dim] -= eps
            fd_m = (gp_posterior(model, xp)[0] - gp_posterior(model, xm)[0]) / (2 * eps)
            fd_v = (gp_posterior(model, xp)[1] - gp_posterior(model, xm)[1]) / (2 * eps)
            worst_grad = max(
                worst_grad,
                abs(dmean[dim] - fd_m) / max(1.0, abs(fd_m)),
                abs(dvar[dim] - fd_v) / max(1.0, abs(fd_v)),
            )

    report(
        "kernel-gp-numerics",
        worst_kernel < 1e-9 and worst_post < 1e-8 and worst_grad < 1e-4,
        f"kernel {worst_kernel:.1e}, posterior {worst_post:.1e}, gradient {worst_grad:.1e}",
    )


# -- criterion: noiseless-limit acquisition ----------------------------------------


def test_noiseless_limit_acquisition():
    failures = []
    for case in range(20):
        rng = np.random.default_rng(1000 + case)
        X = rng.uniform(size=(6, 2))
        y1 = rng.uniform(0, 1, 6)
        y2 = rng.uniform(0, 1, 6)
        models = make_models(X, y1, y2, noise=1e-12, seed=case)
        ref = np.array([2.0, 2.0])
        acq = QNEHVI(models, X, ref, mc_samples=512, seed=case)
        u = rng.uniform(size=(1, 2))
        score, se = acq.scores_with_se(u)
        mu = np.array([m.predict_min(u)[0][0] for m in models])
        sigma = np.maximum(
            np.sqrt(np.maximum([m.predict_min(u)[1][0] for m in models], 0.0)), 1e-9
        )
        exact = analytic_ehvi(np.column_stack([y1, y2]), ref, mu, sigma)
        if abs(score[0] - exact) > 3 * max(se[0], 1e-9):
            failures.append(case)
    report(
        "noiseless-limit-acquisition",
        not failures,
        "20 single-candidate cases, 3 MC standard errors"
        + (f"; failed {failures}" if failures else ""),
    )


# -- criterion: closed-loop efficacy -------------------------------------------------


def test_closed_loop_efficacy():
    started = time.monotonic()
    wins = 0
    monotone = True
    for seed in range(20):
        bo = run_synthetic_campaign(seed, "bo", iterations=10, q=3, n_cells=4)
        rnd = run_synthetic_campaign(seed, "random", iterations=10, q=3, n_cells=4)
        ref = paired_reference([bo, rnd])
        if final_hypervolume(bo, ref) >= final_hypervolume(rnd, ref):
            wins += 1
        trace = hypervolume_trace(bo)
        monotone &= all(b >= a - 1e-9 for a, b in zip(trace, trace[1:]))
    elapsed = time.monotonic() - started
    report(
        "closed-loop-efficacy",
        wins >= 18 and monotone and elapsed < 300.0,
        f"BO won {wins}/20 paired seeds, traces monotone: {monotone}, {elapsed:.0f}s",
    )


# -- criterion: protocol / state-machine suite ------------------------------------------


def test_protocol_state_machine_suite():
    # full small study for the log-based audits
    runtime = StudyRuntime(StudyConfig(seed=101, max_batches=3, batch_size=2, n_cells=3))
    runtime.setup_records()
    runtime.run()
    broker = runtime.broker

    statuses = replay_request_statuses(broker.events())  # raises on backward moves
    live = {r.request_uuid: r.status for r in broker.all_requests()}
    replay_ok = statuses == live

    one_result = all(
        broker.get_request(res.request_uuid).status == "resolved"
        for res in broker.all_results()
    )
    result_requests = [r.request_uuid for r in broker.all_results()]
    one_result &= len(result_requests) == len(set(result_requests))

    sequencing_ok = audit_workflow_sequencing(broker) >= 3

    queue_replayed = _crash_replay_matches()

    race_ok = _race_single_winner()

    report(
        "protocol-state-machine",
        replay_ok and one_result and sequencing_ok and queue_replayed and race_ok,
        f"replay={replay_ok} one-result={one_result} sequencing={sequencing_ok} "
        f"queue-replay={queue_replayed} race={race_ok}",
    )


def _crash_replay_matches() -> bool:
    runtime = StudyRuntime(StudyConfig(seed=201, max_batches=3, batch_size=3, n_cells=4))
    runtime.setup_records()
    runtime.activate()
    for _ in range(4):
        runtime.tick()
    if not runtime.overlort.queue:
        return False
    fresh = Overlort(LocalBrokerClient(runtime.broker), max_parallel=3)
    fresh.tenant_uuid = runtime.overlort.tenant_uuid
    fresh.rebuild(runtime.broker)
    live = {k: v.snapshot() for k, v in runtime.overlort.queue.items()}
    rebuilt = {k: v.snapshot() for k, v in fresh.queue.items()}
    return live == rebuilt


def _race_single_winner() -> bool:
    from formloop.broker import Capability

    broker = Broker(store=MemoryStore(), clock=SimClock(), ids=SeededIds(5))
    cap = Capability("x", "y", {"type": "object"}, {"type": "object"})
    reg = broker.register_tenant("racer", [cap])
    uuid = broker.post_request(("x", "y"), {}, reg.tenant_uuid)

    def attempt(i):
        try:
            broker.reserve_request(uuid, f"claimant-{i}")
            return 1
        except AlreadyReserved:
            return 0

    with ThreadPoolExecutor(max_workers=16) as pool:
        wins = sum(pool.map(attempt, range(16)))
    # and exactly-one-result enforcement on the winner's request
    broker.post_result(uuid, {}, {}, "claimant")
    try:
        broker.post_result(uuid, {}, {}, "claimant")
        dup_rejected = False
    except DuplicateResult:
        dup_rejected = True
    return wins == 1 and dup_rejected


# -- criterion: end-to-end determinism -----------------------------------------------


def test_end_to_end_determinism():
    tables = []
    for _ in range(2):
        runtime = StudyRuntime(StudyConfig(seed=7, max_batches=3, batch_size=3, n_cells=4))
        runtime.setup_records()
        outcome = runtime.run()
        tables.append(dump_results_table(outcome.samples).encode())
    report(
        "end-to-end-determinism",
        tables[0] == tables[1],
        f"two runs, {len(tables[0])} bytes each, bitwise equal",
    )


# -- criterion: aggregation ---------------------------------------------------------


def test_aggregation():
    values = [100.0, 110.0, 120.0, 113.0]
    mean, se = mean_and_se(values)
    # hand computation with the stated convention (sample SD over sqrt(n)):
    # SD = sqrt(206.75 / 3) = 8.3016, SE = 4.1508. (The printed 4.19 in the
    # criterion text is unreachable under its own formula; see the ledger.)
    hand_se = math.sqrt(sum((v - 110.75) ** 2 for v in values) / 3) / 2.0
    stats_ok = mean == pytest.approx(110.75) and se == pytest.approx(hand_se, abs=1e-12)
    value_ok = se == pytest.approx(4.1508, abs=5e-4)

    censored = aggregate_batch(
        [(1.0, 100.0), (1.0, 110.0), (1.0, 120.0), (1.0, CensoredAt(300))]
    )
    censored_ok = (
        censored.n_valid == 3
        and censored.eol_mean == pytest.approx(110.0)
        and any("censored" in a for a in censored.anomalies)
    )
    report(
        "aggregation",
        stats_ok and value_ok and censored_ok,
        f"mean {mean:.2f}, SE {se:.4f} (= sample SD/sqrt(4)), censored path ok",
    )
