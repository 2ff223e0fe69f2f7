"""Dominance, Pareto fronts, and exact 2-D hypervolume.

All internal computation happens in minimization convention: maximized
objectives are negated up front. The hypervolume of a 2-D front is computed
exactly by a sorted sweep over the non-dominated staircase; the same
staircase supports vectorized hypervolume-improvement queries, which is what
the acquisition function spends most of its time doing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import DimensionMismatch


class ParetoError(Exception):
    pass


class EmptyInput(ParetoError):
    pass


class BadReferencePoint(ParetoError):
    pass


def _to_min(Y: np.ndarray, directions) -> np.ndarray:
    """Flip maximized columns so that smaller is better everywhere."""
    Y = np.asarray(Y, dtype=float)
    if directions is None:
        return Y.copy()
    if Y.shape[-1] != len(directions):
        raise DimensionMismatch(
            f"{Y.shape[-1]} objectives but {len(directions)} directions"
        )
    signs = np.array([1.0 if d == "min" else -1.0 for d in directions])
    return Y * signs


def dominates(y, y_prime, directions=None) -> bool:
    """True iff y is no worse everywhere and strictly better somewhere."""
    a = np.asarray(y, dtype=float)
    b = np.asarray(y_prime, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"objective vectors differ in shape: {a.shape} vs {b.shape}")
    a = _to_min(a, directions)
    b = _to_min(b, directions)
    return bool(np.all(a <= b) and np.any(a < b))


def non_dominated_indices(Y, directions=None) -> list[int]:
    """Indices of the non-dominated rows of Y, ascending.

    Duplicates of a non-dominated point are all kept (equal points do not
    dominate each other). Two objectives use a sort-based sweep; higher
    dimensions use a vectorized pairwise cull.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] == 0:
        raise EmptyInput("need a non-empty (n, m) objective matrix")
    Z = _to_min(Y, directions)
    if Z.shape[1] == 2:
        return _front_2d(Z)
    return _front_pairwise(Z)


def _front_2d(Z: np.ndarray) -> list[int]:
    order = np.lexsort((Z[:, 1], Z[:, 0]))
    keep: list[int] = []
    best_f2 = np.inf  # min f2 among points with strictly smaller f1
    i = 0
    while i < len(order):
        j = i
        while j < len(order) and Z[order[j], 0] == Z[order[i], 0]:
            j += 1
        group = order[i:j]
        group_min = Z[group, 1].min()
        if group_min < best_f2:
            keep.extend(int(g) for g in group if Z[g, 1] == group_min)
        best_f2 = min(best_f2, group_min)
        i = j
    return sorted(keep)


def _front_pairwise(Z: np.ndarray) -> list[int]:
    n = Z.shape[0]
    le = np.all(Z[:, None, :] <= Z[None, :, :], axis=-1)
    lt = np.any(Z[:, None, :] < Z[None, :, :], axis=-1)
    dominated = np.any(le & lt, axis=0)
    return [int(i) for i in range(n) if not dominated[i]]


@dataclass
class ParetoFront:
    """Non-dominated objective vectors plus the design points behind them.

    `points` are stored in the native objective units/directions; the
    reference point must be strictly worse than every front point in every
    objective.
    """

    points: list[tuple[float, ...]]
    config_refs: list
    reference_point: tuple[float, ...]
    directions: tuple[str, ...] = ("min", "max")
    indices: list[int] = field(default_factory=list)


def reference_point(Y, directions=None, margin: float = 0.1) -> np.ndarray:
    """Componentwise worst observed value plus `margin` of the observed range.

    Returned in minimization convention. Degenerate (zero-range) columns fall
    back to a unit-scale margin so the point stays strictly dominated.
    """
    Z = _to_min(np.asarray(Y, dtype=float), directions)
    worst = Z.max(axis=0)
    span = Z.max(axis=0) - Z.min(axis=0)
    pad = np.where(span > 0, margin * span, margin * np.maximum(1.0, np.abs(worst)))
    return worst + pad


def pareto_front(samples, reference=None) -> ParetoFront:
    """Front over the mean objective values of non-excluded samples.

    `samples` are ObjectiveSamples (anything with formation_time_mean,
    eol_mean, config, excluded). Excluded samples are filtered out first;
    an empty remainder is an error.
    """
    kept = [(i, s) for i, s in enumerate(samples) if not getattr(s, "excluded", False)]
    if not kept:
        raise EmptyInput("no samples left after exclusion filtering")
    directions = ("min", "max")
    Y = np.asarray(
        [[s.formation_time_mean, s.eol_mean] for _, s in kept], dtype=float
    )
    front_rows = non_dominated_indices(Y, directions)
    if reference is None:
        ref_min = reference_point(Y, directions)
    else:
        ref_min = _to_min(np.asarray(reference, dtype=float), directions)
    signs = np.array([1.0, -1.0])
    ref_native = tuple(float(v) for v in ref_min * signs)
    return ParetoFront(
        points=[tuple(float(v) for v in Y[i]) for i in front_rows],
        config_refs=[kept[i][1].config for i in front_rows],
        reference_point=ref_native,
        directions=directions,
        indices=[kept[i][0] for i in front_rows],
    )


def hypervolume(front: ParetoFront) -> float:
    """Exact dominated hypervolume of a 2-objective front."""
    if not front.points:
        return 0.0
    Y = _to_min(np.asarray(front.points, dtype=float), front.directions)
    r = _to_min(np.asarray(front.reference_point, dtype=float), front.directions)
    if Y.shape[1] != 2:
        raise ParetoError("exact sweep is 2-D only")
    if np.any(Y >= r[None, :]):
        raise BadReferencePoint(
            "reference point must be strictly worse than every front point"
        )
    return Staircase2D(Y, r).hv


def dominated_hypervolume(Y, ref, directions=None) -> float:
    """Volume dominated by any subset of Y within the reference box.

    Unlike the strict front operation, points at or beyond the reference
    simply contribute nothing; this is the form hypervolume traces use,
    where a frozen reference can be overtaken by later (worse) samples.
    """
    Z = _to_min(np.asarray(Y, dtype=float).reshape(-1, 2), directions)
    r = _to_min(np.asarray(ref, dtype=float), directions)
    return Staircase2D(Z, r).hv


class StaircaseEnsemble:
    """Many staircases sharing one reference, padded for joint hvi queries.

    Built from per-MC-sample fronts; `hvi_grid(F1, F2)` evaluates, fully
    vectorized, the improvement of candidate point (F1[c, s], F2[c, s])
    against staircase s for every candidate c and sample s.
    """

    def __init__(self, staircases: list["Staircase2D"], ref):
        self.ref = np.asarray(ref, dtype=float)
        r1 = float(self.ref[0])
        S = len(staircases)
        K = max(max((len(st.A) for st in staircases), default=0), 1)
        self.A = np.full((S, K), np.inf)
        self.B = np.full((S, K), -np.inf)
        self.R = np.full((S, K), np.inf)   # right edges of strips 1..k
        self.SW = np.zeros((S, K + 1))
        self.SWH = np.zeros((S, K + 1))
        self.hv = np.zeros(S)
        for s, st in enumerate(staircases):
            k = len(st.A)
            self.hv[s] = st.hv
            if k == 0:
                # empty staircase: one pseudo-strip spanning up to r1 at
                # height r2, so the generic path returns the plain rectangle
                self.A[s, 0] = r1
                self.R[s, 0] = r1
                continue
            self.A[s, :k] = st.A
            self.B[s, :k] = st.B
            self.R[s, : k - 1] = st.A[1:]
            self.R[s, k - 1] = r1
            self.SW[s, :k] = st._sw[:-1]
            self.SWH[s, :k] = st._swh[:-1]

    def hvi_grid(self, F1: np.ndarray, F2: np.ndarray) -> np.ndarray:
        """Improvements, shape (m, S), for per-sample candidate coordinates."""
        r1, r2 = float(self.ref[0]), float(self.ref[1])
        p = np.asarray(F1, dtype=float)
        q = np.asarray(F2, dtype=float)
        m, S = p.shape
        live = (p < r1) & (q < r2)
        p = np.where(live, p, r1)
        q = np.where(live, q, r2)
        s_idx = (self.A[None, :, :] <= p[:, :, None]).sum(axis=-1)  # (m, S)
        t = (self.B[None, :, :] > q[:, :, None]).sum(axis=-1) + 1
        gather = np.maximum(s_idx - 1, 0)[:, :, None]
        right = np.take_along_axis(np.broadcast_to(self.R, (m, S, self.R.shape[1])), gather, axis=2)[:, :, 0]
        right = np.where(s_idx == 0, self.A[None, :, 0], right)
        height = np.take_along_axis(np.broadcast_to(self.B, (m, S, self.B.shape[1])), gather, axis=2)[:, :, 0]
        height = np.where(s_idx == 0, r2, height)
        covered = t > s_idx
        partial = np.maximum(right - p, 0.0) * np.maximum(height - q, 0.0) * covered
        j1 = np.maximum(t, s_idx + 1) - 1
        sw_cols = np.broadcast_to(self.SW, (m, S, self.SW.shape[1]))
        swh_cols = np.broadcast_to(self.SWH, (m, S, self.SWH.shape[1]))
        sw = (
            np.take_along_axis(sw_cols, s_idx[:, :, None], axis=2)
            - np.take_along_axis(sw_cols, j1[:, :, None], axis=2)
        )[:, :, 0]
        swh = (
            np.take_along_axis(swh_cols, s_idx[:, :, None], axis=2)
            - np.take_along_axis(swh_cols, j1[:, :, None], axis=2)
        )[:, :, 0]
        out = partial + np.maximum(swh - q * sw, 0.0)
        return np.where(live, out, 0.0)


class Staircase2D:
    """Sorted non-dominated staircase against a reference point (min-min).

    Supports the exact dominated volume (`hv`) and vectorized hypervolume
    improvement for batches of candidate points (`hvi`). Points not strictly
    better than the reference in both objectives contribute nothing and are
    dropped at construction.
    """

    def __init__(self, points, ref):
        ref = np.asarray(ref, dtype=float)
        P = np.asarray(points, dtype=float).reshape(-1, 2)
        self.ref = ref
        if P.size:
            P = P[np.all(P < ref[None, :], axis=1)]
        if P.size:
            keep = non_dominated_indices(P)
            P = np.unique(P[keep], axis=0)  # sorts by f1 then f2
        if P.size == 0:
            self.A = np.empty(0)
            self.B = np.empty(0)
            self.hv = 0.0
            self._widths = np.empty(0)
            self._sw = np.zeros(1)
            self._swh = np.zeros(1)
            return
        # non-dominance makes f1 strictly increasing and f2 strictly decreasing
        self.A = P[:, 0]
        self.B = P[:, 1]
        rights = np.append(self.A[1:], ref[0])
        self._widths = rights - self.A
        self.hv = float((self._widths * (ref[1] - self.B)).sum())
        # suffix sums over full strips, used by the vectorized hvi query
        self._sw = np.concatenate([np.cumsum((self._widths)[::-1])[::-1], [0.0]])
        self._swh = np.concatenate(
            [np.cumsum((self._widths * self.B)[::-1])[::-1], [0.0]]
        )

    def hvi(self, candidates) -> np.ndarray:
        """Hypervolume improvement of each candidate over this staircase."""
        C = np.atleast_2d(np.asarray(candidates, dtype=float))
        p, q = C[:, 0], C[:, 1]
        r1, r2 = float(self.ref[0]), float(self.ref[1])
        out = np.zeros(len(C))
        live = (p < r1) & (q < r2)
        if not np.any(live):
            return out
        if self.A.size == 0:
            out[live] = (r1 - p[live]) * (r2 - q[live])
            return out
        p_, q_ = p[live], q[live]
        # strip containing the candidate: s == 0 means left of the first point
        s = np.searchsorted(self.A, p_, side="right")
        # first strip whose height is <= q (heights: H_0 = r2, H_j = B_j)
        # B is strictly decreasing; count the B_j > q among strips 1..k
        t = np.searchsorted(-self.B, -q_, side="left") + 1  # in H-index space
        area = np.zeros(p_.shape)
        # partial strip s: from p to its right edge, height H_s
        right_edge = np.where(s == 0, self.A[0], np.append(self.A[1:], r1)[np.maximum(s - 1, 0)])
        height_s = np.where(s == 0, r2, self.B[np.maximum(s - 1, 0)])
        partial = np.maximum(right_edge - p_, 0.0) * np.maximum(height_s - q_, 0.0)
        covered = t > s  # candidate's own strip height exceeds q
        area += np.where(covered, partial, 0.0)
        # full strips s+1 .. t-1 (all have finite widths, indices >= 1)
        j0 = np.maximum(s + 1, 1)
        j1 = np.maximum(t, j0)
        sw = self._sw[j0 - 1] - self._sw[j1 - 1]
        swh = self._swh[j0 - 1] - self._swh[j1 - 1]
        area += np.maximum(swh - q_ * sw, 0.0)
        out[live] = area
        return out
