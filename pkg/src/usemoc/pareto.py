"""Pareto filtering, exact hypervolume and the simulation-gain metric.

All objective arrays are in minimization orientation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

__all__ = [
    "HypervolumeWarning",
    "ParetoArchive",
    "HypervolumeCurve",
    "dominates",
    "pareto_filter",
    "hypervolume",
    "hypervolume_curve",
    "HypervolumeTracker",
    "gain_in_simulations",
    "MAX_HV_OBJECTIVES",
]

MAX_HV_OBJECTIVES = 4


class HypervolumeWarning(UserWarning):
    pass


def dominates(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return bool(np.all(a <= b) and np.any(a < b))


def pareto_filter(Y, feasible=None):
    """Indices of the feasible, non-dominated rows of ``Y``.

    Among identical objective vectors only the earliest index is kept.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.size == 0:
        return np.array([], dtype=int)
    Y = np.atleast_2d(Y)
    n = Y.shape[0]
    feas = np.ones(n, dtype=bool) if feasible is None else np.asarray(feasible, bool)
    idx = np.flatnonzero(feas)
    if idx.size == 0:
        return idx
    F = Y[idx]
    # after a lexicographic sort a point can only be dominated (or duplicated)
    # by points that come before it
    order = np.lexsort(F.T[::-1])
    F = F[order]
    kept = np.empty((0, F.shape[1]))
    kept_idx = []
    block = 512
    for start in range(0, len(F), block):
        B = F[start : start + block]
        alive = ~np.any(np.all(kept[None, :, :] <= B[:, None, :], axis=2), axis=1)
        # weak dominance is transitive, so comparing against every earlier
        # block member (kept or not) gives the same answer
        covered = np.all(B[:, None, :] <= B[None, :, :], axis=2)
        alive &= ~np.any(np.triu(covered, k=1), axis=0)
        kept_idx.extend(start + np.flatnonzero(alive))
        kept = F[kept_idx]
    return np.sort(idx[order[kept_idx]])


def _hv2(P, ref):
    order = np.argsort(P[:, 0], kind="stable")
    P = P[order]
    best = np.minimum.accumulate(P[:, 1])
    xs = np.append(P[1:, 0], ref[0])
    return float(np.sum((xs - P[:, 0]) * (ref[1] - best)))


def _hv(P, ref):
    k = P.shape[1]
    if P.shape[0] == 0:
        return 0.0
    if k == 1:
        return float(ref[0] - P[:, 0].min())
    if k == 2:
        return _hv2(P, ref)
    # sweep along the last axis; each slab is a (k-1)-dimensional problem
    order = np.argsort(P[:, -1], kind="stable")
    P = P[order]
    z = np.append(P[1:, -1], ref[-1])
    total = 0.0
    for i in range(P.shape[0]):
        height = z[i] - P[i, -1]
        if height <= 0:
            continue
        sub = P[: i + 1, :-1]
        keep = pareto_filter(sub)
        total += _hv(sub[keep], ref[:-1]) * height
    return total


def _effective_front(front, reference):
    F = np.asarray(front, dtype=float)
    ref = np.asarray(reference, dtype=float).ravel()
    if F.size == 0:
        return np.empty((0, ref.size)), ref, 0
    F = np.atleast_2d(F)
    if F.shape[1] != ref.size:
        raise InputError(f"front has {F.shape[1]} objectives, reference {ref.size}")
    if ref.size > MAX_HV_OBJECTIVES:
        raise InputError(
            f"exact hypervolume supports at most {MAX_HV_OBJECTIVES} objectives, got {ref.size}"
        )
    inside = np.all(F < ref, axis=1)
    return F[inside], ref, int(np.sum(~inside))


def hypervolume(front, reference):
    """Exact dominated volume between ``front`` and ``reference``.

    Points that do not strictly dominate the reference are dropped and
    reported through a :class:`HypervolumeWarning`.
    """
    F, ref, excluded = _effective_front(front, reference)
    if excluded:
        warnings.warn(
            f"{excluded} point(s) do not dominate the reference point and were ignored",
            HypervolumeWarning,
            stacklevel=2,
        )
    if F.shape[0] == 0:
        return 0.0
    return _hv(F[pareto_filter(F)], ref)


@dataclass(frozen=True, eq=False)
class HypervolumeCurve:
    """Cumulative hypervolume after each evaluation (non-decreasing)."""

    values: np.ndarray
    reference: np.ndarray

    def __len__(self):
        return len(self.values)

    @property
    def final(self):
        return float(self.values[-1])


class HypervolumeTracker:
    """Running hypervolume of the feasible front as points arrive."""

    def __init__(self, reference):
        ref = np.asarray(reference, dtype=float).ravel()
        if ref.size > MAX_HV_OBJECTIVES:
            raise InputError(
                f"exact hypervolume supports at most {MAX_HV_OBJECTIVES} objectives, got {ref.size}"
            )
        self.reference = ref
        self.front = np.empty((0, ref.size))
        self.value = 0.0

    def add(self, y, feasible=True):
        y = np.asarray(y, dtype=float).ravel()
        if feasible and np.all(y < self.reference):
            if not np.any(np.all(self.front <= y, axis=1)):
                worse = np.all(y <= self.front, axis=1)
                self.front = np.vstack([self.front[~worse], y])
                self.value = _hv(self.front, self.reference)
        return self.value


def hypervolume_curve(Y, feasible, reference):
    """Hypervolume of the feasible Pareto front of ``Y[:i+1]`` for every i."""
    tracker = HypervolumeTracker(reference)
    feasible = np.asarray(feasible, dtype=bool)
    Y = np.asarray(Y, dtype=float).reshape(len(feasible), -1)
    values = np.array([tracker.add(y, f) for y, f in zip(Y, feasible)], dtype=float)
    return HypervolumeCurve(values=values, reference=tracker.reference)


def _first_reach(values, target):
    tol = 1e-12 * max(1.0, abs(target))
    hit = np.flatnonzero(np.asarray(values) >= target - tol)
    return None if hit.size == 0 else int(hit[0]) + 1


def gain_in_simulations(target_curve, baseline_curve):
    """Percentage of the baseline's evaluations saved by the target.

    The baseline's convergence point is the first evaluation at which it
    attains its final hypervolume ``v``. Returns
    ``100 * (n_baseline - n_target) / n_baseline`` where ``n_target`` is the
    first evaluation at which the target attains ``v``, or ``None`` when the
    target never does.
    """
    if len(target_curve) == 0 or len(baseline_curve) == 0:
        raise InputError("curves must be non-empty")
    if not np.array_equal(
        np.asarray(target_curve.reference), np.asarray(baseline_curve.reference)
    ):
        raise InputError("curves were computed against different reference points")
    v = baseline_curve.final
    n_b = _first_reach(baseline_curve.values, v)
    n_t = _first_reach(target_curve.values, v)
    if n_t is None:
        return None
    return 100.0 * (n_b - n_t) / n_b


@dataclass
class ParetoArchive:
    """Feasible non-dominated evaluations with their reference point."""

    X: np.ndarray
    Y: np.ndarray
    indices: np.ndarray
    reference_point: np.ndarray | None = None
    curve: HypervolumeCurve | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.indices)
