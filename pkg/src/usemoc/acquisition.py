"""Closed-form acquisition functions and the uncertainty-box volume.

Everything is written for minimization. All functions broadcast over numpy
arrays and are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx, ndtr

from .errors import InputError

__all__ = [
    "AcquisitionKind",
    "BetaSchedule",
    "ucb",
    "lcb",
    "ei",
    "log_ei",
    "beta_t",
    "uncertainty_volume",
    "log_uncertainty_volume",
]


def _check_std(std):
    std = np.asarray(std, dtype=float)
    if np.any(std < 0):
        raise InputError("standard deviation must be non-negative")
    return std


def _check_beta(beta):
    if not np.all(np.asarray(beta) > 0):
        raise InputError("beta must be positive")


def _out(value):
    return float(value) if np.ndim(value) == 0 else value


def ucb(mean, std, beta):
    std = _check_std(std)
    _check_beta(beta)
    return _out(np.asarray(mean, dtype=float) + np.sqrt(beta) * std)


def lcb(mean, std, beta):
    std = _check_std(std)
    _check_beta(beta)
    return _out(np.asarray(mean, dtype=float) - np.sqrt(beta) * std)


def _resolvable(mean, std, tau):
    """Entries whose standardized improvement is finite; the rest (zero or
    subnormal std) take the deterministic limit."""
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        return (std > 0) & np.isfinite((tau - mean) / std)


def ei(mean, std, tau):
    """Expected improvement below the incumbent ``tau``.

    ``std == 0`` returns the deterministic improvement ``max(tau - mean, 0)``.
    """
    std = _check_std(std)
    mean = np.asarray(mean, dtype=float)
    tau = np.asarray(tau, dtype=float)
    shape = np.broadcast_shapes(mean.shape, std.shape, tau.shape)
    mean, std, tau = (np.broadcast_to(a, shape).ravel() for a in (mean, std, tau))
    out = np.maximum(tau - mean, 0.0)
    pos = _resolvable(mean, std, tau)
    if np.any(pos):
        s = std[pos]
        a = (tau[pos] - mean[pos]) / s
        with np.errstate(over="ignore"):  # exp(-inf) = 0 is the right answer
            val = s * (a * ndtr(a) + np.exp(-0.5 * a * a) / np.sqrt(2.0 * np.pi))
        out[pos] = np.maximum(val, 0.0)
    return _out(out.reshape(shape))


_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def _log_h(z):
    """``log(z Phi(z) + phi(z))`` without underflow for very negative ``z``."""
    out = np.empty_like(z)
    hi = z > -1.0
    out[hi] = np.log(z[hi] * ndtr(z[hi]) + np.exp(-0.5 * z[hi] ** 2) / np.sqrt(2.0 * np.pi))
    mid = (z <= -1.0) & (z > -30.0)
    zm = z[mid]
    # Phi(z) / phi(z) through the scaled complementary error function
    ratio = np.sqrt(np.pi / 2.0) * erfcx(-zm / np.sqrt(2.0))
    out[mid] = -0.5 * zm**2 - _LOG_SQRT_2PI + np.log1p(zm * ratio)
    lo = z <= -30.0
    zl = z[lo]
    w = 1.0 / zl**2
    out[lo] = -0.5 * zl**2 - _LOG_SQRT_2PI + np.log(w * (1.0 - 3.0 * w + 15.0 * w * w))
    return out


def log_ei(mean, std, tau):
    """Natural log of :func:`ei`, accurate where ``ei`` underflows to zero.

    Returns ``-inf`` only where the improvement is exactly zero
    (``std == 0`` and ``mean >= tau``).
    """
    std = _check_std(std)
    mean = np.asarray(mean, dtype=float)
    tau = np.asarray(tau, dtype=float)
    shape = np.broadcast_shapes(mean.shape, std.shape, tau.shape)
    mean, std, tau = (np.broadcast_to(a, shape).ravel() for a in (mean, std, tau))
    with np.errstate(divide="ignore"):
        out = np.log(np.maximum(tau - mean, 0.0))
    pos = _resolvable(mean, std, tau)
    if np.any(pos):
        s = std[pos]
        out[pos] = np.log(s) + _log_h((tau[pos] - mean[pos]) / s)
    return _out(out.reshape(shape))


@dataclass(frozen=True)
class BetaSchedule:
    """Exploration weight per iteration.

    ``mode="adaptive"`` gives ``2 log(d t^2 pi^2 / (6 delta))``;
    ``mode="fixed"`` returns ``value`` for every t.
    """

    dimension: int
    delta: float = 0.1
    mode: str = "adaptive"
    value: float | None = None

    def __post_init__(self):
        if self.mode not in ("adaptive", "fixed"):
            raise InputError(f"unknown beta mode {self.mode!r}")
        if self.mode == "fixed" and not (self.value is not None and self.value > 0):
            raise InputError("fixed beta schedule needs a positive value")
        if self.mode == "adaptive":
            if not 0 < self.delta < 1:
                raise InputError("delta must lie in (0, 1)")
            if self.dimension < 1:
                raise InputError("dimension must be >= 1")

    def __call__(self, t):
        return beta_t(self, t)


def beta_t(schedule, t):
    if t < 1:
        raise InputError("iteration index t must be >= 1")
    if schedule.mode == "fixed":
        return float(schedule.value)
    d = schedule.dimension
    return float(2.0 * np.log(d * t**2 * np.pi**2 / (6.0 * schedule.delta)))


@dataclass(frozen=True)
class AcquisitionKind:
    """Which acquisition drives the cheap problem: ``"EI"`` or ``"LCB"``."""

    variant: str = "EI"

    def __post_init__(self):
        if self.variant not in ("EI", "LCB"):
            raise InputError(f"unknown acquisition {self.variant!r}")

    def cheap_objective(self, mean, std, beta=None, tau=None):
        """Value to *minimize* in the cheap problem.

        For EI this is ``-log EI``: a strictly decreasing map of EI, so the
        Pareto set is that of negated EI, but far from the incumbent the
        values stay distinct instead of underflowing to a common zero.
        Zero improvement maps to a large finite value.
        """
        if self.variant == "EI":
            if tau is None or not np.all(np.isfinite(tau)):
                raise InputError("EI needs a finite incumbent")
            return np.minimum(-np.asarray(log_ei(mean, std, tau)), _ZERO_EI)
        return np.asarray(lcb(mean, std, beta))


_ZERO_EI = 1e300


def uncertainty_volume(stds, beta):
    """Volume of the box spanned by ``[lcb_i, ucb_i]`` across objectives.

    ``stds`` has the objective count on its last axis; a 2-d input gives one
    volume per row.
    """
    stds = _check_std(stds)
    _check_beta(beta)
    if stds.shape[-1] < 1:
        raise InputError("at least one objective is required")
    return _out(np.prod(2.0 * np.sqrt(beta) * stds, axis=-1))


def log_uncertainty_volume(stds, beta):
    """Log of :func:`uncertainty_volume`; ``-inf`` when any side is zero."""
    stds = _check_std(stds)
    _check_beta(beta)
    with np.errstate(divide="ignore"):
        return _out(np.sum(np.log(2.0 * np.sqrt(beta) * stds), axis=-1))
