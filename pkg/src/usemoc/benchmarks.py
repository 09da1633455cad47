"""Constrained multi-objective test problems.

BNH, SRN and TNK follow their usual published definitions. ``mock_vr`` is
a synthetic stand-in for a switched-capacitor voltage regulator: 32 design
variables (8 capacitors x (W, L, M), 4 reference voltages, 4 loads), nine
objectives and ten constraints, one of them the closed-form total
capacitance band.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .engine import BLACKBOX, COMPOSITE, WHITEBOX, ConstraintSpec, ProblemSpec
from .errors import ConfigurationError, InputError
from .pareto import pareto_filter

__all__ = [
    "BenchmarkProblem",
    "BENCHMARKS",
    "get_benchmark",
    "evaluate_benchmark",
    "make_problem",
    "capacitance",
]


@dataclass(frozen=True, eq=False)
class BenchmarkProblem:
    """Closed-form problem with vectorized objectives and constraints.

    ``objectives(X)`` and each entry of ``constraints`` accept a ``d``-vector
    or an ``(n, d)`` array. ``reference_point`` is in minimization
    orientation; it is None where exact hypervolume does not apply.
    """

    name: str
    bounds: np.ndarray
    objective_names: tuple[str, ...]
    objectives: Callable
    constraint_names: tuple[str, ...]
    constraints: tuple[Callable, ...]
    senses: tuple[str, ...] = ()
    reference_point: np.ndarray | None = None
    pareto_front: Callable[[int], np.ndarray] | None = None
    # names of the objectives each composite constraint reads; empty -> x only
    constraint_uses: tuple[tuple[str, ...], ...] = ()
    options: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.bounds.shape[0]

    def check_inside(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise InputError(f"{self.name} expects {self.dim} inputs, got {x.shape[-1]}")
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        if np.any(x < lo) or np.any(x > hi) or not np.all(np.isfinite(x)):
            raise InputError(f"x lies outside the {self.name} box")
        return x

    def evaluate(self, x):
        """Objective values (natural sense) and all constraint values."""
        x = self.check_inside(x)
        Y = np.asarray(self.objectives(x), dtype=float)
        named = dict(zip(self.objective_names, np.moveaxis(Y, -1, 0)))
        C = []
        for g, uses in zip(self.constraints, self._uses()):
            C.append(g(x, {u: named[u] for u in uses}) if uses else g(x))
        C = np.asarray(C, dtype=float)
        return Y, np.moveaxis(C, 0, -1) if C.ndim > 1 else C

    def _uses(self):
        return self.constraint_uses or ((),) * len(self.constraints)


# -- BNH -------------------------------------------------------------------


def _bnh_f(x):
    x = np.asarray(x, dtype=float)
    f1 = 4.0 * x[..., 0] ** 2 + 4.0 * x[..., 1] ** 2
    f2 = (x[..., 0] - 5.0) ** 2 + (x[..., 1] - 5.0) ** 2
    return np.stack([f1, f2], axis=-1)


def _bnh_g1(x):
    return (x[..., 0] - 5.0) ** 2 + x[..., 1] ** 2 - 25.0


def _bnh_g2(x):
    return 7.7 - (x[..., 0] - 8.0) ** 2 - (x[..., 1] + 3.0) ** 2


def _bnh_front(n):
    a = np.linspace(0.0, 3.0, n // 2)
    b = np.linspace(3.0, 5.0, n - n // 2)
    X = np.vstack([np.column_stack([a, a]), np.column_stack([b, np.full_like(b, 3.0)])])
    return _bnh_f(X)


# -- SRN -------------------------------------------------------------------


def _srn_f(x):
    x = np.asarray(x, dtype=float)
    f1 = 2.0 + (x[..., 0] - 2.0) ** 2 + (x[..., 1] - 1.0) ** 2
    f2 = 9.0 * x[..., 0] - (x[..., 1] - 1.0) ** 2
    return np.stack([f1, f2], axis=-1)


def _srn_g1(x):
    return x[..., 0] ** 2 + x[..., 1] ** 2 - 225.0


def _srn_g2(x):
    return x[..., 0] - 3.0 * x[..., 1] + 10.0


def _srn_front(n):
    # Stationarity puts the interior of the front at x1 = -2.5; it extends
    # along the linear constraint (x1 up to 1.1, the f1 minimum there) and
    # along the circle (x1 down to -15). Sample all three, keep the front.
    m = max(n // 3, 2)
    a = np.linspace(-2.5, 1.1, m)
    line = np.column_stack([a, (a + 10.0) / 3.0])
    b = np.linspace(2.5, np.sqrt(225.0 - 6.25), m)
    stationary = np.column_stack([np.full(m, -2.5), b])
    c = np.linspace(-15.0, -2.5, n - 2 * m)
    arc = np.column_stack([c, np.sqrt(225.0 - c**2)])
    F = _srn_f(np.vstack([line, stationary, arc]))
    return F[pareto_filter(F)]


# -- TNK -------------------------------------------------------------------


def _tnk_f(x):
    return np.array(x, dtype=float)


def _tnk_g1(x):
    x1, x2 = x[..., 0], x[..., 1]
    return -(x1**2) - x2**2 + 1.0 + 0.1 * np.cos(16.0 * np.arctan2(x1, x2))


def _tnk_g2(x):
    return (x[..., 0] - 0.5) ** 2 + (x[..., 1] - 0.5) ** 2 - 0.5


# -- mock voltage regulator --------------------------------------------------

VR_VIN = 1.8
VR_RATIOS = np.array([1 / 3, 1 / 3, 2 / 3, 2 / 3])
VR_OR_BOUNDS = (1.0, 100.0)  # ripple band, mV
VR_CP_TARGET = 20.0


def capacitance(x):
    """Total capacitance of the eight capacitors.

    ``x`` starts with (W_i, L_i, M_i) for i = 1..8.
    """
    x = np.asarray(x, dtype=float)
    W, L, M = x[..., 0:24:3], x[..., 1:24:3], x[..., 2:24:3]
    return np.sum((1.955 * W * L + 0.54 * (W + L)) * M, axis=-1)


def _vr_parts(x):
    x = np.asarray(x, dtype=float)
    W, L, M = x[..., 0:24:3], x[..., 1:24:3], x[..., 2:24:3]
    caps = (1.955 * W * L + 0.54 * (W + L)) * M
    cfly = caps[..., 0::2] + caps[..., 1::2]
    vref = x[..., 24:28]
    load = x[..., 28:32]
    r_out = 8.0 / cfly
    ideal = VR_RATIOS * VR_VIN
    vo = ideal * load / (load + r_out) * (0.9 + 0.1 * np.tanh(cfly / 2.0))
    vo = vo + 0.05 * (vref - ideal * 0.85)
    current = vo / load
    ripple = 23000.0 * current / cfly
    p_out = np.sum(vo * current, axis=-1)
    p_loss = (
        np.sum(current**2 * r_out, axis=-1) + 2e-4 * np.sum(caps, axis=-1) + 1e-3
    )
    eff = 100.0 * p_out / (p_out + p_loss)
    return eff, vo, ripple


def _vr_f(x):
    eff, vo, ripple = _vr_parts(x)
    return np.concatenate([eff[..., None], vo, ripple], axis=-1)


def _vr_bounds():
    per_cap = [(0.2, 1.5), (0.2, 1.5), (0.5, 1.5)]
    vref = [(0.45, 0.65)] * 2 + [(0.95, 1.2)] * 2
    loads = [(14.0, 1700.0)] * 4
    return np.array(per_cap * 8 + vref + loads)


def _make_vr(band=2.0):
    if band <= 0:
        raise ConfigurationError("capacitance band must be positive")
    names = ("Eff",) + tuple(f"Vo{i}" for i in range(1, 5)) + tuple(
        f"OR{i}" for i in range(1, 5)
    )
    lo, hi = VR_OR_BOUNDS

    def c0(x):
        return np.abs(capacitance(x) - VR_CP_TARGET) - band

    def vo_con(i):
        return lambda x, v: x[..., 23 + i] - v[f"Vo{i}"]

    def or_con(i):
        return lambda x, v: np.maximum(lo - v[f"OR{i}"], v[f"OR{i}"] - hi)

    def c9(x, v):
        return v["Eff"] - 100.0

    constraints = (c0,) + tuple(vo_con(i) for i in range(1, 5))
    constraints += tuple(or_con(i) for i in range(1, 5)) + (c9,)
    uses = ((),) + tuple((f"Vo{i}",) for i in range(1, 5))
    uses += tuple((f"OR{i}",) for i in range(1, 5)) + (("Eff",),)
    return BenchmarkProblem(
        name="mock_vr",
        bounds=_vr_bounds(),
        objective_names=names,
        objectives=_vr_f,
        constraint_names=tuple(f"C{i}" for i in range(10)),
        constraints=constraints,
        senses=("max",) * 5 + ("min",) * 4,
        constraint_uses=uses,
        options={"band": band},
    )


def _make_bnh():
    return BenchmarkProblem(
        name="bnh",
        bounds=np.array([[0.0, 5.0], [0.0, 3.0]]),
        objective_names=("f1", "f2"),
        objectives=_bnh_f,
        constraint_names=("g1", "g2"),
        constraints=(_bnh_g1, _bnh_g2),
        senses=("min", "min"),
        reference_point=np.array([149.6, 55.0]),
        pareto_front=_bnh_front,
    )


def _make_srn():
    return BenchmarkProblem(
        name="srn",
        bounds=np.array([[-20.0, 20.0], [-20.0, 20.0]]),
        objective_names=("f1", "f2"),
        objectives=_srn_f,
        constraint_names=("g1", "g2"),
        constraints=(_srn_g1, _srn_g2),
        senses=("min", "min"),
        reference_point=np.array([247.5, 2.9]),
        pareto_front=_srn_front,
    )


def _make_tnk():
    return BenchmarkProblem(
        name="tnk",
        bounds=np.array([[0.0, np.pi], [0.0, np.pi]]),
        objective_names=("f1", "f2"),
        objectives=_tnk_f,
        constraint_names=("g1", "g2"),
        constraints=(_tnk_g1, _tnk_g2),
        senses=("min", "min"),
        reference_point=np.array([1.14, 1.14]),
    )


BENCHMARKS = {
    "bnh": _make_bnh,
    "srn": _make_srn,
    "tnk": _make_tnk,
    "mock_vr": _make_vr,
}


def get_benchmark(name, **options):
    try:
        factory = BENCHMARKS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}"
        ) from None
    return factory(**options)


def evaluate_benchmark(name, x, **options):
    """Closed-form ``(Y, C)`` of a named benchmark at an in-box point."""
    return get_benchmark(name, **options).evaluate(x)


def make_problem(bench, budget, n_init=None, constraint_type=BLACKBOX):
    """Wrap a benchmark as an engine :class:`ProblemSpec`.

    For BNH/SRN/TNK ``constraint_type`` chooses whether the constraints are
    treated as blackbox (modeled by GPs) or whitebox (known to the cheap
    problem). ``mock_vr`` always uses its own whitebox/composite mix.
    """
    if isinstance(bench, str):
        bench = get_benchmark(bench)
    if constraint_type not in (WHITEBOX, BLACKBOX):
        raise ConfigurationError("constraint_type must be 1 (whitebox) or 2 (blackbox)")
    composite = any(bench._uses())
    specs = []
    for name, g, uses in zip(bench.constraint_names, bench.constraints, bench._uses()):
        if uses:
            specs.append(ConstraintSpec(name, COMPOSITE, g, uses))
        elif composite or constraint_type == WHITEBOX:
            specs.append(ConstraintSpec(name, WHITEBOX, g))
        else:
            specs.append(ConstraintSpec(name, BLACKBOX))
    blackbox_idx = [i for i, s in enumerate(specs) if s.kind == BLACKBOX]

    def evaluator(x):
        Y, C = bench.evaluate(x)
        return Y, C[blackbox_idx]

    return ProblemSpec(
        bounds=bench.bounds,
        objective_names=bench.objective_names,
        evaluator=evaluator,
        budget=budget,
        senses=bench.senses or None,
        constraints=tuple(specs),
        n_init=n_init,
        reference_point=bench.reference_point,
        name=bench.name,
    )
