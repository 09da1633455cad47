"""Uncertainty-aware constrained multi-objective Bayesian optimization.

Each iteration fits one GP per objective (and per blackbox constraint),
solves a cheap constrained multi-objective problem whose objectives are the
acquisition values of those GPs, and evaluates the member of the resulting
Pareto set with the largest uncertainty box.

The loop is deterministic in ``(problem, config, seed)``: every random draw
in iteration ``t`` comes from a stream seeded by ``(seed, t, purpose)``, so
an optimizer state can be rebuilt from its history alone.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from . import gp
from .acquisition import AcquisitionKind, BetaSchedule, beta_t, log_uncertainty_volume
from .errors import CandidatesExhausted, ConfigurationError, EvaluationError, InputError
from .nsga2 import CheapProblem, NsgaConfig, solve
from .pareto import ParetoArchive, hypervolume_curve, pareto_filter

__all__ = [
    "WHITEBOX",
    "BLACKBOX",
    "COMPOSITE",
    "ConstraintSpec",
    "ProblemSpec",
    "EvaluationRecord",
    "EngineConfig",
    "OptimizerState",
    "latin_hypercube",
    "evaluate",
    "initialize",
    "state_from_history",
    "build_cheap_problem",
    "select_candidate",
    "propose",
    "incumbents",
    "step",
    "run",
    "pareto_archive",
]

logger = logging.getLogger(__name__)

WHITEBOX, BLACKBOX, COMPOSITE = 1, 2, 3
DUPLICATE_TOL = 1e-9

# stream tags for per-iteration seeds
_GP, _NSGA, _FALLBACK, _INIT = 0, 1, 2, 3


@dataclass(frozen=True)
class ConstraintSpec:
    """One constraint, satisfied when its value is ``<= 0``.

    ``kind`` is ``WHITEBOX`` (``expression(x)``), ``BLACKBOX`` (value
    reported by the evaluator, no expression) or ``COMPOSITE``
    (``expression(x, values)`` where ``values`` maps each name in ``uses``
    to an objective or blackbox-constraint value).

    Expressions must broadcast: ``x`` is either a ``d``-vector or an
    ``(n, d)`` array (index it as ``x[..., j]``) and the ``values`` entries
    are floats or ``(n,)`` arrays accordingly.
    """

    name: str
    kind: int
    expression: Callable | None = None
    uses: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (WHITEBOX, BLACKBOX, COMPOSITE):
            raise ConfigurationError(f"constraint {self.name!r}: unknown kind {self.kind!r}")
        if self.kind != BLACKBOX and self.expression is None:
            raise ConfigurationError(f"constraint {self.name!r} needs an expression")
        if self.kind == COMPOSITE and not self.uses:
            raise ConfigurationError(
                f"composite constraint {self.name!r} must name the quantities it uses"
            )
        object.__setattr__(self, "uses", tuple(self.uses))


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """A constrained multi-objective problem with an expensive evaluator.

    ``evaluator(x)`` returns ``(Y, C)``: the ``k`` objective values in their
    natural sense and the values of the blackbox constraints, in
    declaration order. ``reference_point`` (optional) is in minimization
    orientation, i.e. after negating maximized objectives.
    """

    bounds: np.ndarray
    objective_names: tuple[str, ...]
    evaluator: Callable[[np.ndarray], tuple[Sequence[float], Sequence[float]]]
    budget: int
    senses: tuple[str, ...] | None = None
    constraints: tuple[ConstraintSpec, ...] = ()
    n_init: int | None = None
    reference_point: np.ndarray | None = None
    name: str = "problem"

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.bounds, dtype=float))
        if b.ndim != 2 or b.shape[1] != 2 or np.any(b[:, 0] >= b[:, 1]):
            raise ConfigurationError("bounds must be (d, 2) with lo < hi")
        object.__setattr__(self, "bounds", b)
        names = tuple(self.objective_names)
        object.__setattr__(self, "objective_names", names)
        if len(names) < 2:
            raise ConfigurationError("at least two objectives are required")
        senses = self.senses or ("min",) * len(names)
        if len(senses) != len(names) or any(s not in ("min", "max") for s in senses):
            raise ConfigurationError("senses must give 'min' or 'max' per objective")
        object.__setattr__(self, "senses", tuple(senses))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        n_init = self.n_init if self.n_init is not None else max(5, 2 * self.dim)
        object.__setattr__(self, "n_init", int(n_init))
        if not (self.budget > self.n_init >= 2):
            raise ConfigurationError(
                f"need budget > n_init >= 2 (budget={self.budget}, n_init={self.n_init})"
            )
        if self.reference_point is not None:
            ref = np.asarray(self.reference_point, dtype=float).ravel()
            if ref.size != len(names):
                raise ConfigurationError("reference point needs one entry per objective")
            object.__setattr__(self, "reference_point", ref)
        known = set(names)
        seen = set()
        for c in self.constraints:
            if c.name in seen or c.name in known:
                raise ConfigurationError(f"duplicate quantity name {c.name!r}")
            seen.add(c.name)
        known |= {c.name for c in self.blackbox_constraints}
        for c in self.constraints:
            missing = [u for u in c.uses if u not in known]
            if missing:
                raise ConfigurationError(
                    f"constraint {c.name!r} references unknown quantities {missing}"
                )

    @property
    def dim(self):
        return self.bounds.shape[0]

    @property
    def k(self):
        return len(self.objective_names)

    @property
    def signs(self):
        return np.array([1.0 if s == "min" else -1.0 for s in self.senses])

    @property
    def blackbox_constraints(self):
        return tuple(c for c in self.constraints if c.kind == BLACKBOX)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.bounds[:, 0]) and np.all(x <= self.bounds[:, 1]))


@dataclass(frozen=True, eq=False)
class EvaluationRecord:
    """One expensive evaluation. ``Y`` is in the objectives' natural sense."""

    x: np.ndarray
    Y: np.ndarray
    C: np.ndarray
    feasible: bool
    iteration: int
    provenance: str = "candidate"


@dataclass(frozen=True)
class EngineConfig:
    acquisition: str = "EI"
    nsga: NsgaConfig = field(default_factory=NsgaConfig)
    gp: gp.GPConfig = field(default_factory=gp.GPConfig)
    beta_mode: str = "adaptive"
    beta_delta: float = 0.1
    beta_value: float | None = None
    fallback_samples: int = 1000

    @property
    def kind(self):
        return AcquisitionKind(self.acquisition)

    def schedule(self, dim):
        return BetaSchedule(
            dimension=dim, delta=self.beta_delta, mode=self.beta_mode, value=self.beta_value
        )


@dataclass(frozen=True, eq=False)
class OptimizerState:
    problem: ProblemSpec
    config: EngineConfig
    seed: int
    history: tuple[EvaluationRecord, ...]
    models: Mapping[str, gp.GPModel]

    @property
    def t(self):
        """Number of BO iterations performed so far."""
        return len(self.history) - self.problem.n_init

    @property
    def X(self):
        return np.array([r.x for r in self.history])

    @property
    def Y(self):
        """Objective values in minimization orientation."""
        return np.array([r.Y for r in self.history]) * self.problem.signs

    @property
    def feasible(self):
        return np.array([r.feasible for r in self.history], dtype=bool)

    @property
    def budget_left(self):
        return self.problem.budget - len(self.history)


def _seed(seed, *tags):
    return int(np.random.SeedSequence([int(seed), *map(int, tags)]).generate_state(1)[0])


def _rng(seed, *tags):
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, tags)]))


def latin_hypercube(n, bounds, rng):
    """Latin-hypercube sample of ``n`` points strictly inside ``bounds``."""
    bounds = np.asarray(bounds, dtype=float)
    d = bounds.shape[0]
    u = rng.uniform(1e-9, 1.0 - 1e-9, size=(n, d))
    strata = np.column_stack([rng.permutation(n) for _ in range(d)])
    unit = (strata + u) / n
    return bounds[:, 0] + unit * (bounds[:, 1] - bounds[:, 0])


def _constraint_vector(problem, x, Y, blackbox_values):
    values = dict(zip(problem.objective_names, map(float, Y)))
    bb = iter(blackbox_values)
    for c in problem.constraints:
        if c.kind == BLACKBOX:
            values[c.name] = float(next(bb))
    C = []
    for c in problem.constraints:
        if c.kind == WHITEBOX:
            C.append(float(c.expression(x)))
        elif c.kind == BLACKBOX:
            C.append(values[c.name])
        else:
            C.append(float(c.expression(x, {u: values[u] for u in c.uses})))
    return np.array(C, dtype=float)


def evaluate(problem, x, iteration, provenance):
    """Run the expensive evaluator at ``x`` and build its record.

    Raises:
        EvaluationError: the evaluator failed or returned malformed values.
    """
    x = np.asarray(x, dtype=float)
    try:
        Y, Cb = problem.evaluator(x)
    except EvaluationError:
        raise
    except Exception as exc:
        raise EvaluationError(f"evaluator failed at x={x.tolist()}: {exc}", x) from exc
    Y = np.asarray(Y, dtype=float).ravel()
    Cb = np.asarray(Cb, dtype=float).ravel()
    n_bb = len(problem.blackbox_constraints)
    if Y.size != problem.k or Cb.size != n_bb:
        raise EvaluationError(
            f"evaluator returned {Y.size} objectives and {Cb.size} constraint values; "
            f"expected {problem.k} and {n_bb}",
            x,
        )
    if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(Cb))):
        raise EvaluationError(f"evaluator returned non-finite values at x={x.tolist()}", x)
    C = _constraint_vector(problem, x, Y, Cb)
    return EvaluationRecord(
        x=x.copy(),
        Y=Y,
        C=C,
        feasible=bool(np.all(C <= 0.0)),
        iteration=int(iteration),
        provenance=provenance,
    )


def _fit_models(problem, config, seed, history):
    X = np.array([r.x for r in history])
    Y = np.array([r.Y for r in history]) * problem.signs
    t = len(history)
    models = {}
    for j, name in enumerate(problem.objective_names):
        cfg = replace(config.gp, seed=_seed(seed, _GP, t, j))
        models[name] = gp.fit(X, Y[:, j], cfg, bounds=problem.bounds)
    offset = problem.k
    for j, c in enumerate(problem.constraints):
        if c.kind != BLACKBOX:
            continue
        targets = np.array([r.C[j] for r in history])
        cfg = replace(config.gp, seed=_seed(seed, _GP, t, offset + j))
        models[c.name] = gp.fit(X, targets, cfg, bounds=problem.bounds)
    return models


def state_from_history(problem, history, seed, config=None):
    """Rebuild the optimizer state from previously logged evaluations."""
    config = config or EngineConfig()
    history = tuple(history)
    if len(history) < problem.n_init:
        raise InputError(
            f"history holds {len(history)} records, fewer than n_init={problem.n_init}"
        )
    models = _fit_models(problem, config, seed, history)
    return OptimizerState(problem, config, int(seed), history, models)


def initial_design(problem, seed):
    return latin_hypercube(problem.n_init, problem.bounds, _rng(seed, _INIT))


def initialize(problem, seed, config=None, on_record=None):
    """Evaluate a Latin-hypercube design and fit all models.

    ``on_record`` is called with every completed record (for persistence)
    before the next evaluation starts.
    """
    history = []
    for x in initial_design(problem, seed):
        rec = evaluate(problem, x, iteration=0, provenance="initial")
        history.append(rec)
        if on_record is not None:
            on_record(rec)
    return state_from_history(problem, history, seed, config)


def incumbents(state):
    """Best feasible observed value per objective (minimization orientation).

    Falls back to the best observed value when nothing is feasible yet.
    """
    Y = state.Y
    feas = state.feasible
    return Y[feas].min(axis=0) if feas.any() else Y.min(axis=0)


class _Surrogates:
    """Batch predictions shared between cheap objectives and constraints."""

    def __init__(self, state):
        self.state = state
        self._key = None
        self._cache = None

    def __call__(self, X):
        if self._key is not X:
            self._cache = {
                name: model.predict(X) for name, model in self.state.models.items()
            }
            self._key = X
        return self._cache


def build_cheap_problem(state):
    """Cheap constrained problem over the current models.

    Objectives are ``-log EI`` or ``LCB`` per objective model (minimized).
    Whitebox constraints pass through, blackbox constraints become their
    GP mean, composite constraints see predictive means in place of the
    blackbox quantities they reference.
    """
    problem = state.problem
    kind = state.config.kind
    beta = beta_t(state.config.schedule(problem.dim), state.t + 1)
    tau = incumbents(state) if kind.variant == "EI" else None
    signs = problem.signs
    names = problem.objective_names
    surrogate = _Surrogates(state)

    def objectives(X):
        pred = surrogate(X)
        cols = []
        for j, name in enumerate(names):
            mean, std = pred[name]
            cols.append(
                kind.cheap_objective(
                    mean, std, beta=beta, tau=None if tau is None else tau[j]
                )
            )
        return np.column_stack(cols)

    constraints = None
    if problem.constraints:

        def constraints(X):
            pred = surrogate(X)
            n = X.shape[0]
            means = {name: signs[j] * pred[name][0] for j, name in enumerate(names)}
            for c in problem.blackbox_constraints:
                means[c.name] = pred[c.name][0]
            cols = []
            for c in problem.constraints:
                if c.kind == WHITEBOX:
                    g = c.expression(X)
                elif c.kind == BLACKBOX:
                    g = means[c.name]
                else:
                    g = c.expression(X, {u: means[u] for u in c.uses})
                cols.append(np.broadcast_to(np.asarray(g, dtype=float), (n,)))
            return np.column_stack(cols)

    return CheapProblem(objectives=objectives, bounds=problem.bounds, constraints=constraints)


def _rank_by_uncertainty(state, X):
    """Order rows of ``X`` by decreasing uncertainty volume, ties lexicographic."""
    beta = beta_t(state.config.schedule(state.problem.dim), state.t + 1)
    stds = np.column_stack(
        [state.models[name].predict(X)[1] for name in state.problem.objective_names]
    )
    logvol = log_uncertainty_volume(stds, beta)
    keys = [X[:, j] for j in range(X.shape[1] - 1, -1, -1)] + [-logvol]
    return np.lexsort(keys), logvol


def _is_evaluated(state, x):
    b = state.problem.bounds
    span = b[:, 1] - b[:, 0]
    Z = (state.X - b[:, 0]) / span
    z = (x - b[:, 0]) / span
    return bool(np.any(np.max(np.abs(Z - z), axis=1) < DUPLICATE_TOL))


def select_candidate(candidates, state):
    """Pick the candidate with the largest uncertainty volume.

    When the cheap front holds feasible points only those are considered;
    an all-infeasible front (minimal violation) is ranked as a whole.
    Candidates that duplicate an evaluated input are skipped.

    Raises:
        CandidatesExhausted: every candidate was already evaluated.
    """
    X = np.atleast_2d(np.asarray(candidates.X, dtype=float))
    if X.shape[0] == 0:
        raise CandidatesExhausted("empty candidate set")
    if not candidates.all_infeasible:
        X = X[candidates.feasible]
    order, _ = _rank_by_uncertainty(state, X)
    for i in order:
        if not _is_evaluated(state, X[i]):
            return X[i].copy()
    raise CandidatesExhausted(f"all {len(X)} candidates were already evaluated")


def _fallback_point(state):
    rng = _rng(state.seed, _FALLBACK, state.t + 1)
    b = state.problem.bounds
    X = b[:, 0] + rng.random((state.config.fallback_samples, b.shape[0])) * (b[:, 1] - b[:, 0])
    order, _ = _rank_by_uncertainty(state, X)
    return X[order[0]].copy()


def propose(state):
    """Next input to evaluate and its provenance tag."""
    cheap = build_cheap_problem(state)
    nsga = replace(state.config.nsga, seed=_seed(state.seed, _NSGA, state.t + 1))
    candidates = solve(cheap, nsga)
    try:
        x = select_candidate(candidates, state)
    except CandidatesExhausted:
        logger.info("iteration %d: cheap front exhausted, using fallback", state.t + 1)
        return _fallback_point(state), "fallback"
    return x, "candidate-infeasible" if candidates.all_infeasible else "candidate"


def step(state, on_record=None):
    """One BO iteration: propose, evaluate, refit. Returns ``(state, record)``."""
    if state.budget_left <= 0:
        raise InputError("evaluation budget exhausted")
    x, provenance = propose(state)
    rec = evaluate(state.problem, x, iteration=state.t + 1, provenance=provenance)
    if on_record is not None:
        on_record(rec)
    history = state.history + (rec,)
    models = _fit_models(state.problem, state.config, state.seed, history)
    return replace(state, history=history, models=models), rec


def run(problem, config=None, seed=0, on_record=None, history=()):
    """Run the full loop until the budget is spent.

    ``history`` resumes from previously logged records. Returns the feasible
    Pareto archive and the full list of records.
    """
    config = config or EngineConfig()
    history = tuple(history)
    if len(history) >= problem.n_init:
        state = state_from_history(problem, history, seed, config)
    else:
        done = list(history)
        for x in initial_design(problem, seed)[len(done):]:
            rec = evaluate(problem, x, iteration=0, provenance="initial")
            done.append(rec)
            if on_record is not None:
                on_record(rec)
        state = state_from_history(problem, done, seed, config)
    while state.budget_left > 0:
        state, _ = step(state, on_record)
    return pareto_archive(problem, state.history), list(state.history)


def pareto_archive(problem, history, reference=None):
    """Feasible non-dominated subset of ``history`` (and its PHV curve)."""
    history = list(history)
    if not history:
        return ParetoArchive(
            X=np.empty((0, problem.dim)), Y=np.empty((0, problem.k)), indices=np.array([], int)
        )
    Ymin = np.array([r.Y for r in history]) * problem.signs
    feas = np.array([r.feasible for r in history], dtype=bool)
    idx = pareto_filter(Ymin, feas)
    ref = reference if reference is not None else problem.reference_point
    curve = None
    if ref is not None and problem.k <= 4:
        curve = hypervolume_curve(Ymin, feas, ref)
    return ParetoArchive(
        X=np.array([history[i].x for i in idx]).reshape(len(idx), problem.dim),
        Y=np.array([history[i].Y for i in idx]).reshape(len(idx), problem.k),
        indices=idx,
        reference_point=None if ref is None else np.asarray(ref, dtype=float),
        curve=curve,
    )
