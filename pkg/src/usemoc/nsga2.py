"""Constrained NSGA-II for cheap, vectorized objectives and constraints.

Constraints follow the ``g(x) <= 0`` convention. Feasibility is handled by
Deb's rule: feasible beats infeasible, lower total violation beats higher,
and Pareto dominance decides among feasible points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InputError

__all__ = [
    "CheapProblem",
    "NsgaConfig",
    "Individual",
    "CandidateSet",
    "constrained_dominates",
    "dominance_matrix",
    "fast_non_dominated_sort",
    "crowding_distance",
    "rank_and_crowding",
    "survivors",
    "tournament",
    "variation",
    "make_offspring",
    "solve",
]

FEAS_TOL = 1e-12
DEDUP_TOL = 1e-9


@dataclass(frozen=True)
class CheapProblem:
    """Vectorized cheap problem.

    ``objectives`` maps an ``(n, d)`` array to ``(n, k)``; ``constraints``
    (optional) maps it to ``(n, m)`` values where ``<= 0`` is satisfied.
    """

    objectives: Callable[[np.ndarray], np.ndarray]
    bounds: np.ndarray
    constraints: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.bounds, dtype=float))
        if b.ndim != 2 or b.shape[1] != 2 or np.any(b[:, 0] >= b[:, 1]):
            raise InputError("bounds must be (d, 2) with lo < hi")
        object.__setattr__(self, "bounds", b)

    @classmethod
    def from_functions(cls, objective_funcs, bounds, constraint_funcs=()):
        """Wrap per-point scalar functions into a vectorized problem."""
        objective_funcs = list(objective_funcs)
        constraint_funcs = list(constraint_funcs)
        if not objective_funcs:
            raise InputError("at least one objective is required")

        def objectives(X):
            return np.array([[f(x) for f in objective_funcs] for x in X], dtype=float)

        constraints = None
        if constraint_funcs:

            def constraints(X):
                return np.array(
                    [[g(x) for g in constraint_funcs] for x in X], dtype=float
                )

        return cls(objectives=objectives, bounds=bounds, constraints=constraints)

    @property
    def dim(self):
        return self.bounds.shape[0]

    def evaluate(self, X):
        """Return ``(F, violation)`` for a batch of genomes."""
        X = np.atleast_2d(X)
        F = np.asarray(self.objectives(X), dtype=float).reshape(X.shape[0], -1)
        if self.constraints is None:
            return F, np.zeros(X.shape[0])
        G = np.asarray(self.constraints(X), dtype=float).reshape(X.shape[0], -1)
        return F, total_violation(G)


def total_violation(G):
    """Sum of positive constraint values per row."""
    G = np.atleast_2d(G)
    v = np.sum(np.maximum(G, 0.0), axis=1)
    v[v <= FEAS_TOL] = 0.0
    return v


@dataclass(frozen=True)
class NsgaConfig:
    population_size: int = 100
    generations: int = 100
    crossover_probability: float = 0.9
    mutation_probability: float | None = None  # None -> 1/d
    sbx_eta: float = 15.0
    mutation_eta: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 4 or self.population_size % 2:
            raise InputError("population_size must be even and >= 4")
        if self.generations < 1:
            raise InputError("generations must be positive")
        for p in (self.crossover_probability, self.mutation_probability):
            if p is not None and not 0.0 <= p <= 1.0:
                raise InputError("probabilities must lie in [0, 1]")
        if self.sbx_eta <= 0 or self.mutation_eta <= 0:
            raise InputError("distribution indices must be positive")

    def mutation_rate(self, dim):
        return 1.0 / dim if self.mutation_probability is None else self.mutation_probability


@dataclass
class Individual:
    genome: np.ndarray
    objectives: np.ndarray
    violation: float = 0.0
    rank: int = 0
    crowding: float = 0.0

    @property
    def feasible(self):
        return self.violation <= FEAS_TOL


def constrained_dominates(a, b):
    """Deb's constrained-dominance relation between two individuals."""
    if a.feasible and not b.feasible:
        return True
    if not a.feasible:
        return (not b.feasible) and a.violation < b.violation
    fa = np.asarray(a.objectives, dtype=float)
    fb = np.asarray(b.objectives, dtype=float)
    return bool(np.all(fa <= fb) and np.any(fa < fb))


def pairwise_order(F):
    """``le[i, j]``: F_i <= F_j everywhere; ``lt[i, j]``: F_i < F_j somewhere."""
    n = F.shape[0]
    le = np.ones((n, n), dtype=bool)
    lt = np.zeros((n, n), dtype=bool)
    for col in F.T:
        le &= col[:, None] <= col[None, :]
        lt |= col[:, None] < col[None, :]
    return le, lt


def dominance_matrix(F, violation=None):
    """``D[i, j]`` is True when individual i constrained-dominates j."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    n = F.shape[0]
    v = np.zeros(n) if violation is None else np.asarray(violation, dtype=float)
    feas = v <= FEAS_TOL
    le, lt = pairwise_order(F)
    both_feas = feas[:, None] & feas[None, :]
    both_infeas = ~feas[:, None] & ~feas[None, :]
    return (
        (feas[:, None] & ~feas[None, :])
        | (both_infeas & (v[:, None] < v[None, :]))
        | (both_feas & le & lt)
    )


def fast_non_dominated_sort(F, violation=None, max_count=None):
    """Partition individuals into constrained non-domination fronts.

    Returns a list of index arrays, best front first. With ``max_count``
    peeling stops once that many individuals have been assigned.
    """
    F = np.asarray(F, dtype=float)
    if F.size == 0:
        return []
    D = dominance_matrix(F, violation)
    count = D.sum(axis=0)
    n = F.shape[0]
    remaining = np.ones(n, dtype=bool)
    fronts = []
    assigned = 0
    limit = n if max_count is None else min(n, max_count)
    while assigned < limit:
        front = np.flatnonzero(remaining & (count == 0))
        fronts.append(front)
        assigned += len(front)
        remaining[front] = False
        count -= D[front].sum(axis=0)
    return fronts


def crowding_distance(F):
    """Crowding distance within one front.

    Boundary points of every objective get ``inf``; an objective with zero
    range contributes nothing to interior points.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    n, k = F.shape
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for j in range(k):
        order = np.argsort(F[:, j], kind="stable")
        col = F[order, j]
        dist[order[0]] = dist[order[-1]] = np.inf
        span = col[-1] - col[0]
        if span <= 0:
            continue
        dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def rank_and_crowding(F, violation=None, max_count=None):
    """Front index and crowding distance of every individual.

    Individuals left unranked because of ``max_count`` get a rank one past
    the last computed front and zero crowding.
    """
    fronts = fast_non_dominated_sort(F, violation, max_count)
    rank = np.full(len(F), len(fronts), dtype=int)
    crowd = np.zeros(len(F))
    for r, front in enumerate(fronts):
        rank[front] = r
        crowd[front] = crowding_distance(F[front])
    return rank, crowd, fronts


def survivors(F, violation, size, return_scores=False):
    """Indices of the ``size`` best individuals (rank, then crowding).

    With ``return_scores`` also returns the survivors' rank and crowding as
    computed on the merged population.
    """
    rank, crowd, fronts = rank_and_crowding(F, violation, max_count=size)
    keep = []
    for front in fronts:
        if len(keep) + len(front) <= size:
            keep.extend(front.tolist())
        else:
            order = np.argsort(-crowd[front], kind="stable")
            keep.extend(front[order[: size - len(keep)]].tolist())
            break
    keep = np.array(keep, dtype=int)
    if return_scores:
        return keep, rank[keep], crowd[keep]
    return keep


def tournament(rank, crowd, n_winners, rng):
    """Binary tournament on (rank, -crowding); ties decided by coin flip."""
    n = len(rank)
    a = rng.integers(0, n, n_winners)
    b = rng.integers(0, n, n_winners)
    coin = rng.random(n_winners) < 0.5
    a_wins = (rank[a] < rank[b]) | (
        (rank[a] == rank[b])
        & ((crowd[a] > crowd[b]) | ((crowd[a] == crowd[b]) & coin))
    )
    return np.where(a_wins, a, b)


def _sbx(P1, P2, lo, hi, prob, eta, rng):
    m, d = P1.shape
    C1, C2 = P1.copy(), P2.copy()
    do_pair = rng.random(m) <= prob
    do_var = rng.random((m, d)) <= 0.5
    swap = rng.random((m, d)) <= 0.5
    u = rng.random((m, d))
    mask = do_pair[:, None] & do_var & (np.abs(P1 - P2) > 1e-14)
    if not mask.any():
        return C1, C2
    y1 = np.minimum(P1, P2)
    y2 = np.maximum(P1, P2)
    gap = np.where(mask, y2 - y1, 1.0)
    expo = 1.0 / (eta + 1.0)

    def betaq(beta):
        alpha = 2.0 - beta ** (-(eta + 1.0))
        return np.where(
            u <= 1.0 / alpha,
            (u * alpha) ** expo,
            (1.0 / np.maximum(2.0 - u * alpha, 1e-300)) ** expo,
        )

    c1 = 0.5 * ((y1 + y2) - betaq(1.0 + 2.0 * (y1 - lo) / gap) * gap)
    c2 = 0.5 * ((y1 + y2) + betaq(1.0 + 2.0 * (hi - y2) / gap) * gap)
    c1 = np.clip(c1, lo, hi)
    c2 = np.clip(c2, lo, hi)
    first = np.where(swap, c2, c1)
    second = np.where(swap, c1, c2)
    C1[mask] = first[mask]
    C2[mask] = second[mask]
    return C1, C2


def _polynomial_mutation(X, lo, hi, prob, eta, rng):
    X = X.copy()
    mask = rng.random(X.shape) < prob
    u = rng.random(X.shape)
    if not mask.any():
        return X
    span = hi - lo
    d1 = (X - lo) / span
    d2 = (hi - X) / span
    p = 1.0 / (eta + 1.0)
    low = u <= 0.5
    val_low = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)
    val_high = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)
    dq = np.where(low, val_low**p - 1.0, 1.0 - val_high**p)
    X[mask] = (X + dq * span)[mask]
    return np.clip(X, lo, hi)


def variation(parent_a, parent_b, config, rng, bounds):
    """SBX crossover followed by polynomial mutation.

    Parents are two genomes, or two ``(m, d)`` stacks of genomes paired
    row by row. Returns two offspring of the same shape, clipped to
    ``bounds``.
    """
    bounds = np.asarray(bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    single = np.ndim(parent_a) == 1
    P1 = np.atleast_2d(np.asarray(parent_a, dtype=float))
    P2 = np.atleast_2d(np.asarray(parent_b, dtype=float))
    C1, C2 = _sbx(P1, P2, lo, hi, config.crossover_probability, config.sbx_eta, rng)
    C = np.vstack([C1, C2])
    C = _polynomial_mutation(
        C, lo, hi, config.mutation_rate(len(lo)), config.mutation_eta, rng
    )
    m = P1.shape[0]
    if single:
        return C[0], C[m]
    return C[:m], C[m:]


def make_offspring(X, rank, crowd, config, rng, bounds, n_offspring=None):
    """Tournament selection plus variation for a whole generation."""
    bounds = np.asarray(bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    n_offspring = n_offspring or len(X)
    n_pairs = (n_offspring + 1) // 2
    winners = tournament(rank, crowd, 2 * n_pairs, rng)
    P1, P2 = X[winners[0::2]], X[winners[1::2]]
    C1, C2 = _sbx(P1, P2, lo, hi, config.crossover_probability, config.sbx_eta, rng)
    C = np.empty((2 * n_pairs, X.shape[1]))
    C[0::2], C[1::2] = C1, C2
    C = _polynomial_mutation(
        C, lo, hi, config.mutation_rate(X.shape[1]), config.mutation_eta, rng
    )
    return C[:n_offspring]


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """Best front returned by :func:`solve` (deduplicated)."""

    X: np.ndarray
    F: np.ndarray
    violation: np.ndarray

    @property
    def feasible(self):
        return self.violation <= FEAS_TOL

    @property
    def all_infeasible(self):
        return not bool(np.any(self.feasible))

    def __len__(self):
        return self.X.shape[0]


def _dedup(X, bounds):
    Z = (X - bounds[:, 0]) / (bounds[:, 1] - bounds[:, 0])
    close = np.max(np.abs(Z[:, None, :] - Z[None, :, :]), axis=2) < DEDUP_TOL
    keep = []
    for i in range(len(Z)):
        if not any(close[i, j] for j in keep):
            keep.append(i)
    return np.array(keep, dtype=int)


def solve(problem, config=None, callback=None, initial=None):
    """Run constrained NSGA-II and return the deduplicated best front.

    ``initial`` optionally supplies genomes for the first population (the
    remainder is filled uniformly at random). ``callback(gen, X, F, v)`` is
    invoked after every survivor selection.
    """
    config = config or NsgaConfig()
    rng = np.random.default_rng(config.seed)
    b = problem.bounds
    lo, hi = b[:, 0], b[:, 1]
    N = config.population_size
    X = lo + rng.random((N, problem.dim)) * (hi - lo)
    if initial is not None:
        init = np.clip(np.atleast_2d(np.asarray(initial, dtype=float))[:N], lo, hi)
        X[: len(init)] = init
    F, v = problem.evaluate(X)
    rank, crowd, _ = rank_and_crowding(F, v)
    if callback is not None:
        callback(0, X, F, v)
    for gen in range(1, config.generations + 1):
        C = make_offspring(X, rank, crowd, config, rng, b)
        FC, vC = problem.evaluate(C)
        XA = np.vstack([X, C])
        FA = np.vstack([F, FC])
        vA = np.concatenate([v, vC])
        keep, rank, crowd = survivors(FA, vA, N, return_scores=True)
        X, F, v = XA[keep], FA[keep], vA[keep]
        if callback is not None:
            callback(gen, X, F, v)
    best = np.flatnonzero(rank == 0)
    best = best[_dedup(X[best], b)]
    return CandidateSet(X=X[best].copy(), F=F[best].copy(), violation=v[best].copy())
