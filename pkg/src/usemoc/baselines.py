"""Reference optimizers spending the same evaluation budget.

Both are deterministic in ``(problem, seed)`` and accept previously logged
records, which they replay instead of re-evaluating.
"""

from __future__ import annotations

import numpy as np

from .engine import _rng, evaluate, latin_hypercube
from .errors import ConfigMismatchError
from .nsga2 import NsgaConfig, make_offspring, rank_and_crowding, survivors, total_violation

__all__ = ["random_search", "nsga2_direct"]

_RANDOM, _NSGA_DIRECT = 4, 5


class _Replay:
    """Serve logged records first, then evaluate for real."""

    def __init__(self, problem, history, on_record):
        self.problem = problem
        self.history = list(history)
        self.on_record = on_record
        self.records = []

    def __call__(self, x, iteration, provenance):
        i = len(self.records)
        if i < len(self.history):
            rec = self.history[i]
            if not np.array_equal(np.asarray(rec.x, dtype=float), np.asarray(x, dtype=float)):
                raise ConfigMismatchError(
                    f"logged evaluation {i} does not match the replayed input",
                    {"index": i, "logged": list(map(float, rec.x)), "replayed": list(map(float, x))},
                )
        else:
            rec = evaluate(self.problem, x, iteration, provenance)
            if self.on_record is not None:
                self.on_record(rec)
        self.records.append(rec)
        return rec


def random_search(problem, seed=0, on_record=None, history=()):
    """Uniform sampling of the box; evaluation ``i`` uses its own stream."""
    b = problem.bounds
    records = list(history)
    for i in range(len(records), problem.budget):
        u = _rng(seed, _RANDOM, i).random(problem.dim)
        x = b[:, 0] + u * (b[:, 1] - b[:, 0])
        rec = evaluate(problem, x, iteration=i, provenance="random")
        records.append(rec)
        if on_record is not None:
            on_record(rec)
    return records


def nsga2_direct(problem, seed=0, config=None, population_size=None, on_record=None, history=()):
    """Constrained NSGA-II run directly on the expensive functions.

    The population defaults to ``n_init`` rounded up to an even number
    (at least 4); the last generation is truncated to fit the budget.
    """
    config = config or NsgaConfig()
    P = population_size or max(4, problem.n_init + problem.n_init % 2)
    config = NsgaConfig(
        population_size=P,
        generations=1,
        crossover_probability=config.crossover_probability,
        mutation_probability=config.mutation_probability,
        sbx_eta=config.sbx_eta,
        mutation_eta=config.mutation_eta,
    )
    rng = _rng(seed, _NSGA_DIRECT)
    run = _Replay(problem, history, on_record)
    b = problem.bounds
    signs = problem.signs

    def scores(recs):
        F = np.array([r.Y for r in recs]) * signs
        G = np.array([r.C for r in recs]).reshape(len(recs), -1)
        v = total_violation(G) if G.shape[1] else np.zeros(len(recs))
        return F, v

    X = latin_hypercube(P, b, rng)
    pop = []
    for x in X:
        if len(run.records) >= problem.budget:
            break
        pop.append(run(x, 0, "initial"))
    generation = 0
    while len(run.records) < problem.budget:
        generation += 1
        X = np.array([r.x for r in pop])
        F, v = scores(pop)
        rank, crowd, _ = rank_and_crowding(F, v)
        n_off = min(P, problem.budget - len(run.records))
        children = make_offspring(X, rank, crowd, config, rng, b, n_offspring=n_off)
        merged = pop + [run(c, generation, "offspring") for c in children]
        F, v = scores(merged)
        pop = [merged[i] for i in survivors(F, v, min(P, len(merged)))]
    return run.records
