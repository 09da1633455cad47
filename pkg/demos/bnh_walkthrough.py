"""
Sample efficiency on the BNH benchmark
======================================

Runs the optimizer with both acquisition variants on the two-objective,
two-constraint BNH problem and compares the hypervolume curves with
uniform random search spending the same budget.
"""

import numpy as np

from usemoc import EngineConfig, gain_in_simulations, hypervolume_curve, make_problem, random_search, run

# 40 expensive evaluations, the first 10 from a Latin-hypercube design.
# Both constraints are treated as black boxes and get their own GP.
problem = make_problem("bnh", budget=40, n_init=10)
print(f"BNH: d={problem.dim}, k={problem.k}, reference point {problem.reference_point}")


def curve(records):
    Y = np.array([r.Y for r in records]) * problem.signs
    return hypervolume_curve(Y, [r.feasible for r in records], problem.reference_point)


baseline = curve(random_search(problem, seed=0))
print(f"random search: final PHV {baseline.final:.1f}")

for acquisition in ("EI", "LCB"):
    archive, history = run(problem, EngineConfig(acquisition=acquisition), seed=0)
    c = curve(history)
    gain = gain_in_simulations(c, baseline)
    picked = [r.provenance for r in history[problem.n_init:]]
    print(f"\n{acquisition}: final PHV {c.final:.1f}, gain over random search "
          f"{'not reached' if gain is None else f'{gain:.0f}%'}")
    print(f"  selections: {picked.count('candidate')} candidate, {picked.count('fallback')} fallback")
    # the archive holds the feasible non-dominated evaluations
    order = np.argsort(archive.Y[:, 0])
    for x, y in zip(archive.X[order][:5], archive.Y[order][:5]):
        print(f"  x={np.round(x, 3)}  f={np.round(y, 2)}")
