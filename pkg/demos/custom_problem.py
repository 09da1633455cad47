"""
Defining a problem and stepping the loop by hand
================================================

A toy design problem with all three constraint kinds: a white-box
constraint on the inputs, a black-box constraint reported by the
evaluator, and a composite constraint computed from an objective value.
The loop is driven one iteration at a time.
"""

import numpy as np

from usemoc import BLACKBOX, COMPOSITE, WHITEBOX, ConstraintSpec, EngineConfig, ProblemSpec
from usemoc.engine import initialize, pareto_archive, step
from usemoc.nsga2 import NsgaConfig


def simulate(x):
    """Pretend simulator: returns (objectives, black-box constraint values)."""
    cost = x[0] ** 2 + 0.5 * x[1] ** 2
    efficiency = np.exp(-((x[0] - 1.0) ** 2) - (x[1] - 0.5) ** 2)
    stress = x[0] * x[1] - 0.8  # must stay <= 0
    return [cost, efficiency], [stress]


problem = ProblemSpec(
    bounds=[[0.0, 2.0], [0.0, 2.0]],
    objective_names=("cost", "efficiency"),
    senses=("min", "max"),
    evaluator=simulate,
    budget=20,
    n_init=6,
    constraints=(
        ConstraintSpec("stress", BLACKBOX),
        # inputs known in closed form: x0 + x1 <= 2.5
        ConstraintSpec("size", WHITEBOX, lambda x: x[..., 0] + x[..., 1] - 2.5),
        # at least 40% efficiency; during the search the GP mean stands in
        ConstraintSpec("floor", COMPOSITE, lambda x, v: 0.4 - v["efficiency"], uses=("efficiency",)),
    ),
    reference_point=[5.0, 0.0],  # minimization orientation: -efficiency <= 0
)

# a lighter inner solver keeps the demo quick
config = EngineConfig(acquisition="EI", nsga=NsgaConfig(population_size=40, generations=40))

state = initialize(problem, seed=1, config=config)
print(f"initial design: {state.feasible.sum()} of {problem.n_init} feasible")

while state.budget_left > 0:
    state, rec = step(state)
    print(f"iter {rec.iteration:2d}  {rec.provenance:<20s} x={np.round(rec.x, 3)}  "
          f"cost={rec.Y[0]:.3f} eff={rec.Y[1]:.3f} feasible={rec.feasible}")

archive = pareto_archive(problem, state.history)
print(f"\nPareto set ({len(archive.indices)} designs), PHV {archive.curve.final:.4f}:")
for x, y in zip(archive.X, archive.Y):
    print(f"  x={np.round(x, 3)}  cost={y[0]:.3f}  efficiency={y[1]:.3f}")
