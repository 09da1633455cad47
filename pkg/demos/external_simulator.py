"""
Driving an external simulator with checkpointed runs
====================================================

The optimizer talks to a child process over line-delimited JSON. This
script writes a tiny stand-in simulator, runs an experiment that gets
interrupted halfway, resumes it, and compares it with random search.
"""

import sys
import tempfile
import textwrap
from pathlib import Path

from usemoc.experiment import ExperimentConfig, compare, report, resume_experiment, run_experiment

work = Path(tempfile.mkdtemp(prefix="usemoc-demo-"))

# The simulator reads {"x": [...]} lines and answers {"y": [...], "c": [...]}.
sim = work / "simulator.py"
sim.write_text(textwrap.dedent("""
    import json, math, sys
    for line in sys.stdin:
        x = json.loads(line)["x"]
        loss = (x[0] - 0.3) ** 2 + (x[1] - 0.6) ** 2
        area = x[0] + x[1]
        print(json.dumps({"y": [loss, area], "c": [0.4 - area]}), flush=True)
"""))

common = dict(
    problem="external",
    command=f"{sys.executable} {sim}",
    lower=[0.0, 0.0],
    upper=[1.0, 1.0],
    n_objectives=2,
    n_blackbox=1,
    reference_point=[1.0, 2.5],
    budget=24,
    n_init=8,
    seed=0,
    nsga_population=40,
    nsga_generations=40,
)

# stop after 15 evaluations to mimic a crash, then continue from the log
ours = run_experiment(ExperimentConfig(algorithm="usemoc-lcb", **common), work / "lcb", stop_after=15)
print((ours / "summary.json").read_text())
resume_experiment(ours)
print(report(ours))

rs = run_experiment(ExperimentConfig(algorithm="random-search", **common), work / "rs")
print()
print(compare([ours, rs], work / "comparison")["table"])
print(f"\nartifacts in {work}")
