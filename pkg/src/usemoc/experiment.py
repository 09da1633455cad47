"""Budgeted experiment runs with persistent, replayable histories.

An output directory holds::

    config.json     the resolved configuration and its hash
    history.jsonl   header line + one record per expensive evaluation
    curve.csv       evaluation_index,phv
    summary.json    final PHV, feasible count, wall time, status

The history is appended and fsync'ed after every evaluation, so it doubles
as the checkpoint: an interrupted run resumes from it and produces the same
bytes as an uninterrupted one.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import engine
from .baselines import nsga2_direct, random_search
from .benchmarks import BENCHMARKS, get_benchmark, make_problem
from .engine import BLACKBOX, ConstraintSpec, EngineConfig, EvaluationRecord, ProblemSpec
from .errors import ConfigMismatchError, ConfigurationError, EvaluationError, InputError
from .gp import GPConfig
from .nsga2 import NsgaConfig
from .pareto import (
    MAX_HV_OBJECTIVES,
    HypervolumeCurve,
    HypervolumeTracker,
    gain_in_simulations,
    pareto_filter,
)
from .protocol import DEFAULT_TIMEOUT, ExternalEvaluator

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = [
    "ALGORITHMS",
    "ExperimentConfig",
    "load_config",
    "config_from_dict",
    "build_problem",
    "config_hash",
    "HistoryLog",
    "run_experiment",
    "resume_experiment",
    "load_run",
    "report",
    "compare",
]

ALGORITHMS = ("usemoc-ei", "usemoc-lcb", "random-search", "nsga2-direct")
HISTORY_SCHEMA = "usemoc.history"
HISTORY_VERSION = 1
CURVE_NOTE = "curves index every expensive evaluation, initial design included"


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment description; every key maps to one TOML entry."""

    problem: str
    algorithm: str
    budget: int
    seed: int
    n_init: int | None = None
    constraint_type: int = BLACKBOX
    band: float = 2.0
    nsga_population: int = 100
    nsga_generations: int = 100
    crossover_probability: float = 0.9
    mutation_probability: float | None = None
    sbx_eta: float = 15.0
    mutation_eta: float = 20.0
    beta_mode: str = "adaptive"
    beta_delta: float = 0.1
    beta_value: float | None = None
    gp_restarts: int = 5
    baseline_population: int | None = None
    output_dir: str | None = None
    # external evaluator
    command: str | None = None
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None
    n_objectives: int | None = None
    senses: tuple[str, ...] | None = None
    n_blackbox: int = 0
    timeout: float = DEFAULT_TIMEOUT
    reference_point: tuple[float, ...] | None = None

    def __post_init__(self):
        for name in ("lower", "upper", "senses", "reference_point"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(value))
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(
                f"unknown algorithm {self.algorithm!r}; choose from {list(ALGORITHMS)}"
            )
        if self.problem != "external" and self.problem not in BENCHMARKS:
            raise ConfigurationError(
                f"unknown problem {self.problem!r}; choose from {sorted(BENCHMARKS) + ['external']}"
            )
        if self.problem == "external":
            missing = [
                k for k in ("command", "lower", "upper", "n_objectives") if getattr(self, k) is None
            ]
            if missing:
                raise ConfigurationError(f"external problem needs {missing}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigurationError("seed must be an explicit integer")

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}

    def engine_config(self):
        return EngineConfig(
            acquisition="EI" if self.algorithm == "usemoc-ei" else "LCB",
            nsga=self.nsga_config(),
            gp=GPConfig(restarts=self.gp_restarts),
            beta_mode=self.beta_mode,
            beta_delta=self.beta_delta,
            beta_value=self.beta_value,
        )

    def nsga_config(self):
        return NsgaConfig(
            population_size=self.nsga_population,
            generations=self.nsga_generations,
            crossover_probability=self.crossover_probability,
            mutation_probability=self.mutation_probability,
            sbx_eta=self.sbx_eta,
            mutation_eta=self.mutation_eta,
        )


def load_config(path, **overrides):
    """Read a flat TOML config; keyword overrides win (None is ignored)."""
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigurationError(f"config must be flat; found tables {nested}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(data)


def config_from_dict(data):
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(f"unknown config keys {unknown}")
    missing = [k for k in ("problem", "algorithm", "budget", "seed") if k not in data]
    if missing:
        raise ConfigurationError(f"config lacks required keys {missing}")
    return ExperimentConfig(**data)


def config_hash(config):
    """SHA-256 of the configuration, ignoring where the output goes."""
    d = config.to_dict()
    d.pop("output_dir", None)
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def build_problem(config):
    """Engine problem for a config (opens a child process for ``external``)."""
    if config.problem == "external":
        lower = np.asarray(config.lower, dtype=float)
        upper = np.asarray(config.upper, dtype=float)
        k = int(config.n_objectives)
        evaluator = ExternalEvaluator(config.command, k, config.n_blackbox, config.timeout)
        return ProblemSpec(
            bounds=np.column_stack([lower, upper]),
            objective_names=tuple(f"f{i + 1}" for i in range(k)),
            evaluator=evaluator,
            budget=config.budget,
            senses=config.senses,
            constraints=tuple(ConstraintSpec(f"c{i + 1}", BLACKBOX) for i in range(config.n_blackbox)),
            n_init=config.n_init,
            reference_point=config.reference_point,
            name="external",
        )
    options = {"band": config.band} if config.problem == "mock_vr" else {}
    bench = get_benchmark(config.problem, **options)
    return make_problem(bench, config.budget, config.n_init, config.constraint_type)


# -- history ---------------------------------------------------------------


def _floats(values):
    return [float(v) for v in np.asarray(values, dtype=float).ravel()]


def record_to_json(rec, index, phv):
    return {
        "index": int(index),
        "iteration": int(rec.iteration),
        "x": _floats(rec.x),
        "y": _floats(rec.Y),
        "c": _floats(rec.C),
        "feasible": bool(rec.feasible),
        "provenance": rec.provenance,
        "phv": None if phv is None else float(phv),
    }


def record_from_json(d):
    return EvaluationRecord(
        x=np.array(d["x"], dtype=float),
        Y=np.array(d["y"], dtype=float),
        C=np.array(d["c"], dtype=float),
        feasible=bool(d["feasible"]),
        iteration=int(d["iteration"]),
        provenance=d["provenance"],
    )


class HistoryLog:
    """Append-only JSON Lines file: one header, then one line per record."""

    def __init__(self, path):
        self.path = Path(path)

    @staticmethod
    def header(config, problem):
        return {
            "schema": HISTORY_SCHEMA,
            "version": HISTORY_VERSION,
            "config_hash": config_hash(config),
            "problem": config.problem,
            "algorithm": config.algorithm,
            "seed": config.seed,
            "objectives": list(problem.objective_names),
            "senses": list(problem.senses),
            "constraints": [c.name for c in problem.constraints],
            "reference_point": None
            if problem.reference_point is None
            else _floats(problem.reference_point),
        }

    def read(self):
        """Return ``(header, records)``; a torn trailing line is discarded."""
        if not self.path.exists():
            return None, []
        raw = self.path.read_bytes()
        lines = raw.split(b"\n")
        complete, tail = lines[:-1], lines[-1]
        if tail:
            # the last write was interrupted before its newline
            self.path.write_bytes(b"".join(line + b"\n" for line in complete))
        if not complete:
            return None, []
        header = json.loads(complete[0])
        if header.get("schema") != HISTORY_SCHEMA:
            raise InputError(f"{self.path} is not a history log")
        if header.get("version") != HISTORY_VERSION:
            raise InputError(f"unsupported history version {header.get('version')}")
        return header, [json.loads(line) for line in complete[1:]]

    def _write_line(self, obj, mode="a"):
        with open(self.path, mode, encoding="utf-8") as fh:
            fh.write(json.dumps(obj) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def start(self, header):
        self._write_line(header, mode="w")

    def append(self, entry):
        self._write_line(entry)


# -- running ---------------------------------------------------------------


class _StopRun(Exception):
    pass


def _diff(stored, new):
    keys = sorted(set(stored) | set(new))
    return {k: (stored.get(k), new.get(k)) for k in keys if stored.get(k) != new.get(k)}


def _hv_reference(problem):
    if problem.reference_point is None or problem.k > MAX_HV_OBJECTIVES:
        return None
    return problem.reference_point


def run_experiment(config, out_dir=None, stop_after=None):
    """Run (or continue) an experiment into ``out_dir``.

    ``stop_after`` ends the run once the history holds that many records,
    leaving it resumable (used to exercise interruption).

    Raises:
        ConfigMismatchError: ``out_dir`` holds a run with a different config.
        EvaluationError: the evaluator failed; the history written so far is
            kept and the summary marks the run as aborted.
    """
    out = Path(out_dir or config.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    digest = config_hash(config)
    cfg_path = out / "config.json"
    if cfg_path.exists():
        stored = json.loads(cfg_path.read_text())
        if stored["hash"] != digest:
            diff = _diff(stored["config"], config.to_dict())
            diff.pop("output_dir", None)
            raise ConfigMismatchError(
                f"{out} holds a run with a different configuration: {sorted(diff)}", diff
            )
    else:
        cfg_path.write_text(json.dumps({"config": config.to_dict(), "hash": digest}, indent=2) + "\n")

    problem = build_problem(config)
    log = HistoryLog(out / "history.jsonl")
    header, entries = log.read()
    if header is None:
        log.start(HistoryLog.header(config, problem))
    elif header["config_hash"] != digest:
        raise ConfigMismatchError(
            f"{log.path} was written by a different configuration", {"config_hash": (header["config_hash"], digest)}
        )
    history = [record_from_json(e) for e in entries]

    ref = _hv_reference(problem)
    tracker = None if ref is None else HypervolumeTracker(ref)
    if tracker is not None:
        for r in history:
            tracker.add(r.Y * problem.signs, r.feasible)
    count = [len(history)]

    def on_record(rec):
        phv = None if tracker is None else tracker.add(rec.Y * problem.signs, rec.feasible)
        log.append(record_to_json(rec, count[0], phv))
        count[0] += 1
        if stop_after is not None and count[0] >= stop_after:
            raise _StopRun

    started = time.perf_counter()
    status, error = "complete", None
    try:
        if stop_after is not None and count[0] >= stop_after:
            raise _StopRun
        _dispatch(config, problem, history, on_record)
    except _StopRun:
        status = "interrupted"
    except EvaluationError as exc:
        status, error = "aborted", exc
    finally:
        close = getattr(problem.evaluator, "close", None)
        if close is not None:
            close()
    _finalize(out, config, problem, status, time.perf_counter() - started, error)
    if error is not None:
        raise error
    return out


def _dispatch(config, problem, history, on_record):
    if config.algorithm.startswith("usemoc"):
        engine.run(problem, config.engine_config(), config.seed, on_record, history)
    elif config.algorithm == "random-search":
        random_search(problem, config.seed, on_record, history)
    else:
        nsga2_direct(
            problem,
            config.seed,
            config.nsga_config(),
            config.baseline_population,
            on_record,
            history,
        )


def _finalize(out, config, problem, status, wall_time, error):
    _, entries = HistoryLog(out / "history.jsonl").read()
    phv = [e["phv"] for e in entries]
    with open(out / "curve.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["evaluation_index", "phv"])
        for e in entries:
            w.writerow([e["index"], "" if e["phv"] is None else repr(e["phv"])])
    Ymin = np.array([e["y"] for e in entries]).reshape(len(entries), problem.k) * problem.signs
    feas = np.array([e["feasible"] for e in entries], dtype=bool)
    front = pareto_filter(Ymin, feas) if entries else np.array([], dtype=int)
    summary = {
        "status": status,
        "problem": config.problem,
        "algorithm": config.algorithm,
        "seed": config.seed,
        "config_hash": config_hash(config),
        "evaluations": len(entries),
        "budget": config.budget,
        "feasible_count": int(feas.sum()),
        "final_phv": phv[-1] if phv else None,
        "reference_point": None if _hv_reference(problem) is None else _floats(problem.reference_point),
        "pareto_indices": [int(i) for i in front],
        "wall_time_s": wall_time,
        "note": CURVE_NOTE,
    }
    if error is not None:
        summary["error"] = str(error)
        summary["error_x"] = getattr(error, "x", None)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")


def resume_experiment(out_dir, stop_after=None):
    """Continue the run stored in ``out_dir`` with its saved configuration."""
    out = Path(out_dir)
    cfg_path = out / "config.json"
    if not cfg_path.exists():
        raise InputError(f"{out} holds no run to resume")
    stored = json.loads(cfg_path.read_text())
    config = config_from_dict(stored["config"])
    if config_hash(config) != stored["hash"]:
        raise ConfigMismatchError(f"{cfg_path} was modified after the run started", {})
    return run_experiment(config, out, stop_after=stop_after)


# -- reporting ---------------------------------------------------------------


@dataclass
class RunData:
    path: Path
    config: dict
    header: dict
    entries: list = field(repr=False)

    @property
    def label(self):
        return f"{self.config['algorithm']}/seed{self.config['seed']}"

    @property
    def curve(self):
        ref = self.header.get("reference_point")
        if ref is None:
            return None
        return HypervolumeCurve(
            values=np.array([e["phv"] for e in self.entries], dtype=float),
            reference=np.array(ref, dtype=float),
        )


def load_run(out_dir):
    out = Path(out_dir)
    stored = json.loads((out / "config.json").read_text())
    header, entries = HistoryLog(out / "history.jsonl").read()
    if header is None:
        raise InputError(f"{out} has an empty history")
    return RunData(out, stored["config"], header, entries)


def report(out_dir):
    """Plain-text summary of one run."""
    run = load_run(out_dir)
    h = run.header
    senses = h["senses"]
    signs = np.array([1.0 if s == "min" else -1.0 for s in senses])
    Y = np.array([e["y"] for e in run.entries]).reshape(len(run.entries), len(senses))
    feas = np.array([e["feasible"] for e in run.entries], dtype=bool)
    front = pareto_filter(Y * signs, feas) if run.entries else []
    prov = {}
    for e in run.entries:
        prov[e["provenance"]] = prov.get(e["provenance"], 0) + 1
    phv = run.entries[-1]["phv"] if run.entries else None
    lines = [
        f"# {CURVE_NOTE}",
        f"run: {run.path}",
        f"problem: {h['problem']}  algorithm: {h['algorithm']}  seed: {h['seed']}",
        f"evaluations: {len(run.entries)} / {run.config['budget']}",
        f"feasible: {int(feas.sum())}",
        f"final PHV: {'n/a' if phv is None else f'{phv:.6g}'}",
        "provenance: " + ", ".join(f"{k}={v}" for k, v in sorted(prov.items())),
        f"Pareto set ({len(front)} designs):",
    ]
    names = h["objectives"]
    for i in front:
        e = run.entries[i]
        vals = "  ".join(f"{n}={v:.6g}" for n, v in zip(names, e["y"]))
        lines.append(f"  [{i}] {vals}")
    return "\n".join(lines)


def _fmt_gain(g):
    return "not reached" if g is None else f"{g:.1f}%"


def compare(run_dirs, out_dir=None):
    """Pairwise gain-in-simulations table and merged PHV curves.

    Every ordered pair (target, baseline) is reported, including a run
    against itself. Writes ``comparison.csv`` and ``merged_curves.csv``
    when ``out_dir`` is given.

    Raises:
        InputError: runs differ in problem or reference point, or lack a
            hypervolume curve.
    """
    runs = [load_run(d) for d in run_dirs]
    if not runs:
        raise InputError("nothing to compare")
    mismatches = []
    for r in runs[1:]:
        for key in ("problem", "reference_point", "objectives", "senses"):
            if r.header.get(key) != runs[0].header.get(key):
                mismatches.append(f"{r.path}: {key} {r.header.get(key)!r} != {runs[0].header.get(key)!r}")
    if mismatches:
        raise InputError("incompatible runs:\n" + "\n".join(mismatches))
    if runs[0].curve is None:
        raise InputError("runs have no hypervolume curve (no reference point or too many objectives)")
    gains = []
    for t in runs:
        for b in runs:
            gains.append(
                {
                    "target": str(t.path),
                    "baseline": str(b.path),
                    "target_label": t.label,
                    "baseline_label": b.label,
                    "gain": gain_in_simulations(t.curve, b.curve),
                }
            )
    lines = [f"# {CURVE_NOTE}", "target | baseline | gain in simulations"]
    lines += [f"{g['target']} | {g['baseline']} | {_fmt_gain(g['gain'])}" for g in gains]
    table = "\n".join(lines)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "comparison.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["target", "baseline", "gain_percent"])
            for g in gains:
                w.writerow([g["target"], g["baseline"], _fmt_gain(g["gain"]).rstrip("%")])
        length = max(len(r.entries) for r in runs)
        with open(out / "merged_curves.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["evaluation_index"] + [str(r.path) for r in runs])
            for i in range(length):
                row = [i]
                for r in runs:
                    row.append(repr(r.entries[i]["phv"]) if i < len(r.entries) else "")
                w.writerow(row)
    return {"runs": [str(r.path) for r in runs], "gains": gains, "table": table}
