"""Line-delimited JSON protocol for external (simulator) evaluators.

The child process reads one request per line on stdin and writes one
response per line on stdout::

    -> {"x": [0.5, 0.5]}
    <- {"y": [1.0, 2.0], "c": [-0.1]}

``y`` holds the objective values, ``c`` the blackbox constraint values
(``<= 0`` satisfied). ``c`` may be omitted only when the problem declares
no blackbox constraints. Anything written to stderr is passed through.
"""

from __future__ import annotations

import json
import math
import queue
import shlex
import subprocess
import threading

import numpy as np

from .errors import EvaluationError, EvaluationTimeout, ProtocolError

__all__ = ["ExternalEvaluator", "external_evaluate", "parse_response", "DEFAULT_TIMEOUT"]

DEFAULT_TIMEOUT = 600.0


def _number_list(payload, key, expected, raw, x):
    values = payload[key]
    if not isinstance(values, list):
        raise ProtocolError(f'"{key}" must be an array', x, raw)
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ProtocolError(f'"{key}" must contain finite numbers', x, raw)
    if len(values) != expected:
        raise ProtocolError(
            f'"{key}" has {len(values)} entries, expected {expected}', x, raw
        )
    return [float(v) for v in values]


def parse_response(raw, n_objectives, n_constraints, x=None):
    """Validate one response line and return ``(Y, C)`` lists."""
    try:
        payload = json.loads(raw)
    except (json.JSONDecodeError, TypeError) as exc:
        raise ProtocolError(f"response is not valid JSON: {exc}", x, raw) from None
    if not isinstance(payload, dict):
        raise ProtocolError("response must be a JSON object", x, raw)
    if "y" not in payload:
        raise ProtocolError('response lacks "y"', x, raw)
    Y = _number_list(payload, "y", n_objectives, raw, x)
    if "c" not in payload:
        if n_constraints:
            raise ProtocolError('response lacks "c" on a constrained problem', x, raw)
        return Y, []
    return Y, _number_list(payload, "c", n_constraints, raw, x)


class ExternalEvaluator:
    """Expensive evaluator backed by a long-lived child process.

    Usable directly as the ``evaluator`` of a problem. The process starts on
    first use; call :meth:`close` (or use it as a context manager) when done.
    """

    def __init__(self, command, n_objectives, n_constraints=0, timeout=DEFAULT_TIMEOUT, cwd=None, env=None):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.n_objectives = int(n_objectives)
        self.n_constraints = int(n_constraints)
        self.timeout = float(timeout)
        self.cwd = cwd
        self.env = env
        self._proc = None
        self._lines = None

    def start(self):
        if self._proc is not None:
            return
        self._proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
            cwd=self.cwd,
            env=self.env,
        )
        self._lines = queue.Queue()
        threading.Thread(
            target=self._pump, args=(self._proc.stdout, self._lines), daemon=True
        ).start()

    @staticmethod
    def _pump(stream, lines):
        for line in stream:
            lines.put(line)
        lines.put(None)

    def __call__(self, x):
        self.start()
        xs = [float(v) for v in np.asarray(x, dtype=float).ravel()]
        try:
            self._proc.stdin.write(json.dumps({"x": xs}) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self._terminate()
            raise EvaluationError(f"evaluator process is not accepting input: {exc}", xs) from None
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            self._terminate()
            raise EvaluationTimeout(
                f"no response within {self.timeout:g} s for x={xs}", xs
            ) from None
        if line is None:
            # stdout closes slightly before the process is reaped
            try:
                code = self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                code = None
            self._terminate()
            raise EvaluationError(f"evaluator process exited (code {code})", xs)
        return parse_response(line.rstrip("\n"), self.n_objectives, self.n_constraints, xs)

    def _terminate(self):
        proc, self._proc = self._proc, None
        if proc is None:
            return
        if proc.poll() is None:
            proc.kill()
        proc.wait()
        for stream in (proc.stdin, proc.stdout):
            try:
                stream.close()
            except OSError:
                pass

    def close(self):
        proc = self._proc
        if proc is None:
            return
        try:
            proc.stdin.close()
            proc.wait(timeout=5)
        except (OSError, subprocess.TimeoutExpired):
            pass
        self._terminate()

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.close()


def external_evaluate(evaluator, x):
    """Evaluate ``x`` through an :class:`ExternalEvaluator` or a spec dict.

    A dict is passed to the constructor and the process is closed afterwards.
    """
    if isinstance(evaluator, ExternalEvaluator):
        return evaluator(x)
    with ExternalEvaluator(**evaluator) as ev:
        return ev(x)
