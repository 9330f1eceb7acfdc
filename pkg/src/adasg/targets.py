"""Target functions: built-in analytic families with known analyticity metadata,
plus a file-based protocol for coupling external solvers.

The external protocol is batch polling over plain CSV files so that legacy or
HPC codes can answer sample requests without linking anything: the driver
writes `points.csv`, the evaluator answers with `values.csv` and then creates
a `done` sentinel; partial files are never read.
"""

from __future__ import annotations

import math
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .spectral import legendre_1d

BUILTIN_NAMES = ("rational", "expsum", "gaussian_peak", "legendre_mode")


class EvaluationError(RuntimeError):
    """Target evaluation failed; carries the offending point ids when known."""

    def __init__(self, message, failed_ids=()):
        super().__init__(message)
        self.failed_ids = tuple(failed_ids)


@dataclass
class TargetSpec:
    """A target function: a built-in analytic family or an external evaluator."""

    kind: str                 # builtin name or "external"
    dim: int
    params: dict = field(default_factory=dict)
    analyticity_rho: tuple[float, ...] | None = None
    workdir: str | None = None
    command: str | None = None
    timeout: float = 600.0

    def evaluate(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise ValueError(f"points must have dimension {self.dim}")
        if self.kind == "external":
            return external_evaluate(self.workdir, pts, self.command, self.timeout)
        vals = _BUILTINS[self.kind](pts, self.params)
        bad = np.flatnonzero(~np.isfinite(vals))
        if len(bad):
            raise EvaluationError(
                f"target returned non-finite values at {len(bad)} points", bad.tolist()
            )
        return vals


def _rational(pts, params):
    c0 = params["c0"]
    c = np.asarray(params["c"], dtype=float)
    return 1.0 / (c0 + pts @ c)


def _expsum(pts, params):
    c = np.asarray(params["c"], dtype=float)
    return np.exp(-(pts @ c))


def _gaussian_peak(pts, params):
    c = np.asarray(params["c"], dtype=float)
    t = np.asarray(params.get("t", np.zeros_like(c)), dtype=float)
    return np.exp(-np.sum(c[None, :] * (pts - t[None, :]) ** 2, axis=1))


def _legendre_mode(pts, params):
    nu = params["nu"]
    out = np.ones(len(pts))
    for k, n in enumerate(nu):
        out *= legendre_1d(int(n), pts[:, k])
    return out


_BUILTINS = {
    "rational": _rational,
    "expsum": _expsum,
    "gaussian_peak": _gaussian_peak,
    "legendre_mode": _legendre_mode,
}


def bernstein_rho(singularity: float) -> float:
    """Ellipse parameter of the largest analyticity ellipse for a real pole."""
    s = abs(singularity)
    if s <= 1.0:
        raise ValueError("singularity inside [-1,1]")
    return s + math.sqrt(s * s - 1.0)


def builtin_target(name: str, d: int, **params) -> TargetSpec:
    """Construct a built-in target; fills per-direction analyticity where known."""
    if name not in BUILTIN_NAMES:
        raise ValueError(f"unknown builtin target {name!r}; known: {BUILTIN_NAMES}")
    rho = None
    if name == "rational":
        c0 = float(params["c0"])
        c = [float(v) for v in params["c"]]
        if len(c) != d:
            raise ValueError("coefficient vector must have length d")
        if not c0 > sum(abs(v) for v in c):
            raise ValueError("need c0 > sum |c_k| so the pole stays off the cube")
        rho = []
        for k in range(d):
            if c[k] == 0.0:
                rho.append(math.inf)
                continue
            # 1D restriction: worst-case pole location over the other variables
            slack = c0 - sum(abs(v) for j, v in enumerate(c) if j != k)
            rho.append(bernstein_rho(slack / abs(c[k])))
        params = {"c0": c0, "c": c}
        rho = tuple(rho)
    elif name == "expsum":
        c = [float(v) for v in params["c"]]
        if len(c) != d:
            raise ValueError("coefficient vector must have length d")
        params = {"c": c}
        rho = (math.inf,) * d
    elif name == "gaussian_peak":
        c = [float(v) for v in params["c"]]
        t = [float(v) for v in params.get("t", [0.0] * d)]
        if len(c) != d or len(t) != d:
            raise ValueError("coefficient/center vectors must have length d")
        params = {"c": c, "t": t}
        rho = (math.inf,) * d
    else:  # legendre_mode
        nu = tuple(int(v) for v in params["nu"])
        if len(nu) != d:
            raise ValueError("mode index must have length d")
        params = {"nu": nu}
    return TargetSpec(name, d, params, rho)


def external_target(d: int, workdir, command: str | None = None,
                    timeout: float = 600.0) -> TargetSpec:
    return TargetSpec("external", d, {}, None, str(workdir), command, timeout)


# ---------------------------------------------------------------------------
# file protocol


def write_points_csv(path, points: np.ndarray) -> None:
    d = points.shape[1]
    with open(path, "w", newline="") as fh:
        fh.write("id," + ",".join(f"y_{k + 1}" for k in range(d)) + "\n")
        for i, row in enumerate(points):
            fh.write(f"{i}," + ",".join(f"{v:.17g}" for v in row) + "\n")


def read_points_csv(path) -> tuple[list[int], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        has_id = header and header[0] == "id"
        ycols = header[1:] if has_id else header
        if ycols != [f"y_{k + 1}" for k in range(len(ycols))]:
            raise ValueError(f"bad points header: {header}")
        ids, rows = [], []
        for n, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if has_id:
                ids.append(int(parts[0]))
                rows.append([float(v) for v in parts[1:]])
            else:
                ids.append(n)
                rows.append([float(v) for v in parts])
    return ids, np.array(rows, dtype=float)


def read_values_csv(path) -> dict[int, float]:
    out = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header.split(",") != ["id", "f"]:
            raise ValueError(f"bad values header: {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            i, v = line.split(",")
            out[int(i)] = float(v)
    return out


def external_evaluate(workdir, points, command: str | None = None,
                      timeout: float = 600.0, poll_interval: float = 0.05) -> np.ndarray:
    """Round-trip a batch of points through the file protocol.

    Writes `points.csv`, runs `command` (if configured) or polls until the
    evaluator has produced `values.csv` followed by the `done` sentinel, then
    validates that every id was answered with a finite value.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        return np.zeros(0)
    wd = Path(workdir)
    wd.mkdir(parents=True, exist_ok=True)
    values_path = wd / "values.csv"
    done_path = wd / "done"
    for stale in (values_path, done_path):
        if stale.exists():
            stale.unlink()
    write_points_csv(wd / "points.csv", pts)
    if command:
        proc = subprocess.run(shlex.split(command), cwd=wd,
                              capture_output=True, text=True, timeout=timeout)
        if proc.returncode != 0:
            raise EvaluationError(
                f"external evaluator exited with {proc.returncode}: {proc.stderr.strip()}"
            )
    deadline = time.monotonic() + timeout
    while not done_path.exists():
        if time.monotonic() > deadline:
            raise EvaluationError(f"timed out after {timeout}s waiting for {done_path}")
        time.sleep(poll_interval)
    got = read_values_csv(values_path)
    missing = [i for i in range(len(pts)) if i not in got]
    if missing:
        raise EvaluationError(f"evaluator left {len(missing)} ids unanswered", missing)
    vals = np.array([got[i] for i in range(len(pts))])
    bad = np.flatnonzero(~np.isfinite(vals))
    if len(bad):
        raise EvaluationError(f"non-finite values for ids {bad.tolist()}", bad.tolist())
    return vals
