"""Sparse-grid interpolants: minimal tensor selection, node enumeration, and
construction/evaluation in hierarchical-surplus and combination-weight form.

The surplus (Newton) form is the production evaluation path; the
combination-weight form is kept for cross-validation, since both must agree
on lower tensor sets.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass

import numpy as np

from . import rules1d
from .multiindex import (
    CurvedWeights,
    IndexSet,
    MultiIndex,
    graded_lex_key,
    is_lower,
    lambda_curved,
)


class DomainError(ValueError):
    """Evaluation point outside the interpolation hypercube."""


@dataclass(frozen=True)
class TensorSet:
    """A lower set of tensor levels together with the 1D rule fixing m and nodes."""

    theta: IndexSet
    rule: str

    def __post_init__(self):
        rules1d.growth(self.rule, 0)  # validates the kind
        if self.theta.lower_flag is None:
            is_lower(self.theta)
        if not self.theta.lower_flag:
            raise ValueError("tensor set must be downward closed")

    @property
    def dim(self) -> int:
        return self.theta.dim


def theta_opt(lam: IndexSet, rule: str) -> TensorSet:
    """Smallest lower tensor set whose interpolant range contains P_lam.

    A level index i belongs iff the degree vector (m(i_1 - 1), ..., m(i_d - 1))
    is a member of lam.
    """
    if len(lam) == 0:
        raise ValueError("need a nonempty polynomial index set")
    if lam.lower_flag is None:
        is_lower(lam)
    if not lam.lower_flag:
        raise ValueError("polynomial index set must be downward closed")
    top = max(lam.max_degrees())
    level_of = {0: 0}  # degree m(i-1) -> level i, with m(-1) = 0
    l = 0
    while True:
        m = rules1d.growth(rule, l)
        if m > top:
            break
        level_of[m] = l + 1
        l += 1
    members = []
    for nu in lam.members:
        levels = []
        for v in nu:
            li = level_of.get(v)
            if li is None:
                break
            levels.append(li)
        else:
            members.append(tuple(levels))
    return TensorSet(IndexSet(lam.dim, members, lower_flag=True), rule)


def theta_curved(w: CurvedWeights, L: float, rule: str) -> TensorSet:
    """Optimal tensor set for the curved space with weights w at level L."""
    return theta_opt(lambda_curved(w, L), rule)


@dataclass
class GridNodes:
    """1-based tensor point indices (graded-lex) and their coordinates."""

    indices: tuple[MultiIndex, ...]
    points: np.ndarray  # (N, d)

    def __len__(self) -> int:
        return len(self.indices)

    def row_of(self) -> dict[MultiIndex, int]:
        return {j: r for r, j in enumerate(self.indices)}


def grid_nodes(ts: TensorSet) -> GridNodes:
    """Union of index boxes {1 <= j <= m(i)} over the tensor set, with coordinates."""
    d = ts.dim
    seen: set[MultiIndex] = set()
    for i in ts.theta.members:
        # disjoint new block per level: m(i_k - 1) + 1 .. m(i_k)
        ranges = [
            range(rules1d.growth(ts.rule, i[k] - 1) + 1, rules1d.growth(ts.rule, i[k]) + 1)
            for k in range(d)
        ]
        seen.update(itertools.product(*ranges))
    indices = tuple(sorted(seen, key=graded_lex_key))
    if not indices:
        return GridNodes(indices, np.zeros((0, d)))
    mmax = [max(j[k] for j in indices) for k in range(d)]
    nodes1d = [rules1d.family_nodes(ts.rule, m) for m in mmax]
    pts = np.empty((len(indices), d))
    for r, j in enumerate(indices):
        for k in range(d):
            pts[r, k] = nodes1d[k][j[k] - 1]
    return GridNodes(indices, pts)


def grid_size(ts: TensorSet) -> int:
    """Node count via the disjoint-block formula, without enumerating points."""
    total = 0
    for i in ts.theta.members:
        prod = 1
        for k in range(ts.dim):
            prod *= rules1d.growth(ts.rule, i[k]) - rules1d.growth(ts.rule, i[k] - 1)
        total += prod
    return total


def polynomial_range(ts: TensorSet) -> IndexSet:
    """Degrees spanned by the interpolant: grid indices shifted down by one."""
    seen: set[MultiIndex] = set()
    for i in ts.theta.members:
        ranges = [
            range(rules1d.growth(ts.rule, i[k] - 1), rules1d.growth(ts.rule, i[k]))
            for k in range(ts.dim)
        ]
        seen.update(itertools.product(*ranges))
    return IndexSet(ts.dim, seen, lower_flag=True)


def combination_weights(ts: TensorSet) -> dict[MultiIndex, int]:
    """Integer weights t_i = sum over e in {0,1}^d with i+e in theta of (-1)^|e|."""
    theta = ts.theta
    out = {}
    for i in theta.members:
        t = 0
        for e in itertools.product((0, 1), repeat=ts.dim):
            succ = tuple(i[k] + e[k] for k in range(ts.dim))
            if succ in theta:
                t += -1 if sum(e) % 2 else 1
        out[i] = t
    return out


def _newton_tables(rule: str, mmax: list[int]) -> list[np.ndarray]:
    """Per-dimension tables T[j-1, i-1] = h_j(y_i) for the 1D Newton basis."""
    tables = []
    for m in mmax:
        x = rules1d.family_nodes(rule, m)
        N = np.ones((m, m))
        for j in range(1, m):
            N[j] = N[j - 1] * (x - x[j - 1])
        D = np.diag(N).copy()
        tables.append(N / D[:, None])
    return tables


def compute_surpluses(ts: TensorSet, samples: dict[MultiIndex, float]) -> dict[MultiIndex, float]:
    """Newton-basis surpluses from samples keyed by 1-based grid index."""
    grid = grid_nodes(ts)
    values = _aligned_values(grid, samples)
    s = _solve_surpluses(ts.rule, grid, values)
    return {j: float(s[r]) for r, j in enumerate(grid.indices)}


def _aligned_values(grid: GridNodes, samples: dict[MultiIndex, float]) -> np.ndarray:
    missing = [j for j in grid.indices if j not in samples]
    if missing:
        raise ValueError(f"missing samples for {len(missing)} grid nodes, e.g. {missing[0]}")
    return np.array([samples[j] for j in grid.indices], dtype=float)


def _solve_surpluses(
    rule: str,
    grid: GridNodes,
    values: np.ndarray,
    known: dict[MultiIndex, float] | None = None,
) -> np.ndarray:
    """Unitriangular solve in graded-lex order; `known` surpluses are reused."""
    idx = np.array(grid.indices, dtype=np.int64)
    n, d = idx.shape
    mmax = idx.max(axis=0).tolist() if n else [0] * d
    tables = _newton_tables(rule, mmax)
    s = np.empty(n)
    solved = np.zeros(n, dtype=bool)
    if known:
        for r, j in enumerate(grid.indices):
            if j in known:
                s[r] = known[j]
                solved[r] = True
    for r in range(n):
        if solved[r]:
            continue
        i = idx[r]
        mask = np.all(idx[:r] <= i, axis=1)
        rows = np.flatnonzero(mask)
        H = np.ones(len(rows))
        for k in range(d):
            H *= tables[k][idx[rows, k] - 1, i[k] - 1]
        s[r] = values[r] - (s[rows] @ H if len(rows) else 0.0)
    return s


@dataclass
class Interpolant:
    """A built sparse-grid operator, immutable after construction."""

    tensor_set: TensorSet
    grid: GridNodes
    samples: np.ndarray      # aligned with grid.indices
    surpluses: np.ndarray    # aligned with grid.indices
    t_weights: dict[MultiIndex, int]
    range: IndexSet

    @property
    def dim(self) -> int:
        return self.tensor_set.dim

    @property
    def node_count(self) -> int:
        return len(self.grid)

    def sample_map(self) -> dict[MultiIndex, float]:
        return {j: float(self.samples[r]) for r, j in enumerate(self.grid.indices)}

    def surplus_map(self) -> dict[MultiIndex, float]:
        return {j: float(self.surpluses[r]) for r, j in enumerate(self.grid.indices)}


def build_interpolant(
    ts: TensorSet,
    samples: dict[MultiIndex, float],
    previous: Interpolant | None = None,
) -> Interpolant:
    """Assemble the interpolant; surpluses of a previous (nested) build are reused."""
    grid = grid_nodes(ts)
    values = _aligned_values(grid, samples)
    known = None
    if previous is not None:
        if not previous.tensor_set.theta.issubset(ts.theta):
            raise ValueError("previous interpolant is not nested in the new tensor set")
        known = previous.surplus_map()
    s = _solve_surpluses(ts.rule, grid, values, known)
    return Interpolant(ts, grid, values, s, combination_weights(ts), polynomial_range(ts))


def _check_domain(Y: np.ndarray, allow_extrapolation: bool):
    if Y.size and (np.abs(Y) > 1.0).any():
        if allow_extrapolation:
            warnings.warn("evaluating outside [-1,1]^d: Newton form extrapolates wildly",
                          stacklevel=3)
        else:
            raise DomainError("evaluation point outside [-1,1]^d "
                              "(pass allow_extrapolation to override)")


def evaluate_batch(interp: Interpolant, points, allow_extrapolation: bool = False) -> np.ndarray:
    """Surplus-form evaluation at an array of points with shape (P, d)."""
    Y = np.atleast_2d(np.asarray(points, dtype=float))
    if Y.shape[1] != interp.dim:
        raise ValueError(f"points must have dimension {interp.dim}")
    _check_domain(Y, allow_extrapolation)
    idx = np.array(interp.grid.indices, dtype=np.int64)
    n = len(idx)
    if n == 0:
        return np.zeros(len(Y))
    d = interp.dim
    out = np.empty(len(Y))
    chunk = max(1, (1 << 22) // max(1, n))
    mmax = idx.max(axis=0).tolist()
    nodes1d = [rules1d.family_nodes(interp.tensor_set.rule, m) for m in mmax]
    # denominators prod_{t<j}(x_j - x_t) per dimension, independent of Y
    denoms = []
    for k in range(d):
        x = nodes1d[k]
        dd = np.ones(mmax[k])
        run = np.ones(mmax[k])
        for j in range(1, mmax[k]):
            run = run * (x - x[j - 1])
            dd[j] = run[j]
        denoms.append(dd)
    for start in range(0, len(Y), chunk):
        Yc = Y[start:start + chunk]
        G = np.ones((len(Yc), n))
        for k in range(d):
            x = nodes1d[k]
            m = mmax[k]
            N = np.ones((len(Yc), m))
            for j in range(1, m):
                N[:, j] = N[:, j - 1] * (Yc[:, k] - x[j - 1])
            H = N / denoms[k][None, :]
            G *= H[:, idx[:, k] - 1]
        out[start:start + chunk] = G @ interp.surpluses
    return out


def evaluate(interp: Interpolant, point, allow_extrapolation: bool = False) -> float:
    """Surplus-form evaluation at a single point in [-1,1]^d."""
    return float(evaluate_batch(interp, np.asarray(point, dtype=float)[None, :],
                                allow_extrapolation)[0])


def evaluate_combination(interp: Interpolant, points) -> np.ndarray:
    """Combination-weight evaluation (cross-validation path)."""
    Y = np.atleast_2d(np.asarray(points, dtype=float))
    d = interp.dim
    rule = interp.tensor_set.rule
    sample_of = interp.sample_map()
    out = np.zeros(len(Y))
    for i, t in interp.t_weights.items():
        if t == 0:
            continue
        ms = [rules1d.growth(rule, i[k]) for k in range(d)]
        # Lagrange basis per dimension on the full tensor level
        psis = []
        for k in range(d):
            x = rules1d.family_nodes(rule, ms[k])
            psi = np.empty((len(Y), ms[k]))
            for j in range(ms[k]):
                others = np.delete(x, j)
                num = np.prod(Y[:, k, None] - others[None, :], axis=1)
                den = np.prod(x[j] - others)
                psi[:, j] = num / den
            psis.append(psi)
        F = np.empty(ms)
        for jbox in itertools.product(*[range(1, m + 1) for m in ms]):
            F[tuple(v - 1 for v in jbox)] = sample_of[jbox]
        curr = np.einsum("pa,a...->p...", psis[0], F)
        for k in range(1, d):
            curr = np.einsum("pa,pa...->p...", psis[k], curr)
        out += t * curr
    return out


# ---------------------------------------------------------------------------
# persistence

_FORMAT = "adasg-interpolant"
_VERSION = 1


def save_interpolant(interp: Interpolant, path) -> None:
    obj = {
        "format": _FORMAT,
        "version": _VERSION,
        "rule": interp.tensor_set.rule,
        "dim": interp.dim,
        "theta": [list(i) for i in interp.tensor_set.theta.members],
        "grid_indices": [list(j) for j in interp.grid.indices],
        "points": [[float(v) for v in row] for row in interp.grid.points],
        "samples": [float(v) for v in interp.samples],
        "surpluses": [float(v) for v in interp.surpluses],
    }
    with open(path, "w") as fh:
        json.dump(obj, fh)


def load_interpolant(path) -> Interpolant:
    with open(path) as fh:
        obj = json.load(fh)
    if obj.get("format") != _FORMAT or obj.get("version") != _VERSION:
        raise ValueError(f"not a version-{_VERSION} {_FORMAT} file")
    ts = TensorSet(IndexSet(obj["dim"], [tuple(i) for i in obj["theta"]]), obj["rule"])
    grid = grid_nodes(ts)
    stored = [tuple(j) for j in obj["grid_indices"]]
    if list(grid.indices) != stored:
        raise ValueError("grid indices in file do not match the tensor set")
    samples = np.array(obj["samples"], dtype=float)
    surpluses = np.array(obj["surpluses"], dtype=float)
    if len(samples) != len(grid) or len(surpluses) != len(grid):
        raise ValueError("sample/surplus arrays do not match the grid")
    return Interpolant(ts, grid, samples, surpluses,
                       combination_weights(ts), polynomial_range(ts))
