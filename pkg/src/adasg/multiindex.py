"""Multi-index set algebra: lower (downward-closed) sets and weighted sublevel sets.

Multi-indices are plain tuples of non-negative ints.  Sets are stored in
graded lexicographic order (sort by entry sum, ties lexicographic) so that
output files and least-squares assembly are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

MultiIndex = tuple[int, ...]

CLASSIC_KINDS = ("tensor", "total_degree", "hyperbolic", "smolyak")


def graded_lex_key(nu: MultiIndex):
    return (sum(nu), nu)


class IndexSet:
    """An immutable collection of d-dimensional multi-indices in graded-lex order."""

    __slots__ = ("dim", "members", "_member_set", "lower_flag")

    def __init__(self, dim: int, members: Iterable[MultiIndex], lower_flag: bool | None = None):
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        mem = [tuple(int(v) for v in nu) for nu in members]
        for nu in mem:
            if len(nu) != dim:
                raise ValueError(f"multi-index {nu} does not have dimension {dim}")
            if any(v < 0 for v in nu):
                raise ValueError(f"multi-index {nu} has a negative entry")
        uniq = sorted(set(mem), key=graded_lex_key)
        if len(uniq) != len(mem):
            raise ValueError("duplicate multi-indices")
        self.dim = dim
        self.members = tuple(uniq)
        self._member_set = frozenset(uniq)
        self.lower_flag = lower_flag

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, nu) -> bool:
        return tuple(nu) in self._member_set

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, IndexSet)
            and self.dim == other.dim
            and self.members == other.members
        )

    def __hash__(self):
        return hash((self.dim, self.members))

    def __repr__(self):
        return f"IndexSet(dim={self.dim}, n={len(self.members)})"

    def issubset(self, other: "IndexSet") -> bool:
        return self._member_set <= other._member_set

    def union(self, other: "IndexSet") -> "IndexSet":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        return IndexSet(self.dim, self._member_set | other._member_set)

    def max_degrees(self) -> MultiIndex:
        """Componentwise maximum over members; zeros for the empty set."""
        if not self.members:
            return (0,) * self.dim
        return tuple(max(nu[k] for nu in self.members) for k in range(self.dim))


@dataclass(frozen=True)
class CurvedWeights:
    """Anisotropic weights: exponential rates alpha > 0, algebraic corrections beta."""

    alpha: tuple[float, ...]
    beta: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if len(self.alpha) != len(self.beta):
            raise ValueError("alpha and beta must have the same length")

    @property
    def dim(self) -> int:
        return len(self.alpha)


def is_lower(s: IndexSet) -> bool:
    """True iff the set is downward closed (contains all componentwise predecessors)."""
    for nu in s.members:
        for k in range(s.dim):
            if nu[k] > 0:
                pred = nu[:k] + (nu[k] - 1,) + nu[k + 1:]
                if pred not in s:
                    s.lower_flag = False
                    return False
    s.lower_flag = True
    return True


def lower_completion(s: IndexSet) -> IndexSet:
    """Smallest downward-closed superset: the union of boxes {j : j <= nu}."""
    seen = set(s.members)
    stack = list(s.members)
    while stack:
        nu = stack.pop()
        for k in range(s.dim):
            if nu[k] > 0:
                pred = nu[:k] + (nu[k] - 1,) + nu[k + 1:]
                if pred not in seen:
                    seen.add(pred)
                    stack.append(pred)
    return IndexSet(s.dim, seen, lower_flag=True)


def margin(s: IndexSet) -> list[MultiIndex]:
    """Indices outside a lower set whose predecessors all belong to it."""
    if len(s) == 0:
        return [(0,) * s.dim]
    out = set()
    for nu in s.members:
        for k in range(s.dim):
            succ = nu[:k] + (nu[k] + 1,) + nu[k + 1:]
            if succ in s._member_set or succ in out:
                continue
            ok = True
            for j in range(s.dim):
                if succ[j] > 0:
                    pred = succ[:j] + (succ[j] - 1,) + succ[j + 1:]
                    if pred not in s:
                        ok = False
                        break
            if ok:
                out.add(succ)
    return sorted(out, key=graded_lex_key)


def curved_weight_1d(alpha_k: float, beta_k: float, t: int) -> float:
    return alpha_k * t + beta_k * math.log(t + 1)


def _dip_end(alpha_k: float, beta_k: float) -> int:
    # First integer t at which alpha*t + beta*log(t+1) is guaranteed non-decreasing.
    if beta_k >= 0.0:
        return 0
    return max(0, math.ceil(-beta_k / alpha_k - 1.0))


def curved_tail_min(alpha_k: float, beta_k: float, start: int) -> float:
    """Minimum of alpha*t + beta*log(t+1) over integers t >= start."""
    if beta_k >= 0.0:
        return curved_weight_1d(alpha_k, beta_k, start)
    tstar = -beta_k / alpha_k - 1.0
    if tstar <= start:
        return curved_weight_1d(alpha_k, beta_k, start)
    lo = max(start, math.floor(tstar))
    hi = math.ceil(tstar)
    return min(curved_weight_1d(alpha_k, beta_k, t) for t in (lo, hi))


def _enumerate_additive(
    d: int,
    g: Sequence[Callable[[int], float]],
    dip_ends: Sequence[int],
    L: float,
) -> list[MultiIndex]:
    """Members of {nu : sum_k g[k](nu_k) <= L} for per-coordinate weights that are
    non-decreasing beyond dip_ends[k]."""
    # suffix[k]: least possible contribution of coordinates k..d-1
    suffix = [0.0] * (d + 1)
    for k in reversed(range(d)):
        gk = g[k]
        best = min(gk(t) for t in range(0, dip_ends[k] + 1))
        suffix[k] = suffix[k + 1] + min(best, gk(dip_ends[k]))
    out: list[MultiIndex] = []
    prefix = [0] * d

    def scan(k: int, partial: float):
        if k == d:
            if partial <= L:
                out.append(tuple(prefix))
            return
        gk = g[k]
        dip = dip_ends[k]
        t = 0
        while True:
            w = partial + gk(t)
            if w + suffix[k + 1] <= L:
                prefix[k] = t
                scan(k + 1, w)
            elif t >= dip:
                break
            t += 1
        prefix[k] = 0

    scan(0, 0.0)
    return out


def _check_alpha(alpha: Sequence[float]):
    if any(not (a > 0.0) for a in alpha):
        raise ValueError("alpha entries must be strictly positive")


def lambda_curved(w: CurvedWeights, L: float) -> IndexSet:
    """Lower completion of {nu : alpha.nu + beta.log(nu+1) <= L}.

    Membership uses literal floating-point <= with no tolerance.  Negative
    beta entries make the per-coordinate weight dip before increasing; the
    scan runs past the dip so no member is missed.
    """
    _check_alpha(w.alpha)
    d = w.dim
    g = [
        (lambda t, a=w.alpha[k], b=w.beta[k]: a * t + b * math.log(t + 1))
        for k in range(d)
    ]
    dips = [_dip_end(w.alpha[k], w.beta[k]) for k in range(d)]
    raw = _enumerate_additive(d, g, dips, float(L))
    return lower_completion(IndexSet(d, raw))


def lambda_classic(kind: str, alpha: Sequence[float], L: float) -> IndexSet:
    """Classic anisotropic spaces: tensor, total_degree, hyperbolic, smolyak."""
    alpha = tuple(float(a) for a in alpha)
    _check_alpha(alpha)
    d = len(alpha)
    L = float(L)
    if kind == "tensor":
        # max_k alpha_k nu_k <= L: a box
        caps = []
        for a in alpha:
            t = 0
            while a * (t + 1) <= L:
                t += 1
            caps.append(t)
        if L < 0.0:
            return IndexSet(d, [], lower_flag=True)
        members = [()]
        for cap in caps:
            members = [nu + (t,) for nu in members for t in range(cap + 1)]
        return IndexSet(d, members, lower_flag=True)
    if kind == "total_degree":
        g = [(lambda t, a=a: a * t) for a in alpha]
        raw = _enumerate_additive(d, g, [0] * d, L)
        return IndexSet(d, raw, lower_flag=True)
    if kind == "smolyak":
        g = [(lambda t, a=a: a * math.log2(t + 1)) for a in alpha]
        raw = _enumerate_additive(d, g, [0] * d, L)
        return IndexSet(d, raw, lower_flag=True)
    if kind == "hyperbolic":
        # prod_k (nu_k+1)^alpha_k <= L, evaluated literally
        out: list[MultiIndex] = []
        prefix = [0] * d

        def scan(k: int, partial: float):
            if k == d:
                out.append(tuple(prefix))
                return
            t = 0
            while True:
                w = partial * (t + 1) ** alpha[k]
                if w > L:
                    break
                prefix[k] = t
                scan(k + 1, w)
                t += 1
            prefix[k] = 0

        scan(0, 1.0)
        return IndexSet(d, out, lower_flag=True)
    raise ValueError(f"unknown classic kind {kind!r}; expected one of {CLASSIC_KINDS}")


def write_index_set_csv(s: IndexSet, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(f"nu_{k + 1}" for k in range(s.dim)) + "\n")
        for nu in s.members:
            fh.write(",".join(str(v) for v in nu) + "\n")


def read_index_set_csv(path) -> IndexSet:
    with open(path) as fh:
        header = fh.readline().strip()
        cols = header.split(",")
        if cols != [f"nu_{k + 1}" for k in range(len(cols))]:
            raise ValueError(f"bad index-set header: {header!r}")
        members = []
        for line in fh:
            line = line.strip()
            if line:
                members.append(tuple(int(v) for v in line.split(",")))
    return IndexSet(len(cols), members)
