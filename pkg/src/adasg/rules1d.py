"""One-dimensional nested interpolation rules.

Each rule pairs a node sequence on [-1, 1] with a strictly increasing growth
function m(l) giving the number of nodes at level l (m(-1) = 0 by convention).
Closed-form sequences (Clenshaw-Curtis, Fejer-2, R-Leja families) are generated
directly; the greedy families (Leja, max/min Lebesgue, min surplus-norm) are
grown by optimizing their objective over a Chebyshev-distributed candidate
grid followed by a golden-section refinement pass in the winning cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

RULE_KINDS = (
    "clenshaw_curtis",
    "fejer2",
    "rleja",
    "rleja_double2",
    "rleja_double4",
    "rleja_odd",
    "leja",
    "leja_odd",
    "max_lebesgue",
    "max_lebesgue_odd",
    "min_lebesgue",
    "min_lebesgue_odd",
    "min_delta",
    "min_delta_odd",
)

CLOSED_FORM_KINDS = (
    "clenshaw_curtis",
    "fejer2",
    "rleja",
    "rleja_double2",
    "rleja_double4",
    "rleja_odd",
)

GREEDY_FAMILIES = ("leja", "max_lebesgue", "min_lebesgue", "min_delta")

# node-generating family per kind; odd variants share their family's sequence
_FAMILY = {
    "clenshaw_curtis": "cc",
    "fejer2": "fejer2",
    "rleja": "rleja",
    "rleja_double2": "centered_rleja",
    "rleja_double4": "centered_rleja",
    "rleja_odd": "centered_rleja",
    "leja": "leja",
    "leja_odd": "leja",
    "max_lebesgue": "max_lebesgue",
    "max_lebesgue_odd": "max_lebesgue",
    "min_lebesgue": "min_lebesgue",
    "min_lebesgue_odd": "min_lebesgue",
    "min_delta": "min_delta",
    "min_delta_odd": "min_delta",
}

DEFAULT_CANDIDATE_COUNT = 2**17 + 1
# the min-max objectives pay O(candidates x probes) per node; keep their
# default candidate grid at the contract minimum
MINMAX_CANDIDATE_COUNT = 10**4 + 1
DEFAULT_PROBE_COUNT = 10**5

# relative band within which discrete objective values count as tied; each
# tied cell is refined and the tie is re-broken at refined precision
_COARSE_TIE = 1e-9
_REFINED_TIE = 1e-12


def _check_kind(kind: str):
    if kind not in RULE_KINDS:
        raise ValueError(f"unknown rule kind {kind!r}")


def growth(kind: str, l: int) -> int:
    """Number of nodes m(l) at level l; m(-1) = 0 for every kind."""
    _check_kind(kind)
    if l < -1:
        raise ValueError("level must be >= -1")
    if l == -1:
        return 0
    if kind == "clenshaw_curtis":
        return 1 if l == 0 else 2**l + 1
    if kind == "fejer2":
        return 2 ** (l + 1) - 1
    if kind == "rleja_double2":
        if l <= 1:
            return 2 * l + 1
        half = l // 2
        return round(2 ** (half + 1) * (1 + l / 2 - half)) + 1
    if kind == "rleja_double4":
        if l <= 1:
            return 2 * l + 1
        quarter = (l - 2) // 4
        return round(2 ** (2 + quarter) * (1 + (l - 2) / 4 - quarter)) + 1
    if kind in ("rleja_odd", "leja_odd", "max_lebesgue_odd",
                "min_lebesgue_odd", "min_delta_odd"):
        return 2 * l + 1
    # rleja, leja, max_lebesgue, min_lebesgue, min_delta
    return l + 1


def unit_growth(kind: str) -> bool:
    """True when m(l) = l + 1 (one new node per level)."""
    return all(growth(kind, l) == l + 1 for l in range(6))


def lambda_model(kind: str, l: int) -> float:
    """Reference operator-norm growth curve for the rule (natural logs)."""
    _check_kind(kind)
    if l < 0:
        raise ValueError("level must be >= 0")
    if kind == "clenshaw_curtis":
        return (2.0 / math.pi) * math.log(2.0**l + 1.0)
    if kind == "fejer2":
        return (2.0 / math.pi) * math.log(2.0 ** (l + 1) - 1.0)
    if kind in ("rleja", "rleja_double2", "rleja_double4"):
        return 1.5 * (l + 1)
    if kind == "rleja_odd":
        return 3.0 * (l + 1)
    if kind == "leja":
        return 3.0 * math.sqrt(l + 1.0)
    if kind == "leja_odd":
        return 6.0 * math.sqrt(l + 1.0)
    if kind in ("max_lebesgue", "min_lebesgue"):
        return 4.0 * math.sqrt(l + 1.0)
    if kind in ("max_lebesgue_odd", "min_lebesgue_odd"):
        return 8.0 * math.sqrt(l + 1.0)
    if kind == "min_delta":
        return 3.0 * math.sqrt(l + 1.0)
    return 6.0 * math.sqrt(l + 1.0)  # min_delta_odd


def lebesgue_growth_model(kind: str) -> tuple[float, float]:
    """(C_gamma, gamma) with lambda_model(kind, l) <= C_gamma * (l+1)^gamma."""
    _check_kind(kind)
    if kind in ("clenshaw_curtis", "fejer2"):
        return (2.0 * math.log(2.0) / math.pi * 2.0, 1.0)
    if kind in ("rleja", "rleja_double2", "rleja_double4"):
        return (1.5, 1.0)
    if kind == "rleja_odd":
        return (3.0, 1.0)
    if kind in ("leja", "min_delta"):
        return (3.0, 0.5)
    if kind in ("leja_odd", "min_delta_odd"):
        return (6.0, 0.5)
    if kind in ("max_lebesgue", "min_lebesgue"):
        return (4.0, 0.5)
    return (8.0, 0.5)


# ---------------------------------------------------------------------------
# closed-form node sequences


def _cc_node(j: int) -> float:
    if j == 1:
        return 0.0
    if j == 2:
        return 1.0
    if j == 3:
        return -1.0
    return math.cos(2.0 ** (-math.ceil(math.log2(j - 1))) * (2 * j - 3) * math.pi)


def _fejer2_node(j: int) -> float:
    return math.cos(2.0 ** (-math.ceil(math.log2(j + 1))) * (2 * j + 1) * math.pi)


def _rleja_thetas(n: int) -> list[float]:
    th = [0.0, math.pi, math.pi / 2.0]
    for j in range(4, n + 1):
        if j % 2 == 1:
            th.append(th[j - 2] + math.pi)
        else:
            th.append(th[j // 2] / 2.0)
    return th[:n]


def closed_form_node(kind: str, j: int) -> float:
    """The j-th node (1-based) for the closed-form kinds."""
    if kind not in CLOSED_FORM_KINDS:
        raise ValueError(f"{kind!r} has no closed-form nodes")
    if j < 1:
        raise ValueError("node index is 1-based")
    if kind == "clenshaw_curtis":
        return _cc_node(j)
    if kind == "fejer2":
        return _fejer2_node(j)
    if kind == "rleja":
        return math.cos(_rleja_thetas(j)[j - 1])
    # centered R-Leja sequence, shared by the double-2/double-4/odd variants
    if j == 1:
        return 0.0
    if j == 2:
        return 1.0
    if j == 3:
        return -1.0
    return math.cos(_rleja_thetas(j)[j - 1])


def _closed_form_nodes(family: str, n: int) -> np.ndarray:
    if family == "cc":
        return np.array([_cc_node(j) for j in range(1, n + 1)])
    if family == "fejer2":
        return np.array([_fejer2_node(j) for j in range(1, n + 1)])
    th = _rleja_thetas(max(n, 3))
    if family == "rleja":
        return np.array([math.cos(th[j]) for j in range(n)])
    vals = [0.0, 1.0, -1.0] + [math.cos(th[j]) for j in range(3, n)]
    return np.array(vals[:n])


# ---------------------------------------------------------------------------
# greedy node sequences


def _candidates(count: int) -> np.ndarray:
    # Chebyshev-distributed, descending from +1 to -1 so that argmax/argmin
    # on exact ties selects the right-most point
    k = np.arange(count)
    return np.cos(k * math.pi / (count - 1))


def _log_abs_diff(y: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.abs(y[:, None] - nodes[None, :]))


def _lebesgue_values(nodes: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Lebesgue function of the Lagrange basis on `nodes`, evaluated at `y`.

    Computed in log space with sign-free magnitudes; points that coincide
    with a node get the exact value 1.
    """
    n = len(nodes)
    if n == 1:
        return np.ones_like(y)
    ld = _log_abs_diff(y, nodes)
    hit = np.isneginf(ld).any(axis=1)
    S = ld.sum(axis=1)
    diffs = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diffs, 1.0)
    logw = -np.log(np.abs(diffs)).sum(axis=1)
    with np.errstate(invalid="ignore"):
        vals = np.exp(S[:, None] - ld + logw[None, :]).sum(axis=1)
    vals[hit] = 1.0
    return vals


def lebesgue_constant(nodes, probe_count: int = DEFAULT_PROBE_COUNT) -> float:
    """Max of the Lebesgue function over a dense uniform probe grid."""
    nodes = np.asarray(nodes, dtype=float)
    if len(np.unique(nodes)) != len(nodes):
        raise ValueError("duplicate nodes")
    if probe_count < 2:
        raise ValueError("probe_count too small")
    probes = np.linspace(-1.0, 1.0, probe_count)
    best = 1.0
    chunk = max(1, (1 << 22) // max(1, len(nodes)))
    for start in range(0, probe_count, chunk):
        vals = _lebesgue_values(nodes, probes[start:start + chunk])
        best = max(best, float(vals.max()))
    return best


def _golden_refine(fn, lo: float, hi: float, maximize: bool, iters: int = 90):
    """Golden-section search; returns (best_y, best_value) incl. the endpoints."""
    sign = 1.0 if maximize else -1.0
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = sign * fn(c), sign * fn(d)
    for _ in range(iters):
        if b - a < 1e-15:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = sign * fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = sign * fn(d)
    cands = [(lo, sign * fn(lo)), (hi, sign * fn(hi)), (c, fc), (d, fd)]
    best = max(v for _, v in cands)
    # right-most among refined near-ties
    y_best = max(y for y, v in cands if v >= best - abs(best) * 1e-15)
    return y_best, sign * best


def _select_extremum(cands: np.ndarray, values: np.ndarray, fn, maximize: bool) -> float:
    """Pick the winning candidate with right-most tie-breaking, then refine.

    Discrete near-ties (within a relative band) are all refined in their own
    cells; the tie is broken right-most at refined precision.  This keeps
    symmetric objectives (e.g. twin Leja bumps) deterministic despite float
    noise on the discrete grid.
    """
    finite = np.isfinite(values)
    if not finite.any():
        raise RuntimeError("objective is non-finite at every candidate")
    vals = np.where(finite, values, -np.inf if maximize else np.inf)
    if maximize:
        best = vals.max()
        tie = np.abs(best) * _COARSE_TIE + 1e-300
        eligible = np.flatnonzero(vals >= best - tie)
    else:
        best = vals.min()
        tie = np.abs(best) * _COARSE_TIE + 1e-300
        eligible = np.flatnonzero(vals <= best + tie)
    if len(eligible) > 32:
        order = np.argsort(vals[eligible])
        if maximize:
            order = order[::-1]
        eligible = eligible[np.sort(order[:32])]
    refined = []
    n = len(cands)
    for k in eligible:
        lo = cands[k + 1] if k + 1 < n else -1.0
        hi = cands[k - 1] if k >= 1 else 1.0
        refined.append(_golden_refine(fn, lo, hi, maximize))
    vbest = max(v for _, v in refined) if maximize else min(v for _, v in refined)
    band = abs(vbest) * _REFINED_TIE + 1e-300
    if maximize:
        winners = [y for y, v in refined if v >= vbest - band]
    else:
        winners = [y for y, v in refined if v <= vbest + band]
    y = max(winners)
    # snap exact endpoints: the hypercube boundary is always a valid node
    if abs(y - 1.0) < 1e-14:
        return 1.0
    if abs(y + 1.0) < 1e-14:
        return -1.0
    return y


def greedy_sequence(
    kind: str,
    n: int,
    candidate_count: int | None = None,
    probe_count: int = DEFAULT_PROBE_COUNT,
    start_nodes: list[float] | None = None,
) -> list[float]:
    """First n nodes of a greedy rule family, seeded with y_1 = 0.

    `start_nodes` continues a previously computed prefix of the same
    sequence; the result is identical to a full regeneration.
    """
    if kind not in GREEDY_FAMILIES:
        raise ValueError(f"{kind!r} is not a greedy family")
    if n < 1:
        raise ValueError("need n >= 1")
    if candidate_count is None:
        candidate_count = (
            MINMAX_CANDIDATE_COUNT if kind == "min_lebesgue" else DEFAULT_CANDIDATE_COUNT
        )
    if candidate_count < 10**4:
        raise ValueError("candidate_count must be at least 10^4")
    cands = _candidates(candidate_count)
    nodes = list(start_nodes) if start_nodes else [0.0]
    if nodes[0] != 0.0:
        raise ValueError("greedy sequences are seeded with y_1 = 0")
    if kind == "leja":
        # running objective: sum of log|y - y_i| over the committed nodes
        running = np.zeros(candidate_count)
        with np.errstate(divide="ignore"):
            for y in nodes[:-1]:
                running += np.log(np.abs(cands - y))
        while len(nodes) < n:
            with np.errstate(divide="ignore"):
                running += np.log(np.abs(cands - nodes[-1]))

            def obj(y, nd=tuple(nodes)):
                with np.errstate(divide="ignore"):
                    return float(np.log(np.abs(np.subtract(y, nd))).sum())

            nodes.append(_select_extremum(cands, running, obj, maximize=True))
        return nodes[:n]
    if kind == "max_lebesgue":
        while len(nodes) < n:
            arr = np.array(nodes)
            vals = _lebesgue_values(arr, cands)

            def obj(y, arr=arr):
                return float(_lebesgue_values(arr, np.array([y]))[0])

            nodes.append(_select_extremum(cands, vals, obj, maximize=True))
        return nodes[:n]
    probes = np.sort(np.concatenate([np.linspace(-1.0, 1.0, probe_count), cands]))
    if kind == "min_delta":
        while len(nodes) < n:
            arr = np.array(nodes)
            # objective decouples: max_y' A(y') is a constant factor, so
            # F(y) = (1 + LebFn(y)) * max A / A(y)
            with np.errstate(divide="ignore"):
                log_amax = float(_log_abs_diff(probes, arr).sum(axis=1).max())
                log_a = _log_abs_diff(cands, arr).sum(axis=1)
            leb = _lebesgue_values(arr, cands)
            with np.errstate(over="ignore"):
                vals = (1.0 + leb) * np.exp(log_amax - log_a)

            def obj(y, arr=arr, log_amax=log_amax):
                ya = np.array([y])
                with np.errstate(divide="ignore"):
                    la = float(_log_abs_diff(ya, arr).sum())
                lb = float(_lebesgue_values(arr, ya)[0])
                return (1.0 + lb) * math.exp(log_amax - la)

            nodes.append(_select_extremum(cands, vals, obj, maximize=False))
        return nodes[:n]
    # min_lebesgue: F(y) = Lebesgue constant of nodes + {y}, via the
    # barycentric update of the augmented node set
    while len(nodes) < n:
        arr = np.array(nodes)
        vals = _augmented_lebesgue(arr, cands, probes)

        def obj(y, arr=arr, probes=probes):
            return float(_augmented_lebesgue(arr, np.array([y]), probes)[0])

        nodes.append(_select_extremum(cands, vals, obj, maximize=False))
    return nodes[:n]


def _augmented_lebesgue(nodes: np.ndarray, cands: np.ndarray, probes: np.ndarray) -> np.ndarray:
    """For each candidate y, the Lebesgue constant of nodes + {y} over `probes`."""
    diffs = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diffs, 1.0)
    logw = -np.log(np.abs(diffs)).sum(axis=1)  # base barycentric weights
    with np.errstate(divide="ignore"):
        gapc = np.abs(cands[:, None] - nodes[None, :])   # (m, n)
        la = np.log(gapc).sum(axis=1)                    # log prod |y - x_k|
        D = 1.0 / gapc                                   # (m, n)
        inv_a = np.exp(-la)                              # (m,)
    dup = gapc.min(axis=1) == 0.0
    out = np.full(len(cands), 1.0)
    chunk = max(16, (1 << 22) // max(1, len(cands)))
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        for s in range(0, len(probes), chunk):
            pr = probes[s:s + chunk]
            ld = _log_abs_diff(pr, nodes)                # (P, n)
            S = ld.sum(axis=1)                           # log prod |y' - x|
            C = np.exp(S[:, None] - ld + logw[None, :])  # |w_k| A(y')/|y'-x_k|
            hit = np.isneginf(S)
            C[hit] = 0.0
            A = np.exp(S)
            A[hit] = 0.0
            vals = C @ D.T                               # (P, m)
            gap = np.abs(np.subtract(pr[:, None], cands[None, :]))
            np.multiply(vals, gap, out=vals)
            vals += A[:, None] * inv_a[None, :]
            # probe rows hitting a node of the base set give 0 here (true value
            # 1); the floor below and the running max keep them harmless
            np.maximum(out, np.nanmax(vals, axis=0), out=out)
    # a candidate equal to an existing node is degenerate: +inf objective
    out[dup] = np.inf
    return out


# ---------------------------------------------------------------------------
# sequence cache and the NodeSequence record


_SEQ_CACHE: dict[str, np.ndarray] = {}


def family_nodes(kind: str, n: int) -> np.ndarray:
    """First n nodes of the sequence backing `kind` (shared across variants)."""
    _check_kind(kind)
    family = _FAMILY[kind]
    cached = _SEQ_CACHE.get(family)
    if cached is None or len(cached) < n:
        if family in ("cc", "fejer2", "rleja", "centered_rleja"):
            # over-generate closed forms so repeated growth stays cheap
            cached = _closed_form_nodes(family, max(n, 65))
        else:
            prefix = list(cached) if cached is not None else None
            cached = np.array(greedy_sequence(family, n, start_nodes=prefix))
        _SEQ_CACHE[family] = cached
    return cached[:n].copy()


@dataclass
class NodeSequence:
    """A 1D rule instance: nodes up to some level plus operator-norm metadata."""

    kind: str
    nodes: np.ndarray
    lebesgue_growth: tuple[float, float]
    lambda_table: list[float] = field(default_factory=list)

    @property
    def level(self) -> int:
        l = 0
        while growth(self.kind, l) < len(self.nodes):
            l += 1
        return l


def node_sequence(kind: str, level: int, measure_lambda: bool = False,
                  probe_count: int = DEFAULT_PROBE_COUNT) -> NodeSequence:
    """Build the rule's node sequence through `level`."""
    _check_kind(kind)
    if level < 0:
        raise ValueError("level must be >= 0")
    m = growth(kind, level)
    nodes = family_nodes(kind, m)
    table = []
    if measure_lambda:
        for l in range(level + 1):
            table.append(lebesgue_constant(nodes[: growth(kind, l)], probe_count))
    return NodeSequence(kind, nodes, lebesgue_growth_model(kind), table)
