"""The adaptive refinement loop: build interpolant, extract coefficients, fit
decay parameters, grow the tensor set, repeat.

Each iteration samples the target only at new grid nodes (the coordinate
cache guarantees nested rules never re-evaluate), reuses previous surpluses,
and selects the next level threshold from the finite set of weight values on
the margin of the current tensor set.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import rules1d
from .fitting import FitParams, UnfittableError, fit_curved, fit_surplus, isotropic_params
from .multiindex import (
    CurvedWeights,
    IndexSet,
    MultiIndex,
    curved_tail_min,
    lambda_classic,
    lambda_curved,
    margin,
)
from .spectral import legendre_coeffs
from .sparse_grid import (
    Interpolant,
    TensorSet,
    build_interpolant,
    evaluate_batch,
    grid_nodes,
    grid_size,
    polynomial_range,
    theta_curved,
    theta_opt,
)
from .targets import EvaluationError, TargetSpec

FIT_SOURCES = ("legendre", "surplus")


class BudgetExhausted(RuntimeError):
    """No admissible growth step fits in the remaining sample budget."""


@dataclass(frozen=True)
class RunConfig:
    """Configuration of an adaptive run."""

    rule: str
    d: int
    fit_source: str = "legendre"
    fit_beta: bool = True          # False: dynamic total-degree (beta masked)
    fit_enabled: bool = True       # False: parameters stay isotropic (no fitting)
    batch: int | str = "minimal"   # "minimal" or a target count of new nodes
    max_iterations: int = 10
    max_samples: int = 10_000
    probe_count: int | None = None
    probe_seed: int = 20240101
    initial_kind: str = "total_degree"   # or curved/tensor/hyperbolic/smolyak
    initial_level: float = 2.0
    initial_alpha: tuple[float, ...] | None = None
    initial_beta: tuple[float, ...] | None = None
    min_magnitude: float = 1e-14

    def __post_init__(self):
        rules1d.growth(self.rule, 0)
        if self.fit_source not in FIT_SOURCES:
            raise ValueError(f"fit_source must be one of {FIT_SOURCES}")
        if self.fit_source == "surplus" and not rules1d.unit_growth(self.rule):
            raise ValueError("surplus fitting requires a unit-growth rule")
        if isinstance(self.batch, str) and self.batch != "minimal":
            raise ValueError("batch must be 'minimal' or a positive integer")
        if isinstance(self.batch, int) and self.batch < 1:
            raise ValueError("batch must be 'minimal' or a positive integer")
        if self.d < 1:
            raise ValueError("dimension must be >= 1")


@dataclass
class Record:
    """One convergence-history row."""

    iteration: int
    node_count: int
    new_node_count: int
    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    c_const: float
    residual: float
    n_used: int
    corrected: tuple[int, ...]
    excluded: tuple[int, ...]
    probe_error: float | None
    wall_time: float = 0.0  # informational only; never serialized


@dataclass
class RunState:
    """Mutable state of an adaptive run between iterations."""

    config: RunConfig
    theta: TensorSet
    iteration: int = 0
    cache: dict[tuple[float, ...], float] = field(default_factory=dict)
    fit: FitParams | None = None
    interpolant: Interpolant | None = None
    history: list[Record] = field(default_factory=list)

    @property
    def samples_used(self) -> int:
        return len(self.cache)


def initial_tensor_set(config: RunConfig) -> TensorSet:
    alpha = config.initial_alpha or (1.0,) * config.d
    if len(alpha) != config.d:
        raise ValueError("initial_alpha must have length d")
    if config.initial_kind == "curved":
        beta = config.initial_beta or (0.0,) * config.d
        if len(beta) != config.d:
            raise ValueError("initial_beta must have length d")
        lam = lambda_curved(CurvedWeights(alpha, beta), config.initial_level)
    else:
        lam = lambda_classic(config.initial_kind, alpha, config.initial_level)
    if len(lam) == 0:
        raise ValueError("initial level selects an empty polynomial space")
    return theta_opt(lam, config.rule)


def effective_margin_weight(fit: FitParams, i: MultiIndex, rule: str) -> float:
    """Smallest curved-space level at which tensor level i becomes selected.

    Separable: each coordinate contributes the minimum of its weight over
    degrees >= m(i_k - 1), which accounts for dips from negative beta.
    """
    total = 0.0
    for k, ik in enumerate(i):
        start = rules1d.growth(rule, ik - 1)
        total += curved_tail_min(fit.alpha[k], fit.beta[k], start)
    return total


def next_level(
    fit: FitParams,
    ts: TensorSet,
    batch: int | str = "minimal",
    sample_budget: int | None = None,
) -> float:
    """Smallest level L whose curved tensor set grows ts (or adds >= batch nodes)."""
    base_nodes = grid_size(ts)
    weights = CurvedWeights(fit.alpha, fit.beta)
    seen: set[MultiIndex] = set(ts.theta.members)
    frontier = [i for i in margin(ts.theta)]
    candidates = sorted({effective_margin_weight(fit, i, ts.rule) for i in frontier})
    seen.update(frontier)
    best: float | None = None
    while candidates:
        L = candidates.pop(0)
        th2 = ts.theta.union(theta_curved(weights, L, ts.rule).theta)
        n2 = grid_size(TensorSet(th2, ts.rule))
        if n2 == base_nodes:
            continue
        if sample_budget is not None and n2 > sample_budget:
            if best is not None:
                return best
            raise BudgetExhausted(
                f"smallest growth step needs {n2} samples, budget is {sample_budget}"
            )
        best = L
        if batch == "minimal" or n2 - base_nodes >= int(batch):
            return best
        # widen the frontier past the already-reachable region
        grown = TensorSet(th2, ts.rule)
        fresh = [i for i in margin(grown.theta) if i not in seen]
        seen.update(fresh)
        candidates = sorted(
            set(candidates) | {effective_margin_weight(fit, i, ts.rule) for i in fresh}
        )
    if best is not None:
        return best
    raise BudgetExhausted("no candidate level grows the tensor set")


def _collect_samples(state: RunState, target: TargetSpec) -> dict[MultiIndex, float]:
    """Evaluate the target at grid nodes not in the cache; return index-keyed map."""
    grid = grid_nodes(state.theta)
    keys = [tuple(p) for p in grid.points]
    missing_rows = [r for r, key in enumerate(keys) if key not in state.cache]
    if missing_rows:
        pts = grid.points[missing_rows]
        try:
            vals = target.evaluate(pts)
        except EvaluationError as err:
            failed = [grid.indices[missing_rows[i]] for i in err.failed_ids] or \
                     [grid.indices[r] for r in missing_rows]
            raise EvaluationError(
                f"target evaluation failed at {len(failed)} nodes "
                f"(first: {failed[0]}); the run checkpoint is resumable",
                err.failed_ids,
            ) from err
        for r, v in zip(missing_rows, vals):
            state.cache[keys[r]] = float(v)
    return {j: state.cache[key] for j, key in zip(grid.indices, keys)}


def _fit_from(interp: Interpolant, config: RunConfig) -> FitParams:
    if config.fit_source == "surplus":
        return fit_surplus(interp.surplus_map(), config.rule,
                           config.min_magnitude, config.fit_beta)
    lam = polynomial_range(interp.tensor_set)
    coeffs = legendre_coeffs(interp, lam).coeffs
    return fit_curved(coeffs, config.min_magnitude, config.fit_beta)


def mc_linf_error(interp: Interpolant, target: TargetSpec, count: int, seed: int) -> float:
    """Max abs deviation on `count` uniform random points of the hypercube."""
    if count < 1:
        raise ValueError("need at least one probe point")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1.0, 1.0, size=(count, interp.dim))
    return float(np.abs(evaluate_batch(interp, pts) - target.evaluate(pts)).max())


def _built(state: RunState) -> bool:
    """True when the current tensor set has already been built and recorded."""
    return bool(state.history) and state.history[-1].iteration == state.iteration


def _build_phase(state: RunState, target: TargetSpec) -> None:
    """Sample new nodes, rebuild surpluses incrementally, fit, record."""
    config = state.config
    t0 = time.perf_counter()
    prev_nodes = state.interpolant.node_count if state.interpolant else 0
    samples = _collect_samples(state, target)
    state.interpolant = build_interpolant(state.theta, samples, state.interpolant)
    fallback = state.fit if state.fit is not None else isotropic_params(config.d)
    if config.fit_enabled:
        try:
            state.fit = _fit_from(state.interpolant, config)
        except UnfittableError:
            state.fit = fallback
    else:
        state.fit = fallback
    probe = None
    if config.probe_count:
        probe = mc_linf_error(state.interpolant, target, config.probe_count,
                              config.probe_seed)
    state.history.append(Record(
        iteration=state.iteration,
        node_count=state.interpolant.node_count,
        new_node_count=state.interpolant.node_count - prev_nodes,
        alpha=state.fit.alpha,
        beta=state.fit.beta,
        c_const=state.fit.c_const,
        residual=state.fit.residual,
        n_used=state.fit.n_used,
        corrected=tuple(sorted(state.fit.corrected_dims)),
        excluded=tuple(sorted(state.fit.excluded_dims)),
        probe_error=probe,
        wall_time=time.perf_counter() - t0,
    ))


def _grow_phase(state: RunState) -> None:
    """Pick the next level and union the curved tensor set into the current one."""
    config = state.config
    L = next_level(state.fit, state.theta, config.batch,
                   sample_budget=config.max_samples)
    weights = CurvedWeights(state.fit.alpha, state.fit.beta)
    grown = state.theta.theta.union(theta_curved(weights, L, config.rule).theta)
    state.theta = TensorSet(grown, config.rule)
    state.iteration += 1


def step(state: RunState, target: TargetSpec) -> RunState:
    """One loop body: sample, rebuild, fit, grow.  Mutates and returns `state`."""
    _build_phase(state, target)
    _grow_phase(state)
    return state


def run(
    config: RunConfig,
    target: TargetSpec,
    checkpoint_path=None,
    state: RunState | None = None,
) -> tuple[Interpolant, list[Record]]:
    """Iterate until the iteration or sample budget is exhausted.

    A fresh run starts from the configured initial set; passing `state`
    resumes.  When a checkpoint path is given the state is saved after every
    completed phase and before any abort, so failed runs are resumable.
    """
    if target.dim != config.d:
        raise ValueError("target dimension does not match config")
    if state is None:
        state = RunState(config, initial_tensor_set(config))
    while True:
        if not _built(state):
            try:
                _build_phase(state, target)
            except EvaluationError:
                if checkpoint_path is not None:
                    save_state(state, checkpoint_path)
                raise
            if checkpoint_path is not None:
                save_state(state, checkpoint_path)
        if state.iteration >= config.max_iterations:
            break
        try:
            _grow_phase(state)
        except BudgetExhausted:
            break
        if checkpoint_path is not None:
            save_state(state, checkpoint_path)
    assert state.interpolant is not None
    return state.interpolant, state.history


# ---------------------------------------------------------------------------
# persistence

_STATE_FORMAT = "adasg-checkpoint"
_STATE_VERSION = 1


def _config_to_dict(config: RunConfig) -> dict:
    return {
        "rule": config.rule,
        "d": config.d,
        "fit_source": config.fit_source,
        "fit_beta": config.fit_beta,
        "fit_enabled": config.fit_enabled,
        "batch": config.batch,
        "max_iterations": config.max_iterations,
        "max_samples": config.max_samples,
        "probe_count": config.probe_count,
        "probe_seed": config.probe_seed,
        "initial_kind": config.initial_kind,
        "initial_level": config.initial_level,
        "initial_alpha": list(config.initial_alpha) if config.initial_alpha else None,
        "initial_beta": list(config.initial_beta) if config.initial_beta else None,
        "min_magnitude": config.min_magnitude,
    }


def _config_from_dict(obj: dict) -> RunConfig:
    return RunConfig(
        rule=obj["rule"],
        d=obj["d"],
        fit_source=obj["fit_source"],
        fit_beta=obj["fit_beta"],
        fit_enabled=obj["fit_enabled"],
        batch=obj["batch"],
        max_iterations=obj["max_iterations"],
        max_samples=obj["max_samples"],
        probe_count=obj["probe_count"],
        probe_seed=obj["probe_seed"],
        initial_kind=obj["initial_kind"],
        initial_level=obj["initial_level"],
        initial_alpha=tuple(obj["initial_alpha"]) if obj["initial_alpha"] else None,
        initial_beta=tuple(obj["initial_beta"]) if obj["initial_beta"] else None,
        min_magnitude=obj["min_magnitude"],
    )


def _fit_to_dict(fit: FitParams | None) -> dict | None:
    if fit is None:
        return None
    return {
        "alpha": list(fit.alpha),
        "beta": list(fit.beta),
        "c_const": fit.c_const,
        "corrected_dims": sorted(fit.corrected_dims),
        "excluded_dims": sorted(fit.excluded_dims),
        "residual": fit.residual,
        "n_used": fit.n_used,
    }


def _fit_from_dict(obj: dict | None) -> FitParams | None:
    if obj is None:
        return None
    return FitParams(
        tuple(obj["alpha"]), tuple(obj["beta"]), obj["c_const"],
        frozenset(obj["corrected_dims"]), frozenset(obj["excluded_dims"]),
        obj["residual"], obj["n_used"],
    )


def save_state(state: RunState, path) -> None:
    obj = {
        "format": _STATE_FORMAT,
        "version": _STATE_VERSION,
        "config": _config_to_dict(state.config),
        "iteration": state.iteration,
        "theta": [list(i) for i in state.theta.theta.members],
        "cache": [[list(k), v] for k, v in sorted(state.cache.items())],
        "fit": _fit_to_dict(state.fit),
        "history": [
            {
                "iteration": r.iteration,
                "node_count": r.node_count,
                "new_node_count": r.new_node_count,
                "alpha": list(r.alpha),
                "beta": list(r.beta),
                "c_const": r.c_const,
                "residual": r.residual,
                "n_used": r.n_used,
                "corrected": list(r.corrected),
                "excluded": list(r.excluded),
                "probe_error": r.probe_error,
            }
            for r in state.history
        ],
    }
    with open(path, "w") as fh:
        json.dump(obj, fh)


def load_state(path) -> RunState:
    with open(path) as fh:
        obj = json.load(fh)
    if obj.get("format") != _STATE_FORMAT or obj.get("version") != _STATE_VERSION:
        raise ValueError(f"not a version-{_STATE_VERSION} {_STATE_FORMAT} file")
    config = _config_from_dict(obj["config"])
    theta = TensorSet(IndexSet(config.d, [tuple(i) for i in obj["theta"]]), config.rule)
    state = RunState(config, theta, obj["iteration"])
    state.cache = {tuple(k): float(v) for k, v in obj["cache"]}
    state.fit = _fit_from_dict(obj["fit"])
    for r in obj["history"]:
        state.history.append(Record(
            iteration=r["iteration"],
            node_count=r["node_count"],
            new_node_count=r["new_node_count"],
            alpha=tuple(r["alpha"]),
            beta=tuple(r["beta"]),
            c_const=r["c_const"],
            residual=r["residual"],
            n_used=r["n_used"],
            corrected=tuple(r["corrected"]),
            excluded=tuple(r["excluded"]),
            probe_error=r["probe_error"],
        ))
    if state.history:
        # rebuild the interpolant of the last *built* tensor set; a from-scratch
        # solve reproduces the incremental history float for float
        built = _theta_at_last_record(state)
        grid = grid_nodes(built)
        samples = {j: state.cache[tuple(p)] for j, p in zip(grid.indices, grid.points)}
        state.interpolant = build_interpolant(built, samples)
    return state


def _theta_at_last_record(state: RunState) -> TensorSet:
    """Tensor set of the last built interpolant.

    After a growth phase the checkpoint holds the pending theta, whose new
    blocks are unsampled; the built set is recovered by keeping the levels
    whose node blocks are fully cached.
    """
    if _built(state):
        return state.theta
    rule = state.config.rule
    d = state.config.d
    keep = []
    for i in state.theta.theta.members:
        nodes1d = [rules1d.family_nodes(rule, rules1d.growth(rule, i[k]))
                   for k in range(d)]
        ranges = [range(rules1d.growth(rule, i[k] - 1) + 1,
                        rules1d.growth(rule, i[k]) + 1) for k in range(d)]
        cached = all(
            tuple(nodes1d[k][j[k] - 1] for k in range(d)) in state.cache
            for j in itertools.product(*ranges)
        )
        if cached:
            keep.append(i)
    return TensorSet(IndexSet(d, keep), rule)


def write_history_csv(history: list[Record], d: int, path) -> None:
    cols = (
        ["iter"]
        + [f"alpha_{k + 1}" for k in range(d)]
        + [f"beta_{k + 1}" for k in range(d)]
        + ["C_hat", "residual", "n_used", "corrected", "excluded",
           "probe_error", "node_count"]
    )
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for r in history:
            row = [str(r.iteration)]
            row += [f"{a:.17g}" for a in r.alpha]
            row += [f"{b:.17g}" for b in r.beta]
            row += [f"{r.c_const:.17g}", f"{r.residual:.17g}", str(r.n_used)]
            row.append(";".join(str(k + 1) for k in r.corrected))
            row.append(";".join(str(k + 1) for k in r.excluded))
            row.append("" if r.probe_error is None else f"{r.probe_error:.17g}")
            row.append(str(r.node_count))
            fh.write(",".join(row) + "\n")
