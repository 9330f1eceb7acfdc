"""Command-line surface: node tables, adaptive runs, batch evaluation, and the
scheme comparison protocol.

Config files are flat ``key = value`` text with ``#`` comments; vectors are
comma-separated.  All emitted CSVs use 17 significant digits so re-runs with
the same seed are byte-identical and round trips are lossless.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import rules1d
from .driver import RunConfig, load_state, run, write_history_csv
from .sparse_grid import evaluate_batch, load_interpolant, save_interpolant
from .targets import TargetSpec, builtin_target, external_target

SCHEMES = ("isotropic", "dynamic_td", "dynamic_curved")


def parse_config_text(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _vector(value: str) -> tuple[float, ...]:
    return tuple(float(v) for v in value.split(","))


def _bool(value: str) -> bool:
    if value.lower() in ("true", "yes", "1", "on"):
        return True
    if value.lower() in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


_CONFIG_KEYS = {
    "rule", "d", "fit_source", "fit_beta", "batch", "max_iterations",
    "max_samples", "probe_count", "probe_seed", "initial", "initial_level",
    "initial_alpha", "initial_beta", "min_magnitude",
    "target", "target_c0", "target_c", "target_t", "target_nu",
    "external_workdir", "external_command", "external_timeout",
}


def load_config(path) -> tuple[RunConfig, TargetSpec]:
    """Parse a run config file into the driver config and the target spec."""
    kv = parse_config_text(Path(path).read_text())
    unknown = set(kv) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    d = int(kv["d"])
    batch: int | str = kv.get("batch", "minimal")
    if batch != "minimal":
        batch = int(batch)
    name = kv.get("target", "expsum")
    if "probe_count" in kv:
        probe_count = int(kv["probe_count"]) or None
    else:
        # probing an external target costs real solver calls; only default
        # the Monte Carlo probe on for the cheap built-in families
        probe_count = None if name == "external" else 1000
    config = RunConfig(
        rule=kv.get("rule", "leja"),
        d=d,
        fit_source=kv.get("fit_source", "legendre"),
        fit_beta=_bool(kv.get("fit_beta", "true")),
        batch=batch,
        max_iterations=int(kv.get("max_iterations", "10")),
        max_samples=int(kv.get("max_samples", "10000")),
        probe_count=probe_count,
        probe_seed=int(kv.get("probe_seed", "20240101")),
        initial_kind=kv.get("initial", "total_degree"),
        initial_level=float(kv.get("initial_level", "2")),
        initial_alpha=_vector(kv["initial_alpha"]) if "initial_alpha" in kv else None,
        initial_beta=_vector(kv["initial_beta"]) if "initial_beta" in kv else None,
        min_magnitude=float(kv.get("min_magnitude", "1e-14")),
    )
    if name == "external":
        target = external_target(
            d,
            kv["external_workdir"],
            kv.get("external_command") or None,
            float(kv.get("external_timeout", "600")),
        )
    elif name == "rational":
        target = builtin_target(name, d, c0=float(kv["target_c0"]), c=_vector(kv["target_c"]))
    elif name == "expsum":
        target = builtin_target(name, d, c=_vector(kv.get("target_c", ",".join(["1"] * d))))
    elif name == "gaussian_peak":
        target = builtin_target(
            name, d,
            c=_vector(kv["target_c"]),
            t=_vector(kv.get("target_t", ",".join(["0"] * d))),
        )
    elif name == "legendre_mode":
        target = builtin_target(name, d, nu=tuple(int(v) for v in kv["target_nu"].split(",")))
    else:
        raise ValueError(f"unknown target {name!r}")
    return config, target


# ---------------------------------------------------------------------------
# subcommands


def _cmd_nodes(args) -> int:
    kind = args.rule
    levels = args.levels
    seq = rules1d.node_sequence(kind, levels, measure_lambda=True,
                                probe_count=args.probe_count)
    wd = Path(args.workdir)
    wd.mkdir(parents=True, exist_ok=True)
    levels_path = wd / f"{kind}_levels.csv"
    with open(levels_path, "w", newline="") as fh:
        fh.write("level,m_l,lambda_measured,lambda_model\n")
        for l in range(levels + 1):
            fh.write(f"{l},{rules1d.growth(kind, l)},"
                     f"{seq.lambda_table[l]:.17g},{rules1d.lambda_model(kind, l):.17g}\n")
    nodes_path = wd / f"{kind}_nodes.csv"
    with open(nodes_path, "w", newline="") as fh:
        fh.write("j,y_j\n")
        for j, y in enumerate(seq.nodes, start=1):
            fh.write(f"{j},{y:.17g}\n")
    print(f"wrote {levels_path} and {nodes_path}")
    return 0


def _cmd_run(args) -> int:
    config, target = load_config(args.config)
    wd = Path(args.workdir)
    wd.mkdir(parents=True, exist_ok=True)
    checkpoint = wd / "checkpoint.json"
    state = None
    if checkpoint.exists():
        state = load_state(checkpoint)
        if state.config.rule != config.rule or state.config.d != config.d:
            raise ValueError(
                f"checkpoint in {wd} was made with rule={state.config.rule}, "
                f"d={state.config.d}; clear the workdir to start over"
            )
        state.config = config
        print(f"resuming from {checkpoint} at iteration {state.iteration}")
    interp, history = run(config, target, checkpoint_path=checkpoint, state=state)
    write_history_csv(history, config.d, wd / "history.csv")
    save_interpolant(interp, wd / "interpolant.json")
    last = history[-1]
    err = "" if last.probe_error is None else f", probe error {last.probe_error:.3e}"
    print(f"finished after {len(history)} iterations, {last.node_count} nodes{err}")
    print(f"wrote {wd / 'history.csv'}, {wd / 'interpolant.json'}, {wd / 'checkpoint.json'}")
    return 0


def _read_eval_points(path) -> tuple[list[str], np.ndarray]:
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
            ids.append(parts[0] if has_id else str(n))
            rows.append([float(v) for v in (parts[1:] if has_id else parts)])
    return ids, np.array(rows, dtype=float)


def _cmd_evaluate(args) -> int:
    interp = load_interpolant(args.model)
    ids, pts = _read_eval_points(args.points)
    vals = evaluate_batch(interp, pts, allow_extrapolation=args.allow_extrapolation)
    out = Path(args.output) if args.output else Path(args.workdir) / "evaluations.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        fh.write("id," + ",".join(f"y_{k + 1}" for k in range(pts.shape[1])) + ",value\n")
        for i, row, v in zip(ids, pts, vals):
            fh.write(f"{i}," + ",".join(f"{x:.17g}" for x in row) + f",{v:.17g}\n")
    print(f"wrote {out}")
    return 0


def scheme_config(config: RunConfig, scheme: str) -> RunConfig:
    """Derive a per-scheme config: one code path, masked where required."""
    from dataclasses import replace

    if scheme == "dynamic_curved":
        return config
    if scheme == "dynamic_td":
        return replace(config, fit_beta=False)
    if scheme == "isotropic":
        return replace(config, fit_enabled=False, initial_kind="total_degree",
                       initial_alpha=None, initial_beta=None)
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def run_comparison(config: RunConfig, target: TargetSpec, schemes) -> list[tuple[str, int, float]]:
    """Run each scheme with its own fresh sample cache; returns (scheme, nodes, error)."""
    if not config.probe_count:
        raise ValueError("comparison requires probe_count for the error column")
    rows = []
    for scheme in schemes:
        _, history = run(scheme_config(config, scheme), target)
        for rec in history:
            rows.append((scheme, rec.node_count, rec.probe_error))
    return rows


def _cmd_compare(args) -> int:
    config, target = load_config(args.config)
    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    for s in schemes:
        if s not in SCHEMES:
            raise ValueError(f"unknown scheme {s!r}; expected one of {SCHEMES}")
    rows = run_comparison(config, target, schemes)
    wd = Path(args.workdir)
    wd.mkdir(parents=True, exist_ok=True)
    out = wd / "compare.csv"
    with open(out, "w", newline="") as fh:
        fh.write("scheme,nodes,error\n")
        for scheme, nodes, err in rows:
            fh.write(f"{scheme},{nodes},{err:.17g}\n")
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adasg",
        description="Adaptive anisotropic sparse-grid interpolation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_nodes = sub.add_parser("nodes", help="emit node and operator-norm tables")
    p_nodes.add_argument("--rule", required=True, choices=rules1d.RULE_KINDS)
    p_nodes.add_argument("--levels", type=int, required=True)
    p_nodes.add_argument("--probe-count", type=int, default=rules1d.DEFAULT_PROBE_COUNT)
    p_nodes.add_argument("--workdir", default=".")
    p_nodes.set_defaults(fn=_cmd_nodes)

    p_run = sub.add_parser("run", help="adaptive interpolation run")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--workdir", default=".")
    p_run.set_defaults(fn=_cmd_run)

    p_eval = sub.add_parser("evaluate", help="batch-evaluate a saved interpolant")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--points", required=True)
    p_eval.add_argument("--output", default=None)
    p_eval.add_argument("--allow-extrapolation", action="store_true")
    p_eval.add_argument("--workdir", default=".")
    p_eval.set_defaults(fn=_cmd_evaluate)

    p_cmp = sub.add_parser("compare", help="run the scheme comparison protocol")
    p_cmp.add_argument("--config", required=True)
    p_cmp.add_argument("--schemes", default=",".join(SCHEMES))
    p_cmp.add_argument("--workdir", default=".")
    p_cmp.set_defaults(fn=_cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as err:  # noqa: BLE001 - CLI boundary
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
