"""Command-line entry points for simulation, classification, and checks.

Commands compute everything first and only then create the output
directory, so a bad configuration never leaves partial files behind.
Every command also writes a manifest.json from which the run can be
reproduced exactly; nothing in the outputs depends on wall-clock time.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from itertools import product
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .criteria import classify
from .distributions import ModelParams, model_params_from_json
from .montecarlo import (
    ReplicationPlan,
    TASK_EXTINCTION_COUNT,
    TASK_LIMIT_CONFIG,
    run,
)
from .process import Configuration, evolve, generate_stream, last_empty_time, read_initial_csv, species_count_at, write_trace_csv
from .streams import replication_rng
from .validation import CHECK_NAMES, SuiteConfig, format_result, run_suite

DEFAULT_SEED = 123456789


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _encode_float(v: float):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return None
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v


def _csv_cell(v: float) -> str:
    v = float(v)
    if math.isnan(v):
        return ""
    if math.isinf(v):
        return "inf"
    if v.is_integer():
        return str(int(v))
    return repr(v)


def _write_manifest(out_dir: Path, command: str, arguments: dict, outputs: Sequence[str]) -> None:
    manifest = {
        "command": command,
        "arguments": arguments,
        "outputs": sorted(outputs),
        "package": {"name": "threshold-gms", "version": __version__},
    }
    (out_dir / "manifest.json").write_text(_dump_json(manifest))


def _load_params(path: str) -> ModelParams:
    payload = json.loads(Path(path).read_text())
    return model_params_from_json(payload)


def _out_dir(args) -> Path:
    return Path(args.out)


def _cmd_simulate(args) -> int:
    params = _load_params(args.params)
    horizon = float(args.horizon)
    start = float(args.start)
    rng = replication_rng(args.seed, index=0, salt=0)
    stream = generate_stream(params, start, horizon, rng, seed=args.seed)
    initial = read_initial_csv(args.initial) if args.initial else Configuration()
    trace = evolve(initial, stream)
    empty = last_empty_time(trace)
    summary = {
        "final_count": species_count_at(trace, horizon),
        "last_empty_time": _encode_float(empty if empty is not None else math.nan),
        "events": len(stream.events),
        "births": len(stream.births()),
        "extinctions": len(stream.extinctions()),
    }

    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    outputs = ["summary.json", "manifest.json"]
    if args.format == "csv":
        write_trace_csv(trace, out / "trace.csv")
        outputs.append("trace.csv")
    else:
        rows = [
            {"time": ev.time, "kind": ev.kind, "mark": ev.mark, "count_after": count}
            for ev, count in zip(stream.events, trace.counts_after)
        ]
        (out / "trace.json").write_text(_dump_json({"events": rows}))
        outputs.append("trace.json")
    (out / "summary.json").write_text(_dump_json(summary))
    _write_manifest(
        out,
        "simulate",
        {
            "params": params.to_json(),
            "seed": args.seed,
            "start": start,
            "horizon": horizon,
            "initial": args.initial,
            "format": args.format,
        },
        outputs,
    )
    return 0


def _parse_grid(spec: str) -> dict[str, list[float]]:
    allowed = ("alpha_fitness", "alpha_threshold", "lambda_birth", "lambda_extinct")
    grid: dict[str, list[float]] = {}
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        key, sep, rest = part.partition("=")
        key = key.strip()
        if not sep or key not in allowed:
            raise ValueError(f"grid entries must look like 'name=v1,v2' with name in {allowed}")
        values = [float(tok) for tok in rest.split(",") if tok.strip()]
        if not values:
            raise ValueError(f"grid entry {key!r} lists no values")
        grid[key] = values
    for required in ("alpha_fitness", "alpha_threshold"):
        if required not in grid:
            raise ValueError(f"grid requires {required!r}")
    grid.setdefault("lambda_birth", [1.0])
    grid.setdefault("lambda_extinct", [1.0])
    return grid


def _cmd_classify(args) -> int:
    from .distributions import Exponential

    if bool(args.params) == bool(args.grid):
        raise ValueError("classify needs exactly one of --params or --grid")

    if args.params:
        params = _load_params(args.params)
        report = classify(params)
        payload = {"params": params.to_json(), "report": report.to_json()}
        out = _out_dir(args)
        out.mkdir(parents=True, exist_ok=True)
        (out / "classification.json").write_text(_dump_json(payload))
        _write_manifest(out, "classify", {"params": params.to_json()}, ["classification.json", "manifest.json"])
        return 0

    grid = _parse_grid(args.grid)
    rows = []
    for a_fit, a_thr, l_birth, l_ext in product(
        grid["alpha_fitness"], grid["alpha_threshold"], grid["lambda_birth"], grid["lambda_extinct"]
    ):
        params = ModelParams(
            lambda_birth=l_birth,
            lambda_extinct=l_ext,
            fitness_dist=Exponential(a_fit),
            threshold_dist=Exponential(a_thr),
        )
        report = classify(params)
        rows.append(
            (
                a_fit,
                a_thr,
                l_birth,
                l_ext,
                report.recurrence,
                report.limit_count,
                report.method,
                report.null_recurrent_like,
                report.integrals.e_m,
                report.integrals.e_n,
                report.integrals.phi_inf,
                report.integrals.phi_bar_inf,
            )
        )

    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "phase_map.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "alpha_fitness",
                "alpha_threshold",
                "lambda_birth",
                "lambda_extinct",
                "recurrence",
                "limit_count",
                "method",
                "null_recurrent_like",
                "e_m",
                "e_n",
                "phi_inf",
                "phi_bar_inf",
            ]
        )
        for row in rows:
            cells = [repr(float(v)) for v in row[:4]]
            cells.extend([row[4], row[5], row[6], str(row[7]).lower()])
            for v in row[8:]:
                cells.append("" if v is None else ("inf" if math.isinf(v) else repr(float(v))))
            writer.writerow(cells)
    _write_manifest(out, "classify", {"grid": args.grid}, ["phase_map.csv", "manifest.json"])
    return 0


def _cmd_ladder_mc(args) -> int:
    params = _load_params(args.params)
    plan = ReplicationPlan(
        task=TASK_EXTINCTION_COUNT,
        params=params,
        replications=args.reps,
        base_seed=args.seed,
        count_mode=args.mode,
    )
    result = run(plan)
    counts = result.samples
    masses = result.aux["mass"]

    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    outputs = ["summary.json", "manifest.json"]
    if args.format == "csv":
        with open(out / "samples.csv", "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["rep", "count", "mass"])
            for i, (c, m) in enumerate(zip(counts, masses)):
                writer.writerow([i, _csv_cell(c), _csv_cell(m)])
        outputs.append("samples.csv")
    else:
        payload = {
            "counts": [_encode_float(float(c)) for c in counts],
            "masses": [_encode_float(float(m)) for m in masses],
        }
        (out / "samples.json").write_text(_dump_json(payload))
        outputs.append("samples.json")
    (out / "summary.json").write_text(
        _dump_json({"plan": plan.to_json(), "summary": result.summary.to_json()})
    )
    _write_manifest(
        out,
        "ladder-mc",
        {"params": params.to_json(), "seed": args.seed, "reps": args.reps, "mode": args.mode, "format": args.format},
        outputs,
    )
    return 0


def _cmd_limit_mc(args) -> int:
    params = _load_params(args.params)
    plan = ReplicationPlan(
        task=TASK_LIMIT_CONFIG,
        params=params,
        replications=args.reps,
        base_seed=args.seed,
    )
    result = run(plan)
    totals = result.samples
    n0 = result.aux["n0"]
    n_above = result.aux["n_above"]
    band0 = result.aux["band0_mass"]

    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    outputs = ["summary.json", "manifest.json"]
    if args.format == "csv":
        with open(out / "samples.csv", "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["rep", "n0", "n_above", "total", "band0_mass"])
            for i in range(totals.size):
                writer.writerow(
                    [
                        i,
                        _csv_cell(n0[i]),
                        _csv_cell(n_above[i]),
                        _csv_cell(totals[i]),
                        _csv_cell(band0[i]),
                    ]
                )
        outputs.append("samples.csv")
    else:
        payload = {
            "n0": [_encode_float(float(v)) for v in n0],
            "n_above": [_encode_float(float(v)) for v in n_above],
            "totals": [_encode_float(float(v)) for v in totals],
            "band0_mass": [_encode_float(float(v)) for v in band0],
        }
        (out / "samples.json").write_text(_dump_json(payload))
        outputs.append("samples.json")
    (out / "summary.json").write_text(
        _dump_json({"plan": plan.to_json(), "summary": result.summary.to_json()})
    )
    _write_manifest(
        out,
        "limit-mc",
        {"params": params.to_json(), "seed": args.seed, "reps": args.reps, "format": args.format},
        outputs,
    )
    return 0


def _cmd_validate(args) -> int:
    only: Optional[list[str]] = None
    if args.only:
        only = [name.strip() for name in args.only.split(",") if name.strip()]
    if args.reps < 1000:
        raise ValueError("validate needs --reps >= 1000 for the distributional checks")
    config = SuiteConfig(
        replications=args.reps,
        compare_replications=min(10_000, args.reps),
        base_seed=args.seed,
    )
    results = run_suite(config=config, only=only)

    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    payload = [
        {"name": r.name, "passed": r.passed, "details": r.details} for r in results
    ]
    (out / "validation.json").write_text(_dump_json({"checks": payload}))
    _write_manifest(
        out,
        "validate",
        {"only": only, "reps": args.reps, "seed": args.seed},
        ["validation.json", "manifest.json"],
    )
    for r in results:
        print(format_result(r))
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="threshold-gms",
        description="Simulation and classification toolkit for a birth/extinction species process with threshold-driven mass extinctions.",
    )
    parser.add_argument("--version", action="version", version=f"threshold-gms {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="draw one event stream and evolve a configuration along it")
    sim.add_argument("--params", required=True, help="JSON file with rates and mark laws")
    sim.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sim.add_argument("--horizon", type=float, required=True)
    sim.add_argument("--start", type=float, default=0.0)
    sim.add_argument("--initial", help="optional CSV of initial fitness values")
    sim.add_argument("--out", required=True)
    sim.add_argument("--format", choices=("csv", "json"), default="csv")
    sim.set_defaults(func=_cmd_simulate)

    cls = sub.add_parser("classify", help="recurrence / limit-count verdicts for parameters or a grid")
    cls.add_argument("--params", help="JSON file with rates and mark laws")
    cls.add_argument("--grid", help="exponential sweep, e.g. 'alpha_fitness=0.5,1;alpha_threshold=0.5,1'")
    cls.add_argument("--out", required=True)
    cls.set_defaults(func=_cmd_classify)

    lad = sub.add_parser("ladder-mc", help="replicate the fitness-record ladder and its extinction counts")
    lad.add_argument("--params", required=True)
    lad.add_argument("--seed", type=int, default=DEFAULT_SEED)
    lad.add_argument("--reps", type=int, required=True)
    lad.add_argument("--mode", choices=("per_step", "total"), default="per_step")
    lad.add_argument("--out", required=True)
    lad.add_argument("--format", choices=("csv", "json"), default="csv")
    lad.set_defaults(func=_cmd_ladder_mc)

    lim = sub.add_parser("limit-mc", help="replicate draws of the long-run configuration")
    lim.add_argument("--params", required=True)
    lim.add_argument("--seed", type=int, default=DEFAULT_SEED)
    lim.add_argument("--reps", type=int, required=True)
    lim.add_argument("--out", required=True)
    lim.add_argument("--format", choices=("csv", "json"), default="csv")
    lim.set_defaults(func=_cmd_limit_mc)

    val = sub.add_parser("validate", help="run the acceptance checks")
    val.add_argument("--only", help="comma-separated subset of check names: " + ", ".join(CHECK_NAMES))
    val.add_argument("--reps", type=int, default=100_000)
    val.add_argument("--seed", type=int, default=DEFAULT_SEED)
    val.add_argument("--out", required=True)
    val.set_defaults(func=_cmd_validate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
