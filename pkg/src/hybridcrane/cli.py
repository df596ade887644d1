"""Command-line entry point: ``hybridcrane <command> ...``.

Exit codes: 0 success, 1 bad input file or options, 2 simulation failure,
3 missing records for an estimation step, 4 ill-conditioned regression.
Set ``HYBRIDCRANE_LOG`` (e.g. ``INFO``) for log output on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .config import SchemaError, fixture_path, load_params, load_scenario

log = logging.getLogger("hybridcrane")

EXIT_INPUT = 1
EXIT_SIMULATION = 2
EXIT_MISSING = 3
EXIT_ILL_CONDITIONED = 4


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _resolve(path_or_name: str) -> Path:
    p = Path(path_or_name)
    if p.exists():
        return p
    bundled = fixture_path(path_or_name)
    return bundled if bundled is not None else p


# --- simulate -------------------------------------------------------------

def cmd_simulate(args) -> int:
    from .core import InvalidStateError
    from .sim.hybrid import SimulationError, integrate
    try:
        sc = load_scenario(_resolve(args.scenario))
        cfg = sc.sim
        if args.model:
            cfg = replace(cfg, model=args.model)
        if args.k is not None:
            cfg = replace(cfg, k=args.k)
    except (SchemaError, ValueError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    start = time.perf_counter()
    try:
        traj = integrate(sc.initial_state, sc.params, cfg, sc.input)
    except (SimulationError, InvalidStateError) as exc:
        return _fail(EXIT_SIMULATION, f"simulation failed: {exc}")
    wall = time.perf_counter() - start
    if args.out:
        io.write_trajectory(args.out, traj if args.events else traj.grid())
    print(f"events: {len(traj.events)}")
    print(f"wall_time_s: {wall:.6f}")
    return 0


# --- benchmark ------------------------------------------------------------

def cmd_benchmark(args) -> int:
    from .sim.benchmark import benchmark, format_table
    from .sim.cases import case1, case2
    try:
        ks = [float(v) for v in args.ks.split(",") if v.strip()]
    except ValueError:
        return _fail(EXIT_INPUT, f"bad --ks list {args.ks!r}")
    case = case1() if args.case == 1 else case2()
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        with warnings.catch_warnings(record=True) as caught:
            rows = benchmark(case, ks, args.repeats)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(format_table(rows))
    if args.out:
        io.atomic_write(args.out, _benchmark_csv(rows))
    if all(r.failed for r in rows):
        return _fail(EXIT_SIMULATION, "every benchmark run failed")
    return 0


def _benchmark_csv(rows) -> str:
    lines = ["model,k,median_wall_time_s,rmse_m_per_s,failed"]
    for r in rows:
        k = "" if r.k is None else io.fmt(r.k)
        lines.append(f"{r.model},{k},{io.fmt(r.wall_time)},{io.fmt(r.rmse)},{int(r.failed)}")
    return "\n".join(lines) + "\n"


# --- estimate -------------------------------------------------------------

def cmd_estimate(args) -> int:
    from .estimation.ls import IllConditionedError
    from .estimation.pipeline import MissingRecordsError, parse_steps, run_pipeline
    try:
        steps = parse_steps(args.steps)
    except ValueError as exc:
        return _fail(EXIT_INPUT, str(exc))
    data = Path(args.data)
    if not (data / io.MANIFEST).exists():
        return _fail(EXIT_MISSING, f"no {io.MANIFEST} in {data}")
    try:
        records, rows, manifest = io.read_dataset(data)
    except (io.CsvFormatError, OSError, KeyError, json.JSONDecodeError) as exc:
        return _fail(EXIT_INPUT, f"cannot read dataset: {exc}")
    try:
        res = run_pipeline(records, rows, steps, manifest.get("known"), random_state=args.seed)
    except MissingRecordsError as exc:
        return _fail(EXIT_MISSING, str(exc))
    except IllConditionedError as exc:
        return _fail(EXIT_ILL_CONDITIONED, str(exc))
    out = Path(args.out)
    diag_path = Path(args.diagnostics) if args.diagnostics else out.with_name(
        out.stem + ".diagnostics.json")
    io.write_json(out, res.to_json())
    io.write_json(diag_path, res.diagnostics)
    for k, v in res.p.items():
        print(f"{k}: {v:.6g}")
    if res.incomplete:
        print(f"incomplete: only {', '.join(res.steps)} estimated")
    return 0


# --- synth ----------------------------------------------------------------

def cmd_synth(args) -> int:
    from .sim.hybrid import SimulationError
    from .synth import ExperimentSpec, default_suite, synthesize_dataset
    try:
        params = load_params(_resolve(args.params))
        specs = None
        if args.spec:
            doc = io.read_json(_resolve(args.spec))
            items = doc.get("experiments", doc) if isinstance(doc, dict) else doc
            specs = [ExperimentSpec.from_dict(d) for d in items]
            if args.no_quantize:
                specs = [replace(s, quantize=False) for s in specs]
    except (SchemaError, ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    if specs is None:
        specs = default_suite(params, args.seed, not args.no_quantize)
    else:
        specs = [replace(s, seed=args.seed) for s in specs]
    try:
        records, rows, extra = synthesize_dataset(
            params, args.seed, not args.no_quantize, args.breakaway_noise, args.budget,
            args.var_threshold ** 2, specs, args.workers)
    except SimulationError as exc:
        return _fail(EXIT_SIMULATION, f"simulation failed: {exc}")
    io.write_dataset(args.out, records, rows, extra)
    print(f"records: {len(records)}")
    print(f"breakaway positions: {len(extra['active_sampling']['positions'])}")
    return 0


# --- filter ---------------------------------------------------------------

POSITION_COLUMNS = ("x_t", "y_t", "L", "alpha", "beta")


def cmd_filter(args) -> int:
    from .sigproc import FilterSpec, InvalidSpecError, SampledSignal, condition
    try:
        header, cols = io.read_table(args.input, ("t",))
    except io.CsvFormatError as exc:
        return _fail(EXIT_INPUT, str(exc))
    t = cols["t"]
    if t.size < 8:
        return _fail(EXIT_INPUT, "need at least 8 samples")
    steps = np.diff(t)
    dt = float(np.median(steps))
    if not dt > 0 or np.max(np.abs(steps - dt)) > 1e-6 * dt + 1e-12:
        return _fail(EXIT_INPUT, "time column must be uniformly spaced and increasing")
    names = args.columns.split(",") if args.columns else [c for c in POSITION_COLUMNS
                                                          if c in cols]
    missing = [c for c in names if c not in cols]
    if missing or not names:
        return _fail(EXIT_INPUT, f"no position column(s) to filter (missing {missing})")
    try:
        spec = FilterSpec(args.order, args.cutoff)
        spec.check(dt)
    except InvalidSpecError as exc:
        return _fail(EXIT_INPUT, str(exc))
    out_header, out_cols = list(header), [cols[h] for h in header]
    for c in names:
        cond = condition(SampledSignal(cols[c], dt), spec, args.window)
        out_header += [f"{c}_filt", f"{c}_vel", f"{c}_acc", f"{c}_mask"]
        out_cols += [cond.position.values, cond.velocity.values, cond.acceleration.values,
                     cond.mask.astype(int)]
    io.write_table(args.out, out_header, out_cols)
    return 0


# --- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybridcrane", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0, help="seed for every random choice")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a scenario file")
    s.add_argument("scenario", help="scenario JSON path or bundled name (case1, case2)")
    s.add_argument("--model", choices=("hybrid", "tanh"))
    s.add_argument("--k", type=float, help="tanh sharpness")
    s.add_argument("--out", help="trajectory CSV to write")
    s.add_argument("--events", action="store_true",
                   help="also write rows at the located event instants")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("benchmark", help="time the hybrid model against tanh smoothing")
    b.add_argument("--case", type=int, choices=(1, 2), default=1)
    b.add_argument("--ks", default="1,10,100,1000,10000")
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--out", help="CSV copy of the table")
    b.set_defaults(func=cmd_benchmark)

    e = sub.add_parser("estimate", help="identify parameters from a dataset directory")
    e.add_argument("--data", required=True)
    e.add_argument("--steps", default="all", help="comma list of rope, axes, swing, or all")
    e.add_argument("--out", required=True, help="parameter JSON to write")
    e.add_argument("--diagnostics", help="diagnostics JSON (default: next to --out)")
    e.set_defaults(func=cmd_estimate)

    y = sub.add_parser("synth", help="generate a synthetic identification dataset")
    y.add_argument("--spec", help="JSON list of experiment specs (default: built-in suite)")
    y.add_argument("--params", default="table3_params",
                   help="parameter JSON path or bundled name")
    y.add_argument("--out", required=True, help="dataset directory")
    y.add_argument("--no-quantize", action="store_true", help="skip encoder quantization")
    y.add_argument("--breakaway-noise", type=float, default=0.0, help="std of oracle noise [V]")
    y.add_argument("--budget", type=int, default=25, help="breakaway positions at most")
    y.add_argument("--var-threshold", type=float, default=0.01,
                   help="stop when the posterior std is below this [V]")
    y.add_argument("--workers", type=int, default=1, help="parallel experiment processes")
    y.set_defaults(func=cmd_synth)

    f = sub.add_parser("filter", help="zero-phase filter and differentiate a CSV record")
    f.add_argument("--in", dest="input", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--cutoff", type=float, default=3.0, help="cutoff [Hz]")
    f.add_argument("--order", type=int, default=4)
    f.add_argument("--window", type=float, default=0.15, help="reversal mask window [s]")
    f.add_argument("--columns", help="comma list of columns (default: known positions)")
    f.set_defaults(func=cmd_filter)
    return p


def main(argv=None) -> int:
    level = os.environ.get("HYBRIDCRANE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
