"""Command-line front end.

Subcommands: ``gen`` writes a synthetic labelled anchor grid, ``eval``
evaluates a surface at a coordinate or label, ``identify`` finds the
closest family member to a target covariance, ``bench`` runs the
train/test protocol. Diagnostics go to stderr; stdout carries only data
(the identify result JSON). Exit codes: 2 invalid flags, 3 I/O failure,
4 undefined geodesic/projection (cut locus), 5 identification did not
converge (the result is still printed).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .bench import (
    DEFAULT_METHODS,
    SyntheticFieldSpec,
    emit_report,
    generate_field,
    parse_method,
    run_benchmark,
    summary_to_csv,
)
from .covfun import build_surface
from .errors import CovfamError, CutLocus
from .fileio import read_factor, read_grid, write_factor, write_grid
from .identify import SampleCovariance, identify

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_CUTLOCUS = 4
EXIT_NOT_CONVERGED = 5


def _fail(code: int, message: str) -> int:
    print(f"covfam: {message}", file=sys.stderr)
    return code


def _parse_grid_shape(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"expected N1xN2, got {text!r}")
    return int(parts[0]), int(parts[1])


def _parse_range(text: str) -> tuple[float, float]:
    parts = text.split("..")
    if len(parts) != 2:
        raise ValueError(f"expected a..b, got {text!r}")
    return float(parts[0]), float(parts[1])


def _parse_pair(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="covfam")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic labelled anchor grid")
    gen.add_argument("--n", type=int, default=200)
    gen.add_argument("--r", type=int, default=10)
    gen.add_argument("--grid", default="5x4", help="node counts N1xN2 (nodes, not patches)")
    gen.add_argument("--theta-range", default="0..22.5")
    gen.add_argument("--w-range", default="4..13")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--rotation-rate", type=float, default=0.0625)
    gen.add_argument("--scale-rate", type=float, default=0.08)
    gen.add_argument("--noisy", action="store_true")
    gen.add_argument("--samples", type=int, default=512)
    gen.add_argument("--preset", choices=["wind"], default=None)
    gen.add_argument("--out", required=True)

    ev = sub.add_parser("eval", help="evaluate a surface at a coordinate or label")
    ev.add_argument("--grid", required=True)
    ev.add_argument("--method", required=True, choices=["ls", "lg", "bs", "bg"])
    ev.add_argument("--section", choices=["one", "arithm", "inductive"], default=None)
    where = ev.add_mutually_exclusive_group(required=True)
    where.add_argument("--t", default=None, help="grid coordinates t1[,t2]")
    where.add_argument("--label", default=None, help="physical label theta,W")
    ev.add_argument("--out", required=True)

    ident = sub.add_parser("identify", help="closest family member to a target covariance")
    ident.add_argument("--grid", required=True)
    ident.add_argument("--method", required=True, help="kind[:section], e.g. bs:one")
    ident.add_argument("--target", default=None, help="factor file of the target covariance")
    ident.add_argument("--samples", default=None,
                       help="directory holding one factor file of raw sample columns")

    bench = sub.add_parser("bench", help="run the train/test protocol")
    bench.add_argument("--spec", required=True, help="JSON synthetic field spec")
    bench.add_argument("--methods", default=",".join(DEFAULT_METHODS))
    bench.add_argument("--mode", choices=["interp", "identify"], required=True)
    bench.add_argument("--out", required=True)
    bench.add_argument("--threads", type=int, default=None)
    return parser


def _cmd_gen(args) -> int:
    try:
        nodes = _parse_grid_shape(args.grid)
    except ValueError as exc:
        return _fail(EXIT_USAGE, str(exc))
    if nodes[0] < 2 or nodes[1] < 1 or (nodes[0], nodes[1]) == (1, 1):
        return _fail(
            EXIT_USAGE,
            f"--grid {args.grid}: a grid needs at least 2x2 nodes "
            "(or Kx1 with K >= 2 for a one-parameter family)",
        )
    try:
        theta_range = _parse_range(args.theta_range)
        w_range = _parse_range(args.w_range)
    except ValueError as exc:
        return _fail(EXIT_USAGE, str(exc))
    try:
        if args.preset == "wind":
            spec = SyntheticFieldSpec.wind(
                seed=args.seed, sample_count=args.samples if args.noisy else None
            )
        else:
            spec = SyntheticFieldSpec(
                n=args.n, r=args.r, grid_shape=nodes,
                theta_range=theta_range, w_range=w_range, seed=args.seed,
                rotation_rate=args.rotation_rate, scale_rate=args.scale_rate,
                sample_count=args.samples if args.noisy else None,
            )
    except ValueError as exc:
        return _fail(EXIT_USAGE, str(exc))
    try:
        grid = generate_field(spec).training_grid()
        manifest = write_grid(args.out, grid)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write grid: {exc}")
    print(f"wrote {manifest}", file=sys.stderr)
    return EXIT_OK


def _load_surface(args):
    grid = read_grid(args.grid)
    if grid.one_parameter:
        return grid, build_surface(grid, args.method, None)
    if args.method in ("ls", "bs") and args.section is None:
        raise ValueError(f"method {args.method!r} needs --section")
    policy = args.section if args.method in ("ls", "bs") else None
    return grid, build_surface(grid, args.method, policy)


def _cmd_eval(args) -> int:
    try:
        grid, surface = _load_surface(args)
    except FileNotFoundError as exc:
        return _fail(EXIT_IO, str(exc))
    except ValueError as exc:
        return _fail(EXIT_USAGE, str(exc))

    label = None
    if args.t is not None:
        coords = _parse_pair(args.t)
        if len(coords) == 1 and grid.one_parameter:
            coords = (coords[0], 0.0)
        if len(coords) != 2:
            return _fail(EXIT_USAGE, f"--t needs t1,t2 (or t1 alone on a one-parameter grid)")
    else:
        pair = _parse_pair(args.label)
        if len(pair) != 2:
            return _fail(EXIT_USAGE, "--label needs theta,W")
        label = pair
        coords = grid.label_map.to_coords(*pair)
    if not grid.label_map.in_domain(*coords):
        print(f"warning: extrapolating outside the grid at t = {coords}", file=sys.stderr)
    try:
        point = surface.evaluate(*coords)
    except CutLocus as exc:
        return _fail(EXIT_CUTLOCUS, str(exc))
    try:
        write_factor(args.out, point.y, label=label)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write factor: {exc}")
    flag = "degenerate" if point.degenerate else f"full ({point.r} columns)"
    print(f"rank: {flag}", file=sys.stderr)
    return EXIT_OK


def _cmd_identify(args) -> int:
    if (args.target is None) == (args.samples is None):
        return _fail(EXIT_USAGE, "need exactly one of --target or --samples")
    try:
        kind, policy = parse_method(args.method)
    except ValueError as exc:
        return _fail(EXIT_USAGE, str(exc))
    try:
        grid = read_grid(args.grid)
        if args.target is not None:
            y, _ = read_factor(args.target)
            c_hat = SampleCovariance.from_factor(y)
        else:
            manifests = sorted(Path(args.samples).glob("*.json"))
            if len(manifests) != 1:
                return _fail(EXIT_IO, f"--samples: expected one factor file in {args.samples}")
            y, _ = read_factor(manifests[0])
            c_hat = SampleCovariance.from_samples(y)
    except FileNotFoundError as exc:
        return _fail(EXIT_IO, str(exc))
    except ValueError as exc:
        return _fail(EXIT_USAGE, str(exc))
    try:
        surface = build_surface(grid, kind, policy if not grid.one_parameter else None)
        result = identify(surface, c_hat)
    except CutLocus as exc:
        return _fail(EXIT_CUTLOCUS, str(exc))
    except (ValueError, CovfamError) as exc:
        return _fail(EXIT_USAGE, str(exc))
    print(json.dumps(result.to_dict(), sort_keys=True))
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _cmd_bench(args) -> int:
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("COVFAM_THREADS", "1"))
    try:
        spec = SyntheticFieldSpec.from_dict(json.loads(Path(args.spec).read_text()))
    except FileNotFoundError as exc:
        return _fail(EXIT_IO, str(exc))
    except (ValueError, TypeError, KeyError) as exc:
        return _fail(EXIT_USAGE, f"bad spec file: {exc}")
    methods = [m for m in args.methods.split(",") if m]
    try:
        for m in methods:
            parse_method(m)
    except ValueError as exc:
        return _fail(EXIT_USAGE, str(exc))
    try:
        report = run_benchmark(
            generate_field(spec), methods=methods, mode=args.mode, threads=max(threads, 1)
        )
    except CovfamError as exc:
        return _fail(EXIT_CUTLOCUS if isinstance(exc, CutLocus) else EXIT_USAGE, str(exc))
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_bytes(emit_report(report, "json"))
        (out / "records.csv").write_bytes(emit_report(report, "csv"))
        (out / "summary.csv").write_text(summary_to_csv(report))
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write report: {exc}")
    print(summary_to_csv(report), end="", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    np.seterr(all="ignore")
    handlers = {
        "gen": _cmd_gen,
        "eval": _cmd_eval,
        "identify": _cmd_identify,
        "bench": _cmd_bench,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
