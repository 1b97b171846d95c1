"""Command-line entry point: ``pwto {genfield,plan,bench,simulate}``.

Exit codes: 0 success, 1 the run finished without the requested result
(e.g. no converged trajectory), 2 usage error, 3 unreadable or malformed
input file, 4 goal unreachable in the lattice.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .baselines import KINDS, MANIFEST_SCHEMA, TABLE_FIELDS, cost_ratio_table, run_benchmark, write_cr_table, write_manifest
from .costfield import GridParseError, load_field, rasterize, sample_field, save_grid
from .dircol import load_trajectory
from .scheduler import REPORT_SCHEMA, WORKERS_ENV, RunConfig, UnreachableError, run_pwto
from .svg import heatmap_svg
from .tracksim import SUMMARY_SCHEMA, TrackerGains, save_sim, track

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_FILE = 3
EXIT_UNREACHABLE = 4


class _FileError(Exception):
    pass


def _floats(text: str, sizes: tuple[int, ...], what: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if len(vals) not in sizes:
        raise argparse.ArgumentTypeError(f"{what}: expected {' or '.join(map(str, sizes))} values, got {len(vals)}")
    return vals


def _pose(text: str) -> np.ndarray:
    v = _floats(text, (3, 5), "pose")
    return np.array(v + [0.0, 0.0] if len(v) == 3 else v)


def _sigma(text: str):
    v = _floats(text, (1, 2), "sigma")
    return v[0] if len(v) == 1 else tuple(v)


def _gains(text: str) -> TrackerGains:
    try:
        return TrackerGains(*_floats(text, (3,), "gains"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _load_config(path: str | None, overrides: dict) -> RunConfig:
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise _FileError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise _FileError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise _FileError(f"config {path} must be a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(data)


def _load_field(path: str):
    try:
        return load_field(path)
    except (OSError, GridParseError) as exc:
        raise _FileError(f"cannot load field from {path}: {exc}") from exc


# -- subcommands ----------------------------------------------------------------------


def cmd_genfield(args) -> int:
    cf = sample_field(args.m, args.sigma, args.seed, args.scale)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_grid(rasterize(cf, args.nx, args.ny), out, field=cf)
    if args.svg:
        heatmap_svg(args.svg, cf)
    print(f"wrote {out} ({args.nx}x{args.ny}, M={args.m})")
    return EXIT_OK


def cmd_plan(args) -> int:
    cf = _load_field(args.field)
    cfg = _load_config(args.config, {"n_episode": args.n_episode, "k": args.k, "d_h_thres": args.d_h_thres,
                                     "n_nodes": args.n_nodes, "workers": args.workers})
    report = run_pwto(cf, args.start, args.goal, cfg, workers=args.workers)
    path = report.write(args.out_dir, svg=args.svg, field=cf)
    jsonschema.validate(json.loads(path.read_text()), REPORT_SCHEMA)
    if not report.has_solution:
        print(f"no process converged within {cfg.n_episode}x{cfg.k} iterations; see {path}", file=sys.stderr)
        return EXIT_FAILED
    print(f"best J = {report.c_min:.6g} (process {report.best_process}); {len(report.events)} reported solutions -> {path}")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.fields == ["table"]:
        fields = [sample_field(m, sig, args.field_seed + i) for i, (sig, m) in enumerate(TABLE_FIELDS)]
    else:
        fields = [_load_field(p) for p in args.fields]
    cfg = _load_config(args.config, {})
    env = os.environ.get(WORKERS_ENV)
    workers = args.workers if args.workers is not None else int(env) if env else 1
    kinds = tuple(k.upper() for k in args.kinds)

    def progress(row):
        m = row["methods"]
        parts = " ".join(f"{k}={m[k]['J']:.4g}" if m[k]["J"] is not None else f"{k}=--" for k in ("PWTO", *kinds))
        print(f"field {row['field_id']} instance {row['instance']}: {parts} ({row['seconds']:.0f}s)", flush=True)

    manifest = run_benchmark(fields, args.n_instances, args.seed, cfg, args.budget, kinds, progress, workers)
    jsonschema.validate(manifest, MANIFEST_SCHEMA)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(manifest, out / "manifest.json")
    write_cr_table(cost_ratio_table(manifest, kinds), out / "cr_table.csv")
    if args.svg:
        for i, cf in enumerate(fields):
            heatmap_svg(out / f"field_{i}.svg", cf)
    print(f"wrote {out / 'manifest.json'} and {out / 'cr_table.csv'}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        ref = load_trajectory(args.trajectory)
    except (OSError, ValueError) as exc:
        raise _FileError(f"cannot load trajectory {args.trajectory}: {exc}") from exc
    res = track(ref, args.gains, args.noise, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    summary_path = out.with_suffix(".json")
    save_sim(res, out, summary_path)
    jsonschema.validate(json.loads(summary_path.read_text()), SUMMARY_SCHEMA)
    s = res.summary()
    print(f"{s['steps']} steps; final position error {s['final_position_error']:.3g}, max {s['max_position_error']:.3g}")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pwto", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("genfield", help="sample a Gaussian-mixture cost field and write it as a grid")
    g.add_argument("--m", type=int, required=True, help="number of Gaussian components")
    g.add_argument("--sigma", type=_sigma, required=True, help="variance, or 'lo,hi' range")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True, help="grid CSV path (a .json sidecar is written next to it)")
    g.add_argument("--nx", type=int, default=200)
    g.add_argument("--ny", type=int, default=200)
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--svg", help="optional heatmap SVG path")
    g.set_defaults(func=cmd_genfield)

    p = sub.add_parser("plan", help="run the multi-start planner on one start/goal pair")
    p.add_argument("--field", required=True, help="grid CSV written by genfield (or a field JSON)")
    p.add_argument("--start", type=_pose, required=True, help="x,y,theta[,v,omega]")
    p.add_argument("--goal", type=_pose, required=True, help="x,y,theta[,v,omega]")
    p.add_argument("--config", help="RunConfig JSON")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--svg", action="store_true", help="also write overlay.svg")
    p.add_argument("--n-episode", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--d-h-thres", type=float)
    p.add_argument("--n-nodes", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_plan)

    b = sub.add_parser("bench", help="planner vs. baselines cost-ratio benchmark")
    b.add_argument("--fields", nargs="+", default=["table"],
                   help="grid files, or 'table' for the three standard generated fields")
    b.add_argument("--field-seed", type=int, default=0, help="base seed for 'table' fields")
    b.add_argument("--n-instances", type=int, default=10)
    b.add_argument("--seed", type=int, required=True)
    b.add_argument("--out", required=True, help="output directory")
    b.add_argument("--budget", type=int, default=1000, help="baseline iteration budget")
    b.add_argument("--kinds", nargs="+", default=list(KINDS), choices=[*KINDS, *(k.lower() for k in KINDS)])
    b.add_argument("--config", help="RunConfig JSON")
    b.add_argument("--workers", type=int, help=f"instance-level processes (default ${WORKERS_ENV} or 1)")
    b.add_argument("--svg", action="store_true", help="also write field heatmaps")
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("simulate", help="closed-loop tracking of a trajectory CSV")
    s.add_argument("--trajectory", required=True)
    s.add_argument("--gains", type=_gains, default=TrackerGains(), help="k_x,k_y,k_theta")
    s.add_argument("--noise", type=float, default=0.0, help="pose noise std per step")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="executed-trajectory CSV; summary goes to the .json sibling")
    s.set_defaults(func=cmd_simulate)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except _FileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FILE
    except UnreachableError as exc:
        print(f"error: unreachable: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
