"""Command-line entry point.

Subcommands: generate (synthetic cube instances), init (run one initializer
on a g2o file), bounds (gap, Monte-Carlo perturbation distribution, bound
quantiles), sweep (parameter grids over synthetic instances), benchmark
(compare initializers across datasets). Every artifact embeds the config
that produced it, including seeds and tolerances, so any output can be
reproduced by re-running the echoed config.

Exit codes: 0 success, 1 solver failure, 2 usage or IO error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__
from .bounds import evaluate_bounds, monte_carlo_delta_q, spectral_gap
from .datamatrix import assemble
from .errors import (ArgumentError, DisconnectedGraph, NoConvergence,
                     ParseError, SpectralInitError)
from .metrics import evaluate_cost, refine, so_orbit_distance
from .posegraph import (FULL_POSE, ROTATION_ONLY, PoseGraph, PoseSet,
                        estimate_to_json, load_g2o, load_truth_json,
                        save_truth_json, write_estimate_g2o, write_g2o)
from .spectral import (chordal_initialize, odometry_initialize,
                       recover_translations, spectral_initialize)
from .synthgen import CubeParams, derive_seed, generate_cube, sweep

SWEEP_COLUMNS = ["kappa", "tau", "p_lc", "s", "trial", "method", "d_S_true",
                 "cost", "lemma1_bound", "thm3_bound", "rot_only_bound",
                 "wall_ms", "error"]

BENCH_COLUMNS = ["dataset", "method", "init_time_s", "cost_init",
                 "cost_refined", "refine_iterations", "error"]


def _parse_grid(text: str) -> list[float]:
    """Grid syntax: comma-separated values, or lo:hi:count (log-spaced)."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ArgumentError(f"bad grid {text!r}, expected lo:hi:count")
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        if lo > hi:
            raise ArgumentError(f"bad grid {text!r}: lo > hi")
        if count < 1:
            raise ArgumentError(f"bad grid {text!r}: count < 1")
        if count == 1:
            return [lo]
        if lo <= 0:
            raise ArgumentError(f"bad grid {text!r}: log spacing needs lo > 0")
        return list(np.logspace(math.log10(lo), math.log10(hi), count))
    return [float(v) for v in text.split(",") if v]


def _write_csv(path, columns: list[str], rows: list[dict], config: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write("# config = " + json.dumps(config, sort_keys=True) + "\n")
        writer = csv.DictWriter(f, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row.get(c, "") for c in columns})


def _write_json(path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _run_initializer(G: PoseGraph, method: str, mode: str, seed: int,
                     tol: float):
    """Returns (estimate, wall seconds). Estimate is a RotationSet or PoseSet."""
    start = time.perf_counter()
    if method == "spectral":
        est, _ = spectral_initialize(G, mode, seed=seed, tol=tol)
    elif method == "spectral-rot":
        est, _ = spectral_initialize(G, ROTATION_ONLY, seed=seed, tol=tol)
    elif method == "chordal":
        est = chordal_initialize(G)
    elif method == "odometry":
        est = odometry_initialize(G)
    else:
        raise ArgumentError(f"unknown method {method!r}")
    return est, time.perf_counter() - start


def cmd_generate(args) -> int:
    params = CubeParams(s=args.s, p_lc=args.plc, kappa=args.kappa,
                        tau=args.tau, seed=args.seed, noiseless=args.noiseless)
    inst = generate_cube(params)
    config = {"command": "generate", "s": args.s, "p_lc": args.plc,
              "kappa": args.kappa, "tau": args.tau, "seed": args.seed,
              "noiseless": args.noiseless}
    write_g2o(inst.graph, args.output)
    truth_path = args.truth or (str(args.output) + ".truth.json")
    save_truth_json(inst.truth, truth_path, config)
    print(f"wrote {args.output} ({inst.graph.n} nodes, "
          f"{len(inst.graph.edges)} edges) and {truth_path}")
    return 0


def cmd_init(args) -> int:
    G = load_g2o(args.input)
    mode = FULL_POSE if args.mode == "full" else ROTATION_ONLY
    config = {"command": "init", "input": str(args.input),
              "method": args.method, "mode": args.mode, "seed": args.seed,
              "tol": args.tol, "refine": args.refine,
              "version": __version__}

    est, wall = _run_initializer(G, args.method, mode, args.seed, args.tol)
    rot = est.rotations if isinstance(est, PoseSet) else est

    matrices = assemble(G, mode)
    report = {
        "config": config,
        "d": G.d, "n": G.n, "edges": len(G.edges),
        "init_time_s": wall,
        "cost_init": evaluate_cost(G, rot, "quadratic", matrices=matrices),
    }
    if args.refine:
        result = refine(G, rot, max_iter=args.max_refine_iter,
                        grad_tol=args.grad_tol, matrices=matrices)
        rot = result.rotations
        report["cost_refined"] = result.cost
        report["refine_iterations"] = result.iterations
        report["refine_gradient_norm"] = result.gradient_norm

    if G.is_full and mode == FULL_POSE:
        est = recover_translations(G, rot)
    else:
        est = rot

    if args.truth:
        truth = load_truth_json(args.truth)
        report["d_S_true"] = so_orbit_distance(truth.rotations, rot).distance

    if args.output:
        if str(args.output).endswith(".g2o"):
            write_estimate_g2o(est, args.output)
        else:
            _write_json(args.output, estimate_to_json(est, config))
    if args.report:
        _write_json(args.report, report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_bounds(args) -> int:
    G = load_g2o(args.input)
    truth = load_truth_json(args.truth) if args.truth else None
    mode = FULL_POSE if args.mode == "full" else ROTATION_ONLY
    mc = monte_carlo_delta_q(G, trials=args.trials, seed=args.seed, mode=mode,
                             truth=truth)
    config = {"command": "bounds", "input": str(args.input),
              "mode": args.mode, "trials": args.trials, "seed": args.seed}
    median = float(np.median(mc.samples))
    report = evaluate_bounds(G.d, G.n, median, mc.lambda_gap,
                             surrogate_used=mc.surrogate_used)
    doc = {
        "config": config,
        "lambda_gap": mc.lambda_gap,
        "surrogate_used": mc.surrogate_used,
        "identity_gauge": mc.identity_gauge,
        "delta_q_quantiles": {str(k): v for k, v in mc.quantiles.items()},
        "bounds_at_median": report.to_json(),
        "bound_quantiles": {
            name: {str(q): float(np.quantile(vals, q))
                   for q in (0.05, 0.5, 0.95)}
            for name, vals in mc.bound_samples.items()},
    }
    if args.output:
        _write_json(args.output, doc)
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def _sweep_cell(job) -> list[dict]:
    cell_index, cell, trials, tol = job
    rows = sweep([cell], trials, tol=tol)
    for r in rows:
        r["cell_index"] = cell_index
    return rows


def cmd_sweep(args) -> int:
    kappas = _parse_grid(args.kappa)
    taus = _parse_grid(args.tau)
    plcs = _parse_grid(args.plc)
    sizes = [int(v) for v in _parse_grid(args.s)]
    if args.trials < 1:
        raise ArgumentError("trials must be at least 1")
    cells = [CubeParams(s=s, p_lc=p, kappa=k, tau=t, seed=args.seed)
             for s in sizes for p in plcs for t in taus for k in kappas]
    config = {"command": "sweep", "kappa": args.kappa, "tau": args.tau,
              "plc": args.plc, "s": args.s, "trials": args.trials,
              "seed": args.seed, "tol": args.tol, "jobs": args.jobs}

    jobs = [(ci, cell, args.trials, args.tol) for ci, cell in enumerate(cells)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            chunks = list(pool.map(_sweep_cell, jobs))
    else:
        chunks = [_sweep_cell(job) for job in jobs]
    rows = [row for chunk in sorted(chunks, key=lambda c: c[0]["cell_index"])
            for row in chunk]
    _write_csv(args.output, SWEEP_COLUMNS, rows, config)
    print(f"wrote {args.output} ({len(rows)} rows)")
    return 0


def _benchmark_dataset(job) -> list[dict]:
    path, methods, seed, tol, do_refine, max_refine_iter, grad_tol = job
    rows = []
    try:
        G = load_g2o(path)
        matrices = assemble(G, G.mode)
    except Exception as exc:
        return [{"dataset": str(path), "method": m,
                 "error": f"{type(exc).__name__}: {exc}"} for m in methods]
    for method in methods:
        row = {"dataset": str(path), "method": method, "error": ""}
        try:
            est, wall = _run_initializer(G, method, G.mode, seed, tol)
            rot = est.rotations if isinstance(est, PoseSet) else est
            row["init_time_s"] = wall
            row["cost_init"] = evaluate_cost(G, rot, "quadratic",
                                             matrices=matrices)
            if do_refine:
                result = refine(G, rot, max_iter=max_refine_iter,
                                grad_tol=grad_tol, matrices=matrices)
                row["cost_refined"] = result.cost
                row["refine_iterations"] = result.iterations
        except Exception as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def cmd_benchmark(args) -> int:
    if not args.inputs:
        raise ArgumentError("no datasets given")
    methods = args.methods.split(",")
    config = {"command": "benchmark", "inputs": [str(p) for p in args.inputs],
              "methods": args.methods, "seed": args.seed, "tol": args.tol,
              "refine": args.refine, "jobs": args.jobs}
    jobs = [(path, methods, args.seed, args.tol, args.refine,
             args.max_refine_iter, args.grad_tol) for path in args.inputs]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            chunks = list(pool.map(_benchmark_dataset, jobs))
    else:
        chunks = [_benchmark_dataset(job) for job in jobs]
    rows = [row for chunk in chunks for row in chunk]
    if args.output:
        _write_csv(args.output, BENCH_COLUMNS, rows, config)

    # aligned text table
    def fmt(row, col):
        v = row.get(col, "")
        return f"{v:.6g}" if isinstance(v, float) else str(v)
    widths = {c: max(len(c), *(len(fmt(r, c)) for r in rows))
              for c in BENCH_COLUMNS}
    header = "  ".join(c.ljust(widths[c]) for c in BENCH_COLUMNS)
    print(header)
    print("-" * len(header))
    for r in rows:
        print("  ".join(fmt(r, c).ljust(widths[c]) for c in BENCH_COLUMNS))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectralinit",
        description="Spectral initialization for rotation averaging and "
                    "pose-graph SLAM, with error-bound evaluation.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic cube instance")
    g.add_argument("--s", type=int, required=True, help="vertices per side")
    g.add_argument("--plc", type=float, default=0.1,
                   help="loop-closure probability")
    g.add_argument("--kappa", type=float, default=1e4)
    g.add_argument("--tau", type=float, default=75.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--noiseless", action="store_true")
    g.add_argument("--output", required=True, help="g2o output path")
    g.add_argument("--truth", default=None,
                   help="ground-truth sidecar path (default: <output>.truth.json)")
    g.set_defaults(func=cmd_generate)

    i = sub.add_parser("init", help="run one initializer on a g2o file")
    i.add_argument("--input", required=True)
    i.add_argument("--method", default="spectral",
                   choices=["spectral", "spectral-rot", "chordal", "odometry"])
    i.add_argument("--mode", default="full", choices=["rot", "full"])
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--tol", type=float, default=1e-8)
    i.add_argument("--refine", action=argparse.BooleanOptionalAction,
                   default=False)
    i.add_argument("--max-refine-iter", type=int, default=500)
    i.add_argument("--grad-tol", type=float, default=1e-4)
    i.add_argument("--truth", default=None, help="ground-truth sidecar JSON")
    i.add_argument("--output", default=None,
                   help="estimate path (.g2o for VERTEX records, else JSON)")
    i.add_argument("--report", default=None, help="report JSON path")
    i.set_defaults(func=cmd_init)

    b = sub.add_parser("bounds", help="Monte-Carlo perturbation-norm and "
                                      "bound distribution for a topology")
    b.add_argument("--input", required=True)
    b.add_argument("--mode", default="rot", choices=["rot", "full"])
    b.add_argument("--trials", type=int, default=20)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--truth", default=None)
    b.add_argument("--output", default=None)
    b.set_defaults(func=cmd_bounds)

    s = sub.add_parser("sweep", help="parameter sweep over synthetic cubes")
    s.add_argument("--kappa", default="1e2:1e6:9",
                   help="grid: comma list or lo:hi:count (log-spaced)")
    s.add_argument("--tau", default="150")
    s.add_argument("--plc", default="0.2")
    s.add_argument("--s", default="4")
    s.add_argument("--trials", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--output", required=True, help="CSV output path")
    s.set_defaults(func=cmd_sweep)

    k = sub.add_parser("benchmark", help="compare initializers on g2o datasets")
    k.add_argument("inputs", nargs="*", help="g2o files")
    k.add_argument("--methods", default="odometry,chordal,spectral-rot,spectral")
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--tol", type=float, default=1e-8)
    k.add_argument("--refine", action=argparse.BooleanOptionalAction,
                   default=True)
    k.add_argument("--max-refine-iter", type=int, default=500)
    k.add_argument("--grad-tol", type=float, default=1e-4)
    k.add_argument("--jobs", type=int, default=1)
    k.add_argument("--output", default=None, help="CSV output path")
    k.set_defaults(func=cmd_benchmark)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: cannot read {exc.filename}", file=sys.stderr)
        return 2
    except (ParseError, ArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NoConvergence, DisconnectedGraph) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    except SpectralInitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
