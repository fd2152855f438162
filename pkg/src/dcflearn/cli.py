"""Benchmark and evaluation command line.

Subcommands:

* ``synth-bench``  — random synthetic problems, all three solver variants,
  per-seed convergence traces and a median iteration-count summary.
* ``ode-check``    — iterate-versus-trajectory deviation across penalty
  values; exits nonzero when deviations fail to decrease.
* ``track``        — one-pass tracking over an image sequence directory.
* ``eval``         — CLE/DP/OP/AUC scoring of result files against ground
  truth, with precision/success curve CSVs and SVG plots.
* ``make-fixture`` — deterministic moving-square test sequence.

All commands are deterministic given their inputs and ``--seed``; every JSON
report embeds the resolved configuration.  The ``DCF_THREADS`` environment
variable caps worker-pool sizes.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import svgplot
from .dynamics import OdeKind, compare_iterates_to_ode
from .fixtures import make_moving_square
from .metrics import evaluate, load_boxes, save_boxes, CLE_THRESHOLDS, IOU_THRESHOLDS
from .objective import random_instance
from .solvers import SolverConfig, SolverVariant, run_solver_full
from .tracker import BoundingBox, TrackerConfig, list_frames, track_sequence

__all__ = ["main"]


def worker_count(n_tasks: int) -> int:
    cap = os.environ.get("DCF_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n_tasks, limit))


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--variant", choices=[v.value for v in SolverVariant], default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)


def _solver_from_flags(args, base: SolverConfig | None = None) -> SolverConfig:
    cfg = base if base is not None else SolverConfig()
    updates = {}
    if args.variant is not None:
        updates["variant"] = SolverVariant(args.variant)
        if args.alpha is None:
            updates["alpha"] = None  # let the variant pick its default
    for name, key in (("rho", "rho"), ("alpha", "alpha"), ("r", "r"),
                      ("max_iters", "max_iters"), ("tol", "tol")):
        value = getattr(args, name)
        if value is not None:
            updates[key] = value
    return replace(cfg, **updates) if updates else cfg


def _load_json(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------- synth-bench


def _bench_one_seed(seed: int, problem_cfg: dict, solver: SolverConfig, target_tol: float):
    rng = np.random.default_rng(seed)
    prob = random_instance(
        rng,
        n=problem_cfg["n"],
        c=problem_cfg["c"],
        target_cells=(problem_cfg["target_h"], problem_cfg["target_w"]),
        lambda1=problem_cfg["lambda1"],
        lambda2=problem_cfg["lambda2"],
        rho=problem_cfg["rho"],
        sigma=problem_cfg["sigma"],
        scale=problem_cfg["scale"],
    )
    out = {}
    for variant in SolverVariant:
        cfg = replace(solver, variant=variant,
                      alpha=1.0 if variant is SolverVariant.ADMM else solver.alpha,
                      max_iters=500, tol=target_tol)
        _, trace = run_solver_full(prob, cfg)
        count = len(trace) if trace.converged else 500
        out[variant.value] = (count, trace)
    return out


def cmd_synth_bench(args) -> int:
    file_cfg = _load_json(args.config)
    problem_cfg = {
        "n": 32, "c": 12, "target_h": 8, "target_w": 8,
        "lambda1": 10.0, "lambda2": 100.0, "rho": 1.0, "sigma": None, "scale": 1.0,
    }
    problem_cfg.update(file_cfg.get("problem", {}))
    if args.n is not None:
        problem_cfg["n"] = args.n
    if args.channels is not None:
        problem_cfg["c"] = args.channels
    solver = _solver_from_flags(args, SolverConfig.from_dict(file_cfg.get("solver", {})))
    target_tol = args.tol if args.tol is not None else solver.tol
    seeds = [args.seed + i for i in range(args.seeds)]

    os.makedirs(args.out, exist_ok=True)
    trace_dir = os.path.join(args.out, "traces")
    os.makedirs(trace_dir, exist_ok=True)
    with ThreadPoolExecutor(max_workers=worker_count(len(seeds))) as pool:
        results = list(pool.map(
            lambda s: _bench_one_seed(s, problem_cfg, solver, target_tol), seeds
        ))

    counts = {v.value: [] for v in SolverVariant}
    for seed, res in zip(seeds, results):
        for variant, (count, trace) in res.items():
            counts[variant].append(count)
            trace.to_csv(
                os.path.join(trace_dir, f"{variant}_seed{seed}.csv"),
                zero_elapsed=not args.timing,
            )
    summary = {
        "config": {"problem": problem_cfg, "solver": solver.to_dict(),
                   "target_tol": target_tol, "seeds": seeds},
        "iterations": counts,
        "median_iterations": {v: statistics.median(c) for v, c in counts.items()},
    }
    _write_json(os.path.join(args.out, "summary.json"), summary)

    idx = np.arange(len(seeds))
    svgplot.write_line_chart(
        os.path.join(args.out, "iterations.svg"),
        [(v, idx, np.array(c, float)) for v, c in counts.items()],
        title="Iterations to tolerance per seed",
        xlabel="seed index", ylabel="iterations",
    )
    first = results[0]
    svgplot.write_line_chart(
        os.path.join(args.out, "trace_seed0.svg"),
        [(v, np.arange(1, len(tr) + 1), np.maximum(tr.objectives, 1e-300))
         for v, (_, tr) in first.items()],
        title=f"Objective trace, seed {seeds[0]}",
        xlabel="iteration", ylabel="objective", loglog=args.loglog,
    )
    print(json.dumps(summary["median_iterations"], sort_keys=True))
    return 0


# ------------------------------------------------------------------ ode-check


def cmd_ode_check(args) -> int:
    rhos = args.rho
    if sorted(rhos) != rhos:
        print("error: --rho values must be increasing", file=sys.stderr)
        return 2
    rng = np.random.default_rng(args.seed)
    prob = random_instance(
        rng, n=args.n, c=args.channels,
        target_cells=(args.n // 2, args.n // 2),
        lambda1=args.lambda1, lambda2=args.lambda2, sigma=args.sigma,
    )
    pairings = []
    if args.pairing in ("accelerated", "both"):
        pairings.append((OdeKind.ACCELERATED, SolverVariant.RA_ADMM, args.horizon_accel))
    if args.pairing in ("first-order", "both"):
        pairings.append((OdeKind.FIRST_ORDER, SolverVariant.ADMM, args.horizon_first))

    os.makedirs(args.out, exist_ok=True)
    report = {
        "config": {
            "rho": rhos, "n": args.n, "c": args.channels,
            "lambda1": args.lambda1, "lambda2": args.lambda2, "sigma": args.sigma,
            "seed": args.seed, "pairing": args.pairing,
            "horizon_accel": args.horizon_accel, "horizon_first": args.horizon_first,
        },
        "pairings": {},
        "monotone_decreasing": {},
    }
    ok = True
    for kind, variant, horizon in pairings:
        rows = []
        for rho in rhos:
            cfg = SolverConfig(variant=variant, rho=rho)
            comp = compare_iterates_to_ode(prob.with_rho(rho), cfg, horizon_t=horizon)
            rows.append(comp.to_json_dict())
        devs = [r["max_deviation"] for r in rows]
        decreasing = all(devs[i] > devs[i + 1] for i in range(len(devs) - 1))
        report["pairings"][kind.value] = rows
        if len(rhos) > 1:
            report["monotone_decreasing"][kind.value] = decreasing
            ok = ok and decreasing
    _write_json(os.path.join(args.out, "ode_report.json"), report)
    print(json.dumps(report["monotone_decreasing"] or {"single_rho": True}, sort_keys=True))
    return 0 if ok else 1


# ---------------------------------------------------------------------- track


def cmd_track(args) -> int:
    frames = list_frames(args.sequence)
    if args.init_box:
        x, y, w, h = (float(v) for v in args.init_box.split(","))
    else:
        gt_path = os.path.join(args.sequence, "groundtruth_rect.txt")
        x, y, w, h = load_boxes(gt_path)[0]
    init = BoundingBox(x=x, y=y, w=w, h=h)
    tracker_cfg = TrackerConfig.from_dict(_load_json(args.config)) if args.config else TrackerConfig()
    tracker_cfg = replace(tracker_cfg, solver=_solver_from_flags(args, tracker_cfg.solver))
    boxes, fps, state = track_sequence(frames, init, tracker_cfg)
    save_boxes(args.out, np.array([[b.x, b.y, b.w, b.h] for b in boxes]))
    print(f"frames={len(boxes)} fps={fps:.2f} solver_iterations={state.solver_iterations_total}")
    if args.stats:
        _write_json(args.stats, {
            "config": tracker_cfg.to_dict(),
            "frames": len(boxes),
            "fps": fps,
            "solver_iterations_total": state.solver_iterations_total,
            "sequence": os.path.abspath(args.sequence),
        })
    return 0


# ----------------------------------------------------------------------- eval


def cmd_eval(args) -> int:
    if len(args.results) != len(args.gt):
        print("error: --results and --gt must pair up", file=sys.stderr)
        return 2
    with ThreadPoolExecutor(max_workers=worker_count(len(args.results))) as pool:
        results = list(pool.map(load_boxes, args.results))
        truths = list(pool.map(load_boxes, args.gt))
    names = args.names or [os.path.splitext(os.path.basename(p))[0] for p in args.results]
    report = evaluate(
        results, truths, names,
        dp_threshold=args.dp_threshold, op_threshold=args.op_threshold,
        dp_inclusive=not args.dp_exclusive, op_strict=not args.op_inclusive,
        fps=args.fps,
    )
    os.makedirs(args.out, exist_ok=True)
    payload = report.to_json_dict()
    payload["config"] = {
        "results": [os.path.abspath(p) for p in args.results],
        "gt": [os.path.abspath(p) for p in args.gt],
        "dp_threshold": args.dp_threshold, "op_threshold": args.op_threshold,
        "dp_inclusive": not args.dp_exclusive, "op_strict": not args.op_inclusive,
    }
    _write_json(os.path.join(args.out, "report.json"), payload)
    for fname, thresholds, curve in (
        ("precision.csv", CLE_THRESHOLDS, report.precision),
        ("success.csv", IOU_THRESHOLDS, report.success),
    ):
        with open(os.path.join(args.out, fname), "w") as fh:
            fh.write("threshold,fraction\n")
            for t, f in zip(thresholds, curve):
                fh.write(f"{t:g},{f:.6f}\n")
    svgplot.write_line_chart(
        os.path.join(args.out, "precision.svg"),
        [("precision", CLE_THRESHOLDS, report.precision)],
        title=f"Precision (DP={report.dp:.3f} at {args.dp_threshold:g} px)",
        xlabel="location error threshold (px)", ylabel="fraction of frames",
    )
    svgplot.write_line_chart(
        os.path.join(args.out, "success.svg"),
        [("success", IOU_THRESHOLDS, report.success)],
        title=f"Success (AUC={report.auc:.3f}, OP={report.op:.3f})",
        xlabel="overlap threshold", ylabel="fraction of frames",
    )
    print(json.dumps({"mean_cle": report.mean_cle, "dp": report.dp,
                      "op": report.op, "auc": report.auc}, sort_keys=True))
    return 0


# --------------------------------------------------------------- make-fixture


def cmd_make_fixture(args) -> int:
    boxes = make_moving_square(
        args.out, frames=args.frames, frame_size=(args.width, args.height),
        square=args.square, velocity=(args.vx, args.vy),
    )
    print(f"wrote {len(boxes)} frames to {args.out}")
    return 0


# ----------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcflearn", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-bench", help="solver benchmark on synthetic problems")
    p.add_argument("--config", help="JSON file with problem/solver settings")
    p.add_argument("--seeds", type=int, default=50, help="number of random seeds")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--n", type=int, default=None, help="grid side")
    p.add_argument("--channels", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--timing", action="store_true", help="write real wall times to CSVs")
    p.add_argument("--loglog", action="store_true", help="log-log objective trace plot")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_synth_bench)

    p = sub.add_parser("ode-check", help="iterate-vs-trajectory deviation check")
    p.add_argument("--rho", type=float, nargs="+", required=True, help="increasing penalty values")
    p.add_argument("--pairing", choices=["accelerated", "first-order", "both"], default="both")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--channels", type=int, default=2)
    p.add_argument("--lambda1", type=float, default=0.5)
    p.add_argument("--lambda2", type=float, default=2.0)
    p.add_argument("--sigma", type=float, default=0.8)
    p.add_argument("--horizon-accel", type=float, default=3.0)
    p.add_argument("--horizon-first", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ode_check)

    p = sub.add_parser("track", help="one-pass tracking over a sequence directory")
    p.add_argument("sequence", help="directory with img/%%04d.{jpg,png} and groundtruth_rect.txt")
    p.add_argument("--out", required=True, help="output box file")
    p.add_argument("--init-box", help="x,y,w,h (default: first ground-truth line)")
    p.add_argument("--config", help="tracker config JSON")
    p.add_argument("--stats", help="write FPS/config stats JSON here")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score result files against ground truth")
    p.add_argument("--results", nargs="+", required=True)
    p.add_argument("--gt", nargs="+", required=True)
    p.add_argument("--names", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--dp-threshold", type=float, default=20.0)
    p.add_argument("--op-threshold", type=float, default=0.5)
    p.add_argument("--dp-exclusive", action="store_true",
                   help="count location errors strictly below the threshold")
    p.add_argument("--op-inclusive", action="store_true",
                   help="count overlaps at or above the threshold")
    p.add_argument("--fps", type=float, default=None, help="embed an FPS figure in the report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("make-fixture", help="generate a moving-square sequence")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--width", type=int, default=160)
    p.add_argument("--height", type=int, default=120)
    p.add_argument("--square", type=int, default=24)
    p.add_argument("--vx", type=float, default=1.7)
    p.add_argument("--vy", type=float, default=1.1)
    p.set_defaults(func=cmd_make_fixture)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
