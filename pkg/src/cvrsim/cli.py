"""Command line entry points: run, sweep, gen-grid, inspect."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import scenario as scenario_mod
from .errors import ConfigValidationError, UnknownParameterError
from .roadnet import graph_to_json, grid_graph
from .sim import TIMESERIES_COLUMNS, World, run_scenario

_PERCENTILES = (25, 50, 75, 90)


def _write_metrics(metrics, out_dir: str) -> None:
    with open(os.path.join(out_dir, "metrics.json"), "w") as fh:
        fh.write(json.dumps(metrics.to_dict(), indent=2, sort_keys=True))
        fh.write("\n")


def _write_timeseries(series, out_dir: str) -> None:
    with open(os.path.join(out_dir, "timeseries.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMESERIES_COLUMNS)
        for t, ia, ih, na, nc, m, rebal_km, cancelled in series:
            writer.writerow([f"{t:.3f}", ia, ih, na, nc, m, f"{rebal_km:.6f}", cancelled])


def _write_requests(requests, out_dir: str) -> None:
    def fmt(x):
        return "" if x is None else f"{x:.3f}"

    with open(os.path.join(out_dir, "requests.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "t0", "match_t", "pickup_t", "status"])
        for r in requests:
            writer.writerow([r.id, fmt(r.t0), fmt(r.match_time), fmt(r.pickup_time), r.status])


def cmd_run(args) -> int:
    doc = scenario_mod.load_scenario(args.scenario)
    base_dir = os.path.dirname(os.path.abspath(args.scenario))
    cfg = scenario_mod.build_config(doc, base_dir=base_dir, seed_override=args.seed)
    out_dir = args.out or doc.get("output_dir", ".")
    os.makedirs(out_dir, exist_ok=True)
    metrics, series, requests = run_scenario(cfg)
    _write_metrics(metrics, out_dir)
    _write_timeseries(series, out_dir)
    _write_requests(requests, out_dir)
    print(json.dumps(metrics.to_dict(), sort_keys=True))
    return 0


def _sweep_worker(task):
    doc, base_dir, param, value, seed = task
    modified = scenario_mod.set_sweep_value(doc, param, value)
    cfg = scenario_mod.build_config(modified, base_dir=base_dir, seed_override=seed)
    metrics, _, _ = run_scenario(cfg)
    return metrics.to_dict()


def _nan_guard(x):
    return float("nan") if x is None else x


def _aggregate(values, results_by_value):
    """Per-value mean and percentile rows plus the normalized tuning score."""
    rows = []
    for value in values:
        runs = results_by_value[value]
        row = {"value": value, "runs": len(runs)}
        for metric in ("completion_rate_pct", "mean_wait_s", "mean_system_time_s",
                       "rebalance_distance_km"):
            samples = np.array([_nan_guard(r[metric]) for r in runs], dtype=np.float64)
            row[f"{metric}_mean"] = float(np.nanmean(samples))
            for p in _PERCENTILES:
                row[f"{metric}_p{p}"] = float(np.nanpercentile(samples, p))
        rows.append(row)
    sys_means = np.array([row["mean_system_time_s_mean"] for row in rows])
    rebal_means = np.array([row["rebalance_distance_km_mean"] for row in rows])

    def minmax(x):
        span = np.nanmax(x) - np.nanmin(x)
        if not span > 0:
            return np.zeros_like(x)
        return (x - np.nanmin(x)) / span

    theta = minmax(sys_means) + minmax(rebal_means)
    for row, th in zip(rows, theta):
        row["theta"] = float(th)
    return rows


def cmd_sweep(args) -> int:
    doc = scenario_mod.load_scenario(args.scenario)
    base_dir = os.path.dirname(os.path.abspath(args.scenario))
    try:
        values = [json.loads(v) for v in args.values.split(",")]
    except json.JSONDecodeError:
        raise ConfigValidationError("values", f"cannot parse {args.values!r} as JSON scalars")
    if args.reps < 1:
        raise ConfigValidationError("reps", "need at least one repetition")
    base_seed = args.seed if args.seed is not None else int(doc.get("sim", {}).get("seed", 1))
    scenario_mod.set_sweep_value(doc, args.param, values[0])  # fail fast on bad names

    tasks = [(doc, base_dir, args.param, value, base_seed + rep)
             for value in values for rep in range(args.reps)]
    workers = int(os.environ.get("AMOD_THREADS", os.cpu_count() or 1))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(_sweep_worker, tasks))
    else:
        flat = [_sweep_worker(t) for t in tasks]

    results_by_value = {value: [] for value in values}
    for task, result in zip(tasks, flat):
        results_by_value[task[3]].append(result)
    rows = _aggregate(values, results_by_value)

    out_dir = args.out or doc.get("output_dir", ".")
    os.makedirs(out_dir, exist_ok=True)
    out_path = os.path.join(out_dir, "sweep.csv")
    columns = ["param"] + list(rows[0].keys())
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([args.param] + [row[c] for c in columns[1:]])
    print(f"wrote {out_path} ({len(rows)} rows)")
    return 0


def cmd_gen_grid(args) -> int:
    graph = grid_graph(args.k, args.spacing)
    with open(args.out, "w") as fh:
        json.dump(graph_to_json(graph), fh)
        fh.write("\n")
    print(f"wrote {args.out}: {graph.n_nodes} nodes, {graph.n_edges} edges")
    return 0


def cmd_inspect(args) -> int:
    doc = scenario_mod.load_scenario(args.scenario)
    base_dir = os.path.dirname(os.path.abspath(args.scenario))
    cfg = scenario_mod.build_config(doc, base_dir=base_dir, seed_override=args.seed)
    if args.time > cfg.horizon_s:
        raise ConfigValidationError("time", f"{args.time} beyond horizon {cfg.horizon_s}")
    world = World(cfg)
    world.run(until=args.time)
    snap = world.snapshot()
    out_dir = args.out or doc.get("output_dir", ".")
    os.makedirs(out_dir, exist_ok=True)

    with open(os.path.join(out_dir, "snapshot_vehicles.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "x_m", "y_m", "state", "held", "destination"])
        for v in snap["vehicles"]:
            writer.writerow([v["id"], f"{v['x_m']:.3f}", f"{v['y_m']:.3f}",
                             v["state"], int(v["held"]),
                             "" if v["destination"] is None else v["destination"]])

    with open(os.path.join(out_dir, "snapshot_assignment.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        if "pixel_assignment" in snap:
            field = snap["field"]
            gen_ids = snap["pixel_generator_ids"]
            writer.writerow(["pixel_x", "pixel_y", "generator_index"])
            for pix, gen in enumerate(snap["pixel_assignment"]):
                x, y = field.centers[pix]
                writer.writerow([f"{x:.3f}", f"{y:.3f}", gen_ids[int(gen)]])
        elif "node_assignment" in snap:
            writer.writerow(["node", "generator_node"])
            for node, gen in enumerate(snap["node_assignment"]):
                writer.writerow([node, int(gen)])
        else:
            writer.writerow(["node", "generator_node"])
    print(f"snapshot at t={snap['t_s']:.1f}s written to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvrsim",
        description="Coverage-control fleet rebalancing scenarios: run, sweep, inspect.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario and write its artifacts")
    run_p.add_argument("--scenario", required=True)
    run_p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser("sweep", help="run repetitions across parameter values")
    sweep_p.add_argument("--scenario", required=True)
    sweep_p.add_argument("--param", required=True)
    sweep_p.add_argument("--values", required=True, help="comma-separated JSON scalars")
    sweep_p.add_argument("--reps", type=int, default=1)
    sweep_p.add_argument("--seed", type=int, default=None, help="base seed (seed..seed+reps-1)")
    sweep_p.add_argument("--out", default=None)
    sweep_p.set_defaults(func=cmd_sweep)

    grid_p = sub.add_parser("gen-grid", help="emit a synthetic k-by-k grid network")
    grid_p.add_argument("--k", type=int, required=True)
    grid_p.add_argument("--spacing", type=float, required=True, help="edge length in meters")
    grid_p.add_argument("--out", required=True)
    grid_p.set_defaults(func=cmd_gen_grid)

    inspect_p = sub.add_parser("inspect", help="dump a mid-run fleet/partition snapshot")
    inspect_p.add_argument("--scenario", required=True)
    inspect_p.add_argument("--time", type=float, required=True)
    inspect_p.add_argument("--seed", type=int, default=None)
    inspect_p.add_argument("--out", default=None)
    inspect_p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigValidationError as exc:
        print(json.dumps({"error": "ConfigValidation", "field": exc.field,
                          "message": exc.reason}))
        return 2
    except UnknownParameterError as exc:
        print(json.dumps({"error": "UnknownParameter", "message": str(exc)}))
        return 2
    except FileNotFoundError as exc:
        print(json.dumps({"error": "FileNotFound", "message": str(exc)}))
        return 2


if __name__ == "__main__":
    sys.exit(main())
