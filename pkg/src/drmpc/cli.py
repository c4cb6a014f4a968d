"""Command-line front end: run episodes, sweep parameters, validate configs.

Exit codes for ``run``: 0 success, 2 the episode ended in a collision
(min distance below the threshold), 1 any error. Outputs are written to the
--out directory: ``manifest.json`` (before results), ``trajectory.csv``, and
``summary.json``. ``sweep`` writes ``sweep.csv`` with one aggregate row per
(value, propagator).

CSV columns (units: km, km/s, km/s^2, s):
  t, rs_x..rs_z, vs_x..vs_z, rd_x..rd_z, vd_x..vd_z, u_x..u_z,
  distance, risk, feasible
where ``risk`` is the worst-case CVaR value of the first planned horizon
step of the control applied at t (empty when control is disabled) and
``feasible`` flags whether the whole planned horizon met the constraint.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, config, mpc

TRAJECTORY_COLUMNS = [
    "t",
    "rs_x", "rs_y", "rs_z", "vs_x", "vs_y", "vs_z",
    "rd_x", "rd_y", "rd_z", "vd_x", "vd_y", "vd_z",
    "u_x", "u_y", "u_z",
    "distance", "risk", "feasible",
]


def _fmt(x: float) -> str:
    """Shortest round-trip float formatting; stable across identical runs."""
    return repr(float(x))


def _write_manifest(
    out_dir: Path, scenario: mpc.Scenario, command: str, outputs: list[str]
) -> None:
    manifest = {
        "config_hash": config.config_hash(scenario),
        "master_seed": scenario.seed,
        "code_version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "command": command,
        "outputs": outputs,
    }
    with (out_dir / "manifest.json").open("w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_trajectory_csv(record: mpc.EpisodeRecord, path: Path) -> None:
    n_sub = (record.fine_distances.shape[0] - 1) // record.times.shape[0]
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
        for i, t in enumerate(record.times):
            row = [_fmt(t)]
            row += [_fmt(x) for x in record.sat_states[i]]
            row += [_fmt(x) for x in record.debris_states[i]]
            row += [_fmt(x) for x in record.controls[i]]
            row.append(_fmt(record.fine_distances[i * n_sub]))
            if record.controlled:
                row.append(_fmt(record.planned_risks[i, 0]))
                row.append("true" if record.feasible[i] else "false")
            else:
                row.append("")
                row.append("")
            writer.writerow(row)


def write_summary_json(
    record: mpc.EpisodeRecord, scenario: mpc.Scenario, path: Path
) -> None:
    summary = {
        "min_distance_km": record.min_distance,
        "total_delta_v_kms": record.total_delta_v,
        "collision": record.collision,
        "seeds": [record.seed],
        "config_hash": config.config_hash(scenario),
    }
    with path.open("w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _apply_run_overrides(scenario: mpc.Scenario, args) -> mpc.Scenario:
    import dataclasses

    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=int(args.seed))
    if args.propagator is not None:
        scenario = mpc.apply_axis_override(scenario, "propagator", args.propagator)
    if args.epsilon is not None:
        scenario = mpc.apply_axis_override(scenario, "epsilon", float(args.epsilon))
    if args.no_control:
        scenario = dataclasses.replace(scenario, control_enabled=False)
    return scenario


def cmd_run(args) -> int:
    try:
        scenario = config.load_config(args.config)
        scenario = _apply_run_overrides(scenario, args)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_manifest(
            out_dir, scenario, "run", ["trajectory.csv", "summary.json"]
        )
        record = mpc.run_episode(scenario)
        write_trajectory_csv(record, out_dir / "trajectory.csv")
        write_summary_json(record, scenario, out_dir / "summary.json")
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"min_distance_km={record.min_distance:.6f} "
        f"total_delta_v_kms={record.total_delta_v:.6f} "
        f"collision={str(record.collision).lower()}"
    )
    return 2 if record.collision else 0


SWEEP_COLUMNS = [
    "axis", "value", "propagator", "n_runs", "failed",
    "min_distance_mean_km", "min_distance_std_km",
    "delta_v_mean_kms", "delta_v_std_kms", "collisions",
]


def write_sweep_csv(rows: list[mpc.BatchRow], path: Path) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.axis,
                    str(row.value),
                    row.propagator,
                    row.n_runs,
                    len(row.failed_seeds),
                    _fmt(row.min_distance_mean),
                    _fmt(row.min_distance_std),
                    _fmt(row.delta_v_mean),
                    _fmt(row.delta_v_std),
                    row.collisions,
                ]
            )


def cmd_sweep(args) -> int:
    try:
        scenario = config.load_config(args.config)
        if args.seed is not None:
            import dataclasses

            scenario = dataclasses.replace(scenario, seed=int(args.seed))
        values: list[object]
        if args.axis == "propagator":
            values = list(args.values)
        else:
            values = [float(v) for v in args.values]
        if not values:
            raise ValueError("sweep needs at least one value")
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_manifest(out_dir, scenario, "sweep", ["sweep.csv"])
        rows = mpc.run_batch(
            scenario,
            n_runs=args.runs,
            master_seed=scenario.seed,
            overrides=[(args.axis, v) for v in values],
            n_jobs=args.jobs,
        )
        write_sweep_csv(rows, out_dir / "sweep.csv")
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for row in rows:
        print(
            f"{row.axis}={row.value} ({row.propagator}): "
            f"min_distance={row.min_distance_mean:.4f}+/-{row.min_distance_std:.4f} km, "
            f"delta_v={row.delta_v_mean:.4f}+/-{row.delta_v_std:.4f} km/s, "
            f"collisions={row.collisions}/{row.n_runs - len(row.failed_seeds)}"
        )
    return 0


def cmd_validate(args) -> int:
    try:
        scenario = config.load_config(args.config)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    print(f"ok: config_hash={config.config_hash(scenario)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drmpc",
        description="Chance-constrained satellite collision avoidance experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one closed-loop episode")
    run_p.add_argument("--config", default=None, help="YAML scenario config")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--propagator", choices=["linear", "ut", "mc"], default=None)
    run_p.add_argument("--epsilon", type=float, default=None)
    run_p.add_argument("--out", default="drmpc_out")
    run_p.add_argument(
        "--no-control", action="store_true", help="disable the avoidance controller"
    )
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser("sweep", help="run seeded batches over a parameter axis")
    sweep_p.add_argument(
        "--axis", choices=["epsilon", "q_scale", "propagator"], required=True
    )
    sweep_p.add_argument("--values", nargs="+", required=True)
    sweep_p.add_argument("--runs", type=int, default=10)
    sweep_p.add_argument("--config", default=None)
    sweep_p.add_argument("--seed", type=int, default=None)
    sweep_p.add_argument("--out", default="drmpc_out")
    sweep_p.add_argument("--jobs", type=int, default=1)
    sweep_p.set_defaults(func=cmd_sweep)

    val_p = sub.add_parser("validate", help="validate a scenario config")
    val_p.add_argument("--config", required=True)
    val_p.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
