"""Command-line entry point: ``quadhmm simulate|decode|evaluate|bench``.

Exit codes: 0 success, 1 validation or parse error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .adaptive import decode_adaptive
from .baselines import KinematicState, ekf_track, pf_track, rts_smooth, trilateration_track
from .config import RunConfig
from .errors import QuadHmmError
from .grid import build_ladder
from .metrics import adaptive_costs, conventional_costs, evaluate, loop_closure_error, resample_truth, rmse, stopwatch
from .preprocess import preprocess_frames
from .sim import Scenario, walking_scenario
from .viterbi import decode

log = logging.getLogger("quadhmm")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2
BENCH_HEADER = ["estimator", "N", "N1", "r", "T", "repeats", "wall_time_s", "transitions", "observations",
                "backpointer_cells", "all_levels_memory_cells"]


# -- simulate ------------------------------------------------------------------------


def build_scenario(cfg: RunConfig) -> Scenario:
    sim = cfg.simulation
    return walking_scenario(
        seed=cfg.seed,
        steps=sim.steps,
        extent=cfg.extent,
        anchors=sim.anchors,
        sigma_o=cfg.params.sigma_o if sim.sigma_o is None else sim.sigma_o,
        speed=sim.speed,
        T_s=cfg.params.T_s,
        events=cfg.events,
        margin=sim.margin,
        waypoints=sim.waypoints,
        origin=cfg.origin,
    )


def cmd_simulate(cfg: RunConfig, out_dir) -> Scenario:
    scenario = build_scenario(cfg)
    io.write_scenario(out_dir, scenario)
    return scenario


# -- decode --------------------------------------------------------------------------


@dataclass
class DecodeOutput:
    times: np.ndarray
    positions: np.ndarray
    cells: np.ndarray | None = None
    level: int | None = None
    counters: dict = field(default_factory=dict)
    wall_time_s: float = 0.0
    extra: dict = field(default_factory=dict)


def _initial_state(cfg: RunConfig, scenario: Scenario, frames) -> KinematicState:
    """Biased start from the truth when available, otherwise from the first usable fix."""
    b = cfg.baselines
    if len(scenario.truth):
        t0 = frames[0].time if frames[0].time is not None else frames[0].t * cfg.params.T_s
        start = resample_truth(scenario.truth.times, scenario.truth.positions, [t0])[0]
    else:
        start = trilateration_track(frames, scenario.anchors, cfg.params.T_s).positions[0]
    return KinematicState.biased_start(start, b.bias_fraction, b.position_std, b.velocity_std)


def run_estimator(cfg: RunConfig, scenario: Scenario, frames) -> DecodeOutput:
    params = cfg.params
    est = cfg.estimator
    with stopwatch() as sw:
        if est == "viterbi":
            traj = decode(cfg.grid(), frames, scenario.anchors, params)
            out = DecodeOutput(None, traj.positions, traj.cells, 0, traj.counters.as_dict())
        elif est == "adaptive":
            res = decode_adaptive(cfg.ladder(), frames, scenario.anchors, params)
            c = res.counters.as_dict()
            c["all_levels_memory_cells"] = res.all_levels_memory_cells
            out = DecodeOutput(None, res.final.positions, res.final.cells, res.r - 1, c)
        elif est == "trilateration":
            tr = trilateration_track(frames, scenario.anchors, params.T_s)
            flagged = [float(t) for t, miss in zip(tr.times, tr.interpolated) if miss]
            out = DecodeOutput(None, tr.positions, extra={"interpolated_frames": flagged,
                                                        "interpolated_count": tr.interpolated_count})
        elif est in ("ekf", "erts"):
            track = ekf_track(frames, scenario.anchors, _initial_state(cfg, scenario, frames), params)
            if est == "erts":
                track = rts_smooth(track)
            out = DecodeOutput(None, track.positions)
        elif est == "pf":
            n = cfg.baselines.particle_count or cfg.ladder().coarsest.cell_count
            pf = pf_track(frames, scenario.anchors, n, params, cfg.seed, _initial_state(cfg, scenario, frames))
            out = DecodeOutput(None, pf.positions, extra={"particle_count": n,
                                                         "degenerate_steps": pf.degenerate_steps})
        else:  # guarded by RunConfig.validate
            raise ValueError(est)
    out.times = np.array([f.time if f.time is not None else f.t * params.T_s for f in frames], dtype=float)
    out.wall_time_s = sw.elapsed
    return out


def cmd_decode(cfg: RunConfig, scenario_dir, out_dir) -> dict:
    scenario = io.read_scenario(scenario_dir, T_s=cfg.params.T_s, origin=cfg.origin, extent=cfg.extent)
    frames = scenario.frames
    if cfg.preprocess.enabled:
        frames = preprocess_frames(frames, cfg.preprocess.threshold, cfg.preprocess.window)
    result = run_estimator(cfg, scenario, frames)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_trajectory(out / "trajectory.csv", result.times, result.positions, result.cells, result.level)
    report = {
        "rmse_m": None,
        "lce_m": loop_closure_error(result.positions) if len(result.positions) >= 2 else None,
        "transitions": result.counters.get("transitions"),
        "observations": result.counters.get("observations"),
        "backpointer_cells": result.counters.get("backpointer_cells"),
        "wall_time_s": result.wall_time_s,
        "estimator": cfg.estimator,
        "params": cfg.flat_params(),
    }
    if len(scenario.truth):
        ref = resample_truth(scenario.truth.times, scenario.truth.positions, result.times)
        report["rmse_m"] = rmse(result.positions, ref)
    if "all_levels_memory_cells" in result.counters:
        report["all_levels_memory_cells"] = result.counters["all_levels_memory_cells"]
    report.update(result.extra)
    io.write_json(out / "report.json", report)
    return report


# -- evaluate -------------------------------------------------------------------------


def cmd_evaluate(estimate_path, truth_path, out_path=None) -> dict:
    _, est = io.read_trajectory(estimate_path)
    _, ref = io.read_trajectory(truth_path)
    rep = evaluate(est, ref)
    metrics = {"rmse_m": rep.rmse, "lce_m": rep.lce, "errors_m": rep.errors}
    if out_path is not None:
        io.write_json(out_path, metrics)
    return metrics


# -- bench -----------------------------------------------------------------------------


def _bench_frames(row, cfg: RunConfig, seed: int):
    margin = min(cfg.simulation.margin, 0.25 * min(row.extent))
    scenario = walking_scenario(seed=seed, steps=row.T, extent=row.extent, sigma_o=cfg.params.sigma_o,
                                speed=cfg.simulation.speed, T_s=cfg.params.T_s, margin=margin)
    return scenario.frames, scenario.anchors


def cmd_bench(cfg: RunConfig, out_path) -> list[dict]:
    """One CSV row per (matrix row, estimator); wall time is the mean over ``repeats`` runs."""
    b = cfg.bench
    rows = []
    for n_row, row in enumerate(b.rows):
        ladder = build_ladder((0.0, 0.0), row.extent, row.resolution, row.levels)
        N, N1 = ladder.finest.cell_count, ladder.coarsest.cell_count
        frames = anchors = None
        if not b.counts_only:
            frames, anchors = _bench_frames(row, cfg, cfg.seed + n_row)
        for est in b.estimators:
            if est == "viterbi":
                cost = conventional_costs(N, row.T)
            else:
                cost = adaptive_costs(N1, ladder.r, row.T)
            times = []
            if not b.counts_only:
                T = len(frames)
                if T != row.T:
                    raise QuadHmmError(f"bench row {n_row}: {row.T - T} simulated frames were empty")
                for _ in range(b.repeats):
                    with stopwatch() as sw:
                        if est == "viterbi":
                            got = decode(ladder.finest, frames, anchors, cfg.params).counters
                        else:
                            got = decode_adaptive(ladder, frames, anchors, cfg.params).counters
                    times.append(sw.elapsed)
                    counted = (got.transitions, got.observations, got.backpointer_cells)
                    if counted != (cost.transitions, cost.observations, cost.backpointer_cells):
                        raise QuadHmmError(f"bench row {n_row} {est}: counters {counted} off the closed form")
            rows.append({
                "estimator": est, "N": N, "N1": N1, "r": 1 if est == "viterbi" else ladder.r, "T": row.T,
                "repeats": len(times), "wall_time_s": float(np.mean(times)) if times else None,
                "transitions": cost.transitions, "observations": cost.observations,
                "backpointer_cells": cost.backpointer_cells, "all_levels_memory_cells": cost.all_levels_memory_cells,
            })
            log.info("bench %s N=%d T=%d done", est, N, row.T)
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCH_HEADER)
        for r in rows:
            w.writerow([io.fmt(r[k]) if not isinstance(r[k], str) else r[k] for k in BENCH_HEADER])
    return rows


# -- argument parsing ----------------------------------------------------------------


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "estimator", None) is not None:
        cfg.estimator = args.estimator
    return cfg.validate()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quadhmm", description="Grid-HMM trajectory decoding from anchor ranges.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write a synthetic scenario directory")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True, help="output directory")

    d = sub.add_parser("decode", help="estimate a trajectory from a scenario directory")
    d.add_argument("scenario", help="directory with anchors.csv, ranges.csv and optionally truth.csv")
    d.add_argument("--config")
    d.add_argument("--seed", type=int)
    d.add_argument("--estimator", choices=["viterbi", "adaptive", "trilateration", "ekf", "erts", "pf"])
    d.add_argument("--out", required=True, help="output directory for trajectory.csv and report.json")

    e = sub.add_parser("evaluate", help="compare an estimate against truth")
    e.add_argument("estimate")
    e.add_argument("truth")
    e.add_argument("--out", help="metrics JSON path (default: stdout)")

    b = sub.add_parser("bench", help="time and count conventional vs adaptive decoding")
    b.add_argument("--config")
    b.add_argument("--seed", type=int)
    b.add_argument("--out", required=True, help="benchmark CSV path")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "simulate":
            cmd_simulate(_load_config(args), args.out)
        elif args.command == "decode":
            report = cmd_decode(_load_config(args), args.scenario, args.out)
            log.info("rmse_m=%s", report["rmse_m"])
        elif args.command == "evaluate":
            metrics = cmd_evaluate(args.estimate, args.truth, args.out)
            if args.out is None:
                print(json.dumps(metrics, indent=2))
        elif args.command == "bench":
            cmd_bench(_load_config(args), args.out)
    except (QuadHmmError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        where = f": {e.filename}" if getattr(e, "filename", None) else ""
        print(f"error: {e.strerror or e}{where}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
