"""Command line front end.

Subcommands:
    simulate    synthesize scans for a scene and trajectory
    ingest      convert swept-frequency CFR recordings to matrix files
    run         full pipeline: matrices to trajectory, map and metrics
    metrics     channel spread report over a directory of matrices
    map-export  threshold a saved log-odds map into a ternary graymap

Exit status is 0 on success; failures print the offending stage to stderr
and exit nonzero.
"""

import argparse
import math
import os
import sys

import numpy as np

from . import io as rio
from .channel import lognormal_fit
from .mapping import export_map, read_log_odds, write_pgm
from .pipeline import PipelineError, run_pipeline, spread_report_for_dir
from .preprocess import build_angle_delay_matrix
from .sim import (
    AntennaPattern,
    SimConfig,
    generate_trajectory,
    load_scene,
    synthesize_scan,
)


def _add_simulate(sub):
    p = sub.add_parser("simulate", help="synthesize scans for a scene and trajectory")
    p.add_argument("--scene", required=True, help="scene file: x1 y1 x2 y2 reflectivity per line")
    p.add_argument("--trajectory", default="line-boresight",
                   choices=["line-boresight", "line-broadside", "oval"])
    p.add_argument("--out", required=True, help="output directory for .adm files")
    p.add_argument("--n-steps", type=int, default=9)
    p.add_argument("--step", type=float, default=0.25)
    p.add_argument("--n-angles", type=int, default=181)
    p.add_argument("--n-bins", type=int, default=512)
    p.add_argument("--t-min", type=float, default=0.0)
    p.add_argument("--t-s", type=float, default=None,
                   help="delay step in seconds; default makes one bin per range-bin meters")
    p.add_argument("--range-bin", type=float, default=0.02,
                   help="one-way meters per delay bin when --t-s is not given")
    p.add_argument("--azimuth-step", type=float, default=0.5)
    p.add_argument("--noise-floor", type=float, default=0.0)
    p.add_argument("--hpbw", type=float, default=18.0)
    p.add_argument("--sidelobe-floor-db", type=float, default=-15.0)
    p.add_argument("--seed", type=int, default=0)
    return p


def _cmd_simulate(args) -> int:
    scene = load_scene(args.scene)
    if args.trajectory == "oval":
        poses = generate_trajectory("oval")
    else:
        poses = generate_trajectory(args.trajectory, n_steps=args.n_steps, step=args.step)
    t_s = args.t_s if args.t_s is not None else 2.0 * args.range_bin / 299_792_458.0
    cfg = SimConfig(
        n_angles=args.n_angles,
        n_bins=args.n_bins,
        t_min=args.t_min,
        t_s=t_s,
        azimuth_step_deg=args.azimuth_step,
        noise_floor=args.noise_floor,
        seed=args.seed,
    )
    pattern = AntennaPattern(hpbw_deg=args.hpbw, sidelobe_floor_db=args.sidelobe_floor_db)
    os.makedirs(args.out, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    gt_rows = []
    for k, pose in enumerate(poses):
        matrix, gt_ranges = synthesize_scan(scene, pose, pattern, cfg, rng=rng)
        rio.write_matrix(os.path.join(args.out, f"scan_{k:04d}.adm"), matrix)
        fields = [str(k), repr(pose.x), repr(pose.y), repr(pose.theta)]
        fields += ["" if not math.isfinite(r) else repr(float(r)) for r in gt_ranges]
        gt_rows.append(",".join(fields))
    header = "k,x,y,theta," + ",".join(
        f"r_{i}" for i in range(cfg.n_angles)
    )
    with open(os.path.join(args.out, "ground_truth.csv"), "w") as fh:
        fh.write(header + "\n")
        fh.write("\n".join(gt_rows) + "\n")
    print(f"wrote {len(poses)} scans to {args.out}")
    return 0


def _add_ingest(sub):
    p = sub.add_parser("ingest", help="convert CFR recordings to matrix files")
    p.add_argument("--cfr-dir", required=True,
                   help="directory of CSV files: angle_deg,re0,im0,re1,im1,...")
    p.add_argument("--start-hz", type=float, required=True)
    p.add_argument("--step-hz", type=float, required=True)
    p.add_argument("--window", default="hann", choices=["hann", "none"])
    p.add_argument("--method", default="real", choices=["real", "baseband"])
    p.add_argument("--n-bins", type=int, default=0,
                   help="keep this many delay bins (0 = all)")
    p.add_argument("--target-angle-step", type=float, default=0.0,
                   help="interpolate rows onto this angle step (0 = keep measured)")
    p.add_argument("--out", required=True)
    return p


def _read_cfr_csv(path):
    angles = []
    rows = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            angles.append(float(parts[0]))
            pairs = np.array([float(v) for v in parts[1:]])
            if pairs.size % 2 != 0:
                raise ValueError(f"{path}: expected re,im pairs after the angle")
            rows.append(pairs[0::2] + 1j * pairs[1::2])
    if not rows:
        raise ValueError(f"{path}: no CFR rows")
    order = np.argsort(angles)
    return np.array(angles)[order], np.array(rows)[order]


def _cmd_ingest(args) -> int:
    names = sorted(n for n in os.listdir(args.cfr_dir) if n.endswith(".csv"))
    if not names:
        print(f"no CFR csv files in {args.cfr_dir}", file=sys.stderr)
        return 1
    os.makedirs(args.out, exist_ok=True)
    for k, name in enumerate(names):
        angles, cfr_rows = _read_cfr_csv(os.path.join(args.cfr_dir, name))
        cirs = []
        t_s = None
        for row in cfr_rows:
            cir, t_s = rio.cfr_to_cir(
                row, args.start_hz, args.step_hz, window=args.window, method=args.method
            )
            cirs.append(cir)
        cirs = np.array(cirs)
        if args.target_angle_step > 0:
            target = np.arange(angles[0], angles[-1] + 1e-9, args.target_angle_step)
            cirs = rio.interpolate_angles(cirs, angles, target)
            angles = target
        if args.n_bins > 0:
            cirs = cirs[:, : args.n_bins]
        matrix = build_angle_delay_matrix(np.abs(cirs), angles, t_min=0.0, t_s=t_s)
        rio.write_matrix(os.path.join(args.out, f"scan_{k:04d}.adm"), matrix)
    print(f"ingested {len(names)} recordings to {args.out}")
    return 0


def _add_run(sub):
    p = sub.add_parser("run", help="run the full pipeline")
    p.add_argument("--config", default="", help="key=value config file")
    p.add_argument("--input", default=None, help="override input_dir")
    p.add_argument("--output", default=None, help="override output_dir")
    p.add_argument("--ground-truth", default=None)
    p.add_argument("--pose", default=None, choices=["fm", "sfm", "lsm"])
    p.add_argument("--cell-size", type=float, default=None)
    p.add_argument("--image-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    return p


def _cmd_run(args) -> int:
    cfg = rio.load_config(args.config) if args.config else rio.PipelineConfig()
    if args.input is not None:
        cfg.input_dir = args.input
    if args.output is not None:
        cfg.output_dir = args.output
    if args.ground_truth is not None:
        cfg.ground_truth = args.ground_truth
    if args.pose is not None:
        cfg.pose_estimator = args.pose
    if args.cell_size is not None:
        cfg.cell_size = args.cell_size
    if args.image_size is not None:
        cfg.image_size = args.image_size
    if args.seed is not None:
        cfg.seed = args.seed
    result = run_pipeline(cfg)
    for key in sorted(result.metrics):
        print(f"{key}={result.metrics[key]}")
    print(f"outputs in {cfg.output_dir}")
    return 0


def _add_metrics(sub):
    p = sub.add_parser("metrics", help="channel spread report for matrix files")
    p.add_argument("--input", required=True)
    p.add_argument("--eta-cl", type=float, default=0.4)
    p.add_argument("--eta-cf", type=float, default=1e-2)
    p.add_argument("--out", default="", help="optional CSV of per-position spreads")
    return p


def _cmd_metrics(args) -> int:
    report = spread_report_for_dir(args.input, args.eta_cl, args.eta_cf)
    for key, value in sorted(report["aggregates"].items()):
        print(f"{key}={value}")
    tau_values = [s.tau_rms for s in report["per_position"] if s is not None]
    if len(tau_values) >= 2 and all(v > 0 for v in tau_values):
        mu, sigma = lognormal_fit(tau_values)
        print(f"tau_rms_lognormal_mu={mu}")
        print(f"tau_rms_lognormal_sigma={sigma}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("k,tau_mean,tau_rms,phi_spread,phi_spread_deg\n")
            for k, stats in enumerate(report["per_position"]):
                if stats is None:
                    fh.write(f"{k},,,,\n")
                else:
                    fh.write(
                        f"{k},{stats.tau_mean!r},{stats.tau_rms!r},"
                        f"{stats.phi_spread!r},{stats.phi_spread_deg!r}\n"
                    )
    return 0


def _add_map_export(sub):
    p = sub.add_parser("map-export", help="threshold a log-odds map to a graymap")
    p.add_argument("--log-odds", required=True, help="CSV written by a pipeline run")
    p.add_argument("--out", required=True, help="output PGM path")
    p.add_argument("--tau-occupied", type=float, default=2.0)
    p.add_argument("--tau-free", type=float, default=-2.0)
    return p


def _cmd_map_export(args) -> int:
    grid = read_log_odds(args.log_odds)
    write_pgm(args.out, export_map(grid, args.tau_occupied, args.tau_free))
    print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="rslam", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_simulate(sub)
    _add_ingest(sub)
    _add_run(sub)
    _add_metrics(sub)
    _add_map_export(sub)
    args = parser.parse_args(argv)
    commands = {
        "simulate": _cmd_simulate,
        "ingest": _cmd_ingest,
        "run": _cmd_run,
        "metrics": _cmd_metrics,
        "map-export": _cmd_map_export,
    }
    try:
        return commands[args.command](args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
