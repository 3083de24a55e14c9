"""End-to-end run: matrices in, trajectory and map out.

Stages run in a fixed order per scan: preprocess (ghost/noise cleanup),
pose (relative registration against the previous frame), track (compose and
filter), map (fold the scan into the occupancy grid). Failures surface as
PipelineError tagged with the stage name and scan index. Runs are
deterministic: the same config and inputs produce byte-identical outputs.
"""

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import io as rio
from .channel import scenario_spread_report
from .mapping import (
    GridGeometry,
    export_map,
    init_grid,
    update_grid,
    write_log_odds,
    write_pgm,
)
from .pose import (
    LsmSearchWindow,
    RelativePose,
    estimate_relative_pose_fm,
    estimate_relative_pose_lsm,
    estimate_relative_pose_sfm,
)
from .preprocess import extract_scan_vector, gem, nm
from .track import (
    Pose,
    build_motion_model,
    build_observation_model,
    compose_pose,
    initial_state,
    kf_step,
    wrap_angle,
)

TRAJECTORY_HEADER = "k,x,y,theta,q,cov_xx,cov_yy,cov_tt"


class PipelineError(Exception):
    """A stage failed; carries the stage name and the scan index."""

    def __init__(self, stage: str, scan_index: int, message: str):
        super().__init__(f"{stage}[scan {scan_index}]: {message}")
        self.stage = stage
        self.scan_index = scan_index


@dataclass
class PipelineResult:
    trajectory: list = field(default_factory=list)  # (k, x, y, theta, q, cxx, cyy, ctt)
    pose_log: list = field(default_factory=list)  # (k, dx, dy, dtheta_deg, q)
    grid: object = None
    metrics: dict = field(default_factory=dict)
    output_files: list = field(default_factory=list)


def _stage(stage: str, scan_index: int, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(stage, scan_index, str(exc)) from exc


def list_matrix_files(input_dir: str) -> list[str]:
    names = sorted(
        name for name in os.listdir(input_dir) if name.endswith((".adm", ".adm.csv"))
    )
    return [os.path.join(input_dir, name) for name in names]


def read_ground_truth(path: str) -> list[Pose]:
    poses = []
    with open(path) as fh:
        header = fh.readline()
        if not header.lower().startswith("k,"):
            raise ValueError("ground truth CSV must start with a k,x,y,theta header")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            poses.append(Pose(x=float(parts[1]), y=float(parts[2]), theta=float(parts[3])))
    return poses


def position_rmse(estimated: list[Pose], truth: list[Pose]) -> float:
    """Root-mean-square Euclidean position error over paired poses."""
    if len(estimated) != len(truth):
        raise ValueError("trajectory lengths differ")
    errs = [
        (a.x - b.x) ** 2 + (a.y - b.y) ** 2 for a, b in zip(estimated, truth)
    ]
    return math.sqrt(sum(errs) / len(errs))


def orientation_rmse_deg(estimated: list[Pose], truth: list[Pose]) -> float:
    if len(estimated) != len(truth):
        raise ValueError("trajectory lengths differ")
    errs = [wrap_angle(a.theta - b.theta) ** 2 for a, b in zip(estimated, truth)]
    return math.degrees(math.sqrt(sum(errs) / len(errs)))


def _estimator(cfg: rio.PipelineConfig):
    if cfg.pose_estimator == "fm":
        def run(frame, prev_frame, scan, prev_scan):
            return estimate_relative_pose_fm(
                frame, prev_frame, cfg.cell_size, cfg.image_size,
                window=cfg.window, subpixel=cfg.subpixel,
            )
    elif cfg.pose_estimator == "sfm":
        def run(frame, prev_frame, scan, prev_scan):
            return estimate_relative_pose_sfm(
                frame, prev_frame, cfg.cell_size, cfg.image_size,
                window=cfg.window, subpixel=cfg.subpixel,
            )
    elif cfg.pose_estimator == "lsm":
        search = LsmSearchWindow(
            x_cells=cfg.search_x_cells,
            y_cells=cfg.search_y_cells,
            theta_bins=cfg.search_theta_bins,
            cell_size=cfg.search_cell_size,
            theta_step_deg=cfg.search_theta_step_deg,
            smooth_cells=cfg.search_smooth_cells,
        )

        def run(frame, prev_frame, scan, prev_scan):
            return estimate_relative_pose_lsm(scan, prev_scan, search)
    else:
        raise ValueError(f"unknown pose estimator {cfg.pose_estimator!r}")
    return run


def run_pipeline(cfg: rio.PipelineConfig, write_outputs: bool = True) -> PipelineResult:
    result = PipelineResult()

    if not cfg.input_dir or not os.path.isdir(cfg.input_dir):
        raise PipelineError("load", -1, f"input_dir not found: {cfg.input_dir!r}")
    files = list_matrix_files(cfg.input_dir)
    if not files:
        raise PipelineError("load", -1, f"no matrix files in {cfg.input_dir!r}")

    estimator = _stage("pose", -1, _estimator, cfg)
    model = build_motion_model(cfg.t_f, cfg.w0, cfg.w_theta)
    obs = build_observation_model(cfg.sigma_x, cfg.sigma_y, cfg.sigma_theta)
    geometry = GridGeometry(
        origin_x=cfg.map_origin_x,
        origin_y=cfg.map_origin_y,
        width=cfg.map_width,
        height=cfg.map_height,
        cell_size=cfg.map_cell_size,
    )
    grid = init_grid(geometry)
    state = initial_state()

    def record(k: int, q: float):
        result.trajectory.append(
            (
                k,
                float(state.mean[0]),
                float(state.mean[1]),
                float(state.mean[4]),
                q,
                float(state.cov[0, 0]),
                float(state.cov[1, 1]),
                float(state.cov[4, 4]),
            )
        )

    prev_frame = None
    prev_scan = None
    for k, path in enumerate(files):
        reader = rio.read_matrix_csv if path.endswith(".csv") else rio.read_matrix
        matrix = _stage("load", k, reader, path)
        frame = _stage("preprocess", k, lambda: nm(gem(matrix, cfg.eta_cl), cfg.eta_cf, k))
        scan = _stage("preprocess", k, extract_scan_vector, frame, cfg.eta_sv)

        if k == 0:
            record(0, 1.0)
        else:
            rel: RelativePose = _stage(
                "pose", k, estimator, frame, prev_frame, scan, prev_scan
            )
            result.pose_log.append((k, rel.dx, rel.dy, rel.dtheta_deg, rel.q))
            measurement = _stage("track", k, compose_pose, state.pose, rel)
            state = _stage(
                "track", k, kf_step, state, measurement, model, obs, rel.q, cfg.q_min
            )
            record(k, rel.q)

        _stage(
            "map", k, update_grid, grid, scan, state.pose,
            cfg.p_hit, cfg.free_space,
        )
        prev_frame = frame
        prev_scan = scan

    result.grid = grid
    result.metrics["scans"] = len(files)
    result.metrics["estimator"] = cfg.pose_estimator
    if cfg.ground_truth:
        truth = _stage("metrics", -1, read_ground_truth, cfg.ground_truth)
        estimated = [Pose(x=row[1], y=row[2], theta=row[3]) for row in result.trajectory]
        if len(truth) != len(estimated):
            raise PipelineError(
                "metrics", -1,
                f"ground truth has {len(truth)} poses, trajectory {len(estimated)}",
            )
        result.metrics["rmse_position"] = position_rmse(estimated, truth)
        result.metrics["rmse_orientation_deg"] = orientation_rmse_deg(estimated, truth)
        result.metrics["final_position_error"] = math.hypot(
            estimated[-1].x - truth[-1].x, estimated[-1].y - truth[-1].y
        )

    if write_outputs:
        _write_outputs(cfg, result)
    return result


def _format_float(value: float) -> str:
    return repr(float(value))


def write_trajectory_csv(path, rows) -> None:
    with open(path, "w") as fh:
        fh.write(TRAJECTORY_HEADER + "\n")
        for row in rows:
            k, *floats = row
            fh.write(",".join([str(k)] + [_format_float(v) for v in floats]) + "\n")


def read_trajectory_csv(path) -> list[Pose]:
    poses = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != TRAJECTORY_HEADER:
            raise ValueError(f"unexpected trajectory header: {header!r}")
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) < 4:
                continue
            poses.append(Pose(x=float(parts[1]), y=float(parts[2]), theta=float(parts[3])))
    return poses


def _write_outputs(cfg: rio.PipelineConfig, result: PipelineResult) -> None:
    os.makedirs(cfg.output_dir, exist_ok=True)

    trajectory_path = os.path.join(cfg.output_dir, "trajectory.csv")
    write_trajectory_csv(trajectory_path, result.trajectory)
    result.output_files.append(trajectory_path)

    pose_log_path = os.path.join(cfg.output_dir, "pose_log.csv")
    with open(pose_log_path, "w") as fh:
        fh.write("k,dx,dy,dtheta_deg,q\n")
        for k, dx, dy, dtheta, q in result.pose_log:
            fh.write(
                ",".join([str(k)] + [_format_float(v) for v in (dx, dy, dtheta, q)]) + "\n"
            )
    result.output_files.append(pose_log_path)

    pgm_path = os.path.join(cfg.output_dir, "map.pgm")
    write_pgm(pgm_path, export_map(result.grid))
    result.output_files.append(pgm_path)

    log_odds_path = os.path.join(cfg.output_dir, "map_log_odds.csv")
    write_log_odds(log_odds_path, result.grid)
    result.output_files.append(log_odds_path)
    result.output_files.append(log_odds_path + ".hdr")

    metrics_path = os.path.join(cfg.output_dir, "metrics.txt")
    with open(metrics_path, "w") as fh:
        for key in sorted(result.metrics):
            value = result.metrics[key]
            if isinstance(value, float):
                value = _format_float(value)
            fh.write(f"{key}={value}\n")
    result.output_files.append(metrics_path)


def spread_report_for_dir(input_dir: str, eta_cl: float, eta_cf: float) -> dict:
    """Channel spread report over every matrix file in a directory."""
    frames = []
    for k, path in enumerate(list_matrix_files(input_dir)):
        reader = rio.read_matrix_csv if path.endswith(".csv") else rio.read_matrix
        matrix = reader(path)
        frames.append(nm(gem(matrix, eta_cl), eta_cf, k))
    return scenario_spread_report(frames)
