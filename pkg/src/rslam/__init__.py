"""Radar SLAM toolkit.

Turns sequences of angle-delay backscatter measurements into a trajectory
estimate and a 2D occupancy map. Submodules:

- preprocess: angle-delay matrix type, ghost/noise cleanup, scan vectors, paths
- pose: FFT-based relative pose estimators (spectra, polar, scan matching)
- track: pose composition and the constant-velocity Kalman filter
- mapping: log-odds occupancy grid and map export
- channel: delay/angular spread statistics and ECDF fitting
- sim: 2D segment-scene simulator with ground truth
- io: matrix file formats, CFR to CIR conversion, config parsing
- pipeline: end-to-end run orchestration
- cli: command line entry points
"""

from .preprocess import (
    C0,
    AngleDelayMatrix,
    Frame,
    PathSet,
    ScanVector,
    build_angle_delay_matrix,
    extract_paths,
    extract_scan_vector,
    gem,
    nm,
)
from .pose import (
    CartesianImage,
    LsmSearchWindow,
    RelativePose,
    cross_power_spectrum,
    estimate_relative_pose_fm,
    estimate_relative_pose_lsm,
    estimate_relative_pose_sfm,
    estimate_rotation_fm,
    phase_correlation,
    polar_to_cartesian,
    rotate_frame,
)
from .track import (
    KinematicState,
    MotionModel,
    ObservationModel,
    Pose,
    beam_direction,
    build_motion_model,
    build_observation_model,
    build_r,
    compose_pose,
    initial_state,
    kf_step,
    wrap_angle,
)
from .mapping import (
    GridGeometry,
    OccupancyGrid,
    belief,
    export_map,
    init_grid,
    traverse_cells,
    update_grid,
)
from .channel import (
    EcdfFit,
    SpreadStats,
    angular_spread,
    delay_spread,
    ecdf,
    lognormal_fit,
    scenario_spread_report,
    spread_stats,
)
from .sim import (
    AntennaPattern,
    SceneMap,
    SimConfig,
    generate_trajectory,
    pattern_gain,
    raycast,
    rectangle_scene,
    synthesize_scan,
)

__all__ = [name for name in dir() if not name.startswith("_")]
