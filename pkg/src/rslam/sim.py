"""2D scene simulator producing angle-delay matrices with ground truth.

Scenes are collections of reflective line segments. For each steering angle
the synthesized response integrates specular first-bounce returns over a
dense fan of azimuth rays, weighted by the two-way antenna pattern, so that
sidelobes reproduce the ghost ridges the preprocessing stage is designed to
remove. The exact boresight first-hit range per steering angle is recorded
alongside as ground truth.

Geometry note: ray directions come from track.beam_direction, the same
function the mapping stage uses, so simulated scans, composed trajectories
and maps all live in one consistent world frame.
"""

import math
from dataclasses import dataclass

import numpy as np

from .preprocess import C0, AngleDelayMatrix
from .track import Pose, beam_direction, wrap_angle

D_REF = 1.0  # reference distance for the 1/d^2 spreading law [m]


@dataclass(frozen=True)
class SceneMap:
    """Reflective segments as an (K, 5) array: x1 y1 x2 y2 reflectivity."""

    segments: np.ndarray

    def __post_init__(self):
        segments = np.asarray(self.segments, dtype=float)
        if segments.ndim != 2 or segments.shape[1] != 5:
            raise ValueError("segments must be (K, 5): x1 y1 x2 y2 reflectivity")
        if segments.shape[0] == 0:
            raise ValueError("scene needs at least one segment")
        lengths = np.hypot(
            segments[:, 2] - segments[:, 0], segments[:, 3] - segments[:, 1]
        )
        if np.any(lengths <= 0):
            raise ValueError("zero-length segment")
        if np.any((segments[:, 4] <= 0) | (segments[:, 4] > 1)):
            raise ValueError("reflectivity must be in (0, 1]")
        object.__setattr__(self, "segments", segments)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """Bounding box (xmin, ymin, xmax, ymax) of all segments."""
        xs = np.concatenate([self.segments[:, 0], self.segments[:, 2]])
        ys = np.concatenate([self.segments[:, 1], self.segments[:, 3]])
        return float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max())

    def to_text(self) -> str:
        lines = ["# x1 y1 x2 y2 reflectivity"]
        for seg in self.segments:
            lines.append(" ".join(repr(float(v)) for v in seg))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SceneMap":
        rows = []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 5:
                raise ValueError(f"scene line needs 5 fields: {raw!r}")
            rows.append([float(p) for p in parts])
        return cls(segments=np.array(rows))


def load_scene(path) -> SceneMap:
    with open(path) as fh:
        return SceneMap.from_text(fh.read())


def save_scene(path, scene: SceneMap) -> None:
    with open(path, "w") as fh:
        fh.write(scene.to_text())


def rectangle_scene(
    xmin: float, ymin: float, xmax: float, ymax: float, reflectivity: float = 0.9
) -> SceneMap:
    """Four walls of an axis-aligned room."""
    if xmax <= xmin or ymax <= ymin:
        raise ValueError("degenerate rectangle")
    segs = [
        [xmin, ymin, xmax, ymin, reflectivity],
        [xmax, ymin, xmax, ymax, reflectivity],
        [xmax, ymax, xmin, ymax, reflectivity],
        [xmin, ymax, xmin, ymin, reflectivity],
    ]
    return SceneMap(segments=np.array(segs))


def _point_segment_distance(points: np.ndarray, seg) -> np.ndarray:
    a = np.asarray(seg[:2], dtype=float)
    b = np.asarray(seg[2:4], dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0:
        return np.hypot(*(points - a).T)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    closest = a + t[:, None] * ab
    return np.hypot(*(points - closest).T)


def add_scatterers(
    scene: SceneMap,
    count: int,
    size: float = 0.15,
    reflectivity: float = 1.0,
    margin: float = 0.5,
    seed: int = 0,
    clear_segments=None,
    clearance: float = 0.0,
) -> SceneMap:
    """Scene plus `count` small randomly oriented segments inside the extent.

    Bare walls are a degenerate environment for scan registration (a flat
    wall looks the same from anywhere along it), so cluttered test scenes
    get fixed point-like scatterers, the way furniture anchors a real room.
    clear_segments is an optional list of (x1, y1, x2, y2) path pieces that
    scatterer centers must keep `clearance` meters away from, so a planned
    trajectory does not run straight through the clutter.
    """
    if count < 0 or size <= 0:
        raise ValueError("count must be >= 0 and size > 0")
    xmin, ymin, xmax, ymax = scene.extent
    if xmax - xmin <= 2 * margin or ymax - ymin <= 2 * margin:
        raise ValueError("margin leaves no room for scatterers")
    rng = np.random.default_rng(seed)
    centers = np.empty((0, 2))
    for _ in range(200):
        if centers.shape[0] >= count:
            break
        draw = rng.uniform(
            [xmin + margin, ymin + margin],
            [xmax - margin, ymax - margin],
            size=(count, 2),
        )
        if clear_segments is not None and clearance > 0:
            ok = np.ones(count, dtype=bool)
            for seg in clear_segments:
                ok &= _point_segment_distance(draw, seg) >= clearance
            draw = draw[ok]
        centers = np.concatenate([centers, draw], axis=0)
    else:
        raise ValueError("could not place scatterers outside the cleared path")
    centers = centers[:count]
    phis = rng.uniform(0.0, math.pi, size=count)
    half = 0.5 * size * np.stack([np.cos(phis), np.sin(phis)], axis=1)
    segs = np.concatenate(
        [centers - half, centers + half, np.full((count, 1), reflectivity)], axis=1
    )
    return SceneMap(segments=np.concatenate([scene.segments, segs], axis=0))


@dataclass(frozen=True)
class AntennaPattern:
    """Gaussian main lobe with a flat sidelobe floor.

    hpbw_deg is the half-power beamwidth; sidelobe_floor_db the floor level
    relative to the peak (a placeholder for a measured pattern; use -inf
    for an ideal pencil beam). gain_dbi is carried for reporting only, the
    synthesized matrices are normalized to the pattern peak.
    """

    hpbw_deg: float = 18.0
    sidelobe_floor_db: float = -15.0
    gain_dbi: float = 20.0

    def __post_init__(self):
        if self.hpbw_deg <= 0:
            raise ValueError("hpbw_deg must be positive")
        if self.sidelobe_floor_db > 0:
            raise ValueError("sidelobe floor is relative to the peak, must be <= 0")


def pattern_gain(pattern: AntennaPattern, offset_deg) -> np.ndarray:
    """Normalized power gain at an angular offset from boresight.

    Gaussian main lobe exp(-4 ln2 (offset/hpbw)^2) floored at the sidelobe
    level; offsets wrap to [-180, 180].
    """
    offset = np.asarray(offset_deg, dtype=float)
    offset = (offset + 180.0) % 360.0 - 180.0
    lobe = np.exp(-4.0 * math.log(2.0) * (offset / pattern.hpbw_deg) ** 2)
    floor = 10.0 ** (pattern.sidelobe_floor_db / 10.0)
    return np.maximum(lobe, floor)


@dataclass(frozen=True)
class SimConfig:
    """Sampling grid and integration settings for scan synthesis.

    Defaults mirror the reference system: 181 steering angles over +-90
    degrees and a 1.56 ps delay grid.
    """

    n_angles: int = 181
    angle_start_deg: float = -90.0
    angle_stop_deg: float = 90.0
    n_bins: int = 8501
    t_min: float = 0.0
    t_s: float = 1.5625e-12
    azimuth_step_deg: float = 0.5
    noise_floor: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_angles < 2 or self.n_bins < 1:
            raise ValueError("need at least 2 angles and 1 delay bin")
        if self.angle_stop_deg <= self.angle_start_deg:
            raise ValueError("angle range must be ascending")
        if self.t_min < 0 or self.t_s <= 0:
            raise ValueError("t_min must be >= 0 and t_s > 0")
        if self.azimuth_step_deg <= 0:
            raise ValueError("azimuth_step_deg must be positive")
        if self.noise_floor < 0:
            raise ValueError("noise_floor must be nonnegative")

    @property
    def angles_deg(self) -> np.ndarray:
        return np.linspace(self.angle_start_deg, self.angle_stop_deg, self.n_angles)


def raycast(scene: SceneMap, origin, direction):
    """Nearest segment hit along a ray, or None.

    Returns (distance, reflectivity) of the first intersection with positive
    ray parameter; rays starting on a segment do not hit it again.
    """
    d = np.asarray(direction, dtype=float)
    norm = np.hypot(d[0], d[1])
    if norm == 0:
        raise ValueError("direction must be nonzero")
    dists, refls, _ = _raycast_directions(
        scene, np.asarray(origin, dtype=float), (d / norm)[None, :]
    )
    if not np.isfinite(dists[0]):
        return None
    return float(dists[0]), float(refls[0])


def _raycast_directions(scene: SceneMap, origin: np.ndarray, directions: np.ndarray):
    """Vectorized first-hit raycast for many unit directions at once.

    Returns (distances, reflectivities, incidence cosines); the cosine is
    measured against the hit segment's normal, so 1 means head-on and 0
    means grazing.
    """
    segs = scene.segments
    a = segs[:, 0:2]
    e = segs[:, 2:4] - a  # segment direction
    refl = segs[:, 4]
    d = directions  # (R, 2)
    # solve origin + t*d = a + u*e for each (ray, segment) pair
    denom = d[:, None, 0] * (-e[None, :, 1]) - d[:, None, 1] * (-e[None, :, 0])
    rel = a[None, :, :] - origin[None, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (rel[:, :, 0] * (-e[None, :, 1]) - rel[:, :, 1] * (-e[None, :, 0])) / denom
        u = (d[:, None, 0] * rel[:, :, 1] - d[:, None, 1] * rel[:, :, 0]) / denom
    valid = (np.abs(denom) > 1e-12) & (t > 1e-9) & (u >= 0.0) & (u <= 1.0)
    t = np.where(valid, t, np.inf)
    hit = np.argmin(t, axis=1)
    rays = np.arange(d.shape[0])
    dists = t[rays, hit]
    refls = np.where(np.isfinite(dists), refl[hit], 0.0)
    e_hit = e[hit]
    e_norm = np.hypot(e_hit[:, 0], e_hit[:, 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = (d[:, 0] * e_hit[:, 1] - d[:, 1] * e_hit[:, 0]) / e_norm
    cosines = np.where(np.isfinite(dists) & (e_norm > 0), np.abs(cross), 0.0)
    return dists, refls, cosines


def _pose_inside(scene: SceneMap, pose: Pose) -> bool:
    xmin, ymin, xmax, ymax = scene.extent
    return xmin < pose.x < xmax and ymin < pose.y < ymax


def synthesize_scan(
    scene: SceneMap,
    pose: Pose,
    pattern: AntennaPattern,
    cfg: SimConfig,
    rng: np.random.Generator | None = None,
):
    """Simulate one scan from a pose.

    Returns (matrix, gt_ranges). A dense fan of azimuth rays (full circle,
    step cfg.azimuth_step_deg, fixed grid in the sensor frame) is cast once;
    each hit contributes pattern_gain(offset)^2 * reflectivity * |cos i| *
    (d_ref/d)^2 into the delay bin nearest 2d/c of every steering row, where
    i is the incidence angle at the hit facet (grazing returns vanish). The
    absolute scale is arbitrary since all downstream thresholds are relative.
    gt_ranges holds the exact boresight first-hit range per steering angle,
    NaN for misses. With noise_floor > 0 complex white noise with standard
    deviation noise_floor * max is added before taking magnitudes; the rng
    (or a default seeded from cfg.seed) makes that reproducible.
    """
    if not _pose_inside(scene, pose):
        raise ValueError("pose lies outside the scene extent")
    angles = cfg.angles_deg
    azimuths = np.arange(-180.0, 180.0, cfg.azimuth_step_deg)
    directions = np.stack(
        [beam_direction(pose.theta, psi) for psi in azimuths], axis=0
    )
    dists, refls, cosines = _raycast_directions(scene, pose.xy, directions)

    hit = np.isfinite(dists)
    dists_h = dists[hit]
    refls_h = refls[hit]
    cosines_h = cosines[hit]
    azimuths_h = azimuths[hit]
    delays = 2.0 * dists_h / C0
    bins = np.rint((delays - cfg.t_min) / cfg.t_s).astype(int)
    in_range = (bins >= 0) & (bins < cfg.n_bins)
    dists_h = dists_h[in_range]
    refls_h = refls_h[in_range]
    cosines_h = cosines_h[in_range]
    azimuths_h = azimuths_h[in_range]
    bins = bins[in_range]

    amplitudes = refls_h * cosines_h * (D_REF / dists_h) ** 2
    values = np.zeros((cfg.n_angles, cfg.n_bins))
    for n, steer in enumerate(angles):
        weights = pattern_gain(pattern, azimuths_h - steer) ** 2
        np.add.at(values[n], bins, weights * amplitudes)

    if cfg.noise_floor > 0:
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        sigma = cfg.noise_floor * values.max()
        noise = sigma * (
            rng.standard_normal(values.shape) + 1j * rng.standard_normal(values.shape)
        ) / math.sqrt(2.0)
        values = np.abs(values + noise)

    gt_directions = np.stack([beam_direction(pose.theta, a) for a in angles], axis=0)
    gt_dists, _, _ = _raycast_directions(scene, pose.xy, gt_directions)
    gt_ranges = np.where(np.isfinite(gt_dists), gt_dists, np.nan)

    matrix = AngleDelayMatrix(
        values=values, angles_deg=angles, t_min=cfg.t_min, t_s=cfg.t_s
    )
    return matrix, gt_ranges


def _oval_path(width: float = 5.0, height: float = 3.0,
               straight_steps: int = 5, arc_steps: int = 18):
    """Pose samples around a stadium-shaped loop, heading along the tangent.

    The default geometry walks 46 poses: two straights of 5 x 0.40 m steps
    and two semicircular arcs of 18 x 10 degree steps.
    """
    radius = height / 2.0
    straight = width - height
    if straight <= 0:
        raise ValueError("oval width must exceed its height")
    step = straight / straight_steps
    arc_step = math.pi / arc_steps

    points = []
    headings = []  # physical direction of motion, counter-clockwise loop

    for i in range(straight_steps):
        points.append((i * step, 0.0))
        headings.append(0.0)
    for i in range(arc_steps):
        a = i * arc_step
        points.append((straight + radius * math.sin(a), radius * (1.0 - math.cos(a))))
        headings.append(a)
    for i in range(straight_steps):
        points.append((straight - i * step, height))
        headings.append(math.pi)
    for i in range(arc_steps):
        a = i * arc_step
        points.append((-radius * math.sin(a), radius * (1.0 + math.cos(a))))
        headings.append(math.pi + a)
    return points, headings


def generate_trajectory(kind: str, **params) -> list[Pose]:
    """Built-in trajectories.

    - "line-boresight": n_steps poses stepping along +x, heading 0
    - "line-broadside": same positions, heading fixed at 90 degrees
    - "oval": a 46-pose loop around a 5 m x 3 m stadium, heading along
      the direction of motion (0.40 m straight steps, 10 degree arc steps)

    Headings are stored so that composing estimated increments through the
    U(theta) block reproduces these poses; the boresight of a stored
    heading theta points along (cos theta, -sin theta).
    """
    if kind == "line-boresight":
        n_steps = int(params.pop("n_steps", 9))
        step = float(params.pop("step", 0.25))
        _reject_extra(params)
        _check_line(n_steps, step)
        return [Pose(x=i * step, y=0.0, theta=0.0) for i in range(n_steps)]
    if kind == "line-broadside":
        n_steps = int(params.pop("n_steps", 9))
        step = float(params.pop("step", 0.25))
        _reject_extra(params)
        _check_line(n_steps, step)
        return [Pose(x=i * step, y=0.0, theta=math.pi / 2.0) for i in range(n_steps)]
    if kind == "oval":
        width = float(params.pop("width", 5.0))
        height = float(params.pop("height", 3.0))
        straight_steps = int(params.pop("straight_steps", 5))
        arc_steps = int(params.pop("arc_steps", 18))
        _reject_extra(params)
        if min(straight_steps, arc_steps) < 1:
            raise ValueError("step counts must be positive")
        points, headings = _oval_path(width, height, straight_steps, arc_steps)
        # stored heading = -physical motion direction, see module docstring
        return [
            Pose(x=p[0], y=p[1], theta=wrap_angle(-h))
            for p, h in zip(points, headings)
        ]
    raise ValueError(f"unknown trajectory kind: {kind!r}")


def _check_line(n_steps: int, step: float) -> None:
    if n_steps < 1 or step <= 0:
        raise ValueError("n_steps and step must be positive")


def _reject_extra(params: dict) -> None:
    if params:
        raise ValueError(f"unknown trajectory parameters: {sorted(params)}")
