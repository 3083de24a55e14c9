"""Pose composition and the constant-velocity Kalman tracker.

Relative pose estimates are rotated into the global frame with the block

    U(theta) = [[ cos t, sin t, 0],
                [-sin t, cos t, 0],
                [     0,     0, 1]]

and accumulated. Under this convention a pose with heading theta has its
boresight along (cos theta, -sin theta) in world axes, and the world
direction of a beam steered to phi is (cos(phi - theta), sin(phi - theta)).
beam_direction below is the single place that mapping and simulation share,
which keeps scans, maps and composed trajectories mutually consistent.

The filter state is [x, y, vx, vy, theta, vtheta] with a white-acceleration
motion model; composed poses enter as position/heading measurements whose
covariance is inflated by the registration quality q.
"""

import math
from dataclasses import dataclass

import numpy as np

Q_MIN = 1e-2  # quality floor used when scaling the measurement covariance


def wrap_angle(theta: float) -> float:
    """Wrap an angle in radians to (-pi, pi]."""
    return float(math.pi - (math.pi - theta) % (2.0 * math.pi))


@dataclass(frozen=True)
class Pose:
    """Global planar pose; theta is wrapped to (-pi, pi] on construction."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise ValueError("pose components must be finite")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


def rotation_block(theta: float) -> np.ndarray:
    """The 3x3 block U(theta) taking local (dx, dy, dtheta) to global."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def compose_pose(prev: Pose, rel) -> Pose:
    """Accumulate a relative pose estimate onto the previous global pose.

    rel carries (dx, dy) in the previous scan's local axes and dtheta in
    degrees; the result's heading is wrapped.
    """
    z = rotation_block(prev.theta) @ np.array(
        [rel.dx, rel.dy, math.radians(rel.dtheta_deg)]
    )
    return Pose(x=prev.x + z[0], y=prev.y + z[1], theta=prev.theta + z[2])


def beam_direction(theta: float, phi_deg: float) -> np.ndarray:
    """World-frame unit vector of a beam steered to phi from heading theta.

    Defined as (cos(phi - theta), sin(phi - theta)); this pairing makes
    trajectories composed through U(theta) land beams on the same world
    cells the simulator ray-cast them from.
    """
    a = math.radians(phi_deg) - theta
    return np.array([math.cos(a), math.sin(a)])


@dataclass(frozen=True)
class MotionModel:
    """Discrete white-acceleration model: transition a and process noise q."""

    t_f: float
    w0: float
    w_theta: float
    a: np.ndarray
    q: np.ndarray


def build_motion_model(t_f: float, w0: float, w_theta: float) -> MotionModel:
    """Closed-form A and Q for the [x, y, vx, vy, theta, vtheta] state."""
    if t_f <= 0:
        raise ValueError("t_f must be positive")
    if w0 < 0 or w_theta < 0:
        raise ValueError("noise intensities must be nonnegative")
    t = t_f
    a = np.eye(6)
    a[0, 2] = t
    a[1, 3] = t
    a[4, 5] = t
    q = np.zeros((6, 6))
    q[0:2, 0:2] = w0 * t**3 / 3.0 * np.eye(2)
    q[0:2, 2:4] = w0 * t**2 / 2.0 * np.eye(2)
    q[2:4, 0:2] = w0 * t**2 / 2.0 * np.eye(2)
    q[2:4, 2:4] = w0 * t * np.eye(2)
    q[4, 4] = w_theta * t**3 / 3.0
    q[4, 5] = w_theta * t**2 / 2.0
    q[5, 4] = w_theta * t**2 / 2.0
    q[5, 5] = w_theta * t
    return MotionModel(t_f=t_f, w0=w0, w_theta=w_theta, a=a, q=q)


@dataclass(frozen=True)
class ObservationModel:
    """Pose measurement model: selector b and per-axis noise scales."""

    sigma_x: float
    sigma_y: float
    sigma_theta: float
    b: np.ndarray


def build_observation_model(
    sigma_x: float, sigma_y: float, sigma_theta: float
) -> ObservationModel:
    if min(sigma_x, sigma_y, sigma_theta) <= 0:
        raise ValueError("measurement sigmas must be positive")
    b = np.zeros((3, 6))
    b[0, 0] = 1.0
    b[1, 1] = 1.0
    b[2, 4] = 1.0
    return ObservationModel(sigma_x=sigma_x, sigma_y=sigma_y, sigma_theta=sigma_theta, b=b)


def build_r(obs: ObservationModel, q: float, q_min: float = Q_MIN) -> np.ndarray:
    """Measurement covariance diag(sigma^2) / max(q, q_min)^2.

    Low-quality registrations inflate the covariance so the filter leans on
    its motion model instead.
    """
    q_eff = max(q, q_min)
    return np.diag(
        [
            (obs.sigma_x / q_eff) ** 2,
            (obs.sigma_y / q_eff) ** 2,
            (obs.sigma_theta / q_eff) ** 2,
        ]
    )


@dataclass(frozen=True)
class KinematicState:
    """Filter mean and covariance; the covariance must stay symmetric PSD."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if mean.shape != (6,) or cov.shape != (6, 6):
            raise ValueError("mean must be (6,) and cov (6, 6)")
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
            raise ValueError("state must be finite")
        if np.abs(cov - cov.T).max() > 1e-9:
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(cov).min() < -1e-9:
            raise ValueError("covariance must be positive semidefinite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def pose(self) -> Pose:
        return Pose(x=self.mean[0], y=self.mean[1], theta=self.mean[4])


def initial_state() -> KinematicState:
    """Start at the origin with zero velocity.

    Pose entries are pinned tightly (the trajectory is defined relative to
    the start). Velocities get a genuinely loose prior so the first few
    measurements set them outright; a tight velocity prior would make the
    filter lag behind a moving platform for many scans.
    """
    cov = np.diag([1e-6, 1e-6, 1.0, 1.0, 1e-6, 1.0])
    return KinematicState(mean=np.zeros(6), cov=cov)


def kf_step(
    state: KinematicState,
    measurement: Pose | None,
    model: MotionModel,
    obs: ObservationModel,
    q: float,
    q_min: float = Q_MIN,
) -> KinematicState:
    """One predict/update cycle.

    A missing or non-finite measurement skips the update and returns the
    prediction. The update uses the Joseph form, which keeps the covariance
    symmetric, and the heading innovation is wrapped so the filter never
    unwinds through an extra turn.
    """
    mean_pred = model.a @ state.mean
    cov_pred = model.a @ state.cov @ model.a.T + model.q
    cov_pred = 0.5 * (cov_pred + cov_pred.T)
    if measurement is None or not all(
        map(math.isfinite, (measurement.x, measurement.y, measurement.theta))
    ):
        return KinematicState(mean=mean_pred, cov=cov_pred)

    z = np.array([measurement.x, measurement.y, measurement.theta])
    innovation = z - obs.b @ mean_pred
    innovation[2] = wrap_angle(innovation[2])
    r = build_r(obs, q, q_min)
    s = obs.b @ cov_pred @ obs.b.T + r
    gain = np.linalg.solve(s.T, (cov_pred @ obs.b.T).T).T
    mean_new = mean_pred + gain @ innovation
    mean_new[4] = wrap_angle(mean_new[4])
    identity_kb = np.eye(6) - gain @ obs.b
    cov_new = identity_kb @ cov_pred @ identity_kb.T + gain @ r @ gain.T
    cov_new = 0.5 * (cov_new + cov_new.T)
    return KinematicState(mean=mean_new, cov=cov_new)
