"""Angle-delay matrix construction and cleanup.

The radar front end delivers, for each steering angle, the sampled magnitude
of a two-way channel impulse response. This module packs those rows into a
single angle-by-delay matrix and then strips it down to usable detections:

- ghost suppression: sidelobes copy a strong echo into every steering row at
  the same delay, so each delay column is thresholded against its own maximum
- noise masking: everything far below the global maximum is background
- scan vector: per angle, the range of the first significant return
- path set: every surviving cell as a (power, delay, azimuth) detection
"""

from dataclasses import dataclass, field

import numpy as np

C0 = 299_792_458.0  # speed of light [m/s]


def _as_float_array(values, name: str) -> np.ndarray:
    out = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} must be finite")
    return out


@dataclass(frozen=True)
class AngleDelayMatrix:
    """Magnitudes of the backscattered response on an angle/delay grid.

    values      (N, M) nonnegative linear magnitudes, one row per steering angle
    angles_deg  (N,) steering angles in degrees, uniformly spaced, ascending
    t_min       two-way delay of the first sample [s]
    t_s         delay sampling step [s]
    """

    values: np.ndarray
    angles_deg: np.ndarray
    t_min: float
    t_s: float

    def __post_init__(self):
        values = _as_float_array(self.values, "values")
        angles = _as_float_array(self.angles_deg, "angles_deg")
        if values.ndim != 2:
            raise ValueError("values must be a 2D array")
        if np.any(values < 0):
            raise ValueError("values must be nonnegative magnitudes")
        if angles.ndim != 1 or angles.shape[0] != values.shape[0]:
            raise ValueError("angles_deg must have one entry per matrix row")
        if angles.shape[0] >= 2:
            steps = np.diff(angles)
            if np.any(steps <= 0) or not np.allclose(steps, steps[0]):
                raise ValueError("angles_deg must be uniform and ascending")
        if self.t_min < 0 or self.t_s <= 0:
            raise ValueError("t_min must be >= 0 and t_s > 0")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "angles_deg", angles)

    @property
    def n_angles(self) -> int:
        return self.values.shape[0]

    @property
    def n_bins(self) -> int:
        return self.values.shape[1]

    @property
    def angle_step_deg(self) -> float:
        if self.n_angles < 2:
            return 0.0
        return float(self.angles_deg[1] - self.angles_deg[0])

    @property
    def d_min(self) -> float:
        """One-way range of the first delay bin [m]."""
        return C0 * self.t_min / 2.0

    @property
    def range_step(self) -> float:
        """One-way range covered by one delay bin [m]."""
        return C0 * self.t_s / 2.0

    @property
    def ranges(self) -> np.ndarray:
        """One-way range of every delay bin [m]."""
        return self.d_min + np.arange(self.n_bins) * self.range_step


@dataclass(frozen=True)
class Frame(AngleDelayMatrix):
    """A cleaned angle-delay matrix tagged with its scan index."""

    scan_index: int = 0

    def __post_init__(self):
        super().__post_init__()
        if self.scan_index < 0:
            raise ValueError("scan_index must be >= 0")


@dataclass(frozen=True)
class ScanVector:
    """Per-angle range of the first significant return.

    Misses (rows with no return) carry NaN; in CSV output they serialize as
    an empty field.
    """

    ranges: np.ndarray
    angles_deg: np.ndarray

    def __post_init__(self):
        ranges = np.asarray(self.ranges, dtype=float)
        angles = _as_float_array(self.angles_deg, "angles_deg")
        if ranges.ndim != 1 or ranges.shape != angles.shape:
            raise ValueError("ranges and angles_deg must be 1D with equal length")
        finite = ranges[np.isfinite(ranges)]
        if np.any(finite < 0):
            raise ValueError("finite ranges must be nonnegative")
        object.__setattr__(self, "ranges", ranges)
        object.__setattr__(self, "angles_deg", angles)

    @property
    def n_angles(self) -> int:
        return self.ranges.shape[0]


@dataclass(frozen=True)
class PathSet:
    """Detected propagation paths: parallel arrays of power, delay, azimuth."""

    powers: np.ndarray
    delays: np.ndarray
    azimuths_deg: np.ndarray

    def __post_init__(self):
        powers = _as_float_array(self.powers, "powers")
        delays = _as_float_array(self.delays, "delays")
        azimuths = _as_float_array(self.azimuths_deg, "azimuths_deg")
        if not (powers.shape == delays.shape == azimuths.shape) or powers.ndim != 1:
            raise ValueError("powers, delays and azimuths_deg must be 1D, equal length")
        if np.any(powers <= 0):
            raise ValueError("powers must be positive")
        if np.any(delays < 0):
            raise ValueError("delays must be nonnegative")
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "azimuths_deg", azimuths)

    def __len__(self) -> int:
        return self.powers.shape[0]


def build_angle_delay_matrix(rows, angles_deg, t_min: float, t_s: float) -> AngleDelayMatrix:
    """Stack per-angle magnitude rows into an AngleDelayMatrix.

    rows may be any (N, M) array-like of CIR magnitudes; complex input is
    rejected so that callers take the magnitude explicitly.
    """
    arr = np.asarray(rows)
    if np.iscomplexobj(arr):
        raise ValueError("rows must be magnitudes; take abs() of complex CIRs first")
    return AngleDelayMatrix(values=arr, angles_deg=angles_deg, t_min=t_min, t_s=t_s)


def gem(h: AngleDelayMatrix, eta_cl: float) -> AngleDelayMatrix:
    """Ghost-effect mitigation: threshold each delay column by its own peak.

    Within column m, entries below eta_cl times the column maximum are zeroed;
    entries at or above it survive, so each column maximum always survives.
    Sidelobe ghosts sit at the same delay as the true echo but are weaker by
    the two-way sidelobe attenuation, which is what this removes.
    """
    if not 0.0 <= eta_cl <= 1.0:
        raise ValueError("eta_cl must be in [0, 1]")
    col_max = h.values.max(axis=0, keepdims=True)
    keep = h.values >= eta_cl * col_max
    return AngleDelayMatrix(
        values=np.where(keep, h.values, 0.0),
        angles_deg=h.angles_deg,
        t_min=h.t_min,
        t_s=h.t_s,
    )


def nm(h: AngleDelayMatrix, eta_cf: float, scan_index: int = 0) -> Frame:
    """Noise masking: zero entries below eta_cf times the global maximum."""
    if not 0.0 <= eta_cf <= 1.0:
        raise ValueError("eta_cf must be in [0, 1]")
    h_max = h.values.max() if h.values.size else 0.0
    keep = h.values >= eta_cf * h_max
    return Frame(
        values=np.where(keep, h.values, 0.0),
        angles_deg=h.angles_deg,
        t_min=h.t_min,
        t_s=h.t_s,
        scan_index=scan_index,
    )


def extract_scan_vector(frame: AngleDelayMatrix, eta_sv: float) -> ScanVector:
    """Range of the first return at or above eta_sv of each row's maximum.

    Rows with no nonzero entry get NaN. Among qualifying bins the lowest
    delay index wins, which makes this behave like a first-return lidar.
    """
    if not 0.0 < eta_sv <= 1.0:
        raise ValueError("eta_sv must be in (0, 1]")
    values = frame.values
    row_max = values.max(axis=1)
    qualifies = values >= eta_sv * row_max[:, None]
    # argmax on booleans returns the first True column
    first = np.argmax(qualifies, axis=1)
    ranges = frame.d_min + first * frame.range_step
    ranges = np.where(row_max > 0, ranges, np.nan)
    return ScanVector(ranges=ranges, angles_deg=frame.angles_deg.copy())


def extract_paths(frame: AngleDelayMatrix) -> PathSet:
    """Every surviving nonzero cell as one path.

    Power is the squared magnitude, delay and azimuth come from the cell's
    grid coordinates. No clustering: one cell, one path.
    """
    rows, cols = np.nonzero(frame.values)
    return PathSet(
        powers=frame.values[rows, cols] ** 2,
        delays=frame.t_min + cols * frame.t_s,
        azimuths_deg=frame.angles_deg[rows],
    )
