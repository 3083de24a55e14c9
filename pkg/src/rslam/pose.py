"""Relative pose estimation between consecutive radar frames.

Three estimators, all returning the motion (dx, dy, dtheta) of the sensor
from scan k-1 to scan k, expressed in the k-1 local frame, plus a quality
score q in [0, 1]:

- estimate_relative_pose_fm: rotation from the magnitude spectra of the
  Cartesian-projected frames (translation invariant), resampled to polar so
  rotation becomes a circular shift; translation by phase correlation after
  derotation.
- estimate_relative_pose_sfm: same translation stage, but the rotation is
  phase-correlated directly on the polar frames along the angle axis. Valid
  when per-step translations displace the polar content much less than
  rotations do.
- estimate_relative_pose_lsm: correlative matching of the first-return scan
  vectors over an exhaustive (dx, dy, dtheta) search window.

Conventions, fixed once and shared with track/mapping/sim:

- Frame rows are steering angles, ascending. rotate_frame(F, d) rolls rows
  by round(d / bin), so rotate_frame(F_km1, dtheta) aligns the previous
  frame with the current one.
- estimate_rotation on (F, rotate_frame(F, delta)) returns -delta.
- Local Cartesian axes: x along boresight, y toward increasing steering
  angle. dx > 0 means the sensor advanced along its boresight.
- A quality of 1 means a perfect correlation peak; degenerate inputs
  (all-zero frames) give q = 0 and a zero pose rather than an exception.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .preprocess import AngleDelayMatrix, Frame, ScanVector

CPS_EPS_REL = 1e-12  # spectral bins below this fraction of mean power are dropped
COMPRESSION_FLOOR_DB = 60.0  # dynamic range kept when compressing images for registration
REGISTRATION_LOWPASS_CELLS = 2.0  # spectral low-pass for the translation stage
ROTATION_LOWPASS_CELLS = 1.0  # gentler low-pass for the angle-axis correlations
PEAK_RERANK_TOP = 8  # correlation peak candidates re-scored by aligned cosine
EDGE_RERANK_SIGMA = 1.0  # gradient scale (cells) for edge-weighted candidate scoring
SFM_REFINE_PASSES = 2  # parallax-compensated rotation re-reads (see the sfm estimator)
SUBPIXEL_UPSAMPLE = 20  # fine-grid factor for subpixel peak refinement
SUBPIXEL_HALF_CELLS = 1.5  # half-width of the refinement window around the peak


@dataclass(frozen=True)
class CartesianImage:
    """Square top-down projection of a frame, sensor at the center cell."""

    values: np.ndarray
    cell_size: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("values must be a square 2D array")
        if values.shape[0] % 2 != 0:
            raise ValueError("image size must be even")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class RelativePose:
    """Sensor motion from scan k-1 to scan k in the k-1 local frame.

    dtheta is in degrees, wrapped to (-180, 180]. q in [0, 1] scores the
    registration peak and feeds the measurement covariance downstream.
    """

    dx: float
    dy: float
    dtheta_deg: float
    q: float

    def __post_init__(self):
        if not (math.isfinite(self.dx) and math.isfinite(self.dy)):
            raise ValueError("dx and dy must be finite")
        if not -180.0 < self.dtheta_deg <= 180.0:
            raise ValueError("dtheta_deg must lie in (-180, 180]")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("q must be in [0, 1]")


@dataclass(frozen=True)
class LsmSearchWindow:
    """Exhaustive search window for the scan matcher.

    Offsets run over +-x_cells and +-y_cells grid steps and +-theta_bins
    rotation steps of theta_step_deg. smooth_cells is the Gaussian blur
    applied to the rasterized reference scan.
    """

    x_cells: int = 25
    y_cells: int = 25
    theta_bins: int = 4
    cell_size: float = 0.05
    theta_step_deg: float = 1.0
    smooth_cells: float = 1.0

    def __post_init__(self):
        if min(self.x_cells, self.y_cells, self.theta_bins) < 0:
            raise ValueError("window extents must be nonnegative")
        if self.cell_size <= 0 or self.theta_step_deg <= 0:
            raise ValueError("cell_size and theta_step_deg must be positive")
        if self.smooth_cells < 0:
            raise ValueError("smooth_cells must be nonnegative")


def polar_to_cartesian(frame: AngleDelayMatrix, cell_size: float, size: int) -> CartesianImage:
    """Deposit nonzero polar cells onto a square Cartesian grid.

    Each nonzero (angle, range) cell lands at the nearest cell to
    (d cos(phi), d sin(phi)), with the sensor at index (size/2, size/2).
    Colliding deposits keep the maximum. Cells outside the window are
    dropped, so size * cell_size should cover the range of interest.
    """
    if size % 2 != 0 or size <= 0:
        raise ValueError("size must be a positive even integer")
    if cell_size <= 0:
        raise ValueError("cell_size must be positive")
    half = size // 2
    if frame.d_min > (half - 1) * cell_size:
        raise ValueError("image window too small to contain the first range bin")
    img = np.zeros((size, size))
    rows_nz, cols_nz = np.nonzero(frame.values)
    if rows_nz.size:
        d = frame.d_min + cols_nz * frame.range_step
        phi = np.deg2rad(frame.angles_deg[rows_nz])
        col = half + np.rint(d * np.cos(phi) / cell_size).astype(int)
        row = half + np.rint(d * np.sin(phi) / cell_size).astype(int)
        inside = (row >= 0) & (row < size) & (col >= 0) & (col < size)
        np.maximum.at(img, (row[inside], col[inside]), frame.values[rows_nz, cols_nz][inside])
    return CartesianImage(values=img, cell_size=cell_size)


def cross_power_spectrum(spec_a: np.ndarray, spec_b: np.ndarray) -> np.ndarray:
    """Normalized cross-power spectrum A * conj(B) / |A * conj(B)|.

    Bins whose product magnitude falls below a small fraction of the mean
    product magnitude are emitted as zero instead of being normalized, which
    keeps near-empty bins from injecting random phase.
    """
    spec_a = np.asarray(spec_a)
    spec_b = np.asarray(spec_b)
    if spec_a.shape != spec_b.shape:
        raise ValueError("spectra must have equal shapes")
    product = spec_a * np.conj(spec_b)
    mag = np.abs(product)
    eps = CPS_EPS_REL * mag.mean() if mag.size else 0.0
    out = np.zeros_like(product)
    keep = mag > eps
    out[keep] = product[keep] / mag[keep]
    return out


def _signed_shift(index: int, length: int) -> int:
    return index - length if index > length // 2 else index


def _upsampled_peak(cps: np.ndarray, row0: float, col0: float):
    """Peak of the correlation surface on a fine grid around (row0, col0).

    The surface is the inverse transform of cps evaluated directly (a small
    matrix DFT) at SUBPIXEL_UPSAMPLE points per cell over a window of
    +-SUBPIXEL_HALF_CELLS. For a pure circular shift the continuous surface
    is a Dirichlet kernel whose maximum sits exactly on the integer shift,
    so exact-shift recovery is unaffected; on real content the fine argmax
    resolves peaks that straddle two cells, where a three-point parabola is
    biased toward the argmax cell.
    """
    n_rows, n_cols = cps.shape
    steps = np.arange(-SUBPIXEL_HALF_CELLS * SUBPIXEL_UPSAMPLE, SUBPIXEL_HALF_CELLS * SUBPIXEL_UPSAMPLE + 1)
    rows = row0 + steps / SUBPIXEL_UPSAMPLE
    cols = col0 + steps / SUBPIXEL_UPSAMPLE
    row_kernel = np.exp(2j * np.pi * np.outer(rows, np.fft.fftfreq(n_rows)))
    col_kernel = np.exp(2j * np.pi * np.outer(np.fft.fftfreq(n_cols), cols))
    patch = np.real(row_kernel @ cps @ col_kernel) / (n_rows * n_cols)
    i, j = np.unravel_index(int(np.argmax(patch)), patch.shape)
    return float(rows[i]), float(cols[j])


def _alignment_quality(a: np.ndarray, b: np.ndarray, shift_rows: int, shift_cols: int) -> float:
    """Cosine similarity of a and b after undoing the estimated shift.

    1.0 when the shift explains b perfectly, falling toward 0 as content
    decorrelates. Using the aligned-image cosine instead of a peak-to-mass
    ratio keeps the score independent of image size, so a good match reads
    as a high confidence for the measurement covariance downstream.

    The undo is a circular roll, but the underlying data is not periodic:
    a frame is a truncated fan and an image is a finite window. Rows and
    columns that re-enter through the far edge are therefore zeroed before
    scoring, while the denominator keeps the full norms, so a candidate
    that "explains" the data by recycling wrapped content pays for every
    cell it threw away. Without this, structure that repeats a quarter
    turn apart (the walls of a rectangular room) makes 90 degree rolls
    score nearly as well as the truth.
    """
    aligned = np.roll(b, (-shift_rows, -shift_cols), axis=(0, 1))
    denom = np.linalg.norm(a) * np.linalg.norm(aligned)
    if denom == 0:
        return 0.0
    n_rows, n_cols = aligned.shape
    if 0 < shift_rows < n_rows:
        aligned[n_rows - shift_rows:, :] = 0.0
    elif -n_rows < shift_rows < 0:
        aligned[:-shift_rows, :] = 0.0
    if 0 < shift_cols < n_cols:
        aligned[:, n_cols - shift_cols:] = 0.0
    elif -n_cols < shift_cols < 0:
        aligned[:, :-shift_cols] = 0.0
    return float(np.clip(np.vdot(a, aligned).real / denom, 0.0, 1.0))


def _lowpass_weight(shape, sigma_cells: float) -> np.ndarray:
    rows = np.fft.fftfreq(shape[0])[:, None]
    cols = np.fft.fftfreq(shape[1])[None, :]
    return np.exp(-2.0 * (math.pi * sigma_cells) ** 2 * (rows**2 + cols**2))


def _shift_candidates(
    a: np.ndarray,
    b: np.ndarray,
    lowpass_sigma: float,
    top: int,
    score_pair=None,
):
    """Strongest correlation-surface cells, re-scored by aligned cosine.

    Returns (cps, ranked) where cps is the normalized spectrum that was
    inverted and ranked is a list of (shift_rows, shift_cols, q) for the
    top surface cells, sorted by q descending. Inputs are assumed validated
    and nonzero. score_pair optionally supplies the (a, b) images used for
    the cosine scoring, when ranking should weigh different content than
    the correlation itself (see phase_correlation's edge_rerank).
    """
    cps = cross_power_spectrum(np.fft.fft2(b), np.fft.fft2(a))
    if lowpass_sigma > 0:
        cps = cps * _lowpass_weight(cps.shape, lowpass_sigma)
    surface = np.real(np.fft.ifft2(cps))
    n_rows, n_cols = surface.shape
    if top == 1:
        cells = [np.unravel_index(int(np.argmax(surface)), surface.shape)]
    else:
        order = np.argsort(surface.ravel())[::-1][:top]
        cells = [np.unravel_index(int(i), surface.shape) for i in order]
    score_a, score_b = (a, b) if score_pair is None else score_pair
    ranked = []
    for cell in cells:
        rows_c = _signed_shift(cell[0], n_rows)
        cols_c = _signed_shift(cell[1], n_cols)
        ranked.append((rows_c, cols_c, _alignment_quality(score_a, score_b, rows_c, cols_c)))
    ranked.sort(key=lambda item: item[2], reverse=True)
    return cps, ranked


def phase_correlation(
    img_a: np.ndarray,
    img_b: np.ndarray,
    subpixel: bool = False,
    lowpass_sigma: float = 0.0,
    rerank_top: int = 1,
    edge_rerank: bool = False,
):
    """Circular shift of img_b relative to img_a, with a quality score.

    If img_b equals img_a rolled by (rows, cols), the exact integer shift is
    returned. q is the cosine similarity of the two images after undoing
    the shift: exactly 1.0 for a perfect circular match, near 0 for junk.
    All-zero input yields (0, 0, 0.0). With subpixel=True the surface is
    re-evaluated on a fine grid around the peak (direct inverse DFT at
    SUBPIXEL_UPSAMPLE points per cell) and the shifts come back as floats.

    lowpass_sigma > 0 multiplies the normalized spectrum by a Gaussian
    low-pass (sigma in cells of the equivalent image blur) before the
    inverse transform. High-frequency phase noise from resampled or
    quantized content is suppressed; a pure circular shift still peaks at
    the exact cell, since the weighted surface is just the blur kernel
    recentered on the true shift.

    rerank_top > 1 treats the strongest rerank_top surface cells as
    candidate shifts and keeps the one whose aligned-image cosine is
    highest. The whitened spectrum over-rewards self-similar 1D structure
    (a wall sliding along itself proposes phantom shifts); the cosine
    check picks the candidate that actually explains the images. A perfect
    circular shift scores cosine 1.0, so exact recovery is unaffected.

    edge_rerank=True scores the candidates on gradient-magnitude versions
    of the images instead of the raw ones. Spatially diffuse content (a
    return smeared over many cells stays roughly centered on the sensor
    however the platform moves) overlaps itself at zero shift well enough
    to outvote the true motion of compact structure; gradients strip the
    diffuse bulk so the edges decide. No effect unless rerank_top > 1.
    """
    a = np.asarray(img_a, dtype=float)
    b = np.asarray(img_b, dtype=float)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError("images must be 2D arrays of equal shape")
    if lowpass_sigma < 0:
        raise ValueError("lowpass_sigma must be nonnegative")
    if rerank_top < 1:
        raise ValueError("rerank_top must be at least 1")
    if not np.any(a) or not np.any(b):
        return (0, 0, 0.0) if not subpixel else (0.0, 0.0, 0.0)
    score_pair = None
    if edge_rerank and rerank_top > 1:
        score_pair = (
            ndimage.gaussian_gradient_magnitude(a, EDGE_RERANK_SIGMA),
            ndimage.gaussian_gradient_magnitude(b, EDGE_RERANK_SIGMA),
        )
    cps, ranked = _shift_candidates(a, b, lowpass_sigma, rerank_top, score_pair)
    shift_rows, shift_cols, q = ranked[0]
    if not subpixel:
        return shift_rows, shift_cols, q
    rows_f, cols_f = _upsampled_peak(cps, float(shift_rows), float(shift_cols))
    return rows_f, cols_f, q


def rotate_frame(frame: Frame, dtheta_deg: float) -> Frame:
    """Rotate a frame by circularly shifting rows by round(dtheta / bin).

    rotate_frame(F_km1, dtheta) aligns the previous frame with the current
    one when dtheta is the estimated rotation increment.
    """
    step = frame.angle_step_deg
    if step <= 0:
        raise ValueError("frame needs at least two angle rows to rotate")
    shift = int(round(dtheta_deg / step))
    return Frame(
        values=np.roll(frame.values, shift, axis=0),
        angles_deg=frame.angles_deg,
        t_min=frame.t_min,
        t_s=frame.t_s,
        scan_index=frame.scan_index,
    )


def _translate_frame(frame: Frame, dx: float, dy: float) -> Frame:
    """Frame as it would look from a sensor moved by (dx, dy), same heading.

    Every output cell (bearing, range) is mapped to the point it would see
    from the shifted origin and the input frame is sampled there bilinearly
    (zero outside the fan). Amplitude changes from the slightly different
    ranges are ignored; the warp only needs to put structure where the
    shifted sensor would see it. With dx = dy = 0 the frame is returned
    unchanged to machine precision.
    """
    if frame.n_angles < 2:
        return frame
    bearings = np.deg2rad(frame.angles_deg)[:, None]
    ranges = frame.ranges[None, :]
    px = dx + ranges * np.cos(bearings)
    py = dy + ranges * np.sin(bearings)
    r_src = np.hypot(px, py)
    psi_src = np.rad2deg(np.arctan2(py, px))
    rows = (psi_src - frame.angles_deg[0]) / frame.angle_step_deg
    cols = (r_src - frame.d_min) / frame.range_step
    warped = ndimage.map_coordinates(
        frame.values, [rows, cols], order=1, mode="constant", cval=0.0
    )
    return Frame(
        values=warped,
        angles_deg=frame.angles_deg,
        t_min=frame.t_min,
        t_s=frame.t_s,
        scan_index=frame.scan_index,
    )


def _hann2d(size: int) -> np.ndarray:
    w = np.hanning(size)
    return np.outer(w, w)


def _compress_db(values: np.ndarray, floor_db: float = COMPRESSION_FLOOR_DB) -> np.ndarray:
    """Log-compress nonneg values to [0, 1] over a floor_db dynamic range.

    Nonzero cells map to max(0, 10 log10(v / vmax) + floor_db) / floor_db,
    zeros stay zero. Registration needs the many weak scatterers to vote
    alongside the few strong specular returns; raw power spans orders of
    magnitude and lets a single glint dominate the correlation. The map is
    per-cell monotone with a global reference, so it commutes with circular
    shifts and exact-roll recovery is unaffected.
    """
    vmax = values.max() if values.size else 0.0
    if vmax <= 0:
        return np.zeros_like(values, dtype=float)
    out = np.zeros(values.shape, dtype=float)
    nz = values > 0
    with np.errstate(divide="ignore"):
        level = 10.0 * np.log10(values[nz] / vmax) + floor_db
    out[nz] = np.clip(level, 0.0, None) / floor_db
    return out


def _magnitude_spectrum(img: np.ndarray) -> np.ndarray:
    return np.abs(np.fft.fftshift(np.fft.fft2(img)))


def _resample_to_polar(mag: np.ndarray, n_angles: int) -> np.ndarray:
    """Bilinear resample of a centered magnitude spectrum onto a polar grid.

    Magnitude spectra of real images are point symmetric, so the upper half
    plane (angles in [0, 180)) carries all the information and a rotation
    becomes a circular row shift modulo 180 degrees. Radii run from 1 (the
    DC bin is skipped) to the Nyquist extent.
    """
    size = mag.shape[0]
    center = size // 2
    radii = np.arange(1, center)
    angles = np.deg2rad(np.arange(n_angles) * (180.0 / n_angles))
    rows = center + np.outer(np.sin(angles), radii)
    cols = center + np.outer(np.cos(angles), radii)
    return ndimage.map_coordinates(mag, [rows, cols], order=1, mode="constant")


def _wrap_deg(angle: float) -> float:
    return float(180.0 - (180.0 - angle) % 360.0)


def _rotation_from_cartesian(cur_img: np.ndarray, prev_img: np.ndarray, bin_deg: float):
    """Rotation of cur_img relative to prev_img from their magnitude spectra.

    Returns (dtheta_deg, q) with dtheta in (-90, 90]; the 180 degree twin is
    indistinguishable here and is resolved at the translation stage. The
    polar resample runs at two rows per frame angle bin, which keeps one
    misplaced correlation row from costing a whole bin of rotation.
    """
    n_angles = max(int(round(2 * 180.0 / bin_deg)), 1)
    polar_cur = _resample_to_polar(np.log1p(_magnitude_spectrum(cur_img)), n_angles)
    polar_prev = _resample_to_polar(np.log1p(_magnitude_spectrum(prev_img)), n_angles)
    shift_rows, _, q = phase_correlation(
        polar_prev,
        polar_cur,
        lowpass_sigma=ROTATION_LOWPASS_CELLS,
        rerank_top=PEAK_RERANK_TOP,
    )
    return shift_rows * (180.0 / n_angles), q


def estimate_rotation_fm(
    frame_k: Frame,
    frame_km1: Frame,
    cell_size: float,
    size: int,
    window: bool = True,
):
    """Spectral rotation estimate between two frames.

    Projects both frames to Cartesian, takes 2D FFT magnitudes (translation
    drops out), resamples them to polar and phase-correlates along the angle
    axis. Returns (dtheta_deg, q); all-zero frames give (0.0, 0.0).
    """
    if not np.any(frame_k.values) or not np.any(frame_km1.values):
        return 0.0, 0.0
    img_k = _compress_db(polar_to_cartesian(frame_k, cell_size, size).values)
    img_km1 = _compress_db(polar_to_cartesian(frame_km1, cell_size, size).values)
    if window:
        taper = _hann2d(size)
        img_k = img_k * taper
        img_km1 = img_km1 * taper
    bin_deg = frame_k.angle_step_deg or 1.0
    return _rotation_from_cartesian(img_k, img_km1, bin_deg)


def _rotation_candidates_sfm(frame_k: Frame, frame_km1: Frame, top: int):
    """Distinct angle-axis shifts of the polar correlation, best first.

    Returns up to top (dtheta_deg, q) pairs, each scored by the aligned
    cosine of the polar frames.
    """
    _, ranked = _shift_candidates(
        _compress_db(frame_km1.values),
        _compress_db(frame_k.values),
        ROTATION_LOWPASS_CELLS,
        PEAK_RERANK_TOP,
    )
    step = frame_k.angle_step_deg
    out = []
    seen = set()
    for rows_c, _, q in ranked:
        if rows_c in seen:
            continue
        seen.add(rows_c)
        out.append((rows_c * step, q))
        if len(out) == top:
            break
    return out


def _translation_after_derotation(
    frame_k: Frame,
    frame_km1: Frame,
    dtheta_deg: float,
    cell_size: float,
    size: int,
    window: bool,
    subpixel: bool,
):
    """Phase-correlate the Cartesian projections after derotating frame k-1.

    Returns (dx, dy, q) where (dx, dy) is the sensor translation in the k-1
    local frame. The raw image shift measures scene motion in the current
    local frame; it is negated and rotated back by dtheta to express the
    sensor's own motion in the previous frame's axes.
    """
    aligned_km1 = rotate_frame(frame_km1, dtheta_deg)
    img_k = _compress_db(polar_to_cartesian(frame_k, cell_size, size).values)
    img_km1 = _compress_db(polar_to_cartesian(aligned_km1, cell_size, size).values)
    if window:
        taper = _hann2d(size)
        img_k = img_k * taper
        img_km1 = img_km1 * taper
    shift_rows, shift_cols, q = phase_correlation(
        img_km1,
        img_k,
        subpixel=subpixel,
        lowpass_sigma=REGISTRATION_LOWPASS_CELLS,
        rerank_top=PEAK_RERANK_TOP,
        edge_rerank=True,
    )
    tx_cur = -shift_cols * cell_size
    ty_cur = -shift_rows * cell_size
    ang = math.radians(-dtheta_deg)
    dx = math.cos(ang) * tx_cur - math.sin(ang) * ty_cur
    dy = math.sin(ang) * tx_cur + math.cos(ang) * ty_cur
    return dx, dy, q


def _zero_pose() -> RelativePose:
    return RelativePose(dx=0.0, dy=0.0, dtheta_deg=0.0, q=0.0)


def estimate_relative_pose_fm(
    frame_k: Frame,
    frame_km1: Frame,
    cell_size: float = 0.02,
    size: int = 512,
    window: bool = True,
    subpixel: bool = False,
) -> RelativePose:
    """Full spectral registration: rotation from magnitude spectra, then
    translation by phase correlation after derotation.

    Magnitude spectra cannot tell a rotation from its 180 degree twin. On
    frames covering a full circle both candidates run through the
    translation stage and the stronger translation peak wins. On a partial
    fan the twin would point outside the field of view entirely (and a row
    roll by 180 degrees aliases on the truncated axis), so the direct
    estimate in (-90, 90] is kept. Overall q is the weaker of the rotation
    and translation scores.

    The rotation stage runs twice, on tapered and on untapered spectra,
    and every distinct estimate goes through the translation stage. The
    two spectra fail differently: without a taper the finite window grows
    an axis-aligned leakage cross that is identical in both frames and
    anchors the angular correlation at zero rotation, while the taper
    attenuates off-center structure that may carry most of the rotation
    evidence. A wrong derotation leaves residual rotation that degrades
    the translation consensus, so the translation score referees. The
    window flag itself only controls the translation stage.
    """
    if not np.any(frame_k.values) or not np.any(frame_km1.values):
        return _zero_pose()
    step = frame_k.angle_step_deg
    full_circle = frame_k.n_angles * step >= 360.0 - 0.5 * step
    candidates = {}
    for taper in (True, False):
        dtheta, q_rot = estimate_rotation_fm(
            frame_k, frame_km1, cell_size, size, window=taper
        )
        twins = (dtheta, _wrap_deg(dtheta + 180.0)) if full_circle else (dtheta,)
        for candidate in twins:
            candidates[candidate] = max(q_rot, candidates.get(candidate, 0.0))
    best = None
    for candidate, q_rot in candidates.items():
        dx, dy, q_tr = _translation_after_derotation(
            frame_k, frame_km1, candidate, cell_size, size, window, subpixel
        )
        if best is None or q_tr > best[4]:
            best = (dx, dy, candidate, q_rot, q_tr)
    dx, dy, dtheta, q_rot, q_tr = best
    return RelativePose(
        dx=dx, dy=dy, dtheta_deg=_wrap_deg(dtheta), q=min(q_rot, q_tr)
    )


def estimate_relative_pose_sfm(
    frame_k: Frame,
    frame_km1: Frame,
    cell_size: float = 0.02,
    size: int = 512,
    window: bool = True,
    subpixel: bool = False,
) -> RelativePose:
    """Simplified registration: rotation directly from the polar frames.

    The polar frames are phase-correlated as-is and the angle-axis shift is
    read off as the rotation, skipping the spectral magnitude route. This
    assumes translations move the polar content much less than rotations
    do, which holds for small per-scan steps. A pure circular row shift is
    recovered exactly. Translation follows the same derotation stage as the
    spectral estimator.

    The rotation is then refined: translating the sensor also drifts every
    bearing by up to step/range radians, and the row correlation absorbs
    the content-weighted mean of that drift as a spurious extra rotation.
    Once a translation estimate exists, the previous frame is warped to the
    translated viewpoint and the rotation is re-read from the residual
    pair, which is translation-free to first order. The re-read is a
    hypothesis, not an override: warp interpolation can cost a bin on
    already-correct pairs, so the refined rotation is accepted only when
    the translation it enables scores at least as well as the current one.
    One round trip settles whole-bin estimates in practice; the loop stops
    as soon as the rotation reproduces itself or stops paying.
    """
    if not np.any(frame_k.values) or not np.any(frame_km1.values):
        return _zero_pose()
    (dtheta, q_rot), = _rotation_candidates_sfm(frame_k, frame_km1, 1)
    dx, dy, q_tr = _translation_after_derotation(
        frame_k, frame_km1, dtheta, cell_size, size, window, subpixel
    )
    for _ in range(SFM_REFINE_PASSES):
        shifted = _translate_frame(frame_km1, dx, dy)
        if not np.any(shifted.values):
            break
        (refined, q_ref), = _rotation_candidates_sfm(frame_k, shifted, 1)
        if refined == dtheta:
            break
        dx_r, dy_r, q_tr_r = _translation_after_derotation(
            frame_k, frame_km1, refined, cell_size, size, window, subpixel
        )
        if q_tr_r < q_tr:
            break
        dtheta, q_rot = refined, q_ref
        dx, dy, q_tr = dx_r, dy_r, q_tr_r
    return RelativePose(
        dx=dx, dy=dy, dtheta_deg=_wrap_deg(dtheta), q=min(q_rot, q_tr)
    )


def _scan_points(scan: ScanVector) -> np.ndarray:
    finite = np.isfinite(scan.ranges)
    d = scan.ranges[finite]
    phi = np.deg2rad(scan.angles_deg[finite])
    return np.column_stack([d * np.cos(phi), d * np.sin(phi)])


def estimate_relative_pose_lsm(
    scan_k: ScanVector,
    scan_km1: ScanVector,
    search: LsmSearchWindow | None = None,
) -> RelativePose:
    """Correlative scan matching over an exhaustive search window.

    The current scan is rasterized onto a grid, blurred into a smooth
    likelihood field, and every candidate (dx, dy, dtheta) on the window
    lattice scores the transformed previous scan against it. The best score
    normalized by the current scan's self score is the quality. Offsets are
    enumerated on the post-rotation lattice, so the effective translation
    reach is the same for every candidate rotation.
    """
    search = search or LsmSearchWindow()
    pts_k = _scan_points(scan_k)
    pts_km1 = _scan_points(scan_km1)
    if pts_k.shape[0] == 0 or pts_km1.shape[0] == 0:
        return _zero_pose()

    cell = search.cell_size
    max_reach = max(np.abs(pts_k).max(), np.abs(pts_km1).max()) / cell
    margin = max(search.x_cells, search.y_cells) + int(np.ceil(3 * search.smooth_cells)) + 2
    half = int(np.ceil(max_reach)) + margin
    size = 2 * half + 1

    grid = np.zeros((size, size))
    rows_k = half + np.rint(pts_k[:, 1] / cell).astype(int)
    cols_k = half + np.rint(pts_k[:, 0] / cell).astype(int)
    np.add.at(grid, (rows_k, cols_k), 1.0)
    if search.smooth_cells > 0:
        grid = ndimage.gaussian_filter(grid, sigma=search.smooth_cells)
    self_score = float(grid[rows_k, cols_k].sum())
    if self_score <= 0:
        return _zero_pose()

    da = np.arange(-search.y_cells, search.y_cells + 1)
    db = np.arange(-search.x_cells, search.x_cells + 1)
    best_score = -np.inf
    best = (0.0, 0.0, 0.0)
    for step in range(-search.theta_bins, search.theta_bins + 1):
        dtheta = step * search.theta_step_deg
        ang = math.radians(dtheta)
        rot = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
        rotated = pts_km1 @ rot.T
        base_rows = half + np.rint(rotated[:, 1] / cell).astype(int)
        base_cols = half + np.rint(rotated[:, 0] / cell).astype(int)
        rows = base_rows[:, None, None] + da[None, :, None]
        cols = base_cols[:, None, None] + db[None, None, :]
        valid = (rows >= 0) & (rows < size) & (cols >= 0) & (cols < size)
        samples = np.where(valid, grid[np.clip(rows, 0, size - 1), np.clip(cols, 0, size - 1)], 0.0)
        scores = samples.sum(axis=0)
        idx = np.unravel_index(int(np.argmax(scores)), scores.shape)
        if scores[idx] > best_score:
            shift_x = db[idx[1]] * cell
            shift_y = da[idx[0]] * cell
            # candidate transform: p_k = R(dtheta) p_km1 + shift, so the
            # sensor translation in the k-1 frame is -R(-dtheta) shift
            inv = rot.T
            dx = -(inv[0, 0] * shift_x + inv[0, 1] * shift_y)
            dy = -(inv[1, 0] * shift_x + inv[1, 1] * shift_y)
            best_score = float(scores[idx])
            best = (dx, dy, dtheta)
    q = float(np.clip(best_score / self_score, 0.0, 1.0))
    return RelativePose(dx=best[0], dy=best[1], dtheta_deg=_wrap_deg(best[2]), q=q)
