"""File formats and dataset ingestion.

- binary angle-delay matrix files (.adm): fixed little-endian header
  followed by a float64 row-major payload
- a CSV twin of the same content for small fixtures
- CFR to CIR conversion for swept-frequency soundings
- complex linear interpolation from a coarse angle grid to a fine one
- plain key=value config files
"""

import struct
import warnings
from dataclasses import dataclass, fields

import numpy as np

from .preprocess import AngleDelayMatrix

MAGIC = b"RADM"
VERSION = 1
_HEADER = struct.Struct("<4sI2Q4d")  # magic, version, N, M, t_min, t_s, angle0, dangle


def write_matrix(path, matrix: AngleDelayMatrix) -> None:
    """Binary matrix file: header plus float64 row-major values."""
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        matrix.n_angles,
        matrix.n_bins,
        matrix.t_min,
        matrix.t_s,
        float(matrix.angles_deg[0]),
        matrix.angle_step_deg,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(matrix.values, dtype="<f8").tobytes())


def read_matrix(path) -> AngleDelayMatrix:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, n, m, t_min, t_s, angle0, dangle = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        payload = fh.read(n * m * 8)
    if len(payload) != n * m * 8:
        raise ValueError(f"{path}: truncated payload")
    values = np.frombuffer(payload, dtype="<f8").reshape(n, m).copy()
    angles = angle0 + dangle * np.arange(n)
    return AngleDelayMatrix(values=values, angles_deg=angles, t_min=t_min, t_s=t_s)


def write_matrix_csv(path, matrix: AngleDelayMatrix) -> None:
    """CSV twin of the binary format, meant for small hand-checked fixtures."""
    with open(path, "w") as fh:
        fh.write(
            f"# t_min={matrix.t_min!r} t_s={matrix.t_s!r}"
            f" angle0={float(matrix.angles_deg[0])!r} dangle={matrix.angle_step_deg!r}\n"
        )
        for row in matrix.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_matrix_csv(path) -> AngleDelayMatrix:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing metadata header line")
        meta = dict(
            item.split("=", 1) for item in header.lstrip("#").split() if "=" in item
        )
        values = np.loadtxt(fh, delimiter=",", ndmin=2)
    n = values.shape[0]
    angles = float(meta["angle0"]) + float(meta["dangle"]) * np.arange(n)
    return AngleDelayMatrix(
        values=values,
        angles_deg=angles,
        t_min=float(meta["t_min"]),
        t_s=float(meta["t_s"]),
    )


def cfr_to_cir(
    cfr,
    start_hz: float,
    step_hz: float,
    window: str = "hann",
    method: str = "real",
):
    """Channel frequency response to impulse response.

    Returns (cir, t_s). With method="real" the measured band is zero-padded
    down to DC and inverted with a real FFT, which models a real passband
    impulse response sampled at t_s = 1 / (2 f_stop); an 85 GHz sweep up to
    320 GHz lands at about 1.56 ps. method="baseband" inverts the band as-is
    (complex) with t_s = 1 / (P step_hz). Window "hann" tapers the band
    edges, "none" keeps exact round-trip invertibility.
    """
    values = np.asarray(cfr, dtype=complex)
    if values.ndim != 1 or values.size < 2:
        raise ValueError("cfr must be a 1D array with at least 2 samples")
    if step_hz <= 0 or start_hz < 0:
        raise ValueError("start_hz must be >= 0 and step_hz > 0")
    if window == "hann":
        values = values * np.hanning(values.size)
    elif window != "none":
        raise ValueError(f"unknown window {window!r}")

    p = values.size
    if method == "baseband":
        cir = np.fft.ifft(values)
        return cir, 1.0 / (p * step_hz)
    if method != "real":
        raise ValueError(f"unknown method {method!r}")
    offset_bins = start_hz / step_hz
    offset = int(round(offset_bins))
    if abs(offset_bins - offset) > 1e-6:
        raise ValueError("start_hz must be an integer multiple of step_hz")
    spectrum = np.zeros(offset + p, dtype=complex)
    spectrum[offset:] = values
    n_time = 2 * (spectrum.size - 1)
    if n_time <= 0:
        raise ValueError("band too short for a real inverse transform")
    cir = np.fft.irfft(spectrum, n=n_time).astype(complex)
    t_s = 1.0 / (n_time * step_hz)
    return cir, t_s


def validate_uniform_grid(freqs, rel_tol: float = 1e-9) -> tuple[float, float]:
    """Check a frequency axis is uniform; returns (start_hz, step_hz)."""
    arr = np.asarray(freqs, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("frequency grid needs at least 2 points")
    steps = np.diff(arr)
    step = steps[0]
    if step <= 0 or np.any(np.abs(steps - step) > rel_tol * abs(step)):
        raise ValueError("non-uniform frequency grid")
    return float(arr[0]), float(step)


def interpolate_angles(cirs, coarse_angles_deg, target_angles_deg) -> np.ndarray:
    """Linear interpolation of complex CIR rows onto a finer angle grid.

    Real and imaginary parts interpolate independently per delay bin.
    Targets outside the coarse hull clamp to the endpoints, with a warning.
    """
    values = np.asarray(cirs, dtype=complex)
    coarse = np.asarray(coarse_angles_deg, dtype=float)
    target = np.asarray(target_angles_deg, dtype=float)
    if values.ndim != 2 or values.shape[0] != coarse.size:
        raise ValueError("cirs must be (n_coarse, M) matching coarse_angles_deg")
    if coarse.size < 2 or np.any(np.diff(coarse) <= 0):
        raise ValueError("coarse angles must be ascending, at least 2 of them")
    if target.min() < coarse[0] or target.max() > coarse[-1]:
        warnings.warn("target angles outside the measured hull are clamped")
    idx = np.clip(np.searchsorted(coarse, target, side="right") - 1, 0, coarse.size - 2)
    span = coarse[idx + 1] - coarse[idx]
    frac = np.clip((target - coarse[idx]) / span, 0.0, 1.0)
    return values[idx] * (1.0 - frac)[:, None] + values[idx + 1] * frac[:, None]


@dataclass
class PipelineConfig:
    """Everything one end-to-end run needs, all plain scalars and paths.

    The thresholds, filter intensities and measurement sigmas default to
    the reference system's values.
    """

    # inputs and outputs
    input_dir: str = ""
    output_dir: str = "out"
    ground_truth: str = ""
    # preprocessing thresholds
    eta_cl: float = 0.4
    eta_cf: float = 1e-2
    eta_sv: float = 0.9
    # pose estimation
    pose_estimator: str = "sfm"  # fm | sfm | lsm
    cell_size: float = 0.02
    image_size: int = 512
    window: bool = True
    subpixel: bool = False
    search_x_cells: int = 25
    search_y_cells: int = 25
    search_theta_bins: int = 4
    search_theta_step_deg: float = 1.0
    search_cell_size: float = 0.05
    search_smooth_cells: float = 1.0
    # tracking
    t_f: float = 1.0
    w0: float = 1e-4
    w_theta: float = 1e-4
    sigma_x: float = 4.7e-3
    sigma_y: float = 4.7e-3
    sigma_theta: float = 1.7e-3
    q_min: float = 1e-2
    # mapping
    map_origin_x: float = -12.0
    map_origin_y: float = -12.0
    map_width: int = 480
    map_height: int = 480
    map_cell_size: float = 0.05
    p_hit: float = 0.9
    free_space: bool = True
    # misc
    seed: int = 0


def _parse_value(kind, raw: str):
    if kind is bool:
        lowered = raw.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return kind(raw)


def parse_config(text: str) -> PipelineConfig:
    """key=value lines; # starts a comment; unknown keys are an error."""
    known = {f.name: f.type for f in fields(PipelineConfig)}
    kinds = {"str": str, "float": float, "int": int, "bool": bool}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in known:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        kind = kinds[known[key]] if isinstance(known[key], str) else known[key]
        values[key] = _parse_value(kind, value.strip())
    return PipelineConfig(**values)


def serialize_config(cfg: PipelineConfig) -> str:
    lines = []
    for f in fields(PipelineConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name}={value}")
    return "\n".join(lines) + "\n"


def load_config(path) -> PipelineConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def save_config(path, cfg: PipelineConfig) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_config(cfg))
