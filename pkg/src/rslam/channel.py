"""Power-weighted channel spread statistics.

Given the detected paths of a frame, compute the classic second-moment
descriptors: mean delay and RMS delay spread, and the circular mean and
spread of the azimuth angles. Angles enter the circular statistics as
phasors in radians; the resulting angular spread is the dimensionless RMS
distance of those phasors from their mean, with a degrees-equivalent
conversion offered for reporting. ECDFs and log-normal moment fits support
scenario-level summaries.
"""

import math
from dataclasses import dataclass

import numpy as np

from .preprocess import PathSet


@dataclass(frozen=True)
class SpreadStats:
    """Delay and angular spread of one frame's path set."""

    tau_mean: float
    tau_rms: float
    phi_mean: complex
    phi_spread: float

    @property
    def phi_spread_deg(self) -> float:
        """Degrees-equivalent of the dimensionless angular spread."""
        return self.phi_spread * 180.0 / math.pi


@dataclass(frozen=True)
class EcdfFit:
    """Right-continuous empirical CDF, optionally with log-normal moments."""

    values: np.ndarray
    mu: float | None = None
    sigma: float | None = None

    def __post_init__(self):
        values = np.sort(np.asarray(self.values, dtype=float))
        if values.size == 0:
            raise ValueError("ECDF needs at least one value")
        if not np.all(np.isfinite(values)):
            raise ValueError("ECDF values must be finite")
        object.__setattr__(self, "values", values)

    def evaluate(self, x) -> np.ndarray:
        """Fraction of samples <= x; 0 below the sample range, 1 at the top."""
        idx = np.searchsorted(self.values, np.asarray(x, dtype=float), side="right")
        return idx / self.values.size


def delay_spread(paths: PathSet) -> tuple[float, float]:
    """Power-weighted mean delay and RMS delay spread."""
    if len(paths) == 0:
        raise ValueError("empty path set")
    weights = paths.powers / paths.powers.sum()
    tau_mean = float(np.sum(paths.delays * weights))
    tau_rms = float(np.sqrt(np.sum((paths.delays - tau_mean) ** 2 * weights)))
    return tau_mean, tau_rms


def angular_spread(paths: PathSet) -> tuple[complex, float]:
    """Power-weighted circular mean phasor and angular spread.

    The spread is sqrt(sum |e^{j phi} - mu|^2 w) and satisfies the identity
    spread = sqrt(1 - |mu|^2).
    """
    if len(paths) == 0:
        raise ValueError("empty path set")
    weights = paths.powers / paths.powers.sum()
    phasors = np.exp(1j * np.deg2rad(paths.azimuths_deg))
    mu = complex(np.sum(phasors * weights))
    spread = float(np.sqrt(np.sum(np.abs(phasors - mu) ** 2 * weights)))
    return mu, spread


def spread_stats(paths: PathSet) -> SpreadStats:
    tau_mean, tau_rms = delay_spread(paths)
    mu, spread = angular_spread(paths)
    return SpreadStats(tau_mean=tau_mean, tau_rms=tau_rms, phi_mean=mu, phi_spread=spread)


def ecdf(values) -> EcdfFit:
    """Empirical CDF of a sample."""
    return EcdfFit(values=values)


def lognormal_fit(values) -> tuple[float, float]:
    """Moment-matched log-normal parameters: mean and std of the logs."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("empty sample")
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise ValueError("log-normal fit needs positive finite values")
    logs = np.log(arr)
    return float(logs.mean()), float(logs.std())


def scenario_spread_report(frames) -> dict:
    """Per-position spreads plus aggregate RMS values across a scenario.

    frames is an iterable of cleaned frames; positions whose path set is
    empty are skipped and recorded as None in the per-position list.
    """
    from .preprocess import extract_paths

    per_position: list[SpreadStats | None] = []
    for frame in frames:
        paths = extract_paths(frame)
        per_position.append(spread_stats(paths) if len(paths) else None)
    tau_values = np.array([s.tau_rms for s in per_position if s is not None])
    phi_values = np.array([s.phi_spread for s in per_position if s is not None])
    aggregates = {
        "positions": len(per_position),
        "positions_with_paths": int(tau_values.size),
        "tau_rms_aggregate": float(np.sqrt(np.mean(tau_values**2))) if tau_values.size else math.nan,
        "phi_spread_aggregate": float(np.sqrt(np.mean(phi_values**2))) if phi_values.size else math.nan,
    }
    if phi_values.size:
        aggregates["phi_spread_aggregate_deg"] = aggregates["phi_spread_aggregate"] * 180.0 / math.pi
    return {"per_position": per_position, "aggregates": aggregates}
