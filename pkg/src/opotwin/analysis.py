"""Calibration fits and trace reduction.

Everything here is a pure function over immutable inputs: threshold fit from
gain-vs-pump points, shot-noise calibration from LO-power scans,
electronic-noise subtraction, and robust per-window extrema extraction for
both the seed-gain readout and the squeezing readout.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import least_squares

from .errors import CalibrationError, DomainError, FitError, InsufficientDataError


@dataclass(frozen=True)
class GainPoint:
    pump_power: float  # W
    gain: float

    def __post_init__(self):
        if self.pump_power < 0.0:
            raise DomainError("pump power must be >= 0")
        if self.gain < 1.0:
            raise DomainError(f"parametric gain {self.gain} < 1 is unphysical")


@dataclass(frozen=True)
class NoisePoint:
    lo_power: float  # mW
    noise: float  # dBm at the stated RBW

    def __post_init__(self):
        if self.lo_power < 0.0:
            raise DomainError("LO power must be >= 0")


@dataclass(frozen=True)
class SqueezeResult:
    """Raw and electronic-noise-corrected squeezing/antisqueezing levels."""

    raw_sq_db: float
    raw_asq_db: float
    corrected_sq_db: float
    corrected_asq_db: float
    clearance: float  # linear (shot+electronic)/electronic ratio

    def __post_init__(self):
        if self.clearance <= 1.0:
            raise DomainError("clearance must exceed 1")

    def as_dict(self) -> dict:
        return {
            "raw_sq_db": self.raw_sq_db,
            "raw_asq_db": self.raw_asq_db,
            "corrected_sq_db": self.corrected_sq_db,
            "corrected_asq_db": self.corrected_asq_db,
            "clearance": self.clearance,
        }


def db_from_linear(value: float) -> float:
    """10 log10(x); rejects non-positive input."""
    if value <= 0.0:
        raise DomainError("linear value must be positive for dB conversion")
    return 10.0 * math.log10(value)


def linear_from_db(value_db: float) -> float:
    """Inverse of db_from_linear; round-trips to better than 1e-12."""
    return 10.0 ** (value_db / 10.0)


def fit_threshold(points: Sequence[GainPoint]) -> tuple[float, float]:
    """Single-parameter least-squares fit of G(P) = (1 - sqrt(P/P_th))^-2.

    Minimizes squared residuals in linear gain units.  Returns (P_th, RMS
    residual).  Requires at least 3 points, all below threshold.
    """
    if len(points) < 3:
        raise FitError(f"threshold fit needs >= 3 points, got {len(points)}")
    p = np.array([pt.pump_power for pt in points])
    g = np.array([pt.gain for pt in points])
    if np.any(g < 1.0):
        raise FitError("gain below 1 is outside the below-threshold model")

    # Initial guess from the highest-gain point: P_th = P / (1 - G^-1/2)^2.
    k = int(np.argmax(g))
    if g[k] <= 1.0:
        raise FitError("all gains are 1: no threshold information")
    p0 = p[k] / (1.0 - g[k] ** -0.5) ** 2
    p_floor = float(np.max(p)) * (1.0 + 1e-9)

    def resid(theta):
        p_th = theta[0]
        mu = np.sqrt(np.clip(p / p_th, 0.0, 1.0 - 1e-12))
        return (1.0 - mu) ** -2 - g

    sol = least_squares(resid, x0=[max(p0, p_floor)], bounds=([p_floor], [np.inf]))
    if not sol.success:
        raise FitError(f"threshold fit did not converge: {sol.message}")
    rms = float(np.sqrt(np.mean(sol.fun**2)))
    return float(sol.x[0]), rms


def fit_shot_noise(points: Sequence[NoisePoint]) -> tuple[float, float]:
    """Linear fit of total noise power vs LO power, in linear units.

    Returns (slope in mW per mW of LO, offset in dBm).  The offset is the
    electronic-noise estimate; a non-positive slope means there is no
    shot-noise component to calibrate against.
    """
    if len(points) < 3:
        raise CalibrationError(f"shot-noise fit needs >= 3 points, got {len(points)}")
    lo = np.array([pt.lo_power for pt in points])
    lin = np.array([linear_from_db(pt.noise) for pt in points])
    slope, offset = np.polyfit(lo, lin, 1)
    if slope <= 0.0 or slope * float(np.max(lo)) < 1e-9 * offset:
        raise CalibrationError("no measurable shot-noise slope above the electronic floor")
    if offset <= 0.0:
        raise CalibrationError("fitted electronic noise floor is not positive")
    return float(slope), db_from_linear(float(offset))


def shot_noise_residuals_db(points: Sequence[NoisePoint], slope: float, offset_dbm: float) -> np.ndarray:
    """Per-point deviation from the linear model, in dB."""
    offset = linear_from_db(offset_dbm)
    out = []
    for pt in points:
        model = slope * pt.lo_power + offset
        out.append(pt.noise - db_from_linear(model))
    return np.array(out)


def clearance_at(slope: float, offset_dbm: float, lo_power_mw: float) -> float:
    """(shot + electronic)/electronic ratio at a given LO power."""
    offset = linear_from_db(offset_dbm)
    return (slope * lo_power_mw + offset) / offset


def correct_electronic(raw_db: float, clearance: float) -> float:
    """Remove the electronic-noise pedestal from a relative noise level.

    `raw_db` is measured relative to the pump-off (shot + electronic)
    reference; with e = 1/clearance the underlying quadrature variance is
    (r - e)/(1 - e), returned in dB.
    """
    if clearance <= 1.0:
        raise DomainError("clearance must exceed 1")
    e = 1.0 / clearance
    r = linear_from_db(raw_db)
    if r <= e:
        raise DomainError(
            f"measured level {raw_db:.3f} dB at/below the electronic floor: unphysical"
        )
    return db_from_linear((r - e) / (1.0 - e))


def extract_minmax(
    values,
    times: np.ndarray | None = None,
    window_s: float = 0.1,
    width: float = 0.05,
    min_samples: int = 8,
) -> tuple[np.ndarray, np.ndarray]:
    """Robust (max, min) per time window of a modulated trace.

    Splits the trace into consecutive windows of `window_s` and returns the
    (1-width) and `width` quantiles of each, which resist single-sample
    outliers better than absolute extrema.  Each window must contain at
    least one full modulation arch (`min_samples` points).

    Accepts either plain (values, times) arrays or a zero-span trace object
    (anything with `raw_mw()` and `time_s`), in which case the unsmoothed
    band powers are reduced.
    """
    if hasattr(values, "raw_mw") and hasattr(values, "time_s"):
        trace = values
        values = trace.raw_mw()
        times = trace.time_s if times is None else times
    if times is None:
        raise DomainError("times are required for plain-array traces")
    values = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    if values.size == 0:
        raise InsufficientDataError("empty trace")
    if not 0.0 <= width < 0.5:
        raise DomainError("quantile width must lie in [0, 0.5)")
    t0 = times[0]
    idx = np.floor((times - t0) / window_s + 1e-9).astype(int)
    maxima, minima = [], []
    for w in range(idx.max() + 1):
        chunk = values[idx == w]
        if chunk.size == 0:
            continue
        if chunk.size < min_samples:
            raise InsufficientDataError(
                f"window {w} has {chunk.size} samples; need >= {min_samples} "
                "(window shorter than one modulation arch)"
            )
        maxima.append(np.quantile(chunk, 1.0 - width))
        minima.append(np.quantile(chunk, width))
    return np.array(maxima), np.array(minima)


def gains_from_trace(
    values: np.ndarray, times: np.ndarray, window_s: float, width: float = 0.01
) -> np.ndarray:
    """Per-window parametric gain from a seed-transmission trace."""
    from .optics import gain_from_minmax

    maxima, minima = extract_minmax(values, times, window_s, width=width)
    return np.array([gain_from_minmax(mx, mn) for mx, mn in zip(maxima, minima)])


# --- CSV interchange -------------------------------------------------------

GAIN_HEADER = ["pump_w", "gain"]
NOISE_HEADER = ["lo_mw", "noise_dbm"]


def write_gain_csv(path, points: Iterable[GainPoint]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(GAIN_HEADER)
        for pt in points:
            w.writerow([f"{pt.pump_power:.10g}", f"{pt.gain:.10g}"])


def read_gain_csv(path) -> list[GainPoint]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [GainPoint(float(r["pump_w"]), float(r["gain"])) for r in rows]


def write_noise_csv(path, points: Iterable[NoisePoint]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(NOISE_HEADER)
        for pt in points:
            w.writerow([f"{pt.lo_power:.10g}", f"{pt.noise:.10g}"])


def read_noise_csv(path) -> list[NoisePoint]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [NoisePoint(float(r["lo_mw"]), float(r["noise_dbm"])) for r in rows]


def format_report(values: dict) -> str:
    """Flat key-value text report (one `key = value` line each)."""
    buf = io.StringIO()
    for key, val in values.items():
        if isinstance(val, float):
            buf.write(f"{key} = {val:.6g}\n")
        else:
            buf.write(f"{key} = {val}\n")
    return buf.getvalue()
