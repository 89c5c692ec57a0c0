"""Cross-surface polarization and echo detection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from .core import VibronicState

if TYPE_CHECKING:
    from .propagator import TimeSeries

BACKGROUND_FACTOR = 4.0
INTENSITY_FLOOR = 1e-12
EXCLUSION_SIGMAS = 3.0
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


class EchoWindowError(ValueError):
    """Raised when a time series does not cover the echo search window."""


@dataclass(frozen=True)
class EchoMeasurement:
    tau: float
    t_peak: float
    intensity: float
    background: float
    no_echo: bool
    sigma_t: Optional[float] = None
    rephasing_intensity: float = math.nan

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "t_peak": self.t_peak,
            "intensity": self.intensity,
            "rephasing_intensity": self.rephasing_intensity,
            "background": self.background,
            "no_echo": self.no_echo,
            "sigma_t": self.sigma_t,
        }


def polarization(state: VibronicState) -> complex:
    """P = sum conj(amp_e) * amp_g * measure; the same in either representation."""
    return complex(np.vdot(state.amp_e, state.amp_g) * state.measure)


def _refine_peak(t: np.ndarray, w: np.ndarray, i: int) -> tuple[float, float]:
    # Parabola through ln|P|^2 at the three samples around the maximum.
    if not (0 < i < len(w) - 1) or np.any(w[i - 1 : i + 2] <= 0):
        return float(t[i]), float(w[i])
    ts = t[i - 1 : i + 2] - t[i]
    a, b, c = np.polyfit(ts, np.log(w[i - 1 : i + 2]), 2)
    if not a < 0:
        return float(t[i]), float(w[i])
    vertex = -b / (2.0 * a)
    if not ts[0] <= vertex <= ts[2]:
        return float(t[i]), float(w[i])
    return float(t[i] + vertex), float(math.exp(a * vertex**2 + b * vertex + c))


def _half_max_width(t: np.ndarray, w: np.ndarray, i: int, peak: float) -> Optional[float]:
    half = peak / 2.0
    left = i
    while left > 0 and w[left - 1] >= half:
        left -= 1
    right = i
    while right < len(w) - 1 and w[right + 1] >= half:
        right += 1
    if left == 0 or right == len(w) - 1:
        return None
    t_left = np.interp(half, [w[left - 1], w[left]], [t[left - 1], t[left]])
    t_right = np.interp(half, [w[right + 1], w[right]], [t[right + 1], t[right]])
    return float(t_right - t_left)


def detect_echo(series: "TimeSeries", t0: float, tau: float) -> EchoMeasurement:
    """Locate the |P|^2 maximum in [t0 + tau/2, t0 + 3 tau/2].

    Background is the median |P|^2 of the window outside +-3 sigma_t of the
    peak, sigma_t taken from the half-maximum width. ``rephasing_intensity``
    is |P|^2 at t0 + tau itself, interpolated when that time is not sampled.
    """
    if not tau > 0:
        raise EchoWindowError(f"Delay must be positive, got {tau}")
    lo = t0 + 0.5 * tau
    hi = t0 + 1.5 * tau
    tol = 1e-9 * max(1.0, abs(t0) + abs(tau))
    times = np.asarray(series.times, dtype=float)
    if times.size == 0 or times[0] > lo + tol or times[-1] < hi - tol:
        span = f"[{times[0]:.6g}, {times[-1]:.6g}]" if times.size else "[]"
        raise EchoWindowError(f"Series {span} does not cover the echo window [{lo:.6g}, {hi:.6g}]")
    mask = (times >= lo - tol) & (times <= hi + tol)
    if mask.sum() < 3:
        raise EchoWindowError(f"Echo window [{lo:.6g}, {hi:.6g}] holds fewer than 3 samples")
    everywhere = np.abs(np.asarray(series.polarization)) ** 2
    rephasing = float(np.interp(t0 + tau, times, everywhere))
    t = times[mask]
    w = everywhere[mask]
    i = int(np.argmax(w))
    local = 0 < i < len(w) - 1
    t_peak, intensity = _refine_peak(t, w, i)
    width = _half_max_width(t, w, i, intensity) if local else None
    if width is None:
        sigma_t = None
        outside = np.zeros_like(w, dtype=bool)
    else:
        sigma_t = width / FWHM_PER_SIGMA
        outside = np.abs(t - t_peak) > EXCLUSION_SIGMAS * sigma_t
    background = float(np.median(w[outside])) if outside.any() else 0.0
    no_echo = (not local) or intensity < INTENSITY_FLOOR or intensity <= BACKGROUND_FACTOR * background
    return EchoMeasurement(
        tau=tau,
        t_peak=t_peak,
        intensity=intensity,
        background=background,
        no_echo=bool(no_echo),
        sigma_t=sigma_t,
        rephasing_intensity=rephasing,
    )
