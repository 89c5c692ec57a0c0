"""Physical model: potential surfaces, pulses, schedules and impulsive rotations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .core import HBAR, Grid, GaussianSpec, Representation, ResolutionError, VibronicState, make_grid

TWO_PI = 2.0 * math.pi
STEPS_PER_PERIOD = 20
DEFAULT_GRID_POINTS = 4096
PULSE_SUPPORT_SIGMAS = 6.0
MIN_STEPS_PER_DELAY = 8
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))

ArrayLike = Union[float, np.ndarray]


class ModelError(ValueError):
    """Raised for invalid model parameters or pulses."""


class ScheduleError(ModelError):
    """Raised when a pulse schedule violates its invariants."""


class StabilityError(ScheduleError):
    """Raised when the time step exceeds the split-operator stability bound."""


class PulseShape(str, Enum):
    DELTA = "delta"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class ModelParams:
    """Two-surface model: harmonic ground surface, sloped (optionally curved) excited surface."""

    m: float = 1.0
    omega: float = 1.0
    force: float = 0.0
    v_e0: float = 0.0
    omega_e: float = 0.0
    kinetic_enabled: bool = True

    def __post_init__(self) -> None:
        if not (math.isfinite(self.m) and self.m > 0):
            raise ModelError(f"Mass must be positive, got {self.m}")
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise ModelError(f"Ground frequency must be positive, got {self.omega}")
        if not (math.isfinite(self.omega_e) and self.omega_e >= 0):
            raise ModelError(f"Excited-surface frequency must be >= 0, got {self.omega_e}")
        if not math.isfinite(self.force):
            raise ModelError(f"Force must be finite, got {self.force}")
        if not math.isfinite(self.v_e0):
            raise ModelError(f"Vertical offset must be finite, got {self.v_e0}")

    @property
    def ground_spec(self) -> GaussianSpec:
        return GaussianSpec(m=self.m, omega=self.omega)

    @property
    def sigma_x(self) -> float:
        return self.ground_spec.sigma_x

    @property
    def sigma_p(self) -> float:
        return self.ground_spec.sigma_p

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "omega": self.omega,
            "force": self.force,
            "v_e0": self.v_e0,
            "omega_e": self.omega_e,
            "kinetic_enabled": self.kinetic_enabled,
        }


@dataclass(frozen=True)
class PulseEvent:
    """One excitation pulse of area ``area`` and phase ``phase`` centered at ``t_center``."""

    t_center: float
    area: float
    phase: float = 0.0
    shape: PulseShape = PulseShape.DELTA
    fwhm: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "shape", PulseShape(self.shape))
        if not (0.0 <= self.area <= TWO_PI):
            raise ModelError(f"Pulse area must lie in [0, 2pi], got {self.area}")
        if not math.isfinite(self.phase):
            raise ModelError(f"Pulse phase must be finite, got {self.phase}")
        if self.shape is PulseShape.GAUSSIAN:
            if self.fwhm is None or not self.fwhm > 0:
                raise ModelError(f"Gaussian pulses need fwhm > 0, got {self.fwhm}")

    @property
    def sigma_t(self) -> float:
        if self.fwhm is None:
            return 0.0
        return self.fwhm / FWHM_PER_SIGMA

    @property
    def half_support(self) -> float:
        return PULSE_SUPPORT_SIGMAS * self.sigma_t

    def rabi_frequency(self, t: ArrayLike) -> ArrayLike:
        """Real envelope Omega_R(t) whose time integral equals the pulse area."""
        if self.shape is PulseShape.DELTA:
            raise ModelError("Delta pulses have no finite envelope")
        sigma = self.sigma_t
        scale = self.area / (math.sqrt(TWO_PI) * sigma)
        return scale * np.exp(-((np.asarray(t) - self.t_center) ** 2) / (2.0 * sigma**2))

    def field(self, t: float) -> complex:
        """Complex Rabi amplitude Omega_R(t) e^{i phase} at time ``t``."""
        if abs(t - self.t_center) > self.half_support:
            return 0.0j
        return complex(self.rabi_frequency(t)) * complex(math.cos(self.phase), math.sin(self.phase))

    def to_dict(self) -> dict:
        return {
            "t_center": self.t_center,
            "area": self.area,
            "phase": self.phase,
            "shape": self.shape.value,
            "fwhm": self.fwhm,
        }


@dataclass(frozen=True)
class Schedule:
    """Ordered pulses on the step lattice t_start + k*dt."""

    pulses: Tuple[PulseEvent, ...]
    t_start: float
    t_end: float
    dt: float
    record_stride: int = 1
    mark_times: Tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "pulses", tuple(self.pulses))
        object.__setattr__(self, "mark_times", tuple(self.mark_times))
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ScheduleError(f"Time step must be positive, got {self.dt}")
        if not self.t_end > self.t_start:
            raise ScheduleError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        if self.record_stride < 1:
            raise ScheduleError(f"record_stride must be >= 1, got {self.record_stride}")
        previous: Optional[float] = None
        for pulse in self.pulses:
            if not (self.t_start <= pulse.t_center <= self.t_end):
                raise ScheduleError(
                    f"Pulse at t={pulse.t_center} lies outside [{self.t_start}, {self.t_end}]"
                )
            if previous is not None and not pulse.t_center > previous:
                raise ScheduleError("Pulses must be strictly ordered in time")
            previous = pulse.t_center
            if pulse.shape is PulseShape.GAUSSIAN and self.dt > pulse.fwhm / 10.0:  # type: ignore[operator]
                raise StabilityError(
                    f"Time step {self.dt:.4g} does not resolve a pulse of fwhm {pulse.fwhm:.4g} (need dt <= fwhm/10)"
                )

    @property
    def n_steps(self) -> int:
        return max(1, int(math.ceil((self.t_end - self.t_start) / self.dt - 1e-9)))

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def has_finite_pulses(self) -> bool:
        return any(pulse.shape is PulseShape.GAUSSIAN for pulse in self.pulses)

    def time_at(self, step: int) -> float:
        return self.t_start + step * self.dt

    def step_index(self, t: float) -> int:
        """Nearest step boundary to time ``t``."""
        return int(round((t - self.t_start) / self.dt))

    def with_pulses(self, pulses: Sequence[PulseEvent]) -> "Schedule":
        return replace(self, pulses=tuple(pulses))

    def with_areas(self, area: float) -> "Schedule":
        return self.with_pulses([replace(pulse, area=area) for pulse in self.pulses])

    def check_stability(self, params: ModelParams, p0: float = 0.0) -> None:
        bound = max_stable_dt(params, self.duration, p0=p0)
        if self.dt > bound * (1.0 + 1e-12):
            raise StabilityError(
                f"Time step {self.dt:.4g} exceeds the stability bound {bound:.4g} "
                f"(1/{STEPS_PER_PERIOD} of the fastest period)"
            )

    def to_dict(self) -> dict:
        return {
            "pulses": [pulse.to_dict() for pulse in self.pulses],
            "t_start": self.t_start,
            "t_end": self.t_end,
            "dt": self.dt,
            "n_steps": self.n_steps,
            "record_stride": self.record_stride,
            "mark_times": list(self.mark_times),
        }


def potential_ground(params: ModelParams, x: ArrayLike) -> ArrayLike:
    """Harmonic ground surface 1/2 m Omega^2 x^2."""
    return 0.5 * params.m * params.omega**2 * np.asarray(x) ** 2


def potential_excited(params: ModelParams, x: ArrayLike) -> ArrayLike:
    """Excited surface V_E0 - F x + 1/2 m Omega_E^2 x^2."""
    x = np.asarray(x)
    return params.v_e0 - params.force * x + 0.5 * params.m * params.omega_e**2 * x**2


def effective_potentials(params: ModelParams, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Surfaces used by the propagator.

    With the kinetic term disabled the model is the impulsive-limit Hamiltonian:
    the ground surface is frozen at V_G(0) = 0.
    """
    v_e = np.asarray(potential_excited(params, x), dtype=float)
    if params.kinetic_enabled:
        v_g = np.asarray(potential_ground(params, x), dtype=float)
    else:
        v_g = np.zeros_like(v_e)
    return v_g, v_e


def impulse_matrix(phi: float, theta: float) -> np.ndarray:
    """2x2 rotation acting on (ground, excited) amplitudes."""
    c = math.cos(phi / 2.0)
    s = math.sin(phi / 2.0)
    up = 1j * complex(math.cos(theta), -math.sin(theta)) * s
    down = 1j * complex(math.cos(theta), math.sin(theta)) * s
    return np.array([[c, down], [up, c]], dtype=np.complex128)


def apply_impulse(state: VibronicState, phi: float, theta: float = 0.0) -> VibronicState:
    """Instantaneous pulse of area ``phi`` and phase ``theta`` at every node."""
    state.require(Representation.POSITION)
    matrix = impulse_matrix(phi, theta)
    amp_g = matrix[0, 0] * state.amp_g + matrix[0, 1] * state.amp_e
    amp_e = matrix[1, 0] * state.amp_g + matrix[1, 1] * state.amp_e
    return state.replace(amp_g, amp_e)


def momentum_band(params: ModelParams, duration: float, p0: float = 0.0) -> float:
    """Largest momentum a run of ``duration`` can populate."""
    return abs(p0) + abs(params.force) * duration + 6.0 * params.sigma_p


def max_stable_dt(params: ModelParams, duration: float, p0: float = 0.0) -> float:
    """Step bound: 1/20 of the fastest period among Omega, Omega_E and the kinetic band."""
    frequencies = [params.omega, params.omega_e]
    if params.kinetic_enabled:
        band = momentum_band(params, duration, p0)
        frequencies.append(band**2 / (2.0 * params.m * HBAR))
    fastest = max(frequencies)
    return TWO_PI / (STEPS_PER_PERIOD * fastest)


def classical_excursion(params: ModelParams, duration: float) -> float:
    if not params.kinetic_enabled:
        return 0.0
    return abs(params.force) * duration**2 / (2.0 * params.m)


def auto_grid(
    params: ModelParams,
    duration: float,
    n: int = DEFAULT_GRID_POINTS,
    x_extent: Optional[float] = None,
    p0: float = 0.0,
) -> Grid:
    """Grid wide enough for the ground packet plus the largest classical excursion."""
    sigma_x = params.sigma_x
    if x_extent is None:
        x_extent = 1.5 * (12.0 * sigma_x + 2.0 * classical_excursion(params, duration))
    grid = make_grid(n, x_extent)
    band = momentum_band(params, duration, p0)
    if grid.p_max < 1.2 * band:
        raise ResolutionError(
            f"Momentum lattice edge {grid.p_max:.4g} does not cover 1.2 x the populated band {band:.4g}; increase n"
        )
    return grid


def two_pulse_schedule(
    params: ModelParams,
    phi: float,
    tau: float,
    *,
    theta: float = 0.0,
    shape: PulseShape | str = PulseShape.DELTA,
    fwhm: Optional[float] = None,
    dt: Optional[float] = None,
    t_end: Optional[float] = None,
    record_stride: int = 1,
) -> Schedule:
    """Pulses at t0 - tau and t0 (t0 = 0) on a step lattice that hits both and t0 + tau.

    ``dt=None`` picks the largest step below the stability bound that divides tau
    into at least MIN_STEPS_PER_DELAY pieces.
    """
    if not tau > 0:
        raise ScheduleError(f"Delay must be positive, got {tau}")
    shape = PulseShape(shape)
    t_end = 2.0 * tau if t_end is None else t_end
    template = PulseEvent(t_center=0.0, area=phi, phase=theta, shape=shape, fwhm=fwhm)
    margin = template.half_support
    if dt is None:
        bound = max_stable_dt(params, t_end + tau + 2.0 * margin)
        if shape is PulseShape.GAUSSIAN:
            bound = min(bound, template.fwhm / 10.0)  # type: ignore[operator]
        dt = tau / max(math.ceil(tau / bound), MIN_STEPS_PER_DELAY)
    lead = math.ceil(margin / dt - 1e-9) * dt if margin else 0.0
    pulses = (
        PulseEvent(t_center=-tau, area=phi, phase=theta, shape=shape, fwhm=fwhm),
        PulseEvent(t_center=0.0, area=phi, phase=theta, shape=shape, fwhm=fwhm),
    )
    return Schedule(
        pulses=pulses,
        t_start=-tau - lead,
        t_end=t_end,
        dt=dt,
        record_stride=record_stride,
        mark_times=(tau,),
    )
