"""Discretization substrate, vibronic states, and elementary state algebra."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, Mapping, Tuple

import numpy as np
import scipy.constants as const
from scipy import fft

HBAR = 1.0
UNDEFINED = float("nan")
POPULATION_FLOOR = 1e-12
MIN_GRID_POINTS = 64


class GridError(ValueError):
    """Raised when a grid is malformed or does not match a state."""


class ResolutionError(GridError):
    """Raised when a grid cannot resolve the requested wavepacket."""


class RepresentationError(ValueError):
    """Raised when an operation receives a state in the wrong representation."""


class Representation(str, Enum):
    POSITION = "position"
    MOMENTUM = "momentum"


# (mass, length, time) exponents of each physical quantity.
_DIMENSIONS: Dict[str, Tuple[int, int, int]] = {
    "time": (0, 0, 1),
    "length": (0, 1, 0),
    "mass": (1, 0, 0),
    "energy": (1, 2, -2),
    "frequency": (0, 0, -1),
    "momentum": (1, 1, -1),
    "force": (1, 1, -2),
}

_FEMTOSECOND_DISPLAY: Dict[str, float] = {
    "time": const.femto,
    "length": const.angstrom,
    "mass": const.atomic_mass,
    "energy": const.electron_volt,
    "frequency": 1.0 / const.femto,
    "momentum": const.atomic_mass * const.angstrom / const.femto,
    "force": const.electron_volt / const.angstrom,
}


@dataclass(frozen=True)
class UnitSystem:
    """Internal units with hbar = 1 and the display units inputs are given in.

    ``time_unit``, ``length_unit`` and ``mass_unit`` are SI amounts per internal
    unit; ``display`` maps a quantity to SI amount per display unit.
    """

    name: str
    time_unit: float
    length_unit: float
    mass_unit: float
    display: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for label, value in (
            ("time_unit", self.time_unit),
            ("length_unit", self.length_unit),
            ("mass_unit", self.mass_unit),
        ):
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{label} must be a positive finite number, got {value}")
        for quantity, scale in self.display.items():
            if quantity not in _DIMENSIONS:
                raise ValueError(f"Unknown quantity '{quantity}' in display units")
            if not scale > 0:
                raise ValueError(f"Display scale for {quantity} must be positive")

    @classmethod
    def dimensionless(cls) -> "UnitSystem":
        return cls(name="dimensionless", time_unit=1.0, length_unit=1.0, mass_unit=1.0)

    @classmethod
    def femtosecond(cls, time_unit: float = 10 * const.femto, mass_unit: float = const.atomic_mass) -> "UnitSystem":
        """One internal time unit is 10 fs; the length unit follows from hbar = 1."""
        length_unit = math.sqrt(const.hbar * time_unit / mass_unit)
        return cls(
            name="femtosecond",
            time_unit=time_unit,
            length_unit=length_unit,
            mass_unit=mass_unit,
            display=dict(_FEMTOSECOND_DISPLAY),
        )

    @property
    def energy_unit(self) -> float:
        return self.mass_unit * self.length_unit**2 / self.time_unit**2

    def _internal_scale(self, quantity: str) -> float:
        try:
            mass_exp, length_exp, time_exp = _DIMENSIONS[quantity]
        except KeyError as exc:
            raise ValueError(f"Unknown quantity '{quantity}'") from exc
        return self.mass_unit**mass_exp * self.length_unit**length_exp * self.time_unit**time_exp

    def _display_scale(self, quantity: str) -> float:
        if not self.display:
            return self._internal_scale(quantity)
        return self.display[quantity]

    def to_internal(self, value: float, quantity: str) -> float:
        """Convert ``value`` from display units into internal units."""
        return value * (self._display_scale(quantity) / self._internal_scale(quantity))

    def to_physical(self, value: float, quantity: str) -> float:
        """Convert ``value`` from internal units into display units."""
        return value * (self._internal_scale(quantity) / self._display_scale(quantity))


@dataclass(frozen=True)
class Grid:
    """Uniform position lattice and its conjugate momentum lattice."""

    n: int
    x_min: float
    dx: float

    def __post_init__(self) -> None:
        if self.n < MIN_GRID_POINTS or self.n & (self.n - 1):
            raise GridError(f"Grid size must be a power of two >= {MIN_GRID_POINTS}, got {self.n}")
        if not (math.isfinite(self.dx) and self.dx > 0):
            raise GridError(f"Grid spacing must be positive, got {self.dx}")

    @property
    def extent(self) -> float:
        return self.n * self.dx

    @property
    def dp(self) -> float:
        return 2.0 * math.pi / (self.n * self.dx)

    @property
    def p_max(self) -> float:
        return math.pi / self.dx

    @cached_property
    def x(self) -> np.ndarray:
        values = self.x_min + self.dx * np.arange(self.n)
        values.setflags(write=False)
        return values

    @cached_property
    def p(self) -> np.ndarray:
        values = 2.0 * math.pi * HBAR * fft.fftfreq(self.n, d=self.dx)
        values.setflags(write=False)
        return values

    @cached_property
    def _origin_phase(self) -> np.ndarray:
        return np.exp(-1j * self.p * self.x_min / HBAR)

    def measure(self, rep: Representation) -> float:
        return self.dx if rep is Representation.POSITION else self.dp

    def to_momentum(self, values: np.ndarray) -> np.ndarray:
        """Unitary transform of position amplitudes onto the momentum lattice."""
        return fft.fft(values) * self._origin_phase * (self.dx / math.sqrt(2.0 * math.pi * HBAR))

    def to_position(self, values: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`to_momentum`."""
        return fft.ifft(values / self._origin_phase) * (math.sqrt(2.0 * math.pi * HBAR) / self.dx)


@dataclass(frozen=True, eq=False)
class VibronicState:
    """Ground and excited surface amplitudes sharing one grid and representation."""

    grid: Grid
    amp_g: np.ndarray
    amp_e: np.ndarray
    rep: Representation = Representation.POSITION

    def __post_init__(self) -> None:
        amp_g = np.array(self.amp_g, dtype=np.complex128)
        amp_e = np.array(self.amp_e, dtype=np.complex128)
        if amp_g.shape != (self.grid.n,) or amp_e.shape != (self.grid.n,):
            raise GridError(
                f"Amplitude arrays must have shape ({self.grid.n},), got {amp_g.shape} and {amp_e.shape}"
            )
        amp_g.setflags(write=False)
        amp_e.setflags(write=False)
        object.__setattr__(self, "amp_g", amp_g)
        object.__setattr__(self, "amp_e", amp_e)
        object.__setattr__(self, "rep", Representation(self.rep))

    @property
    def measure(self) -> float:
        return self.grid.measure(self.rep)

    @property
    def pop_g(self) -> float:
        return float(np.vdot(self.amp_g, self.amp_g).real * self.measure)

    @property
    def pop_e(self) -> float:
        return float(np.vdot(self.amp_e, self.amp_e).real * self.measure)

    @property
    def norm(self) -> float:
        return self.pop_g + self.pop_e

    def replace(self, amp_g: np.ndarray, amp_e: np.ndarray) -> "VibronicState":
        return VibronicState(self.grid, amp_g, amp_e, self.rep)

    def require(self, rep: Representation) -> None:
        if self.rep is not rep:
            raise RepresentationError(f"Expected a state in {rep.value} representation, got {self.rep.value}")


@dataclass(frozen=True)
class GaussianSpec:
    """Harmonic ground state of mass ``m`` and frequency ``omega``, displaced to (x0, p0)."""

    m: float
    omega: float
    x0: float = 0.0
    p0: float = 0.0

    def __post_init__(self) -> None:
        if not self.m > 0:
            raise ValueError(f"Mass must be positive, got {self.m}")
        if not self.omega > 0:
            raise ValueError(f"Frequency must be positive, got {self.omega}")

    @property
    def sigma_x(self) -> float:
        return math.sqrt(HBAR / (2.0 * self.m * self.omega))

    @property
    def sigma_p(self) -> float:
        return math.sqrt(self.m * HBAR * self.omega / 2.0)

    def amplitude(self, x: np.ndarray) -> np.ndarray:
        mw = self.m * self.omega
        prefactor = (mw / (math.pi * HBAR)) ** 0.25
        return prefactor * np.exp(-mw * (x - self.x0) ** 2 / (2.0 * HBAR) + 1j * self.p0 * x / HBAR)


@dataclass(frozen=True)
class Expectations:
    """Per-surface populations and population-normalized means (NaN when empty)."""

    pop_g: float
    pop_e: float
    x_g: float
    p_g: float
    x_e: float
    p_e: float

    @property
    def norm(self) -> float:
        return self.pop_g + self.pop_e

    def to_dict(self) -> Dict[str, float]:
        return {
            "pop_g": self.pop_g,
            "pop_e": self.pop_e,
            "x_g": self.x_g,
            "p_g": self.p_g,
            "x_e": self.x_e,
            "p_e": self.p_e,
        }


def make_grid(n: int, x_extent: float) -> Grid:
    """Grid of ``n`` nodes centered on the origin spanning ``x_extent``."""
    if not (math.isfinite(x_extent) and x_extent > 0):
        raise GridError(f"Grid extent must be positive, got {x_extent}")
    return Grid(n=int(n), x_min=-x_extent / 2.0, dx=x_extent / n)


def check_resolution(grid: Grid, sigma_x: float) -> None:
    """Raise ResolutionError unless dx <= sigma_x/4 and extent >= 12 sigma_x."""
    if grid.dx > sigma_x / 4.0:
        raise ResolutionError(
            f"Grid spacing {grid.dx:.4g} exceeds sigma_x/4 = {sigma_x / 4.0:.4g}; increase n"
        )
    if grid.extent < 12.0 * sigma_x:
        raise ResolutionError(
            f"Grid extent {grid.extent:.4g} is below 12 sigma_x = {12.0 * sigma_x:.4g}; enlarge the grid"
        )


def ground_gaussian(grid: Grid, m: float, omega: float, x0: float = 0.0, p0: float = 0.0) -> VibronicState:
    """Harmonic ground-state packet on the ground surface, in position representation."""
    spec = GaussianSpec(m=m, omega=omega, x0=x0, p0=p0)
    check_resolution(grid, spec.sigma_x)
    amp_g = spec.amplitude(grid.x)
    return VibronicState(grid, amp_g, np.zeros(grid.n, dtype=np.complex128), Representation.POSITION)


def change_representation(state: VibronicState, target: Representation | str) -> VibronicState:
    """Move both surface amplitudes into ``target`` representation."""
    target = Representation(target)
    if state.rep is target:
        return state
    grid = state.grid
    if target is Representation.MOMENTUM:
        return VibronicState(grid, grid.to_momentum(state.amp_g), grid.to_momentum(state.amp_e), target)
    return VibronicState(grid, grid.to_position(state.amp_g), grid.to_position(state.amp_e), target)


def _check_compatible(a: VibronicState, b: VibronicState) -> None:
    if a.grid != b.grid:
        raise GridError("States live on different grids")
    if a.rep is not b.rep:
        raise RepresentationError(f"States are in different representations ({a.rep.value} vs {b.rep.value})")


def overlap(a: VibronicState, b: VibronicState) -> complex:
    """Inner product <a|b> summed over both surfaces."""
    _check_compatible(a, b)
    total = np.vdot(a.amp_g, b.amp_g) + np.vdot(a.amp_e, b.amp_e)
    return complex(total * a.measure)


def _mean(weights: np.ndarray, values: np.ndarray, population: float, measure: float) -> float:
    if population < POPULATION_FLOOR:
        return UNDEFINED
    return float(np.dot(weights, values) * measure / population)


def expectations(state: VibronicState) -> Expectations:
    """Populations and per-surface <x>, <p> of ``state``."""
    grid = state.grid
    if state.rep is Representation.POSITION:
        pos = state
        mom = change_representation(state, Representation.MOMENTUM)
    else:
        mom = state
        pos = change_representation(state, Representation.POSITION)
    dens_g_x = np.abs(pos.amp_g) ** 2
    dens_e_x = np.abs(pos.amp_e) ** 2
    dens_g_p = np.abs(mom.amp_g) ** 2
    dens_e_p = np.abs(mom.amp_e) ** 2
    pop_g = float(dens_g_x.sum() * grid.dx)
    pop_e = float(dens_e_x.sum() * grid.dx)
    return Expectations(
        pop_g=pop_g,
        pop_e=pop_e,
        x_g=_mean(dens_g_x, grid.x, pop_g, grid.dx),
        p_g=_mean(dens_g_p, grid.p, pop_g, grid.dp),
        x_e=_mean(dens_e_x, grid.x, pop_e, grid.dx),
        p_e=_mean(dens_e_p, grid.p, pop_e, grid.dp),
    )
