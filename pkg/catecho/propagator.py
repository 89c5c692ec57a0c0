"""Split-operator propagation of the two-surface wavepacket through a pulse schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import fft

from .core import (
    HBAR,
    Expectations,
    Grid,
    Representation,
    VibronicState,
    change_representation,
    expectations,
    ground_gaussian,
)
from .model import ModelParams, PulseShape, Schedule, ScheduleError, effective_potentials, impulse_matrix
from .observables import polarization

PHASE_CYCLE: Tuple[float, ...] = tuple(k * math.pi / 2.0 for k in range(4))
EDGE_FRACTION = 64
EDGE_TOLERANCE = 1e-8
INCOHERENT_PHASES = 64


class WraparoundError(RuntimeError):
    """Raised when density reaches the periodic boundary of either lattice."""


@dataclass
class TimeSeries:
    """Observables recorded along one run."""

    times: np.ndarray
    polarization: np.ndarray
    pop_g: np.ndarray
    pop_e: np.ndarray
    x_g: np.ndarray
    p_g: np.ndarray
    x_e: np.ndarray
    p_e: np.ndarray
    norm: np.ndarray
    max_edge_density: float = 0.0
    final_state: Optional[VibronicState] = None

    def __post_init__(self) -> None:
        lengths = {len(getattr(self, name)) for name in self.columns()}
        if len(lengths) > 1:
            raise ValueError(f"TimeSeries columns have mismatched lengths: {sorted(lengths)}")

    @staticmethod
    def columns() -> Tuple[str, ...]:
        return ("times", "polarization", "pop_g", "pop_e", "x_g", "p_g", "x_e", "p_e", "norm")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.polarization) ** 2

    @property
    def max_norm_drift(self) -> float:
        return float(np.max(np.abs(self.norm - 1.0))) if len(self) else 0.0

    def with_polarization(self, values: np.ndarray) -> "TimeSeries":
        return replace(self, polarization=np.asarray(values, dtype=np.complex128))

    def shifted(self, offset: float) -> "TimeSeries":
        return replace(self, times=self.times + offset)


@dataclass
class TimeSeriesRecorder:
    rows: Dict[str, List] = field(default_factory=lambda: {name: [] for name in TimeSeries.columns()})
    max_edge_density: float = 0.0

    def add(self, t: float, p_value: complex, stats: Expectations, norm: float, edge: float = 0.0) -> None:
        values = {
            "times": t,
            "polarization": p_value,
            "pop_g": stats.pop_g,
            "pop_e": stats.pop_e,
            "x_g": stats.x_g,
            "p_g": stats.p_g,
            "x_e": stats.x_e,
            "p_e": stats.p_e,
            "norm": norm,
        }
        for name, value in values.items():
            self.rows[name].append(value)
        self.max_edge_density = max(self.max_edge_density, edge)

    def build(self, final_state: Optional[VibronicState] = None) -> TimeSeries:
        arrays = {
            name: np.asarray(values, dtype=np.complex128 if name == "polarization" else float)
            for name, values in self.rows.items()
        }
        return TimeSeries(**arrays, max_edge_density=self.max_edge_density, final_state=final_state)


class SplitOperatorPropagator:
    """Precomputed phase factors for fixed grid, model, step and frame.

    ``frame_offset`` is subtracted from the excited surface (V_E0 for the rotating frame).
    """

    def __init__(self, grid: Grid, params: ModelParams, dt: float, frame_offset: float = 0.0) -> None:
        self.grid = grid
        self.params = params
        self.dt = dt
        self.frame_offset = frame_offset
        v_g, v_e = effective_potentials(params, grid.x)
        self.v_g = v_g
        self.v_e = v_e - frame_offset
        self.potential_g = np.exp(-1j * self.v_g * dt / HBAR)
        self.potential_e = np.exp(-1j * self.v_e * dt / HBAR)
        if params.kinetic_enabled:
            self.kinetic_half: Optional[np.ndarray] = np.exp(-1j * grid.p**2 / (2.0 * params.m) * dt / (2.0 * HBAR))
        else:
            self.kinetic_half = None

    def kinetic(self, amp: np.ndarray) -> np.ndarray:
        if self.kinetic_half is None:
            return amp
        return fft.ifft(fft.fft(amp) * self.kinetic_half)

    def step(self, amp_g: np.ndarray, amp_e: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        amp_g = self.kinetic(self.potential_g * self.kinetic(amp_g))
        amp_e = self.kinetic(self.potential_e * self.kinetic(amp_e))
        return amp_g, amp_e

    def coupled_potential(
        self, amp_g: np.ndarray, amp_e: np.ndarray, rabi: complex
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Pointwise exp(-iH dt) of the 2x2 surface Hamiltonian with off-diagonal -rabi/2."""
        dt = self.dt / HBAR
        coupling = -HBAR * rabi / 2.0
        h0 = 0.5 * (self.v_g + self.v_e)
        hz = 0.5 * (self.v_g - self.v_e)
        size = np.sqrt(hz**2 + abs(coupling) ** 2)
        cos = np.cos(size * dt)
        sin_over = dt * np.sinc(size * dt / math.pi)
        phase = np.exp(-1j * h0 * dt)
        u_gg = phase * (cos - 1j * sin_over * hz)
        u_ee = phase * (cos + 1j * sin_over * hz)
        u_ge = phase * (-1j * sin_over * coupling)
        u_eg = phase * (-1j * sin_over * np.conj(coupling))
        return u_gg * amp_g + u_ge * amp_e, u_eg * amp_g + u_ee * amp_e

    def coupled_step(
        self, amp_g: np.ndarray, amp_e: np.ndarray, rabi: complex
    ) -> Tuple[np.ndarray, np.ndarray]:
        amp_g, amp_e = self.kinetic(amp_g), self.kinetic(amp_e)
        amp_g, amp_e = self.coupled_potential(amp_g, amp_e, rabi)
        return self.kinetic(amp_g), self.kinetic(amp_e)


def split_step(state: VibronicState, dt: float, params: ModelParams) -> VibronicState:
    """One symmetric kinetic/potential/kinetic step."""
    state.require(Representation.POSITION)
    amp_g, amp_e = SplitOperatorPropagator(state.grid, params, dt).step(state.amp_g, state.amp_e)
    return state.replace(amp_g, amp_e)


def finite_pulse_step(state: VibronicState, dt: float, field: complex, params: ModelParams) -> VibronicState:
    """Split step whose potential half couples the surfaces through ``field`` (rotating frame)."""
    state.require(Representation.POSITION)
    propagator = SplitOperatorPropagator(state.grid, params, dt, frame_offset=params.v_e0)
    amp_g, amp_e = propagator.coupled_step(state.amp_g, state.amp_e, field)
    return state.replace(amp_g, amp_e)


def edge_density(grid: Grid, amp_g: np.ndarray, amp_e: np.ndarray) -> float:
    """Largest probability found in the outer 1/64 of either lattice."""
    width = max(1, grid.n // EDGE_FRACTION)
    dens_x = np.abs(amp_g) ** 2 + np.abs(amp_e) ** 2
    position = float((dens_x[:width].sum() + dens_x[-width:].sum()) * grid.dx)
    mom_g = np.abs(fft.fftshift(grid.to_momentum(amp_g))) ** 2
    mom_e = np.abs(fft.fftshift(grid.to_momentum(amp_e))) ** 2
    dens_p = mom_g + mom_e
    momentum = float((dens_p[:width].sum() + dens_p[-width:].sum()) * grid.dp)
    return max(position, momentum)


class ScheduleDriver:
    """Walks the step lattice of a schedule: pulses at boundaries, fields inside steps."""

    def __init__(self, params: ModelParams, schedule: Schedule, grid: Grid) -> None:
        self.params = params
        self.schedule = schedule
        self.grid = grid
        self.n_steps = schedule.n_steps
        self.frame_offset = params.v_e0 if schedule.has_finite_pulses else 0.0
        self.propagator = SplitOperatorPropagator(grid, params, schedule.dt, self.frame_offset)
        self.kicks: Dict[int, List[np.ndarray]] = {}
        self.finite = [pulse for pulse in schedule.pulses if pulse.shape is PulseShape.GAUSSIAN]
        marks = set()
        for pulse in schedule.pulses:
            k = min(max(schedule.step_index(pulse.t_center), 0), self.n_steps)
            marks.add(k)
            if pulse.shape is PulseShape.DELTA:
                self.kicks.setdefault(k, []).append(impulse_matrix(pulse.area, pulse.phase))
        for t in schedule.mark_times:
            k = schedule.step_index(t)
            if 0 <= k <= self.n_steps:
                marks.add(k)
        strided = set(range(0, self.n_steps + 1, schedule.record_stride))
        self.record_steps = strided | marks | {0, self.n_steps}

    def first_kick(self) -> int:
        if not self.kicks:
            raise ScheduleError("Schedule has no delta pulse to split at")
        return min(self.kicks)

    def kick(self, amp_g: np.ndarray, amp_e: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
        for matrix in self.kicks.get(k, ()):
            amp_g, amp_e = (
                matrix[0, 0] * amp_g + matrix[0, 1] * amp_e,
                matrix[1, 0] * amp_g + matrix[1, 1] * amp_e,
            )
        return amp_g, amp_e

    def step(self, amp_g: np.ndarray, amp_e: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
        t_mid = self.schedule.time_at(k) + 0.5 * self.schedule.dt
        rabi = sum((pulse.field(t_mid) for pulse in self.finite), 0.0j)
        if rabi != 0:
            return self.propagator.coupled_step(amp_g, amp_e, rabi)
        return self.propagator.step(amp_g, amp_e)

    def time(self, k: int) -> float:
        return self.schedule.time_at(k)

    def lab_phase(self, k: int) -> complex:
        """Factor turning rotating-frame P into lab-frame P."""
        if not self.frame_offset:
            return 1.0 + 0.0j
        return complex(np.exp(1j * self.frame_offset * (self.time(k) - self.schedule.t_start) / HBAR))

    def check_edges(self, amp_g: np.ndarray, amp_e: np.ndarray, k: int) -> float:
        edge = edge_density(self.grid, amp_g, amp_e)
        if edge > EDGE_TOLERANCE:
            raise WraparoundError(
                f"Density {edge:.3g} reached the lattice edge at t={self.time(k):.6g}; "
                "enlarge the grid extent or the number of points"
            )
        return edge


def _initial(params: ModelParams, grid: Grid, initial: Optional[VibronicState]) -> VibronicState:
    if initial is None:
        return ground_gaussian(grid, params.m, params.omega)
    if initial.grid != grid:
        raise ScheduleError("Initial state lives on a different grid")
    return change_representation(initial, Representation.POSITION)


def run_schedule(
    params: ModelParams,
    schedule: Schedule,
    phi: Optional[float],
    grid: Grid,
    *,
    initial: Optional[VibronicState] = None,
    check_stability: bool = True,
    p0: float = 0.0,
) -> TimeSeries:
    """Propagate the ground packet through ``schedule`` with every pulse area set to ``phi``.

    ``phi=None`` keeps the areas stored in the schedule. Observables at pulse
    boundaries are taken after the pulse.
    """
    if phi is not None:
        schedule = schedule.with_areas(phi)
    if check_stability:
        schedule.check_stability(params, p0=p0)
    driver = ScheduleDriver(params, schedule, grid)
    state = _initial(params, grid, initial)
    amp_g, amp_e = np.array(state.amp_g), np.array(state.amp_e)
    recorder = TimeSeriesRecorder()
    for k in range(driver.n_steps + 1):
        amp_g, amp_e = driver.kick(amp_g, amp_e, k)
        if k in driver.record_steps:
            edge = driver.check_edges(amp_g, amp_e, k)
            snapshot = VibronicState(grid, amp_g, amp_e)
            recorder.add(
                driver.time(k),
                polarization(snapshot) * driver.lab_phase(k),
                expectations(snapshot),
                snapshot.norm,
                edge,
            )
        if k < driver.n_steps:
            amp_g, amp_e = driver.step(amp_g, amp_e, k)
    return recorder.build(final_state=VibronicState(grid, amp_g, amp_e))


def run_phase_cycled(
    params: ModelParams,
    schedule: Schedule,
    phi: Optional[float],
    grid: Grid,
    *,
    check_stability: bool = True,
) -> TimeSeries:
    """Four runs with the first pulse phase advanced by k*pi/2; keeps the echo term only.

    The echo contribution carries exp(i(2 theta_2 - theta_1)); weighting run k by
    exp(i k pi/2) and averaging cancels every term linear in a single pulse phase.
    """
    if len(schedule.pulses) < 2:
        raise ScheduleError("Phase cycling needs at least two pulses")
    runs: List[TimeSeries] = []
    for shift in PHASE_CYCLE:
        first = schedule.pulses[0]
        cycled = schedule.with_pulses((replace(first, phase=first.phase + shift),) + schedule.pulses[1:])
        runs.append(run_schedule(params, cycled, phi, grid, check_stability=check_stability))
    combined = sum(run.polarization * np.exp(1j * k * math.pi / 2.0) for k, run in enumerate(runs)) / len(runs)
    return runs[0].with_polarization(combined)


def _mixture_expectations(branches: Sequence[VibronicState]) -> Tuple[Expectations, float]:
    stats = [expectations(branch) for branch in branches]
    pop_g = sum(s.pop_g for s in stats)
    pop_e = sum(s.pop_e for s in stats)

    def weighted(attr: str, pop_attr: str, total: float) -> float:
        parts = [(getattr(s, pop_attr), getattr(s, attr)) for s in stats if getattr(s, pop_attr) > 0]
        parts = [(w, v) for w, v in parts if not math.isnan(v)]
        if not parts or total <= 0:
            return float("nan")
        return sum(w * v for w, v in parts) / total

    mixed = Expectations(
        pop_g=pop_g,
        pop_e=pop_e,
        x_g=weighted("x_g", "pop_g", pop_g),
        p_g=weighted("p_g", "pop_g", pop_g),
        x_e=weighted("x_e", "pop_e", pop_e),
        p_e=weighted("p_e", "pop_e", pop_e),
    )
    return mixed, sum(branch.norm for branch in branches)


def run_incoherent_control(
    params: ModelParams,
    schedule: Schedule,
    phi: Optional[float],
    grid: Grid,
    *,
    phases: int = INCOHERENT_PHASES,
    seed: int = 0,
    check_stability: bool = True,
) -> TimeSeries:
    """Echo control without cross-branch coherence.

    After the first (delta) pulse the state is split into its ground and
    excited branches; both are propagated separately and P of their
    superposition is averaged over ``phases`` relative branch phases.
    """
    if phases < 2:
        raise ValueError(f"Need at least 2 phases, got {phases}")
    if phi is not None:
        schedule = schedule.with_areas(phi)
    if check_stability:
        schedule.check_stability(params)
    driver = ScheduleDriver(params, schedule, grid)
    split_at = driver.first_kick()
    offset = float(np.random.default_rng(seed).uniform(0.0, 2.0 * math.pi / phases))
    chis = offset + 2.0 * math.pi * np.arange(phases) / phases
    rotations = np.exp(1j * chis)

    state = _initial(params, grid, None)
    branches: List[Tuple[np.ndarray, np.ndarray]] = [(np.array(state.amp_g), np.array(state.amp_e))]
    recorder = TimeSeriesRecorder()
    for k in range(driver.n_steps + 1):
        branches = [driver.kick(g, e, k) for g, e in branches]
        if k == split_at and len(branches) == 1:
            g, e = branches[0]
            zeros = np.zeros_like(g)
            branches = [(g, zeros), (zeros.copy(), e)]
        if k in driver.record_steps:
            edge = max(driver.check_edges(g, e, k) for g, e in branches)
            snapshots = [VibronicState(grid, g, e) for g, e in branches]
            if len(snapshots) == 2:
                a, b = snapshots
                direct = polarization(a) + polarization(b)
                cross_ab = complex(np.vdot(a.amp_e, b.amp_g) * grid.dx)
                cross_ba = complex(np.vdot(b.amp_e, a.amp_g) * grid.dx)
                # branch b enters with exp(i chi); its cross terms carry exp(+-i chi).
                p_values = direct + rotations * cross_ab + np.conj(rotations) * cross_ba
                p_value = complex(np.mean(p_values))
            else:
                p_value = polarization(snapshots[0])
            stats, norm = _mixture_expectations(snapshots)
            recorder.add(driver.time(k), p_value * driver.lab_phase(k), stats, norm, edge)
        if k < driver.n_steps:
            branches = [driver.step(g, e, k) for g, e in branches]
    return recorder.build()
