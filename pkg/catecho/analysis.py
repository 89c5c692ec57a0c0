"""Delay sweeps, decay-law fits, exponent model selection and pipeline self-checks."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .analytic import (
    analytic_series,
    cat_after_two_pulses,
    component_weights,
    decay_coefficient,
)
from .core import (
    GridError,
    Grid,
    Representation,
    change_representation,
    ground_gaussian,
    make_grid,
    overlap,
)
from .model import (
    ModelError,
    ModelParams,
    PulseEvent,
    PulseShape,
    Schedule,
    auto_grid,
    max_stable_dt,
    two_pulse_schedule,
)
from .observables import EchoMeasurement, detect_echo
from .propagator import (
    WraparoundError,
    run_incoherent_control,
    run_phase_cycled,
    run_schedule,
)

ENGINES = ("impulsive", "full")
SIGNALS = ("phase_cycled", "raw")
MEASURES = ("rephasing", "peak")
MIN_FIT_ROWS = 6
Q_RANGE = (0.5, 8.0)
Q_SCAN_POINTS = 50
FLAT_SPREAD = 1e-9
MODEL_EXPONENTS = (1.0, 2.0, 4.0)
DECISIVE_MARGIN = 2.0
RESIDUAL_FLOOR = 1e-15
SEPARATION_SIGMAS = 6.0


class SweepError(ValueError):
    """Raised for an unusable delay list."""


class FitError(ValueError):
    """Raised when a sweep cannot be fitted."""


class RegimeWarning(UserWarning):
    """Delays outside the regime where the impulsive picture holds."""


@dataclass(frozen=True)
class SweepRow:
    tau: float
    intensity: float
    t_peak: float
    no_echo: bool
    background: float = 0.0
    peak_intensity: float = math.nan

    @classmethod
    def from_measurement(cls, measurement: EchoMeasurement, measure: str = "rephasing") -> "SweepRow":
        """``measure`` picks the fitted intensity: |P(t0 + tau)|^2 or the window maximum."""
        intensity = measurement.rephasing_intensity if measure == "rephasing" else measurement.intensity
        return cls(
            tau=measurement.tau,
            intensity=intensity,
            peak_intensity=measurement.intensity,
            t_peak=measurement.t_peak,
            no_echo=measurement.no_echo,
            background=measurement.background,
        )


@dataclass
class SweepResult:
    rows: List[SweepRow]
    params: Optional[ModelParams] = None
    phi: float = math.pi / 2.0
    engine: str = "full"
    signal: str = "phase_cycled"
    measure: str = "rephasing"
    warnings: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        taus = [row.tau for row in self.rows]
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise SweepError("Sweep delays must be strictly increasing")

    @classmethod
    def from_arrays(cls, taus: Sequence[float], intensities: Sequence[float], **kwargs) -> "SweepResult":
        rows = [
            SweepRow(tau=float(t), intensity=float(i), t_peak=float(t), no_echo=False)
            for t, i in zip(taus, intensities)
        ]
        return cls(rows=rows, **kwargs)

    @property
    def taus(self) -> np.ndarray:
        return np.array([row.tau for row in self.rows])

    @property
    def intensities(self) -> np.ndarray:
        return np.array([row.intensity for row in self.rows])

    def usable(self) -> Tuple[np.ndarray, np.ndarray]:
        rows = [row for row in self.rows if not row.no_echo]
        if len(rows) < MIN_FIT_ROWS:
            raise FitError(f"Need at least {MIN_FIT_ROWS} echo rows to fit, got {len(rows)}")
        intensities = np.array([row.intensity for row in rows])
        if np.any(intensities <= 0) or not np.all(np.isfinite(intensities)):
            raise FitError("All fitted intensities must be positive and finite")
        return np.array([row.tau for row in rows]), intensities

    def to_dict(self) -> dict:
        return {
            "engine": self.engine,
            "signal": self.signal,
            "measure": self.measure,
            "phi": self.phi,
            "params": self.params.to_dict() if self.params else None,
            "rows": [row.__dict__.copy() for row in self.rows],
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class DecayFit:
    """ln I = ln I0 - c tau^q fitted over the usable sweep rows."""

    i0: float
    c: float
    q: float
    residual: float
    c_fixed_q4: float
    i0_fixed_q4: float
    residual_q4: float
    n_rows: int
    indeterminate: bool = False
    profile_unimodal: bool = True

    def to_dict(self) -> dict:
        return {
            "I0": self.i0,
            "c": self.c,
            "q": self.q,
            "residual": self.residual,
            "c_fixed_q4": self.c_fixed_q4,
            "I0_fixed_q4": self.i0_fixed_q4,
            "residual_q4": self.residual_q4,
            "n_rows": self.n_rows,
            "indeterminate": self.indeterminate,
            "profile_unimodal": self.profile_unimodal,
        }


@dataclass(frozen=True)
class ModelEntry:
    q: float
    i0: float
    c: float
    residual: float


@dataclass(frozen=True)
class ModelComparison:
    entries: Tuple[ModelEntry, ...]
    winner: Optional[float]
    margin: float
    decisive: bool
    indeterminate: bool

    def to_dict(self) -> dict:
        return {
            "models": [entry.__dict__.copy() for entry in self.entries],
            "winner": self.winner,
            "margin": self.margin,
            "decisive": self.decisive,
            "indeterminate": self.indeterminate,
        }


@dataclass(frozen=True)
class MonteCarloSummary:
    median_c: float
    median_q: float
    median_c_fixed_q4: float
    repeats: int
    noise: float
    seed: int

    def to_dict(self) -> dict:
        return self.__dict__.copy()


@dataclass(frozen=True)
class EchoSuppression:
    coherent: float
    incoherent: float

    @property
    def ratio(self) -> float:
        if self.incoherent <= 0:
            return math.inf
        return self.coherent / self.incoherent

    def to_dict(self) -> dict:
        return {"coherent": self.coherent, "incoherent": self.incoherent, "ratio": self.ratio}


@dataclass(frozen=True)
class CheckResult:
    code: str
    passed: bool
    measured: float
    threshold: float
    detail: str = ""

    def to_dict(self) -> dict:
        return self.__dict__.copy()


@dataclass
class ValidationReport:
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failed(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "passed": len(self.checks) - len(self.failed),
            "failed": len(self.failed),
            "checks": [check.to_dict() for check in self.checks],
        }


# --- delay sweeps -----------------------------------------------------------


def propose_tau_window(
    params: ModelParams, points: int = 10, lo: float = 0.95, hi: float = 0.2
) -> List[float]:
    """Delays whose predicted I/I0 runs evenly from ``lo`` down to ``hi``."""
    if points < 2:
        raise SweepError(f"Need at least 2 points, got {points}")
    if not 0 < hi < lo < 1:
        raise SweepError(f"Intensity bounds must satisfy 0 < hi < lo < 1, got lo={lo}, hi={hi}")
    coefficient = decay_coefficient(params)
    if coefficient <= 0:
        raise SweepError("No decay without a force: cannot invert the decay law")
    tau_lo = (-math.log(lo) / coefficient) ** 0.25
    tau_hi = (-math.log(hi) / coefficient) ** 0.25
    return [float(t) for t in np.linspace(tau_lo, tau_hi, points)]


def regime_warnings(params: ModelParams, taus: Sequence[float]) -> List[str]:
    messages = []
    tau_max = max(taus)
    tau_min = min(taus)
    if params.omega * tau_max > 1.0:
        messages.append(f"Omega*tau_max = {params.omega * tau_max:.3g} exceeds 1; the impulsive picture breaks down")
    separation = abs(params.force) * tau_min
    if separation < SEPARATION_SIGMAS * params.sigma_p:
        messages.append(
            f"F*tau_min = {separation:.3g} is below {SEPARATION_SIGMAS:g} sigma_p = "
            f"{SEPARATION_SIGMAS * params.sigma_p:.3g}; echo overlaps free-induction decay"
        )
    return messages


def _sweep_grid(params: ModelParams, taus: Sequence[float], n: int, lead: float) -> Grid:
    return auto_grid(params, 3.0 * max(taus) + lead, n=n)


def measure_echo(
    params: ModelParams,
    phi: float,
    tau: float,
    grid: Grid,
    *,
    engine: str = "full",
    signal: str = "phase_cycled",
    theta: float = 0.0,
    shape: PulseShape | str = PulseShape.DELTA,
    fwhm: Optional[float] = None,
    dt: Optional[float] = None,
) -> EchoMeasurement:
    """One two-pulse experiment at delay ``tau`` reduced to its echo measurement."""
    schedule = two_pulse_schedule(params, phi, tau, theta=theta, shape=shape, fwhm=fwhm, dt=dt)
    cycled = signal == "phase_cycled"
    if engine == "impulsive":
        steps = int(round(schedule.t_end / schedule.dt))
        times = schedule.dt * np.arange(steps + 1)
        series = analytic_series(phi, tau, params, grid, times, theta=theta, phase_cycled=cycled)
    elif cycled:
        series = run_phase_cycled(params, schedule, phi, grid)
    else:
        series = run_schedule(params, schedule, phi, grid)
    return detect_echo(series, 0.0, tau)


def sweep_tau(
    params: ModelParams,
    phi: float,
    tau_values: Sequence[float],
    engine: str = "full",
    grid: Optional[Grid] = None,
    *,
    n: int = 4096,
    signal: str = "phase_cycled",
    measure: str = "rephasing",
    theta: float = 0.0,
    shape: PulseShape | str = PulseShape.DELTA,
    fwhm: Optional[float] = None,
    dt: Optional[float] = None,
    workers: int = 1,
    on_row: Optional[Callable[[SweepRow], None]] = None,
) -> SweepResult:
    """Echo intensity for each delay; rows come back in increasing tau.

    The default ``measure="rephasing"`` records |P|^2 at t0 + tau. With the kinetic
    term on the echo maximum arrives early by about 2 Omega^2 tau^3, so ``"peak"``
    folds part of the decay back in and fits a smaller exponent.
    """
    if engine not in ENGINES:
        raise SweepError(f"Unknown engine {engine!r}; expected one of {', '.join(ENGINES)}")
    if signal not in SIGNALS:
        raise SweepError(f"Unknown signal {signal!r}; expected one of {', '.join(SIGNALS)}")
    if measure not in MEASURES:
        raise SweepError(f"Unknown measure {measure!r}; expected one of {', '.join(MEASURES)}")
    taus = sorted(float(t) for t in tau_values)
    if not taus:
        raise SweepError("Delay list is empty")
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise SweepError("Delay list contains duplicates")
    if taus[0] <= 0:
        raise SweepError(f"Delays must be positive, got {taus[0]}")

    notes = regime_warnings(params, taus)
    for note in notes:
        warnings.warn(note, RegimeWarning, stacklevel=2)

    if grid is None:
        lead = 0.0
        if PulseShape(shape) is PulseShape.GAUSSIAN and fwhm:
            lead = 2.0 * PulseEvent(0.0, phi, shape=shape, fwhm=fwhm).half_support
        grid = _sweep_grid(params, taus, n, lead)

    def one(tau: float) -> SweepRow:
        measurement = measure_echo(
            params, phi, tau, grid, engine=engine, signal=signal, theta=theta, shape=shape, fwhm=fwhm, dt=dt
        )
        row = SweepRow.from_measurement(measurement, measure)
        if on_row is not None:
            on_row(row)
        return row

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, taus))
    else:
        rows = [one(tau) for tau in taus]
    return SweepResult(
        rows=rows, params=params, phi=phi, engine=engine, signal=signal, measure=measure, warnings=notes
    )


# --- decay-law fits -----------------------------------------------------------


def _linear_fit(taus: np.ndarray, log_i: np.ndarray, q: float) -> Tuple[float, float, float]:
    """Least squares for (ln I0, c) at fixed q; returns (ln I0, c, sum of squares)."""
    design = np.column_stack([np.ones_like(taus), -(taus**q)])
    coeffs, *_ = np.linalg.lstsq(design, log_i, rcond=None)
    residuals = design @ coeffs - log_i
    return float(coeffs[0]), float(coeffs[1]), float(np.dot(residuals, residuals))


def _rms(sse: float, n: int) -> float:
    return math.sqrt(sse / n)


def _count_local_minima(values: np.ndarray) -> int:
    count = 0
    for i in range(len(values)):
        left = values[i - 1] if i > 0 else math.inf
        right = values[i + 1] if i < len(values) - 1 else math.inf
        if values[i] < left and values[i] < right:
            count += 1
    return count


def _search_exponent(taus: np.ndarray, log_i: np.ndarray) -> Tuple[float, bool]:
    def objective(q: float) -> float:
        return _linear_fit(taus, log_i, q)[2]

    qs = np.linspace(Q_RANGE[0], Q_RANGE[1], Q_SCAN_POINTS)
    profile = np.array([objective(q) for q in qs])
    unimodal = _count_local_minima(profile) <= 1
    best = int(np.argmin(profile))
    result = None
    if 0 < best < len(qs) - 1:
        try:
            result = minimize_scalar(
                objective,
                bracket=(qs[best - 1], qs[best], qs[best + 1]),
                method="golden",
                options={"xtol": 1e-12},
            )
        except ValueError:
            result = None
    if result is None or not (Q_RANGE[0] <= result.x <= Q_RANGE[1]):
        lo = qs[max(best - 1, 0)]
        hi = qs[min(best + 1, len(qs) - 1)]
        result = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    q = float(min(max(result.x, Q_RANGE[0]), Q_RANGE[1]))
    return q, unimodal


def fit_decay(sweep: SweepResult) -> DecayFit:
    """Free-exponent fit of ln I against tau plus the q=4 coefficient."""
    taus, intensities = sweep.usable()
    log_i = np.log(intensities)
    n = len(taus)
    ln_i0_4, c_4, sse_4 = _linear_fit(taus, log_i, 4.0)
    if float(np.ptp(log_i)) < FLAT_SPREAD:
        return DecayFit(
            i0=float(np.exp(np.mean(log_i))),
            c=math.nan,
            q=math.nan,
            residual=_rms(float(np.sum((log_i - np.mean(log_i)) ** 2)), n),
            c_fixed_q4=c_4,
            i0_fixed_q4=math.exp(ln_i0_4),
            residual_q4=_rms(sse_4, n),
            n_rows=n,
            indeterminate=True,
        )
    q, unimodal = _search_exponent(taus, log_i)
    ln_i0, c, sse = _linear_fit(taus, log_i, q)
    return DecayFit(
        i0=math.exp(ln_i0),
        c=c,
        q=q,
        residual=_rms(sse, n),
        c_fixed_q4=c_4,
        i0_fixed_q4=math.exp(ln_i0_4),
        residual_q4=_rms(sse_4, n),
        n_rows=n,
        profile_unimodal=unimodal,
    )


def compare_models(sweep: SweepResult, exponents: Sequence[float] = MODEL_EXPONENTS) -> ModelComparison:
    """Fixed-exponent fits; the winner must beat every other model by 2x in rms residual."""
    taus, intensities = sweep.usable()
    log_i = np.log(intensities)
    entries = []
    for q in exponents:
        ln_i0, c, sse = _linear_fit(taus, log_i, q)
        entries.append(ModelEntry(q=float(q), i0=math.exp(ln_i0), c=c, residual=_rms(sse, len(taus))))
    if float(np.ptp(log_i)) < FLAT_SPREAD:
        return ModelComparison(tuple(entries), winner=None, margin=1.0, decisive=False, indeterminate=True)
    ranked = sorted(entries, key=lambda entry: entry.residual)
    best = max(ranked[0].residual, RESIDUAL_FLOOR)
    runner_up = max(ranked[1].residual, RESIDUAL_FLOOR) if len(ranked) > 1 else math.inf
    margin = runner_up / best
    return ModelComparison(
        tuple(entries),
        winner=ranked[0].q,
        margin=margin,
        decisive=margin >= DECISIVE_MARGIN,
        indeterminate=False,
    )


def monte_carlo_fit(sweep: SweepResult, noise: float = 0.01, repeats: int = 64, seed: int = 0) -> MonteCarloSummary:
    """Refit ``repeats`` copies of the sweep with multiplicative Gaussian noise."""
    if repeats < 1:
        raise FitError(f"repeats must be >= 1, got {repeats}")
    taus, intensities = sweep.usable()
    rng = np.random.default_rng(seed)
    cs, qs, c4s = [], [], []
    for _ in range(repeats):
        noisy = intensities * (1.0 + noise * rng.standard_normal(len(intensities)))
        noisy = np.clip(noisy, np.finfo(float).tiny, None)
        fit = fit_decay(SweepResult.from_arrays(taus, noisy))
        cs.append(fit.c)
        qs.append(fit.q)
        c4s.append(fit.c_fixed_q4)
    return MonteCarloSummary(
        median_c=float(np.nanmedian(cs)),
        median_q=float(np.nanmedian(qs)),
        median_c_fixed_q4=float(np.median(c4s)),
        repeats=repeats,
        noise=noise,
        seed=seed,
    )


def coefficient_ratio(fit: DecayFit, params: ModelParams) -> float:
    """Measured c_fixed_q4 over the predicted F^2 Omega / (2 hbar m)."""
    predicted = decay_coefficient(params)
    if predicted == 0:
        return math.nan
    return fit.c_fixed_q4 / predicted


def echo_suppression(
    params: ModelParams,
    phi: float,
    tau: float,
    grid: Grid,
    *,
    theta: float = 0.0,
    phases: int = 64,
    seed: int = 0,
) -> EchoSuppression:
    """Coherent echo peak against the branch-incoherent control with identical settings."""
    schedule = two_pulse_schedule(params, phi, tau, theta=theta)
    coherent = detect_echo(run_schedule(params, schedule, phi, grid), 0.0, tau)
    control = detect_echo(run_incoherent_control(params, schedule, phi, grid, phases=phases, seed=seed), 0.0, tau)
    return EchoSuppression(coherent=coherent.intensity, incoherent=control.intensity)


# --- pipeline self-checks -------------------------------------------------------

CHECK_CODES = (
    "ORACLE_EQUIVALENCE",
    "COHERENT_PERIOD",
    "STEP_CONVERGENCE",
    "CAT_WEIGHTS",
    "GRID_WRAPAROUND",
    "NORM_DRIFT",
    "ECHO_TIMING",
)


def _impulsive(params: ModelParams) -> ModelParams:
    return replace(params, kinetic_enabled=False, omega_e=0.0)


def _state_distance(a, b) -> float:
    return math.sqrt(
        float((np.sum(np.abs(a.amp_g - b.amp_g) ** 2) + np.sum(np.abs(a.amp_e - b.amp_e) ** 2)) * a.grid.dx)
    )


def _check_oracle(params: ModelParams, phi: float, tau: float, grid: Grid, theta: float, **_) -> CheckResult:
    off = _impulsive(params)
    schedule = two_pulse_schedule(off, phi, tau, theta=theta, t_end=tau)
    numeric = run_schedule(off, schedule, phi, grid).final_state
    oracle = change_representation(
        cat_after_two_pulses(phi, tau, tau, off, grid, theta=theta), Representation.POSITION
    )
    deviation = float(
        max(np.max(np.abs(numeric.amp_g - oracle.amp_g)), np.max(np.abs(numeric.amp_e - oracle.amp_e)))
    )
    return CheckResult("ORACLE_EQUIVALENCE", deviation <= 1e-8, deviation, 1e-8, "max pointwise amplitude deviation")


def _check_period(params: ModelParams, grid: Grid, **_) -> CheckResult:
    harmonic = replace(params, force=0.0, omega_e=0.0, kinetic_enabled=True)
    x0 = 2.0 * math.sqrt(2.0) * params.sigma_x
    local = make_grid(grid.n, 1.5 * (12.0 * params.sigma_x + 2.0 * x0))
    period = 2.0 * math.pi / params.omega
    steps = 2000
    schedule = Schedule(pulses=(), t_start=0.0, t_end=period, dt=period / steps, record_stride=steps)
    start = ground_gaussian(local, params.m, params.omega, x0=x0)
    end = run_schedule(harmonic, schedule, None, local, initial=start, p0=params.m * params.omega * x0).final_state
    fidelity = abs(overlap(start, end)) ** 2
    loss = 1.0 - fidelity
    return CheckResult("COHERENT_PERIOD", loss < 1e-6, loss, 1e-6, "1 - |<psi(0)|psi(T)>|^2 after one period")


def _check_convergence(
    params: ModelParams, phi: float, tau: float, grid: Grid, theta: float, dt: Optional[float], **_
) -> CheckResult:
    kinetic = replace(params, kinetic_enabled=True)
    local = auto_grid(kinetic, tau, n=grid.n)
    if dt is None:
        bound = max_stable_dt(kinetic, tau)
        dt = tau / math.ceil(tau / bound)
    steps = math.ceil(tau / dt - 1e-9)
    t_end = steps * dt
    pulse = PulseEvent(t_center=0.0, area=phi, phase=theta)
    finals = []
    for refine in (1, 2, 4):
        schedule = Schedule(pulses=(pulse,), t_start=0.0, t_end=t_end, dt=dt / refine, record_stride=10**9)
        finals.append(run_schedule(kinetic, schedule, None, local).final_state)
    coarse = _state_distance(finals[0], finals[2])
    fine = _state_distance(finals[1], finals[2])
    if coarse < 1e-12:
        return CheckResult("STEP_CONVERGENCE", True, math.inf, 3.5, "coarse step already exact")
    factor = coarse / fine if fine > 0 else math.inf
    return CheckResult(
        "STEP_CONVERGENCE", factor >= 3.5, factor, 3.5, f"error ratio dt vs dt/2 against dt/4 (dt={dt:.4g})"
    )


def _check_weights(params: ModelParams, tau: float, grid: Grid, **_) -> CheckResult:
    if params.force == 0:
        return CheckResult("CAT_WEIGHTS", False, math.nan, 1e-4, "needs a nonzero force to separate the components")
    tau_w = max(tau, 8.0 * params.sigma_p / abs(params.force))
    phi_w = math.pi / 3.0
    state = cat_after_two_pulses(phi_w, tau_w, 0.0, _impulsive(params), grid)
    weights = component_weights(state, [0.0, params.force * tau_w], "g", params.sigma_p)
    expected = (math.cos(phi_w / 2.0) ** 2, math.sin(phi_w / 2.0) ** 2)
    deviation = max(abs(w - e) for w, e in zip(weights, expected))
    return CheckResult(
        "CAT_WEIGHTS",
        deviation <= 1e-4,
        deviation,
        1e-4,
        f"ground weights {weights[0]:.6f}, {weights[1]:.6f} vs 0.75, 0.25",
    )


def _check_wraparound(
    params: ModelParams,
    phi: float,
    tau: float,
    grid: Grid,
    theta: float,
    dt: Optional[float],
    shape: PulseShape | str,
    fwhm: Optional[float],
    **_,
) -> CheckResult:
    schedule = two_pulse_schedule(params, phi, tau, theta=theta, shape=shape, fwhm=fwhm, dt=dt)
    series = run_schedule(params, schedule, phi, grid)
    return CheckResult("GRID_WRAPAROUND", True, series.max_edge_density, 1e-8, "largest edge density seen")


def _check_norm(params: ModelParams, phi: float, grid: Grid, theta: float, **_) -> CheckResult:
    bounded = replace(params, kinetic_enabled=True, omega_e=params.omega)
    swing = 2.0 * abs(params.force) / (params.m * params.omega**2)
    local = make_grid(grid.n, 1.5 * (12.0 * params.sigma_x + 2.0 * swing))
    dt = 2.0 * math.pi / (params.omega * 2000)
    steps = 10_000
    schedule = Schedule(
        pulses=(PulseEvent(t_center=0.0, area=phi, phase=theta),),
        t_start=0.0,
        t_end=steps * dt,
        dt=dt,
        record_stride=500,
    )
    series = run_schedule(bounded, schedule, None, local, check_stability=False)
    drift = series.max_norm_drift
    return CheckResult("NORM_DRIFT", drift < 1e-9, drift, 1e-9, f"max |norm - 1| over {steps} steps")


def _check_timing(params: ModelParams, phi: float, tau: float, grid: Grid, theta: float, **_) -> CheckResult:
    if params.force == 0:
        return CheckResult("ECHO_TIMING", False, math.nan, math.nan, "needs a nonzero force to form an echo")
    off = _impulsive(params)
    tau_e = max(tau, SEPARATION_SIGMAS * params.sigma_p / abs(params.force))
    schedule = two_pulse_schedule(off, phi, tau_e, theta=theta)
    local = auto_grid(off, schedule.duration, n=grid.n)
    echo = detect_echo(run_schedule(off, schedule, phi, local), 0.0, tau_e)
    offset = abs(echo.t_peak - tau_e)
    limit = 2.0 * schedule.dt
    passed = (not echo.no_echo) and offset <= limit
    detail = "no echo above background" if echo.no_echo else f"peak at {echo.t_peak:.6g}, expected {tau_e:.6g}"
    return CheckResult("ECHO_TIMING", passed, offset, limit, detail)


CHECKS: Dict[str, Callable[..., CheckResult]] = {
    "ORACLE_EQUIVALENCE": _check_oracle,
    "COHERENT_PERIOD": _check_period,
    "STEP_CONVERGENCE": _check_convergence,
    "CAT_WEIGHTS": _check_weights,
    "GRID_WRAPAROUND": _check_wraparound,
    "NORM_DRIFT": _check_norm,
    "ECHO_TIMING": _check_timing,
}


def validate_pipeline(
    params: ModelParams,
    phi: float,
    grid: Grid,
    *,
    tau: float,
    dt: Optional[float] = None,
    theta: float = 0.0,
    shape: PulseShape | str = PulseShape.DELTA,
    fwhm: Optional[float] = None,
    codes: Sequence[str] = CHECK_CODES,
) -> ValidationReport:
    """Run the self-checks; a check that raises is reported as failed."""
    report = ValidationReport()
    for code in codes:
        check = CHECKS[code]
        try:
            result = check(
                params=params, phi=phi, tau=tau, grid=grid, theta=theta, dt=dt, shape=shape, fwhm=fwhm
            )
        except (GridError, ModelError, WraparoundError, ValueError, FloatingPointError) as exc:
            result = CheckResult(code, False, math.nan, math.nan, f"{type(exc).__name__}: {exc}")
        report.checks.append(result)
    return report
