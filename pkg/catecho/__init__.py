"""catecho package exports."""

from __future__ import annotations

from .analysis import (
    DecayFit,
    SweepResult,
    ValidationReport,
    compare_models,
    fit_decay,
    sweep_tau,
    validate_pipeline,
)
from .analytic import (
    cat_after_two_pulses,
    echo_amplitude_impulsive,
    predicted_echo_intensity,
    shift_evolve,
)
from .cli import app, main
from .core import Grid, UnitSystem, VibronicState, ground_gaussian, make_grid
from .model import ModelParams, PulseEvent, Schedule, apply_impulse, two_pulse_schedule
from .observables import EchoMeasurement, detect_echo, polarization
from .propagator import TimeSeries, finite_pulse_step, run_schedule, split_step
from .report import ReportWriter
from .schema import ConfigValidationError, RunConfig, load_config

__all__ = [
    "app",
    "main",
    "Grid",
    "UnitSystem",
    "VibronicState",
    "ground_gaussian",
    "make_grid",
    "ModelParams",
    "PulseEvent",
    "Schedule",
    "apply_impulse",
    "two_pulse_schedule",
    "shift_evolve",
    "cat_after_two_pulses",
    "echo_amplitude_impulsive",
    "predicted_echo_intensity",
    "TimeSeries",
    "split_step",
    "finite_pulse_step",
    "run_schedule",
    "EchoMeasurement",
    "polarization",
    "detect_echo",
    "SweepResult",
    "DecayFit",
    "ValidationReport",
    "sweep_tau",
    "fit_decay",
    "compare_models",
    "validate_pipeline",
    "ReportWriter",
    "RunConfig",
    "ConfigValidationError",
    "load_config",
]

__version__ = "0.1.0"
