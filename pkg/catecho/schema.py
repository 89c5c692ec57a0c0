"""Experiment config loader: bundled presets, key validation and unit resolution."""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import yaml

from .analysis import ENGINES, MEASURES, SIGNALS, propose_tau_window
from .core import Grid, GridError, UnitSystem, make_grid
from .model import (
    DEFAULT_GRID_POINTS,
    ModelError,
    ModelParams,
    PulseEvent,
    PulseShape,
    Schedule,
    auto_grid,
    two_pulse_schedule,
)

PRESETS = {"impulsive", "decay", "femtosecond"}
DEFAULT_PRESET = "impulsive"
CONFIG_VERSION = 1
UNIT_SYSTEMS = {"dimensionless", "femtosecond"}
AUTO = "auto"

# Allowed keys; nested dicts are sections.
CONFIG_KEYS: Dict[str, Any] = {
    "version": None,
    "preset": None,
    "units": None,
    "tau": None,
    "model": {"m": None, "omega": None, "force": None, "v_e0": None, "omega_e": None, "kinetic_enabled": None},
    "pulse": {"phi": None, "theta": None, "shape": None, "fwhm": None},
    "grid": {"n": None, "extent": None},
    "schedule": {"t_end": None, "dt": None, "record_stride": None},
    "sweep": {"taus": None, "points": None, "engine": None, "signal": None, "measure": None, "workers": None},
}

_ANGLE = re.compile(r"^\s*(?P<num>[0-9.]*)\s*\*?\s*pi\s*(?:/\s*(?P<den>[0-9.]+))?\s*$")


class ConfigValidationError(RuntimeError):
    """Raised when an experiment config is malformed."""


@dataclass
class ModelSection:
    m: float = 1.0
    omega: float = 1.0
    force: float = 3.0
    v_e0: float = 0.0
    omega_e: float = 0.0
    kinetic_enabled: bool = False


@dataclass
class PulseSection:
    phi: float = math.pi / 2.0
    theta: float = 0.0
    shape: str = PulseShape.DELTA.value
    fwhm: Optional[float] = None


@dataclass
class GridSection:
    n: int = DEFAULT_GRID_POINTS
    extent: Optional[float] = None


@dataclass
class ScheduleSection:
    t_end: Optional[float] = None
    dt: Optional[float] = None
    record_stride: int = 1


@dataclass
class SweepSection:
    taus: Optional[List[float]] = None
    points: int = 10
    engine: str = "full"
    signal: str = "phase_cycled"
    measure: str = "rephasing"
    workers: int = 1


@dataclass
class RunConfig:
    """Experiment description in config units (see ``units``)."""

    tau: float = 2.0
    units: str = "dimensionless"
    model: ModelSection = field(default_factory=ModelSection)
    pulse: PulseSection = field(default_factory=PulseSection)
    grid: GridSection = field(default_factory=GridSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    version: int = CONFIG_VERSION
    preset: Optional[str] = None
    source: str = ""
    sha256: str = ""

    @property
    def unit_system(self) -> UnitSystem:
        if self.units == "femtosecond":
            return UnitSystem.femtosecond()
        return UnitSystem.dimensionless()

    def to_internal(self, value: float, quantity: str) -> float:
        return self.unit_system.to_internal(value, quantity)

    def to_config(self, value: float, quantity: str) -> float:
        return self.unit_system.to_physical(value, quantity)

    def params(self) -> ModelParams:
        section = self.model
        return ModelParams(
            m=self.to_internal(section.m, "mass"),
            omega=self.to_internal(section.omega, "frequency"),
            force=self.to_internal(section.force, "force"),
            v_e0=self.to_internal(section.v_e0, "energy"),
            omega_e=self.to_internal(section.omega_e, "frequency"),
            kinetic_enabled=section.kinetic_enabled,
        )

    def tau_internal(self, tau: Optional[float] = None) -> float:
        return self.to_internal(self.tau if tau is None else tau, "time")

    def _optional_time(self, value: Optional[float]) -> Optional[float]:
        return None if value is None else self.to_internal(value, "time")

    @property
    def shape(self) -> PulseShape:
        return PulseShape(self.pulse.shape)

    @property
    def fwhm_internal(self) -> Optional[float]:
        return self._optional_time(self.pulse.fwhm)

    @property
    def dt_internal(self) -> Optional[float]:
        return self._optional_time(self.schedule.dt)

    def build_schedule(self, tau: Optional[float] = None) -> Schedule:
        """Two-pulse schedule at delay ``tau`` (config units, default the config delay)."""
        return two_pulse_schedule(
            self.params(),
            self.pulse.phi,
            self.tau_internal(tau),
            theta=self.pulse.theta,
            shape=self.shape,
            fwhm=self.fwhm_internal,
            dt=self.dt_internal,
            t_end=self._optional_time(self.schedule.t_end),
            record_stride=self.schedule.record_stride,
        )

    def pulse_lead(self) -> float:
        if self.shape is PulseShape.DELTA:
            return 0.0
        template = PulseEvent(0.0, self.pulse.phi, shape=self.shape, fwhm=self.fwhm_internal)
        return 2.0 * template.half_support

    def build_grid(self, duration: float) -> Grid:
        """Explicit grid when ``extent`` is set, otherwise sized for ``duration`` (internal units)."""
        if self.grid.extent is not None:
            return make_grid(self.grid.n, self.to_internal(self.grid.extent, "length"))
        return auto_grid(self.params(), duration, n=self.grid.n)

    def run_grid(self) -> Grid:
        return self.build_grid(self.build_schedule().duration)

    def sweep_taus(self) -> List[float]:
        """Sweep delays in config units; ``auto`` inverts the decay law."""
        if self.sweep.taus is not None:
            return list(self.sweep.taus)
        window = propose_tau_window(self.params(), points=self.sweep.points)
        return [self.to_config(t, "time") for t in window]

    def sweep_grid(self, taus: List[float]) -> Grid:
        longest = max(self.tau_internal(t) for t in taus)
        return self.build_grid(3.0 * longest + self.pulse_lead())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": self.version,
            "preset": self.preset,
            "units": self.units,
            "tau": self.tau,
            "model": self.model.__dict__.copy(),
            "pulse": self.pulse.__dict__.copy(),
            "grid": {"n": self.grid.n, "extent": AUTO if self.grid.extent is None else self.grid.extent},
            "schedule": {
                "t_end": AUTO if self.schedule.t_end is None else self.schedule.t_end,
                "dt": AUTO if self.schedule.dt is None else self.schedule.dt,
                "record_stride": self.schedule.record_stride,
            },
            "sweep": {
                "taus": AUTO if self.sweep.taus is None else list(self.sweep.taus),
                "points": self.sweep.points,
                "engine": self.sweep.engine,
                "signal": self.sweep.signal,
                "measure": self.sweep.measure,
                "workers": self.sweep.workers,
            },
        }


def _preset_text(name: str) -> str:
    selected = name.strip().lower()
    if selected not in PRESETS:
        options = ", ".join(sorted(PRESETS))
        raise ConfigValidationError(f"Unknown preset '{name}'. Choose one of: {options}")
    resource = resources.files("catecho.presets").joinpath(f"{selected}.config.yaml")
    return resource.read_text(encoding="utf-8")


def _key_lines(text: str) -> Dict[Tuple[str, ...], int]:
    """Map each key path to the 1-based line it appears on."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    lines: Dict[Tuple[str, ...], int] = {}

    def walk(node: Any, prefix: Tuple[str, ...]) -> None:
        if not isinstance(node, yaml.MappingNode):
            return
        for key_node, value_node in node.value:
            path = prefix + (str(key_node.value),)
            lines[path] = key_node.start_mark.line + 1
            walk(value_node, path)

    walk(root, ())
    return lines


def _parse_text(text: str, source: str) -> Dict[str, Any]:
    try:
        if source.endswith(".json"):
            data = json.loads(text)
        else:
            data = yaml.safe_load(text)
    except json.JSONDecodeError as exc:
        raise ConfigValidationError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f"{mark.line + 1}:" if mark is not None else ""
        raise ConfigValidationError(f"{source}:{line} invalid YAML: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigValidationError(f"{source}: config must be a mapping at the top level")
    return data


def _check_keys(data: Dict[str, Any], schema: Dict[str, Any], lines: Dict[Tuple[str, ...], int], source: str) -> None:
    errors: List[str] = []

    def walk(node: Dict[str, Any], allowed: Dict[str, Any], prefix: Tuple[str, ...]) -> None:
        for key, value in node.items():
            path = prefix + (str(key),)
            where = f"{source}:{lines[path]}" if path in lines else source
            if key not in allowed:
                errors.append(f"{where}: unknown key '{'.'.join(path)}'")
                continue
            section = allowed[key]
            if isinstance(section, dict):
                if not isinstance(value, dict):
                    errors.append(f"{where}: '{'.'.join(path)}' must be a mapping")
                    continue
                walk(value, section, path)

    walk(data, schema, ())
    if errors:
        raise ConfigValidationError("; ".join(errors))


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class _Reader:
    """Typed access to raw config values with located error messages."""

    def __init__(self, data: Dict[str, Any], lines: Dict[Tuple[str, ...], int], source: str) -> None:
        self.data = data
        self.lines = lines
        self.source = source

    def where(self, *path: str) -> str:
        line = self.lines.get(tuple(path))
        return f"{self.source}:{line}" if line else self.source

    def fail(self, path: Tuple[str, ...], message: str) -> ConfigValidationError:
        return ConfigValidationError(f"{self.where(*path)}: '{'.'.join(path)}' {message}")

    def raw(self, *path: str) -> Any:
        node: Any = self.data
        for key in path:
            if not isinstance(node, dict) or key not in node:
                return None
            node = node[key]
        return node

    def number(self, *path: str, default: Optional[float] = None, auto: bool = False) -> Optional[float]:
        value = self.raw(*path)
        if value is None:
            return default
        if auto and value == AUTO:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.fail(path, f"must be a number{' or auto' if auto else ''}, got {value!r}")
        if not math.isfinite(float(value)):
            raise self.fail(path, f"must be finite, got {value!r}")
        return float(value)

    def integer(self, *path: str, default: int) -> int:
        value = self.raw(*path)
        if value is None:
            return default
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.fail(path, f"must be an integer, got {value!r}")
        return value

    def boolean(self, *path: str, default: bool) -> bool:
        value = self.raw(*path)
        if value is None:
            return default
        if not isinstance(value, bool):
            raise self.fail(path, f"must be true or false, got {value!r}")
        return value

    def choice(self, *path: str, default: str, options: Union[set, Tuple[str, ...]]) -> str:
        value = self.raw(*path)
        if value is None:
            return default
        if value not in options:
            raise self.fail(path, f"must be one of {', '.join(sorted(options))}, got {value!r}")
        return str(value)

    def angle(self, *path: str, default: float) -> float:
        value = self.raw(*path)
        if value is None:
            return default
        if isinstance(value, str):
            match = _ANGLE.match(value)
            if not match:
                raise self.fail(path, f"must be radians or a multiple of pi such as 'pi/2', got {value!r}")
            numerator = float(match.group("num") or 1.0)
            denominator = float(match.group("den") or 1.0)
            return numerator * math.pi / denominator
        return float(self.number(*path, default=default))  # type: ignore[arg-type]

    def number_list(self, *path: str) -> Optional[List[float]]:
        value = self.raw(*path)
        if value is None or value == AUTO:
            return None
        if not isinstance(value, list) or not all(
            isinstance(item, (int, float)) and not isinstance(item, bool) for item in value
        ):
            raise self.fail(path, f"must be a list of numbers or auto, got {value!r}")
        return [float(item) for item in value]


def default_workers() -> int:
    raw = os.environ.get("CATECHO_WORKERS", "").strip()
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        return 1


def _build(data: Dict[str, Any], lines: Dict[Tuple[str, ...], int], source: str) -> RunConfig:
    read = _Reader(data, lines, source)
    version = read.integer("version", default=CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise read.fail(("version",), f"must be {CONFIG_VERSION}, got {version}")
    tau = read.number("tau", default=2.0)
    config = RunConfig(
        tau=tau,  # type: ignore[arg-type]
        units=read.choice("units", default="dimensionless", options=UNIT_SYSTEMS),
        model=ModelSection(
            m=read.number("model", "m", default=1.0),  # type: ignore[arg-type]
            omega=read.number("model", "omega", default=1.0),  # type: ignore[arg-type]
            force=read.number("model", "force", default=3.0),  # type: ignore[arg-type]
            v_e0=read.number("model", "v_e0", default=0.0),  # type: ignore[arg-type]
            omega_e=read.number("model", "omega_e", default=0.0),  # type: ignore[arg-type]
            kinetic_enabled=read.boolean("model", "kinetic_enabled", default=False),
        ),
        pulse=PulseSection(
            phi=read.angle("pulse", "phi", default=math.pi / 2.0),
            theta=read.angle("pulse", "theta", default=0.0),
            shape=read.choice("pulse", "shape", default="delta", options={s.value for s in PulseShape}),
            fwhm=read.number("pulse", "fwhm"),
        ),
        grid=GridSection(
            n=read.integer("grid", "n", default=DEFAULT_GRID_POINTS),
            extent=read.number("grid", "extent", auto=True),
        ),
        schedule=ScheduleSection(
            t_end=read.number("schedule", "t_end", auto=True),
            dt=read.number("schedule", "dt", auto=True),
            record_stride=read.integer("schedule", "record_stride", default=1),
        ),
        sweep=SweepSection(
            taus=read.number_list("sweep", "taus"),
            points=read.integer("sweep", "points", default=10),
            engine=read.choice("sweep", "engine", default="full", options=ENGINES),
            signal=read.choice("sweep", "signal", default="phase_cycled", options=SIGNALS),
            measure=read.choice("sweep", "measure", default="rephasing", options=MEASURES),
            workers=read.integer("sweep", "workers", default=default_workers()),
        ),
        version=version,
        preset=data.get("preset"),
        source=source,
    )
    _revalidate(config, read)
    return config


def _revalidate(config: RunConfig, read: _Reader) -> None:
    """Push the config through the model constructors so their invariants apply on load."""
    if not config.tau > 0:
        raise read.fail(("tau",), f"must be positive, got {config.tau}")
    if config.sweep.points < 2:
        raise read.fail(("sweep", "points"), f"must be >= 2, got {config.sweep.points}")
    if config.sweep.workers < 1:
        raise read.fail(("sweep", "workers"), f"must be >= 1, got {config.sweep.workers}")
    if config.sweep.taus is not None and any(t <= 0 for t in config.sweep.taus):
        raise read.fail(("sweep", "taus"), "must contain positive delays only")
    try:
        config.params()
    except ModelError as exc:
        raise ConfigValidationError(f"{read.where('model')}: {exc}") from exc
    try:
        config.build_schedule()
    except ModelError as exc:
        raise ConfigValidationError(f"{read.where('pulse')}: {exc}") from exc
    try:
        config.run_grid()
    except GridError as exc:
        raise ConfigValidationError(f"{read.where('grid')}: {exc}") from exc


def load_config(config_path: Optional[Path] = None, *, preset: Optional[str] = None) -> RunConfig:
    """Load a config file (JSON or YAML) or a bundled preset (default: impulsive)."""
    if config_path is not None and preset is not None:
        raise ConfigValidationError("Choose either --config or --preset, not both")
    if config_path is not None:
        try:
            text = config_path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigValidationError(f"Cannot read config {config_path}: {exc}") from exc
        source = str(config_path)
    else:
        selected = (preset or DEFAULT_PRESET).strip().lower()
        text = _preset_text(selected)
        source = f"package://catecho/presets/{selected}.config.yaml"
    data = _parse_text(text, source)
    lines = _key_lines(text)
    _check_keys(data, CONFIG_KEYS, lines, source)
    base_name = data.get("preset") if config_path is not None else None
    if base_name is not None:
        if not isinstance(base_name, str):
            raise ConfigValidationError(f"{source}: 'preset' must be a preset name")
        base_text = _preset_text(base_name)
        merged = _merge(yaml.safe_load(base_text) or {}, data)
    else:
        merged = data
        if config_path is None:
            merged = dict(data, preset=(preset or DEFAULT_PRESET).strip().lower())
    config = _build(merged, lines, source)
    config.sha256 = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return config


def config_summary(config: RunConfig) -> Dict[str, Any]:
    """Fully resolved config: config-unit values plus the internal numbers actually used."""
    params = config.params()
    schedule = config.build_schedule()
    grid = config.run_grid()
    return {
        "source": config.source,
        "sha256": config.sha256,
        "config": config.to_dict(),
        "resolved": {
            "params": params.to_dict(),
            "tau": config.tau_internal(),
            "schedule": schedule.to_dict(),
            "grid": {"n": grid.n, "x_min": grid.x_min, "dx": grid.dx, "extent": grid.extent},
            "unit_system": {
                "name": config.unit_system.name,
                "time_unit_s": config.unit_system.time_unit,
                "length_unit_m": config.unit_system.length_unit,
                "mass_unit_kg": config.unit_system.mass_unit,
            },
        },
        "loaded_at": datetime.now(timezone.utc).isoformat(),
    }
