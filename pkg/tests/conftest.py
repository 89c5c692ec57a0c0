from __future__ import annotations

import json
from pathlib import Path

import pytest

from catecho.core import make_grid
from catecho.model import ModelParams


@pytest.fixture
def impulsive_params() -> ModelParams:
    return ModelParams(m=1.0, omega=1.0, force=3.0, kinetic_enabled=False)


@pytest.fixture
def echo_grid():
    # Resolves the unit-mass ground packet and momenta up to ~125.
    return make_grid(512, 12.8)


@pytest.fixture
def write_config(tmp_path: Path):
    def _write(payload: dict, name: str = "experiment.json") -> Path:
        path = tmp_path / name
        if name.endswith(".json"):
            path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
        else:
            path.write_text(payload if isinstance(payload, str) else json.dumps(payload), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def small_config() -> dict:
    """Impulsive echo experiment on a grid small enough for quick CLI runs."""
    return {
        "version": 1,
        "units": "dimensionless",
        "tau": 2.0,
        "model": {"m": 1.0, "omega": 1.0, "force": 3.0, "kinetic_enabled": False},
        "pulse": {"phi": "pi/2"},
        "grid": {"n": 512, "extent": 12.8},
        "sweep": {"engine": "impulsive", "taus": [2.0, 2.2, 2.4, 2.6, 2.8, 3.0]},
    }
