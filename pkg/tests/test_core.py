import math

import numpy as np
import pytest

from catecho.core import (
    Grid,
    GridError,
    Representation,
    RepresentationError,
    ResolutionError,
    UnitSystem,
    VibronicState,
    change_representation,
    check_resolution,
    expectations,
    ground_gaussian,
    make_grid,
    overlap,
)


def test_grid_requires_power_of_two() -> None:
    with pytest.raises(GridError):
        Grid(n=100, x_min=-5.0, dx=0.1)
    with pytest.raises(GridError):
        Grid(n=32, x_min=-5.0, dx=0.1)
    with pytest.raises(GridError):
        make_grid(256, -1.0)


def test_grid_lattices_are_read_only() -> None:
    grid = make_grid(256, 12.8)
    assert grid.x[0] == pytest.approx(-6.4)
    assert grid.dp == pytest.approx(2 * math.pi / 12.8)
    with pytest.raises(ValueError):
        grid.x[0] = 1.0


def test_ground_gaussian_is_normalized(echo_grid) -> None:
    state = ground_gaussian(echo_grid, 1.0, 1.0)
    assert state.norm == pytest.approx(1.0, abs=1e-12)
    assert state.pop_e == 0.0


def test_transform_preserves_norm_and_round_trips(echo_grid) -> None:
    state = ground_gaussian(echo_grid, 1.0, 1.0, x0=0.5, p0=1.0)
    momentum = change_representation(state, Representation.MOMENTUM)
    assert momentum.norm == pytest.approx(state.norm, abs=1e-12)
    back = change_representation(momentum, "position")
    np.testing.assert_allclose(back.amp_g, state.amp_g, atol=1e-12)


def test_momentum_amplitude_matches_closed_form(echo_grid) -> None:
    # Harmonic ground state in momentum space: (1/(pi m omega))^(1/4) exp(-p^2 / (2 m omega)).
    state = change_representation(ground_gaussian(echo_grid, 1.0, 1.0), Representation.MOMENTUM)
    expected = (1.0 / math.pi) ** 0.25 * np.exp(-echo_grid.p**2 / 2.0)
    np.testing.assert_allclose(np.abs(state.amp_g), expected, atol=1e-10)


def test_expectations_and_undefined_means(echo_grid) -> None:
    state = ground_gaussian(echo_grid, 1.0, 1.0, x0=0.7, p0=-1.2)
    stats = expectations(state)
    assert stats.x_g == pytest.approx(0.7, abs=1e-10)
    assert stats.p_g == pytest.approx(-1.2, abs=1e-8)
    assert math.isnan(stats.x_e)
    assert math.isnan(stats.p_e)
    assert stats.norm == pytest.approx(1.0)


def test_overlap_checks_representation(echo_grid) -> None:
    a = ground_gaussian(echo_grid, 1.0, 1.0)
    b = change_representation(a, Representation.MOMENTUM)
    assert overlap(a, a) == pytest.approx(1.0)
    with pytest.raises(RepresentationError):
        overlap(a, b)
    other = make_grid(256, 12.8)
    with pytest.raises(GridError):
        overlap(a, ground_gaussian(other, 1.0, 1.0))


def test_state_arrays_are_immutable(echo_grid) -> None:
    state = ground_gaussian(echo_grid, 1.0, 1.0)
    with pytest.raises(ValueError):
        state.amp_g[0] = 0.0
    with pytest.raises(GridError):
        VibronicState(echo_grid, np.zeros(10), np.zeros(10))


def test_resolution_guard() -> None:
    coarse = make_grid(64, 12.8)
    with pytest.raises(ResolutionError):
        check_resolution(coarse, 0.7071)
    narrow = make_grid(1024, 4.0)
    with pytest.raises(ResolutionError):
        ground_gaussian(narrow, 1.0, 1.0)


def test_femtosecond_units() -> None:
    units = UnitSystem.femtosecond()
    assert units.to_internal(20.0, "time") == pytest.approx(2.0)
    assert units.to_internal(0.02, "frequency") == pytest.approx(0.2)
    assert units.to_internal(127.0, "mass") == pytest.approx(127.0)
    # Length unit follows from hbar = 1: sqrt(hbar * 10 fs / 1 u) ~ 0.252 angstrom.
    assert units.to_physical(1.0, "length") == pytest.approx(0.2520, rel=1e-3)
    assert units.to_physical(1.0, "energy") == pytest.approx(0.06582, rel=1e-3)
    for quantity in ("time", "length", "mass", "energy", "frequency", "momentum", "force"):
        assert units.to_physical(units.to_internal(3.5, quantity), quantity) == pytest.approx(3.5)


def test_dimensionless_units_are_identity() -> None:
    units = UnitSystem.dimensionless()
    assert units.to_internal(1.25, "force") == 1.25
    with pytest.raises(ValueError):
        units.to_internal(1.0, "charge")
