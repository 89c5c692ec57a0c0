import math

import numpy as np
import pytest

from catecho.analytic import (
    analytic_series,
    cat_after_two_pulses,
    component_weights,
    decay_coefficient,
    echo_amplitude_impulsive,
    half_intensity_delay,
    predicted_echo_intensity,
    shift_evolve,
)
from catecho.core import (
    Representation,
    RepresentationError,
    change_representation,
    expectations,
    ground_gaussian,
    make_grid,
)
from catecho.model import ModelError, ModelParams, apply_impulse


def _excited_packet(grid, params):
    state = apply_impulse(ground_gaussian(grid, params.m, params.omega), math.pi / 2)
    return change_representation(state, Representation.MOMENTUM)


def test_shift_evolve_moves_only_the_excited_packet(echo_grid, impulsive_params) -> None:
    start = _excited_packet(echo_grid, impulsive_params)
    moved = shift_evolve(start, 0.8, impulsive_params)
    np.testing.assert_array_equal(moved.amp_g, start.amp_g)
    stats = expectations(moved)
    assert stats.p_e == pytest.approx(3.0 * 0.8, abs=1e-9)
    assert stats.p_g == pytest.approx(0.0, abs=1e-9)
    assert moved.norm == pytest.approx(1.0, abs=1e-12)


def test_shift_evolve_composes(echo_grid, impulsive_params) -> None:
    start = _excited_packet(echo_grid, impulsive_params)
    once = shift_evolve(start, 0.7, impulsive_params)
    twice = shift_evolve(shift_evolve(start, 0.3, impulsive_params), 0.4, impulsive_params)
    np.testing.assert_allclose(twice.amp_e, once.amp_e, atol=1e-10)
    assert shift_evolve(start, 0.0, impulsive_params) is start


def test_shift_evolve_rejects_bad_input(echo_grid, impulsive_params) -> None:
    position = apply_impulse(ground_gaussian(echo_grid, 1.0, 1.0), math.pi / 2)
    with pytest.raises(RepresentationError):
        shift_evolve(position, 0.1, impulsive_params)
    with pytest.raises(ModelError):
        shift_evolve(change_representation(position, "momentum"), -0.1, impulsive_params)


def test_cat_component_weights(echo_grid, impulsive_params) -> None:
    phi = math.pi / 3
    tau = 2.0
    state = cat_after_two_pulses(phi, tau, 0.0, impulsive_params, echo_grid)
    sigma_p = impulsive_params.sigma_p
    ground = component_weights(state, [0.0, 3.0 * tau], "g", sigma_p)
    excited = component_weights(state, [0.0, 3.0 * tau], "e", sigma_p)
    assert ground[0] == pytest.approx(0.75, abs=1e-4)
    assert ground[1] == pytest.approx(0.25, abs=1e-4)
    mixed = math.cos(phi / 2) * math.sin(phi / 2)
    assert excited == pytest.approx([mixed, mixed], abs=1e-4)
    with pytest.raises(ValueError):
        component_weights(state, [0.0], "x", sigma_p)


@pytest.mark.parametrize("n, extent", [(512, 12.8), (4096, 12.7), (4096, 102.4)])
def test_component_weights_do_not_depend_on_lattice_spacing(impulsive_params, n: int, extent: float) -> None:
    # (512, 12.8) spaces momentum nodes 0.49 apart against sigma_p = 0.71.
    grid = make_grid(n, extent)
    state = cat_after_two_pulses(math.pi / 3, 2.0, 0.0, impulsive_params, grid)
    weights = component_weights(state, [0.0, 6.0], "g", impulsive_params.sigma_p)
    assert weights == pytest.approx([0.75, 0.25], abs=5e-5)


def test_cat_rejects_times_before_second_pulse(echo_grid, impulsive_params) -> None:
    with pytest.raises(ModelError):
        cat_after_two_pulses(math.pi / 2, 1.0, -0.1, impulsive_params, echo_grid)
    with pytest.raises(ModelError):
        cat_after_two_pulses(math.pi / 2, 0.0, 0.0, impulsive_params, echo_grid)


@pytest.mark.parametrize("phi", [math.pi / 3, math.pi / 2, 2 * math.pi / 3])
def test_phase_cycled_echo_amplitude(phi: float, echo_grid, impulsive_params) -> None:
    expected = math.cos(phi / 2) * math.sin(phi / 2) ** 3
    value = echo_amplitude_impulsive(phi, 0.4, impulsive_params, echo_grid, phase_cycled=True)
    assert abs(value) == pytest.approx(expected, abs=1e-10)


def test_echo_amplitude_independent_of_delay_without_kinetic_term(echo_grid, impulsive_params) -> None:
    values = [
        abs(echo_amplitude_impulsive(math.pi / 2, tau, impulsive_params, echo_grid, phase_cycled=True))
        for tau in (0.3, 1.0, 2.0)
    ]
    assert max(values) - min(values) < 1e-10
    raw = abs(echo_amplitude_impulsive(math.pi / 2, 2.0, impulsive_params, echo_grid))
    assert raw == pytest.approx(0.25, abs=1e-3)


def test_echo_intensity_ignores_global_phase(echo_grid, impulsive_params) -> None:
    base = abs(echo_amplitude_impulsive(math.pi / 2, 0.5, impulsive_params, echo_grid))
    shifted = abs(echo_amplitude_impulsive(math.pi / 2, 0.5, impulsive_params, echo_grid, theta=0.9))
    assert shifted == pytest.approx(base, abs=1e-12)


def test_zero_area_gives_no_polarization(echo_grid, impulsive_params) -> None:
    assert echo_amplitude_impulsive(0.0, 1.0, impulsive_params, echo_grid) == 0


def test_analytic_series_peaks_at_the_echo(echo_grid, impulsive_params) -> None:
    times = np.linspace(0.0, 4.0, 81)
    series = analytic_series(math.pi / 2, 2.0, impulsive_params, echo_grid, times, phase_cycled=True)
    assert len(series) == 81
    assert series.times[int(np.argmax(series.intensity))] == pytest.approx(2.0)
    assert series.intensity.max() == pytest.approx(0.0625, abs=1e-10)
    with pytest.raises(ModelError):
        analytic_series(math.pi / 2, 2.0, impulsive_params, echo_grid, [-1.0])


def test_predicted_echo_intensity() -> None:
    params = ModelParams(m=2.0, omega=0.5, force=4.0)
    assert decay_coefficient(params) == pytest.approx(2.0)
    prediction = predicted_echo_intensity(0.8, params)
    assert prediction.intensity_ratio == pytest.approx(math.exp(-2.0 * 0.8**4))
    assert predicted_echo_intensity(0.0, params).intensity_ratio == 1.0
    with pytest.raises(ModelError):
        predicted_echo_intensity(-0.1, params)


def test_half_intensity_delay() -> None:
    params = ModelParams(m=1.0, omega=1.0, force=3.0)
    tau_half = half_intensity_delay(params)
    assert predicted_echo_intensity(tau_half, params).intensity_ratio == pytest.approx(0.5)
    assert half_intensity_delay(ModelParams(force=0.0)) == math.inf
