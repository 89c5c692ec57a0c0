import math
import time

import numpy as np
import pytest

from catecho.analysis import measure_echo
from catecho.analytic import cat_after_two_pulses
from catecho.core import Representation, change_representation, ground_gaussian, make_grid, overlap
from catecho.model import (
    ModelParams,
    PulseEvent,
    Schedule,
    ScheduleError,
    apply_impulse,
    auto_grid,
    max_stable_dt,
    two_pulse_schedule,
)
from catecho.propagator import (
    TimeSeries,
    WraparoundError,
    finite_pulse_step,
    run_incoherent_control,
    run_phase_cycled,
    run_schedule,
    split_step,
)


def _value_at(series: TimeSeries, t: float) -> complex:
    k = int(np.argmin(np.abs(series.times - t)))
    assert series.times[k] == pytest.approx(t, abs=1e-9)
    return complex(series.polarization[k])


def test_split_step_is_unitary(echo_grid) -> None:
    params = ModelParams(m=1.0, omega=1.0, force=3.0, omega_e=0.5)
    state = apply_impulse(ground_gaussian(echo_grid, 1.0, 1.0), math.pi / 2)
    stepped = split_step(state, 0.001, params)
    assert abs(stepped.norm - state.norm) < 1e-13


def test_ground_packet_returns_after_one_period() -> None:
    params = ModelParams(m=1.0, omega=1.0, force=0.0)
    x0 = 2.0 * math.sqrt(2.0) * params.sigma_x
    grid = make_grid(512, 1.5 * (12.0 * params.sigma_x + 2.0 * x0))
    start = ground_gaussian(grid, 1.0, 1.0, x0=x0)
    period = 2.0 * math.pi
    schedule = Schedule(pulses=(), t_start=0.0, t_end=period, dt=period / 2000, record_stride=100)
    series = run_schedule(params, schedule, None, grid, initial=start, p0=x0)
    assert 1.0 - abs(overlap(start, series.final_state)) ** 2 < 1e-6
    # Half a period later the packet sits on the other turning point.
    assert series.x_g[10] == pytest.approx(-x0, abs=1e-4)


def test_kinetic_off_run_matches_shift_oracle(echo_grid, impulsive_params) -> None:
    rng = np.random.default_rng(7)
    for _ in range(4):
        phi = float(rng.uniform(0.2, 3.0))
        tau = float(rng.uniform(1.5, 3.0))
        theta = float(rng.uniform(0.0, 2.0 * math.pi))
        schedule = two_pulse_schedule(impulsive_params, phi, tau, theta=theta, t_end=tau)
        numeric = run_schedule(impulsive_params, schedule, phi, echo_grid).final_state
        oracle = change_representation(
            cat_after_two_pulses(phi, tau, tau, impulsive_params, echo_grid, theta=theta), Representation.POSITION
        )
        np.testing.assert_allclose(numeric.amp_g, oracle.amp_g, atol=1e-8)
        np.testing.assert_allclose(numeric.amp_e, oracle.amp_e, atol=1e-8)


def test_zero_field_finite_step_matches_split_step(echo_grid) -> None:
    params = ModelParams(m=1.0, omega=1.0, force=3.0)
    state = apply_impulse(ground_gaussian(echo_grid, 1.0, 1.0), math.pi / 2)
    plain = split_step(state, 0.002, params)
    coupled = finite_pulse_step(state, 0.002, 0.0j, params)
    np.testing.assert_allclose(coupled.amp_g, plain.amp_g, atol=1e-12)
    np.testing.assert_allclose(coupled.amp_e, plain.amp_e, atol=1e-12)


def test_short_gaussian_pulse_matches_impulse(echo_grid) -> None:
    params = ModelParams(m=1.0, omega=1.0, force=0.1, kinetic_enabled=False)
    fwhm = 0.01 * 2.0 * math.pi
    pulse = PulseEvent(t_center=0.0, area=math.pi / 2, shape="gaussian", fwhm=fwhm)
    dt = fwhm / 40.0
    steps = math.ceil(pulse.half_support / dt)
    schedule = Schedule(pulses=(pulse,), t_start=-steps * dt, t_end=steps * dt, dt=dt, record_stride=10**6)
    series = run_schedule(params, schedule, None, echo_grid)
    assert series.pop_e[-1] == pytest.approx(0.5, abs=1e-4)
    assert series.pop_g[-1] == pytest.approx(0.5, abs=1e-4)


def test_finite_pulse_polarization_is_reported_in_lab_frame(echo_grid) -> None:
    params = ModelParams(m=1.0, omega=1.0, force=0.0, v_e0=5.0, kinetic_enabled=False)
    gaussian = PulseEvent(t_center=0.0, area=math.pi / 2, shape="gaussian", fwhm=0.2)
    delta = PulseEvent(t_center=0.0, area=math.pi / 2)
    lattice = dict(t_start=-0.6, t_end=1.0, dt=0.01)
    finite = run_schedule(params, Schedule(pulses=(gaussian,), **lattice), None, echo_grid)
    impulsive = run_schedule(params, Schedule(pulses=(delta,), **lattice), None, echo_grid)
    late = finite.times >= 0.6
    np.testing.assert_allclose(np.abs(finite.polarization[late]), np.abs(impulsive.polarization[late]), atol=1e-6)
    first, last = _value_at(finite, 0.6), _value_at(finite, 1.0)
    assert last / first == pytest.approx(np.exp(1j * 5.0 * 0.4), abs=1e-8)


def test_zero_area_never_polarizes(echo_grid, impulsive_params) -> None:
    schedule = two_pulse_schedule(impulsive_params, 0.0, 1.0)
    series = run_schedule(impulsive_params, schedule, None, echo_grid)
    assert not np.any(series.polarization)
    assert series.pop_e.max() == 0.0


def test_free_induction_decay(echo_grid, impulsive_params) -> None:
    schedule = Schedule(pulses=(PulseEvent(t_center=0.0, area=math.pi / 2),), t_start=0.0, t_end=1.5, dt=0.05)
    series = run_schedule(impulsive_params, schedule, None, echo_grid)
    expected = 0.5 * np.exp(-(3.0 * series.times) ** 2 / 4.0)
    np.testing.assert_allclose(np.abs(series.polarization), expected, atol=1e-10)


def test_echo_forms_one_delay_after_second_pulse(echo_grid, impulsive_params) -> None:
    schedule = two_pulse_schedule(impulsive_params, math.pi / 2, 2.0)
    series = run_schedule(impulsive_params, schedule, None, echo_grid)
    assert abs(_value_at(series, 2.0)) ** 2 == pytest.approx(0.0625, abs=1e-3)
    window = (series.times > 1.0) & (series.times < 3.0)
    peak = series.times[window][int(np.argmax(series.intensity[window]))]
    assert peak == pytest.approx(2.0, abs=1e-9)
    assert series.max_norm_drift < 1e-12
    assert series.max_edge_density < 1e-8


def test_excited_packet_accelerates_under_force() -> None:
    params = ModelParams(m=1.0, omega=1.0, force=3.0)
    grid = auto_grid(params, 1.0, n=1024)
    bound = max_stable_dt(params, 1.0)
    schedule = Schedule(
        pulses=(PulseEvent(t_center=0.0, area=math.pi),), t_start=0.0, t_end=1.0, dt=1.0 / math.ceil(1.0 / bound)
    )
    series = run_schedule(params, schedule, None, grid)
    np.testing.assert_allclose(series.p_e, 3.0 * series.times, atol=1e-8)
    np.testing.assert_allclose(series.x_e, 1.5 * series.times**2, atol=1e-8)


def test_phase_cycling_isolates_the_echo(echo_grid, impulsive_params) -> None:
    schedule = two_pulse_schedule(impulsive_params, math.pi / 2, 0.5)
    cycled = run_phase_cycled(impulsive_params, schedule, None, echo_grid)
    raw = run_schedule(impulsive_params, schedule, None, echo_grid)
    assert abs(_value_at(cycled, 0.5)) == pytest.approx(0.25, abs=1e-8)
    assert abs(abs(_value_at(raw, 0.5)) - 0.25) > 1e-3
    with pytest.raises(ScheduleError):
        run_phase_cycled(impulsive_params, schedule.with_pulses(schedule.pulses[:1]), None, echo_grid)


def test_incoherent_control_removes_the_echo(echo_grid, impulsive_params) -> None:
    schedule = two_pulse_schedule(impulsive_params, math.pi / 2, 3.0)
    coherent = run_schedule(impulsive_params, schedule, None, echo_grid)
    control = run_incoherent_control(impulsive_params, schedule, None, echo_grid, phases=64, seed=3)
    assert abs(_value_at(coherent, 3.0)) ** 2 == pytest.approx(0.0625, abs=1e-3)
    assert abs(_value_at(control, 3.0)) ** 2 < 1e-8
    np.testing.assert_allclose(control.norm, 1.0, atol=1e-12)
    np.testing.assert_allclose(control.pop_e, coherent.pop_e, atol=1e-12)
    with pytest.raises(ValueError):
        run_incoherent_control(impulsive_params, schedule, None, echo_grid, phases=1)


def test_wraparound_is_reported(impulsive_params) -> None:
    cramped = make_grid(64, 9.0)
    schedule = two_pulse_schedule(impulsive_params, math.pi / 2, 2.0)
    with pytest.raises(WraparoundError):
        run_schedule(impulsive_params, schedule, None, cramped)


def test_initial_state_must_share_the_grid(echo_grid, impulsive_params) -> None:
    other = ground_gaussian(make_grid(256, 12.8), 1.0, 1.0)
    schedule = two_pulse_schedule(impulsive_params, math.pi / 2, 1.0)
    with pytest.raises(ScheduleError):
        run_schedule(impulsive_params, schedule, None, echo_grid, initial=other)


def test_time_series_columns_must_align() -> None:
    with pytest.raises(ValueError):
        TimeSeries(
            times=np.zeros(3),
            polarization=np.zeros(2),
            pop_g=np.zeros(3),
            pop_e=np.zeros(3),
            x_g=np.zeros(3),
            p_g=np.zeros(3),
            x_e=np.zeros(3),
            p_e=np.zeros(3),
            norm=np.zeros(3),
        )


def test_kinetic_term_lowers_the_echo() -> None:
    tau = 0.2
    moving = ModelParams(m=1.0, omega=1.0, force=6.0)
    frozen = ModelParams(m=1.0, omega=1.0, force=6.0, kinetic_enabled=False)
    grid = auto_grid(moving, 3 * tau, n=1024)
    on = measure_echo(moving, math.pi / 2, tau, grid)
    off = measure_echo(frozen, math.pi / 2, tau, grid)
    assert off.rephasing_intensity == pytest.approx(0.0625, abs=1e-8)
    assert on.rephasing_intensity < 0.99 * off.rephasing_intensity
    assert on.intensity < off.intensity


@pytest.mark.parametrize(("tau", "lo", "hi"), [(0.1, -0.05, 0.05), (0.5, 0.2, 0.35)])
def test_echo_peak_arrives_early_with_kinetic_term(tau: float, lo: float, hi: float) -> None:
    # Early arrival grows like 2 tau^3 at unit Omega, so only short delays stay within 5%.
    params = ModelParams(m=1.0, omega=1.0, force=6.0)
    echo = measure_echo(params, math.pi / 2, tau, auto_grid(params, 3 * tau, n=1024))
    assert not echo.no_echo
    assert lo * tau <= tau - echo.t_peak < hi * tau


def test_impulsive_run_on_a_fine_grid_is_fast(impulsive_params) -> None:
    grid = make_grid(4096, 12.8)
    tau = 2.0
    schedule = two_pulse_schedule(impulsive_params, math.pi / 2, tau, dt=tau / 1667, record_stride=250)
    assert schedule.n_steps >= 5000
    start = time.perf_counter()
    series = run_schedule(impulsive_params, schedule, None, grid)
    elapsed = time.perf_counter() - start
    assert abs(_value_at(series, tau)) ** 2 == pytest.approx(0.0625, abs=1e-3)
    assert elapsed < 1.0
