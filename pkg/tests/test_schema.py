import math

import pytest

from catecho.analytic import half_intensity_delay
from catecho.schema import PRESETS, ConfigValidationError, config_summary, load_config


def test_default_preset_is_impulsive() -> None:
    config = load_config()
    assert config.preset == "impulsive"
    params = config.params()
    assert params.force == 3.0
    assert not params.kinetic_enabled
    assert config.pulse.phi == pytest.approx(math.pi / 2)
    assert config.sweep.engine == "impulsive"
    assert len(config.sha256) == 64


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_every_preset_builds_a_runnable_experiment(name: str) -> None:
    config = load_config(preset=name)
    schedule = config.build_schedule()
    grid = config.run_grid()
    assert len(schedule.pulses) == 2
    assert grid.n == 4096
    assert len(config.sweep_taus()) == 10


def test_femtosecond_preset_converts_units() -> None:
    config = load_config(preset="femtosecond")
    params = config.params()
    assert config.tau_internal() == pytest.approx(2.0)
    assert params.omega == pytest.approx(0.2)
    assert params.omega * config.tau_internal() == pytest.approx(0.4)
    tau_half = config.to_config(half_intensity_delay(params), "time")
    assert 18.0 < tau_half < 22.0
    assert params.force == pytest.approx(2.0 / 0.26119, rel=1e-3)
    taus = config.sweep_taus()
    assert all(5.0 < tau < 30.0 for tau in taus)
    assert params.omega * config.tau_internal(max(taus)) <= 0.5


def test_unknown_key_reports_line(tmp_path) -> None:
    path = tmp_path / "experiment.yaml"
    path.write_text("version: 1\nmodel:\n  m: 1.0\n  mass: 2.0\n", encoding="utf-8")
    with pytest.raises(ConfigValidationError) as excinfo:
        load_config(path)
    assert f"{path}:4: unknown key 'model.mass'" in str(excinfo.value)


def test_version_must_match(write_config) -> None:
    path = write_config({"version": 2})
    with pytest.raises(ConfigValidationError, match="must be 1"):
        load_config(path)


def test_json_config_loads(write_config, small_config) -> None:
    config = load_config(write_config(small_config))
    assert config.grid.extent == 12.8
    assert config.sweep.taus == [2.0, 2.2, 2.4, 2.6, 2.8, 3.0]
    assert config.run_grid().n == 512


def test_config_can_extend_a_preset(tmp_path) -> None:
    path = tmp_path / "short.yaml"
    path.write_text("preset: decay\ntau: 0.3\n", encoding="utf-8")
    config = load_config(path)
    assert config.tau == 0.3
    assert config.params().kinetic_enabled
    assert config.params().force == 6.0


@pytest.mark.parametrize(
    ("raw", "expected"),
    [("pi/2", math.pi / 2), ("2*pi/3", 2 * math.pi / 3), ("pi", math.pi), (1.0, 1.0)],
)
def test_pulse_area_accepts_multiples_of_pi(write_config, raw, expected: float) -> None:
    config = load_config(write_config({"pulse": {"phi": raw}}))
    assert config.pulse.phi == pytest.approx(expected)


@pytest.mark.parametrize(
    "payload",
    [
        {"pulse": {"phi": "half"}},
        {"pulse": {"phi": 7.0}},
        {"model": {"m": -1.0}},
        {"model": {"kinetic_enabled": "yes"}},
        {"tau": 0.0},
        {"grid": {"n": 1000}},
        {"sweep": {"engine": "fast"}},
        {"model": 3},
    ],
)
def test_invalid_values_are_rejected(write_config, payload) -> None:
    with pytest.raises(ConfigValidationError):
        load_config(write_config(payload))


def test_invalid_yaml_is_reported(tmp_path) -> None:
    path = tmp_path / "broken.yaml"
    path.write_text("model: [unclosed\n", encoding="utf-8")
    with pytest.raises(ConfigValidationError, match="invalid YAML"):
        load_config(path)


def test_config_and_preset_are_exclusive(write_config) -> None:
    with pytest.raises(ConfigValidationError):
        load_config(write_config({}), preset="decay")
    with pytest.raises(ConfigValidationError, match="Unknown preset"):
        load_config(preset="nanosecond")


def test_worker_default_comes_from_environment(monkeypatch) -> None:
    monkeypatch.setenv("CATECHO_WORKERS", "3")
    assert load_config().sweep.workers == 3
    monkeypatch.setenv("CATECHO_WORKERS", "many")
    assert load_config().sweep.workers == 1


def test_config_summary_resolves_auto_values() -> None:
    summary = config_summary(load_config(preset="decay"))
    assert summary["config"]["schedule"]["dt"] == "auto"
    resolved = summary["resolved"]
    assert resolved["schedule"]["dt"] > 0
    assert resolved["grid"]["n"] == 4096
    assert resolved["params"]["kinetic_enabled"] is True
    assert summary["source"].endswith("decay.config.yaml")
