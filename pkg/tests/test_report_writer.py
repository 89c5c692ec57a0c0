import json
import math
from pathlib import Path

import numpy as np
import pytest

from catecho.analysis import SweepResult, SweepRow, compare_models, fit_decay
from catecho.analytic import predicted_echo_intensity
from catecho.core import Expectations, UnitSystem
from catecho.model import ModelParams
from catecho.propagator import TimeSeriesRecorder
from catecho.report import PREDICT_HEADER, SWEEP_HEADER, TIMESERIES_HEADER, ReportWriter
from catecho.utils import atomic_write_text, format_float, slugify


def _quartic_sweep() -> SweepResult:
    taus = np.linspace(0.6, 1.3, 8)
    return SweepResult.from_arrays(taus, np.exp(-0.5 * taus**4), engine="full")


def test_timeseries_csv_uses_config_units(tmp_path: Path) -> None:
    recorder = TimeSeriesRecorder()
    stats = Expectations(pop_g=0.5, pop_e=0.5, x_g=0.0, p_g=0.0, x_e=0.1, p_e=2.0)
    recorder.add(1.0, 0.3 + 0.4j, stats, 1.0)
    units = UnitSystem.femtosecond()
    writer = ReportWriter(tmp_path, to_config=units.to_physical)
    path = writer.write_timeseries(recorder.build())
    lines = path.read_text(encoding="utf-8").split("\n")
    assert lines[0] == ",".join(TIMESERIES_HEADER)
    cells = lines[1].split(",")
    assert float(cells[0]) == pytest.approx(10.0)
    assert cells[1:4] == ["0.3", "0.4", format_float(abs(0.3 + 0.4j) ** 2)]
    assert lines[-1] == ""
    assert writer.written == [path]


def test_sweep_csv_flags_missing_echoes(tmp_path: Path) -> None:
    rows = [
        SweepRow(tau=1.0, intensity=0.5, t_peak=1.01, no_echo=False),
        SweepRow(tau=2.0, intensity=1e-14, t_peak=1.0, no_echo=True),
    ]
    path = ReportWriter(tmp_path).write_sweep(SweepResult(rows=rows))
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(SWEEP_HEADER)
    assert lines[1] == "1.0,0.5,1.01,0"
    assert lines[2].endswith(",1")


def test_fit_payload_quotes_coefficient_in_config_time(tmp_path: Path) -> None:
    sweep = _quartic_sweep()
    fit = fit_decay(sweep)
    comparison = compare_models(sweep)
    units = UnitSystem.femtosecond()
    payload = ReportWriter(tmp_path, to_config=units.to_physical).fit_payload(fit, comparison, 1.0)
    # One internal time unit is 10 fs, so c per fs^4 is c / 10^4.
    assert payload["c_fixed_q4"] == pytest.approx(0.5e-4, rel=1e-9)
    assert payload["q"] == pytest.approx(4.0, abs=1e-3)
    assert payload["winner"] == 4.0
    assert [model["q"] for model in payload["models"]] == [1.0, 2.0, 4.0]


def test_fit_json_embeds_sweep_and_config(tmp_path: Path) -> None:
    sweep = _quartic_sweep()
    writer = ReportWriter(tmp_path)
    payload = writer.fit_payload(fit_decay(sweep), compare_models(sweep), math.nan)
    path = writer.write_fit(payload, sweep, {"source": "test"})
    body = json.loads(path.read_text(encoding="utf-8"))
    assert body["sweep"]["engine"] == "full"
    assert body["config"] == {"source": "test"}
    assert body["ratio"] is None
    assert "NaN" not in path.read_text(encoding="utf-8")


def test_predict_csv_keeps_requested_delays(tmp_path: Path) -> None:
    params = ModelParams(m=1.0, omega=1.0, force=3.0)
    taus = [0.0, 0.1, 0.7]
    predictions = [predicted_echo_intensity(t, params) for t in taus]
    path = ReportWriter(tmp_path).write_predict(taus, predictions)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(PREDICT_HEADER)
    assert [line.split(",")[0] for line in lines[1:]] == ["0.0", "0.1", "0.7"]


def test_markdown_report_renders_tables(tmp_path: Path) -> None:
    path = ReportWriter(tmp_path).write_markdown(
        "catecho sweep", [("Models", ["q", "residual"], [[4.0, 1e-6], [2.0, 0.05]])]
    )
    content = path.read_text(encoding="utf-8")
    assert content.startswith("# catecho sweep")
    assert "## Models" in content
    assert "residual" in content
    assert content.count("|") >= 9


def test_atomic_write_leaves_no_temp_files(tmp_path: Path) -> None:
    target = tmp_path / "nested" / "out.txt"
    atomic_write_text(target, "first\n")
    atomic_write_text(target, "second\n")
    assert target.read_text(encoding="utf-8") == "second\n"
    assert [p.name for p in target.parent.iterdir()] == ["out.txt"]


def test_slugify_and_float_format() -> None:
    assert slugify("Decay Sweep #2") == "decay-sweep-2"
    assert slugify("///") == "run"
    assert format_float(0.1) == "0.1"
    assert float(format_float(1 / 3)) == 1 / 3
