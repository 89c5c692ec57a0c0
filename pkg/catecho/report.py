"""Write run, sweep, fit and validation artifacts as CSV, JSON and Markdown."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from tabulate import tabulate

from .analysis import DecayFit, ModelComparison, MonteCarloSummary, SweepResult, ValidationReport
from .analytic import EchoPrediction
from .observables import EchoMeasurement
from .propagator import TimeSeries
from .utils import atomic_write_json, atomic_write_text, format_float

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt  # type: ignore

    _HAS_MATPLOTLIB = True
except Exception:  # pragma: no cover - optional dependency
    _HAS_MATPLOTLIB = False

TIMESERIES_HEADER = ["t", "re_P", "im_P", "abs_P2", "pop_g", "pop_e", "x_g", "p_g", "x_e", "p_e", "norm"]
SWEEP_HEADER = ["tau", "intensity", "t_peak", "flag"]
PREDICT_HEADER = ["tau", "intensity_ratio"]


def _identity(value: float, quantity: str) -> float:
    return value


@dataclass
class ReportWriter:
    """Writes artifacts into ``artifact_dir``; every file goes through a temp file and rename.

    ``to_config(value, quantity)`` converts internal numbers into config units.
    """

    artifact_dir: Path
    to_config: Any = _identity
    written: List[Path] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.artifact_dir.mkdir(parents=True, exist_ok=True)

    def _record(self, path: Path) -> Path:
        self.written.append(path)
        return path

    def _write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
        return self._record(atomic_write_text(self.artifact_dir / name, buffer.getvalue()))

    def _write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        return self._record(atomic_write_json(self.artifact_dir / name, payload))

    def write_timeseries(self, series: TimeSeries) -> Path:
        conv = self.to_config
        rows = []
        for i in range(len(series)):
            p_value = complex(series.polarization[i])
            rows.append(
                [
                    conv(float(series.times[i]), "time"),
                    p_value.real,
                    p_value.imag,
                    abs(p_value) ** 2,
                    float(series.pop_g[i]),
                    float(series.pop_e[i]),
                    conv(float(series.x_g[i]), "length"),
                    conv(float(series.p_g[i]), "momentum"),
                    conv(float(series.x_e[i]), "length"),
                    conv(float(series.p_e[i]), "momentum"),
                    float(series.norm[i]),
                ]
            )
        return self._write_csv("timeseries.csv", TIMESERIES_HEADER, rows)

    def write_echo(
        self, measurement: Optional[EchoMeasurement], config: Dict[str, Any], extra: Optional[Dict[str, Any]] = None
    ) -> Path:
        conv = self.to_config
        echo: Optional[Dict[str, Any]] = None
        if measurement is not None:
            echo = {
                "tau": conv(measurement.tau, "time"),
                "t_peak": conv(measurement.t_peak, "time"),
                "intensity": measurement.intensity,
                "rephasing_intensity": measurement.rephasing_intensity,
                "background": measurement.background,
                "no_echo": measurement.no_echo,
                "sigma_t": None if measurement.sigma_t is None else conv(measurement.sigma_t, "time"),
            }
        payload: Dict[str, Any] = {"echo": echo, "config": config}
        if extra:
            payload.update(extra)
        return self._write_json("echo.json", payload)

    def write_sweep(self, sweep: SweepResult) -> Path:
        conv = self.to_config
        rows = [
            [conv(row.tau, "time"), row.intensity, conv(row.t_peak, "time"), 1 if row.no_echo else 0]
            for row in sweep.rows
        ]
        return self._write_csv("sweep.csv", SWEEP_HEADER, rows)

    def fit_payload(
        self,
        fit: DecayFit,
        comparison: ModelComparison,
        ratio: float,
        monte_carlo: Optional[MonteCarloSummary] = None,
    ) -> Dict[str, Any]:
        # c carries units of time^-q; quote it per config time unit.
        scale = self.to_config(1.0, "time")

        def coefficient(c: float, q: float) -> float:
            return c if math.isnan(c) else c / scale**q

        payload: Dict[str, Any] = {
            "I0": fit.i0,
            "c": coefficient(fit.c, fit.q),
            "q": fit.q,
            "c_fixed_q4": coefficient(fit.c_fixed_q4, 4.0),
            "residual": fit.residual,
            "residual_q4": fit.residual_q4,
            "indeterminate": fit.indeterminate,
            "profile_unimodal": fit.profile_unimodal,
            "n_rows": fit.n_rows,
            "models": [
                {"q": entry.q, "I0": entry.i0, "c": coefficient(entry.c, entry.q), "residual": entry.residual}
                for entry in comparison.entries
            ],
            "winner": comparison.winner,
            "margin": comparison.margin,
            "decisive": comparison.decisive,
            "ratio": ratio,
        }
        if monte_carlo is not None:
            mc = monte_carlo.to_dict()
            mc["median_c"] = coefficient(mc["median_c"], mc["median_q"])
            mc["median_c_fixed_q4"] = coefficient(mc["median_c_fixed_q4"], 4.0)
            payload["monte_carlo"] = mc
        return payload

    def write_fit(self, payload: Dict[str, Any], sweep: SweepResult, config: Dict[str, Any]) -> Path:
        body = dict(payload)
        body["sweep"] = {
            "engine": sweep.engine,
            "signal": sweep.signal,
            "measure": sweep.measure,
            "phi": sweep.phi,
            "warnings": list(sweep.warnings),
        }
        body["config"] = config
        return self._write_json("fit.json", body)

    def write_predict(self, taus: Sequence[float], predictions: Sequence[EchoPrediction]) -> Path:
        """``taus`` are the requested delays in config units, written verbatim."""
        rows = [[float(tau), p.intensity_ratio] for tau, p in zip(taus, predictions)]
        return self._write_csv("predict.csv", PREDICT_HEADER, rows)

    def write_validation(self, report: ValidationReport, config: Dict[str, Any]) -> Path:
        payload = report.to_dict()
        payload["config"] = config
        return self._write_json("validation.json", payload)

    def write_markdown(self, title: str, sections: Sequence[tuple], chart_path: Optional[Path] = None) -> Path:
        """``sections`` holds (heading, headers, rows) triples rendered as pipe tables."""
        lines = [f"# {title}", ""]
        for heading, headers, rows in sections:
            lines.append(f"## {heading}")
            lines.append("")
            lines.append(tabulate(rows, headers=headers, tablefmt="github", floatfmt=".6g"))
            lines.append("")
        if chart_path is not None:
            lines.append(f"![Echo decay]({chart_path.name})")
            lines.append("")
        return self._record(atomic_write_text(self.artifact_dir / "report.md", "\n".join(lines)))

    def write_chart(self, sweep: SweepResult, fit: Optional[DecayFit] = None) -> Optional[Path]:
        """ln I against tau^4; straight for the quartic law. Needs matplotlib."""
        usable = [row for row in sweep.rows if not row.no_echo and row.intensity > 0]
        if not _HAS_MATPLOTLIB or not usable:
            return None
        chart_path = self.artifact_dir / "decay_chart.png"
        tau4 = [self.to_config(row.tau, "time") ** 4 for row in usable]
        log_i = [math.log(row.intensity) for row in usable]
        plt.figure(figsize=(6, 4))
        plt.plot(tau4, log_i, "o", label="measured")
        if fit is not None and not fit.indeterminate:
            scale = self.to_config(1.0, "time")
            line = [math.log(fit.i0_fixed_q4) - fit.c_fixed_q4 * (t4 / scale**4) for t4 in tau4]
            plt.plot(tau4, line, "-", label="q = 4 fit")
        plt.xlabel("tau^4")
        plt.ylabel("ln I")
        plt.legend()
        plt.tight_layout()
        plt.savefig(chart_path, dpi=150)
        plt.close()
        return self._record(chart_path)
