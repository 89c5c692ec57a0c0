"""Typer CLI for catecho."""

from __future__ import annotations

from pathlib import Path
from typing import List, Optional

import numpy as np
import typer
from rich.console import Console
from rich.progress import BarColumn, Progress, TextColumn
from rich.table import Table

from .analysis import (
    CHECK_CODES,
    ENGINES,
    FitError,
    SweepError,
    SweepRow,
    coefficient_ratio,
    compare_models,
    fit_decay,
    monte_carlo_fit,
    sweep_tau,
    validate_pipeline,
)
from .analytic import analytic_series, predicted_echo_intensity
from .core import GridError
from .model import ModelError
from .observables import EchoWindowError, detect_echo
from .otel import emit_run_span, experiment_attributes
from .propagator import WraparoundError, run_phase_cycled, run_schedule
from .remediation import get_guide
from .report import ReportWriter
from .schema import ConfigValidationError, RunConfig, config_summary, load_config
from .utils import slugify

app = typer.Typer(
    add_completion=False,
    help="Simulate vibrational cat-state photon echoes: run, sweep, predict and validate.",
)

console = Console()

ConfigOption = typer.Option(None, "--config", "-c", help="Experiment config (JSON or YAML).")
PresetOption = typer.Option(None, "--preset", help="Bundled preset (impulsive|decay|femtosecond).")
OutDirOption = typer.Option(None, "--out-dir", help="Directory for artifacts (default: ./.catecho/<name>).")


@app.callback(invoke_without_command=True)
def root(ctx: typer.Context) -> None:
    """Show onboarding guidance when no command is provided."""
    if ctx.invoked_subcommand is not None:
        return
    console.print("catecho: vibrational cat-state photon echoes", style="bold")
    console.print("Quickstart:")
    console.print("  catecho run")
    console.print("  catecho sweep --preset decay")
    console.print("  catecho validate")
    console.print("Run `catecho help` for more.")
    raise typer.Exit(code=0)


def _load(config: Optional[Path], preset: Optional[str]) -> RunConfig:
    try:
        return load_config(config, preset=preset)
    except ConfigValidationError as exc:
        raise typer.BadParameter(str(exc)) from exc


def _label(config: RunConfig, path: Optional[Path]) -> str:
    if path is not None:
        return path.stem
    return config.preset or "impulsive"


def _resolve_out_dir(out_dir: Optional[Path], label: str) -> Path:
    target = out_dir or (Path.cwd() / ".catecho" / slugify(label))
    target.mkdir(parents=True, exist_ok=True)
    return target


def _parse_taus(raw: Optional[str]) -> Optional[List[float]]:
    if raw is None or raw.strip().lower() == "auto":
        return None
    try:
        values = [float(item) for item in raw.split(",") if item.strip()]
    except ValueError as exc:
        raise typer.BadParameter(f"--tau expects a comma-separated list of numbers, got {raw!r}") from exc
    if not values:
        raise typer.BadParameter("--tau list is empty")
    return values


def _summary(config: RunConfig) -> dict:
    try:
        return config_summary(config)
    except (ModelError, GridError) as exc:
        raise typer.BadParameter(str(exc)) from exc


def _render_echo(label: str, config: RunConfig, echo) -> None:
    table = Table(title=f"Echo — {label}", expand=False)
    table.add_column("Metric", style="bold cyan")
    table.add_column("Value")
    table.add_row("tau", f"{config.tau:.6g}")
    table.add_row("t_peak", f"{config.to_config(echo.t_peak, 'time'):.6g}")
    table.add_row("|P|^2 at peak", f"{echo.intensity:.6g}")
    table.add_row("background", f"{echo.background:.3g}")
    table.add_row("status", "NO ECHO" if echo.no_echo else "ECHO")
    console.print(table)


def _render_fit(payload: dict) -> None:
    table = Table(title="Decay fit", expand=False)
    table.add_column("Quantity", style="bold magenta")
    table.add_column("Value")
    if payload["indeterminate"]:
        table.add_row("q", "indeterminate (flat intensities)")
    else:
        table.add_row("q", f"{payload['q']:.4f}")
        table.add_row("c", f"{payload['c']:.6g}")
    table.add_row("c (q=4)", f"{payload['c_fixed_q4']:.6g}")
    table.add_row("c (q=4) / predicted", f"{payload['ratio']:.4g}")
    winner = payload["winner"]
    table.add_row("best model", "none" if winner is None else f"q={winner:g} (margin {payload['margin']:.3g}x)")
    console.print(table)


def _render_checks(report) -> None:
    table = Table(title="Validation", expand=True)
    table.add_column("Check", style="bold")
    table.add_column("Measured", justify="right")
    table.add_column("Threshold", justify="right")
    table.add_column("Status", style="bold")
    table.add_column("Detail")
    for check in report.checks:
        table.add_row(
            check.code,
            f"{check.measured:.4g}",
            f"{check.threshold:.4g}",
            "PASS" if check.passed else "FAIL",
            check.detail,
        )
    console.print(table)


@app.command("help")
def help_cmd() -> None:
    """Print a compact help reference."""
    console.print("Help — catecho", style="bold")
    console.print("Commands:")
    console.print("  catecho run [--config FILE | --preset NAME] [--engine full|impulsive] [--phase-cycled]")
    console.print("  catecho sweep [--tau 0.3,0.4,...|auto] [--engine full|impulsive]")
    console.print("  catecho predict [--tau 0,5,10,...]")
    console.print("  catecho validate")
    console.print("  catecho explain <CHECK_CODE>")
    console.print(f"Check codes: {', '.join(CHECK_CODES)}")
    console.print("Telemetry: set CATECHO_OTEL_EXPORTER=console|otlp. Sweep workers: CATECHO_WORKERS.")
    console.print("Docs: docs/help.md")


@app.command()
def explain(
    check_code: str = typer.Argument(..., help="Validation check code (e.g. STEP_CONVERGENCE)."),
) -> None:
    """Show what a validation check means and how to fix a failure."""
    guide = get_guide(check_code)
    if guide is None:
        console.print(f"No guidance found for '{check_code}'.", style="yellow")
        console.print(f"Try one of: {', '.join(CHECK_CODES)}.")
        raise typer.Exit(code=1)
    console.print(f"{guide.code_pattern} — {guide.title}", style="bold")
    console.print(f"Why: {guide.why}")
    console.print("Fixes:")
    for idx, step in enumerate(guide.fixes, start=1):
        console.print(f"  {idx}. {step}")


@app.command()
def run(
    config: Optional[Path] = ConfigOption,
    preset: Optional[str] = PresetOption,
    out_dir: Optional[Path] = OutDirOption,
    tau: Optional[float] = typer.Option(None, "--tau", help="Override the delay (config units)."),
    engine: str = typer.Option("full", "--engine", help="full (split-operator) or impulsive (closed form)."),
    phase_cycled: bool = typer.Option(False, "--phase-cycled/--raw", help="Record the phase-cycled echo signal."),
) -> None:
    """Run one two-pulse experiment and write timeseries.csv and echo.json."""
    cfg = _load(config, preset)
    if engine not in ENGINES:
        raise typer.BadParameter(f"--engine must be one of {', '.join(ENGINES)}")
    if tau is not None:
        if not tau > 0:
            raise typer.BadParameter(f"--tau must be positive, got {tau}")
        cfg.tau = tau
    summary = _summary(cfg)
    params = cfg.params()
    try:
        schedule = cfg.build_schedule()
        grid = cfg.run_grid()
        if engine == "impulsive":
            steps = int(round(schedule.t_end / schedule.dt))
            times = schedule.dt * np.arange(steps + 1)
            series = analytic_series(
                cfg.pulse.phi, cfg.tau_internal(), params, grid, times, theta=cfg.pulse.theta, phase_cycled=phase_cycled
            )
        elif phase_cycled:
            series = run_phase_cycled(params, schedule, None, grid)
        else:
            series = run_schedule(params, schedule, None, grid)
    except (ModelError, GridError) as exc:
        raise typer.BadParameter(str(exc)) from exc
    except WraparoundError as exc:
        console.print(f"Propagation aborted: {exc}", style="red")
        raise typer.Exit(code=1) from exc

    label = _label(cfg, config)
    writer = ReportWriter(_resolve_out_dir(out_dir, label), to_config=cfg.to_config)
    csv_path = writer.write_timeseries(series)
    extra = {"engine": engine, "signal": "phase_cycled" if phase_cycled else "raw", "rows": len(series)}
    try:
        echo = detect_echo(series, 0.0, cfg.tau_internal())
    except EchoWindowError as exc:
        console.print(f"No echo measurement: {exc}", style="yellow")
        extra["echo_error"] = str(exc)
        echo = None
        json_path = writer.write_echo(None, summary, extra)
    else:
        json_path = writer.write_echo(echo, summary, extra)
        _render_echo(label, cfg, echo)
    emit_run_span(
        "run",
        label,
        {
            **experiment_attributes(params, grid, schedule),
            "run.rows": len(series),
            "run.engine": engine,
            "echo.intensity": echo.intensity if echo else None,
            "echo.rephasing_intensity": echo.rephasing_intensity if echo else None,
            "echo.no_echo": echo.no_echo if echo else True,
        },
    )
    console.print(f"Time series saved to {csv_path}", style="green")
    console.print(f"Echo report saved to {json_path}", style="green")


@app.command()
def sweep(
    config: Optional[Path] = ConfigOption,
    preset: Optional[str] = PresetOption,
    out_dir: Optional[Path] = OutDirOption,
    tau: Optional[str] = typer.Option(None, "--tau", help="Comma-separated delays (config units) or auto."),
    engine: Optional[str] = typer.Option(None, "--engine", help="full or impulsive (default: config)."),
    workers: Optional[int] = typer.Option(None, "--workers", help="Parallel runs (default: config / CATECHO_WORKERS)."),
) -> None:
    """Measure the echo over a delay window and fit the decay law."""
    cfg = _load(config, preset)
    if engine is not None:
        if engine not in ENGINES:
            raise typer.BadParameter(f"--engine must be one of {', '.join(ENGINES)}")
        cfg.sweep.engine = engine
    taus_override = _parse_taus(tau)
    if taus_override is not None:
        if any(t <= 0 for t in taus_override):
            raise typer.BadParameter("--tau values must be positive")
        cfg.sweep.taus = taus_override
    try:
        taus = cfg.sweep_taus()
    except SweepError as exc:
        raise typer.BadParameter(str(exc)) from exc
    if len(taus) < 6:
        raise typer.BadParameter(f"Too few delays for a fit: need at least 6, got {len(taus)}")
    summary = _summary(cfg)
    params = cfg.params()

    progress = Progress(TextColumn("[bold blue]sweep"), BarColumn(), TextColumn("{task.completed}/{task.total}"), console=console)
    try:
        grid = cfg.sweep_grid(taus)
        with progress:
            task = progress.add_task("sweep", total=len(taus))

            def advance(_: SweepRow) -> None:
                progress.advance(task)

            result = sweep_tau(
                params,
                cfg.pulse.phi,
                [cfg.tau_internal(t) for t in taus],
                engine=cfg.sweep.engine,
                grid=grid,
                signal=cfg.sweep.signal,
                measure=cfg.sweep.measure,
                theta=cfg.pulse.theta,
                shape=cfg.shape,
                fwhm=cfg.fwhm_internal,
                dt=cfg.dt_internal,
                workers=workers or cfg.sweep.workers,
                on_row=advance,
            )
    except (ModelError, GridError, SweepError) as exc:
        raise typer.BadParameter(str(exc)) from exc
    except WraparoundError as exc:
        console.print(f"Propagation aborted: {exc}", style="red")
        raise typer.Exit(code=1) from exc
    for note in result.warnings:
        console.print(f"Warning: {note}", style="yellow")

    label = _label(cfg, config)
    writer = ReportWriter(_resolve_out_dir(out_dir, label), to_config=cfg.to_config)
    sweep_path = writer.write_sweep(result)
    try:
        fit = fit_decay(result)
        comparison = compare_models(result)
    except FitError as exc:
        console.print(f"Fit failed: {exc}", style="red")
        console.print(f"Sweep saved to {sweep_path}", style="green")
        raise typer.Exit(code=1) from exc
    monte_carlo = None if fit.indeterminate else monte_carlo_fit(result)
    payload = writer.fit_payload(fit, comparison, coefficient_ratio(fit, params), monte_carlo)
    fit_path = writer.write_fit(payload, result, summary)
    chart_path = writer.write_chart(result, fit)
    rows = [
        [cfg.to_config(row.tau, "time"), row.intensity, cfg.to_config(row.t_peak, "time"), "no echo" if row.no_echo else "echo"]
        for row in result.rows
    ]
    models = [[entry["q"], entry["c"], entry["residual"]] for entry in payload["models"]]
    md_path = writer.write_markdown(
        f"catecho sweep — {label}",
        [
            ("Echo intensity", ["tau", "intensity", "t_peak", "status"], rows),
            ("Fixed-exponent models", ["q", "c", "rms residual"], models),
            (
                "Free-exponent fit",
                ["q", "c", "c (q=4)", "ratio to prediction"],
                [[payload["q"], payload["c"], payload["c_fixed_q4"], payload["ratio"]]],
            ),
        ],
        chart_path,
    )
    _render_fit(payload)
    emit_run_span(
        "sweep",
        label,
        {
            **experiment_attributes(params, grid),
            "sweep.rows": len(result.rows),
            "sweep.engine": result.engine,
            "sweep.measure": result.measure,
            "fit.q": fit.q,
            "fit.indeterminate": fit.indeterminate,
        },
    )
    for path in (sweep_path, fit_path, md_path):
        console.print(f"Saved {path}", style="green")
    if chart_path:
        console.print(f"Chart saved to {chart_path}", style="green")


@app.command()
def predict(
    config: Optional[Path] = ConfigOption,
    preset: Optional[str] = PresetOption,
    out_dir: Optional[Path] = OutDirOption,
    tau: Optional[str] = typer.Option(None, "--tau", help="Comma-separated delays (config units); default: sweep window."),
) -> None:
    """Write the closed-form decay curve I/I0 = exp(-F^2 Omega tau^4 / 2m) to predict.csv."""
    cfg = _load(config, preset)
    taus = _parse_taus(tau)
    if taus is None:
        try:
            taus = cfg.sweep_taus()
        except SweepError as exc:
            raise typer.BadParameter(str(exc)) from exc
    if any(t < 0 for t in taus):
        raise typer.BadParameter("--tau values must be >= 0")
    params = cfg.params()
    predictions = [predicted_echo_intensity(cfg.tau_internal(t), params) for t in taus]
    label = _label(cfg, config)
    writer = ReportWriter(_resolve_out_dir(out_dir, label), to_config=cfg.to_config)
    path = writer.write_predict(taus, predictions)
    emit_run_span("predict", label, {**experiment_attributes(params), "predict.rows": len(taus)})
    console.print(f"Prediction saved to {path}", style="green")


@app.command()
def validate(
    config: Optional[Path] = ConfigOption,
    preset: Optional[str] = PresetOption,
    out_dir: Optional[Path] = OutDirOption,
) -> None:
    """Run the numerical self-checks; exit 0 only when all pass."""
    cfg = _load(config, preset)
    summary = _summary(cfg)
    params = cfg.params()
    grid = cfg.run_grid()
    report = validate_pipeline(
        params,
        cfg.pulse.phi,
        grid,
        tau=cfg.tau_internal(),
        dt=cfg.dt_internal,
        theta=cfg.pulse.theta,
        shape=cfg.shape,
        fwhm=cfg.fwhm_internal,
    )
    _render_checks(report)
    label = _label(cfg, config)
    writer = ReportWriter(_resolve_out_dir(out_dir, label), to_config=cfg.to_config)
    json_path = writer.write_validation(report, summary)
    rows = [
        [c.code, "PASS" if c.passed else "FAIL", c.measured, c.threshold, c.detail] for c in report.checks
    ]
    md_path = writer.write_markdown(
        f"catecho validate — {label}",
        [("Checks", ["check", "status", "measured", "threshold", "detail"], rows)],
    )
    emit_run_span(
        "validate",
        label,
        {
            **experiment_attributes(params, grid),
            "validate.passed": len(report.checks) - len(report.failed),
            "validate.failed": len(report.failed),
        },
    )
    console.print(f"Validation report saved to {json_path}", style="green")
    console.print(f"Summary saved to {md_path}", style="green")
    if not report.ok:
        console.print("Run `catecho explain <CHECK_CODE>` for guidance on failed checks.", style="yellow")
    raise typer.Exit(code=0 if report.ok else 1)


def main() -> None:  # pragma: no cover - entry point
    app()


if __name__ == "__main__":  # pragma: no cover
    main()
