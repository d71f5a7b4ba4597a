"""CLI entry point for the OASIS benchmark harness."""

import logging
from pathlib import Path

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from . import __version__
from .config import ConfigError, apply_overrides, load_config
from .harness import (
    build_problem,
    diag_fidelity_experiment,
    emit_fidelity_csv,
    lr_sweep_experiment,
    run_experiment,
)
from .linalg import Rng
from .metrics import emit_csv, read_csv
from .plotting import emit_fidelity_plot, emit_svg_plot
from .report import generate_report
from .report_markdown import generate_markdown_report
from .verify import emit_report_csv, run_suite

console = Console()

# Exit codes
EXIT_CONFIG_ERROR = 1
EXIT_RUNTIME_ABORT = 2


def _fail(message: str, code: int) -> None:
    console.print(f"[red]Error:[/red] {message}")
    raise SystemExit(code)


def _load(config_path: Path, **overrides):
    try:
        return apply_overrides(load_config(config_path), **overrides)
    except (ConfigError, OSError) as e:
        _fail(str(e), EXIT_CONFIG_ERROR)


def _prepare(config):
    try:
        with console.status("[bold blue]Preparing problem and reference solution..."):
            return build_problem(config)
    except (ValueError, OSError) as e:
        _fail(str(e), EXIT_CONFIG_ERROR)
    except RuntimeError as e:
        _fail(str(e), EXIT_RUNTIME_ABORT)


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.6g}"


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Show per-iteration debug logging")
@click.version_option(version=__version__, prog_name="oasis-bench")
def main(verbose: bool) -> None:
    """Run OASIS optimizer experiments and empirical theory checks."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


@main.command()
@click.option(
    "--config",
    "-c",
    "config_path",
    type=click.Path(path_type=Path),
    required=True,
    help="Experiment config file (key = value lines)",
)
@click.option("--seed-count", "-n", type=int, default=None, help="Run seeds 0..N-1 instead of the configured list")
@click.option(
    "--out",
    "-o",
    type=click.Path(file_okay=False, path_type=Path),
    default=Path("results"),
    help="Output directory (default: results)",
)
@click.option("--optimizer", default=None, help="Override the configured optimizer")
@click.option("--lr", type=float, default=None, help="Override the learning rate (eta_0 for adaptive OASIS)")
@click.option("--max-passes", type=float, default=None, help="Override the effective-pass budget")
@click.option("--batch-size", type=int, default=None, help="Override the batch size (0 = full batch)")
@click.option("--plot", "plot_metric", default=None, help="Also write an SVG of this metric")
@click.option("--sweep", is_flag=True, help="Compare untuned OASIS against the configured lr grid")
def run(
    config_path: Path,
    seed_count: int | None,
    out: Path,
    optimizer: str | None,
    lr: float | None,
    max_passes: float | None,
    batch_size: int | None,
    plot_metric: str | None,
    sweep: bool,
) -> None:
    """Run an experiment for every seed and write its metrics CSV."""
    seeds = tuple(range(seed_count)) if seed_count is not None else None
    config = _load(
        config_path,
        seeds=seeds,
        optimizer=optimizer,
        lr=lr,
        max_passes=max_passes,
        batch_size=batch_size,
    )
    console.print(f"[bold]OASIS Bench[/bold] v{__version__}")
    console.print(f"[dim]Experiment:[/dim] {config.name} ({config.optimizer}, {config.loss})")
    console.print(f"[dim]Seeds:[/dim] {', '.join(str(s) for s in config.seeds)}")
    console.print()

    prepared = _prepare(config)
    console.print(
        f"[dim]Training set: {prepared.train.n_samples} samples, {prepared.train.dim} features[/dim]"
    )
    if prepared.reference is not None and not prepared.reference.converged:
        console.print("[yellow]Reference solve did not converge; gap columns are omitted.[/yellow]")

    out.mkdir(parents=True, exist_ok=True)
    if sweep:
        _run_sweep(config, prepared, out)
        return

    with console.status(f"[bold blue]Running {config.optimizer}..."):
        records = run_experiment(config, prepared)

    table = Table(title="Final metrics")
    for column in ("Seed", "Status", "Passes", "Loss", "Gap", "||grad||^2", "Test acc."):
        table.add_column(column)
    for record in records:
        final = record.final
        table.add_row(
            str(record.seed),
            record.status,
            f"{final.passes:.4g}",
            _fmt(final.loss),
            _fmt(final.gap),
            _fmt(final.grad_norm_sq),
            _fmt(final.test_accuracy),
        )
    console.print(table)

    csv_path = out / f"{config.name}-{config.optimizer}.csv"
    emit_csv(records, csv_path)
    console.print(f"[green]Metrics saved to:[/green] {csv_path}")
    if plot_metric:
        svg_path = out / f"{config.name}-{config.optimizer}-{plot_metric}.svg"
        try:
            emit_svg_plot(records, plot_metric, svg_path)
        except ValueError as e:
            _fail(str(e), EXIT_CONFIG_ERROR)
        console.print(f"[green]Plot saved to:[/green] {svg_path}")

    if not all(record.ok for record in records):
        console.print("[yellow]Some seeds aborted; see the status column.[/yellow]")
        raise SystemExit(EXIT_RUNTIME_ABORT)


def _run_sweep(config, prepared, out: Path) -> None:
    try:
        with console.status(f"[bold blue]Sweeping {config.sweep_optimizer} learning rates..."):
            result = lr_sweep_experiment(config, prepared=prepared)
    except ValueError as e:
        _fail(str(e), EXIT_RUNTIME_ABORT)

    table = Table(title=f"{result.optimizer} learning-rate grid vs untuned OASIS")
    table.add_column("Method")
    table.add_column("Mean final gap")
    for lr, gap in zip(result.grid, result.grid_gaps):
        table.add_row(f"{result.optimizer} lr={lr:g}", _fmt(gap))
    table.add_row("[bold]oasis (default)[/bold]", _fmt(result.oasis_gap))
    console.print(table)
    console.print(f"  Best grid gap:  [cyan]{result.best_gap:.6g}[/cyan]")
    console.print(f"  Worst grid gap: [cyan]{result.worst_gap:.6g}[/cyan]")
    console.print(f"  OASIS / best:   [cyan]{result.ratio_to_best:.3g}[/cyan]")

    records = [record for runs in result.records.values() for record in runs]
    csv_path = out / f"{config.name}-sweep.csv"
    emit_csv(records, csv_path)
    console.print(f"[green]Sweep metrics saved to:[/green] {csv_path}")


@main.command()
@click.option("--dim", type=int, default=100, show_default=True, help="Matrix dimension")
@click.option("--iters", type=int, default=500, show_default=True, help="Hutchinson samples")
@click.option("--beta2", type=float, default=0.99, show_default=True, help="EMA decay for the OASIS and AdaHessian estimates")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option(
    "--out",
    "-o",
    type=click.Path(file_okay=False, path_type=Path),
    default=Path("results"),
    help="Output directory (default: results)",
)
def fidelity(dim: int, iters: int, beta2: float, seed: int, out: Path) -> None:
    """Compare diagonal estimates on a random symmetric matrix."""
    if not 0.0 < beta2 < 1.0:
        _fail("--beta2 must lie in (0, 1)", EXIT_CONFIG_ERROR)
    try:
        with console.status("[bold blue]Sampling Hutchinson estimates..."):
            result = diag_fidelity_experiment(dim, iters, beta2, Rng(seed))
    except ValueError as e:
        _fail(str(e), EXIT_CONFIG_ERROR)

    console.print("[bold]Relative diagonal error after the last sample:[/bold]")
    console.print(f"  Running mean: [cyan]{result.running_mean[-1]:.4g}[/cyan]")
    console.print(f"  OASIS:        [cyan]{result.oasis[-1]:.4g}[/cyan]")
    console.print(f"  AdaHessian:   [cyan]{result.adahessian[-1]:.4g}[/cyan]")

    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "fidelity.csv"
    svg_path = out / "fidelity.svg"
    emit_fidelity_csv(result, csv_path)
    emit_fidelity_plot(result, svg_path)
    console.print(f"[green]Series saved to:[/green] {csv_path}")
    console.print(f"[green]Plot saved to:[/green] {svg_path}")


@main.command()
@click.option(
    "--suite",
    type=click.Choice(["all", "lemmas", "theorems", "equivalence", "estimator"]),
    default="all",
    show_default=True,
)
@click.option("--seeds", default="0,1,2", show_default=True, help="Comma-separated seeds")
@click.option(
    "--format",
    "-f",
    "output_format",
    type=click.Choice(["md", "pdf"], case_sensitive=False),
    default="md",
    help="Report format next to the CSV: 'md' (default) or 'pdf'",
)
@click.option(
    "--out",
    "-o",
    type=click.Path(file_okay=False, path_type=Path),
    default=Path("results"),
    help="Output directory (default: results)",
)
def verify(suite: str, seeds: str, output_format: str, out: Path) -> None:
    """Run the theory-check suite and write its report."""
    try:
        seed_list = tuple(int(s) for s in seeds.split(",") if s.strip())
    except ValueError:
        _fail(f"--seeds must be comma-separated integers, got '{seeds}'", EXIT_CONFIG_ERROR)
    if not seed_list:
        _fail("--seeds must name at least one seed", EXIT_CONFIG_ERROR)

    with console.status(f"[bold blue]Running the '{suite}' checks..."):
        report = run_suite(suite, seed_list)

    console.print("[bold]Summary:[/bold]")
    console.print(f"  Checks:         {report.total}")
    console.print(f"  Passed:         [green]{report.passed}[/green]")
    console.print(f"  Failed:         [red]{report.failed}[/red]")
    console.print(f"  Not applicable: {report.not_applicable}")
    for check in report.checks:
        if not check.passed:
            console.print(f"  [red]FAIL[/red] {check.name} on {check.fixture} (seed {check.seed}): {check.detail}")

    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"verify-{suite}.csv"
    emit_report_csv(report, csv_path)
    report_path = out / f"verify-{suite}.{output_format}"
    if output_format == "pdf":
        with console.status("[bold blue]Generating PDF report..."):
            generate_report(report, report_path)
    else:
        with console.status("[bold blue]Generating Markdown report..."):
            generate_markdown_report(report, report_path)
    console.print(f"[green]Report saved to:[/green] {report_path}")

    if not report.all_passed:
        raise SystemExit(EXIT_RUNTIME_ABORT)


@main.command()
@click.option(
    "--config",
    "-c",
    "config_path",
    type=click.Path(path_type=Path),
    required=True,
    help="Experiment config file (key = value lines)",
)
def reference(config_path: Path) -> None:
    """Solve the configured problem to high accuracy and print F*."""
    config = _load(config_path)
    if config.loss != "logistic":
        _fail("reference solutions need a strongly convex problem (logistic with lambda > 0)", EXIT_CONFIG_ERROR)
    prepared = _prepare(config)
    ref = prepared.reference
    if ref is None:
        _fail("lambda is 0; the problem has no unique minimizer", EXIT_CONFIG_ERROR)

    console.print(f"  F*:          [cyan]{ref.f_star:.17g}[/cyan]")
    console.print(f"  ||grad||^2:  {ref.grad_norm_sq:.3g}")
    console.print(f"  Iterations:  {ref.iterations}")
    console.print(f"  ||w*||:      {float((ref.w_star ** 2).sum()) ** 0.5:.6g}")
    if not ref.converged:
        console.print("[yellow]Reference solve did not reach its tolerance.[/yellow]")
        raise SystemExit(EXIT_RUNTIME_ABORT)


@main.command()
@click.option("--metric", default="gap", show_default=True, help="Metric column to plot")
@click.option(
    "--in",
    "in_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
    help="Metrics CSV written by 'run'",
)
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
def plot(metric: str, in_path: Path, out_path: Path) -> None:
    """Plot a metric from a run CSV as an SVG line chart."""
    try:
        records = read_csv(in_path)
        emit_svg_plot(records, metric, out_path)
    except ValueError as e:
        _fail(str(e), EXIT_CONFIG_ERROR)
    console.print(f"[green]Plot saved to:[/green] {out_path}")


if __name__ == "__main__":
    main()
