"""Command-line interface for geotomo."""

from __future__ import annotations

import sys
from pathlib import Path
from time import perf_counter
from typing import TYPE_CHECKING, Any

import click
from rich.console import Console
from rich.progress import (
    BarColumn,
    Progress,
    SpinnerColumn,
    TaskID,
    TaskProgressColumn,
    TextColumn,
    TimeElapsedColumn,
)
from rich.table import Table

from . import __version__
from .config import create_config
from .errors import EXIT_USAGE, ErrorHandler
from .logging_config import setup_logging
from .models import (
    AnalyzeSummary,
    DecoderMode,
    GenerateSummary,
    GradMethod,
    RunConfig,
    SweepSummary,
    TrainSummary,
)
from .orchestrator import ExperimentOrchestrator

if TYPE_CHECKING:
    from collections.abc import Callable

console = Console()


class GeotomoGroup(click.Group):
    """Click group that reports usage errors with exit code 1."""

    def main(self, *args: Any, standalone_mode: bool = True, **kwargs: Any) -> Any:
        try:
            rv = super().main(*args, standalone_mode=False, **kwargs)
        except click.UsageError as e:
            if not standalone_mode:
                raise
            e.show()
            sys.exit(EXIT_USAGE)
        except click.ClickException as e:
            if not standalone_mode:
                raise
            e.show()
            sys.exit(e.exit_code)
        except click.Abort:
            if not standalone_mode:
                raise
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        if not standalone_mode:
            return rv
        sys.exit(rv if isinstance(rv, int) else 0)


def _progress() -> Progress:
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TaskProgressColumn(),
        TimeElapsedColumn(),
        console=console,
        transient=False,
    )


class _ProgressTasks:
    """One rich task per progress label, created on first use."""

    def __init__(self, progress: Progress, verb: str):
        self.progress = progress
        self.verb = verb
        self.tasks: dict[str, TaskID] = {}

    def __call__(self, current: int, total: int, label: str) -> None:
        key = label if self.verb == "Generating" else self.verb
        if key not in self.tasks:
            self.tasks[key] = self.progress.add_task(f"[cyan]{self.verb} {key}", total=total)
        self.progress.update(
            self.tasks[key],
            completed=current,
            total=total,
            description=f"[cyan]{self.verb} {label}",
        )


def _run(
    ctx: click.Context,
    command: str,
    overrides: dict[str, Any],
    body: Callable[[ExperimentOrchestrator, RunConfig], None],
    verb: str | None = None,
) -> None:
    """Build config and orchestrator, run ``body`` and map failures to exit codes."""
    verbose = bool(ctx.obj.get("verbose"))
    logger = setup_logging(verbose=verbose)
    error_handler = ErrorHandler(logger)
    start_time = perf_counter()
    try:
        config = create_config(ctx.obj.get("config_file"), verbose=verbose or None, **overrides)
        orchestrator = ExperimentOrchestrator(config, logger)
        if verbose:
            _display_config(config)
        if verb is None:
            body(orchestrator, config)
        else:
            with _progress() as progress:
                orchestrator.progress_callback = _ProgressTasks(progress, verb)
                body(orchestrator, config)
    except Exception as e:
        result = error_handler.handle_error(
            e, {"command": command, "elapsed": perf_counter() - start_time}
        )
        console.print(f"[bold red]Error:[/bold red] {result.message}", style="red")
        sys.exit(result.exit_code)


def _display_config(config: RunConfig) -> None:
    table = Table(title="Configuration", show_header=True, header_style="bold")
    table.add_column("Setting", style="cyan")
    table.add_column("Value", style="magenta")
    for name, value in vars(config).items():
        table.add_row(name, str(getattr(value, "value", value)))
    console.print(table)


def display_generate_summary(summary: GenerateSummary) -> None:
    """Print channel counts and the purity histogram."""
    table = Table(title="Channel Counts", show_header=True, header_style="bold")
    table.add_column("Channel", style="cyan")
    table.add_column("States", style="magenta", justify="right")
    for channel, count in sorted(summary.channel_counts.items()):
        table.add_row(channel, str(count))
    console.print(table)

    hist = Table(title="Purity Histogram", show_header=True, header_style="bold")
    hist.add_column("Purity", style="cyan")
    hist.add_column("States", style="magenta", justify="right")
    for lower, upper, count in summary.purity_histogram:
        hist.add_row(f"[{lower:.3f}, {upper:.3f})", str(count))
    console.print(hist)
    console.print(
        f"[green]✓[/green] Wrote {summary.train_path} and {summary.val_path} "
        f"({summary.elapsed:.2f}s)"
    )


def display_train_summary(summary: TrainSummary) -> None:
    """Print the best epoch and the validation fidelity of the checkpoint."""
    history = summary.history
    table = Table(title="Training Summary", show_header=True, header_style="bold")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="magenta")
    table.add_row("Epochs", str(len(history.records)))
    table.add_row("Best Epoch", str(history.best_epoch))
    table.add_row("Stopped Early", str(history.stopped_early))
    table.add_row("Mean Validation Fidelity", f"{summary.evaluation.mean_fidelity:.4f}")
    table.add_row("Median Validation Fidelity", f"{summary.evaluation.median_fidelity:.4f}")
    for channel, mean in sorted(summary.evaluation.per_channel.items()):
        table.add_row(f"  {channel}", f"{mean:.4f}")
    table.add_row("Parameters", str(summary.parameter_counts["total"]))
    table.add_row("Total Time", f"{summary.elapsed:.2f}s")
    console.print(table)
    console.print(f"[green]✓[/green] Checkpoint: {summary.checkpoint_path}")
    console.print(f"[green]✓[/green] History: {summary.history_path}")


def display_analyze_summary(summary: AnalyzeSummary) -> None:
    """Print correlation, dimension and curvature statistics."""
    report = summary.report
    corr = report.correlation
    table = Table(title="Latent Geometry", show_header=True, header_style="bold")
    table.add_column("Statistic", style="cyan")
    table.add_column("Value", style="magenta")
    table.add_row("Pairs", str(corr.n_pairs))
    if corr.error:
        table.add_row("Correlation", f"[yellow]{corr.error}[/yellow]")
    else:
        table.add_row("Pearson r", f"{corr.pearson_r:.4f} (p={corr.pearson_p:.3g})")
        table.add_row("Spearman rho", f"{corr.spearman_rho:.4f} (p={corr.spearman_p:.3g})")
        table.add_row("R²", f"{corr.r_squared:.4f}")
        table.add_row("Fit", f"d_L = {corr.slope:.4f}·d_B + {corr.intercept:.4f}")
        table.add_row("Strength", corr.strength.value)
    dims = report.dimensions
    table.add_row("MLE Dimension", f"{dims.mle_mean:.2f} ± {dims.mle_std:.2f}")
    table.add_row("PCA Dimension (95% / 99%)", f"{dims.d_pca_95} / {dims.d_pca_99}")
    table.add_row("Curvature κ", f"{report.curvature.mean:.3f} ± {report.curvature.std:.3f}")
    table.add_row("Mean Fidelity", f"{summary.evaluation.mean_fidelity:.4f}")
    console.print(table)

    bins = Table(title="Distance to Fidelity", show_header=True, header_style="bold")
    for column in ("Latent Distance", "Interpretation", "Pairs", "Mean d_B", "Mean F"):
        bins.add_column(column)
    for b in report.distance_table:
        bins.add_row(
            f"[{b.lower:.1f}, {b.upper:.1f})",
            b.label,
            str(b.count),
            f"{b.mean_bures:.4f}" if b.count else "-",
            f"{b.mean_fidelity:.4f}" if b.count else "-",
        )
    console.print(bins)
    console.print(f"[green]✓[/green] Wrote {len(summary.outputs)} report files")


def display_sweep_summary(summary: SweepSummary) -> None:
    """Print one row per metric weight."""
    table = Table(title="Lambda Sweep", show_header=True, header_style="bold")
    for column in ("λ", "Validation F", "Pearson r", "R²"):
        table.add_column(column, justify="right")
    for row in summary.rows:
        table.add_row(
            f"{row.lambda_metric:g}",
            f"{row.val_fidelity:.4f}",
            f"{row.pearson_r:.4f}",
            f"{row.r_squared:.4f}",
        )
    console.print(table)
    console.print(f"[green]✓[/green] Summary: {summary.summary_path}")


def parse_lambda_values(value: str) -> list[float]:
    """Parse a comma-separated list of non-negative floats."""
    items = [item.strip() for item in value.split(",") if item.strip()]
    if not items:
        raise click.BadParameter("at least one lambda value is required")
    try:
        values = [float(item) for item in items]
    except ValueError as e:
        raise click.BadParameter(f"not a number: {e}") from e
    if any(v < 0 for v in values):
        raise click.BadParameter("lambda values must be non-negative")
    return values


def _decoder(value: str | None) -> DecoderMode | None:
    return None if value is None else DecoderMode(value)


def _grad_method(value: str | None) -> GradMethod | None:
    return None if value is None else GradMethod(value)


def training_options(func: Callable[..., None]) -> Callable[..., None]:
    """Attach the training hyperparameter options shared by train and sweep-lambda."""
    options = [
        click.option("--epochs", type=click.IntRange(min=1), default=None, help="Max epochs."),
        click.option("--batch-size", type=click.IntRange(min=1), default=None),
        click.option("--learning-rate", type=click.FloatRange(min=0.0), default=None),
        click.option("--pairs-per-batch", type=click.IntRange(min=1), default=None),
        click.option("--patience", type=click.IntRange(min=1), default=None),
        click.option(
            "--decoder",
            type=click.Choice([m.value for m in DecoderMode]),
            default=None,
            help="Decoder variant. Default: corrected.",
        ),
        click.option(
            "--grad-method",
            type=click.Choice([m.value for m in GradMethod]),
            default=None,
            help="Circuit derivative method. Default: shift-rule.",
        ),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def analysis_options(func: Callable[..., None]) -> Callable[..., None]:
    """Attach the geometry options shared by analyze and sweep-lambda."""
    options = [
        click.option(
            "--pairs", type=click.IntRange(min=2), default=None, help="Random state pairs."
        ),
        click.option("--k-mle", type=click.IntRange(min=2), default=None),
        click.option("--k-curv", type=click.IntRange(min=2), default=None),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def common_options(func: Callable[..., None]) -> Callable[..., None]:
    """Attach --seed and --output-dir."""
    func = click.option(
        "--output-dir",
        "-o",
        type=click.Path(file_okay=False, path_type=Path),
        default=None,
        help="Directory for output files. Default: runs.",
    )(func)
    return click.option(
        "--seed",
        type=click.IntRange(min=0),
        default=None,
        help="Random seed. Default: $GEOTOMO_SEED or 0.",
    )(func)


@click.group(cls=GeotomoGroup, context_settings={"help_option_names": ["--help", "-h"]})
@click.option("--verbose", "-v", is_flag=True, default=False, help="Enable verbose logging.")
@click.option(
    "--config",
    "config_file",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="JSON file with run settings. Flags take precedence.",
)
@click.version_option(__version__, "--version", prog_name="geotomo")
@click.pass_context
def main(ctx: click.Context, verbose: bool, config_file: Path | None) -> None:
    """Geometric latent-space tomography of two-qubit states.

    Examples:

        # Generate 2000 training and 500 validation states
        geotomo generate -o runs

        # Train with the default metric weight
        geotomo train runs/train.jsonl runs/val.jsonl -o runs

        # Analyze the latent space of the best checkpoint
        geotomo analyze runs/checkpoint.jsonl runs/train.jsonl runs/val.jsonl -o runs

        # Compare metric weights
        geotomo sweep-lambda runs/train.jsonl runs/val.jsonl --values 0,0.06
    """
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose
    ctx.obj["config_file"] = config_file


@main.command()
@click.option("--n-train", type=click.IntRange(min=1), default=None, help="Training states.")
@click.option("--n-val", type=click.IntRange(min=1), default=None, help="Validation states.")
@click.option("--purity-min", type=float, default=None, help="Lower purity target.")
@click.option("--purity-max", type=float, default=None, help="Upper purity target.")
@click.option("--n-qubits", type=click.IntRange(min=1), default=None)
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Worker processes.")
@common_options
@click.pass_context
def generate(
    ctx: click.Context,
    n_train: int | None,
    n_val: int | None,
    purity_min: float | None,
    purity_max: float | None,
    n_qubits: int | None,
    workers: int | None,
    seed: int | None,
    output_dir: Path | None,
) -> None:
    """Generate training and validation datasets."""

    def body(orchestrator: ExperimentOrchestrator, _config: RunConfig) -> None:
        display_generate_summary(orchestrator.generate())

    _run(
        ctx,
        "generate",
        {
            "n_train": n_train,
            "n_val": n_val,
            "purity_min": purity_min,
            "purity_max": purity_max,
            "n_qubits": n_qubits,
            "parallel_workers": workers,
            "seed": seed,
            "output_dir": output_dir,
        },
        body,
        verb="Generating",
    )


@main.command()
@click.argument("train_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("val_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--lambda-metric", type=click.FloatRange(min=0.0), default=None)
@training_options
@common_options
@click.pass_context
def train(
    ctx: click.Context,
    train_file: Path,
    val_file: Path,
    lambda_metric: float | None,
    epochs: int | None,
    batch_size: int | None,
    learning_rate: float | None,
    pairs_per_batch: int | None,
    patience: int | None,
    decoder: str | None,
    grad_method: str | None,
    seed: int | None,
    output_dir: Path | None,
) -> None:
    """Train the autoencoder and write a checkpoint and history CSV."""

    def body(orchestrator: ExperimentOrchestrator, _config: RunConfig) -> None:
        summary = orchestrator.train(train_file, val_file)
        display_train_summary(summary)

    _run(
        ctx,
        "train",
        {
            "lambda_metric": lambda_metric,
            "epochs_max": epochs,
            "batch_size": batch_size,
            "learning_rate": learning_rate,
            "pairs_per_batch": pairs_per_batch,
            "patience": patience,
            "decoder": _decoder(decoder),
            "grad_method": _grad_method(grad_method),
            "seed": seed,
            "output_dir": output_dir,
        },
        body,
        verb="Training",
    )


@main.command()
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument(
    "datasets",
    nargs=-1,
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
)
@analysis_options
@common_options
@click.pass_context
def analyze(
    ctx: click.Context,
    checkpoint: Path,
    datasets: tuple[Path, ...],
    pairs: int | None,
    k_mle: int | None,
    k_curv: int | None,
    seed: int | None,
    output_dir: Path | None,
) -> None:
    """Analyze the latent geometry of a checkpoint on one or more datasets."""

    def body(orchestrator: ExperimentOrchestrator, _config: RunConfig) -> None:
        display_analyze_summary(orchestrator.analyze(checkpoint, list(datasets)))

    _run(
        ctx,
        "analyze",
        {
            "n_pairs": pairs,
            "k_mle": k_mle,
            "k_curv": k_curv,
            "seed": seed,
            "output_dir": output_dir,
        },
        body,
    )


@main.command("sweep-lambda")
@click.argument("train_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("val_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option(
    "--values",
    required=True,
    help="Comma-separated metric weights, e.g. 0,0.06.",
)
@training_options
@analysis_options
@common_options
@click.pass_context
def sweep_lambda(
    ctx: click.Context,
    train_file: Path,
    val_file: Path,
    values: str,
    epochs: int | None,
    batch_size: int | None,
    learning_rate: float | None,
    pairs_per_batch: int | None,
    patience: int | None,
    decoder: str | None,
    grad_method: str | None,
    pairs: int | None,
    k_mle: int | None,
    k_curv: int | None,
    seed: int | None,
    output_dir: Path | None,
) -> None:
    """Train and analyze once per metric weight."""
    lambdas = parse_lambda_values(values)

    def body(orchestrator: ExperimentOrchestrator, _config: RunConfig) -> None:
        display_sweep_summary(orchestrator.sweep_lambda(lambdas, train_file, val_file))

    _run(
        ctx,
        "sweep-lambda",
        {
            "epochs_max": epochs,
            "batch_size": batch_size,
            "learning_rate": learning_rate,
            "pairs_per_batch": pairs_per_batch,
            "patience": patience,
            "decoder": _decoder(decoder),
            "grad_method": _grad_method(grad_method),
            "n_pairs": pairs,
            "k_mle": k_mle,
            "k_curv": k_curv,
            "seed": seed,
            "output_dir": output_dir,
        },
        body,
        verb="Training",
    )
