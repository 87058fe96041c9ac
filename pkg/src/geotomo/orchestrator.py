"""Experiment orchestrator for geotomo.

This module coordinates the command flows used by the CLI:
- Dataset generation through StateBatchProcessor
- Training with checkpoint and history persistence
- Latent-space analysis with report files
- Metric-weight sweeps built from the two flows above
"""

from __future__ import annotations

import dataclasses
from time import perf_counter
from typing import TYPE_CHECKING, Any

import numpy as np

from .batch_processor import StateBatchProcessor
from .errors import DatasetFormatError, PreconditionError
from .filesystem import (
    HISTORY_COLUMNS,
    FileSystemHandler,
    check_compatible,
    history_rows,
    load_checkpoint,
    load_dataset,
    save_checkpoint,
    save_dataset,
    write_csv,
    write_json,
)
from .geometry import analyze_latent_space
from .logging_config import (
    get_logger,
    log_operation_complete,
    log_operation_error,
    log_operation_start,
)
from .measurement import pauli_words
from .model import N_QUBITS, count_parameters, encode_trace
from .models import (
    AnalyzeSummary,
    CheckpointInfo,
    DatasetInfo,
    EvaluationResult,
    GenerateSummary,
    GeometryReport,
    RunConfig,
    StateRecord,
    SweepRow,
    SweepSummary,
    TrainSummary,
)
from .stategen import PURITY_TOLERANCE, make_rng
from .training import evaluate, train

if TYPE_CHECKING:
    import logging
    from collections.abc import Callable, Sequence
    from pathlib import Path

TRAIN_FILE = "train.jsonl"
VAL_FILE = "val.jsonl"
CHECKPOINT_FILE = "checkpoint.jsonl"
HISTORY_FILE = "history.csv"
REPORT_FILE = "report.json"
SWEEP_FILE = "sweep_lambda.csv"
SWEEP_COLUMNS = ("lambda", "val_fidelity", "pearson_r", "r_squared")

PURITY_BINS = 10
ANALYSIS_STREAM = 4


class ExperimentOrchestrator:
    """Run generate, train, analyze and sweep flows with one configuration.

    Methods raise on failure; the CLI turns exceptions into exit codes
    through ErrorHandler.
    """

    def __init__(
        self,
        config: RunConfig,
        logger: logging.Logger | None = None,
        progress_callback: Callable[[int, int, str], None] | None = None,
    ):
        """Initialize orchestrator with configuration.

        Args:
            config: Run configuration
            logger: Optional logger instance
            progress_callback: Optional callback for progress updates (current, total, label)
        """
        self.config = config
        self.logger = logger or get_logger(__name__)
        self.progress_callback = progress_callback
        self.filesystem = FileSystemHandler()

    def generate(self) -> GenerateSummary:
        """Generate the training and validation datasets into ``output_dir``."""
        config = self.config
        start_time = perf_counter()
        log_operation_start(
            self.logger,
            "generation",
            n_train=config.n_train,
            n_val=config.n_val,
            purity_range=config.purity_range,
            seed=config.seed,
        )
        try:
            self.filesystem.ensure_directory(config.output_dir)
            processor = StateBatchProcessor(config, self.logger, self.progress_callback)
            paths = []
            all_records: list[StateRecord] = []
            for split, (n_states, name) in enumerate(
                ((config.n_train, TRAIN_FILE), (config.n_val, VAL_FILE))
            ):
                records = processor.generate(n_states, split)
                info = DatasetInfo(
                    n_qubits=config.n_qubits,
                    seed=config.seed,
                    split=split,
                    purity_range=config.purity_range,
                    pauli_order=pauli_words(config.n_qubits),
                )
                paths.append(
                    save_dataset(config.output_dir / name, records, info, self.filesystem)
                )
                all_records.extend(records)
        except Exception as e:
            log_operation_error(self.logger, "generation", e)
            raise

        summary = GenerateSummary(
            train_path=paths[0],
            val_path=paths[1],
            channel_counts=channel_counts(all_records),
            purity_histogram=purity_histogram(all_records, config.purity_range),
            elapsed=perf_counter() - start_time,
        )
        log_operation_complete(
            self.logger,
            "generation",
            success=True,
            duration=summary.elapsed,
            train=summary.train_path,
            val=summary.val_path,
        )
        return summary

    def train(
        self, train_path: Path, val_path: Path, output_dir: Path | None = None
    ) -> TrainSummary:
        """Train on two dataset files and write the checkpoint and history.

        Raises:
            DatasetFormatError: If the datasets disagree or do not fit the model
            TrainingDivergedError: If training produces a non-finite loss
        """
        start_time = perf_counter()
        out = output_dir or self.config.output_dir
        train_info, train_set = load_dataset(train_path, self.filesystem)
        val_info, val_set = load_dataset(val_path, self.filesystem)
        for path, info in ((train_path, train_info), (val_path, val_info)):
            if info.n_qubits != N_QUBITS:
                raise DatasetFormatError(
                    f"{path}: model supports {N_QUBITS} qubits, dataset has {info.n_qubits}"
                )
        if train_info.pauli_order != val_info.pauli_order:
            raise DatasetFormatError(f"{val_path}: Pauli order differs from {train_path}")

        train_config = self.config.train_config()
        self.filesystem.ensure_directory(out)
        params, history = train(train_set, val_set, train_config, self.progress_callback)
        evaluation = evaluate(params, val_set)

        checkpoint_path = save_checkpoint(
            out / CHECKPOINT_FILE,
            params,
            train_config,
            history,
            train_info.pauli_order,
            self.filesystem,
        )
        history_path = write_csv(
            out / HISTORY_FILE, HISTORY_COLUMNS, history_rows(history), self.filesystem
        )
        self.logger.info(
            f"Best epoch {history.best_epoch}: validation fidelity "
            f"{evaluation.mean_fidelity:.4f} (stopped early: {history.stopped_early})"
        )
        return TrainSummary(
            checkpoint_path=checkpoint_path,
            history_path=history_path,
            history=history,
            evaluation=evaluation,
            parameter_counts=count_parameters(params),
            elapsed=perf_counter() - start_time,
        )

    def analyze(
        self,
        checkpoint_path: Path,
        dataset_paths: Sequence[Path],
        output_dir: Path | None = None,
    ) -> AnalyzeSummary:
        """Encode the combined datasets and write every geometric diagnostic.

        Raises:
            DatasetFormatError: If a dataset does not fit the checkpoint
            PreconditionError: If fewer than three states are available
        """
        config = self.config
        start_time = perf_counter()
        out = output_dir or config.output_dir
        if not dataset_paths:
            raise PreconditionError("analyze needs at least one dataset file")
        log_operation_start(
            self.logger,
            "analysis",
            checkpoint=checkpoint_path,
            datasets=len(dataset_paths),
            n_pairs=config.n_pairs,
        )
        try:
            ckpt_info, params = load_checkpoint(checkpoint_path, self.filesystem)
            records: list[StateRecord] = []
            for path in dataset_paths:
                info, loaded = load_dataset(path, self.filesystem)
                check_compatible(ckpt_info, info, path)
                records.extend(loaded)
            if len(records) < 3:
                raise PreconditionError(f"Analysis needs at least 3 states, got {len(records)}")

            k_mle = min(config.k_mle, len(records) - 1)
            k_curv = min(config.k_curv, len(records) - 1)
            if (k_mle, k_curv) != (config.k_mle, config.k_curv):
                self.logger.warning(
                    f"Only {len(records)} states; neighbor counts reduced to "
                    f"k_mle={k_mle}, k_curv={k_curv}"
                )

            z = encode_trace(np.stack([r.pauli for r in records]), params.encoder).z
            report = analyze_latent_space(
                z,
                [r.rho for r in records],
                make_rng(config.seed, ANALYSIS_STREAM),
                k_mle=k_mle,
                k_curv=k_curv,
                n_pairs=config.n_pairs,
            )
            evaluation = evaluate(params, records)
            self.filesystem.ensure_directory(out)
            outputs = self._write_report(out, report, evaluation, records, ckpt_info)
        except Exception as e:
            log_operation_error(self.logger, "analysis", e, checkpoint=checkpoint_path)
            raise

        elapsed = perf_counter() - start_time
        log_operation_complete(
            self.logger,
            "analysis",
            success=True,
            duration=elapsed,
            pearson_r=f"{report.correlation.pearson_r:.4f}",
            mle_dimension=f"{report.dimensions.mle_mean:.2f}",
        )
        return AnalyzeSummary(
            report=report, evaluation=evaluation, outputs=outputs, elapsed=elapsed
        )

    def sweep_lambda(
        self, values: Sequence[float], train_path: Path, val_path: Path
    ) -> SweepSummary:
        """Train and analyze once per metric weight, everything else fixed.

        Each run writes into ``output_dir/lambda_<value>``; the summary CSV goes
        to ``output_dir``.

        Raises:
            PreconditionError: If ``values`` is empty or holds a negative weight
        """
        if not values:
            raise PreconditionError("sweep-lambda needs at least one lambda value")
        if any(v < 0 for v in values):
            raise PreconditionError(f"Lambda values must be non-negative, got {list(values)}")

        start_time = perf_counter()
        base = self.config
        log_operation_start(self.logger, "lambda sweep", values=list(values), seed=base.seed)
        rows = []
        for value in values:
            run_dir = base.output_dir / f"lambda_{value:g}"
            run = ExperimentOrchestrator(
                dataclasses.replace(base, lambda_metric=float(value)),
                self.logger,
                self.progress_callback,
            )
            trained = run.train(train_path, val_path, run_dir)
            analyzed = run.analyze(trained.checkpoint_path, [train_path, val_path], run_dir)
            correlation = analyzed.report.correlation
            rows.append(
                SweepRow(
                    lambda_metric=float(value),
                    val_fidelity=trained.evaluation.mean_fidelity,
                    pearson_r=correlation.pearson_r,
                    r_squared=correlation.r_squared,
                )
            )
            self.logger.info(
                f"lambda={value:g}: F={rows[-1].val_fidelity:.4f} r={rows[-1].pearson_r:.4f}"
            )

        self.filesystem.ensure_directory(base.output_dir)
        summary_path = write_csv(
            base.output_dir / SWEEP_FILE,
            SWEEP_COLUMNS,
            [[r.lambda_metric, r.val_fidelity, r.pearson_r, r.r_squared] for r in rows],
            self.filesystem,
        )
        elapsed = perf_counter() - start_time
        log_operation_complete(
            self.logger, "lambda sweep", success=True, duration=elapsed, runs=len(rows)
        )
        return SweepSummary(rows=rows, summary_path=summary_path, elapsed=elapsed)

    def _write_report(
        self,
        out: Path,
        report: GeometryReport,
        evaluation: EvaluationResult,
        records: list[StateRecord],
        ckpt_info: CheckpointInfo,
    ) -> list[Path]:
        """Write report.json and the companion CSV tables."""
        fs = self.filesystem
        corr = report.correlation
        dims = report.dimensions
        cumulative = np.cumsum(dims.explained_ratio)
        labels = [(i, r.id, r.channel.value) for i, r in enumerate(records)]

        outputs = [
            write_json(out / REPORT_FILE, report_to_dict(report, evaluation, ckpt_info), fs),
            write_csv(
                out / "pairs.csv",
                ("i", "j", "d_latent", "d_bures", "fidelity"),
                [
                    [i, j, corr.d_latent[n], corr.d_bures[n], corr.fidelities[n]]
                    for n, (i, j) in enumerate(corr.pairs)
                ],
                fs,
            ),
            write_csv(
                out / "pca_spectrum.csv",
                ("component", "eigenvalue", "explained_ratio", "cumulative"),
                [
                    [c + 1, ev, ratio, cum]
                    for c, (ev, ratio, cum) in enumerate(
                        zip(dims.pca_spectrum, dims.explained_ratio, cumulative, strict=True)
                    )
                ],
                fs,
            ),
            write_csv(
                out / "curvature.csv",
                ("index", "id", "channel", "kappa"),
                [[*lab, k] for lab, k in zip(labels, report.curvature.kappas, strict=True)],
                fs,
            ),
            write_csv(
                out / "distance_fidelity.csv",
                ("lower", "upper", "label", "count", "mean_bures", "mean_fidelity"),
                [
                    [b.lower, b.upper, b.label, b.count, b.mean_bures, b.mean_fidelity]
                    for b in report.distance_table
                ],
                fs,
            ),
            write_csv(
                out / "latent_pca.csv",
                ("index", "id", "channel")
                + tuple(f"pc{c + 1}" for c in range(report.projection.shape[1])),
                [[*lab, *row] for lab, row in zip(labels, report.projection, strict=True)],
                fs,
            ),
            write_csv(
                out / "mle_dimension.csv",
                ("index", "id", "channel", "estimate"),
                [[*lab, e] for lab, e in zip(labels, dims.mle_estimates, strict=True)],
                fs,
            ),
        ]
        return outputs


def channel_counts(records: Sequence[StateRecord]) -> dict[str, int]:
    """Number of records per channel, keyed by channel value."""
    counts: dict[str, int] = {}
    for r in records:
        counts[r.channel.value] = counts.get(r.channel.value, 0) + 1
    return counts


def purity_histogram(
    records: Sequence[StateRecord], purity_range: tuple[float, float]
) -> list[tuple[float, float, int]]:
    """Purity counts in equal bins spanning the range plus the search tolerance."""
    lo, hi = purity_range
    counts, edges = np.histogram(
        [r.purity for r in records],
        bins=PURITY_BINS,
        range=(lo - PURITY_TOLERANCE, hi + PURITY_TOLERANCE),
    )
    return [
        (float(edges[b]), float(edges[b + 1]), int(c)) for b, c in enumerate(counts)
    ]


def report_to_dict(
    report: GeometryReport, evaluation: EvaluationResult, ckpt_info: CheckpointInfo
) -> dict[str, Any]:
    """JSON-ready view of a geometry report and the reconstruction quality."""
    corr = report.correlation
    dims = report.dimensions
    curv = report.curvature
    fids = corr.fidelities
    return {
        "checkpoint": {
            "mode": ckpt_info.mode.value,
            "best_epoch": ckpt_info.best_epoch,
            "best_val_fidelity": ckpt_info.best_val_fidelity,
        },
        "reconstruction": {
            "mean_fidelity": evaluation.mean_fidelity,
            "median_fidelity": evaluation.median_fidelity,
            "per_channel": evaluation.per_channel,
        },
        "correlation": {
            "n_pairs": corr.n_pairs,
            "pearson_r": corr.pearson_r,
            "pearson_p": corr.pearson_p,
            "spearman_rho": corr.spearman_rho,
            "spearman_p": corr.spearman_p,
            "r_squared": corr.r_squared,
            "slope": corr.slope,
            "intercept": corr.intercept,
            "rmse": corr.rmse,
            "mae": corr.mae,
            "strength": corr.strength.value,
            "error": corr.error,
            "pair_fidelity": {
                "mean": float(np.mean(fids)) if fids.size else None,
                "std": float(np.std(fids)) if fids.size else None,
                "min": float(np.min(fids)) if fids.size else None,
                "max": float(np.max(fids)) if fids.size else None,
            },
        },
        "dimensions": {
            "mle_mean": dims.mle_mean,
            "mle_std": dims.mle_std,
            "k_mle": dims.k_mle,
            "mle_skipped": dims.mle_skipped,
            "d_pca_95": dims.d_pca_95,
            "d_pca_99": dims.d_pca_99,
            "explained_ratio": dims.explained_ratio,
            "top5_share": dims.top5_share,
            "top2_share": dims.top2_share,
        },
        "curvature": {
            "k_curv": curv.k_curv,
            "mean": curv.mean,
            "std": curv.std,
            "median": curv.median,
            "min": curv.minimum,
            "max": curv.maximum,
            "q1": curv.q1,
            "q3": curv.q3,
            "iqr": curv.iqr,
            "coefficient_of_variation": curv.coefficient_of_variation,
            "flagged": curv.flagged,
        },
        "distance_table": [dataclasses.asdict(b) for b in report.distance_table],
    }
