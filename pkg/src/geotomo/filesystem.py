"""File system operations and file formats.

Datasets and checkpoints are JSON Lines files: a header object on the first
line, then one object per record (or per parameter array). Complex entries are
stored as ``[re, im]`` pairs and floats use Python's shortest round-trip repr,
so identical inputs produce byte-identical files and loading is exact. Tables
are CSV with a header row. Every write goes through a temporary file in the
target directory followed by an atomic rename.
"""

from __future__ import annotations

import contextlib
import csv
import io
import json
import math
import os
from dataclasses import asdict
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from .errors import DatasetFormatError, SecurityError
from .logging_config import get_logger
from .measurement import pauli_words
from .models import (
    ChannelKind,
    CheckpointInfo,
    DatasetInfo,
    DecoderMode,
    EncoderParams,
    LatentMapParams,
    ModelParams,
    StateRecord,
    TrainConfig,
    TrainHistory,
    ValidationResult,
)
from .qcore import validate_density_matrix

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from numpy.typing import NDArray

logger = get_logger(__name__)

DATASET_FORMAT = "geotomo-dataset"
CHECKPOINT_FORMAT = "geotomo-checkpoint"
FORMAT_VERSION = 1
PARAMETER_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3", "W4", "b4")
HISTORY_COLUMNS = ("epoch", "recon_loss", "metric_loss", "total_loss", "val_fidelity")


class FileSystemHandler:
    """Handle file system operations with security validation.

    This class provides:
    - Path traversal prevention
    - Suffix validation
    - Atomic text writes
    """

    VALID_SUFFIXES = {".jsonl", ".json", ".csv"}

    def validate_input_file(self, path: Path) -> ValidationResult:
        """Validate that an input file exists, is readable and has a known suffix.

        Args:
            path: Path to the input file

        Returns:
            ValidationResult indicating whether the file is usable
        """
        if ".." in path.parts:
            return ValidationResult(
                valid=False, error_message="Path traversal detected: path contains '..'"
            )
        try:
            resolved = path.resolve(strict=False)
        except (OSError, RuntimeError) as e:
            return ValidationResult(valid=False, error_message=f"Invalid path: {e}")

        if not resolved.exists():
            return ValidationResult(valid=False, error_message=f"File not found: {path}")
        if not resolved.is_file():
            return ValidationResult(valid=False, error_message=f"Path is not a file: {path}")
        if not os.access(resolved, os.R_OK):
            return ValidationResult(valid=False, error_message=f"File is not readable: {path}")
        if resolved.suffix.lower() not in self.VALID_SUFFIXES:
            return ValidationResult(
                valid=False,
                error_message=f"Invalid file extension: {resolved.suffix}. "
                f"Expected one of {sorted(self.VALID_SUFFIXES)}",
            )
        return ValidationResult(valid=True)

    def validate_output_path(self, path: Path) -> ValidationResult:
        """Validate that an output path is safe and its directory can be written.

        Args:
            path: Path to the output file

        Returns:
            ValidationResult indicating whether the path is writable
        """
        if ".." in path.parts:
            return ValidationResult(
                valid=False,
                error_message="Path traversal detected in output path: contains '..'",
            )
        try:
            resolved = path.resolve(strict=False)
        except (OSError, RuntimeError) as e:
            return ValidationResult(valid=False, error_message=f"Invalid output path: {e}")

        if resolved.suffix.lower() not in self.VALID_SUFFIXES:
            return ValidationResult(
                valid=False, error_message=f"Unsupported output extension: {resolved.suffix}"
            )

        # Walk up to the nearest existing directory; that is where mkdir must succeed.
        ancestor = resolved.parent
        while not ancestor.exists() and ancestor != ancestor.parent:
            ancestor = ancestor.parent
        if not ancestor.is_dir() or not os.access(ancestor, os.W_OK):
            return ValidationResult(
                valid=False, error_message=f"Output directory is not writable: {ancestor}"
            )
        return ValidationResult(valid=True)

    def read_text(self, path: Path) -> str:
        """Read a UTF-8 file after validation.

        Raises:
            SecurityError: If the path attempts traversal
            FileNotFoundError: If the file does not exist
            DatasetFormatError: If the file is otherwise unusable
        """
        validation = self.validate_input_file(path)
        if not validation.valid:
            message = validation.error_message or "Unknown validation error"
            if "traversal" in message.lower():
                raise SecurityError(message)
            if message.startswith("File not found"):
                raise FileNotFoundError(message)
            raise DatasetFormatError(message)
        try:
            return path.resolve().read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise DatasetFormatError(f"Failed to read file {path}: {e}") from e

    def write_text(self, path: Path, text: str) -> Path:
        """Write a UTF-8 file atomically.

        Returns:
            The resolved path written

        Raises:
            SecurityError: If the path attempts traversal
            OSError: If the directory cannot be created or the write fails
        """
        validation = self.validate_output_path(path)
        if not validation.valid:
            message = validation.error_message or "Unknown validation error"
            if "traversal" in message.lower():
                raise SecurityError(message)
            raise PermissionError(message)

        resolved = path.resolve(strict=False)
        resolved.parent.mkdir(parents=True, exist_ok=True)
        temp_path = resolved.with_name(resolved.name + ".tmp")
        try:
            with temp_path.open("w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            temp_path.replace(resolved)
        except OSError:
            if temp_path.exists():
                with contextlib.suppress(OSError):
                    temp_path.unlink()
            raise
        logger.debug(f"Wrote {resolved}")
        return resolved

    def ensure_directory(self, path: Path) -> None:
        """Create a directory if it does not exist.

        Raises:
            SecurityError: If the path attempts traversal
        """
        if ".." in path.parts:
            raise SecurityError("Path traversal detected: path contains '..'")
        path.resolve(strict=False).mkdir(parents=True, exist_ok=True)


def _complex_matrix_to_json(m: NDArray[np.complex128]) -> list[list[list[float]]]:
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def _complex_matrix_from_json(data: Any) -> NDArray[np.complex128]:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise DatasetFormatError(f"Malformed density matrix of shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def _json_line(obj: dict[str, Any]) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _parse_lines(text: str, path: Path) -> list[dict[str, Any]]:
    objects = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise DatasetFormatError(f"{path}:{number}: invalid JSON: {e}") from e
        if not isinstance(obj, dict):
            raise DatasetFormatError(f"{path}:{number}: expected a JSON object")
        objects.append(obj)
    if not objects:
        raise DatasetFormatError(f"{path} is empty")
    return objects


def _check_header(header: dict[str, Any], expected_format: str, path: Path) -> None:
    if header.get("format") != expected_format:
        raise DatasetFormatError(
            f"{path} is not a {expected_format} file (format={header.get('format')!r})"
        )
    if header.get("format_version") != FORMAT_VERSION:
        raise DatasetFormatError(
            f"{path} has format version {header.get('format_version')}, "
            f"expected {FORMAT_VERSION}"
        )


def dataset_text(records: Sequence[StateRecord], info: DatasetInfo) -> str:
    """Serialize a dataset to JSON Lines."""
    header = {
        "format": DATASET_FORMAT,
        "format_version": FORMAT_VERSION,
        "n_qubits": info.n_qubits,
        "seed": info.seed,
        "split": info.split,
        "purity_range": list(info.purity_range),
        "n_records": len(records),
        "pauli_order": info.pauli_order,
    }
    lines = [_json_line(header)]
    for r in records:
        lines.append(
            _json_line(
                {
                    "id": r.id,
                    "channel": r.channel.value,
                    "parameter": r.parameter,
                    "target_purity": r.target_purity,
                    "purity": r.purity,
                    "rho": _complex_matrix_to_json(r.rho),
                    "pauli": [float(v) for v in r.pauli],
                }
            )
        )
    return "\n".join(lines) + "\n"


def save_dataset(
    path: Path,
    records: Sequence[StateRecord],
    info: DatasetInfo,
    handler: FileSystemHandler | None = None,
) -> Path:
    """Write a dataset file atomically."""
    return (handler or FileSystemHandler()).write_text(path, dataset_text(records, info))


def load_dataset(
    path: Path, handler: FileSystemHandler | None = None
) -> tuple[DatasetInfo, list[StateRecord]]:
    """Read and validate a dataset file.

    Raises:
        DatasetFormatError: If the header, Pauli order or any record is invalid
    """
    objects = _parse_lines((handler or FileSystemHandler()).read_text(path), path)
    header, body = objects[0], objects[1:]
    _check_header(header, DATASET_FORMAT, path)

    try:
        n_qubits = int(header["n_qubits"])
        info = DatasetInfo(
            n_qubits=n_qubits,
            seed=int(header["seed"]),
            split=int(header["split"]),
            purity_range=(float(header["purity_range"][0]), float(header["purity_range"][1])),
            pauli_order=[str(w) for w in header["pauli_order"]],
            format_version=int(header["format_version"]),
        )
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise DatasetFormatError(f"{path}: malformed header: {e}") from e
    if info.pauli_order != pauli_words(n_qubits):
        raise DatasetFormatError(f"{path}: Pauli order does not match the canonical order")

    records = []
    for line_no, obj in enumerate(body, start=2):
        try:
            record = StateRecord(
                id=int(obj["id"]),
                channel=ChannelKind(obj["channel"]),
                parameter=float(obj["parameter"]),
                target_purity=float(obj["target_purity"]),
                purity=float(obj["purity"]),
                rho=_complex_matrix_from_json(obj["rho"]),
                pauli=np.asarray(obj["pauli"], dtype=np.float64),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise DatasetFormatError(f"{path}:{line_no}: malformed record: {e}") from e
        if record.rho.shape != (2**n_qubits, 2**n_qubits):
            raise DatasetFormatError(f"{path}:{line_no}: state dimension does not match header")
        if record.pauli.shape != (len(info.pauli_order),):
            raise DatasetFormatError(f"{path}:{line_no}: measurement vector length mismatch")
        check = validate_density_matrix(record.rho)
        if not check.valid:
            raise DatasetFormatError(f"{path}:{line_no}: {check.error_message}")
        records.append(record)

    if "n_records" in header and header["n_records"] != len(records):
        raise DatasetFormatError(
            f"{path}: header announces {header['n_records']} records, found {len(records)}"
        )
    logger.debug(f"Loaded {len(records)} records from {path}")
    return info, records


def _config_to_json(config: TrainConfig) -> dict[str, object]:
    return {k: v.value if isinstance(v, Enum) else v for k, v in asdict(config).items()}


def checkpoint_text(
    params: ModelParams,
    config: TrainConfig,
    history: TrainHistory,
    pauli_order: list[str],
) -> str:
    """Serialize parameters and training metadata to JSON Lines."""
    arrays = params.arrays()
    best = history.best_val_fidelity
    header = {
        "format": CHECKPOINT_FORMAT,
        "format_version": FORMAT_VERSION,
        "mode": params.mode.value,
        "shapes": [list(a.shape) for a in arrays],
        "train_config": _config_to_json(config),
        "best_epoch": history.best_epoch,
        "best_val_fidelity": None if math.isnan(best) else best,
        "pauli_order": pauli_order,
    }
    lines = [_json_line(header)]
    for name, arr in zip(PARAMETER_NAMES, arrays, strict=True):
        lines.append(
            _json_line(
                {"name": name, "shape": list(arr.shape), "values": arr.ravel().tolist()}
            )
        )
    return "\n".join(lines) + "\n"


def save_checkpoint(
    path: Path,
    params: ModelParams,
    config: TrainConfig,
    history: TrainHistory,
    pauli_order: list[str],
    handler: FileSystemHandler | None = None,
) -> Path:
    """Write a checkpoint file atomically."""
    text = checkpoint_text(params, config, history, pauli_order)
    return (handler or FileSystemHandler()).write_text(path, text)


def load_checkpoint(
    path: Path, handler: FileSystemHandler | None = None
) -> tuple[CheckpointInfo, ModelParams]:
    """Read a checkpoint file.

    Raises:
        DatasetFormatError: If the header or parameter arrays are inconsistent
    """
    objects = _parse_lines((handler or FileSystemHandler()).read_text(path), path)
    header, body = objects[0], objects[1:]
    _check_header(header, CHECKPOINT_FORMAT, path)

    try:
        best = header["best_val_fidelity"]
        info = CheckpointInfo(
            mode=DecoderMode(header["mode"]),
            shapes=[tuple(int(d) for d in s) for s in header["shapes"]],
            train_config=dict(header["train_config"]),
            best_epoch=int(header["best_epoch"]),
            best_val_fidelity=float("nan") if best is None else float(best),
            pauli_order=[str(w) for w in header["pauli_order"]],
            format_version=int(header["format_version"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetFormatError(f"{path}: malformed checkpoint header: {e}") from e

    if [obj.get("name") for obj in body] != list(PARAMETER_NAMES):
        raise DatasetFormatError(f"{path}: expected parameter arrays {list(PARAMETER_NAMES)}")
    if len(info.shapes) != len(PARAMETER_NAMES):
        raise DatasetFormatError(f"{path}: header lists {len(info.shapes)} shapes")

    arrays = []
    for obj, shape in zip(body, info.shapes, strict=True):
        values = np.asarray(obj["values"], dtype=np.float64)
        if tuple(obj["shape"]) != shape or values.size != math.prod(shape):
            raise DatasetFormatError(f"{path}: array {obj['name']} does not match shape {shape}")
        arrays.append(values.reshape(shape))

    try:
        w1, b1, w2, b2, w3, b3, w4, b4 = arrays
        params = ModelParams(
            encoder=EncoderParams(w1=w1, b1=b1, w2=w2, b2=b2, w3=w3, b3=b3),
            latent_map=LatentMapParams(w4=w4, b4=b4),
            mode=info.mode,
        )
    except ValueError as e:
        raise DatasetFormatError(f"{path}: inconsistent parameter shapes: {e}") from e
    return info, params


def check_compatible(info: CheckpointInfo, dataset: DatasetInfo, path: Path) -> None:
    """Raise DatasetFormatError if a dataset cannot feed a checkpoint's encoder."""
    if info.pauli_order != dataset.pauli_order:
        raise DatasetFormatError(f"{path}: Pauli order differs from the checkpoint's")
    if info.shapes[0][1] != len(dataset.pauli_order):
        raise DatasetFormatError(
            f"{path}: encoder expects {info.shapes[0][1]} inputs, dataset has "
            f"{len(dataset.pauli_order)}"
        )


def _csv_cell(value: object) -> str:
    if isinstance(value, (float, np.floating)):
        f = float(value)
        return "nan" if math.isnan(f) else repr(f)
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    """Render rows as CSV with LF line endings."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(v) for v in row])
    return buffer.getvalue()


def write_csv(
    path: Path,
    columns: Sequence[str],
    rows: Iterable[Sequence[object]],
    handler: FileSystemHandler | None = None,
) -> Path:
    """Write a CSV table atomically."""
    return (handler or FileSystemHandler()).write_text(path, csv_text(columns, rows))


def history_rows(history: TrainHistory) -> list[list[object]]:
    """History records as CSV rows in HISTORY_COLUMNS order."""
    return [
        [r.epoch, r.recon_loss, r.metric_loss, r.total_loss, r.val_fidelity]
        for r in history.records
    ]


def read_history(path: Path, handler: FileSystemHandler | None = None) -> list[dict[str, float]]:
    """Read a history CSV back into dictionaries of floats."""
    text = (handler or FileSystemHandler()).read_text(path)
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != HISTORY_COLUMNS:
        raise DatasetFormatError(f"{path}: unexpected history columns {reader.fieldnames}")
    return [{k: float(v) for k, v in row.items()} for row in reader]


def json_safe(value: Any) -> Any:
    """Convert numpy values, enums, paths and non-finite floats for JSON output."""
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return json_safe(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        f = float(value)
        return f if math.isfinite(f) else None
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(path: Path, obj: Any, handler: FileSystemHandler | None = None) -> Path:
    """Write an indented JSON document atomically; NaN and infinities become null."""
    text = json.dumps(json_safe(obj), indent=2, allow_nan=False) + "\n"
    return (handler or FileSystemHandler()).write_text(path, text)
