"""Parallel dataset generation."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from time import perf_counter
from typing import TYPE_CHECKING

from .errors import PreconditionError
from .logging_config import get_logger
from .stategen import generate_record

if TYPE_CHECKING:
    from collections.abc import Callable

    from .models import RunConfig, StateRecord

# Below this many records the pool start-up costs more than it saves.
MIN_PARALLEL_RECORDS = 64


class StateBatchProcessor:
    """Generate dataset records across worker processes.

    Every record is drawn from its own ``(seed, split, record_id)`` stream, so
    the assembled dataset does not depend on the worker count or on the order
    in which workers finish.
    """

    def __init__(
        self,
        config: RunConfig,
        logger: logging.Logger | None = None,
        progress_callback: Callable[[int, int, str], None] | None = None,
    ):
        """Initialize with configuration and determine worker count.

        Args:
            config: Run configuration (seed, purity range, qubits, workers)
            logger: Optional logger instance
            progress_callback: Optional callback for progress updates (current, total, label)
        """
        self.config = config
        self.logger = logger or get_logger(__name__)
        self.progress_callback = progress_callback

        if config.parallel_workers is not None:
            self.worker_count = config.parallel_workers
        else:
            cpu_count = os.cpu_count()
            self.worker_count = 4 if cpu_count is None else min(cpu_count, 8)

        self.logger.debug(f"StateBatchProcessor initialized with {self.worker_count} workers")

    def generate(self, n_states: int, split: int) -> list[StateRecord]:
        """Generate ``n_states`` records of one split, ordered by record id.

        Args:
            n_states: Number of records
            split: Stream id of the split (0 train, 1 validation)

        Returns:
            Records with ids 0 … n_states − 1

        Raises:
            PreconditionError: If n_states is not positive
            PurityTargetError: If any record cannot reach its purity target
        """
        if n_states < 1:
            raise PreconditionError(f"n_states must be positive, got {n_states}")

        start_time = perf_counter()
        label = "train" if split == 0 else "val"
        if self.worker_count == 1 or n_states < MIN_PARALLEL_RECORDS:
            records = self._generate_inline(n_states, split, label)
        else:
            records = self._generate_parallel(n_states, split, label)

        self.logger.info(
            f"Generated {n_states} {label} records in {perf_counter() - start_time:.2f}s"
        )
        return records

    def _generate_inline(self, n_states: int, split: int, label: str) -> list[StateRecord]:
        records = []
        for record_id in range(n_states):
            records.append(_generate_record_worker(record_id, self.config, split))
            if self.progress_callback:
                self.progress_callback(record_id + 1, n_states, label)
        return records

    def _generate_parallel(self, n_states: int, split: int, label: str) -> list[StateRecord]:
        slots: list[StateRecord | None] = [None] * n_states
        with ProcessPoolExecutor(max_workers=self.worker_count) as executor:
            future_to_id = {
                executor.submit(_generate_record_worker, record_id, self.config, split): record_id
                for record_id in range(n_states)
            }
            for completed, future in enumerate(as_completed(future_to_id), start=1):
                record_id = future_to_id[future]
                try:
                    slots[record_id] = future.result()
                except Exception:
                    self.logger.error(f"Worker failed on {label} record {record_id}")
                    for pending in future_to_id:
                        pending.cancel()
                    raise
                if self.progress_callback:
                    self.progress_callback(completed, n_states, label)

        return [r for r in slots if r is not None]


def _generate_record_worker(record_id: int, config: RunConfig, split: int) -> StateRecord:
    """Generate a single record (called by worker processes)."""
    return generate_record(
        record_id,
        config.seed,
        split,
        config.purity_range,
        config.n_qubits,
    )
