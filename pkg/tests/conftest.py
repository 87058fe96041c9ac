"""Pytest configuration and shared fixtures."""

from __future__ import annotations

import numpy as np
import pytest


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="Run long training tests marked slow.",
    )


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    """Provide a fixed-seed generator."""
    from geotomo.stategen import make_rng

    return make_rng(1234)


@pytest.fixture
def bell_state():
    """Provide |Φ+⟩⟨Φ+|."""
    from geotomo.qcore import ket_to_density
    from geotomo.stategen import ghz_ket

    return ket_to_density(ghz_ket(2))


@pytest.fixture
def mixed_state(rng):
    """Provide a full-rank two-qubit state."""
    g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def tiny_dataset():
    """Provide 14 training records, two per channel."""
    from geotomo.stategen import sample_dataset

    return sample_dataset(14, (0.85, 0.95), seed=3, split=0)


@pytest.fixture
def tiny_val_dataset():
    """Provide 7 validation records, one per channel."""
    from geotomo.stategen import sample_dataset

    return sample_dataset(7, (0.85, 0.95), seed=3, split=1)


@pytest.fixture
def small_params():
    """Provide a shrunken corrected-mode model (15 → 8 → 6 → 4)."""
    from geotomo.model import init_params
    from geotomo.models import DecoderMode
    from geotomo.stategen import make_rng

    return init_params(make_rng(7), DecoderMode.CORRECTED, hidden_dims=(8, 6), latent_dim=4)


@pytest.fixture
def small_run_config(tmp_path):
    """Provide a RunConfig small enough for end-to-end runs in seconds."""
    from geotomo.models import RunConfig

    return RunConfig(
        n_train=14,
        n_val=7,
        seed=5,
        output_dir=tmp_path / "run",
        epochs_max=2,
        batch_size=7,
        patience=5,
        pairs_per_batch=10,
        n_pairs=20,
        k_mle=5,
        k_curv=6,
        parallel_workers=1,
    )
