"""Configuration handling for geotomo."""

from __future__ import annotations

import json
import os
from dataclasses import fields
from pathlib import Path
from typing import Any

from .errors import PreconditionError
from .models import DecoderMode, GradMethod, RunConfig

SEED_ENV_VAR = "GEOTOMO_SEED"
MAX_SEED = 2**64 - 1


def get_seed_from_env() -> int | None:
    """Get the default seed from the GEOTOMO_SEED environment variable.

    Returns None if the variable is not set or is not an integer in [0, 2⁶⁴).

    Returns:
        Seed value if valid, None otherwise
    """
    seed_str = os.getenv(SEED_ENV_VAR)
    if seed_str is None:
        return None

    try:
        seed = int(seed_str)
    except ValueError:
        return None
    if 0 <= seed <= MAX_SEED:
        return seed
    return None


def load_config_file(path: Path) -> dict[str, Any]:
    """Read a JSON config file into RunConfig keyword arguments.

    Keys may use dashes or underscores. Enum fields accept their string values.

    Args:
        path: Path to a JSON object file

    Returns:
        Mapping of RunConfig field names to values

    Raises:
        PreconditionError: If the file is not a JSON object or has unknown keys
    """
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise PreconditionError(f"Config file {path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise PreconditionError(f"Config file {path} must contain a JSON object")

    known = {f.name for f in fields(RunConfig)}
    settings: dict[str, Any] = {}
    for key, value in raw.items():
        name = key.replace("-", "_")
        if name not in known:
            raise PreconditionError(f"Unknown config key '{key}' in {path}")
        settings[name] = value
    return _coerce(settings)


def _coerce(settings: dict[str, Any]) -> dict[str, Any]:
    """Convert JSON scalars to the RunConfig field types."""
    out = dict(settings)
    try:
        if isinstance(out.get("decoder"), str):
            out["decoder"] = DecoderMode(out["decoder"])
        if isinstance(out.get("grad_method"), str):
            out["grad_method"] = GradMethod(out["grad_method"])
    except ValueError as e:
        raise PreconditionError(str(e)) from e
    if isinstance(out.get("output_dir"), str):
        out["output_dir"] = Path(out["output_dir"])
    return out


def create_config(config_file: Path | None = None, **overrides: Any) -> RunConfig:
    """Create a RunConfig with the documented priority.

    Priority for every field:
    1. Explicit keyword override (CLI flag) that is not None
    2. Value from the JSON config file
    3. GEOTOMO_SEED environment variable (seed only)
    4. RunConfig default

    Args:
        config_file: Optional JSON config file
        **overrides: Field values from command-line flags; None means "not given"

    Returns:
        Validated RunConfig

    Raises:
        PreconditionError: If the config file is invalid
        ValueError: If the merged values fail RunConfig validation
    """
    settings: dict[str, Any] = {}

    env_seed = get_seed_from_env()
    if env_seed is not None:
        settings["seed"] = env_seed

    if config_file is not None:
        settings.update(load_config_file(config_file))

    known = {f.name for f in fields(RunConfig)}
    for name, value in overrides.items():
        if name not in known:
            raise PreconditionError(f"Unknown configuration field '{name}'")
        if value is not None:
            settings[name] = value

    return RunConfig(**_coerce(settings))
