# -*- coding: utf-8 -*-
# chuk_metastable/config.py
"""
Configuration helpers for chuk-metastable.

Provides convenient functions to set up common configurations without
needing to write .env files or remember all the variable names. Every
``configure_*`` helper sets environment variables and returns the dict it
set; :func:`load_settings` reads them back into a frozen model.
"""

from __future__ import annotations

import os
from typing import Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .exceptions import ChainValidationError
from .types import (
    DEFAULT_GRID_BASE,
    DEFAULT_GRID_END,
    DEFAULT_GRID_START,
    DEFAULT_PRECISION_BITS,
    DEFAULT_SEED,
    MATRIX_TREE_MAX_STATES,
)

ENV_N_GRID = "METASTABLE_N_GRID"
ENV_PRECISION_BITS = "METASTABLE_PRECISION_BITS"
ENV_SEED = "METASTABLE_SEED"
ENV_LOG_LEVEL = "METASTABLE_LOG_LEVEL"
ENV_MATRIX_TREE_MAX_STATES = "METASTABLE_MATRIX_TREE_MAX_STATES"
ENV_EXAMPLES_DIR = "METASTABLE_EXAMPLES_DIR"


class Settings(BaseModel):
    """Process-wide defaults read from the environment."""

    n_grid: str = Field(
        f"{DEFAULT_GRID_START}:{DEFAULT_GRID_END}:{DEFAULT_GRID_BASE}",
        description="Exponent range start:end[:base]",
    )
    precision_bits: int = Field(DEFAULT_PRECISION_BITS, ge=24)
    seed: int = DEFAULT_SEED
    log_level: str = "WARNING"
    matrix_tree_max_states: int = Field(MATRIX_TREE_MAX_STATES, ge=0)
    examples_dir: Optional[str] = None

    model_config = ConfigDict(frozen=True)


def _apply(env_vars: Dict[str, str]) -> Dict[str, str]:
    for key, value in env_vars.items():
        os.environ[key] = value
    return env_vars


def configure_grid(start: int, end: int, base: float = DEFAULT_GRID_BASE) -> Dict[str, str]:
    """
    Configure the default n-grid ``base**start … base**end``.

    Returns
    -------
    dict
        Environment variables that were set
    """
    # validated eagerly so a bad grid fails here, not inside a solver
    from .grid import NGrid

    grid = NGrid(start=start, end=end, base=base)
    return _apply({ENV_N_GRID: grid.spec})


def configure_precision(bits: int = DEFAULT_PRECISION_BITS) -> Dict[str, str]:
    """Configure the mantissa width used for large-n solves."""
    if bits < 24:
        raise ChainValidationError(f"precision must be at least 24 bits, got {bits}")
    return _apply({ENV_PRECISION_BITS: str(bits)})


def configure_seed(seed: int = DEFAULT_SEED) -> Dict[str, str]:
    """Configure the default simulation seed."""
    return _apply({ENV_SEED: str(int(seed))})


def configure_examples_dir(path: str) -> Dict[str, str]:
    """Add a directory searched when resolving example chain names."""
    return _apply({ENV_EXAMPLES_DIR: path})


def configure_log_level(level: str = "WARNING") -> Dict[str, str]:
    """Configure the default log level picked up by the CLI."""
    return _apply({ENV_LOG_LEVEL: level.upper()})


def load_settings() -> Settings:
    """
    Read :class:`Settings` from the environment.

    Raises
    ------
    ChainValidationError
        If a variable holds a value that does not validate
    """
    raw: Dict[str, object] = {}
    mapping = {
        ENV_N_GRID: "n_grid",
        ENV_PRECISION_BITS: "precision_bits",
        ENV_SEED: "seed",
        ENV_LOG_LEVEL: "log_level",
        ENV_MATRIX_TREE_MAX_STATES: "matrix_tree_max_states",
        ENV_EXAMPLES_DIR: "examples_dir",
    }
    for env, field in mapping.items():
        value = os.getenv(env)
        if value is not None and value.strip():
            raw[field] = value.strip()
    try:
        return Settings(**raw)
    except ValidationError as e:
        raise ChainValidationError(f"invalid environment configuration: {e}") from e


# Convenience functions for common setups
def development_setup() -> Settings:
    """Verbose logging, a short grid and double-ish precision for fast iteration."""
    configure_grid(4, 10)
    configure_precision(64)
    configure_log_level("INFO")
    return load_settings()


def testing_setup(seed: int = DEFAULT_SEED) -> Settings:
    """Full default grid, fixed seed, quiet logging."""
    configure_grid(DEFAULT_GRID_START, DEFAULT_GRID_END, DEFAULT_GRID_BASE)
    configure_precision(DEFAULT_PRECISION_BITS)
    configure_seed(seed)
    configure_log_level("WARNING")
    return load_settings()


# Usage examples in docstring
__doc__ += """

Usage Examples
--------------

**Quick development setup:**
```python
from chuk_metastable.config import development_setup

settings = development_setup()  # n = 2^4 … 2^10, 64-bit mantissa
```

**Custom configuration:**
```python
from chuk_metastable.config import configure_grid, configure_seed, load_settings

configure_grid(8, 18)
configure_seed(7)
settings = load_settings()
```
"""
