# -*- coding: utf-8 -*-
# chuk_metastable/catalog.py
"""
Resolve chain arguments to files.

A chain argument is either a path to a chain file or the name of an
example:

• bundled examples ship in ``chuk_metastable/data`` (``rm5``, ``c3``, …)
• any other name is looked up in **METASTABLE_EXAMPLES_DIR**, trying the
  ``.json``, ``.toml``, ``.yaml`` and ``.yml`` suffixes in that order
"""

from __future__ import annotations

import logging
import os
from importlib import resources
from pathlib import Path
from typing import List, Optional

from .config import ENV_EXAMPLES_DIR
from .exceptions import ChainValidationError
from .formats import load_chain, load_family
from .models import ChainSpec, ParamChainSpec

logger = logging.getLogger(__name__)

__all__ = ["list_examples", "resolve_chain_path", "load_example_family", "load_example_chain"]

_SUFFIXES = (".json", ".toml", ".yaml", ".yml")


def _bundled_dir() -> Path:
    return Path(str(resources.files("chuk_metastable") / "data"))


def list_examples() -> List[str]:
    """Names of the bundled examples, then those found in the examples directory."""
    names = sorted(p.stem for p in _bundled_dir().glob("*.json"))
    extra = os.getenv(ENV_EXAMPLES_DIR)
    if extra and Path(extra).is_dir():
        for p in sorted(Path(extra).iterdir()):
            if p.suffix.lower() in _SUFFIXES and p.stem not in names:
                names.append(p.stem)
    return names


def resolve_chain_path(argument: str) -> Path:
    """
    Map a path or example name to an existing chain file.

    Raises:
        ChainValidationError: nothing matches ``argument``
    """
    direct = Path(argument)
    if direct.is_file():
        return direct

    bundled = _bundled_dir() / f"{argument}.json"
    if bundled.is_file():
        return bundled

    extra = os.getenv(ENV_EXAMPLES_DIR)
    if extra:
        for suffix in _SUFFIXES:
            candidate = Path(extra) / f"{argument}{suffix}"
            if candidate.is_file():
                logger.debug("Resolved example from examples dir", extra={"path": str(candidate)})
                return candidate

    raise ChainValidationError(
        f"no chain file or example named {argument!r}; known examples: {', '.join(list_examples())}"
    )


def load_example_family(argument: str) -> ParamChainSpec:
    return load_family(resolve_chain_path(argument))


def load_example_chain(argument: str, n: Optional[float] = None) -> ChainSpec:
    return load_chain(resolve_chain_path(argument), n)
