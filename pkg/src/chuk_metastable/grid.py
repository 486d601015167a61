# -*- coding: utf-8 -*-
# chuk_metastable/grid.py
"""Utility helpers for geometric n-grids.

An n-grid is written ``"start:end[:base]"`` and stands for the points
``base**start, base**(start+1), …, base**end`` (default base 2). Asymptotic
fits need at least four points.

Per-n work along a grid is independent; :func:`sweep` fans it out over
worker threads and returns results in grid order.
"""

from __future__ import annotations

import asyncio
import logging
import os
from typing import Awaitable, Callable, List, Optional, Sequence, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .types import DEFAULT_GRID_BASE, DEFAULT_GRID_END, DEFAULT_GRID_START, MIN_GRID_POINTS

logger = logging.getLogger(__name__)

T = TypeVar("T")

_SEPARATOR = ":"


class GridError(ValueError):
    """Raised when n-grid operations encounter invalid input."""

    pass


class NGrid(BaseModel):
    """Exponent range of a geometric grid."""

    start: int = Field(DEFAULT_GRID_START, ge=0)
    end: int = Field(DEFAULT_GRID_END, ge=0)
    base: float = Field(DEFAULT_GRID_BASE, gt=1)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_range(self) -> "NGrid":
        if self.end - self.start + 1 < MIN_GRID_POINTS:
            raise ValueError(
                f"grid {self.start}:{self.end} has fewer than {MIN_GRID_POINTS} points"
            )
        return self

    @property
    def points(self) -> List[float]:
        return [float(self.base) ** k for k in range(self.start, self.end + 1)]

    @property
    def largest(self) -> float:
        return float(self.base) ** self.end

    @property
    def spec(self) -> str:
        base = int(self.base) if float(self.base).is_integer() else self.base
        return f"{self.start}{_SEPARATOR}{self.end}{_SEPARATOR}{base}"


def parse(spec: str) -> Optional[NGrid]:
    """
    Parse an n-grid spec.

    Args:
        spec: ``"start:end"`` or ``"start:end:base"``

    Returns:
        NGrid, or None if the spec is malformed

    Examples:
        >>> parse("6:16").points[0]
        64.0

        >>> parse("6:8") is None  # three points only
        True
    """
    if not isinstance(spec, str):
        return None
    parts = [p.strip() for p in spec.split(_SEPARATOR)]
    if len(parts) not in (2, 3) or not all(parts):
        return None
    try:
        start, end = int(parts[0]), int(parts[1])
        base = float(parts[2]) if len(parts) == 3 else float(DEFAULT_GRID_BASE)
        return NGrid(start=start, end=end, base=base)
    except (ValueError, ValidationError):
        return None


def is_valid_grid_spec(spec: str) -> bool:
    """True if ``spec`` parses to a usable grid."""
    return parse(spec) is not None


def validate_grid_spec(spec: str) -> NGrid:
    """
    Parse an n-grid spec, raising if invalid.

    Raises:
        GridError: If the spec is malformed or has fewer than four points
    """
    result = parse(spec)
    if result is None:
        raise GridError(
            f"Invalid n-grid {spec!r}: expected start:end[:base] with at least "
            f"{MIN_GRID_POINTS} points and base > 1"
        )
    return result


def default_grid() -> NGrid:
    """Grid from ``METASTABLE_N_GRID``, or the built-in default."""
    spec = os.getenv("METASTABLE_N_GRID")
    if spec:
        return validate_grid_spec(spec)
    return NGrid()


def as_points(grid: "NGrid | Sequence[float] | None") -> List[float]:
    """Normalize a grid argument to a list of n values."""
    if grid is None:
        return default_grid().points
    if isinstance(grid, NGrid):
        return grid.points
    points = [float(n) for n in grid]
    if any(n < 1 for n in points):
        raise GridError("grid points must be at least 1")
    return points


async def sweep(fn: Callable[[float], T], points: Sequence[float]) -> List[T]:
    """
    Evaluate ``fn`` at every grid point on worker threads.

    Results come back in the order of ``points`` regardless of scheduling.
    """
    logger.debug("Sweeping grid", extra={"points": len(points)})
    tasks: List[Awaitable[T]] = [asyncio.to_thread(fn, n) for n in points]
    return list(await asyncio.gather(*tasks))
