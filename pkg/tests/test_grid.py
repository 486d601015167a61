# -*- coding: utf-8 -*-
# tests/test_grid.py
"""
Tests for chuk_metastable.grid: n-grid specs and the concurrent sweep.
"""

import os

import pytest
from pydantic import ValidationError

from chuk_metastable.grid import (
    GridError,
    NGrid,
    as_points,
    default_grid,
    is_valid_grid_spec,
    parse,
    sweep,
    validate_grid_spec,
)


class TestGridError:
    """Test the GridError exception."""

    def test_grid_error_inheritance(self):
        """Test that GridError inherits from ValueError."""
        assert issubclass(GridError, ValueError)

        try:
            raise GridError("test error")
        except ValueError as e:
            assert str(e) == "test error"


class TestNGrid:
    """Test the grid model."""

    def test_default_points(self):
        """Default grid is 2⁶ … 2¹⁶."""
        grid = NGrid()
        assert grid.points[0] == 64.0
        assert grid.points[-1] == 65536.0
        assert len(grid.points) == 11
        assert grid.largest == 65536.0

    def test_spec_round_trip(self):
        """spec renders an integer base without a decimal point."""
        grid = NGrid(start=3, end=9, base=10)
        assert grid.spec == "3:9:10"
        assert parse(grid.spec) == grid

    def test_too_few_points(self):
        """Fewer than four points is rejected."""
        with pytest.raises(ValidationError):
            NGrid(start=6, end=8)

    def test_base_must_exceed_one(self):
        """Base 1 does not make a geometric grid."""
        with pytest.raises(ValidationError):
            NGrid(start=0, end=5, base=1)


class TestParse:
    """Test parse and validation of grid specs."""

    @pytest.mark.parametrize(
        "spec,first,count",
        [("6:16", 64.0, 11), ("0:3", 1.0, 4), ("1:4:3", 3.0, 4), (" 2 : 6 ", 4.0, 5)],
    )
    def test_parse_valid(self, spec, first, count):
        """Valid specs."""
        grid = parse(spec)
        assert grid is not None
        assert grid.points[0] == first
        assert len(grid.points) == count

    @pytest.mark.parametrize("spec", ["", "6", "6:8", "a:b", "6:16:1", "6::2", "1:2:3:4", None, 12])
    def test_parse_invalid(self, spec):
        """Malformed specs parse to None."""
        assert parse(spec) is None
        assert not is_valid_grid_spec(spec)

    def test_validate_grid_spec_raises(self):
        """validate_grid_spec raises with the offending spec in the message."""
        with pytest.raises(GridError) as exc_info:
            validate_grid_spec("6:7")

        assert "'6:7'" in str(exc_info.value)
        assert "4 points" in str(exc_info.value)

    def test_default_grid_from_env(self, clean_env):
        """METASTABLE_N_GRID overrides the default."""
        os.environ["METASTABLE_N_GRID"] = "2:5"
        assert default_grid().points == [4.0, 8.0, 16.0, 32.0]

    def test_default_grid_without_env(self, clean_env):
        """No variable gives NGrid()."""
        os.environ.pop("METASTABLE_N_GRID", None)
        assert default_grid() == NGrid()


class TestAsPoints:
    """Test grid argument normalization."""

    def test_from_grid(self):
        assert as_points(NGrid(start=0, end=3)) == [1.0, 2.0, 4.0, 8.0]

    def test_from_sequence(self):
        assert as_points([1, 10, 100]) == [1.0, 10.0, 100.0]

    def test_rejects_small_points(self):
        """n below 1 is not a scale parameter."""
        with pytest.raises(GridError):
            as_points([0.5, 2.0])


class TestSweep:
    """Test the concurrent sweep."""

    async def test_sweep_preserves_order(self):
        """Results come back in point order."""
        points = [float(2**k) for k in range(8)]
        results = await sweep(lambda n: n * n, points)
        assert results == [n * n for n in points]

    async def test_sweep_propagates_errors(self):
        """An exception in one point surfaces from the sweep."""

        def fail_on_four(n: float) -> float:
            if n == 4.0:
                raise GridError("bad point")
            return n

        with pytest.raises(GridError):
            await sweep(fail_on_four, [1.0, 2.0, 4.0, 8.0])
