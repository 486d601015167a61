# -*- coding: utf-8 -*-
# tests/test_exceptions.py
"""
Tests for exception classes in chuk_metastable.exceptions.

Validates the hierarchy that the CLI relies on to pick exit codes.
"""

import pytest
from chuk_metastable.exceptions import (
    MetastableError,
    ChainValidationError,
    NotIrreducibleError,
    EmptyLimitError,
    UnreachableError,
    NotDivergenceFreeError,
    CrossClassFlowError,
    NotStrictlyPositiveError,
    NegativeRootError,
    NotMeanZeroError,
    AbsorbingStateError,
    OracleQueryError,
    NumericalError,
    SingularSystemError,
    NonConvergenceError,
    DegenerateFitError,
    AllRatesVanishError,
    NotCoarserError,
    TimescaleOrderError,
    IterationBoundError,
    SingularSymmetricPartError,
)

INPUT_ERRORS = [
    ChainValidationError,
    NotIrreducibleError,
    EmptyLimitError,
    UnreachableError,
    NotDivergenceFreeError,
    CrossClassFlowError,
    NotStrictlyPositiveError,
    NegativeRootError,
    NotMeanZeroError,
    AbsorbingStateError,
    OracleQueryError,
]

NUMERICAL_ERRORS = [
    SingularSystemError,
    NonConvergenceError,
    DegenerateFitError,
    AllRatesVanishError,
    NotCoarserError,
    TimescaleOrderError,
    IterationBoundError,
    SingularSymmetricPartError,
]


class TestExceptionHierarchy:
    """Test exception inheritance and hierarchy."""

    def test_base_exception_inheritance(self):
        """Test that MetastableError inherits from Exception."""
        assert issubclass(MetastableError, Exception)

        exc = MetastableError("test error")
        assert isinstance(exc, Exception)
        assert str(exc) == "test error"

    @pytest.mark.parametrize("exc_class", INPUT_ERRORS)
    def test_input_errors_are_not_numerical(self, exc_class):
        """Input and precondition errors share the base but not NumericalError."""
        assert issubclass(exc_class, MetastableError)
        assert not issubclass(exc_class, NumericalError)

    @pytest.mark.parametrize("exc_class", NUMERICAL_ERRORS)
    def test_numerical_errors(self, exc_class):
        """Solver and hierarchy failures derive from NumericalError."""
        assert issubclass(exc_class, NumericalError)
        assert issubclass(exc_class, MetastableError)

    def test_chain_validation_error_is_value_error(self):
        """ChainValidationError doubles as a ValueError."""
        assert issubclass(ChainValidationError, ValueError)

        with pytest.raises(ValueError) as exc_info:
            raise ChainValidationError("bad rate")

        assert "bad rate" in str(exc_info.value)

    def test_catch_all_with_base(self):
        """Every library error can be caught through MetastableError."""
        for exc_class in INPUT_ERRORS + NUMERICAL_ERRORS:
            with pytest.raises(MetastableError):
                raise exc_class("boom")


class TestExceptionChaining:
    """Test exception chaining behaviour."""

    def test_raise_from(self):
        """Test chaining a solver error from a linear algebra failure."""
        original = ZeroDivisionError("pivot")
        try:
            try:
                raise original
            except ZeroDivisionError as e:
                raise SingularSystemError("singular block") from e
        except SingularSystemError as chained:
            assert chained.__cause__ is original

    def test_docstrings_present(self):
        """Each exception documents when it is raised."""
        for exc_class in [MetastableError] + INPUT_ERRORS + NUMERICAL_ERRORS:
            assert exc_class.__doc__
            assert exc_class.__doc__.startswith(("Raised", "Base"))
