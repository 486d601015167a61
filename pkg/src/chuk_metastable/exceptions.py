# -*- coding: utf-8 -*-
# chuk_metastable/exceptions.py
"""
Exception classes for chain analysis operations.

Numerical failures derive from :class:`NumericalError`; everything else
signals invalid input or a violated precondition.
"""

from __future__ import annotations


class MetastableError(Exception):
    """Base exception for chain analysis operations."""

    pass


class ChainValidationError(MetastableError, ValueError):
    """Raised when a chain, measure, flow or input file is malformed."""

    pass


class NotIrreducibleError(MetastableError):
    """Raised when an operation needs an irreducible chain."""

    pass


class EmptyLimitError(MetastableError):
    """Raised when no edge of a family survives the n → ∞ limit."""

    pass


class UnreachableError(MetastableError):
    """Raised when some state cannot reach the required target set."""

    pass


class NotDivergenceFreeError(MetastableError):
    """Raised when a flow that must be divergence-free is not."""

    pass


class CrossClassFlowError(MetastableError):
    """Raised when a limit flow is positive on an edge joining distinct classes."""

    pass


class NotStrictlyPositiveError(MetastableError):
    """Raised when an interior-only operation receives a measure with zeros."""

    pass


class NegativeRootError(MetastableError):
    """Raised when a recovered product would be the square of a negative number."""

    pass


class NotMeanZeroError(MetastableError):
    """Raised when a function or direction fails its mean-zero condition."""

    pass


class AbsorbingStateError(MetastableError):
    """Raised when a simulated trajectory reaches a state with no outgoing edge."""

    pass


class OracleQueryError(MetastableError):
    """Raised when a tabulated oracle is asked for an input it does not hold."""

    pass


class NumericalError(MetastableError):
    """Base class for numerical failures (solvers, fits, hierarchy build)."""

    pass


class SingularSystemError(NumericalError):
    """Raised when a linear system is singular."""

    pass


class NonConvergenceError(NumericalError):
    """Raised when an iterative solver exhausts its iteration budget."""

    pass


class DegenerateFitError(NumericalError):
    """Raised when samples are not well described by a monomial in n."""

    pass


class AllRatesVanishError(NumericalError):
    """Raised when every reduced rate vanishes at the proposed time-scale."""

    pass


class NotCoarserError(NumericalError):
    """Raised when a hierarchy step fails to coarsen the well partition."""

    pass


class TimescaleOrderError(NumericalError):
    """Raised when time-scale exponents fail to increase across levels."""

    pass


class IterationBoundError(NumericalError):
    """Raised when the hierarchy build runs more levels than there are states."""

    pass


class SingularSymmetricPartError(NumericalError):
    """Raised when the symmetric part of a generator is singular on mean-zero functions."""

    pass
