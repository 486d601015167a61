# -*- coding: utf-8 -*-
# chuk_metastable/types.py
"""
Type definitions, enums, constants and report models for chuk-metastable.

Tolerances live here so every module, the CLI and the tests agree on the
same numbers.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field


class ProbeCandidate(str, Enum):
    """
    Candidate sequences for the level-p Γ-probe.

    - HARMONIC: well-conditioned masses joined by equilibrium potentials
    - CONDITIONED: plain mixture of conditioned stationary measures
    """

    HARMONIC = "harmonic"
    CONDITIONED = "conditioned"


class DvMethod(str, Enum):
    """How the Donsker–Varadhan functional is evaluated."""

    AUTO = "auto"
    VARIATIONAL = "variational"
    PROJECTION = "projection"


class RecoveryMode(str, Enum):
    """Which rate functional a recovery reads."""

    DV = "dv"
    BFG = "bfg"


class Subcommand(str, Enum):
    """CLI subcommands."""

    ANALYZE = "analyze"
    RATE = "rate"
    GAMMA = "gamma"
    DERIV = "deriv"
    RECOVER = "recover"
    SIMULATE = "simulate"
    EXAMPLES = "examples"


class FileFormat(str, Enum):
    """Supported input file formats."""

    JSON = "json"
    TOML = "toml"
    YAML = "yaml"


# Constants
INF = math.inf
INF_TOKEN = "inf"

DOUBLE_PRECISION_BITS = 53
DEFAULT_PRECISION_BITS = 113
DEFAULT_GRID_START = 6
DEFAULT_GRID_END = 16
DEFAULT_GRID_BASE = 2
MIN_GRID_POINTS = 4
DEFAULT_SEED = 20240229
DEFAULT_MAX_ITERATIONS = 200

NORMALIZATION_TOL = 1e-12  # probability vectors
DIVERGENCE_TOL = 1e-12  # divergence-free, absolute per state
LINEAR_RESIDUAL_TOL = 1e-10
GRADIENT_TOL = 1e-10
KKT_TOL = 1e-8
DUALITY_TOL = 1e-7
CYCLE_TOL = 1e-10

FIT_MAX_RESIDUAL = 0.05  # log units
VANISHING_EXPONENT = 0.1
TIMESCALE_MARGIN = 0.1

ZERO_SET_TOL = 1e-10
MIXTURE_TOL = 1e-9
ZERO_VALUE_TOL = 1e-9
DIVERGENCE_THRESHOLD = 1e3
LOG_DIVERGENCE_SLOPE = 1e-2
POINTWISE_GAP_TOL = 1e-3
PROBE_REL_TOL = 0.05
PROBE_ABS_TOL = 1e-6
LIMINF_TOL = 1e-2
LUMPABILITY_TOL = 0.10

MATRIX_TREE_MAX_STATES = 8
MATRIX_TREE_MAX_ASSIGNMENTS = 50_000

FD_STEP = 1e-4
RECOVERY_TOL = 1e-4


# Report Models


class GridValue(BaseModel):
    """One evaluation along an n-grid."""

    n: float = Field(description="Scale parameter")
    value: float = Field(description="Evaluated quantity (may be +inf)")
    scale: Optional[float] = Field(None, description="Time-scale θ_n used, if any")

    model_config = ConfigDict(frozen=True)


class PointwiseProbeReport(BaseModel):
    """Convergence of I_n(μ,J) to the limit functional along an n-grid."""

    values: List[GridValue]
    target: float = Field(description="Limit functional value (may be +inf)")
    gap: float = Field(description="|I_n − target| at the largest n (inf when target is inf)")
    monotone_gap: bool = Field(description="Gap non-increasing along the grid")
    converges: bool
    diverges: bool
    log_slope: Optional[float] = Field(None, description="Fitted slope of I_n against log n")


class GammaProbeReport(BaseModel):
    """Candidate-sequence values θ_n·ℐ_n(ν_n) against the level-p functional."""

    level: int
    omega: List[float]
    candidate: str
    values: List[GridValue]
    target: float
    relative_gap: float
    within_tolerance: bool
    liminf_respected: bool
    bfg_consistent: bool = Field(
        True, description="bfg_rate(ν_n, J*_n) matched ℐ_n(ν_n) wherever J*_n exists"
    )


class ZeroSetReport(BaseModel):
    """Equivalence sweep between rate0(μ,J) = 0 and the level-0 zero-set test."""

    samples: int
    violations: int
    details: List[Dict[str, Any]] = Field(default_factory=list)


class HierarchyZerosReport(BaseModel):
    """Sweep of "rate_p finite ⇔ rate_{p−1} zero" over sampled pairs."""

    level: int
    samples: int
    finite_at_level: int
    zero_below: int
    violations: int
    details: List[Dict[str, Any]] = Field(default_factory=list)


class QuadraticTiltReport(BaseModel):
    """Small-tilt limit ε⁻²ℐ(π_ε) with Richardson extrapolation."""

    epsilons: List[float]
    values: List[float]
    extrapolated: float
    target: float
    relative_error: float


class LegendreReport(BaseModel):
    """Second derivative at π versus the dual quadratic program."""

    second_derivative: float
    dual_value: float
    relative_error: float
    agrees: bool


class FiniteDifferenceReport(BaseModel):
    """Closed-form derivatives versus central finite differences."""

    first_derivative: float
    first_derivative_fd: float
    second_derivative: float
    second_derivative_fd: float
    steps: List[float]
    first_errors: List[float] = Field(description="|closed − FD| per step, before extrapolation")
    first_relative_error: float
    second_relative_error: float


class CounterexampleReport(BaseModel):
    """Indistinguishability certificate for two chains with identical functionals."""

    name: str
    points: int
    max_difference: float
    max_closed_form_error: float
    infinite_controls: int = 0
    certified: bool


class ClassDiscovery(BaseModel):
    """Closed classes and stationary profiles found from a DV oracle."""

    classes: List[List[str]]
    profiles: List[Dict[str, float]]
    unresolved: List[str] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)


class RecoveryReport(BaseModel):
    """Agreement between a recovered chain and the oracle it came from."""

    mode: str
    max_value_error: float
    max_holding_error: float
    max_rate_error: Optional[float] = Field(
        None, description="Relative rate error against a known hidden chain"
    )
    consistent: bool
    notes: List[str] = Field(default_factory=list)


class LumpabilityReport(BaseModel):
    """Mean first-passage times at scale θ_n against the reduced chain."""

    level: int
    n: float
    scaled_times: List[float]
    reduced_times: List[float]
    relative_errors: List[float]
    within_tolerance: bool


class TreeDiagnostics(BaseModel):
    """Empirical checks on a hierarchy: flagged, never asserted."""

    transient_mass_exponent: Optional[float]
    transient_mass_vanishes: bool
    measure_errors: List[List[float]] = Field(
        description="Per level, per well: sup-norm error of π_n(·|𝒱) at the largest n"
    )
    measure_bounds: List[float]
    flagged: List[str] = Field(default_factory=list)


class VarianceEstimate(BaseModel):
    """Monte Carlo estimate of an asymptotic variance."""

    estimate: float
    standard_error: float
    replicas: int
    horizon: float


# Type Aliases
StateID = str
EdgeKey = Tuple[str, str]
