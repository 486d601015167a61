# -*- coding: utf-8 -*-
# chuk_metastable/__init__.py
"""
Large-deviations rate functionals and metastable hierarchies of finite
continuous-time Markov chains.

This package provides the Donsker–Varadhan and measure-current
functionals, the metastable tree of a scale-parametrized family with its
time-scales and reduced chains, the Γ-expansion functionals with numeric
probes, chain recovery from rate-functional oracles, the derivative
calculus of the DV functional, and exact simulation.
"""

from __future__ import annotations

import logging

from dotenv import load_dotenv

# Models
from .models import (
    ChainSpec,
    Edge,
    ParamChainSpec,
    ParamEdge,
    ProbabilityVector,
    SignedMeasure,
    Flow,
    Cycle,
    ClassDecomposition,
    TiltField,
    AsymptoticScale,
    HierarchyLevel,
    MetastableTree,
    WellMixture,
    Trajectory,
    RunConfig,
)

# Type definitions, enums and reports
from .types import (
    DvMethod,
    ProbeCandidate,
    RecoveryMode,
    Subcommand,
    FileFormat,
    INF,
    DEFAULT_SEED,
    DEFAULT_PRECISION_BITS,
    GridValue,
    PointwiseProbeReport,
    GammaProbeReport,
    ZeroSetReport,
    HierarchyZerosReport,
    QuadraticTiltReport,
    LegendreReport,
    FiniteDifferenceReport,
    CounterexampleReport,
    ClassDiscovery,
    RecoveryReport,
    LumpabilityReport,
    TreeDiagnostics,
    VarianceEstimate,
)

# Exceptions
from .exceptions import (
    MetastableError,
    ChainValidationError,
    NumericalError,
    NotIrreducibleError,
    NonConvergenceError,
    OracleQueryError,
)

# Operations
from .chain_core import (
    stationary_distribution,
    class_decomposition,
    limit_chain,
    instantiate,
    hitting_probability,
    capacity,
    trace_chain,
)
from .flows import divergence, induced_current, cycle_decomposition, class_structure_decomposition
from .rate_functionals import phi, upsilon, bfg_rate, dv_rate, dv_rate_variational, dv_rate_projection
from .hierarchy import build_tree, build_tree_async, level_timescale, reduced_chain
from .gamma import rate0, rate_p, gamma_probe_level_p, pointwise_limit_probe
from .calculus import first_derivative, second_derivative, asymptotic_variance
from .identify import DvOracle, BfgOracle, recover_reversible, recover_from_bfg
from .sim import sample_path, empirical_pair, variance_estimate
from .grid import NGrid
from .catalog import list_examples, load_example_chain, load_example_family

# load dot env
load_dotenv()

# version
__version__ = "0.1.0"

__all__ = [
    # Models
    "ChainSpec",
    "Edge",
    "ParamChainSpec",
    "ParamEdge",
    "ProbabilityVector",
    "SignedMeasure",
    "Flow",
    "Cycle",
    "ClassDecomposition",
    "TiltField",
    "AsymptoticScale",
    "HierarchyLevel",
    "MetastableTree",
    "WellMixture",
    "Trajectory",
    "RunConfig",
    # Enums and constants
    "DvMethod",
    "ProbeCandidate",
    "RecoveryMode",
    "Subcommand",
    "FileFormat",
    "INF",
    "DEFAULT_SEED",
    "DEFAULT_PRECISION_BITS",
    # Reports
    "GridValue",
    "PointwiseProbeReport",
    "GammaProbeReport",
    "ZeroSetReport",
    "HierarchyZerosReport",
    "QuadraticTiltReport",
    "LegendreReport",
    "FiniteDifferenceReport",
    "CounterexampleReport",
    "ClassDiscovery",
    "RecoveryReport",
    "LumpabilityReport",
    "TreeDiagnostics",
    "VarianceEstimate",
    # Exceptions
    "MetastableError",
    "ChainValidationError",
    "NumericalError",
    "NotIrreducibleError",
    "NonConvergenceError",
    "OracleQueryError",
    # Operations
    "stationary_distribution",
    "class_decomposition",
    "limit_chain",
    "instantiate",
    "hitting_probability",
    "capacity",
    "trace_chain",
    "divergence",
    "induced_current",
    "cycle_decomposition",
    "class_structure_decomposition",
    "phi",
    "upsilon",
    "bfg_rate",
    "dv_rate",
    "dv_rate_variational",
    "dv_rate_projection",
    "build_tree",
    "build_tree_async",
    "level_timescale",
    "reduced_chain",
    "rate0",
    "rate_p",
    "gamma_probe_level_p",
    "pointwise_limit_probe",
    "first_derivative",
    "second_derivative",
    "asymptotic_variance",
    "DvOracle",
    "BfgOracle",
    "recover_reversible",
    "recover_from_bfg",
    "sample_path",
    "empirical_pair",
    "variance_estimate",
    "NGrid",
    "list_examples",
    "load_example_chain",
    "load_example_family",
    "configure_logging",
]


# Module-level configuration helper
def configure_logging(level: str = "INFO") -> None:
    """
    Configure logging for the metastable package.

    Parameters
    ----------
    level : str
        Logging level (DEBUG, INFO, WARNING, ERROR)

    Raises
    ------
    ValueError
        If ``level`` is not a logging level name
    """
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        raise ValueError(f"unknown log level {level!r}")

    logger = logging.getLogger("chuk_metastable")
    logger.setLevel(numeric)

    if not logger.handlers:
        handler = logging.StreamHandler()
        formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
        handler.setFormatter(formatter)
        logger.addHandler(handler)
