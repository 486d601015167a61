# -*- coding: utf-8 -*-
# chuk_metastable/gamma.py
"""
Γ-expansion functionals and numeric probes.

The level-0 functional is the measure-current functional of the limit
chain. At level p ≥ 1 it is finite only on mixtures of the level-p
measures carrying their limit-induced current, where it equals the
Donsker–Varadhan functional of the level-p reduced chain at the mixture
weights.

Probes evaluate the finite-n functionals along an n-grid and compare
them with these limits.
"""

from __future__ import annotations

import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .chain_core import equilibrium_arrays, instantiate, limit_chain, stationary_array
from .exceptions import ChainValidationError
from .flows import induced_current
from .grid import NGrid, as_points, sweep
from .hierarchy import level_theta
from .models import (
    ChainSpec,
    Flow,
    MetastableTree,
    ParamChainSpec,
    ProbabilityVector,
    WellMixture,
)
from .numerics import extended_context, lower
from .rate_functionals import bfg_rate, dv_rate_projection, dv_value_array, upsilon
from .types import (
    DEFAULT_PRECISION_BITS,
    DIVERGENCE_THRESHOLD,
    INF,
    LIMINF_TOL,
    LOG_DIVERGENCE_SLOPE,
    MIXTURE_TOL,
    POINTWISE_GAP_TOL,
    PROBE_ABS_TOL,
    PROBE_REL_TOL,
    ZERO_SET_TOL,
    ZERO_VALUE_TOL,
    DvMethod,
    GammaProbeReport,
    GridValue,
    HierarchyZerosReport,
    PointwiseProbeReport,
    ProbeCandidate,
    ZeroSetReport,
)

logger = logging.getLogger(__name__)

GridLike = Union[NGrid, Sequence[float], None]
Pair = Tuple[ProbabilityVector, Flow]


# ─────────────────────────────────────────────────────────────────────
# Mixture and current tests
# ─────────────────────────────────────────────────────────────────────


def _mixture(
    mu: ProbabilityVector, measures: Sequence[ProbabilityVector], states: Sequence[str]
) -> Tuple[List[float], float]:
    """(ω_j = μ(supp π_j), sup-norm residual of μ − Σ ω_j π_j)."""
    m = mu.to_array(states)
    omega = [mu.mass(pj.support) for pj in measures]
    rebuilt = np.zeros(len(states))
    for w, pj in zip(omega, measures):
        rebuilt += w * pj.to_array(states)
    return omega, float(np.max(np.abs(m - rebuilt), initial=0.0))


def _flow_gap(J: Flow, K: Flow) -> float:
    keys = set(J.values) | set(K.values)
    return max((abs(J.values.get(k, 0.0) - K.values.get(k, 0.0)) for k in keys), default=0.0)


def _is_induced(mu: ProbabilityVector, J: Flow, limit: ChainSpec, tol: float) -> bool:
    return _flow_gap(J, induced_current(mu, limit)) <= tol


# ─────────────────────────────────────────────────────────────────────
# Limit functionals
# ─────────────────────────────────────────────────────────────────────


def rate0(limit: ChainSpec, mu: ProbabilityVector, J: Flow) -> float:
    """
    𝕀^(0)(μ,J): Υ over the limit edges when J is divergence-free and lives on them.

    +∞ for any other J.
    """
    return bfg_rate(limit, mu, J)


def zero_set_check_level0(
    mu: ProbabilityVector,
    J: Flow,
    level_measures: Sequence[ProbabilityVector],
    limit: ChainSpec,
    tol: float = ZERO_SET_TOL,
) -> bool:
    """True iff μ = Σ ω_j π^(1)_j and J = J_{μ,𝕉₀}, both within ``tol``."""
    _, residual = _mixture(mu, level_measures, limit.states)
    return residual <= tol and _is_induced(mu, J, limit, tol)


def dv_reduced(reduced: ChainSpec, omega: Union[Sequence[float], WellMixture]) -> float:
    """ℐ of the reduced chain at the weights ω (any support)."""
    weights = omega.weights if isinstance(omega, WellMixture) else list(omega)
    if len(weights) != reduced.size:
        raise ChainValidationError(
            f"expected {reduced.size} weights for the reduced chain, got {len(weights)}"
        )
    return dv_rate_projection(reduced, ProbabilityVector.from_array(reduced.states, weights))


def _reduced(tree: MetastableTree, p: int) -> ChainSpec:
    level = tree.level(p)
    if level.reduced_chain is None:
        raise ChainValidationError(f"level {p} is terminal; its functional is not defined")
    return level.reduced_chain


def rate_p(
    tree: MetastableTree,
    p: int,
    mu: ProbabilityVector,
    J: Flow,
    limit: ChainSpec,
    tol: float = MIXTURE_TOL,
) -> float:
    """
    𝕀^(p)(μ,J) for 1 ≤ p ≤ 𝔮.

    Finite only when μ = Σ ω_j π^(p)_j, μ(Δ_p) = 0 and J = J_{μ,𝕉₀}, in
    which case it is the reduced-chain DV value at ω.
    """
    reduced = _reduced(tree, p)
    level = tree.level(p)
    omega, residual = _mixture(mu, level.level_measures, tree.states)
    if residual > tol or mu.mass(level.transient) > tol:
        return INF
    if not _is_induced(mu, J, limit, tol):
        return INF
    total = sum(omega)
    return dv_reduced(reduced, [w / total for w in omega])


def rate_at_level(
    tree: MetastableTree, p: int, mu: ProbabilityVector, J: Flow, limit: ChainSpec
) -> float:
    """:func:`rate0` at p = 0, :func:`rate_p` above."""
    if p == 0:
        return rate0(limit, mu, J)
    return rate_p(tree, p, mu, J, limit)


# ─────────────────────────────────────────────────────────────────────
# Sample sets
# ─────────────────────────────────────────────────────────────────────


def _blend(
    measures: Sequence[ProbabilityVector], weights: Sequence[float], states: Sequence[str]
) -> np.ndarray:
    out = np.zeros(len(states))
    for w, pj in zip(weights, measures):
        out += w * pj.to_array(states)
    return out


def sample_pairs(
    tree: MetastableTree, p: int, count: int, seed: int, limit: ChainSpec
) -> List[Pair]:
    """
    Pairs (μ,J) for zero-set sweeps around level p.

    Cycles through: level-p mixtures, level-(p+1) mixtures, perturbed
    mixtures, mixtures charging Δ_p, perturbed currents, Dirac masses and
    generic interior measures; currents are the limit-induced ones unless
    perturbed.
    """
    rng = np.random.default_rng(seed)
    states = tree.states
    level = tree.level(p)
    measures = level.level_measures
    upper = tree.level(p + 1).level_measures if p < tree.depth else measures
    edges = limit.edge_keys
    pairs: List[Pair] = []

    def induced(m: np.ndarray) -> Pair:
        mu = ProbabilityVector.from_array(states, m, normalize=True)
        return mu, induced_current(mu, limit)

    for k in range(count):
        kind = k % 7
        if kind == 0:
            m = _blend(measures, rng.dirichlet(np.ones(len(measures))), states)
            pairs.append(induced(m))
        elif kind == 1:
            m = _blend(upper, rng.dirichlet(np.ones(len(upper))), states)
            pairs.append(induced(m))
        elif kind == 2:
            m = _blend(measures, rng.dirichlet(np.ones(len(measures))), states)
            x = rng.integers(len(states))
            m[x] += 1e-3 * (1.0 + rng.random())
            pairs.append(induced(m))
        elif kind == 3 and level.transient:
            m = _blend(measures, rng.dirichlet(np.ones(len(measures))), states)
            x = tree.states.index(level.transient[rng.integers(len(level.transient))])
            m[x] += 1e-2
            pairs.append(induced(m))
        elif kind == 4 and edges:
            m = _blend(measures, rng.dirichlet(np.ones(len(measures))), states)
            mu, J = induced(m)
            e = edges[rng.integers(len(edges))]
            pairs.append((mu, J + Flow(values={e: 1e-3 * (1.0 + rng.random())})))
        elif kind == 5:
            pairs.append(induced(np.eye(len(states))[rng.integers(len(states))]))
        else:
            pairs.append(induced(rng.dirichlet(np.ones(len(states)))))
    return pairs


def zero_set_sweep(
    tree: MetastableTree, count: int, seed: int, limit: ChainSpec
) -> ZeroSetReport:
    """Check rate0(μ,J) = 0 ⇔ zero_set_check_level0(μ,J) over sampled pairs."""
    violations: List[Dict[str, Any]] = []
    pairs = sample_pairs(tree, 1, count, seed, limit)
    measures = tree.level(1).level_measures
    for i, (mu, J) in enumerate(pairs):
        value = rate0(limit, mu, J)
        zero = value <= ZERO_VALUE_TOL
        check = zero_set_check_level0(mu, J, measures, limit)
        if zero != check:
            violations.append({"sample": i, "rate0": value, "zero_set_check": check})
    if violations:
        logger.warning("Zero-set sweep found violations", extra={"violations": len(violations)})
    return ZeroSetReport(samples=len(pairs), violations=len(violations), details=violations)


def hierarchy_of_zeros_check(
    tree: MetastableTree, p: int, samples: Sequence[Pair], limit: ChainSpec
) -> HierarchyZerosReport:
    """Check rate_p finite ⇔ rate_{p−1} zero over ``samples``."""
    _reduced(tree, p)
    finite = zero_below = 0
    details: List[Dict[str, Any]] = []
    for i, (mu, J) in enumerate(samples):
        upper = rate_at_level(tree, p, mu, J, limit)
        lower_value = rate_at_level(tree, p - 1, mu, J, limit)
        is_finite = math.isfinite(upper)
        is_zero = lower_value <= ZERO_VALUE_TOL
        finite += is_finite
        zero_below += is_zero
        if is_finite != is_zero:
            details.append({"sample": i, "rate_p": upper, "rate_below": lower_value})
    return HierarchyZerosReport(
        level=p,
        samples=len(samples),
        finite_at_level=finite,
        zero_below=zero_below,
        violations=len(details),
        details=details,
    )


# ─────────────────────────────────────────────────────────────────────
# Grid probes
# ─────────────────────────────────────────────────────────────────────


def pointwise_limit_probe(
    family: ParamChainSpec, mu: ProbabilityVector, J: Flow, grid: GridLike = None
) -> PointwiseProbeReport:
    """
    I_n(μ,J) along the grid against 𝕀^(0)(μ,J).

    Infinite targets count as reached when every I_n is +∞, when the value
    at the largest n exceeds 10³, or when I_n grows against log n with
    slope at least 10⁻².
    """
    points = as_points(grid)
    target = rate0(limit_chain(family), mu, J)
    values = [bfg_rate(instantiate(family, n), mu, J) for n in points]
    finite = all(math.isfinite(v) for v in values)
    slope: Optional[float] = None
    if finite:
        slope = float(np.polyfit(np.log(points), values, 1)[0])
    if math.isfinite(target):
        gaps = [abs(v - target) for v in values]
        gap = gaps[-1]
        monotone = all(b <= a * (1 + 1e-9) + 1e-15 for a, b in zip(gaps, gaps[1:]))
        converges, diverges = gap < POINTWISE_GAP_TOL, False
    else:
        gap, monotone, converges = INF, True, False
        increasing = finite and all(b >= a for a, b in zip(values, values[1:]))
        diverges = (
            not any(math.isfinite(v) for v in values)
            or values[-1] > DIVERGENCE_THRESHOLD
            or (increasing and slope is not None and slope >= LOG_DIVERGENCE_SLOPE)
        )
    return PointwiseProbeReport(
        values=[GridValue(n=n, value=v) for n, v in zip(points, values)],
        target=target,
        gap=gap,
        monotone_gap=monotone,
        converges=converges,
        diverges=diverges,
        log_slope=slope,
    )


def candidate_measure(
    family: ParamChainSpec,
    tree: MetastableTree,
    p: int,
    omega: Sequence[float],
    n: float,
    candidate: ProbeCandidate = ProbeCandidate.HARMONIC,
    precision_bits: Optional[int] = None,
) -> np.ndarray:
    """ν_n over the declared states for the requested candidate."""
    level = tree.level(p)
    ctx = extended_context(DEFAULT_PRECISION_BITS if precision_bits is None else precision_bits)
    chain = instantiate(family, n)
    pi = stationary_array(chain, ctx)
    wells = [sorted(family.index[s] for s in w) for w in level.wells]
    if ProbeCandidate(candidate) == ProbeCandidate.CONDITIONED:
        nu = np.zeros(chain.size)
        for w, well in zip(omega, wells):
            nu[well] += w * lower(pi[well] / pi[well].sum())
        return nu / nu.sum()
    potentials = equilibrium_arrays(chain, wells, ctx)
    amplitude = 0
    for w, well, h in zip(omega, wells, potentials):
        amplitude = amplitude + math.sqrt(w / float(pi[well].sum())) * lower(h)
    nu = lower(pi) * amplitude**2
    return nu / nu.sum()


def _probe_point(
    family: ParamChainSpec,
    tree: MetastableTree,
    p: int,
    omega: Sequence[float],
    n: float,
    candidate: ProbeCandidate,
    precision_bits: Optional[int],
) -> Tuple[float, float, bool]:
    """(θ_n, θ_n·ℐ_n(ν_n), whether I_n(ν_n, J*_n) matched ℐ_n(ν_n))."""
    chain = instantiate(family, n)
    nu = candidate_measure(family, tree, p, omega, n, candidate, precision_bits)
    theta = level_theta(family, tree.level(p).wells, n, precision_bits)
    H0 = None
    if np.all(nu > 0):
        H0 = 0.5 * np.log(nu / lower(stationary_array(chain)))
    value, J = dv_value_array(chain, nu, DvMethod.AUTO, H0=H0)
    mu = ProbabilityVector.from_array(chain.states, nu, normalize=True)
    src, _, rates = chain.edge_arrays
    flux = float(np.sum(nu[src] * rates))
    consistent = abs(upsilon(chain, mu, Flow.from_array(chain.edge_keys, J)) - value) <= 1e-8 * max(
        flux, 1.0
    )
    return theta, theta * value, consistent


def _probe_report(
    p: int,
    omega: Sequence[float],
    candidate: ProbeCandidate,
    points: Sequence[float],
    target: float,
    results: Sequence[Tuple[float, float, bool]],
) -> GammaProbeReport:
    values = [GridValue(n=n, value=v, scale=theta) for n, (theta, v, _) in zip(points, results)]
    last = values[-1].value
    gap = abs(last - target)
    report = GammaProbeReport(
        level=p,
        omega=list(omega),
        candidate=ProbeCandidate(candidate).value,
        values=values,
        target=target,
        relative_gap=gap / abs(target) if target != 0 else gap,
        within_tolerance=gap <= PROBE_REL_TOL * abs(target) + PROBE_ABS_TOL,
        liminf_respected=last >= target - LIMINF_TOL,
        bfg_consistent=all(r[2] for r in results),
    )
    logger.info(
        "Gamma probe finished",
        extra={"level": p, "candidate": report.candidate, "value": last, "target": target},
    )
    return report


def _probe_inputs(
    tree: MetastableTree, p: int, omega: Sequence[float]
) -> Tuple[List[float], float]:
    weights = WellMixture(level=p, weights=list(omega)).weights
    reduced = _reduced(tree, p)
    if len(weights) != reduced.size:
        raise ChainValidationError(f"level {p} has {reduced.size} wells, got {len(weights)} weights")
    return weights, dv_reduced(reduced, weights)


def gamma_probe_level_p(
    family: ParamChainSpec,
    tree: MetastableTree,
    p: int,
    omega: Sequence[float],
    grid: GridLike = None,
    candidate: ProbeCandidate = ProbeCandidate.HARMONIC,
    precision_bits: Optional[int] = None,
) -> GammaProbeReport:
    """
    θ^(p)_n·ℐ_n(ν_n) along the grid against 𝕀^(p) at the mixture ω.

    The candidate is a witness for the upper bound; the liminf direction
    is checked with slack 10⁻² and closeness is reported with a 5 % band.
    """
    weights, target = _probe_inputs(tree, p, omega)
    points = as_points(grid)
    results = [
        _probe_point(family, tree, p, weights, n, candidate, precision_bits) for n in points
    ]
    return _probe_report(p, weights, candidate, points, target, results)


async def gamma_probe_level_p_async(
    family: ParamChainSpec,
    tree: MetastableTree,
    p: int,
    omega: Sequence[float],
    grid: GridLike = None,
    candidate: ProbeCandidate = ProbeCandidate.HARMONIC,
    precision_bits: Optional[int] = None,
) -> GammaProbeReport:
    """:func:`gamma_probe_level_p` with grid points evaluated concurrently."""
    weights, target = _probe_inputs(tree, p, omega)
    points = as_points(grid)
    results = await sweep(
        lambda n: _probe_point(family, tree, p, weights, n, candidate, precision_bits), points
    )
    return _probe_report(p, weights, candidate, points, target, results)
