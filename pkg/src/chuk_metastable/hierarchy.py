# -*- coding: utf-8 -*-
# chuk_metastable/hierarchy.py
"""
The metastable tree of a scale-parametrized family.

Level 1 wells are the closed classes of the limit chain. At each level the
time-scale θ_n comes from capacities (1/θ_n = Σ_i Cap(𝒱_i, rest)/π(𝒱_i)),
the reduced chain from tracing the chain on the wells, lumping each well
with π_n-weights and rescaling by θ_n, and the next partition from the
recurrent classes of the reduced chain. Asymptotics are read off log-log
fits along an n-grid; the linear solves run at extended precision.
"""

from __future__ import annotations

import logging
import math
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .chain_core import (
    capacity_value,
    class_decomposition,
    instantiate,
    limit_chain,
    mean_hitting_array,
    restrict,
    stationary_array,
    trace_array,
)
from .exceptions import (
    AllRatesVanishError,
    ChainValidationError,
    DegenerateFitError,
    IterationBoundError,
    NotCoarserError,
    TimescaleOrderError,
)
from .grid import NGrid, as_points, sweep
from .models import (
    AsymptoticScale,
    ChainSpec,
    HierarchyLevel,
    MetastableTree,
    ParamChainSpec,
    ProbabilityVector,
)
from .numerics import extended_context, lower
from .types import (
    DEFAULT_PRECISION_BITS,
    FIT_MAX_RESIDUAL,
    LUMPABILITY_TOL,
    TIMESCALE_MARGIN,
    VANISHING_EXPONENT,
    LumpabilityReport,
    TreeDiagnostics,
)

logger = logging.getLogger(__name__)

GridLike = Union[NGrid, Sequence[float], None]


# ─────────────────────────────────────────────────────────────────────
# Fits
# ─────────────────────────────────────────────────────────────────────


def fit_scale(
    samples: Sequence[Tuple[float, float]], max_residual: float = FIT_MAX_RESIDUAL
) -> AsymptoticScale:
    """
    Least-squares fit of log value = log coefficient + exponent·log n.

    Raises:
        DegenerateFitError: fewer than four samples, non-positive values, or a
            max residual above ``max_residual`` (log units)
    """
    if len(samples) < 4:
        raise DegenerateFitError(f"need at least 4 samples to fit a scale, got {len(samples)}")
    ns = np.array([float(n) for n, _ in samples])
    vs = np.array([float(v) for _, v in samples])
    if np.any(ns <= 0) or np.any(~np.isfinite(vs)) or np.any(vs <= 0):
        raise DegenerateFitError("scale fits need positive finite samples")
    x, y = np.log(ns), np.log(vs)
    exponent, intercept = np.polyfit(x, y, 1)
    residual = float(np.max(np.abs(y - (intercept + exponent * x))))
    if residual > max_residual:
        raise DegenerateFitError(
            f"samples are not a monomial in n: max log residual {residual:.3g} > {max_residual}"
        )
    return AsymptoticScale(
        coefficient=float(math.exp(intercept)),
        exponent=float(exponent),
        fit_quality=residual,
        samples=[(float(n), float(v)) for n, v in zip(ns, vs)],
    )


def _label(well: Sequence[str]) -> str:
    return "{" + ",".join(well) + "}"


def _indices(family: ParamChainSpec, states: Sequence[str]) -> List[int]:
    unknown = [s for s in states if s not in family.index]
    if unknown:
        raise ChainValidationError(f"wells contain undeclared states {unknown}")
    return sorted(family.index[s] for s in states)


def _bits(precision_bits: Optional[int]) -> int:
    return DEFAULT_PRECISION_BITS if precision_bits is None else precision_bits


# ─────────────────────────────────────────────────────────────────────
# Per-n quantities
# ─────────────────────────────────────────────────────────────────────


def _theta(chain: ChainSpec, wells: List[List[int]], pi, ctx):
    inverse = 0
    for j, well in enumerate(wells):
        rest = [i for k, w in enumerate(wells) if k != j for i in w]
        inverse = inverse + capacity_value(chain, well, rest, ctx, pi=pi) / pi[well].sum()
    return 1 / inverse


def level_theta(
    family: ParamChainSpec,
    wells: Sequence[Sequence[str]],
    n: float,
    precision_bits: Optional[int] = None,
) -> float:
    """Exact θ_n at one n: 1/θ_n = Σ_i Cap_n(𝒱_i, ∪_{k≠i}𝒱_k)/π_n(𝒱_i)."""
    if len(wells) < 2:
        raise ChainValidationError("a time-scale needs at least two wells")
    ctx = extended_context(_bits(precision_bits))
    chain = instantiate(family, n)
    idx = [_indices(family, w) for w in wells]
    return float(_theta(chain, idx, stationary_array(chain, ctx), ctx))


def _level_sample(
    family: ParamChainSpec, wells: List[List[int]], n: float, bits: int
) -> Tuple[float, np.ndarray]:
    """(θ_n, unscaled lumped trace rates between wells) at one n."""
    ctx = extended_context(bits)
    chain = instantiate(family, n)
    pi = stationary_array(chain, ctx)
    theta = _theta(chain, wells, pi, ctx)
    keep = sorted(i for w in wells for i in w)
    pos = {i: k for k, i in enumerate(keep)}
    tr = trace_array(chain, keep, ctx)
    W = len(wells)
    lumped = np.zeros((W, W))
    for j, wj in enumerate(wells):
        mass = pi[wj].sum()
        for k, wk in enumerate(wells):
            if j == k:
                continue
            total = 0
            for x in wj:
                row = tr[pos[x]]
                total = total + pi[x] * sum(row[pos[z]] for z in wk)
            lumped[j, k] = float(total / mass)
    return float(theta), lumped


def _samples(
    family: ParamChainSpec, wells: List[List[int]], points: Sequence[float], bits: int
) -> List[Tuple[float, np.ndarray]]:
    return [_level_sample(family, wells, n, bits) for n in points]


async def _samples_async(
    family: ParamChainSpec, wells: List[List[int]], points: Sequence[float], bits: int
) -> List[Tuple[float, np.ndarray]]:
    return await sweep(lambda n: _level_sample(family, wells, n, bits), points)


def level_timescale(
    family: ParamChainSpec,
    wells: Sequence[Sequence[str]],
    grid: GridLike = None,
    precision_bits: Optional[int] = None,
) -> AsymptoticScale:
    """
    θ^(p)_n on the grid, fitted to a monomial.

    Raises:
        ChainValidationError: fewer than two wells
        DegenerateFitError: θ_n is not a monomial in n
    """
    if len(wells) < 2:
        raise ChainValidationError("a time-scale needs at least two wells")
    idx = [_indices(family, w) for w in wells]
    ctx_bits = _bits(precision_bits)
    points = as_points(grid)
    samples = []
    for n in points:
        ctx = extended_context(ctx_bits)
        chain = instantiate(family, n)
        samples.append((n, float(_theta(chain, idx, stationary_array(chain, ctx), ctx))))
    return fit_scale(samples)


def _fit_reduced_rates(
    labels: List[str],
    points: Sequence[float],
    thetas: Sequence[float],
    lumps: Sequence[np.ndarray],
) -> ChainSpec:
    W = len(labels)
    rates: Dict[Tuple[str, str], float] = {}
    for j in range(W):
        for k in range(W):
            if j == k:
                continue
            series = [theta * lump[j, k] for theta, lump in zip(thetas, lumps)]
            if all(v == 0 for v in series):
                continue
            if any(v <= 0 for v in series):
                raise DegenerateFitError(
                    f"reduced rate {labels[j]}→{labels[k]} changes support along the grid"
                )
            scale = fit_scale(list(zip(points, series)))
            if scale.exponent < -VANISHING_EXPONENT:
                continue
            if scale.exponent > VANISHING_EXPONENT:
                raise DegenerateFitError(
                    f"reduced rate {labels[j]}→{labels[k]} grows like n^{scale.exponent:.2f}; "
                    "the time-scale is too slow"
                )
            rates[(labels[j], labels[k])] = series[-1]
    if not rates:
        raise AllRatesVanishError("every reduced rate vanishes at this time-scale")
    return ChainSpec.from_rates(labels, rates)


def reduced_chain(
    family: ParamChainSpec,
    wells: Sequence[Sequence[str]],
    timescale: AsymptoticScale,
    grid: GridLike = None,
    precision_bits: Optional[int] = None,
) -> ChainSpec:
    """
    Limiting inter-well rates at the scale θ_n.

    r_n(j,k) = θ_n · Σ_{x∈𝒱_j} π_n(x|𝒱_j) Σ_{z∈𝒱_k} R^tr_n(x,z); a pair whose
    fitted exponent is below −0.1 is dropped, within ±0.1 it takes its
    value at the largest n.

    Raises:
        AllRatesVanishError: no reduced rate survives
        DegenerateFitError: a rate grows with n or is not a monomial
    """
    idx = [_indices(family, w) for w in wells]
    points = as_points(grid)
    sampled = _samples(family, idx, points, _bits(precision_bits))
    thetas = [timescale.value_at(n) for n in points]
    return _fit_reduced_rates([_label(w) for w in wells], points, thetas, [s[1] for s in sampled])


def coarsen(
    reduced: ChainSpec, wells: Sequence[Sequence[str]], transient: Sequence[str]
) -> Tuple[List[List[str]], List[str], List[List[int]]]:
    """
    Merge wells along the recurrent classes of the reduced chain.

    Returns:
        (next wells, next transient set, recurrent classes as label indices)

    Raises:
        NotCoarserError: the partition did not get strictly coarser
    """
    if len(reduced.states) != len(wells):
        raise ChainValidationError("reduced chain and wells do not align")
    decomposition = class_decomposition(reduced)
    classes = [[reduced.index[label] for label in c] for c in decomposition.closed_classes]
    new_wells = [[s for j in c for s in wells[j]] for c in classes]
    absorbed = [s for label in decomposition.transient for s in wells[reduced.index[label]]]
    new_transient = list(transient) + absorbed
    if len(new_wells) >= len(wells):
        raise NotCoarserError(
            f"reduced chain has {len(new_wells)} recurrent classes for {len(wells)} wells"
        )
    return new_wells, new_transient, classes


def level_measures(
    previous: Sequence[ProbabilityVector],
    reduced: ChainSpec,
    classes: Sequence[Sequence[int]],
) -> List[ProbabilityVector]:
    """π^(p+1)_m = Σ_{j∈ℛ_m} M_m(j) π^(p)_j, M_m stationary for the reduced chain on ℛ_m."""
    out = []
    for cls in classes:
        sub = restrict(reduced, [reduced.states[j] for j in cls])
        M = lower(stationary_array(sub))
        weights: Dict[str, float] = {}
        for j in cls:
            mj = float(M[sub.index[reduced.states[j]]])
            for state, w in previous[j].weights.items():
                weights[state] = weights.get(state, 0.0) + mj * w
        total = sum(weights.values())
        out.append(ProbabilityVector(weights={s: w / total for s, w in weights.items()}))
    return out


# ─────────────────────────────────────────────────────────────────────
# Tree
# ─────────────────────────────────────────────────────────────────────


def _first_level(family: ParamChainSpec) -> Tuple[List[List[str]], List[str], List[ProbabilityVector]]:
    limit = limit_chain(family)
    decomposition = class_decomposition(limit)
    measures = []
    for cls in decomposition.closed_classes:
        sub = restrict(limit, cls)
        measures.append(
            ProbabilityVector.from_array(sub.states, lower(stationary_array(sub)), normalize=True)
        )
    return decomposition.closed_classes, decomposition.transient, measures


def _assemble(
    family: ParamChainSpec,
    wells: List[List[str]],
    transient: List[str],
    measures: List[ProbabilityVector],
    levels: List[HierarchyLevel],
    points: Sequence[float],
    sampled: List[Tuple[float, np.ndarray]],
    previous_exponent: float,
) -> Tuple[HierarchyLevel, List[List[str]], List[str], List[ProbabilityVector]]:
    p = len(levels) + 1
    thetas = [s[0] for s in sampled]
    timescale = fit_scale(list(zip(points, thetas)))
    if timescale.exponent < previous_exponent + TIMESCALE_MARGIN:
        raise TimescaleOrderError(
            f"level {p} exponent {timescale.exponent:.3f} does not exceed "
            f"level {p - 1} exponent {previous_exponent:.3f} by {TIMESCALE_MARGIN}"
        )
    labels = [_label(w) for w in wells]
    reduced = _fit_reduced_rates(labels, points, thetas, [s[1] for s in sampled])
    new_wells, new_transient, classes = coarsen(reduced, wells, transient)
    level = HierarchyLevel(
        index=p,
        wells=wells,
        transient=transient,
        labels=labels,
        timescale=timescale,
        reduced_chain=reduced,
        recurrent_classes=classes,
        level_measures=measures,
    )
    logger.info(
        "Hierarchy level built",
        extra={
            "level": p,
            "wells": len(wells),
            "exponent": timescale.exponent,
            "coefficient": timescale.coefficient,
        },
    )
    return level, new_wells, new_transient, level_measures(measures, reduced, classes)


def _terminal(p: int, wells, transient, measures) -> HierarchyLevel:
    return HierarchyLevel(
        index=p,
        wells=wells,
        transient=transient,
        labels=[_label(w) for w in wells],
        level_measures=measures,
    )


def _order_wells(family: ParamChainSpec, wells: List[List[str]]) -> List[List[str]]:
    return [sorted(w, key=family.index.__getitem__) for w in wells]


class _TreeBuilder:
    """Level-by-level state shared by the sync and async tree builders."""

    def __init__(self, family: ParamChainSpec, grid: GridLike, precision_bits: Optional[int]):
        self.family = family
        self.points = as_points(grid)
        self.bits = _bits(precision_bits)
        self.wells, self.transient, self.measures = _first_level(family)
        self.levels: List[HierarchyLevel] = []
        self.exponent = 0.0

    def pending(self) -> Optional[List[List[int]]]:
        """Well indices of the next level to sample, or None once one class remains."""
        if len(self.wells) <= 1:
            return None
        if len(self.levels) >= len(self.family.states):
            raise IterationBoundError(f"hierarchy exceeded {len(self.family.states)} levels")
        return [_indices(self.family, w) for w in self.wells]

    def advance(self, sampled: List[Tuple[float, np.ndarray]]) -> None:
        level, wells, self.transient, self.measures = _assemble(
            self.family,
            self.wells,
            self.transient,
            self.measures,
            self.levels,
            self.points,
            sampled,
            self.exponent,
        )
        self.wells = _order_wells(self.family, wells)
        self.levels.append(level)
        self.exponent = level.timescale.exponent

    def finish(self) -> MetastableTree:
        levels = self.levels + [
            _terminal(len(self.levels) + 1, self.wells, self.transient, self.measures)
        ]
        return MetastableTree(states=list(self.family.states), levels=levels, terminal=True)


def build_tree(
    family: ParamChainSpec,
    grid: GridLike = None,
    precision_bits: Optional[int] = None,
) -> MetastableTree:
    """
    Iterate time-scale → reduced chain → coarsening until one recurrent class remains.

    Raises:
        EmptyLimitError: no exponent-0 edge
        TimescaleOrderError: exponents fail to increase by the margin
        IterationBoundError: more levels than states
    """
    builder = _TreeBuilder(family, grid, precision_bits)
    while (idx := builder.pending()) is not None:
        builder.advance(_samples(family, idx, builder.points, builder.bits))
    return builder.finish()


async def build_tree_async(
    family: ParamChainSpec,
    grid: GridLike = None,
    precision_bits: Optional[int] = None,
) -> MetastableTree:
    """:func:`build_tree` with the per-n solves of each level run concurrently."""
    builder = _TreeBuilder(family, grid, precision_bits)
    while (idx := builder.pending()) is not None:
        builder.advance(await _samples_async(family, idx, builder.points, builder.bits))
    return builder.finish()


# ─────────────────────────────────────────────────────────────────────
# Diagnostics
# ─────────────────────────────────────────────────────────────────────


def transient_mass_scale(
    family: ParamChainSpec,
    transient: Sequence[str],
    grid: GridLike = None,
    precision_bits: Optional[int] = None,
) -> AsymptoticScale:
    """Fit of π_n(Δ)."""
    if not transient:
        raise ChainValidationError("transient set is empty")
    idx = _indices(family, transient)
    samples = []
    for n in as_points(grid):
        ctx = extended_context(_bits(precision_bits))
        pi = stationary_array(instantiate(family, n), ctx)
        samples.append((n, float(pi[idx].sum())))
    return fit_scale(samples)


def _exponent_gap(family: ParamChainSpec) -> float:
    exponents = sorted({Fraction(0)} | {e.exponent for e in family.edges})
    gaps = [float(b - a) for a, b in zip(exponents, exponents[1:]) if b > a]
    return min(gaps) if gaps else 1.0


def tree_diagnostics(
    family: ParamChainSpec,
    tree: MetastableTree,
    grid: GridLike = None,
    precision_bits: Optional[int] = None,
) -> TreeDiagnostics:
    """
    Conditioned-measure errors at the largest n and the decay of π_n(Δ).

    Findings are reported and logged, never raised.
    """
    points = as_points(grid)
    n = points[-1]
    ctx = extended_context(_bits(precision_bits))
    pi = lower(stationary_array(instantiate(family, n), ctx))
    bound = 10.0 * n ** (-_exponent_gap(family))
    flagged: List[str] = []
    errors: List[List[float]] = []
    for level in tree.levels:
        row = []
        for j, (well, measure) in enumerate(zip(level.wells, level.level_measures)):
            idx = _indices(family, well)
            conditioned = pi[idx] / pi[idx].sum()
            target = measure.to_array([family.states[i] for i in idx])
            err = float(np.max(np.abs(conditioned - target)))
            row.append(err)
            if err > bound:
                flagged.append(f"level {level.index} well {j}: conditioned error {err:.3e} > {bound:.3e}")
        errors.append(row)

    final = tree.levels[-1].transient
    exponent: Optional[float] = None
    vanishes = True
    if final:
        try:
            scale = transient_mass_scale(family, final, points, precision_bits)
            exponent = scale.exponent
            vanishes = exponent < 0
        except DegenerateFitError as e:
            flagged.append(f"transient mass fit failed: {e}")
            vanishes = False
        if not vanishes:
            flagged.append("stationary mass of the transient set does not vanish")
    for message in flagged:
        logger.warning("Tree diagnostic flagged", extra={"detail": message})
    return TreeDiagnostics(
        transient_mass_exponent=exponent,
        transient_mass_vanishes=vanishes,
        measure_errors=errors,
        measure_bounds=[bound] * len(tree.levels),
        flagged=flagged,
    )


def lumpability_check(
    family: ParamChainSpec,
    tree: MetastableTree,
    p: int,
    n: float,
    precision_bits: Optional[int] = None,
    tol: float = LUMPABILITY_TOL,
) -> LumpabilityReport:
    """
    Mean exit time of each well at scale θ_n against the reduced chain.

    For well j, E_{π(·|𝒱_j)}[H_{∪_{k≠j}𝒱_k}]/θ_n is compared with
    1/Σ_k r(j,k). Wells the reduced chain never leaves are skipped.
    """
    level = tree.level(p)
    if level.reduced_chain is None:
        raise ChainValidationError(f"level {p} is terminal and has no reduced chain")
    ctx = extended_context(_bits(precision_bits))
    chain = instantiate(family, n)
    pi = stationary_array(chain, ctx)
    idx = [_indices(family, w) for w in level.wells]
    theta = _theta(chain, idx, pi, ctx)
    reduced = level.reduced_chain.rate_matrix
    scaled, expected, errors = [], [], []
    for j, well in enumerate(idx):
        exit_rate = float(reduced[j].sum())
        if exit_rate == 0:
            continue
        others = [i for k, w in enumerate(idx) if k != j for i in w]
        m = mean_hitting_array(chain, others, ctx)
        mean = (pi[well] * m[well]).sum() / pi[well].sum()
        value = float(mean / theta)
        scaled.append(value)
        expected.append(1.0 / exit_rate)
        errors.append(abs(value - 1.0 / exit_rate) * exit_rate)
    return LumpabilityReport(
        level=p,
        n=float(n),
        scaled_times=scaled,
        reduced_times=expected,
        relative_errors=errors,
        within_tolerance=all(e <= tol for e in errors),
    )
