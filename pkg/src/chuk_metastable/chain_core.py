# -*- coding: utf-8 -*-
# chuk_metastable/chain_core.py
"""
Finite continuous-time Markov chains: generators, stationary measures,
class structure, hitting probabilities, capacities and trace chains.

Public operations take and return domain models. The ``*_array`` helpers
underneath work on index arrays and accept an optional mpmath context so
that the hierarchy can run the same solves at extended precision.
"""

from __future__ import annotations

import logging
import math
from functools import reduce
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from mpmath import MPContext

from .config import load_settings
from .exceptions import (
    ChainValidationError,
    EmptyLimitError,
    NotIrreducibleError,
    SingularSystemError,
    UnreachableError,
)
from .models import ChainSpec, ClassDecomposition, ParamChainSpec, ProbabilityVector
from .numerics import extended_context, lift, lower, solve, zeros_like_context
from .types import MATRIX_TREE_MAX_ASSIGNMENTS

logger = logging.getLogger(__name__)

__all__ = [
    "holding_rates",
    "apply_generator",
    "generator_matrix",
    "transition_probabilities",
    "chain_graph",
    "class_decomposition",
    "is_irreducible",
    "restrict",
    "stationary_distribution",
    "matrix_tree_stationary",
    "instantiate",
    "limit_chain",
    "hitting_probability",
    "capacity",
    "trace_chain",
    "mean_hitting_time",
    "is_reversible",
    "equilibrium_potentials",
]


# ─────────────────────────────────────────────────────────────────────
# Helpers
# ─────────────────────────────────────────────────────────────────────


def state_indices(chain: ChainSpec, subset: Iterable[str], name: str = "subset") -> List[int]:
    """Indices of ``subset`` in declared order; unknown states raise."""
    wanted = list(dict.fromkeys(subset))
    unknown = [s for s in wanted if s not in chain.index]
    if unknown:
        raise ChainValidationError(f"{name} contains undeclared states {unknown}")
    return sorted(chain.index[s] for s in wanted)


def rate_array(chain: ChainSpec, ctx: Optional[MPContext] = None) -> np.ndarray:
    """The rate matrix, lifted into ``ctx`` when given."""
    return lift(chain.rate_matrix, ctx)


def generator_matrix(chain: ChainSpec, ctx: Optional[MPContext] = None) -> np.ndarray:
    """ℒ = R − diag(λ); the diagonal is summed in the working precision."""
    R = rate_array(chain, ctx)
    L = R.copy()
    lam = R.sum(axis=1)
    for i in range(chain.size):
        L[i, i] = -lam[i]
    return L


def chain_graph(chain: ChainSpec) -> nx.DiGraph:
    G = nx.DiGraph()
    G.add_nodes_from(chain.states)
    G.add_edges_from(chain.edge_keys)
    return G


def _reaches(G: nx.DiGraph, sources: Iterable[str], targets: Iterable[str]) -> List[str]:
    """States in ``sources`` with no path into ``targets``."""
    targets = set(targets)
    reverse = G.reverse(copy=False)
    can_reach = set(targets)
    for t in targets:
        can_reach |= nx.descendants(reverse, t)
    return [s for s in sources if s not in can_reach]


# ─────────────────────────────────────────────────────────────────────
# Generator
# ─────────────────────────────────────────────────────────────────────


def holding_rates(chain: ChainSpec) -> Dict[str, float]:
    """λ(x) = Σ_y R(x,y); zero for absorbing states of a limit chain."""
    lam = chain.rate_matrix.sum(axis=1)
    return {s: float(v) for s, v in zip(chain.states, lam)}


def apply_generator(chain: ChainSpec, f: Mapping[str, float]) -> Dict[str, float]:
    """(ℒf)(x) = Σ_y R(x,y)(f(y) − f(x))."""
    missing = [s for s in chain.states if s not in f]
    if missing:
        raise ChainValidationError(f"function is not defined on {missing}")
    values = np.array([float(f[s]) for s in chain.states])
    src, dst, rates = chain.edge_arrays
    out = np.zeros(chain.size)
    np.add.at(out, src, rates * (values[dst] - values[src]))
    return {s: float(v) for s, v in zip(chain.states, out)}


def transition_probabilities(chain: ChainSpec) -> np.ndarray:
    """Jump-chain matrix p(x,y) = R(x,y)/λ(x); rows of absorbing states are zero."""
    R = chain.rate_matrix
    lam = R.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        P = np.where(lam[:, None] > 0, R / lam[:, None], 0.0)
    return P


# ─────────────────────────────────────────────────────────────────────
# Class structure
# ─────────────────────────────────────────────────────────────────────


def class_decomposition(chain: ChainSpec) -> ClassDecomposition:
    """
    Closed irreducible classes and the transient remainder.

    Classes are ordered by their first declared state; states inside a
    class keep declared order.
    """
    G = chain_graph(chain)
    C = nx.condensation(G)
    order = chain.index
    closed: List[List[str]] = []
    transient: List[str] = []
    for node in C.nodes:
        members = sorted(C.nodes[node]["members"], key=order.__getitem__)
        if C.out_degree(node) == 0:
            closed.append(members)
        else:
            transient.extend(members)
    closed.sort(key=lambda block: order[block[0]])
    transient.sort(key=order.__getitem__)
    return ClassDecomposition(closed_classes=closed, transient=transient)


def is_irreducible(chain: ChainSpec) -> bool:
    return nx.is_strongly_connected(chain_graph(chain))


def restrict(chain: ChainSpec, subset: Iterable[str]) -> ChainSpec:
    """Sub-chain on ``subset`` keeping only edges internal to it."""
    idx = state_indices(chain, subset)
    keep = [chain.states[i] for i in idx]
    inside = set(keep)
    return ChainSpec(
        states=keep,
        edges=[e for e in chain.edges if e.source in inside and e.target in inside],
    )


# ─────────────────────────────────────────────────────────────────────
# Stationary distribution
# ─────────────────────────────────────────────────────────────────────


def stationary_array(chain: ChainSpec, ctx: Optional[MPContext] = None) -> np.ndarray:
    """
    π of an irreducible chain by LU on ℒᵀ with one row replaced by Σπ = 1.

    Raises:
        NotIrreducibleError: more than one closed class or a transient state
    """
    if not is_irreducible(chain):
        raise NotIrreducibleError(
            f"chain on {chain.size} states is not irreducible; stationary state is not unique"
        )
    N = chain.size
    if N == 1:
        return lift(np.ones(1), ctx)
    A = generator_matrix(chain, ctx).T.copy()
    b = zeros_like_context(N, ctx)
    A[-1, :] = lift(np.ones(N), ctx)
    b[-1] = lift(1.0, ctx)
    pi = solve(A, b)
    pi = pi / pi.sum()
    if np.any(lower(pi) <= 0):
        raise SingularSystemError("stationary solve produced a non-positive weight")
    return pi


def _arborescence_weight(R: np.ndarray, root: int, out_edges: List[List[int]]) -> float:
    """Σ over spanning in-trees rooted at ``root`` of the product of their rates."""
    others = [x for x in range(R.shape[0]) if x != root]
    choice: Dict[int, int] = {}

    def closes_cycle(x: int, y: int) -> bool:
        node = y
        while node != root and node in choice:
            node = choice[node]
            if node == x:
                return True
        return node == x

    def search(k: int, weight: float) -> float:
        if k == len(others):
            return weight
        x = others[k]
        total = 0.0
        for y in out_edges[x]:
            if closes_cycle(x, y):
                continue
            choice[x] = y
            total += search(k + 1, weight * R[x, y])
            del choice[x]
        return total

    return search(0, 1.0)


def _kirchhoff_weight(R: np.ndarray, root: int) -> float:
    lap = np.diag(R.sum(axis=1)) - R
    keep = [i for i in range(R.shape[0]) if i != root]
    return float(np.linalg.det(lap[np.ix_(keep, keep)]))


def matrix_tree_stationary(chain: ChainSpec) -> ProbabilityVector:
    """
    π(x) ∝ total weight of spanning arborescences directed toward x.

    Arborescences are enumerated recursively (each non-root state picks
    one outgoing edge, cycles pruned); when the number of assignments
    exceeds the enumeration bound the weights come from Kirchhoff minors
    of the out-degree Laplacian instead.
    """
    if not is_irreducible(chain):
        raise NotIrreducibleError("matrix-tree formula needs an irreducible chain")
    R = chain.rate_matrix
    N = chain.size
    out_edges = [list(np.nonzero(R[x])[0]) for x in range(N)]
    assignments = reduce(lambda acc, e: acc * max(len(e), 1), out_edges, 1)
    if assignments <= MATRIX_TREE_MAX_ASSIGNMENTS:
        weights = np.array([_arborescence_weight(R, r, out_edges) for r in range(N)])
    else:
        logger.debug(
            "Arborescence enumeration too large, using Kirchhoff minors",
            extra={"assignments": assignments},
        )
        weights = np.array([_kirchhoff_weight(R, r) for r in range(N)])
    return ProbabilityVector.from_array(chain.states, weights, normalize=True)


def _matrix_tree_limit() -> int:
    return load_settings().matrix_tree_max_states


def stationary_distribution(
    chain: ChainSpec, precision_bits: Optional[int] = None, cross_check: bool = True
) -> ProbabilityVector:
    """
    The unique stationary state of an irreducible chain.

    For small chains the LU result is compared with the matrix-tree
    formula; a disagreement above 1e-10 relative is logged, not raised.
    """
    ctx = extended_context(precision_bits)
    pi = lower(stationary_array(chain, ctx))
    if cross_check and chain.size <= _matrix_tree_limit():
        tree = matrix_tree_stationary(chain).to_array(chain.states)
        error = float(np.max(np.abs(tree - pi) / pi))
        if error > 1e-10:
            logger.warning(
                "Matrix-tree cross-check disagrees with LU stationary state",
                extra={"relative_error": error, "states": chain.size},
            )
    return ProbabilityVector.from_array(chain.states, pi, normalize=True)


# ─────────────────────────────────────────────────────────────────────
# Families
# ─────────────────────────────────────────────────────────────────────


def instantiate(family: ParamChainSpec, n: float) -> ChainSpec:
    """Substitute n: R_n(x,y) = coeff·n^(−exponent)."""
    if not n >= 1 or not math.isfinite(n):
        raise ChainValidationError(f"scale parameter must be a finite n ≥ 1, got {n}")
    return ChainSpec.from_rates(
        family.states, {(e.source, e.target): e.rate_at(n) for e in family.edges}
    )


def limit_chain(family: ParamChainSpec) -> ChainSpec:
    """Keep exactly the exponent-0 edges at rate coeff; may have absorbing states."""
    survivors = {(e.source, e.target): e.coeff for e in family.edges if e.exponent == 0}
    if not survivors:
        raise EmptyLimitError("no edge of the family has exponent 0; the limit chain is empty")
    return ChainSpec.from_rates(family.states, survivors)


# ─────────────────────────────────────────────────────────────────────
# Potential theory
# ─────────────────────────────────────────────────────────────────────


def hitting_array(
    chain: ChainSpec,
    target: Sequence[int],
    avoid: Sequence[int],
    ctx: Optional[MPContext] = None,
) -> np.ndarray:
    """h(x) = P_x[H_target < H_avoid] as an array over all states."""
    if not target:
        raise ChainValidationError("target set must be nonempty")
    if set(target) & set(avoid):
        raise ChainValidationError("target and avoid sets must be disjoint")
    N = chain.size
    boundary = set(target) | set(avoid)
    free = [i for i in range(N) if i not in boundary]
    h = zeros_like_context(N, ctx)
    for i in target:
        h[i] = lift(1.0, ctx)
    if not free:
        return h
    stuck = _reaches(
        chain_graph(chain),
        [chain.states[i] for i in free],
        [chain.states[i] for i in boundary],
    )
    if stuck:
        raise SingularSystemError(f"states {stuck} cannot reach target ∪ avoid")
    R = rate_array(chain, ctx)
    lam = R.sum(axis=1)
    A = -R[np.ix_(free, free)]
    for k, i in enumerate(free):
        A[k, k] = lam[i]
    b = R[np.ix_(free, list(target))].sum(axis=1)
    h[free] = solve(A, b)
    if ctx is None:
        h = np.clip(h, 0.0, 1.0)
    return h


def hitting_probability(
    chain: ChainSpec,
    target: Iterable[str],
    avoid: Iterable[str],
    precision_bits: Optional[int] = None,
) -> Dict[str, float]:
    """
    h(x) = P_x[H_target < H_avoid]: ℒh = 0 off target ∪ avoid, 1 on target, 0 on avoid.

    Raises:
        SingularSystemError: some state cannot reach target ∪ avoid
    """
    ctx = extended_context(precision_bits)
    h = hitting_array(
        chain, state_indices(chain, target, "target"), state_indices(chain, avoid, "avoid"), ctx
    )
    return {s: float(v) for s, v in zip(chain.states, lower(h))}


def capacity_value(
    chain: ChainSpec,
    A: Sequence[int],
    B: Sequence[int],
    ctx: Optional[MPContext] = None,
    pi: Optional[np.ndarray] = None,
):
    """Cap(A,B) = Σ_{x∈A} π(x) Σ_y R(x,y) h(y), h = P[H_B < H_A] (1 on B, 0 on A)."""
    if not A or not B:
        raise ChainValidationError("capacity needs nonempty A and B")
    if pi is None:
        pi = stationary_array(chain, ctx)
    h = hitting_array(chain, list(B), list(A), ctx)
    R = rate_array(chain, ctx)
    flux = R[list(A)] @ h
    return (pi[list(A)] * flux).sum()


def capacity(
    chain: ChainSpec,
    A: Iterable[str],
    B: Iterable[str],
    precision_bits: Optional[int] = None,
) -> float:
    """
    Cap(A,B) = Σ_{x∈A} π(x) λ(x) P_x[H_B < H⁺_A].

    The escape probability is the one-step expansion Σ_y p(x,y) h(y).

    Raises:
        NotIrreducibleError: the chain is not irreducible
    """
    ctx = extended_context(precision_bits)
    a = state_indices(chain, A, "A")
    b = state_indices(chain, B, "B")
    if set(a) & set(b):
        raise ChainValidationError("capacity sets must be disjoint")
    return float(capacity_value(chain, a, b, ctx))


def trace_array(
    chain: ChainSpec, keep: Sequence[int], ctx: Optional[MPContext] = None
) -> np.ndarray:
    """
    Trace rates on ``keep``: R_KK + R_KD (diag λ_D − R_DD)⁻¹ R_DK, zero diagonal.

    Entries without a structural path through deleted states are exact zeros.
    """
    if not keep:
        raise ChainValidationError("trace needs a nonempty keep set")
    N = chain.size
    K = list(keep)
    D = [i for i in range(N) if i not in set(K)]
    R = rate_array(chain, ctx)
    if not D:
        out = R.copy()
        for i in range(N):
            out[i, i] = lift(0.0, ctx)
        return out
    G = chain_graph(chain)
    stuck = _reaches(G, [chain.states[i] for i in D], [chain.states[i] for i in K])
    if stuck:
        raise UnreachableError(f"deleted states {stuck} cannot reach the kept set")
    lam = R.sum(axis=1)
    A = -R[np.ix_(D, D)]
    for k, i in enumerate(D):
        A[k, k] = lam[i]
    X = solve(A, R[np.ix_(D, K)])
    tr = R[np.ix_(K, K)] + R[np.ix_(K, D)] @ X

    deleted = set(D)
    support = np.zeros((len(K), len(K)), dtype=bool)
    pos = {i: k for k, i in enumerate(K)}
    for a, x in enumerate(K):
        stack = list(np.nonzero(chain.rate_matrix[x])[0])
        seen = set()
        while stack:
            y = int(stack.pop())
            if y in seen:
                continue
            seen.add(y)
            if y in deleted:
                stack.extend(np.nonzero(chain.rate_matrix[y])[0])
            else:
                support[a, pos[y]] = True
    zero = lift(0.0, ctx)
    for a in range(len(K)):
        for c in range(len(K)):
            if a == c or not support[a, c] or lower(tr[a, c]) < 0:
                tr[a, c] = zero
    return tr


def trace_chain(
    chain: ChainSpec, keep: Iterable[str], precision_bits: Optional[int] = None
) -> ChainSpec:
    """
    The chain watched only while in ``keep``.

    Raises:
        UnreachableError: some deleted state cannot reach ``keep``
    """
    ctx = extended_context(precision_bits)
    K = state_indices(chain, keep, "keep")
    tr = lower(trace_array(chain, K, ctx))
    return ChainSpec.from_matrix([chain.states[i] for i in K], tr)


def mean_hitting_array(
    chain: ChainSpec, target: Sequence[int], ctx: Optional[MPContext] = None
) -> np.ndarray:
    N = chain.size
    if not target:
        raise ChainValidationError("target set must be nonempty")
    free = [i for i in range(N) if i not in set(target)]
    m = zeros_like_context(N, ctx)
    if not free:
        return m
    stuck = _reaches(
        chain_graph(chain), [chain.states[i] for i in free], [chain.states[i] for i in target]
    )
    if stuck:
        raise UnreachableError(f"states {stuck} cannot reach the target")
    R = rate_array(chain, ctx)
    lam = R.sum(axis=1)
    A = -R[np.ix_(free, free)]
    for k, i in enumerate(free):
        A[k, k] = lam[i]
    m[free] = solve(A, lift(np.ones(len(free)), ctx))
    return m


def mean_hitting_time(
    chain: ChainSpec, target: Iterable[str], precision_bits: Optional[int] = None
) -> Dict[str, float]:
    """E_x[H_target]: solves (−ℒ)m = 1 off target, m = 0 on target."""
    ctx = extended_context(precision_bits)
    m = mean_hitting_array(chain, state_indices(chain, target, "target"), ctx)
    return {s: float(v) for s, v in zip(chain.states, lower(m))}


def is_reversible(chain: ChainSpec, tol: float = 1e-10) -> bool:
    """Detailed balance π(x)R(x,y) = π(y)R(y,x) within ``tol`` relative."""
    pi = lower(stationary_array(chain))
    flux = pi[:, None] * chain.rate_matrix
    scale = max(float(flux.max(initial=0.0)), 1e-300)
    return bool(np.max(np.abs(flux - flux.T), initial=0.0) <= tol * scale)


def equilibrium_arrays(
    chain: ChainSpec, wells: Sequence[Sequence[int]], ctx: Optional[MPContext] = None
) -> List[np.ndarray]:
    out = []
    for j, well in enumerate(wells):
        others = [i for k, w in enumerate(wells) if k != j for i in w]
        if not others:
            out.append(lift(np.ones(chain.size), ctx))
            continue
        out.append(hitting_array(chain, list(well), others, ctx))
    return out


def equilibrium_potentials(
    chain: ChainSpec, wells: Sequence[Iterable[str]], precision_bits: Optional[int] = None
) -> List[Dict[str, float]]:
    """h_j(x) = P_x[H_{𝒱_j} < H_{∪_{k≠j} 𝒱_k}] for each well."""
    ctx = extended_context(precision_bits)
    idx = [state_indices(chain, w, "well") for w in wells]
    return [
        {s: float(v) for s, v in zip(chain.states, lower(h))}
        for h in equilibrium_arrays(chain, idx, ctx)
    ]
