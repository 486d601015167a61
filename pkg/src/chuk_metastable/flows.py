# -*- coding: utf-8 -*-
# chuk_metastable/flows.py
"""
Nonnegative flows on directed edges.

Divergence, induced currents, cycle peeling and the split of a
divergence-free limit flow into per-class components.
"""

from __future__ import annotations

import logging
from typing import Dict, List, Optional, Sequence

import networkx as nx
import numpy as np

from .chain_core import chain_graph, class_decomposition
from .exceptions import CrossClassFlowError, NotDivergenceFreeError
from .models import ChainSpec, ClassDecomposition, Cycle, Flow, ProbabilityVector
from .types import CYCLE_TOL, DIVERGENCE_TOL, EdgeKey

logger = logging.getLogger(__name__)

__all__ = [
    "divergence",
    "divergence_array",
    "is_divergence_free",
    "induced_current",
    "cycle_decomposition",
    "flow_from_cycles",
    "equivalence_classes",
    "class_structure_decomposition",
]


def _flow_states(flow: Flow, states: Optional[Sequence[str]]) -> List[str]:
    if states is not None:
        return list(states)
    seen: Dict[str, None] = {}
    for source, target in flow.values:
        seen.setdefault(source)
        seen.setdefault(target)
    return list(seen)


def divergence_array(
    src: np.ndarray, dst: np.ndarray, values: np.ndarray, size: int
) -> np.ndarray:
    """(div J)(x) = Σ_y J(x,y) − Σ_y J(y,x) over index arrays."""
    out = np.zeros(size)
    np.add.at(out, src, values)
    np.subtract.at(out, dst, values)
    return out


def divergence(flow: Flow, states: Optional[Sequence[str]] = None) -> Dict[str, float]:
    """Net outflow per state; sums to zero."""
    states = _flow_states(flow, states)
    index = {s: i for i, s in enumerate(states)}
    out = np.zeros(len(states))
    for (source, target), value in flow.values.items():
        out[index[source]] += value
        out[index[target]] -= value
    return {s: float(v) for s, v in zip(states, out)}


def is_divergence_free(
    flow: Flow, states: Optional[Sequence[str]] = None, tol: float = DIVERGENCE_TOL
) -> bool:
    """|div J| ≤ tol at every state (scaled by the flow's size when it exceeds 1)."""
    div = divergence(flow, states)
    scale = max([1.0, *flow.values.values()])
    return all(abs(v) <= tol * scale for v in div.values())


def induced_current(mu: ProbabilityVector, chain: ChainSpec) -> Flow:
    """J_{μ,R}(x,y) = μ(x) R(x,y) on every edge of the chain."""
    m = mu.to_array(chain.states)
    src, _, rates = chain.edge_arrays
    return Flow.from_array(chain.edge_keys, m[src] * rates)


def _find_return_path(
    start: str, goal: str, positive: Dict[str, List[str]]
) -> Optional[List[str]]:
    """Depth-first simple path start → goal along positive edges, declared order."""
    stack = [(start, [start])]
    visited = set()
    while stack:
        node, path = stack.pop()
        if node == goal:
            return path
        if node in visited:
            continue
        visited.add(node)
        for nxt in reversed(positive.get(node, [])):
            if nxt not in visited and nxt not in path:
                stack.append((nxt, path + [nxt]))
    return None


def cycle_decomposition(
    flow: Flow, edge_order: Optional[Sequence[EdgeKey]] = None
) -> List[Cycle]:
    """
    Peel a divergence-free flow into cycles.

    Each step takes the smallest positive edge (first in ``edge_order``
    on ties), closes it with the first simple return path found by
    depth-first search, and subtracts the edge's value along the cycle.
    At most one cycle per edge is produced.

    Raises:
        NotDivergenceFreeError: the flow has nonzero divergence
    """
    if not is_divergence_free(flow):
        raise NotDivergenceFreeError("cycle decomposition needs a divergence-free flow")
    order = list(edge_order) if edge_order is not None else list(flow.values)
    for key in flow.values:
        if key not in order:
            order.append(key)
    rank = {k: i for i, k in enumerate(order)}
    residual = {k: v for k, v in flow.values.items() if v > 0}
    scale = max(residual.values(), default=0.0)
    snap = 1e-13 * scale
    cycles: List[Cycle] = []

    while residual:
        amplitude = min(residual.values())
        edge = min((k for k, v in residual.items() if v == amplitude), key=rank.__getitem__)
        source, target = edge
        positive: Dict[str, List[str]] = {}
        for x, y in sorted(residual, key=rank.__getitem__):
            if (x, y) != edge:
                positive.setdefault(x, []).append(y)
        path = _find_return_path(target, source, positive)
        if path is None:
            if amplitude <= CYCLE_TOL * scale:
                # rounding residue of an earlier peel
                del residual[edge]
                continue
            raise NotDivergenceFreeError(f"edge {edge} lies on no positive cycle")
        edges = [edge] + list(zip(path[:-1], path[1:]))
        cycles.append(Cycle(edges=edges, amplitude=amplitude))
        for k in edges:
            residual[k] -= amplitude
            if residual[k] <= snap:
                del residual[k]
    logger.debug("Cycle decomposition", extra={"cycles": len(cycles)})
    return cycles


def flow_from_cycles(cycles: Sequence[Cycle]) -> Flow:
    """Σ_c a_c·1_c, the inverse of :func:`cycle_decomposition`."""
    values: Dict[EdgeKey, float] = {}
    for cycle in cycles:
        for key in cycle.edges:
            values[key] = values.get(key, 0.0) + cycle.amplitude
    return Flow(values=values)


def equivalence_classes(limit: ChainSpec) -> List[List[str]]:
    """Strongly connected components of the limit graph that are not closed classes."""
    closed = {frozenset(c) for c in class_decomposition(limit).closed_classes}
    order = limit.index
    out = []
    for component in nx.strongly_connected_components(chain_graph(limit)):
        if frozenset(component) in closed:
            continue
        out.append(sorted(component, key=order.__getitem__))
    out.sort(key=lambda block: order[block[0]])
    return out


def class_structure_decomposition(
    flow: Flow,
    decomposition: ClassDecomposition,
    equivalence: Sequence[Sequence[str]],
) -> List[Flow]:
    """
    Split a divergence-free limit flow into per-class components.

    Components follow the block order closed classes first, then the
    transient classes; blocks carrying no flow are omitted.

    Raises:
        CrossClassFlowError: positive flow on an edge joining distinct classes
        NotDivergenceFreeError: the input is not divergence-free
    """
    blocks: List[List[str]] = [list(c) for c in decomposition.closed_classes]
    blocks += [list(c) for c in equivalence]
    owner: Dict[str, int] = {}
    for b, block in enumerate(blocks):
        for state in block:
            owner[state] = b
    parts: Dict[int, Dict[EdgeKey, float]] = {}
    for (source, target), value in flow.values.items():
        if value <= 0:
            continue
        a, c = owner.get(source), owner.get(target)
        if a is None or c is None or a != c:
            raise CrossClassFlowError(
                f"flow {value!r} on edge ({source!r}, {target!r}) joins distinct classes"
            )
        parts.setdefault(a, {})[(source, target)] = value
    if not is_divergence_free(flow):
        raise NotDivergenceFreeError("class-structure decomposition needs a divergence-free flow")
    return [Flow(values=parts[b]) for b in sorted(parts)]
