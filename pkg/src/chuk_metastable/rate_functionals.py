# -*- coding: utf-8 -*-
# chuk_metastable/rate_functionals.py
"""
Rate functionals of finite chains.

* Φ(q,p) and Υ(μ,J) = Σ_e Φ(J(e), μ(x)R(e))
* the measure-current functional I(μ,J): Υ on divergence-free J, +∞ otherwise
* the Donsker–Varadhan functional ℐ(μ), computed two ways:

  - ``variational``: maximize the concave 𝒢(μ,H) = Σ μ(x)R(x,y)(1 − e^{H(y)−H(x)})
    over potentials H by damped Newton;
  - ``projection``: minimize Υ(μ,·) over divergence-free currents by an
    infeasible-start primal-dual Newton method.

Measures with zeros are split along the strongly connected blocks of the
support: edges not inside a block carry no current and cost μ(x)R(x,y);
each block is an interior problem. Φ is 1-homogeneous, so blocks are solved
without renormalizing μ.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.special import kl_div

from .chain_core import is_irreducible, stationary_array
from .exceptions import (
    ChainValidationError,
    NonConvergenceError,
    NotIrreducibleError,
    NotStrictlyPositiveError,
)
from .flows import divergence_array, is_divergence_free
from .models import ChainSpec, Flow, ProbabilityVector, TiltField
from .numerics import solve_scaled_laplacian
from .types import (
    DEFAULT_MAX_ITERATIONS,
    GRADIENT_TOL,
    INF,
    KKT_TOL,
    DvMethod,
)

logger = logging.getLogger(__name__)

__all__ = [
    "phi",
    "upsilon",
    "bfg_rate",
    "dv_objective",
    "dv_rate_variational",
    "dv_rate_projection",
    "dv_rate",
    "stationarity_gap",
    "tilt_solver",
    "tilted_chain",
    "optimal_current",
    "tilt_inverse",
]


# ─────────────────────────────────────────────────────────────────────
# Φ and Υ
# ─────────────────────────────────────────────────────────────────────


def phi(q: float, p: float) -> float:
    """
    Φ(q,p) = q log(q/p) − (q − p), with Φ(0,p) = p and Φ(q,0) = +∞ for q > 0.
    """
    if q < 0 or p < 0 or math.isnan(q) or math.isnan(p):
        raise ChainValidationError(f"Φ needs nonnegative arguments, got ({q}, {p})")
    return float(kl_div(q, p))


def phi_array(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    return kl_div(np.asarray(q, dtype=float), np.asarray(p, dtype=float))


def _flow_on_chain(chain: ChainSpec, J: Flow) -> Tuple[np.ndarray, bool]:
    """(values on chain edges, whether J charges an edge outside the chain)."""
    return J.to_array(chain.edge_keys, strict=False), J.outside_mass(chain.edge_keys) > 0


def upsilon(chain: ChainSpec, mu: ProbabilityVector, J: Flow) -> float:
    """Υ(μ,J) = Σ_e Φ(J(e), μ(x)R(e)); +∞ if J charges an edge R does not have."""
    values, outside = _flow_on_chain(chain, J)
    if outside:
        return INF
    m = mu.to_array(chain.states)
    src, _, rates = chain.edge_arrays
    return float(np.sum(phi_array(values, m[src] * rates)))


def bfg_rate(chain: ChainSpec, mu: ProbabilityVector, J: Flow) -> float:
    """I(μ,J): Υ(μ,J) if J is divergence-free, +∞ otherwise."""
    if not is_divergence_free(J, chain.states if _states_cover(chain, J) else None):
        return INF
    return upsilon(chain, mu, J)


def _states_cover(chain: ChainSpec, J: Flow) -> bool:
    known = chain.index
    return all(s in known and t in known for s, t in J.values)


# ─────────────────────────────────────────────────────────────────────
# Block structure of the support
# ─────────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class _Block:
    states: np.ndarray  # global state indices
    edges: np.ndarray  # global edge indices, both endpoints inside


def _support_blocks(
    src: np.ndarray, dst: np.ndarray, size: int, m: np.ndarray
) -> Tuple[List[_Block], np.ndarray]:
    """Strongly connected blocks of the support graph, plus a mask of edges outside them."""
    positive = m > 0
    G = nx.DiGraph()
    G.add_nodes_from(int(i) for i in np.nonzero(positive)[0])
    for e, (x, y) in enumerate(zip(src, dst)):
        if positive[x] and positive[y]:
            G.add_edge(int(x), int(y))
    owner = np.full(size, -1)
    blocks: List[_Block] = []
    components = sorted(
        (sorted(c) for c in nx.strongly_connected_components(G)), key=lambda c: c[0]
    )
    for b, comp in enumerate(components):
        owner[comp] = b
    inside = np.zeros(len(src), dtype=bool)
    for b, comp in enumerate(components):
        edges = np.nonzero((owner[src] == b) & (owner[dst] == b))[0]
        inside[edges] = True
        blocks.append(_Block(states=np.array(comp, dtype=int), edges=edges))
    return blocks, ~inside


def _local(block: _Block, src: np.ndarray, dst: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    pos = {int(s): k for k, s in enumerate(block.states)}
    return (
        np.array([pos[int(x)] for x in src[block.edges]], dtype=int),
        np.array([pos[int(y)] for y in dst[block.edges]], dtype=int),
    )


# ─────────────────────────────────────────────────────────────────────
# Variational (sup over potentials)
# ─────────────────────────────────────────────────────────────────────


def _laplacian(src: np.ndarray, dst: np.ndarray, weights: np.ndarray, size: int) -> np.ndarray:
    L = np.zeros((size, size))
    np.add.at(L, (src, src), weights)
    np.add.at(L, (dst, dst), weights)
    np.subtract.at(L, (src, dst), weights)
    np.subtract.at(L, (dst, src), weights)
    return L


def _objective(a: np.ndarray, src: np.ndarray, dst: np.ndarray, H: np.ndarray) -> float:
    with np.errstate(over="ignore"):
        return float(np.sum(-a * np.expm1(H[dst] - H[src])))


@dataclass(frozen=True)
class TiltSolution:
    """Maximizer of 𝒢(μ,·) on one block: value, potential and optimal current."""

    value: float
    H: np.ndarray
    J: np.ndarray
    iterations: int


def stationarity_gap(src: np.ndarray, dst: np.ndarray, J: np.ndarray, size: int) -> float:
    """Largest |div J(x)| relative to the flux through x; the tilt stopping rule."""
    g = divergence_array(src, dst, J, size)
    flux = np.zeros(size)
    np.add.at(flux, src, J)
    np.add.at(flux, dst, J)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(flux > 0, np.abs(g) / flux, np.where(g == 0, 0.0, np.inf))
    return float(ratio.max(initial=0.0))


def maximize_tilt(
    a: np.ndarray,
    src: np.ndarray,
    dst: np.ndarray,
    size: int,
    H0: Optional[np.ndarray] = None,
    tol: float = GRADIENT_TOL,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> TiltSolution:
    """
    Damped Newton ascent of 𝒢(H) = Σ_e a_e (1 − e^{H(y)−H(x)}) with H(0) = 0.

    The gradient is div J_H and the Hessian is minus the Laplacian weighted
    by J_H = a·e^{ΔH}. Stops when every state's gradient is within ``tol``
    of its incident tilted flux.
    """
    H = np.zeros(size) if H0 is None else np.asarray(H0, dtype=float) - float(H0[0])
    if size == 1:
        return TiltSolution(_objective(a, src, dst, H), H, a.copy(), 0)
    value = _objective(a, src, dst, H)
    slack = 1e-15 * float(a.sum())
    for it in range(max_iterations + 1):
        with np.errstate(over="ignore"):
            J = a * np.exp(H[dst] - H[src])
        if stationarity_gap(src, dst, J, size) <= tol:
            logger.debug("Tilt Newton converged", extra={"iterations": it, "value": value})
            return TiltSolution(value, H, J, it)
        if it == max_iterations:
            break
        g = divergence_array(src, dst, J, size)
        lap = _laplacian(src, dst, J, size)
        step = np.zeros(size)
        step[1:] = solve_scaled_laplacian(lap[1:, 1:], g[1:])
        t = 1.0
        while True:
            trial = H + t * step
            trial_value = _objective(a, src, dst, trial)
            if math.isfinite(trial_value) and trial_value >= value - slack:
                break
            t /= 2
            if t < 1e-12:
                raise NonConvergenceError(
                    f"tilt line search stalled after {it} iterations (max |grad| {np.abs(g).max():.3e})"
                )
        H, value = trial, trial_value
    raise NonConvergenceError(f"tilt Newton did not converge in {max_iterations} iterations")


# ─────────────────────────────────────────────────────────────────────
# Projection (inf over divergence-free currents)
# ─────────────────────────────────────────────────────────────────────


def minimize_current(
    a: np.ndarray,
    src: np.ndarray,
    dst: np.ndarray,
    size: int,
    tol: float = KKT_TOL,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> Tuple[float, np.ndarray]:
    """
    min Σ_e Φ(J_e, a_e) subject to div J = 0, on a strongly connected block.

    Infeasible-start primal-dual Newton on (J, ν) with ν(0) = 0:
    r_d = log(J/a) + Bᵀν, r_p = BJ, reduced system (B D Bᵀ)Δν = r_p − B D r_d
    with D = diag(J), then ΔJ = −D(r_d + BᵀΔν). J stays positive.

    Returns:
        (value, J)
    """
    if size == 1 or len(a) == 0:
        return 0.0, a.copy()
    J = a.copy()
    nu = np.zeros(size)

    def residuals(J_: np.ndarray, nu_: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        r_d = np.log(J_ / a) + (nu_[src] - nu_[dst])
        r_p = divergence_array(src, dst, J_, size)
        return r_d, r_p

    def merit(r_d: np.ndarray, r_p: np.ndarray, J_: np.ndarray) -> float:
        flux = np.zeros(size)
        np.add.at(flux, src, J_)
        np.add.at(flux, dst, J_)
        return max(float(np.abs(r_d).max()), float(np.max(np.abs(r_p) / flux)))

    r_d, r_p = residuals(J, nu)
    current = merit(r_d, r_p, J)
    polish = 2
    for it in range(max_iterations):
        if current <= tol:
            if polish == 0 or current <= 1e-14:
                break
            polish -= 1
        lap = _laplacian(src, dst, J, size)
        rhs = r_p - divergence_array(src, dst, J * r_d, size)
        dnu = np.zeros(size)
        dnu[1:] = solve_scaled_laplacian(lap[1:, 1:], rhs[1:])
        dJ = -J * (r_d + (dnu[src] - dnu[dst]))
        t = 1.0
        shrinking = dJ < 0
        if np.any(shrinking):
            t = min(1.0, 0.99 * float(np.min(-J[shrinking] / dJ[shrinking])))
        accepted = False
        while t > 1e-12:
            J_new, nu_new = J + t * dJ, nu + t * dnu
            r_d_new, r_p_new = residuals(J_new, nu_new)
            trial = merit(r_d_new, r_p_new, J_new)
            if trial < current or (current <= tol and trial <= current * 1.5):
                accepted = True
                break
            t /= 2
        if not accepted:
            if current <= tol:
                break
            raise NonConvergenceError(
                f"primal-dual line search stalled after {it} iterations (KKT residual {current:.3e})"
            )
        J, nu, r_d, r_p, current = J_new, nu_new, r_d_new, r_p_new, trial
    else:
        if current > tol:
            raise NonConvergenceError(
                f"primal-dual Newton did not converge in {max_iterations} iterations "
                f"(KKT residual {current:.3e})"
            )
    logger.debug("Current projection converged", extra={"residual": current})
    return float(np.sum(phi_array(J, a))), J


# ─────────────────────────────────────────────────────────────────────
# DV functional
# ─────────────────────────────────────────────────────────────────────


def _measure(chain: ChainSpec, mu: ProbabilityVector) -> np.ndarray:
    return mu.to_array(chain.states)


def dv_value_array(
    chain: ChainSpec,
    m: np.ndarray,
    method: DvMethod = DvMethod.AUTO,
    H0: Optional[np.ndarray] = None,
) -> Tuple[float, np.ndarray]:
    """
    ℐ(μ) for an array measure, any chain, any support.

    Returns:
        (value, optimal current on the chain's edges)
    """
    src, dst, rates = chain.edge_arrays
    a = m[src] * rates
    blocks, outside = _support_blocks(src, dst, chain.size, m)
    total = float(a[outside].sum())
    J = np.zeros(len(a))
    for block in blocks:
        if len(block.edges) == 0:
            continue
        ls, ld = _local(block, src, dst)
        ab = a[block.edges]
        if method == DvMethod.PROJECTION:
            value, Jb = minimize_current(ab, ls, ld, len(block.states))
        else:
            start = None
            if H0 is not None:
                start = np.asarray(H0, dtype=float)[block.states]
            sol = maximize_tilt(ab, ls, ld, len(block.states), H0=start)
            value, Jb = sol.value, sol.J
        total += value
        J[block.edges] = Jb
    return max(total, 0.0), J


def _require_interior(chain: ChainSpec, m: np.ndarray) -> None:
    if not is_irreducible(chain):
        raise NotIrreducibleError("interior DV evaluation needs an irreducible chain")
    if np.any(m <= 0):
        zeros = [s for s, v in zip(chain.states, m) if v <= 0]
        raise NotStrictlyPositiveError(f"measure vanishes on {zeros}")


def dv_objective(chain: ChainSpec, mu: ProbabilityVector, H: TiltField) -> float:
    """𝒢(μ,H) = Σ μ(x)R(x,y)(1 − e^{H(y)−H(x)})."""
    src, dst, rates = chain.edge_arrays
    m = _measure(chain, mu)
    return _objective(m[src] * rates, src, dst, H.to_array(chain.states))


def solve_tilt(
    chain: ChainSpec, mu: ProbabilityVector, warm_start: Optional[TiltField] = None
) -> TiltSolution:
    """Interior maximizer of 𝒢(μ,·) on an irreducible chain."""
    m = _measure(chain, mu)
    _require_interior(chain, m)
    src, dst, rates = chain.edge_arrays
    H0 = warm_start.to_array(chain.states) if warm_start is not None else None
    return maximize_tilt(m[src] * rates, src, dst, chain.size, H0=H0)


def dv_rate_variational(
    chain: ChainSpec, mu: ProbabilityVector, warm_start: Optional[TiltField] = None
) -> float:
    """
    ℐ(μ) = sup_H 𝒢(μ,H) for strictly positive μ on an irreducible chain.

    Raises:
        NotIrreducibleError, NotStrictlyPositiveError, NonConvergenceError
    """
    return max(solve_tilt(chain, mu, warm_start).value, 0.0)


def dv_rate_projection(chain: ChainSpec, mu: ProbabilityVector) -> float:
    """
    ℐ(μ) = inf_{div J = 0} Υ(μ,J); any μ, boundary included.

    Raises:
        NonConvergenceError
    """
    value, _ = dv_value_array(chain, _measure(chain, mu), DvMethod.PROJECTION)
    return value


def dv_rate(
    chain: ChainSpec, mu: ProbabilityVector, method: DvMethod = DvMethod.AUTO
) -> float:
    """
    ℐ(μ) by the requested method.

    ``auto`` solves the potential problem on each strongly connected block
    of the support, which covers interior and boundary measures alike.
    """
    method = DvMethod(method)
    if method == DvMethod.VARIATIONAL:
        return dv_rate_variational(chain, mu)
    value, _ = dv_value_array(chain, _measure(chain, mu), method)
    return value


# ─────────────────────────────────────────────────────────────────────
# Tilts
# ─────────────────────────────────────────────────────────────────────


def tilt_solver(chain: ChainSpec, mu: ProbabilityVector) -> TiltField:
    """
    H_μ, the potential for which μ is stationary under R_H, with H(x₀) = 0.

    Raises:
        NotStrictlyPositiveError, NotIrreducibleError, NonConvergenceError
    """
    sol = solve_tilt(chain, mu)
    src, dst, _ = chain.edge_arrays
    gap = stationarity_gap(src, dst, sol.J, chain.size)
    if gap > GRADIENT_TOL:
        raise NonConvergenceError(f"tilted stationarity gap {gap:.3e} relative to flux too large")
    return TiltField.from_array(chain.states, sol.H)


def tilted_chain(chain: ChainSpec, H: TiltField) -> ChainSpec:
    """R_H(x,y) = R(x,y)·e^{H(y)−H(x)} on the same edges."""
    h = H.to_array(chain.states)
    src, dst, rates = chain.edge_arrays
    tilted = rates * np.exp(h[dst] - h[src])
    if not np.all(np.isfinite(tilted)) or np.any(tilted <= 0):
        raise ChainValidationError("tilt overflows the representable rate range")
    return ChainSpec.from_rates(
        chain.states, {k: float(r) for k, r in zip(chain.edge_keys, tilted)}
    )


def optimal_current(chain: ChainSpec, mu: ProbabilityVector) -> Flow:
    """J*_μ(x,y) = μ(x)R(x,y)e^{H_μ(y)−H_μ(x)}; divergence-free."""
    sol = solve_tilt(chain, mu)
    return Flow.from_array(chain.edge_keys, sol.J)


def tilt_inverse(chain: ChainSpec, H: TiltField) -> ProbabilityVector:
    """Stationary state of the tilted chain: the μ with H_μ = H."""
    if not is_irreducible(chain):
        raise NotIrreducibleError("tilt inverse needs an irreducible chain")
    pi = stationary_array(tilted_chain(chain, H))
    return ProbabilityVector.from_array(chain.states, np.asarray(pi, dtype=float), normalize=True)
