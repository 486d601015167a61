# -*- coding: utf-8 -*-
# chuk_metastable/calculus.py
"""
Derivatives of the Donsker–Varadhan functional at interior measures.

At a base point (chain, μ) the tilted generator ℒ = ℒ_{H_μ} has μ as its
stationary state, so its L²(μ) adjoint ℒ* and symmetric part
ℒ^s = ½(ℒ + ℒ*) are generators too. With f = dν/dμ:

* first derivative   Σ_x ν(x) Σ_y R(x,y)[1 − e^{H_μ(y)−H_μ(x)}]
* tilt derivative    ½ (ℒ^s)⁻¹ ℒ* f
* second derivative  ½ ⟨f₁, ℒ (−ℒ^s)⁻¹ ℒ* f₂⟩_μ

Singular systems are solved on mean-zero functions by anchoring the first
state at zero and dropping the first equation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space

from .chain_core import generator_matrix, is_irreducible, stationary_array
from .exceptions import (
    NotIrreducibleError,
    NotMeanZeroError,
    NotStrictlyPositiveError,
    SingularSymmetricPartError,
    SingularSystemError,
)
from .models import ChainSpec, ProbabilityVector, SignedMeasure, TiltField
from .numerics import neville_extrapolate, solve
from .rate_functionals import (
    dv_rate_variational,
    tilt_inverse,
    tilt_solver,
)
from .types import (
    DUALITY_TOL,
    NORMALIZATION_TOL,
    FiniteDifferenceReport,
    LegendreReport,
    QuadraticTiltReport,
)

logger = logging.getLogger(__name__)

__all__ = [
    "OperatorBundle",
    "operator_bundle",
    "first_derivative",
    "tilt_derivative",
    "second_derivative",
    "asymptotic_variance",
    "quadratic_tilt_limit",
    "legendre_dual",
    "legendre_check",
    "finite_difference_report",
]

QUADRATIC_EPSILONS = (1e-1, 1e-2, 1e-3, 1e-4)
FIRST_FD_STEPS = (1e-3, 1e-4, 1e-5)
SECOND_FD_STEPS = (1e-2, 5e-3, 2.5e-3)


@dataclass(frozen=True)
class OperatorBundle:
    """Tilted generator, its L²(μ) adjoint and symmetric part at (chain, μ)."""

    states: Tuple[str, ...]
    mu: np.ndarray
    H: np.ndarray
    generator: np.ndarray
    adjoint: np.ndarray
    symmetric: np.ndarray

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        """⟨f, g⟩_μ."""
        return float(np.sum(self.mu * f * g))

    def adjoint_defect(self, f: np.ndarray, g: np.ndarray) -> float:
        """|⟨f, ℒg⟩_μ − ⟨ℒ*f, g⟩_μ|."""
        return abs(self.inner(f, self.generator @ g) - self.inner(self.adjoint @ f, g))


def _positive(chain: ChainSpec, mu: ProbabilityVector) -> np.ndarray:
    m = mu.to_array(chain.states)
    if np.any(m <= 0):
        raise NotStrictlyPositiveError("derivatives need a strictly positive base measure")
    return m


def operator_bundle(chain: ChainSpec, mu: ProbabilityVector) -> OperatorBundle:
    """
    Build ℒ_{H_μ}, ℒ*_{H_μ} and ℒ^s_{H_μ} as dense matrices.

    Raises:
        NotStrictlyPositiveError, NotIrreducibleError, NonConvergenceError
    """
    m = _positive(chain, mu)
    H = tilt_solver(chain, mu).to_array(chain.states)
    R = chain.rate_matrix * np.exp(H[None, :] - H[:, None])
    L = R - np.diag(R.sum(axis=1))
    L_star = (m[None, :] * L.T) / m[:, None]
    return OperatorBundle(
        states=tuple(chain.states),
        mu=m,
        H=H,
        generator=L,
        adjoint=L_star,
        symmetric=0.5 * (L + L_star),
    )


def _anchored_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A x = b on a one-dimensional kernel with x[0] = 0."""
    x = np.zeros(A.shape[0])
    if A.shape[0] > 1:
        x[1:] = solve(A[1:, 1:], b[1:])
    return x


def _symmetric_solve(bundle: OperatorBundle, b: np.ndarray) -> np.ndarray:
    try:
        return _anchored_solve(bundle.symmetric, b)
    except SingularSystemError as e:
        raise SingularSymmetricPartError(
            "symmetric part of the tilted generator is singular on mean-zero functions"
        ) from e


def _direction(chain: ChainSpec, nu: SignedMeasure) -> np.ndarray:
    return nu.to_array(chain.states)


# ─────────────────────────────────────────────────────────────────────
# Derivatives
# ─────────────────────────────────────────────────────────────────────


def first_derivative(chain: ChainSpec, mu: ProbabilityVector, nu: SignedMeasure) -> float:
    """(δℐ/δμ)(μ; ν) = Σ ν(x)R(x,y)[1 − e^{H_μ(y)−H_μ(x)}]."""
    _positive(chain, mu)
    H = tilt_solver(chain, mu).to_array(chain.states)
    v = _direction(chain, nu)
    src, dst, rates = chain.edge_arrays
    return float(np.sum(v[src] * rates * -np.expm1(H[dst] - H[src])))


def tilt_derivative(chain: ChainSpec, mu: ProbabilityVector, nu: SignedMeasure) -> TiltField:
    """
    d/dε H_{μ+εν} at ε = 0, anchored at the first state.

    Raises:
        SingularSymmetricPartError: ℒ^s is singular on mean-zero functions
    """
    bundle = operator_bundle(chain, mu)
    f = _direction(chain, nu) / bundle.mu
    dH = 0.5 * _symmetric_solve(bundle, bundle.adjoint @ f)
    return TiltField.from_array(chain.states, dH)


def second_derivative(
    chain: ChainSpec, mu: ProbabilityVector, nu1: SignedMeasure, nu2: SignedMeasure
) -> float:
    """½⟨f₁, ℒ(−ℒ^s)⁻¹ℒ* f₂⟩_μ with f_i = dν_i/dμ."""
    bundle = operator_bundle(chain, mu)
    f2 = _direction(chain, nu2) / bundle.mu
    g = _symmetric_solve(bundle, -(bundle.adjoint @ f2))
    return 0.5 * float(np.sum(_direction(chain, nu1) * (bundle.generator @ g)))


def _stationary(chain: ChainSpec) -> np.ndarray:
    if not is_irreducible(chain):
        raise NotIrreducibleError("the chain must be irreducible")
    return np.asarray(stationary_array(chain), dtype=float)


def asymptotic_variance(chain: ChainSpec, f: Sequence[float]) -> float:
    """
    σ²(f) = 2⟨g, (−ℒ^s)g⟩_π = Σ π(x)R(x,y)(g(y) − g(x))², where (−ℒ)g = f.

    Raises:
        NotMeanZeroError: ⟨f, 1⟩_π ≠ 0
    """
    pi = _stationary(chain)
    f = np.asarray(f, dtype=float)
    if f.shape != (chain.size,):
        raise NotMeanZeroError(f"observable needs {chain.size} values, got shape {f.shape}")
    scale = max(1.0, float(np.max(np.abs(f), initial=0.0)))
    if abs(float(pi @ f)) > NORMALIZATION_TOL * scale:
        raise NotMeanZeroError(f"observable has π-mean {float(pi @ f)!r}, expected 0")
    L = np.asarray(generator_matrix(chain), dtype=float)
    g = _anchored_solve(-L, f)
    src, dst, rates = chain.edge_arrays
    return float(np.sum(pi[src] * rates * (g[dst] - g[src]) ** 2))


# ─────────────────────────────────────────────────────────────────────
# Checks
# ─────────────────────────────────────────────────────────────────────


def quadratic_tilt_limit(chain: ChainSpec, H: TiltField) -> QuadraticTiltReport:
    """
    ε⁻²ℐ(π_{εH}) for ε = 10⁻¹…10⁻⁴, extrapolated to ε → 0.

    The target is ⟨(−ℒ^s)H, H⟩_π = ½ Σ π(x)R(x,y)(H(y) − H(x))².
    """
    pi = _stationary(chain)
    h = H.to_array(chain.states)
    src, dst, rates = chain.edge_arrays
    target = 0.5 * float(np.sum(pi[src] * rates * (h[dst] - h[src]) ** 2))
    values: List[float] = []
    for eps in QUADRATIC_EPSILONS:
        tilt = TiltField.from_array(chain.states, eps * h)
        mu = tilt_inverse(chain, tilt)
        values.append(dv_rate_variational(chain, mu, warm_start=tilt) / eps**2)
    extrapolated = neville_extrapolate(QUADRATIC_EPSILONS, values, power=1)
    error = abs(extrapolated - target) / max(abs(target), 1e-300) if target else abs(extrapolated)
    logger.debug(
        "Quadratic tilt limit", extra={"target": target, "extrapolated": extrapolated}
    )
    return QuadraticTiltReport(
        epsilons=list(QUADRATIC_EPSILONS),
        values=values,
        extrapolated=extrapolated,
        target=target,
        relative_error=error,
    )


def legendre_dual(chain: ChainSpec, nu: SignedMeasure) -> float:
    """
    sup_h {2⟨f, h⟩_π − σ²(h)} over π-mean-zero h, with f = dν/dπ.

    With h = P c for an orthonormal basis P of mean-zero functions and
    g = G c the anchored Poisson solution, σ²(h) = cᵀ Q c where
    Q = 2 Gᵀ K G and K = diag(π)(−ℒ^s). The supremum is bᵀ Q⁻¹ b, b = Pᵀν.
    """
    pi = _stationary(chain)
    v = _direction(chain, nu)
    if chain.size == 1:
        return 0.0
    L = np.asarray(generator_matrix(chain), dtype=float)
    L_star = (pi[None, :] * L.T) / pi[:, None]
    K = pi[:, None] * (-0.5 * (L + L_star))
    K = 0.5 * (K + K.T)
    P = null_space(pi[None, :])
    G = np.column_stack([_anchored_solve(-L, P[:, k]) for k in range(P.shape[1])])
    Q = 2.0 * G.T @ K @ G
    b = P.T @ v
    return float(b @ solve(Q, b))


def legendre_check(chain: ChainSpec, nu: SignedMeasure) -> LegendreReport:
    """Compare the second derivative at π in direction ν with the Legendre dual value."""
    pi = _stationary(chain)
    base = ProbabilityVector.from_array(chain.states, pi, normalize=True)
    second = second_derivative(chain, base, nu, nu)
    dual = legendre_dual(chain, nu)
    error = abs(second - dual) / max(abs(second), abs(dual), 1e-300) if (second or dual) else 0.0
    return LegendreReport(
        second_derivative=second,
        dual_value=dual,
        relative_error=error,
        agrees=error <= DUALITY_TOL or abs(second - dual) <= 1e-12,
    )


def _shifted(chain: ChainSpec, m: np.ndarray, v: np.ndarray, eps: float) -> ProbabilityVector:
    shifted = m + eps * v
    if np.any(shifted <= 0):
        raise NotStrictlyPositiveError(f"finite-difference step {eps:g} leaves the simplex interior")
    return ProbabilityVector.from_array(chain.states, shifted, normalize=True)


def finite_difference_report(
    chain: ChainSpec, mu: ProbabilityVector, nu: SignedMeasure
) -> FiniteDifferenceReport:
    """
    Closed-form first and second derivatives against central differences of ℐ.

    Steps are scaled by 1/‖ν‖∞ and Richardson-extrapolated in ε².
    Relative errors are |closed − FD| / (1 + |closed|).
    """
    m = _positive(chain, mu)
    v = _direction(chain, nu)
    norm = float(np.max(np.abs(v), initial=0.0))
    first = first_derivative(chain, mu, nu)
    second = second_derivative(chain, mu, nu, nu)
    if norm == 0:
        return FiniteDifferenceReport(
            first_derivative=first,
            first_derivative_fd=0.0,
            second_derivative=second,
            second_derivative_fd=0.0,
            steps=[],
            first_errors=[],
            first_relative_error=abs(first),
            second_relative_error=abs(second),
        )
    H = tilt_solver(chain, mu)

    def rate(eps: float) -> float:
        return dv_rate_variational(chain, _shifted(chain, m, v, eps), warm_start=H)

    centre = dv_rate_variational(chain, mu, warm_start=H)
    steps = [s / norm for s in FIRST_FD_STEPS]
    firsts = [(rate(h) - rate(-h)) / (2 * h) for h in steps]
    seconds_steps = [s / norm for s in SECOND_FD_STEPS]
    seconds = [(rate(h) - 2 * centre + rate(-h)) / h**2 for h in seconds_steps]
    first_fd = neville_extrapolate(steps, firsts, power=2)
    second_fd = neville_extrapolate(seconds_steps, seconds, power=2)
    return FiniteDifferenceReport(
        first_derivative=first,
        first_derivative_fd=first_fd,
        second_derivative=second,
        second_derivative_fd=second_fd,
        steps=steps,
        first_errors=[abs(first - d) for d in firsts],
        first_relative_error=abs(first - first_fd) / (1 + abs(first)),
        second_relative_error=abs(second - second_fd) / (1 + abs(second)),
    )

