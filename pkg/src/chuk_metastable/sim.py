# -*- coding: utf-8 -*-
# chuk_metastable/sim.py
"""
Exact simulation of a chain and its empirical pair.

Paths are drawn with competing exponentials: hold for Exp(λ(x)), then
jump to y with probability R(x,y)/λ(x). Random streams are Philox
generators seeded through ``numpy.random.SeedSequence``; replica ``i`` of
a run uses the ``i``-th spawned child of the master seed, so results do
not depend on scheduling.
"""

from __future__ import annotations

import asyncio
import logging
import math
from typing import List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .chain_core import stationary_distribution
from .exceptions import AbsorbingStateError, ChainValidationError
from .grid import sweep
from .models import ChainSpec, Flow, ProbabilityVector, Trajectory
from .types import DEFAULT_SEED, VarianceEstimate

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]
Observable = Union[Sequence[float], Mapping[str, float]]


def make_generator(seed: SeedLike = DEFAULT_SEED) -> np.random.Generator:
    """A Philox generator; an existing Generator is returned unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    sequence = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(sequence))


def replica_generators(seed: int, replicas: int) -> List[np.random.Generator]:
    return [make_generator(child) for child in np.random.SeedSequence(seed).spawn(replicas)]


def _observable(chain: ChainSpec, f: Observable) -> np.ndarray:
    if isinstance(f, Mapping):
        unknown = [s for s in f if s not in chain.index]
        if unknown:
            raise ChainValidationError(f"observable names undeclared states {unknown}")
        return np.array([float(f.get(s, 0.0)) for s in chain.states])
    values = np.asarray(f, dtype=float)
    if values.shape != (chain.size,):
        raise ChainValidationError(f"observable needs {chain.size} values, got shape {values.shape}")
    return values


# ─────────────────────────────────────────────────────────────────────
# Paths
# ─────────────────────────────────────────────────────────────────────


def sample_path(
    chain: ChainSpec, x0: str, T: float, seed: SeedLike = DEFAULT_SEED
) -> Trajectory:
    """
    One path on [0, T] started at ``x0``.

    Raises:
        ChainValidationError: T ≤ 0 or unknown start state
        AbsorbingStateError: the path reaches a state with λ = 0 before T
    """
    if not T > 0 or not math.isfinite(T):
        raise ChainValidationError(f"horizon must be positive and finite, got {T}")
    if x0 not in chain.index:
        raise ChainValidationError(f"start state {x0!r} is not declared")

    rng = make_generator(seed)
    R = chain.rate_matrix
    lam = R.sum(axis=1)
    cumulative = np.cumsum(R, axis=1)

    x = chain.index[x0]
    t = 0.0
    jumps: List[Tuple[float, str]] = []
    while True:
        if lam[x] <= 0:
            raise AbsorbingStateError(
                f"state {chain.states[x]!r} has no outgoing rate (reached at t={t})"
            )
        t += rng.exponential(1.0 / lam[x])
        if t > T:
            break
        y = int(np.searchsorted(cumulative[x], rng.uniform() * cumulative[x, -1], side="right"))
        jumps.append((t, chain.states[y]))
        x = y
    return Trajectory(states=list(chain.states), initial=x0, jumps=jumps, horizon=T)


def _holding_segments(traj: Trajectory) -> List[Tuple[str, float]]:
    segments = []
    state, start = traj.initial, 0.0
    for time, target in traj.jumps:
        segments.append((state, time - start))
        state, start = target, time
    segments.append((state, traj.horizon - start))
    return segments


def empirical_pair(traj: Trajectory) -> Tuple[ProbabilityVector, Flow]:
    """L_T(x) = time fraction in x; Q_T(x,y) = number of x → y jumps / T."""
    index = {s: i for i, s in enumerate(traj.states)}
    occupation = np.zeros(len(traj.states))
    for state, duration in _holding_segments(traj):
        occupation[index[state]] += duration
    L = ProbabilityVector.from_array(traj.states, occupation, normalize=True)

    counts: dict = {}
    previous = traj.initial
    for _, target in traj.jumps:
        counts[(previous, target)] = counts.get((previous, target), 0) + 1
        previous = target
    Q = Flow(values={key: count / traj.horizon for key, count in counts.items()})
    return L, Q


def occupation_integral(traj: Trajectory, f: Observable) -> float:
    """∫₀ᵀ f(X_s) ds."""
    if isinstance(f, Mapping):
        lookup = {s: float(f.get(s, 0.0)) for s in traj.states}
    else:
        values = np.asarray(f, dtype=float)
        if values.shape != (len(traj.states),):
            raise ChainValidationError(
                f"observable needs {len(traj.states)} values, got shape {values.shape}"
            )
        lookup = dict(zip(traj.states, values.tolist()))
    return float(math.fsum(lookup[state] * duration for state, duration in _holding_segments(traj)))


# ─────────────────────────────────────────────────────────────────────
# Variance
# ─────────────────────────────────────────────────────────────────────


def _replica_value(
    chain: ChainSpec,
    f: np.ndarray,
    T: float,
    rng: np.random.Generator,
    pi: np.ndarray,
    start: Optional[str],
) -> float:
    x0 = start if start is not None else chain.states[int(rng.choice(chain.size, p=pi))]
    traj = sample_path(chain, x0, T, rng)
    return occupation_integral(traj, f) / math.sqrt(T)


def variance_from_samples(values: Sequence[float], T: float) -> VarianceEstimate:
    """Sample variance of per-replica values T^{−1/2}∫f with its standard error."""
    arr = np.asarray(values, dtype=float)
    estimate = float(np.var(arr, ddof=1))
    se = estimate * math.sqrt(2.0 / (arr.size - 1))
    logger.info(
        "Variance estimate",
        extra={"estimate": estimate, "standard_error": se, "replicas": arr.size, "horizon": T},
    )
    return VarianceEstimate(estimate=estimate, standard_error=se, replicas=int(arr.size), horizon=T)


def _prepare(
    chain: ChainSpec, f: Observable, T: float, replicas: int
) -> Tuple[np.ndarray, np.ndarray]:
    if replicas < 2:
        raise ChainValidationError(f"a variance estimate needs at least 2 replicas, got {replicas}")
    if not T > 0:
        raise ChainValidationError(f"horizon must be positive, got {T}")
    values = _observable(chain, f)
    pi = stationary_distribution(chain, cross_check=False).to_array(chain.states)
    return values, pi


def variance_estimate(
    chain: ChainSpec,
    f: Observable,
    T: float,
    replicas: int,
    seed: int = DEFAULT_SEED,
    start: Optional[str] = None,
) -> VarianceEstimate:
    """
    Replica variance of T^{−1/2}∫₀ᵀ f(X_s)ds.

    Replicas start from π unless ``start`` is given. The standard error
    is the Gaussian one for a sample variance, s²·√(2/(R−1)).
    """
    values, pi = _prepare(chain, f, T, replicas)
    samples = [
        _replica_value(chain, values, T, rng, pi, start)
        for rng in replica_generators(seed, replicas)
    ]
    return variance_from_samples(samples, T)


async def variance_estimate_async(
    chain: ChainSpec,
    f: Observable,
    T: float,
    replicas: int,
    seed: int = DEFAULT_SEED,
    start: Optional[str] = None,
) -> VarianceEstimate:
    """``variance_estimate`` with replicas on worker threads; same result for the same seed."""
    values, pi = _prepare(chain, f, T, replicas)
    generators = replica_generators(seed, replicas)

    def run(index: float) -> float:
        return _replica_value(chain, values, T, generators[int(index)], pi, start)

    samples = await sweep(run, [float(i) for i in range(replicas)])
    return variance_from_samples(samples, T)


def run_variance_estimate(*args, **kwargs) -> VarianceEstimate:
    """Synchronous entry point that drives ``variance_estimate_async``."""
    return asyncio.run(variance_estimate_async(*args, **kwargs))


def simulate_replicas(
    chain: ChainSpec,
    T: float,
    replicas: int,
    seed: int = DEFAULT_SEED,
    start: Optional[str] = None,
) -> List[Trajectory]:
    """Independent paths, one per spawned seed; each starts at ``start`` or at a π-draw."""
    if replicas < 1:
        raise ChainValidationError(f"need at least one replica, got {replicas}")
    pi = None
    if start is None:
        pi = stationary_distribution(chain, cross_check=False).to_array(chain.states)
    paths = []
    for rng in replica_generators(seed, replicas):
        x0 = start if start is not None else chain.states[int(rng.choice(chain.size, p=pi))]
        paths.append(sample_path(chain, x0, T, rng))
    return paths
