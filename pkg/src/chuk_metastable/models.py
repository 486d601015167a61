# -*- coding: utf-8 -*-
# chuk_metastable/models.py
"""
Domain models: chains, parametrized families, measures, flows and the
metastable tree.

All models are immutable pydantic models. Array views (``rate_matrix``,
``to_array``) are derived on demand and cached where the model is frozen.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import cached_property
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_serializer,
    field_validator,
    model_validator,
)

from .exceptions import ChainValidationError
from .types import (
    DEFAULT_GRID_BASE,
    DEFAULT_GRID_END,
    DEFAULT_GRID_START,
    DEFAULT_PRECISION_BITS,
    DEFAULT_SEED,
    MIN_GRID_POINTS,
    NORMALIZATION_TOL,
    EdgeKey,
    ProbeCandidate,
    RecoveryMode,
    Subcommand,
)


def _check_states(states: List[str]) -> List[str]:
    if not states:
        raise ValueError("a chain needs at least one state")
    if len(set(states)) != len(states):
        raise ValueError(f"duplicate state identifiers in {states!r}")
    return states


def _check_edge_keys(states: Sequence[str], keys: Iterable[EdgeKey]) -> None:
    declared = set(states)
    seen: set = set()
    for source, target in keys:
        if source == target:
            raise ValueError(f"self-loop edge ({source!r}, {target!r}) is not allowed")
        if source not in declared or target not in declared:
            raise ValueError(f"edge ({source!r}, {target!r}) uses an undeclared state")
        if (source, target) in seen:
            raise ValueError(f"duplicate edge ({source!r}, {target!r})")
        seen.add((source, target))


# ─────────────────────────────────────────────────────────────────────
# Chains
# ─────────────────────────────────────────────────────────────────────


class Edge(BaseModel):
    """A directed edge of a fixed chain with its jump rate (units 1/time)."""

    source: str = Field(..., alias="from")
    target: str = Field(..., alias="to")
    rate: float = Field(..., gt=0, description="Jump rate R(source, target)")

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    @field_validator("rate")
    @classmethod
    def validate_rate(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("rate must be finite")
        return v


class ChainSpec(BaseModel):
    """
    A fixed finite continuous-time Markov chain.

    Absent edges are absent: a rate is never stored as zero.
    """

    states: List[str]
    edges: List[Edge] = Field(default_factory=list)

    model_config = ConfigDict(frozen=True)

    @field_validator("states")
    @classmethod
    def validate_states(cls, v: List[str]) -> List[str]:
        return _check_states(v)

    @model_validator(mode="after")
    def validate_edges(self) -> "ChainSpec":
        _check_edge_keys(self.states, ((e.source, e.target) for e in self.edges))
        return self

    @classmethod
    def from_rates(
        cls, states: Sequence[str], rates: Mapping[EdgeKey, float]
    ) -> "ChainSpec":
        """Build a chain from ``{(x, y): rate}``; zero rates are skipped."""
        edges = [
            Edge(source=x, target=y, rate=float(r))
            for (x, y), r in rates.items()
            if r != 0
        ]
        return cls(states=list(states), edges=edges)

    @classmethod
    def from_matrix(cls, states: Sequence[str], matrix: np.ndarray) -> "ChainSpec":
        """Build a chain from a rate matrix; diagonal and zero entries are ignored."""
        matrix = np.asarray(matrix, dtype=float)
        edges = [
            Edge(source=states[i], target=states[j], rate=float(matrix[i, j]))
            for i in range(len(states))
            for j in range(len(states))
            if i != j and matrix[i, j] > 0
        ]
        return cls(states=list(states), edges=edges)

    @property
    def size(self) -> int:
        return len(self.states)

    @cached_property
    def index(self) -> Dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}

    @cached_property
    def edge_keys(self) -> List[EdgeKey]:
        return [(e.source, e.target) for e in self.edges]

    @cached_property
    def edge_index(self) -> Dict[EdgeKey, int]:
        return {k: i for i, k in enumerate(self.edge_keys)}

    @cached_property
    def edge_arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(source indices, target indices, rates) in declared edge order."""
        src = np.array([self.index[e.source] for e in self.edges], dtype=int)
        dst = np.array([self.index[e.target] for e in self.edges], dtype=int)
        rates = np.array([e.rate for e in self.edges], dtype=float)
        for arr in (src, dst, rates):
            arr.setflags(write=False)
        return src, dst, rates

    @cached_property
    def rate_matrix(self) -> np.ndarray:
        """Dense N×N rate matrix with zero diagonal (read-only)."""
        matrix = np.zeros((self.size, self.size))
        src, dst, rates = self.edge_arrays
        matrix[src, dst] = rates
        matrix.setflags(write=False)
        return matrix

    def rate(self, source: str, target: str) -> float:
        """R(source, target), zero when the edge is absent."""
        return float(self.rate_matrix[self.index[source], self.index[target]])


class ParamEdge(BaseModel):
    """A directed edge of a family: R_n = coeff · n^(−exponent)."""

    source: str = Field(..., alias="from")
    target: str = Field(..., alias="to")
    coeff: float = Field(..., gt=0)
    exponent: Fraction = Field(default=Fraction(0))

    model_config = ConfigDict(
        frozen=True, populate_by_name=True, arbitrary_types_allowed=True
    )

    @field_validator("coeff")
    @classmethod
    def validate_coeff(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("coeff must be finite")
        return v

    @field_validator("exponent", mode="before")
    @classmethod
    def parse_exponent(cls, v: Any) -> Fraction:
        if isinstance(v, bool):
            raise ValueError("exponent must be a rational number")
        if isinstance(v, Fraction):
            value = v
        elif isinstance(v, int):
            value = Fraction(v)
        elif isinstance(v, float):
            if not math.isfinite(v):
                raise ValueError("exponent must be finite")
            value = Fraction(repr(v))
        elif isinstance(v, str):
            try:
                value = Fraction(v.strip())
            except (ValueError, ZeroDivisionError) as e:
                raise ValueError(f"cannot parse exponent {v!r}") from e
        else:
            raise ValueError(f"unsupported exponent {v!r}")
        if value < 0:
            raise ValueError(f"exponent must be nonnegative, got {value}")
        return value

    @field_serializer("exponent")
    def serialize_exponent(self, v: Fraction) -> Any:
        return v.numerator if v.denominator == 1 else f"{v.numerator}/{v.denominator}"

    def rate_at(self, n: float) -> float:
        if self.exponent == 0:
            return self.coeff
        return self.coeff * float(n) ** (-float(self.exponent))


class ParamChainSpec(BaseModel):
    """A scale-parametrized family R_n(x,y) = c(x,y)·n^(−k(x,y)) with a fixed edge set."""

    states: List[str]
    edges: List[ParamEdge] = Field(default_factory=list)

    model_config = ConfigDict(frozen=True)

    @field_validator("states")
    @classmethod
    def validate_states(cls, v: List[str]) -> List[str]:
        return _check_states(v)

    @model_validator(mode="after")
    def validate_edges(self) -> "ParamChainSpec":
        _check_edge_keys(self.states, ((e.source, e.target) for e in self.edges))
        return self

    @cached_property
    def index(self) -> Dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}

    @cached_property
    def edge_keys(self) -> List[EdgeKey]:
        return [(e.source, e.target) for e in self.edges]


# ─────────────────────────────────────────────────────────────────────
# Measures and flows
# ─────────────────────────────────────────────────────────────────────


class ProbabilityVector(BaseModel):
    """A probability measure on the state set; omitted states carry no mass."""

    weights: Dict[str, float]

    model_config = ConfigDict(frozen=True)

    @field_validator("weights")
    @classmethod
    def validate_weights(cls, v: Dict[str, float]) -> Dict[str, float]:
        total = 0.0
        for state, w in v.items():
            if not math.isfinite(w) or w < 0:
                raise ValueError(f"weight of {state!r} must be finite and nonnegative, got {w}")
            total += w
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"weights sum to {total!r}, expected 1")
        return v

    @classmethod
    def from_array(
        cls, states: Sequence[str], values: Sequence[float], normalize: bool = False
    ) -> "ProbabilityVector":
        arr = np.asarray(values, dtype=float)
        if arr.shape != (len(states),):
            raise ChainValidationError(
                f"expected {len(states)} weights, got shape {arr.shape}"
            )
        scale = float(np.max(np.abs(arr))) if arr.size else 0.0
        # rounding debris from solves
        arr = np.where((arr < 0) & (arr > -1e-14 * max(scale, 1.0)), 0.0, arr)
        if normalize:
            total = float(arr.sum())
            if total <= 0:
                raise ChainValidationError("cannot normalize a vector with no mass")
            arr = arr / total
        return cls(weights={s: float(w) for s, w in zip(states, arr)})

    @classmethod
    def dirac(cls, state: str) -> "ProbabilityVector":
        return cls(weights={state: 1.0})

    @classmethod
    def uniform(cls, states: Sequence[str]) -> "ProbabilityVector":
        return cls.from_array(states, np.full(len(states), 1.0 / len(states)), normalize=True)

    @property
    def support(self) -> List[str]:
        return [s for s, w in self.weights.items() if w > 0]

    def to_array(self, states: Sequence[str]) -> np.ndarray:
        index = {s: i for i, s in enumerate(states)}
        arr = np.zeros(len(states))
        for state, w in self.weights.items():
            if state not in index:
                if w > 0:
                    raise ChainValidationError(f"measure charges unknown state {state!r}")
                continue
            arr[index[state]] = w
        return arr

    def mass(self, subset: Iterable[str]) -> float:
        return float(sum(self.weights.get(s, 0.0) for s in subset))


class Flow(BaseModel):
    """A nonnegative function on directed edges; omitted edges carry zero."""

    values: Dict[Tuple[str, str], float] = Field(default_factory=dict)

    model_config = ConfigDict(frozen=True)

    @field_validator("values")
    @classmethod
    def validate_values(cls, v: Dict[Tuple[str, str], float]) -> Dict[Tuple[str, str], float]:
        for (source, target), value in v.items():
            if source == target:
                raise ValueError(f"flow on self-loop ({source!r}, {target!r})")
            if not math.isfinite(value) or value < 0:
                raise ValueError(
                    f"flow on ({source!r}, {target!r}) must be finite and nonnegative, got {value}"
                )
        return v

    @classmethod
    def zero(cls) -> "Flow":
        return cls(values={})

    @classmethod
    def from_array(
        cls, edges: Sequence[EdgeKey], values: Sequence[float], drop_zeros: bool = True
    ) -> "Flow":
        arr = np.asarray(values, dtype=float)
        if arr.shape != (len(edges),):
            raise ChainValidationError(f"expected {len(edges)} flow values, got {arr.shape}")
        scale = float(np.max(np.abs(arr))) if arr.size else 0.0
        arr = np.where((arr < 0) & (arr > -1e-14 * max(scale, 1.0)), 0.0, arr)
        return cls(
            values={
                tuple(k): float(v) for k, v in zip(edges, arr) if not (drop_zeros and v == 0)
            }
        )

    @classmethod
    def from_records(cls, records: Iterable[Mapping[str, Any]]) -> "Flow":
        values: Dict[Tuple[str, str], float] = {}
        for rec in records:
            key = (str(rec["from"]), str(rec["to"]))
            if key in values:
                raise ChainValidationError(f"duplicate flow record for {key}")
            values[key] = float(rec["value"])
        return cls(values=values)

    def to_records(self) -> List[Dict[str, Any]]:
        return [{"from": s, "to": t, "value": v} for (s, t), v in self.values.items()]

    @property
    def support(self) -> List[EdgeKey]:
        return [k for k, v in self.values.items() if v > 0]

    def to_array(self, edges: Sequence[EdgeKey], strict: bool = True) -> np.ndarray:
        """Values aligned with ``edges``; positive mass elsewhere raises when strict."""
        index = {tuple(k): i for i, k in enumerate(edges)}
        arr = np.zeros(len(edges))
        for key, value in self.values.items():
            i = index.get(key)
            if i is None:
                if strict and value > 0:
                    raise ChainValidationError(f"flow charges edge {key} outside the edge set")
                continue
            arr[i] = value
        return arr

    def outside_mass(self, edges: Iterable[EdgeKey]) -> float:
        known = {tuple(k) for k in edges}
        return float(sum(v for k, v in self.values.items() if k not in known))

    def scaled(self, factor: float) -> "Flow":
        return Flow(values={k: v * factor for k, v in self.values.items()})

    def __add__(self, other: "Flow") -> "Flow":
        merged = dict(self.values)
        for k, v in other.values.items():
            merged[k] = merged.get(k, 0.0) + v
        return Flow(values=merged)


class Cycle(BaseModel):
    """A closed path of distinct directed edges carrying a positive amplitude."""

    edges: List[Tuple[str, str]]
    amplitude: float = Field(..., gt=0)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_cycle(self) -> "Cycle":
        if not self.edges:
            raise ValueError("a cycle needs at least one edge")
        if len(set(self.edges)) != len(self.edges):
            raise ValueError("cycle edges must be distinct")
        for (a, b), (c, _) in zip(self.edges, self.edges[1:] + self.edges[:1]):
            if b != c:
                raise ValueError(f"cycle is not closed at ({a!r}, {b!r})")
        return self

    @property
    def states(self) -> List[str]:
        return [e[0] for e in self.edges]


class ClassDecomposition(BaseModel):
    """Closed irreducible classes and the transient remainder Δ."""

    closed_classes: List[List[str]]
    transient: List[str] = Field(default_factory=list)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_partition(self) -> "ClassDecomposition":
        seen: set = set()
        for block in [*self.closed_classes, self.transient]:
            overlap = seen.intersection(block)
            if overlap:
                raise ValueError(f"states {sorted(overlap)} appear in more than one block")
            seen.update(block)
        return self

    @property
    def count(self) -> int:
        return len(self.closed_classes)


class TiltField(BaseModel):
    """A potential H on the states, anchored so that H(x₀) = 0."""

    values: Dict[str, float]

    model_config = ConfigDict(frozen=True)

    @classmethod
    def from_array(
        cls, states: Sequence[str], values: Sequence[float], anchor: bool = True
    ) -> "TiltField":
        arr = np.asarray(values, dtype=float)
        if anchor and arr.size:
            arr = arr - arr[0]
        return cls(values={s: float(v) for s, v in zip(states, arr)})

    @classmethod
    def zero(cls, states: Sequence[str]) -> "TiltField":
        return cls(values={s: 0.0 for s in states})

    def to_array(self, states: Sequence[str]) -> np.ndarray:
        missing = [s for s in states if s not in self.values]
        if missing:
            raise ChainValidationError(f"tilt field missing states {missing}")
        return np.array([self.values[s] for s in states], dtype=float)


class SignedMeasure(BaseModel):
    """A mass-zero signed measure ν, used as a direction on the simplex."""

    weights: Dict[str, float]

    model_config = ConfigDict(frozen=True)

    @field_validator("weights")
    @classmethod
    def validate_weights(cls, v: Dict[str, float]) -> Dict[str, float]:
        if any(not math.isfinite(w) for w in v.values()):
            raise ValueError("signed measure weights must be finite")
        scale = max([1.0, *[abs(w) for w in v.values()]])
        total = sum(v.values())
        if abs(total) > NORMALIZATION_TOL * scale:
            raise ValueError(f"signed measure must have zero total mass, got {total!r}")
        return v

    @classmethod
    def from_array(cls, states: Sequence[str], values: Sequence[float]) -> "SignedMeasure":
        return cls(weights={s: float(w) for s, w in zip(states, values)})

    def to_array(self, states: Sequence[str]) -> np.ndarray:
        index = {s: i for i, s in enumerate(states)}
        arr = np.zeros(len(states))
        for state, w in self.weights.items():
            if state not in index:
                if w != 0:
                    raise ChainValidationError(f"direction charges unknown state {state!r}")
                continue
            arr[index[state]] = w
        return arr


# ─────────────────────────────────────────────────────────────────────
# Hierarchy
# ─────────────────────────────────────────────────────────────────────


class AsymptoticScale(BaseModel):
    """A fitted monomial θ_n ≈ coefficient · n^exponent with its raw samples."""

    coefficient: float = Field(..., gt=0)
    exponent: float
    fit_quality: float = Field(..., ge=0, description="Max |residual| of the log-log fit")
    samples: List[Tuple[float, float]] = Field(default_factory=list)

    model_config = ConfigDict(frozen=True)

    def value_at(self, n: float) -> float:
        """Sampled value at n when available, the fitted monomial otherwise."""
        for m, v in self.samples:
            if m == n:
                return v
        return self.coefficient * float(n) ** self.exponent


class HierarchyLevel(BaseModel):
    """
    One generation of the metastable tree.

    ``timescale`` and ``reduced_chain`` are absent on the terminal level.
    """

    index: int = Field(..., ge=1)
    wells: List[List[str]]
    transient: List[str] = Field(default_factory=list)
    labels: List[str]
    timescale: Optional[AsymptoticScale] = None
    reduced_chain: Optional[ChainSpec] = None
    recurrent_classes: List[List[int]] = Field(default_factory=list)
    level_measures: List[ProbabilityVector]

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_level(self) -> "HierarchyLevel":
        if len(self.labels) != len(self.wells) or len(self.level_measures) != len(self.wells):
            raise ValueError("labels, wells and level measures must align")
        for well, measure in zip(self.wells, self.level_measures):
            if set(measure.support) != set(well):
                raise ValueError(f"level measure support differs from well {well}")
        if self.reduced_chain is not None:
            if self.reduced_chain.states != self.labels:
                raise ValueError("reduced chain must live on the well labels")
            if not self.reduced_chain.edges:
                raise ValueError("reduced chain needs at least one positive rate")
        return self

    @property
    def well_count(self) -> int:
        return len(self.wells)


class MetastableTree(BaseModel):
    """Levels 1 … 𝔮+1 of the hierarchy; the last level is terminal."""

    states: List[str]
    levels: List[HierarchyLevel]
    terminal: bool = True

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_tree(self) -> "MetastableTree":
        everything = set(self.states)
        for level in self.levels:
            covered = [s for well in level.wells for s in well] + list(level.transient)
            if len(covered) != len(set(covered)) or set(covered) != everything:
                raise ValueError(f"level {level.index} does not partition the states")
        return self

    @property
    def depth(self) -> int:
        """𝔮: number of nontrivial time-scales."""
        return sum(1 for level in self.levels if level.timescale is not None)

    def level(self, p: int) -> HierarchyLevel:
        if not 1 <= p <= len(self.levels):
            raise ChainValidationError(f"level {p} outside 1..{len(self.levels)}")
        return self.levels[p - 1]


class WellMixture(BaseModel):
    """Weights ω on the wells of level p."""

    level: int = Field(..., ge=1)
    weights: List[float]

    model_config = ConfigDict(frozen=True)

    @field_validator("weights")
    @classmethod
    def validate_weights(cls, v: List[float]) -> List[float]:
        if any(not math.isfinite(w) or w < 0 for w in v):
            raise ValueError("mixture weights must be finite and nonnegative")
        if abs(sum(v) - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"mixture weights sum to {sum(v)!r}, expected 1")
        return v


# ─────────────────────────────────────────────────────────────────────
# Simulation and run configuration
# ─────────────────────────────────────────────────────────────────────


class Trajectory(BaseModel):
    """A right-continuous path on [0, horizon] given by its jumps."""

    states: List[str]
    initial: str
    jumps: List[Tuple[float, str]] = Field(default_factory=list)
    horizon: float = Field(..., gt=0)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_path(self) -> "Trajectory":
        known = set(self.states)
        if self.initial not in known:
            raise ValueError(f"initial state {self.initial!r} is not declared")
        previous_time, previous_state = 0.0, self.initial
        for time, state in self.jumps:
            if state not in known:
                raise ValueError(f"jump to undeclared state {state!r}")
            if not previous_time < time <= self.horizon:
                raise ValueError("jump times must be strictly increasing within the horizon")
            if state == previous_state:
                raise ValueError(f"jump at t={time} does not change state")
            previous_time, previous_state = time, state
        return self


class RunConfig(BaseModel):
    """Validated configuration of one CLI invocation."""

    subcommand: Subcommand
    chain: Optional[str] = Field(None, description="Chain file path or bundled example name")
    measure: Optional[List[float]] = None
    measure_path: Optional[str] = None
    flow_path: Optional[str] = None
    directions: List[List[float]] = Field(default_factory=list)
    direction_paths: List[str] = Field(default_factory=list)
    grid_start: int = DEFAULT_GRID_START
    grid_end: int = DEFAULT_GRID_END
    grid_base: float = DEFAULT_GRID_BASE
    precision_bits: int = Field(DEFAULT_PRECISION_BITS, ge=24)
    tolerances: Dict[str, float] = Field(default_factory=dict)
    seed: int = DEFAULT_SEED
    output: Optional[str] = None
    json_output: bool = False
    level: int = Field(1, ge=0)
    omega: Optional[List[float]] = None
    candidate: ProbeCandidate = ProbeCandidate.HARMONIC
    mode: RecoveryMode = RecoveryMode.DV
    oracle_dir: Optional[str] = None
    horizon: float = Field(1e4, gt=0)
    replicas: int = Field(1, ge=1)
    start: Optional[str] = None
    observable: Optional[List[float]] = None
    n: Optional[float] = Field(None, ge=1, description="Scale parameter for family inputs")
    csv_path: Optional[str] = None
    record_dir: Optional[str] = None
    recovered_path: Optional[str] = None
    diagnostics: bool = False
    samples: int = Field(20, ge=1)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_config(self) -> "RunConfig":
        if self.grid_end - self.grid_start + 1 < MIN_GRID_POINTS:
            raise ValueError(f"n-grid needs at least {MIN_GRID_POINTS} points")
        if self.grid_base <= 1:
            raise ValueError("n-grid base must exceed 1")
        for name, value in self.tolerances.items():
            if not value > 0:
                raise ValueError(f"tolerance {name!r} must be positive, got {value}")
        return self
