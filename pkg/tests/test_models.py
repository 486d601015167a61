# -*- coding: utf-8 -*-
# tests/test_models.py
"""
Tests for chuk_metastable.models: validation of chains, families, measures,
flows and the run configuration.
"""

from fractions import Fraction

import numpy as np
import pytest
from pydantic import ValidationError

from chuk_metastable.exceptions import ChainValidationError
from chuk_metastable.models import (
    ChainSpec,
    ClassDecomposition,
    Cycle,
    Edge,
    Flow,
    ParamChainSpec,
    ParamEdge,
    ProbabilityVector,
    RunConfig,
    SignedMeasure,
    TiltField,
    Trajectory,
    WellMixture,
)
from chuk_metastable.types import Subcommand


class TestChainSpec:
    """Test fixed chains."""

    def test_from_rates_skips_zeros(self):
        """Zero rates are absent edges."""
        chain = ChainSpec.from_rates(["a", "b"], {("a", "b"): 2.0, ("b", "a"): 0.0})
        assert chain.edge_keys == [("a", "b")]
        assert chain.rate("a", "b") == 2.0
        assert chain.rate("b", "a") == 0.0

    def test_rate_matrix(self, c3):
        """Rate matrix has zero diagonal and is read-only."""
        R = c3.rate_matrix
        assert R.shape == (3, 3)
        assert np.all(np.diag(R) == 0)
        assert R[c3.index["a"], c3.index["b"]] == 1.0
        with pytest.raises(ValueError):
            R[0, 0] = 1.0

    def test_from_matrix(self):
        """Diagonal entries are ignored."""
        chain = ChainSpec.from_matrix(["x", "y"], np.array([[5.0, 1.0], [2.0, 5.0]]))
        assert sorted(chain.edge_keys) == [("x", "y"), ("y", "x")]

    @pytest.mark.parametrize("rate", [0.0, -1.0, float("inf"), float("nan")])
    def test_invalid_rates(self, rate):
        """Rates must be positive and finite."""
        with pytest.raises(ValidationError):
            Edge(source="a", target="b", rate=rate)

    def test_self_loop_rejected(self):
        with pytest.raises(ValidationError) as exc_info:
            ChainSpec(states=["a"], edges=[Edge(source="a", target="a", rate=1.0)])
        assert "self-loop" in str(exc_info.value)

    def test_undeclared_state_rejected(self):
        with pytest.raises(ValidationError) as exc_info:
            ChainSpec(states=["a"], edges=[Edge(source="a", target="z", rate=1.0)])
        assert "undeclared" in str(exc_info.value)

    def test_duplicate_edge_rejected(self):
        edge = Edge(source="a", target="b", rate=1.0)
        with pytest.raises(ValidationError):
            ChainSpec(states=["a", "b"], edges=[edge, edge])

    def test_duplicate_states_rejected(self):
        with pytest.raises(ValidationError):
            ChainSpec(states=["a", "a"])

    def test_empty_states_rejected(self):
        with pytest.raises(ValidationError):
            ChainSpec(states=[])

    def test_edge_aliases(self):
        """Edges accept the file spelling from/to."""
        edge = Edge.model_validate({"from": "a", "to": "b", "rate": 1.5})
        assert edge.source == "a" and edge.target == "b"


class TestParamChainSpec:
    """Test scale-parametrized families."""

    @pytest.mark.parametrize(
        "raw,expected",
        [(0, Fraction(0)), (2, Fraction(2)), ("3/2", Fraction(3, 2)), (0.5, Fraction(1, 2))],
    )
    def test_exponent_parsing(self, raw, expected):
        edge = ParamEdge(source="a", target="b", coeff=1.0, exponent=raw)
        assert edge.exponent == expected

    @pytest.mark.parametrize("raw", [-1, "abc", True, float("inf")])
    def test_bad_exponents(self, raw):
        with pytest.raises(ValidationError):
            ParamEdge(source="a", target="b", coeff=1.0, exponent=raw)

    def test_rate_at(self):
        edge = ParamEdge(source="a", target="b", coeff=3.0, exponent="1/2")
        assert edge.rate_at(16.0) == pytest.approx(0.75)

    def test_exponent_serialization(self):
        """Integer exponents dump as ints, others as p/q strings."""
        whole = ParamEdge(source="a", target="b", coeff=1.0, exponent=2)
        half = ParamEdge(source="a", target="b", coeff=1.0, exponent="1/2")
        assert whole.model_dump()["exponent"] == 2
        assert half.model_dump()["exponent"] == "1/2"

    def test_family_validation(self):
        with pytest.raises(ValidationError):
            ParamChainSpec(states=["a"], edges=[ParamEdge(source="a", target="b", coeff=1.0)])


class TestProbabilityVector:
    """Test probability measures."""

    def test_normalization_enforced(self):
        with pytest.raises(ValidationError):
            ProbabilityVector(weights={"a": 0.5, "b": 0.4})

    def test_negative_rejected(self):
        with pytest.raises(ValidationError):
            ProbabilityVector(weights={"a": 1.5, "b": -0.5})

    def test_from_array_normalize(self):
        mu = ProbabilityVector.from_array(["a", "b"], [2.0, 6.0], normalize=True)
        assert mu.weights == {"a": 0.25, "b": 0.75}

    def test_from_array_wrong_length(self):
        with pytest.raises(ChainValidationError):
            ProbabilityVector.from_array(["a", "b"], [1.0])

    def test_dirac_support_mass(self):
        mu = ProbabilityVector.dirac("b")
        assert mu.support == ["b"]
        assert mu.to_array(["a", "b"]).tolist() == [0.0, 1.0]
        assert mu.mass(["a"]) == 0.0

    def test_unknown_state_in_to_array(self):
        with pytest.raises(ChainValidationError):
            ProbabilityVector.dirac("z").to_array(["a", "b"])


class TestFlow:
    """Test edge flows."""

    def test_negative_rejected(self):
        with pytest.raises(ValidationError):
            Flow(values={("a", "b"): -1.0})

    def test_self_loop_rejected(self):
        with pytest.raises(ValidationError):
            Flow(values={("a", "a"): 1.0})

    def test_records(self):
        flow = Flow.from_records([{"from": "a", "to": "b", "value": 0.5}])
        assert flow.values == {("a", "b"): 0.5}
        assert flow.to_records() == [{"from": "a", "to": "b", "value": 0.5}]

    def test_duplicate_records(self):
        with pytest.raises(ChainValidationError):
            Flow.from_records([{"from": "a", "to": "b", "value": 1}] * 2)

    def test_to_array_strict(self):
        flow = Flow(values={("a", "b"): 1.0, ("b", "c"): 2.0})
        with pytest.raises(ChainValidationError):
            flow.to_array([("a", "b")])
        assert flow.to_array([("a", "b")], strict=False).tolist() == [1.0]
        assert flow.outside_mass([("a", "b")]) == 2.0

    def test_add_and_scale(self):
        J = Flow(values={("a", "b"): 1.0})
        K = Flow(values={("a", "b"): 0.5, ("b", "a"): 1.0})
        total = (J + K).scaled(2.0)
        assert total.values == {("a", "b"): 3.0, ("b", "a"): 2.0}


class TestSmallModels:
    """Test cycles, decompositions, tilts, directions and mixtures."""

    def test_cycle_must_close(self):
        with pytest.raises(ValidationError):
            Cycle(edges=[("a", "b"), ("c", "a")], amplitude=1.0)

    def test_cycle_states(self):
        cycle = Cycle(edges=[("a", "b"), ("b", "c"), ("c", "a")], amplitude=0.5)
        assert cycle.states == ["a", "b", "c"]

    def test_class_decomposition_disjoint(self):
        with pytest.raises(ValidationError):
            ClassDecomposition(closed_classes=[["a"], ["a", "b"]])

    def test_tilt_anchored(self):
        H = TiltField.from_array(["a", "b"], [2.0, 3.5])
        assert H.values == {"a": 0.0, "b": 1.5}

    def test_signed_measure_mass_zero(self):
        SignedMeasure.from_array(["a", "b"], [1.0, -1.0])
        with pytest.raises(ValidationError):
            SignedMeasure.from_array(["a", "b"], [1.0, -0.5])

    def test_well_mixture(self):
        WellMixture(level=1, weights=[0.25, 0.75])
        with pytest.raises(ValidationError):
            WellMixture(level=1, weights=[0.25, 0.5])


class TestTrajectory:
    """Test trajectories."""

    def test_valid_path(self):
        traj = Trajectory(states=["x", "y"], initial="x", jumps=[(1.0, "y"), (2.0, "x")], horizon=4.0)
        assert len(traj.jumps) == 2

    def test_times_must_increase(self):
        with pytest.raises(ValidationError):
            Trajectory(states=["x", "y"], initial="x", jumps=[(2.0, "y"), (1.0, "x")], horizon=4.0)

    def test_jump_beyond_horizon(self):
        with pytest.raises(ValidationError):
            Trajectory(states=["x", "y"], initial="x", jumps=[(5.0, "y")], horizon=4.0)

    def test_jump_must_change_state(self):
        with pytest.raises(ValidationError):
            Trajectory(states=["x", "y"], initial="x", jumps=[(1.0, "x")], horizon=4.0)


class TestRunConfig:
    """Test CLI run configuration."""

    def test_defaults(self):
        config = RunConfig(subcommand=Subcommand.RATE, chain="c3")
        assert config.grid_start == 6 and config.grid_end == 16
        assert config.precision_bits == 113
        assert config.n is None

    def test_grid_too_short(self):
        with pytest.raises(ValidationError):
            RunConfig(subcommand=Subcommand.ANALYZE, grid_start=6, grid_end=7)

    def test_tolerance_positive(self):
        with pytest.raises(ValidationError):
            RunConfig(subcommand=Subcommand.RECOVER, tolerances={"recovery": 0.0})

    def test_scale_parameter_lower_bound(self):
        with pytest.raises(ValidationError):
            RunConfig(subcommand=Subcommand.RATE, n=0.5)
