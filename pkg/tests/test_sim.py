# -*- coding: utf-8 -*-
# tests/test_sim.py
"""
Tests for chuk_metastable.sim: path sampling, the empirical pair and the
replica variance estimate.
"""

import numpy as np
import pytest

from chuk_metastable.exceptions import AbsorbingStateError, ChainValidationError
from chuk_metastable.models import ChainSpec, Trajectory
from chuk_metastable.sim import (
    empirical_pair,
    make_generator,
    occupation_integral,
    replica_generators,
    run_variance_estimate,
    sample_path,
    simulate_replicas,
    variance_estimate,
    variance_estimate_async,
    variance_from_samples,
)


@pytest.fixture
def hand_path():
    """x on [0,1), y on [1,2]."""
    return Trajectory(states=["x", "y"], initial="x", jumps=[(1.0, "y")], horizon=2.0)


class TestGenerators:
    """Test seeding."""

    def test_philox(self):
        rng = make_generator(7)
        assert isinstance(rng.bit_generator, np.random.Philox)

    def test_same_seed_same_stream(self):
        assert make_generator(7).uniform() == make_generator(7).uniform()

    def test_generator_passes_through(self):
        rng = np.random.default_rng(1)
        assert make_generator(rng) is rng

    def test_replicas_are_independent_streams(self):
        first, second = replica_generators(3, 2)
        assert first.uniform() != second.uniform()


class TestPaths:
    """Test path sampling."""

    def test_reproducible(self, c3):
        one = sample_path(c3, "a", 20.0, seed=11)
        two = sample_path(c3, "a", 20.0, seed=11)
        assert one.jumps == two.jumps

    def test_cycle_order(self, c3):
        """On the 3-cycle every jump goes a → b → c → a."""
        path = sample_path(c3, "a", 30.0, seed=2)
        successor = {"a": "b", "b": "c", "c": "a"}
        previous = "a"
        for time, state in path.jumps:
            assert state == successor[previous]
            assert time <= 30.0
            previous = state

    def test_absorbing_state(self):
        chain = ChainSpec.from_rates(["a", "b"], {("a", "b"): 5.0})
        with pytest.raises(AbsorbingStateError):
            sample_path(chain, "a", 1e6, seed=1)

    @pytest.mark.parametrize("T", [0.0, -1.0, float("inf")])
    def test_bad_horizon(self, c3, T):
        with pytest.raises(ChainValidationError):
            sample_path(c3, "a", T)

    def test_unknown_start(self, c3):
        with pytest.raises(ChainValidationError):
            sample_path(c3, "z", 1.0)


class TestEmpiricalPair:
    """Test L_T, Q_T and occupation integrals."""

    def test_hand_trajectory(self, hand_path):
        L, Q = empirical_pair(hand_path)
        assert L.weights == {"x": 0.5, "y": 0.5}
        assert Q.values == {("x", "y"): 0.5}

    def test_occupation_integral(self, hand_path):
        assert occupation_integral(hand_path, [1.0, -1.0]) == 0.0
        assert occupation_integral(hand_path, {"y": 3.0}) == 3.0

    def test_occupation_wrong_length(self, hand_path):
        with pytest.raises(ChainValidationError):
            occupation_integral(hand_path, [1.0])

    def test_long_cycle_path(self, c3):
        """L_T and Q_T approach π = 1/3 and J = 1/3 on the 3-cycle."""
        L, Q = empirical_pair(sample_path(c3, "a", 3000.0, seed=5))
        assert all(w == pytest.approx(1 / 3, abs=0.05) for w in L.weights.values())
        assert Q.values[("a", "b")] == pytest.approx(1 / 3, abs=0.05)


class TestVariance:
    """Test the replica variance estimate."""

    def test_from_samples(self):
        report = variance_from_samples([1.0, -1.0, 1.0, -1.0], 4.0)
        assert report.estimate == pytest.approx(4 / 3)
        assert report.standard_error == pytest.approx(4 / 3 * np.sqrt(2 / 3))
        assert report.replicas == 4

    def test_two_state_estimate(self, two_state):
        """σ² = 2rs(f₁ − f₂)²/(r + s)³ = 0.096 for r = 2, s = 3."""
        report = variance_estimate(two_state(2.0, 3.0), [0.4, -0.6], 40.0, 200, seed=9)
        assert report.estimate == pytest.approx(0.096, abs=0.04)
        assert report.horizon == 40.0

    async def test_async_matches_serial(self, two_state):
        chain = two_state(2.0, 3.0)
        serial = variance_estimate(chain, [0.4, -0.6], 5.0, 16, seed=4)
        concurrent = await variance_estimate_async(chain, [0.4, -0.6], 5.0, 16, seed=4)
        assert concurrent.estimate == serial.estimate

    def test_sync_driver(self, two_state):
        chain = two_state(2.0, 3.0)
        serial = variance_estimate(chain, {"x": 0.4, "y": -0.6}, 5.0, 8, seed=4)
        assert run_variance_estimate(chain, {"x": 0.4, "y": -0.6}, 5.0, 8, seed=4).estimate == serial.estimate

    def test_too_few_replicas(self, two_state):
        with pytest.raises(ChainValidationError):
            variance_estimate(two_state(), [0.5, -0.5], 1.0, 1)

    def test_unknown_observable_state(self, two_state):
        with pytest.raises(ChainValidationError):
            variance_estimate(two_state(), {"z": 1.0}, 1.0, 4)


class TestReplicas:
    """Test batches of paths."""

    def test_fixed_start(self, c3):
        paths = simulate_replicas(c3, 5.0, 3, seed=1, start="b")
        assert len(paths) == 3
        assert all(p.initial == "b" for p in paths)

    def test_reproducible(self, c3):
        first = simulate_replicas(c3, 5.0, 4, seed=8)
        second = simulate_replicas(c3, 5.0, 4, seed=8)
        assert [p.jumps for p in first] == [p.jumps for p in second]

    def test_needs_a_replica(self, c3):
        with pytest.raises(ChainValidationError):
            simulate_replicas(c3, 5.0, 0)
