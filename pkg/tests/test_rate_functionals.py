# -*- coding: utf-8 -*-
# tests/test_rate_functionals.py
"""
Tests for chuk_metastable.rate_functionals: Φ, Υ, the measure-current
functional, both DV evaluations and the tilt machinery.
"""

import math

import numpy as np
import pytest

from chuk_metastable.catalog import load_example_chain
from chuk_metastable.chain_core import stationary_distribution
from chuk_metastable.exceptions import NotIrreducibleError, NotStrictlyPositiveError
from chuk_metastable.flows import induced_current, is_divergence_free
from chuk_metastable.models import ChainSpec, Flow, ProbabilityVector, TiltField
from chuk_metastable.rate_functionals import (
    bfg_rate,
    dv_objective,
    dv_rate,
    dv_rate_projection,
    dv_rate_variational,
    optimal_current,
    phi,
    stationarity_gap,
    tilt_inverse,
    tilt_solver,
    tilted_chain,
    upsilon,
)
from chuk_metastable.types import INF, DvMethod


def cycle_closed_form(mu) -> float:
    """ℐ on the unit 3-cycle: 1 − 3(μ_a μ_b μ_c)^{1/3}."""
    return 1.0 - 3.0 * float(np.prod(mu)) ** (1.0 / 3.0)


def measure(chain: ChainSpec, values) -> ProbabilityVector:
    return ProbabilityVector.from_array(chain.states, values, normalize=True)


class TestPhi:
    """Test the per-edge cost Φ."""

    def test_zero_flux(self):
        assert phi(0.0, 2.0) == 2.0
        assert phi(0.0, 0.0) == 0.0

    def test_vanishes_on_diagonal(self):
        assert phi(3.0, 3.0) == 0.0

    def test_middle_branch(self):
        assert phi(2.0, 1.0) == pytest.approx(2 * math.log(2) - 1, abs=1e-12)

    def test_infinite_without_reference(self):
        assert math.isinf(phi(1.0, 0.0))

    def test_negative_arguments(self):
        with pytest.raises(ValueError):
            phi(-1.0, 1.0)


class TestUpsilonAndBfg:
    """Test Υ and the measure-current functional."""

    def test_induced_current_costs_nothing(self, c3):
        mu = measure(c3, [0.5, 0.3, 0.2])
        assert upsilon(c3, mu, induced_current(mu, c3)) == pytest.approx(0.0, abs=1e-15)

    def test_dirac_zero_flow(self, c3):
        """δ_a with J = 0 costs Φ(0,1) = 1."""
        assert upsilon(c3, ProbabilityVector.dirac("a"), Flow.zero()) == pytest.approx(1.0)

    def test_flow_without_mass(self, c3):
        J = Flow(values={("b", "c"): 0.5})
        assert math.isinf(upsilon(c3, ProbabilityVector.dirac("a"), J))

    def test_flow_off_the_edge_set(self, c3):
        J = Flow(values={("b", "a"): 0.5, ("a", "b"): 0.5})
        assert bfg_rate(c3, ProbabilityVector.uniform(c3.states), J) == INF

    @pytest.mark.parametrize("t", [0.0, 0.2, 0.5, 1.3])
    def test_transient_feeder_closed_form(self, t):
        """ex02: 2μ_a + Φ(t, μ_b) + Φ(t, μ_c) for J_bc = J_cb = t."""
        chain = load_example_chain("ex02_ab")
        mu = measure(chain, [0.2, 0.5, 0.3])
        J = Flow(values={("b", "c"): t, ("c", "b"): t})
        expected = 2 * 0.2 + phi(t, 0.5) + phi(t, 0.3)
        assert bfg_rate(chain, mu, J) == pytest.approx(expected, abs=1e-12)

    def test_not_divergence_free(self, c3):
        J = Flow(values={("a", "b"): 1.0})
        assert bfg_rate(c3, ProbabilityVector.uniform(c3.states), J) == INF

    def test_stationary_pair(self, two_state):
        chain = two_state(2.0, 3.0)
        pi = stationary_distribution(chain)
        assert bfg_rate(chain, pi, induced_current(pi, chain)) == pytest.approx(0.0, abs=1e-14)


class TestDvRate:
    """Test both DV evaluations against closed forms."""

    def test_cycle_variational(self, c3):
        value = dv_rate_variational(c3, measure(c3, [0.5, 0.25, 0.25]))
        assert value == pytest.approx(0.055060, abs=1e-6)
        assert value == pytest.approx(cycle_closed_form([0.5, 0.25, 0.25]), abs=1e-10)

    def test_cycle_projection(self, c3):
        value = dv_rate_projection(c3, measure(c3, [0.5, 0.3, 0.2]))
        assert value == pytest.approx(0.06786, abs=1e-5)
        assert value == pytest.approx(cycle_closed_form([0.5, 0.3, 0.2]), abs=1e-9)

    def test_two_state_closed_form(self, two_state):
        """θ = 0.25 on rates (1,1): 1 − 2√0.1875."""
        chain = two_state(1.0, 1.0)
        value = dv_rate_variational(chain, measure(chain, [0.25, 0.75]))
        assert value == pytest.approx(0.133975, abs=1e-6)

    @pytest.mark.parametrize("method", list(DvMethod))
    def test_zero_at_stationarity(self, c3, method):
        assert dv_rate(c3, ProbabilityVector.uniform(c3.states), method) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("state", ["a", "b", "c"])
    def test_dirac_is_holding_rate(self, state):
        chain = ChainSpec.from_rates(
            ["a", "b", "c"], {("a", "b"): 2.0, ("b", "c"): 0.5, ("c", "a"): 1.0, ("a", "c"): 3.0}
        )
        expected = sum(e.rate for e in chain.edges if e.source == state)
        assert dv_rate_projection(chain, ProbabilityVector.dirac(state)) == pytest.approx(expected)
        assert dv_rate(chain, ProbabilityVector.dirac(state)) == pytest.approx(expected)

    @pytest.mark.parametrize("theta", [0.1, 0.3, 0.5, 0.8])
    def test_two_point_mixture_identity(self, theta, random_chain):
        """ℐ(θδ_x+(1−θ)δ_y) = θλ(x)+(1−θ)λ(y) − 2√(R(x,y)R(y,x)θ(1−θ))."""
        chain = random_chain(np.random.default_rng(11), 5, density=0.9)
        x, y = chain.states[0], chain.states[1]
        weights = {x: theta, y: 1 - theta}
        mu = ProbabilityVector(weights=weights)
        lam = chain.rate_matrix.sum(axis=1)
        expected = (
            theta * lam[0]
            + (1 - theta) * lam[1]
            - 2 * math.sqrt(chain.rate(x, y) * chain.rate(y, x) * theta * (1 - theta))
        )
        assert dv_rate_projection(chain, mu) == pytest.approx(expected, abs=1e-8)
        assert dv_rate(chain, mu) == pytest.approx(expected, abs=1e-8)

    def test_duality_on_random_chains(self, random_chain):
        """Variational and projection values agree on interior measures."""
        rng = np.random.default_rng(2024)
        for trial in range(40):
            chain = random_chain(rng, int(rng.integers(2, 7)))
            mu = measure(chain, rng.dirichlet(np.ones(chain.size)) + 1e-3)
            a = dv_rate_variational(chain, mu)
            b = dv_rate_projection(chain, mu)
            assert abs(a - b) <= 1e-7 * (1 + a), f"trial {trial}"

    @pytest.mark.slow
    def test_duality_sweep(self, random_chain):
        """Variational, projection and auto agree over a wide random sweep."""
        rng = np.random.default_rng(77)
        for trial in range(500):
            size = int(rng.integers(2, 7))
            chain = random_chain(rng, size, density=float(rng.uniform(0.0, 1.0)))
            concentration = float(rng.choice([0.3, 1.0, 5.0]))
            mu = measure(chain, rng.dirichlet(np.full(size, concentration)) + 1e-3)
            a = dv_rate_variational(chain, mu)
            b = dv_rate_projection(chain, mu)
            c = dv_rate(chain, mu)
            assert a >= 0.0
            assert abs(a - b) <= 1e-7 * (1 + a), f"trial {trial}"
            assert abs(a - c) <= 1e-7 * (1 + a), f"trial {trial}"

    def test_variational_rejects_boundary(self, c3):
        with pytest.raises(NotStrictlyPositiveError):
            dv_rate_variational(c3, measure(c3, [0.5, 0.5, 0.0]))

    def test_variational_rejects_reducible(self):
        chain = load_example_chain("ex02_ab")
        with pytest.raises(NotIrreducibleError):
            dv_rate_variational(chain, measure(chain, [0.2, 0.4, 0.4]))

    def test_boundary_cycle(self, c3):
        """(1,0,0) on the 3-cycle is the holding rate 1."""
        assert dv_rate(c3, ProbabilityVector.dirac("a")) == pytest.approx(1.0)

    def test_minimizer_is_stationary(self, two_state):
        """ℐ is smallest at π along a grid of two-state measures."""
        chain = two_state(2.0, 3.0)
        grid = np.linspace(0.05, 0.95, 91)
        values = [dv_rate(chain, measure(chain, [m, 1 - m])) for m in grid]
        assert grid[int(np.argmin(values))] == pytest.approx(0.6, abs=1e-9)


class TestTilts:
    """Test H_μ, tilted chains, optimal currents and the inverse map."""

    def test_stationary_has_zero_tilt(self, c3):
        H = tilt_solver(c3, ProbabilityVector.uniform(c3.states))
        assert all(abs(v) < 1e-10 for v in H.values.values())

    def test_two_state_closed_form(self, two_state):
        r, s, m = 2.0, 3.0, 0.3
        chain = two_state(r, s)
        H = tilt_solver(chain, measure(chain, [m, 1 - m]))
        assert H.values["x"] == 0.0
        assert H.values["y"] == pytest.approx(0.5 * math.log((1 - m) * s / (m * r)), abs=1e-10)

    def test_objective_matches_closed_form(self, c3):
        mu = measure(c3, [0.5, 0.25, 0.25])
        H = tilt_solver(c3, mu)
        assert dv_objective(c3, mu, H) == pytest.approx(cycle_closed_form([0.5, 0.25, 0.25]), abs=1e-10)

    def test_tilted_chain(self, two_state):
        chain = two_state(2.0, 3.0)
        tilted = tilted_chain(chain, TiltField(values={"x": 0.0, "y": math.log(2)}))
        assert tilted.rate("x", "y") == pytest.approx(4.0)
        assert tilted.rate("y", "x") == pytest.approx(1.5)

    def test_tilt_composition(self, c3):
        H = TiltField.from_array(c3.states, [0.0, 0.3, -0.2])
        G = TiltField.from_array(c3.states, [0.0, -0.1, 0.4])
        HG = TiltField.from_array(c3.states, [0.0, 0.2, 0.2])
        twice = tilted_chain(tilted_chain(c3, H), G)
        once = tilted_chain(c3, HG)
        assert np.allclose(twice.rate_matrix, once.rate_matrix)

    def test_optimal_current_two_state(self, two_state):
        r, s, m = 2.0, 3.0, 0.3
        chain = two_state(r, s)
        J = optimal_current(chain, measure(chain, [m, 1 - m]))
        expected = math.sqrt(m * r * (1 - m) * s)
        assert J.values[("x", "y")] == pytest.approx(expected, rel=1e-10)
        assert J.values[("y", "x")] == pytest.approx(expected, rel=1e-10)

    def test_optimal_current_attains_dv(self, random_chain):
        rng = np.random.default_rng(5)
        chain = random_chain(rng, 5)
        mu = measure(chain, rng.dirichlet(np.ones(5)) + 0.01)
        J = optimal_current(chain, mu)
        assert is_divergence_free(J, chain.states, tol=1e-10)
        assert upsilon(chain, mu, J) == pytest.approx(dv_rate(chain, mu), abs=1e-8)

    def test_optimal_current_at_stationarity(self, c3):
        pi = ProbabilityVector.uniform(c3.states)
        J = optimal_current(c3, pi)
        for key, value in induced_current(pi, c3).values.items():
            assert J.values[key] == pytest.approx(value)

    def test_tilt_inverse_round_trip(self, random_chain):
        rng = np.random.default_rng(8)
        chain = random_chain(rng, 4)
        H = TiltField.from_array(chain.states, rng.normal(0.0, 0.5, 4))
        mu = tilt_inverse(chain, H)
        recovered = tilt_solver(chain, mu)
        assert np.max(np.abs(recovered.to_array(chain.states) - H.to_array(chain.states))) < 1e-8

    def test_tilt_inverse_of_zero(self, two_state):
        chain = two_state(2.0, 3.0)
        mu = tilt_inverse(chain, TiltField.zero(chain.states))
        assert mu.weights["x"] == pytest.approx(0.6)

    def test_tilt_solver_on_random_interior_measures(self, random_chain):
        """μ is stationary for R_{H_μ} and 𝒢(μ,H_μ) is the rate."""
        rng = np.random.default_rng(31)
        for trial in range(200):
            size = int(rng.integers(2, 6))
            chain = random_chain(rng, size)
            weights = rng.dirichlet(np.ones(size)) + 0.02
            mu = measure(chain, weights / weights.sum())
            H = tilt_solver(chain, mu)
            assert H.values[chain.states[0]] == 0.0
            back = tilt_inverse(chain, H).to_array(chain.states)
            target = mu.to_array(chain.states)
            assert np.max(np.abs(back - target) / target) < 1e-8, f"trial {trial}"
            rate = dv_rate_variational(chain, mu)
            assert dv_objective(chain, mu, H) == pytest.approx(rate, abs=1e-9), f"trial {trial}"


class TestStationarityGap:
    """Test the relative divergence used to stop the tilt Newton iteration."""

    def test_balanced_cycle(self):
        src, dst = np.array([0, 1, 2]), np.array([1, 2, 0])
        assert stationarity_gap(src, dst, np.full(3, 0.7), 3) == 0.0

    def test_relative_to_flux(self):
        """Out 2, in 1 at state 0: |div| = 1 against a flux of 3."""
        src, dst = np.array([0, 1]), np.array([1, 0])
        assert stationarity_gap(src, dst, np.array([2.0, 1.0]), 2) == pytest.approx(1 / 3)

    def test_isolated_state(self):
        src, dst = np.array([0, 1]), np.array([1, 0])
        assert stationarity_gap(src, dst, np.array([1.0, 1.0]), 3) == 0.0

    def test_scale_invariant(self):
        src, dst = np.array([0, 1, 1]), np.array([1, 0, 0])
        J = np.array([2.0, 1.5, 0.25])
        assert stationarity_gap(src, dst, 1e-6 * J, 2) == pytest.approx(
            stationarity_gap(src, dst, J, 2)
        )
