# -*- coding: utf-8 -*-
# tests/test_identify.py
"""
Tests for chuk_metastable.identify: oracles, recovery from the DV and BFG
functionals, and the two non-identifiability examples.
"""

import json
import math

import numpy as np
import pytest

from chuk_metastable.chain_core import stationary_distribution
from chuk_metastable.exceptions import ChainValidationError, NegativeRootError, OracleQueryError
from chuk_metastable.flows import is_divergence_free
from chuk_metastable.identify import (
    BfgOracle,
    DvOracle,
    RecordingOracle,
    TabulatedBfgOracle,
    TabulatedDvOracle,
    check_recovery,
    counterexample_bfg,
    counterexample_dv,
    discover_classes,
    recover_from_bfg,
    recover_holding_and_products,
    recover_reversible,
    recover_stationary_profiles,
)
from chuk_metastable.models import ChainSpec, Flow, ProbabilityVector
from chuk_metastable.types import RecoveryMode


class TestOracles:
    """Test live, recorded and tabulated oracles."""

    def test_dv_oracle_counts_calls(self, c3):
        oracle = DvOracle(c3)
        assert oracle(ProbabilityVector.dirac("a")) == pytest.approx(1.0)
        assert oracle.calls == 1
        assert oracle.mode == RecoveryMode.DV

    def test_bfg_oracle_off_divergence_free(self, c3):
        oracle = BfgOracle(c3)
        assert math.isinf(oracle(ProbabilityVector.uniform(c3.states), Flow(values={("a", "b"): 1.0})))

    def test_dv_table_replays_queries(self, c3, tmp_path):
        recorder = RecordingOracle(DvOracle(c3))
        mu = ProbabilityVector(weights={"a": 0.5, "b": 0.25, "c": 0.25})
        value = recorder(mu)
        recorder(ProbabilityVector.dirac("b"))
        recorder.save(tmp_path / "dv")

        manifest = json.loads((tmp_path / "dv" / "oracle.json").read_text())
        assert manifest == {"mode": "dv", "states": ["a", "b", "c"]}

        table = TabulatedDvOracle.from_directory(tmp_path / "dv")
        assert len(table) == 2
        assert table(mu) == value
        with pytest.raises(OracleQueryError) as exc_info:
            table(ProbabilityVector.dirac("c"))
        assert "2 records" in str(exc_info.value)

    def test_bfg_table_replays_queries(self, c3, tmp_path):
        recorder = RecordingOracle(BfgOracle(c3))
        mu = ProbabilityVector.uniform(c3.states)
        J = Flow(values={("a", "b"): 0.5, ("b", "c"): 0.5, ("c", "a"): 0.5})
        value = recorder(mu, J)
        recorder(mu, Flow(values={("a", "b"): 1.0}))
        recorder.save(tmp_path / "bfg")

        table = TabulatedBfgOracle.from_directory(tmp_path / "bfg")
        assert table(mu, J) == pytest.approx(value)
        assert math.isinf(table(mu, Flow(values={("a", "b"): 1.0})))

    def test_wrong_mode(self, c3, tmp_path):
        recorder = RecordingOracle(DvOracle(c3))
        recorder(ProbabilityVector.dirac("a"))
        recorder.save(tmp_path / "dv")
        with pytest.raises(ChainValidationError) as exc_info:
            TabulatedBfgOracle.from_directory(tmp_path / "dv")
        assert "expected 'bfg'" in str(exc_info.value)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(ChainValidationError):
            TabulatedDvOracle.from_directory(tmp_path / "absent")

    def test_bad_record(self, tmp_path):
        (tmp_path / "oracle.json").write_text(json.dumps({"mode": "dv", "states": ["a", "b"]}))
        (tmp_path / "queries.jsonl").write_text(json.dumps({"mu": [1.0], "value": 1.0}) + "\n")
        with pytest.raises(ChainValidationError) as exc_info:
            TabulatedDvOracle.from_directory(tmp_path)
        assert "queries.jsonl:1" in str(exc_info.value)


class TestDvRecovery:
    """Test recovery from ℐ."""

    def test_holding_and_products(self, two_state):
        holding, products = recover_holding_and_products(DvOracle(two_state(2.0, 3.0)))
        assert holding == pytest.approx({"x": 2.0, "y": 3.0})
        assert products[("x", "y")] == pytest.approx(6.0, rel=1e-9)

    def test_negative_root(self):
        def oracle(mu):
            return 0.0 if len(mu.weights) == 1 else 1.0

        with pytest.raises(NegativeRootError):
            recover_holding_and_products(oracle, ["a", "b"])

    def test_two_state_round_trip(self, two_state):
        chain = two_state(2.0, 3.0)
        recovered = recover_reversible(DvOracle(chain))
        assert recovered.rate("x", "y") == pytest.approx(2.0, rel=1e-4)
        assert recovered.rate("y", "x") == pytest.approx(3.0, rel=1e-4)

    def test_profiles(self, two_state):
        (profile,) = recover_stationary_profiles(DvOracle(two_state(2.0, 3.0)))
        assert profile.weights["x"] == pytest.approx(0.6, abs=1e-5)

    def test_profiles_on_non_reversible_chain(self, random_chain):
        """The face minimizer lands on π for a chain without detailed balance."""
        chain = random_chain(np.random.default_rng(9), 4)
        (profile,) = recover_stationary_profiles(DvOracle(chain))
        pi = stationary_distribution(chain).to_array(chain.states)
        assert np.allclose(profile.to_array(chain.states), pi, atol=1e-5)

    def test_transient_state_carries_no_mass(self):
        """ex02: {b,c} is the class, a is left unresolved."""
        chain = ChainSpec.from_rates(
            ["a", "b", "c"], {("a", "b"): 2.0, ("b", "c"): 1.0, ("c", "b"): 1.0}
        )
        discovery = discover_classes(DvOracle(chain))
        assert discovery.classes == [["b", "c"]]
        assert discovery.unresolved == ["a"]

    @pytest.mark.slow
    def test_random_reversible_round_trip(self, random_reversible_chain):
        chain = random_reversible_chain(np.random.default_rng(4), 4)
        oracle = DvOracle(chain)
        recovered = recover_reversible(oracle)
        report = check_recovery(oracle, recovered, samples=10, reference=chain, tol=1e-4)
        assert report.consistent
        assert report.max_rate_error < 1e-3

    @pytest.mark.slow
    def test_cycle_is_not_identified(self, c3):
        """The 3-cycle has no two-way edges; its reversible stand-in has none either."""
        oracle = DvOracle(c3)
        discovery = discover_classes(oracle)
        assert discovery.classes == [["a", "b", "c"]]
        assert any("zero set" in note for note in discovery.notes)
        recovered = recover_reversible(oracle, discovery=discovery)
        report = check_recovery(oracle, recovered, samples=5)
        assert not report.consistent

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(50))
    def test_reversible_seed_sweep(self, seed, random_reversible_chain):
        """Rates come back within 1e-4 relative on |V| from 2 to 6."""
        chain = random_reversible_chain(np.random.default_rng(seed), 2 + seed % 5)
        oracle = DvOracle(chain)
        recovered = recover_reversible(oracle)
        report = check_recovery(oracle, recovered, samples=10, reference=chain, tol=1e-4)
        assert report.consistent
        assert report.max_rate_error < 1e-4


class TestBfgRecovery:
    """Test recovery from I."""

    @pytest.mark.slow
    def test_cycle_round_trip(self, c3):
        recovered = recover_from_bfg(BfgOracle(c3))
        assert sorted(recovered.edge_keys) == [("a", "b"), ("b", "c"), ("c", "a")]
        for source, target in recovered.edge_keys:
            assert recovered.rate(source, target) == pytest.approx(1.0, rel=1e-4)

    @pytest.mark.slow
    def test_recovery_queries_stay_divergence_free(self, c3):
        """Every flow handed to the oracle is a positive cycle combination."""
        seen = []

        class CheckingOracle(BfgOracle):
            def __call__(self, mu, J):
                seen.append(is_divergence_free(J, self.states, tol=1e-9))
                return super().__call__(mu, J)

        recover_from_bfg(CheckingOracle(c3))
        assert seen and all(seen)

    @pytest.mark.slow
    def test_check_against_reference(self, c3):
        oracle = BfgOracle(c3)
        recovered = recover_from_bfg(oracle)
        report = check_recovery(oracle, recovered, samples=10, reference=c3)
        assert report.mode == "bfg"
        assert report.consistent
        assert report.max_rate_error < 1e-4

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(20))
    def test_all_recurrent_seed_sweep(self, seed, random_chain):
        """One to three irreducible classes, at most six states in all."""
        rng = np.random.default_rng(seed)
        count = 1 + seed % 3
        if count == 1:
            sizes = [int(rng.integers(2, 5))]
        elif count == 2:
            sizes = [int(rng.integers(2, 4)), int(rng.integers(2, 4))]
        else:
            sizes = [2, 2, 2]
        states, rates = [], {}
        for c, size in enumerate(sizes):
            block = random_chain(rng, size)
            rename = {s: f"c{c}{s}" for s in block.states}
            states += [rename[s] for s in block.states]
            rates.update({(rename[e.source], rename[e.target]): e.rate for e in block.edges})
        chain = ChainSpec.from_rates(states, rates)
        oracle = BfgOracle(chain)
        recovered = recover_from_bfg(oracle)
        assert sorted(recovered.edge_keys) == sorted(chain.edge_keys)
        report = check_recovery(oracle, recovered, samples=10, reference=chain)
        assert report.consistent
        assert report.max_rate_error < 1e-4


class TestCounterexamples:
    """Test the DV and BFG non-identifiability certificates."""

    def test_dv_cycles(self):
        report = counterexample_dv(20)
        assert report.points == 231
        assert report.certified
        assert report.max_difference < 1e-8

    def test_dv_resolution(self):
        with pytest.raises(ChainValidationError):
            counterexample_dv(0)

    def test_bfg_feeder(self):
        report = counterexample_bfg(samples=30, seed=5)
        assert report.points == 32
        assert report.certified
        assert report.infinite_controls == 10
