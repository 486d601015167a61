# -*- coding: utf-8 -*-
# tests/conftest.py
"""Shared fixtures: small chains with closed-form answers and the bundled families."""

import os

import numpy as np
import pytest

from chuk_metastable.catalog import load_example_chain, load_example_family
from chuk_metastable.grid import NGrid
from chuk_metastable.models import ChainSpec


@pytest.fixture
def clean_env():
    """Provide a clean environment for testing."""
    original_env = os.environ.copy()
    yield
    os.environ.clear()
    os.environ.update(original_env)


@pytest.fixture
def two_state():
    """Factory for the chain x ⇄ y with R(x,y) = r and R(y,x) = s."""

    def make(r: float = 1.0, s: float = 1.0) -> ChainSpec:
        return ChainSpec.from_rates(["x", "y"], {("x", "y"): r, ("y", "x"): s})

    return make


@pytest.fixture
def c3():
    return load_example_chain("c3")


@pytest.fixture
def c3_reversed():
    return load_example_chain("c3_reversed")


@pytest.fixture
def rm5():
    return load_example_family("rm5")


@pytest.fixture
def double_well():
    return load_example_family("double_well")


@pytest.fixture
def three_well():
    return load_example_family("three_well")


@pytest.fixture
def short_grid():
    """n = 2⁶ … 2¹²; enough points for the fits, quicker than the default grid."""
    return NGrid(start=6, end=12, base=2)


def _random_chain(rng: np.random.Generator, size: int, density: float = 0.6) -> ChainSpec:
    """An irreducible chain: a random directed ring plus random extra edges."""
    states = [f"s{i}" for i in range(size)]
    order = rng.permutation(size)
    rates = {}
    for i in range(size):
        a, b = states[order[i]], states[order[(i + 1) % size]]
        rates[(a, b)] = float(rng.uniform(0.2, 3.0))
    for i in range(size):
        for j in range(size):
            if i != j and (states[i], states[j]) not in rates and rng.uniform() < density:
                rates[(states[i], states[j])] = float(rng.uniform(0.2, 3.0))
    return ChainSpec.from_rates(states, rates)


def _random_reversible_chain(rng: np.random.Generator, size: int) -> ChainSpec:
    """Rates from detailed balance against a random π on a connected random graph."""
    states = [f"s{i}" for i in range(size)]
    pi = rng.uniform(0.2, 1.0, size)
    pi /= pi.sum()
    pairs = [(i, i + 1) for i in range(size - 1)]
    pairs += [(i, j) for i in range(size) for j in range(i + 2, size) if rng.uniform() < 0.4]
    rates = {}
    for i, j in pairs:
        conductance = float(rng.uniform(0.2, 1.0))
        rates[(states[i], states[j])] = conductance / pi[i]
        rates[(states[j], states[i])] = conductance / pi[j]
    return ChainSpec.from_rates(states, rates)


@pytest.fixture
def random_chain():
    """Factory ``random_chain(rng, size, density=0.6)`` for irreducible test chains."""
    return _random_chain


@pytest.fixture
def random_reversible_chain():
    """Factory ``random_reversible_chain(rng, size)`` for detailed-balance test chains."""
    return _random_reversible_chain
