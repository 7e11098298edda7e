import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhist.oracle import enumerate_tree, enumerate_tree_with_residual, sample

from oracles import literal_chain_probability, random_schedule

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_entangler_tree(entangler):
    tree = enumerate_tree(entangler)
    assert len(tree) == 4
    for p in tree.values():
        assert p == pytest.approx(0.25, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_tree_against_literal_chains(seed):
    sched = random_schedule(np.random.default_rng(seed))
    tree, pruned = enumerate_tree_with_residual(sched, prune=0.0)
    assert pruned == 0.0
    assert abs(sum(tree.values()) - 1.0) <= 1e-10
    for labels, p in tree.items():
        assert abs(p - literal_chain_probability(sched, labels)) <= 1e-10


def test_pruned_mass_accounted(rng):
    sched = random_schedule(rng, d=6, n=4)
    tree, pruned = enumerate_tree_with_residual(sched, prune=1e-3)
    assert abs(sum(tree.values()) + pruned - 1.0) <= 1e-10


def test_sampling_is_deterministic(teleport):
    a = sample(teleport, 2000, 11)
    b = sample(teleport, 2000, 11)
    c = sample(teleport, 2000, 12)
    assert a.counts == b.counts
    assert a.counts != c.counts
    assert sum(a.counts.values()) == 2000
    assert a.algorithm == "numpy.random.PCG64"


def test_sampling_frequencies_close_to_tree(teleport):
    n = 20000
    res = sample(teleport, n, 3)
    tree = enumerate_tree(teleport)
    assert set(res.counts) <= set(tree)
    for labels, p in tree.items():
        sigma = np.sqrt(p * (1 - p) / n)
        assert abs(res.frequencies.get(labels, 0.0) - p) <= 5 * sigma


def test_sampling_rejects_bad_shots(entangler):
    with pytest.raises(ValueError):
        sample(entangler, 0, 1)
