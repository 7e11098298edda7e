import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhist.chains import (
    OutcomeSequence,
    all_sequences,
    amplitude,
    chain_operator,
    chain_probability,
    decoherence_functional,
    is_consistent_set,
    propagate,
    reduced_amplitude,
)
from qhist.model import ScheduleError

from oracles import literal_amplitude, literal_chain_probability, random_schedule

seeds = st.integers(min_value=0, max_value=2**32 - 1)
prop = settings(max_examples=100, deadline=None)


def test_outcome_sequence_display():
    assert str(OutcomeSequence.of("0", "1", final_index=2)) == "0,1#2"
    assert OutcomeSequence.of("0", "1") != OutcomeSequence.of("0", "1", final_index=0)


def test_entangler_amplitudes(entangler):
    assert amplitude(entangler, ("00", "00", "00", "00")) == pytest.approx(0.5, abs=1e-12)
    assert amplitude(entangler, ("10", "11", "10", "10")) == pytest.approx(-0.5, abs=1e-12)
    assert chain_probability(entangler, ("00", "01", "00", "00")) == 0.0


def test_chain_operator_rejects_final_index(entangler):
    with pytest.raises(ScheduleError):
        chain_operator(entangler, OutcomeSequence.of("00", "00", "00", "00", final_index=0))


def test_degenerate_final_needs_index():
    sched = random_schedule(np.random.default_rng(3), d=4, n=2)
    degenerate = [l for l in sched.final.labels if sched.final.rank(l) > 1]
    if degenerate:
        with pytest.raises(ScheduleError):
            amplitude(sched, (sched.observables[0].labels[0], degenerate[0]))


@prop
@given(seeds)
def test_probabilities_sum_to_one(seed):
    sched = random_schedule(np.random.default_rng(seed))
    total = sum(chain_probability(sched, s) for s in all_sequences(sched))
    assert abs(total - 1.0) <= 1e-10


@prop
@given(seeds)
def test_chain_matches_literal_oracle(seed):
    sched = random_schedule(np.random.default_rng(seed))
    for s in all_sequences(sched):
        assert abs(chain_probability(sched, s) - literal_chain_probability(sched, s.labels)) <= 1e-12


@prop
@given(seeds)
def test_gram_trace_is_sum_of_squared_amplitudes(seed):
    sched = random_schedule(np.random.default_rng(seed))
    for s in all_sequences(sched):
        n = len(sched.final.basis(s.labels[-1]))
        amps = [amplitude(sched, OutcomeSequence(s.labels, i)) for i in range(n)]
        assert abs(sum(abs(a) ** 2 for a in amps) - chain_probability(sched, s)) <= 1e-12
        assert abs(amps[0] - literal_amplitude(sched, s.labels, 0)) <= 1e-12


@prop
@given(seeds)
def test_final_slot_marginalization(seed):
    sched = random_schedule(np.random.default_rng(seed), n=int(np.random.default_rng(seed).integers(2, 5)))
    short = sched.truncated(sched.n - 1)
    for s in all_sequences(short):
        total = sum(chain_probability(sched, s.labels + (l,)) for l in sched.final.labels)
        assert abs(total - chain_probability(short, s)) <= 1e-12


@prop
@given(seeds)
def test_chain_reduction(seed):
    # summing chain operators over one slot's labels removes that measurement
    rng = np.random.default_rng(seed)
    sched = random_schedule(rng, n=int(rng.integers(2, 5)))
    k = int(rng.integers(0, sched.n - 1))
    rest = [o.labels for j, o in enumerate(sched.observables) if j != k]
    for choice in itertools.islice(itertools.product(*rest), 6):
        total = 0
        for l in sched.observables[k].labels:
            labels = list(choice)
            labels.insert(k, l)
            total = total + chain_operator(sched, tuple(labels)).matrix
        projs = [sched.observables[j].projector(choice[j - (j > k)]) if j != k else None for j in range(sched.n - 1)]
        v = propagate(sched, projs)
        expected = sched.final.projector(choice[-1]) @ np.outer(v, sched.initial_state.conj())
        np.testing.assert_allclose(total, expected, atol=1e-12)


@prop
@given(seeds)
def test_reduced_amplitude_is_coherent_sum(seed):
    rng = np.random.default_rng(seed)
    sched = random_schedule(rng, n=int(rng.integers(2, 5)))
    k = int(rng.integers(0, sched.n - 1))
    label = sched.observables[k].labels[0]
    final = sched.final.labels[-1]
    coherent = 0j
    free = [o.labels if j != k else (label,) for j, o in enumerate(sched.observables[:-1])]
    for labels in itertools.product(*free):
        coherent += amplitude(sched, OutcomeSequence(labels + (final,), 0))
    r = reduced_amplitude(sched, {k: label}, final, 0)
    assert abs(r - coherent) <= 1e-12


@prop
@given(seeds)
def test_decoherence_functional_properties(seed):
    sched = random_schedule(np.random.default_rng(seed))
    seqs = list(all_sequences(sched))[:12]
    for a in seqs[:3]:
        assert abs(decoherence_functional(sched, a, a) - chain_probability(sched, a)) <= 1e-12
        for b in seqs[:3]:
            d_ab = decoherence_functional(sched, a, b)
            assert abs(d_ab - np.conj(decoherence_functional(sched, b, a))) <= 1e-12
    # the full functional sums to one
    seqs = list(all_sequences(sched))
    if len(seqs) <= 64:
        total = sum(decoherence_functional(sched, a, b) for a in seqs for b in seqs)
        assert abs(total - 1.0) <= 1e-10


def test_repeated_measurement_is_consistent():
    from qhist.model import H, SystemSchedule, basis_observable, basis_state

    obs = basis_observable(2)
    sched = SystemSchedule(2, basis_state("0"), (H, np.eye(2)), (obs, obs))
    res = is_consistent_set(sched, all_sequences(sched))
    assert res.consistent
    assert res.worst_ratio <= 1e-12


def test_interfering_histories_are_inconsistent():
    from qhist.model import H, SystemSchedule, basis_observable, basis_state

    obs = basis_observable(2)
    sched = SystemSchedule(2, basis_state("0"), (H, H), (obs, obs))
    # both branches of the intermediate measurement reach final 0 with amplitude 1/2
    d = decoherence_functional(sched, ("0", "0"), ("1", "0"))
    assert d == pytest.approx(0.25, abs=1e-12)
    res = is_consistent_set(sched, [("0", "0"), ("1", "0")])
    assert not res.consistent
    assert res.worst_ratio == pytest.approx(1.0)
    assert res.worst_value == pytest.approx(0.25)
