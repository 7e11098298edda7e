import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhist.chains import OutcomeSequence, all_sequences, chain_probability
from qhist.histvec import (
    BasisSizeError,
    HistoryVector,
    SequenceProjector,
    ZeroProbabilityError,
    build_history_vector,
    collapse,
    conditional_probability,
    history_content,
    history_tensor_product,
    partial_sequence_probability,
    sequence_probability,
    state_at_final,
    time_project,
)
from qhist.model import H, ScheduleError, SystemSchedule, basis_state, computational_observable, embed_gate

from oracles import brute_partial_probability, literal_history_vector, random_schedule

seeds = st.integers(min_value=0, max_value=2**32 - 1)
prop = settings(max_examples=100, deadline=None)


def _random_fix(rng, sched, max_slots=None):
    slots = rng.permutation(sched.n)[: int(rng.integers(1, (max_slots or sched.n) + 1))]
    fixed = {}
    for k in sorted(slots):
        labels = sched.observables[k].labels
        m = int(rng.integers(1, len(labels) + 1))
        fixed[int(k)] = frozenset(rng.choice(labels, size=m, replace=False).tolist())
    return fixed


def test_entangler_content(entangler):
    hv = build_history_vector(entangler)
    content = [(k.labels, round(a.real, 12)) for k, a in history_content(hv)]
    assert content == [
        (("00", "00", "00", "00"), 0.5),
        (("00", "00", "00", "10"), 0.5),
        (("10", "11", "10", "00"), 0.5),
        (("10", "11", "10", "10"), -0.5),
    ]
    assert hv.norm() == pytest.approx(1.0)
    assert hv.times == ("t1", "t2", "t3", "t4")


@prop
@given(seeds)
def test_build_matches_literal_vector(seed):
    sched = random_schedule(np.random.default_rng(seed))
    hv = build_history_vector(sched, prune_tol=0.0)
    basis, psi = literal_history_vector(sched)
    keys = [OutcomeSequence(l, i) for l, i in basis]
    np.testing.assert_allclose(hv.vector(keys), psi, atol=1e-12)
    assert abs(hv.norm() - 1.0) <= 1e-10


@prop
@given(seeds)
def test_born_rule_against_chain(seed):
    sched = random_schedule(np.random.default_rng(seed))
    hv = build_history_vector(sched)
    for s in all_sequences(sched):
        assert abs(sequence_probability(hv, s) - chain_probability(sched, s)) <= 1e-10


def test_pruning_drops_small_histories(entangler):
    hv = build_history_vector(entangler)
    # exact zeros never enter the map
    assert len(hv) == 4
    assert hv.get(OutcomeSequence.of("00", "01", "00", "00", final_index=0)) == 0


def test_basis_cap(entangler):
    with pytest.raises(BasisSizeError):
        build_history_vector(entangler, max_basis=10)


def test_projector_patterns_and_coarse_labels(entangler):
    p = SequenceProjector.of(entangler, {"t1": "0?", "t4": ["00", "10"]})
    assert p.fixed[0] == frozenset({"00", "01"})
    both = p & SequenceProjector.of(entangler, {"t1": "?0"})
    assert both.fixed[0] == frozenset({"00"})
    assert "t1=00" in both.describe(entangler.times)
    with pytest.raises(KeyError):
        SequenceProjector.of(entangler, {"t1": "22"})
    with pytest.raises(KeyError):
        SequenceProjector.of(entangler, {"t1": "2*"})


def test_collapse_keeps_phase(entangler):
    hv = build_history_vector(entangler)
    c = collapse(hv, SequenceProjector.of(entangler, {"t1": "10"}))
    amps = [a for _, a in c.items()]
    np.testing.assert_allclose(amps, [1 / np.sqrt(2), -1 / np.sqrt(2)])
    with pytest.raises(ZeroProbabilityError):
        collapse(hv, SequenceProjector.of(entangler, {"t2": "01"}))


@prop
@given(seeds)
def test_collapse_idempotent(seed):
    rng = np.random.default_rng(seed)
    sched = random_schedule(rng)
    hv = build_history_vector(sched)
    proj = SequenceProjector(_random_fix(rng, sched))
    try:
        once = collapse(hv, proj)
    except ZeroProbabilityError:
        return
    twice = collapse(once, proj)
    assert set(once.amplitudes) == set(twice.amplitudes)
    for k, a in once.items():
        assert abs(twice.get(k) - a) <= 1e-12
    assert abs(once.norm() - 1.0) <= 1e-10


@prop
@given(seeds)
def test_partial_probability_against_dense_q(seed):
    rng = np.random.default_rng(seed)
    sched = random_schedule(rng)
    if sched.history_basis_size() > 300:
        sched = sched.truncated(min(sched.n, 2))
    fixed = _random_fix(rng, sched)
    hv = build_history_vector(sched, prune_tol=0.0)
    got = partial_sequence_probability(hv, SequenceProjector(fixed))
    assert abs(got - brute_partial_probability(sched, fixed)) <= 1e-10


@prop
@given(seeds)
def test_partial_probability_with_final_fixed_only_is_final_marginal(seed):
    # fixing only the final slot sums all earlier slots coherently: plain Born rule at t_n
    sched = random_schedule(np.random.default_rng(seed))
    hv = build_history_vector(sched)
    psi_n = sched.evolution() @ sched.initial_state
    for label in sched.final.labels:
        p = partial_sequence_probability(hv, SequenceProjector({sched.n - 1: label}))
        expected = np.vdot(psi_n, sched.final.projector(label) @ psi_n).real
        assert abs(p - expected) <= 1e-10


def test_time_project_merges_coherently(entangler):
    hv = build_history_vector(entangler)
    short = time_project(hv, [])
    assert short.slots == (3,)
    # the t4=10 amplitudes cancel and get pruned
    assert [k.labels for k, _ in short.items()] == [("00",)]
    assert short.get(OutcomeSequence(("00",), 0)) == pytest.approx(1.0)
    with pytest.raises(ScheduleError):
        time_project(short, ["t1"])


def test_time_project_is_not_renormalized(entangler):
    hv = build_history_vector(entangler)
    filtered = collapse(hv, SequenceProjector.of(entangler, {"t1": "00"})) * (1 / np.sqrt(2))
    short = time_project(filtered, ["t1"])
    assert short.norm() == pytest.approx(1 / np.sqrt(2))


def test_conditional_probability_teleport(teleport):
    hv = build_history_vector(teleport)
    alice00 = SequenceProjector.of(teleport, {"t3": ["000", "001"]})
    bob0 = SequenceProjector.of(teleport, {"t3": "??0"})
    assert partial_sequence_probability(hv, alice00) == pytest.approx(0.25, abs=1e-12)
    assert conditional_probability(hv, alice00, bob0) == pytest.approx(0.36, abs=1e-12)


def test_state_at_final(teleport):
    hv = build_history_vector(teleport)
    c = collapse(hv, SequenceProjector.of(teleport, {"t3": "00?"}))
    np.testing.assert_allclose(state_at_final(c), np.kron(basis_state("00"), [0.6, 0.8]), atol=1e-10)
    np.testing.assert_allclose(state_at_final(hv), teleport.evolution() @ teleport.initial_state, atol=1e-12)


def test_linear_structure(entangler):
    hv = build_history_vector(entangler)
    zero = hv - hv
    assert zero.norm() == 0
    assert (hv + hv).norm() == pytest.approx(2.0)
    assert (2 * hv).norm() == pytest.approx(2.0)
    other = build_history_vector(entangler.truncated(2))
    with pytest.raises(ScheduleError):
        hv + other


def test_tensor_product_of_independent_qubits():
    one = computational_observable(1, [0])
    a = SystemSchedule(2, basis_state("0"), (H, H), (one, one))
    b = SystemSchedule(2, basis_state("1"), (np.eye(2), H), (one, one))
    two = computational_observable(2, [0, 1])
    joint = SystemSchedule(
        4, basis_state("01"), (embed_gate(H, [0], 2), np.kron(H, H)), (two, two), factors=(2, 2),
    )
    direct = build_history_vector(joint)
    product = history_tensor_product(build_history_vector(a), build_history_vector(b), joint)
    assert set(direct.amplitudes) == set(product.amplitudes)
    for k, amp in direct.items():
        assert abs(product.get(k) - amp) <= 1e-12


def test_history_vector_keys_sorted(teleport):
    hv = build_history_vector(teleport)
    keys = [k.labels for k in hv.amplitudes]
    assert keys == sorted(keys)
    assert len(hv) == 8
    assert isinstance(hv, HistoryVector)
