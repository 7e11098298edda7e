"""Chain operators, history amplitudes and the decoherence functional.

For a sequence of outcomes ``a = (a_1, ..., a_n)`` the chain operator is

    C = P_{a_n} U_n P_{a_{n-1}} ... P_{a_1} U_1 |psi><psi|

and ``Tr(C C^dagger)`` is the probability of observing the sequence.  The
amplitude of a history is the final bra ``<a_n, i|`` applied to the same
product acting on ``|psi>``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np

from .linalg import DEFAULT_TOL
from .model import ScheduleError, SystemSchedule

__all__ = [
    "OutcomeSequence",
    "ChainOperator",
    "ConsistencyResult",
    "PRUNE_TOL",
    "all_sequences",
    "chain_operator",
    "chain_probability",
    "amplitude",
    "reduced_amplitude",
    "decoherence_functional",
    "is_consistent_set",
    "propagate",
]

PRUNE_TOL = 1e-12


@dataclass(frozen=True)
class OutcomeSequence:
    """Outcome labels at consecutive slots, plus an optional final degeneracy index."""

    labels: tuple
    final_index: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))

    @classmethod
    def of(cls, *labels, final_index: int | None = None) -> "OutcomeSequence":
        if len(labels) == 1 and not isinstance(labels[0], str):
            labels = tuple(labels[0])
        return cls(tuple(labels), final_index)

    def sort_key(self):
        return (self.labels, -1 if self.final_index is None else self.final_index)

    def __len__(self):
        return len(self.labels)

    def __str__(self):
        s = ",".join(self.labels)
        return s if self.final_index is None else f"{s}#{self.final_index}"


@dataclass(frozen=True, eq=False)
class ChainOperator:
    matrix: np.ndarray
    sequence: OutcomeSequence


@dataclass(frozen=True)
class ConsistencyResult:
    consistent: bool
    worst_pair: tuple | None
    worst_value: complex
    worst_ratio: float

    def __bool__(self):
        return self.consistent


def _check_sequence(schedule: SystemSchedule, seq: OutcomeSequence) -> None:
    if len(seq.labels) != schedule.n:
        raise ScheduleError(f"sequence has {len(seq.labels)} labels, schedule has {schedule.n} slots")
    for obs, label in zip(schedule.observables, seq.labels):
        obs.index(label)


def _as_sequence(seq) -> OutcomeSequence:
    return seq if isinstance(seq, OutcomeSequence) else OutcomeSequence(tuple(seq))


def all_sequences(schedule: SystemSchedule) -> Iterator[OutcomeSequence]:
    """Every label sequence, in the observables' label order."""
    for labels in itertools.product(*(obs.labels for obs in schedule.observables)):
        yield OutcomeSequence(labels)


def chain_operator(schedule: SystemSchedule, seq) -> ChainOperator:
    """The literal operator product ``P_n U_n ... P_1 U_1 P_psi``."""
    seq = _as_sequence(seq)
    if seq.final_index is not None:
        raise ScheduleError("chain operators use the full final projector; drop final_index")
    _check_sequence(schedule, seq)
    psi = schedule.initial_state
    c = np.outer(psi, psi.conj())
    for u, obs, label in zip(schedule.unitaries, schedule.observables, seq.labels):
        c = obs.projector(label) @ (u @ c)
    return ChainOperator(c, seq)


def chain_probability(schedule: SystemSchedule, seq) -> float:
    c = chain_operator(schedule, seq).matrix
    return float(np.real(np.trace(c @ c.conj().T)))


def decoherence_functional(schedule: SystemSchedule, seq_a, seq_b) -> complex:
    """``D(a, b) = Tr(C_a C_b^dagger)``."""
    ca = chain_operator(schedule, seq_a).matrix
    cb = chain_operator(schedule, seq_b).matrix
    return complex(np.trace(ca @ cb.conj().T))


def is_consistent_set(schedule: SystemSchedule, seqs: Iterable, tol: float = DEFAULT_TOL) -> ConsistencyResult:
    """Check ``Re D(a, b) = 0`` for every pair of distinct sequences.

    The comparison is relative: ``|Re D(a, b)| <= tol * max(p(a), p(b), 1e-15)``.
    The returned witness is the pair with the largest ratio; its complex
    ``D`` value is exposed so callers can impose the stronger ``D = 0``.
    """
    seqs = [_as_sequence(s) for s in seqs]
    chains = [chain_operator(schedule, s).matrix for s in seqs]
    probs = [float(np.real(np.trace(c @ c.conj().T))) for c in chains]
    worst_pair, worst_value, worst_ratio = None, 0j, 0.0
    for i, j in itertools.combinations(range(len(seqs)), 2):
        if seqs[i] == seqs[j]:
            continue
        d = complex(np.trace(chains[i] @ chains[j].conj().T))
        ratio = abs(d.real) / max(probs[i], probs[j], 1e-15)
        if worst_pair is None or ratio > worst_ratio:
            worst_pair, worst_value, worst_ratio = (seqs[i], seqs[j]), d, ratio
    return ConsistencyResult(worst_ratio <= tol, worst_pair, worst_value, worst_ratio)


def propagate(schedule: SystemSchedule, projectors: Iterable) -> np.ndarray:
    """``U_n P_{n-1} U_{n-1} ... P_1 U_1 |psi>`` with ``projectors`` for slots ``1..n-1``.

    ``None`` entries stand for the identity (slot not measured).
    """
    v = schedule.initial_state
    projectors = list(projectors)
    for k, u in enumerate(schedule.unitaries):
        v = u @ v
        if k < schedule.n - 1 and projectors[k] is not None:
            v = projectors[k] @ v
    return v


def amplitude(schedule: SystemSchedule, seq) -> complex:
    """History amplitude ``<a_n, i| U_n P_{a_{n-1}} ... P_{a_1} U_1 |psi>``.

    ``seq.final_index`` selects the final eigenvector; it may be omitted
    only when the final label is nondegenerate.
    """
    seq = _as_sequence(seq)
    _check_sequence(schedule, seq)
    basis = schedule.final.basis(seq.labels[-1])
    i = seq.final_index
    if i is None:
        if len(basis) != 1:
            raise ScheduleError(f"final label {seq.labels[-1]!r} is degenerate; give final_index")
        i = 0
    projs = [obs.projector(l) for obs, l in zip(schedule.observables[:-1], seq.labels[:-1])]
    v = propagate(schedule, projs)
    return complex(np.vdot(basis[i], v))


def reduced_amplitude(
    schedule: SystemSchedule,
    fixed: Mapping,
    final_label: str,
    final_index: int | None = None,
) -> complex:
    """Amplitude with only the slots in ``fixed`` measured before ``t_n``.

    Unfixed intermediate slots carry the identity, which equals the coherent
    sum of full amplitudes over their labels.
    """
    fixed = {schedule.slot(k): v for k, v in fixed.items()}
    if schedule.n - 1 in fixed:
        raise ScheduleError("the final slot enters as a bra; pass it as final_label")
    projs = [
        schedule.observables[k].projector(fixed[k]) if k in fixed else None
        for k in range(schedule.n - 1)
    ]
    basis = schedule.final.basis(final_label)
    i = final_index
    if i is None:
        if len(basis) != 1:
            raise ScheduleError(f"final label {final_label!r} is degenerate; give final_index")
        i = 0
    return complex(np.vdot(basis[i], propagate(schedule, projs)))
