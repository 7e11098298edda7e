"""History vectors: generalized Born rules, collapse and time projection.

A history vector is stored as a sparse map from outcome sequences to
amplitudes.  Basis histories are orthonormal by construction, so the map is
the vector; projectors and the time projection act on keys directly.
"""

from __future__ import annotations

import fnmatch
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .chains import PRUNE_TOL, OutcomeSequence
from .linalg import MAX_HISTORY_BASIS
from .model import ScheduleError, SystemSchedule

__all__ = [
    "HistoryVector",
    "SequenceProjector",
    "ZeroProbabilityError",
    "BasisSizeError",
    "build_history_vector",
    "sequence_probability",
    "collapse",
    "time_project",
    "partial_sequence_probability",
    "conditional_probability",
    "state_at_final",
    "history_content",
    "history_tensor_product",
]


class ZeroProbabilityError(ValueError):
    """Projection onto an outcome that cannot occur."""


class BasisSizeError(ValueError):
    """The history basis exceeds the configured size cap."""


@dataclass(frozen=True)
class SequenceProjector:
    """Projector fixing outcomes at a subset of slots.

    ``fixed`` maps a 0-based slot index to the set of admitted labels; a
    single label is the usual case, several labels coarse-grain a device
    (e.g. "Alice saw 0" on a joint Alice/Bob measurement).
    """

    fixed: Mapping

    def __post_init__(self):
        fixed = {}
        for k, v in dict(self.fixed).items():
            fixed[int(k)] = frozenset([v] if isinstance(v, str) else v)
        object.__setattr__(self, "fixed", MappingProxyType(dict(sorted(fixed.items()))))

    @classmethod
    def of(cls, schedule: SystemSchedule, fixed: Mapping | None = None) -> "SequenceProjector":
        """Build from ``{slot: label | labels | pattern}`` with validation.

        Slots may be indices or time labels; a string containing ``?`` or
        ``*`` is matched against the slot's labels with shell wildcards.
        """
        out: dict[int, frozenset] = {}
        for key, value in (fixed or {}).items():
            k = schedule.slot(key)
            obs = schedule.observables[k]
            if isinstance(value, str):
                if any(c in value for c in "?*["):
                    labels = frozenset(l for l in obs.labels if fnmatch.fnmatchcase(l, value))
                    if not labels:
                        raise KeyError(f"pattern {value!r} matches no label at {schedule.times[k]}")
                else:
                    obs.index(value)
                    labels = frozenset([value])
            else:
                labels = frozenset(value)
                for l in labels:
                    obs.index(l)
            out[k] = out[k] & labels if k in out else labels
        return cls(out)

    @classmethod
    def full(cls, seq: OutcomeSequence, slots: Iterable[int]) -> "SequenceProjector":
        return cls({k: l for k, l in zip(slots, seq.labels)})

    def __and__(self, other: "SequenceProjector") -> "SequenceProjector":
        merged = dict(self.fixed)
        for k, v in other.fixed.items():
            merged[k] = merged[k] & v if k in merged else v
        return SequenceProjector(merged)

    @property
    def slots(self) -> tuple:
        return tuple(self.fixed)

    def matches(self, seq: OutcomeSequence, slots: tuple) -> bool:
        pos = {k: j for j, k in enumerate(slots)}
        for k, admitted in self.fixed.items():
            if k not in pos:
                raise ScheduleError(f"slot {k} is not represented in this history vector")
            if seq.labels[pos[k]] not in admitted:
                return False
        return True

    def describe(self, times: tuple | None = None) -> str:
        parts = []
        for k, labels in self.fixed.items():
            name = times[k] if times else f"slot{k}"
            parts.append(f"{name}={'|'.join(sorted(labels))}")
        return " ".join(parts) if parts else "(none)"


@dataclass(frozen=True, eq=False)
class HistoryVector:
    """Sparse history state over a set of retained slots.

    ``slots`` are 0-based indices into the schedule and always include the
    final slot.  Keys carry the final degeneracy index.
    """

    schedule: SystemSchedule
    slots: tuple
    amplitudes: Mapping

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(int(s) for s in self.slots))
        amps = {k: complex(v) for k, v in sorted(dict(self.amplitudes).items(), key=lambda kv: kv[0].sort_key())}
        object.__setattr__(self, "amplitudes", MappingProxyType(amps))

    def __len__(self):
        return len(self.amplitudes)

    def items(self):
        return self.amplitudes.items()

    def get(self, seq: OutcomeSequence) -> complex:
        return self.amplitudes.get(seq, 0j)

    def norm(self) -> float:
        return float(np.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values())))

    def vector(self, basis: list) -> np.ndarray:
        return np.array([self.get(k) for k in basis], dtype=complex)

    def _combine(self, other: "HistoryVector", a: complex, b: complex) -> "HistoryVector":
        if other.schedule is not self.schedule or other.slots != self.slots:
            raise ScheduleError("history vectors live in different spaces")
        out = {k: a * v for k, v in self.amplitudes.items()}
        for k, v in other.amplitudes.items():
            out[k] = out.get(k, 0j) + b * v
        return HistoryVector(self.schedule, self.slots, out)

    def __add__(self, other):
        return self._combine(other, 1, 1)

    def __sub__(self, other):
        return self._combine(other, 1, -1)

    def __mul__(self, c):
        return HistoryVector(self.schedule, self.slots, {k: c * v for k, v in self.amplitudes.items()})

    __rmul__ = __mul__

    @property
    def times(self) -> tuple:
        return tuple(self.schedule.times[k] for k in self.slots)


def build_history_vector(
    schedule: SystemSchedule,
    prune_tol: float = PRUNE_TOL,
    max_basis: int = MAX_HISTORY_BASIS,
) -> HistoryVector:
    """Amplitudes of every history with probability above ``prune_tol``.

    Amplitudes are computed by propagating ``|psi>`` through the slots
    (evolve, project, descend) so shared prefixes are computed once.
    """
    size = schedule.history_basis_size()
    if size > max_basis:
        raise BasisSizeError(f"history basis has {size} elements, cap is {max_basis}")
    n = schedule.n
    amps: dict[OutcomeSequence, complex] = {}

    def descend(k: int, v: np.ndarray, prefix: tuple):
        v = schedule.unitaries[k] @ v
        obs = schedule.observables[k]
        if k == n - 1:
            for label, basis in zip(obs.labels, obs.final_bases):
                for i, e in enumerate(basis):
                    a = complex(np.vdot(e, v))
                    if abs(a) ** 2 > prune_tol:
                        amps[OutcomeSequence(prefix + (label,), i)] = a
            return
        for label, p in zip(obs.labels, obs.projectors):
            w = p @ v
            if np.vdot(w, w).real > prune_tol:
                descend(k + 1, w, prefix + (label,))

    if schedule.final.final_bases is None:
        raise ScheduleError("final time slot needs an eigenbasis per label")
    descend(0, schedule.initial_state, ())
    return HistoryVector(schedule, tuple(range(n)), amps)


def _check_full(hv: HistoryVector, seq: OutcomeSequence) -> None:
    if len(seq.labels) != len(hv.slots):
        raise ScheduleError(f"sequence has {len(seq.labels)} labels, vector has {len(hv.slots)} slots")
    for k, label in zip(hv.slots, seq.labels):
        hv.schedule.observables[k].index(label)


def sequence_probability(hv: HistoryVector, seq) -> float:
    """``<Psi|P_a|Psi> = |A|^2``; without ``final_index`` the final label's indices are summed."""
    seq = seq if isinstance(seq, OutcomeSequence) else OutcomeSequence(tuple(seq))
    _check_full(hv, seq)
    if seq.final_index is not None:
        return abs(hv.get(seq)) ** 2
    return float(sum(abs(a) ** 2 for k, a in hv.items() if k.labels == seq.labels))


def _filter(hv: HistoryVector, proj: SequenceProjector) -> dict:
    return {k: a for k, a in hv.items() if proj.matches(k, hv.slots)}


def collapse(hv: HistoryVector, proj: SequenceProjector) -> HistoryVector:
    """Project onto the fixed outcomes and renormalize.

    The surviving amplitudes keep their phases.
    """
    kept = _filter(hv, proj)
    norm2 = sum(abs(a) ** 2 for a in kept.values())
    if norm2 <= 0.0:
        raise ZeroProbabilityError(f"outcome {proj.describe(hv.schedule.times)} has probability zero")
    scale = 1.0 / np.sqrt(norm2)
    return HistoryVector(hv.schedule, hv.slots, {k: a * scale for k, a in kept.items()})


def time_project(hv: HistoryVector, keep_slots: Iterable, prune_tol: float = PRUNE_TOL) -> HistoryVector:
    """Shorten to ``keep_slots`` (plus the final slot), summing coherently over dropped slots.

    The result is not renormalized.
    """
    sched = hv.schedule
    keep = {sched.slot(k) for k in keep_slots}
    keep.add(sched.n - 1)
    missing = keep - set(hv.slots)
    if missing:
        raise ScheduleError(f"slots {sorted(missing)} are not represented in this history vector")
    new_slots = tuple(k for k in hv.slots if k in keep)
    positions = [hv.slots.index(k) for k in new_slots]
    merged: dict[OutcomeSequence, complex] = {}
    for key, a in hv.items():
        short = OutcomeSequence(tuple(key.labels[j] for j in positions), key.final_index)
        merged[short] = merged.get(short, 0j) + a
    merged = {k: a for k, a in merged.items() if abs(a) ** 2 > prune_tol}
    return HistoryVector(sched, new_slots, merged)


def partial_sequence_probability(hv: HistoryVector, proj: SequenceProjector) -> float:
    """``<Psi| P_a Q P_a |Psi>`` for outcomes fixed at a subset of slots.

    Unfixed intermediate slots are summed coherently; the final slot, when
    unfixed, is summed incoherently.
    """
    filtered = HistoryVector(hv.schedule, hv.slots, _filter(hv, proj))
    short = time_project(filtered, proj.slots, prune_tol=0.0)
    return float(sum(abs(a) ** 2 for a in short.amplitudes.values()))


def conditional_probability(hv: HistoryVector, given: SequenceProjector, query: SequenceProjector) -> float:
    """Probability of ``query`` after collapsing on ``given``."""
    return partial_sequence_probability(collapse(hv, given), query)


def state_at_final(hv: HistoryVector) -> np.ndarray:
    """Ordinary state vector at ``t_n``: ``sum_i A(a_n, i) |a_n, i>``."""
    final = hv.schedule.final
    out = np.zeros(hv.schedule.dim, dtype=complex)
    for key, a in hv.items():
        out += a * final.basis(key.labels[-1])[key.final_index or 0]
    return out


def history_content(hv: HistoryVector) -> list:
    """Stored histories with their amplitudes, sorted by label sequence."""
    return sorted(hv.items(), key=lambda kv: kv[0].sort_key())


def history_tensor_product(hv_a: HistoryVector, hv_b: HistoryVector, joint: SystemSchedule) -> HistoryVector:
    """Product of subsystem history vectors at equal times.

    Labels concatenate slot by slot (A first) and final indices combine as
    in a Kronecker product, which matches ``joint`` when its observables are
    products of the subsystem ones (as for computational measurements).
    """
    if hv_a.slots != hv_b.slots:
        raise ScheduleError("subsystem history vectors cover different slots")
    out = {}
    for ka, a in hv_a.items():
        for kb, b in hv_b.items():
            labels = tuple(x + y for x, y in zip(ka.labels, kb.labels))
            ib = kb.final_index or 0
            index = (ka.final_index or 0) * len(hv_b.schedule.final.basis(kb.labels[-1])) + ib
            for k, l in zip(hv_a.slots, labels):
                joint.observables[k].index(l)
            out[OutcomeSequence(labels, index)] = a * b
    return HistoryVector(joint, hv_a.slots, out)
