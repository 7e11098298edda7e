"""System description: initial state, unitary steps, measurement schedule.

A :class:`SystemSchedule` fixes everything a history computation needs: the
state at ``t0``, one unitary per step ``U(t_k, t_{k-1})`` and one
:class:`ObservableSpec` per measurement time.  Outcome labels are opaque
strings; degeneracy lives in projector rank.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .linalg import DEFAULT_TOL, DimensionError, as_matrix, as_vector, is_unitary, max_abs

__all__ = [
    "ObservableSpec",
    "SystemSchedule",
    "Violation",
    "ScheduleError",
    "validate",
    "H",
    "X",
    "Z",
    "CNOT",
    "identity",
    "GATES",
    "embed_gate",
    "computational_observable",
    "basis_observable",
    "identity_observable",
    "basis_state",
]


class ScheduleError(ValueError):
    """Raised for schedules that fail validation or are used inconsistently."""

    def __init__(self, message: str, violations: Sequence["Violation"] = ()):
        super().__init__(message)
        self.violations = list(violations)


# --------------------------------------------------------------------------
# gate library

_S2 = 1.0 / math.sqrt(2.0)

H = np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
    dtype=complex,
)
CZ = np.diag([1, 1, 1, -1]).astype(complex)


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex)


GATES = {"H": H, "X": X, "Z": Z, "CNOT": CNOT, "CZ": CZ, "I": identity(2)}


def embed_gate(gate, wires: Sequence[int], n_qubits: int) -> np.ndarray:
    """Lift a ``k``-qubit gate to ``n_qubits`` wires.

    Wire 0 is the most significant qubit.  ``wires[j]`` receives the j-th
    (most significant first) qubit of ``gate``.
    """
    gate = as_matrix(gate)
    wires = [int(w) for w in wires]
    k = len(wires)
    if gate.shape != (2**k, 2**k):
        raise DimensionError(f"gate of shape {gate.shape} does not act on {k} wire(s)")
    if len(set(wires)) != k:
        raise ValueError(f"repeated wire in {wires}")
    if any(w < 0 or w >= n_qubits for w in wires):
        raise ValueError(f"wires {wires} out of range for {n_qubits} qubit(s)")

    rest = [w for w in range(n_qubits) if w not in wires]
    full = np.kron(gate, identity(2 ** len(rest)))
    # axes of `full` are ordered (wires..., rest...); move them to 0..n-1
    order = wires + rest
    perm = np.argsort(order)
    t = full.reshape([2] * (2 * n_qubits))
    t = t.transpose(list(perm) + [n_qubits + p for p in perm])
    return t.reshape(2**n_qubits, 2**n_qubits)


def basis_state(bits: str) -> np.ndarray:
    """Computational basis vector ``|bits>``."""
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1.0
    return v


# --------------------------------------------------------------------------
# observables


@dataclass(frozen=True, eq=False)
class ObservableSpec:
    """Projective measurement at one time slot.

    Parameters
    ----------
    labels : tuple of str
        Outcome labels, one per projector.
    projectors : tuple of ndarray
        Orthogonal projectors, mutually orthogonal and summing to identity.
    final_bases : tuple of tuple of ndarray, optional
        Per label, an orthonormal basis of the projector range.  Required on
        the last slot of a schedule.
    wires : tuple of int, optional
        Measured wires when this is a computational-basis device on qubits.
    """

    labels: tuple
    projectors: tuple
    final_bases: tuple | None = None
    wires: tuple | None = None
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))
        object.__setattr__(self, "projectors", tuple(as_matrix(p) for p in self.projectors))
        if self.final_bases is not None:
            fb = tuple(tuple(as_vector(v) for v in basis) for basis in self.final_bases)
            object.__setattr__(self, "final_bases", fb)
        if len(self.labels) != len(self.projectors):
            raise ValueError("number of labels and projectors differ")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"duplicate outcome labels in {self.labels}")
        if self.final_bases is not None and len(self.final_bases) != len(self.labels):
            raise ValueError("final_bases must give one basis per label")
        object.__setattr__(self, "_index", {l: i for i, l in enumerate(self.labels)})

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"unknown outcome label {label!r}; valid: {', '.join(self.labels)}") from None

    def projector(self, label: str) -> np.ndarray:
        return self.projectors[self.index(label)]

    def basis(self, label: str) -> tuple:
        if self.final_bases is None:
            raise ScheduleError("observable carries no final eigenbasis")
        return self.final_bases[self.index(label)]

    def rank(self, label: str) -> int:
        return int(round(np.trace(self.projector(label)).real))

    def with_final_bases(self) -> "ObservableSpec":
        """Copy of this observable with an eigenbasis computed for every label."""
        if self.final_bases is not None:
            return self
        bases = []
        for p in self.projectors:
            w, v = np.linalg.eigh(0.5 * (p + p.conj().T))
            bases.append(tuple(v[:, k] for k in range(len(w)) if w[k] > 0.5))
        return replace(self, final_bases=tuple(bases))


def computational_observable(n_qubits: int, measured_wires: Sequence[int]) -> ObservableSpec:
    """Computational-basis measurement of a subset of wires.

    Labels are bitstrings over ``measured_wires`` (in the order given).  The
    final eigenbasis of each label is the set of computational basis states
    compatible with it, in increasing index order.
    """
    wires = tuple(int(w) for w in measured_wires)
    if len(set(wires)) != len(wires):
        raise ValueError(f"repeated wire in {wires}")
    if any(w < 0 or w >= n_qubits for w in wires):
        raise ValueError(f"wires {wires} out of range for {n_qubits} qubit(s)")
    dim = 2**n_qubits
    labels, projectors, bases = [], [], []
    for bits in itertools.product("01", repeat=len(wires)):
        label = "".join(bits)
        members = [
            s for s in range(dim)
            if all(format(s, f"0{n_qubits}b")[w] == b for w, b in zip(wires, bits))
        ]
        diag = np.zeros(dim)
        diag[members] = 1.0
        labels.append(label)
        projectors.append(np.diag(diag).astype(complex))
        bases.append(tuple(np.eye(dim, dtype=complex)[s] for s in members))
    return ObservableSpec(tuple(labels), tuple(projectors), tuple(bases), wires)


def basis_observable(dim: int) -> ObservableSpec:
    """Nondegenerate measurement in the standard basis of a ``dim``-level system."""
    e = np.eye(dim, dtype=complex)
    return ObservableSpec(
        tuple(str(k) for k in range(dim)),
        tuple(np.outer(e[k], e[k]) for k in range(dim)),
        tuple((e[k],) for k in range(dim)),
    )


def identity_observable(dim: int, label: str = "I") -> ObservableSpec:
    """The trivial device: one outcome, projector = identity."""
    e = np.eye(dim, dtype=complex)
    return ObservableSpec((label,), (e,), (tuple(e[k] for k in range(dim)),))


# --------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class Violation:
    field: str
    index: int | None
    residual: float
    message: str

    def __str__(self):
        where = self.field if self.index is None else f"{self.field}[{self.index}]"
        return f"{where}: {self.message} (residual {self.residual:.3e})"


@dataclass(frozen=True, eq=False)
class SystemSchedule:
    """Initial state, evolution and measurements at ``t_1 ... t_n``.

    ``unitaries[k]`` evolves from the previous time to ``times[k]`` and
    ``observables[k]`` is measured at ``times[k]``.  ``factors`` lists the
    subsystem dimensions (empty means no factorization).
    """

    dim: int
    initial_state: np.ndarray
    unitaries: tuple
    observables: tuple
    times: tuple = ()
    factors: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "initial_state", as_vector(self.initial_state))
        object.__setattr__(self, "unitaries", tuple(as_matrix(u) for u in self.unitaries))
        object.__setattr__(self, "observables", tuple(self.observables))
        object.__setattr__(self, "factors", tuple(int(f) for f in self.factors))
        times = tuple(self.times) or tuple(f"t{k + 1}" for k in range(len(self.observables)))
        object.__setattr__(self, "times", tuple(str(t) for t in times))

    @property
    def n(self) -> int:
        return len(self.observables)

    @property
    def final(self) -> ObservableSpec:
        return self.observables[-1]

    @property
    def n_qubits(self) -> int | None:
        q = int(round(math.log2(self.dim)))
        return q if 2**q == self.dim else None

    def slot(self, key) -> int:
        """Resolve a slot given as 0-based int or time label (``"t3"``)."""
        if isinstance(key, (int, np.integer)):
            k = int(key)
            if not 0 <= k < self.n:
                raise KeyError(f"slot {k} out of range 0..{self.n - 1}")
            return k
        try:
            return self.times.index(str(key))
        except ValueError:
            raise KeyError(f"unknown time {key!r}; valid: {', '.join(self.times)}") from None

    def history_basis_size(self) -> int:
        size = self.dim
        for obs in self.observables[:-1]:
            size *= len(obs.labels)
        return size

    def evolution(self, upto: int | None = None) -> np.ndarray:
        """``U(t_k, t_0)`` for slot ``k = upto`` (default: last slot)."""
        upto = self.n - 1 if upto is None else upto
        u = identity(self.dim)
        for step in self.unitaries[: upto + 1]:
            u = step @ u
        return u

    def truncated(self, n: int) -> "SystemSchedule":
        """Schedule keeping only the first ``n`` measurement times."""
        if not 1 <= n <= self.n:
            raise ValueError(f"cannot truncate {self.n} slots to {n}")
        obs = list(self.observables[:n])
        obs[-1] = obs[-1].with_final_bases()
        return replace(self, unitaries=self.unitaries[:n], observables=tuple(obs), times=self.times[:n])

    def with_observable(self, slot, obs: ObservableSpec) -> "SystemSchedule":
        k = self.slot(slot)
        observables = list(self.observables)
        observables[k] = obs
        return replace(self, observables=tuple(observables))

    def validate(self, tol: float = DEFAULT_TOL) -> list:
        return validate(self, tol)


def validate(schedule: SystemSchedule, tol: float = DEFAULT_TOL) -> list:
    """List every violated schedule invariant; empty when the schedule is valid."""
    out: list[Violation] = []
    d = schedule.dim
    psi = schedule.initial_state
    if psi.shape != (d,):
        out.append(Violation("initial_state", None, float("inf"), f"expected length {d}, got {psi.shape[0]}"))
    else:
        r = abs(np.linalg.norm(psi) - 1.0)
        if r > tol:
            out.append(Violation("initial_state", None, r, "state is not normalized"))
    if schedule.factors and math.prod(schedule.factors) != d:
        out.append(Violation("factors", None, float("inf"), f"product of {list(schedule.factors)} != dim {d}"))
    if schedule.n == 0:
        out.append(Violation("observables", None, float("inf"), "at least one measurement time is required"))
    if len(schedule.unitaries) != schedule.n:
        out.append(Violation(
            "unitaries", None, float("inf"),
            f"{len(schedule.unitaries)} unitaries for {schedule.n} measurement times",
        ))
    if len(schedule.times) != schedule.n or len(set(schedule.times)) != len(schedule.times):
        out.append(Violation("times", None, float("inf"), "time labels must be unique, one per slot"))

    for k, u in enumerate(schedule.unitaries):
        if u.shape != (d, d):
            out.append(Violation("unitaries", k, float("inf"), f"shape {u.shape} != ({d}, {d})"))
        elif not is_unitary(u, tol):
            out.append(Violation("unitaries", k, max_abs(u.conj().T @ u - np.eye(d)), "not unitary"))

    for k, obs in enumerate(schedule.observables):
        out.extend(_observable_violations(obs, k, d, tol, final=(k == schedule.n - 1)))
    return out


def _observable_violations(obs: ObservableSpec, k: int, d: int, tol: float, final: bool) -> list:
    out = []
    name = "observables"
    if any(p.shape != (d, d) for p in obs.projectors):
        return [Violation(name, k, float("inf"), f"projector shape differs from ({d}, {d})")]
    for a, p in enumerate(obs.projectors):
        herm = max_abs(p - p.conj().T)
        if herm > tol:
            out.append(Violation(name, k, herm, f"projector {obs.labels[a]!r} is not Hermitian"))
        idem = max_abs(p @ p - p)
        if idem > tol:
            out.append(Violation(name, k, idem, f"projector {obs.labels[a]!r} is not idempotent"))
        for b in range(a + 1, len(obs.projectors)):
            cross = max_abs(p @ obs.projectors[b])
            if cross > tol:
                out.append(Violation(
                    name, k, cross, f"projectors {obs.labels[a]!r} and {obs.labels[b]!r} overlap",
                ))
    comp = max_abs(sum(obs.projectors) - np.eye(d))
    if comp > tol:
        out.append(Violation(name, k, comp, "projectors do not sum to identity (completeness)"))

    if obs.final_bases is None:
        if final:
            out.append(Violation(name, k, float("inf"), "final time slot needs an eigenbasis per label"))
        return out
    for a, basis in enumerate(obs.final_bases):
        if not basis:
            out.append(Violation(name, k, float("inf"), f"empty eigenbasis for {obs.labels[a]!r}"))
            continue
        v = np.column_stack(basis)
        if v.shape[0] != d:
            out.append(Violation(name, k, float("inf"), f"basis vectors for {obs.labels[a]!r} have wrong length"))
            continue
        ortho = max_abs(v.conj().T @ v - np.eye(v.shape[1]))
        if ortho > tol:
            out.append(Violation(name, k, ortho, f"eigenbasis of {obs.labels[a]!r} is not orthonormal"))
        span = max_abs(v @ v.conj().T - obs.projectors[a])
        if span > tol:
            out.append(Violation(name, k, span, f"eigenbasis of {obs.labels[a]!r} does not span its projector"))
    return out
