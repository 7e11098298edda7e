"""History density matrices, subsystem reduction and history entropy.

A :class:`HistoryDensityMatrix` is a dense matrix over an explicit list of
basis histories.  Joint histories of a bipartite system are split into
Alice/Bob sequences by a :class:`SubsystemSplit`, which is derived from the
schedule by factoring every projector across the chosen partition.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .chains import OutcomeSequence
from .histvec import HistoryVector, SequenceProjector, ZeroProbabilityError
from .linalg import DEFAULT_TOL, hermitian_eigenvalues, max_abs
from .model import ObservableSpec, ScheduleError, SystemSchedule

__all__ = [
    "HistoryDensityMatrix",
    "SubsystemSplit",
    "NonFactorableError",
    "PositivityError",
    "ProductTest",
    "EIG_TOL",
    "from_pure",
    "from_ensemble",
    "measure_update",
    "unknown_result_update",
    "sequence_probability_rho",
    "partial_probability_rho",
    "reduce",
    "marginal_probability",
    "entropy",
    "is_product_history",
    "schmidt_ranks",
    "intermediate_entanglement_witness",
    "pure_vs_mixed",
]

EIG_TOL = 1e-12
POSITIVITY_TOL = 1e-9


class NonFactorableError(ValueError):
    """A slot's projectors are not products across the requested split."""


class PositivityError(ValueError):
    """A density matrix has a clearly negative eigenvalue."""


@dataclass(frozen=True, eq=False)
class HistoryDensityMatrix:
    """Density matrix over ``basis`` (a tuple of outcome sequences).

    ``part`` is ``None`` for the full system and ``"A"``/``"B"`` for a
    reduced matrix, whose keys hold local labels.
    """

    schedule: SystemSchedule
    slots: tuple
    basis: tuple
    matrix: np.ndarray
    part: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "basis", tuple(self.basis))
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))
        n = len(self.basis)
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match basis of {n}")

    @property
    def dim(self) -> int:
        return len(self.basis)

    def index(self, seq: OutcomeSequence) -> int:
        return self.basis.index(seq)

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def eigenvalues(self, tol: float = DEFAULT_TOL) -> np.ndarray:
        return hermitian_eigenvalues(self.matrix, tol)

    def entry(self, a: OutcomeSequence, b: OutcomeSequence) -> complex:
        try:
            return complex(self.matrix[self.index(a), self.index(b)])
        except ValueError:
            return 0j

    def check(self, tol: float = DEFAULT_TOL) -> list:
        """Problems with Hermiticity, unit trace or positivity (empty if none)."""
        problems = []
        herm = max_abs(self.matrix - self.matrix.conj().T)
        if herm > tol:
            problems.append(f"not Hermitian (residual {herm:.3e})")
            return problems
        if abs(self.trace() - 1.0) > 1e-8:
            problems.append(f"trace is {self.trace():.12g}")
        low = float(self.eigenvalues(tol)[-1])
        if low < -POSITIVITY_TOL:
            problems.append(f"negative eigenvalue {low:.3e}")
        return problems

    def as_dict(self) -> dict:
        return {
            (a, b): complex(self.matrix[i, j])
            for i, a in enumerate(self.basis)
            for j, b in enumerate(self.basis)
            if self.matrix[i, j] != 0
        }


# --------------------------------------------------------------------------
# construction and measurement updates


def from_pure(hv: HistoryVector) -> HistoryDensityMatrix:
    """``|Psi><Psi|``."""
    basis = tuple(k for k, _ in hv.items())
    v = hv.vector(list(basis))
    return HistoryDensityMatrix(hv.schedule, hv.slots, basis, np.outer(v, v.conj()))


def from_ensemble(pairs: Iterable, tol: float = DEFAULT_TOL) -> HistoryDensityMatrix:
    """``sum_i w_i |Psi_i><Psi_i|`` over the union of the stored histories."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty ensemble")
    weights = [float(w) for w, _ in pairs]
    if any(w <= 0 for w in weights):
        raise ValueError("ensemble weights must be positive")
    if abs(sum(weights) - 1.0) > tol:
        raise ValueError(f"ensemble weights sum to {sum(weights):.12g}, not 1")
    first = pairs[0][1]
    for _, hv in pairs[1:]:
        if hv.schedule is not first.schedule or hv.slots != first.slots:
            raise ScheduleError("ensemble members live in different history spaces")
    keys = sorted({k for _, hv in pairs for k, _ in hv.items()}, key=OutcomeSequence.sort_key)
    rho = np.zeros((len(keys), len(keys)), dtype=complex)
    for w, hv in pairs:
        v = hv.vector(keys)
        rho += w * np.outer(v, v.conj())
    return HistoryDensityMatrix(first.schedule, first.slots, tuple(keys), rho)


def _mask(rho: HistoryDensityMatrix, proj: SequenceProjector) -> np.ndarray:
    return np.array([proj.matches(k, rho.slots) for k in rho.basis], dtype=bool)


def measure_update(rho: HistoryDensityMatrix, proj: SequenceProjector) -> HistoryDensityMatrix:
    """``P rho P / Tr(rho P)``, restricted to the histories admitted by ``proj``."""
    keep = _mask(rho, proj)
    sub = rho.matrix[np.ix_(keep, keep)]
    p = float(np.trace(sub).real)
    if p <= 0.0:
        raise ZeroProbabilityError(f"outcome {proj.describe(rho.schedule.times)} has probability zero")
    basis = tuple(k for k, m in zip(rho.basis, keep) if m)
    return replace(rho, basis=basis, matrix=sub / p)


def _slot_values(rho: HistoryDensityMatrix, slots: Sequence[int]) -> list:
    pos = [rho.slots.index(k) for k in slots]
    return [tuple(k.labels[j] for j in pos) for k in rho.basis]


def unknown_result_update(rho: HistoryDensityMatrix, slots: Iterable | None = None) -> HistoryDensityMatrix:
    """``sum_a P_a rho P_a`` over all outcomes at ``slots`` (default: every slot).

    Coherences between histories that differ at any listed slot are removed;
    with every slot listed and a nondegenerate final slot the result is the
    diagonal of ``rho``.
    """
    slots = rho.slots if slots is None else tuple(rho.schedule.slot(s) for s in slots)
    values = _slot_values(rho, slots)
    same = np.array([[a == b for b in values] for a in values], dtype=bool)
    return replace(rho, matrix=np.where(same, rho.matrix, 0))


def _as_projector(rho: HistoryDensityMatrix, proj) -> SequenceProjector:
    if isinstance(proj, SequenceProjector):
        return proj
    seq = proj if isinstance(proj, OutcomeSequence) else OutcomeSequence(tuple(proj))
    return SequenceProjector.full(seq, rho.slots)


def sequence_probability_rho(rho: HistoryDensityMatrix, proj) -> float:
    """``Tr(rho P)``."""
    if isinstance(proj, OutcomeSequence) and proj.final_index is not None:
        return float(rho.entry(proj, proj).real)
    keep = _mask(rho, _as_projector(rho, proj))
    return float(np.real(np.trace(rho.matrix[np.ix_(keep, keep)])))


def _q_groups(rho: HistoryDensityMatrix, proj: SequenceProjector) -> dict:
    final = rho.schedule.n - 1
    kept = set(proj.slots) | {final}
    pos = [j for j, k in enumerate(rho.slots) if k in kept]
    groups: dict[tuple, list] = defaultdict(list)
    for i, key in enumerate(rho.basis):
        if proj.matches(key, rho.slots):
            groups[(tuple(key.labels[j] for j in pos), key.final_index)].append(i)
    return groups


def partial_probability_rho(rho: HistoryDensityMatrix, proj: SequenceProjector) -> float:
    """``Tr(rho P Q P)``: rho summed over pairs of admitted histories that agree
    on the fixed slots and on the final slot."""
    total = 0j
    for idx in _q_groups(rho, proj).values():
        total += rho.matrix[np.ix_(idx, idx)].sum()
    return float(total.real)


def pure_vs_mixed(hv: HistoryVector, proj: SequenceProjector) -> tuple:
    """Partial-sequence probability for ``|Psi><Psi|`` and for its fully dephased mixture."""
    pure = from_pure(hv)
    return partial_probability_rho(pure, proj), partial_probability_rho(unknown_result_update(pure), proj)


# --------------------------------------------------------------------------
# subsystem splits


def _dims(factors: Sequence[int], part: Sequence[int]) -> int:
    return math.prod(factors[k] for k in part)


def _permute_operator(op: np.ndarray, factors: Sequence[int], order: Sequence[int]) -> np.ndarray:
    m = len(factors)
    t = op.reshape(tuple(factors) * 2)
    return t.transpose(list(order) + [m + o for o in order])


def _factor_projector(op: np.ndarray, factors, part_a, part_b, tol: float):
    """Return ``(P_A, P_B)`` with ``op = P_A (x) P_B`` across the split."""
    da, db = _dims(factors, part_a), _dims(factors, part_b)
    q = _permute_operator(op, factors, list(part_a) + list(part_b)).reshape(da, db, da, db)
    s = np.linalg.svd(q.transpose(0, 2, 1, 3).reshape(da * da, db * db), compute_uv=False)
    if len(s) > 1 and s[1] > tol * max(s[0], 1.0):
        raise NonFactorableError(f"projector has operator Schmidt rank > 1 (s1/s0 = {s[1] / s[0]:.3e})")
    xa = np.einsum("ibjb->ij", q)
    xb = np.einsum("aiaj->ij", q)
    rb = round(float(np.linalg.eigvalsh(0.5 * (xa + xa.conj().T))[-1]))
    ra = round(float(np.linalg.eigvalsh(0.5 * (xb + xb.conj().T))[-1]))
    return xa / rb, xb / ra


def _bit_name(p: np.ndarray) -> str | None:
    d = p.shape[0]
    k = int(round(math.log2(d)))
    if 2**k != d or max_abs(p - np.diag(np.diag(p))) > 1e-9:
        return None
    support = [s for s in range(d) if abs(p[s, s] - 1) < 1e-9]
    bits = [format(s, f"0{k}b") for s in support]
    name = "".join(c for j, c in enumerate(bits[0]) if all(b[j] == c for b in bits))
    return name or "-"


def _group(items: list, tol: float) -> tuple:
    """Assign each local projector to a class of numerically equal ones; name the classes."""
    reps: list[np.ndarray] = []
    which = []
    for p in items:
        for g, r in enumerate(reps):
            if max_abs(p - r) <= 1e-8:
                which.append(g)
                break
        else:
            reps.append(p)
            which.append(len(reps) - 1)
    names = [_bit_name(r) for r in reps]
    if None in names or len(set(names)) != len(names):
        names = [str(g) for g in range(len(reps))]
    return [names[g] for g in which]


@dataclass(frozen=True, eq=False)
class SubsystemSplit:
    """Bipartition of the schedule's factors with per-slot label maps.

    ``slot_maps[k]`` sends a joint label to ``(label_A, label_B)``; on the
    final slot the key is ``(label, final_index)`` since local final states
    are individual basis vectors.
    """

    schedule: SystemSchedule
    part_a: tuple
    part_b: tuple
    slot_maps: tuple

    @classmethod
    def from_schedule(cls, schedule: SystemSchedule, part_a: Iterable[int], tol: float = 1e-9) -> "SubsystemSplit":
        factors = schedule.factors
        if len(factors) < 2:
            raise NonFactorableError("schedule declares no subsystem factorization")
        part_a = tuple(sorted(int(k) for k in part_a))
        part_b = tuple(k for k in range(len(factors)) if k not in part_a)
        if not part_a or not part_b or any(k < 0 or k >= len(factors) for k in part_a):
            raise ValueError(f"invalid bipartition {part_a} of {len(factors)} factors")
        maps = []
        for k, obs in enumerate(schedule.observables):
            if k == schedule.n - 1:
                keys = [(l, i) for l, basis in zip(obs.labels, obs.final_bases) for i in range(len(basis))]
                ops = [np.outer(v, v.conj()) for l, basis in zip(obs.labels, obs.final_bases) for v in basis]
            else:
                keys, ops = list(obs.labels), list(obs.projectors)
            try:
                pairs = [_factor_projector(p, factors, part_a, part_b, tol) for p in ops]
            except NonFactorableError as exc:
                raise NonFactorableError(f"{schedule.times[k]}: {exc}") from None
            names_a = _group([a for a, _ in pairs], tol)
            names_b = _group([b for _, b in pairs], tol)
            maps.append({key: (a, b) for key, a, b in zip(keys, names_a, names_b)})
        return cls(schedule, part_a, part_b, tuple(maps))

    @classmethod
    def parse(cls, schedule: SystemSchedule, text: str) -> "SubsystemSplit":
        """``"1|2"`` or ``"1,2|3"``: 1-based factor indices on each side."""
        try:
            left, right = text.split("|")
            a = [int(x) - 1 for x in left.split(",") if x.strip()]
            b = [int(x) - 1 for x in right.split(",") if x.strip()]
        except ValueError:
            raise ValueError(f"malformed split {text!r}; expected e.g. '1|2'") from None
        if sorted(a + b) != list(range(len(schedule.factors))):
            raise ValueError(f"split {text!r} must cover factors 1..{len(schedule.factors)} exactly once")
        return cls.from_schedule(schedule, a)

    def split(self, seq: OutcomeSequence, slots: Sequence[int]) -> tuple:
        final = self.schedule.n - 1
        la, lb = [], []
        for k, label in zip(slots, seq.labels):
            key = (label, seq.final_index or 0) if k == final else label
            a, b = self.slot_maps[k][key]
            la.append(a)
            lb.append(b)
        return OutcomeSequence(tuple(la)), OutcomeSequence(tuple(lb))

    def local_labels(self, slot: int, side: str) -> list:
        j = 0 if side == "A" else 1
        seen = []
        for pair in self.slot_maps[slot].values():
            if pair[j] not in seen:
                seen.append(pair[j])
        return seen

    def joint_labels(self, slot: int, side: str, local: str) -> frozenset:
        """Joint labels at ``slot`` whose ``side`` part equals ``local``."""
        j = 0 if side == "A" else 1
        final = slot == self.schedule.n - 1
        hit, miss = set(), set()
        for key, pair in self.slot_maps[slot].items():
            label = key[0] if final else key
            (hit if pair[j] == local else miss).add(label)
        if not hit:
            raise KeyError(f"no outcome {local!r} for side {side} at {self.schedule.times[slot]}")
        if hit & miss:
            raise NonFactorableError(
                f"side {side} outcome {local!r} at {self.schedule.times[slot]} depends on the final degeneracy index"
            )
        return frozenset(hit)

    def local_schedule(self, side: str) -> SystemSchedule:
        """Same evolution with only ``side``'s devices: projectors ``P_a (x) I``."""
        j = 0 if side == "A" else 1
        final = self.schedule.n - 1
        observables = []
        for k, obs in enumerate(self.schedule.observables):
            if k == final:
                ops = {
                    (l, i): np.outer(v, v.conj())
                    for l, basis in zip(obs.labels, obs.final_bases)
                    for i, v in enumerate(basis)
                }
            else:
                ops = dict(zip(obs.labels, obs.projectors))
            lifted: dict[str, np.ndarray] = {}
            for key, pair in self.slot_maps[k].items():
                lifted[pair[j]] = lifted.get(pair[j], 0) + ops[key]
            local = ObservableSpec(tuple(lifted), tuple(lifted.values()))
            observables.append(local.with_final_bases() if k == final else local)
        return replace(self.schedule, observables=tuple(observables))


def _joint_rho(state) -> HistoryDensityMatrix:
    if isinstance(state, HistoryVector):
        return from_pure(state)
    if state.part is not None:
        raise ScheduleError("density matrix is already reduced")
    return state


def reduce(state, split: SubsystemSplit, keep: str = "A") -> HistoryDensityMatrix:
    """Partial trace over the other subsystem's histories.

    ``rho^A[a, a'] = sum_b rho[(a, b), (a', b)]``.
    """
    if keep not in ("A", "B"):
        raise ValueError("keep must be 'A' or 'B'")
    rho = _joint_rho(state)
    pairs = [split.split(k, rho.slots) for k in rho.basis]
    mine = [p[0] if keep == "A" else p[1] for p in pairs]
    other = [p[1] if keep == "A" else p[0] for p in pairs]
    basis = sorted(set(mine), key=OutcomeSequence.sort_key)
    pos = {k: i for i, k in enumerate(basis)}
    local_idx = np.array([pos[k] for k in mine], dtype=int)
    groups: dict[OutcomeSequence, list] = defaultdict(list)
    for i, b in enumerate(other):
        groups[b].append(i)
    out = np.zeros((len(basis), len(basis)), dtype=complex)
    for idx in groups.values():
        idx = np.array(idx)
        li = local_idx[idx]
        np.add.at(out, (li[:, None], li[None, :]), rho.matrix[np.ix_(idx, idx)])
    return HistoryDensityMatrix(rho.schedule, rho.slots, tuple(basis), out, part=keep)


def marginal_probability(rho_reduced: HistoryDensityMatrix, seq) -> float:
    """``Tr(rho^A P_a)`` for a local sequence (or projector over local labels)."""
    return sequence_probability_rho(rho_reduced, seq)


def entropy(rho, log_base: float = 2, eig_tol: float = EIG_TOL) -> float:
    """Von Neumann entropy ``-sum lambda log lambda`` (``0 log 0 = 0``)."""
    matrix = rho.matrix if isinstance(rho, HistoryDensityMatrix) else np.asarray(rho, dtype=complex)
    lam = hermitian_eigenvalues(matrix, DEFAULT_TOL)
    if lam.size and lam[-1] < -POSITIVITY_TOL:
        raise PositivityError(f"density matrix has eigenvalue {lam[-1]:.3e}")
    lam = lam[lam > eig_tol]
    s = -float(np.sum(lam * np.log(lam))) / math.log(log_base)
    return max(s, 0.0)


# --------------------------------------------------------------------------
# product vs entangled histories


@dataclass(frozen=True, eq=False)
class ProductTest:
    is_product: bool
    singular_values: np.ndarray
    factor_a: Mapping | None = None
    factor_b: Mapping | None = None

    def __bool__(self):
        return self.is_product


def is_product_history(hv: HistoryVector, split: SubsystemSplit, rel_tol: float = 1e-9) -> ProductTest:
    """Rank test on the amplitude matrix ``M[a, b] = A(psi, a, b)``.

    When the rank is one the factor amplitudes are returned, normalized so
    their product reproduces ``M``.
    """
    pairs = {k: split.split(k, hv.slots) for k, _ in hv.items()}
    rows = sorted({a for a, _ in pairs.values()}, key=OutcomeSequence.sort_key)
    cols = sorted({b for _, b in pairs.values()}, key=OutcomeSequence.sort_key)
    ri = {k: i for i, k in enumerate(rows)}
    ci = {k: i for i, k in enumerate(cols)}
    m = np.zeros((len(rows), len(cols)), dtype=complex)
    for key, amp in hv.items():
        a, b = pairs[key]
        m[ri[a], ci[b]] += amp
    if m.size == 0:
        return ProductTest(True, np.zeros(0))
    u, s, vh = np.linalg.svd(m)
    if len(s) > 1 and s[1] > rel_tol * s[0]:
        return ProductTest(False, s)
    root = math.sqrt(s[0])
    fa = {k: complex(u[i, 0] * root) for k, i in ri.items()}
    fb = {k: complex(vh[0, i] * root) for k, i in ci.items()}
    return ProductTest(True, s, fa, fb)


def _part(split_or_part, schedule: SystemSchedule) -> tuple:
    if isinstance(split_or_part, SubsystemSplit):
        return split_or_part.part_a, split_or_part.part_b
    a = tuple(sorted(int(k) for k in split_or_part))
    return a, tuple(k for k in range(len(schedule.factors)) if k not in a)


def schmidt_ranks(schedule: SystemSchedule, split, tol: float = 1e-9) -> list:
    """Schmidt rank of the unmeasured state ``U(t_k, t_0)|psi>`` at every slot."""
    part_a, part_b = _part(split, schedule)
    factors = schedule.factors
    da, db = _dims(factors, part_a), _dims(factors, part_b)
    order = list(part_a) + list(part_b)
    ranks = []
    v = schedule.initial_state
    for u in schedule.unitaries:
        v = u @ v
        m = v.reshape(factors).transpose(order).reshape(da, db)
        s = np.linalg.svd(m, compute_uv=False)
        ranks.append(int(np.sum(s > tol * max(s[0], 1e-300))))
    return ranks


def intermediate_entanglement_witness(schedule: SystemSchedule, split, tol: float = 1e-9) -> list:
    """Slots whose unmeasured state is entangled across the split."""
    return [k for k, r in enumerate(schmidt_ranks(schedule, split, tol)) if r > 1]
