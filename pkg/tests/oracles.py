"""Independent reference implementations used only by the tests.

Nothing here calls into ``qhist.chains``, ``qhist.histvec`` or
``qhist.density``; only data containers from ``qhist.model`` are used.
"""

from __future__ import annotations

import itertools

import numpy as np

from qhist.model import ObservableSpec, SystemSchedule


# --------------------------------------------------------------------------
# cyclic Jacobi eigensolver


def jacobi_eigenvalues(a, tol: float = 1e-14, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations.

    Each rotation zeroes one off-diagonal pair ``(p, q)``; sweeps repeat
    until the off-diagonal Frobenius norm drops below ``tol * ||A||``.
    Returned in descending order.
    """
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    scale = max(np.linalg.norm(a), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt(max(0.0, np.sum(np.abs(a) ** 2) - np.sum(np.abs(np.diag(a)) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                # phase-rotate to a real off-diagonal entry, then a real Jacobi step
                phase = apq / abs(apq)
                app, aqq = a[p, p].real, a[q, q].real
                theta = 0.5 * np.arctan2(2 * abs(apq), aqq - app)
                c, s = np.cos(theta), np.sin(theta)
                j = np.eye(n, dtype=complex)
                j[p, p] = c
                j[q, q] = c
                j[p, q] = s * phase
                j[q, p] = -s * np.conj(phase)
                a = j.conj().T @ a @ j
    return np.sort(np.diag(a).real)[::-1]


def von_neumann(matrix, tol: float = 1e-12) -> float:
    lam = jacobi_eigenvalues(matrix)
    lam = lam[lam > tol]
    return float(-np.sum(lam * np.log2(lam)))


# --------------------------------------------------------------------------
# literal history-space constructions


def full_basis(schedule: SystemSchedule) -> list:
    """All ``(labels, final_index)`` pairs in lexicographic order."""
    out = []
    for labels in itertools.product(*(o.labels for o in schedule.observables)):
        for i in range(len(schedule.observables[-1].final_bases[schedule.observables[-1].labels.index(labels[-1])])):
            out.append((labels, i))
    return out


def literal_amplitude(schedule: SystemSchedule, labels, final_index: int) -> complex:
    """``<a_n,i| U_n P_{n-1} U_{n-1} ... P_1 U_1 |psi>`` by left-to-right products."""
    v = schedule.initial_state.copy()
    for k in range(schedule.n - 1):
        obs = schedule.observables[k]
        v = obs.projectors[obs.labels.index(labels[k])] @ (schedule.unitaries[k] @ v)
    v = schedule.unitaries[-1] @ v
    fin = schedule.observables[-1]
    e = fin.final_bases[fin.labels.index(labels[-1])][final_index]
    return complex(np.vdot(e, v))


def literal_history_vector(schedule: SystemSchedule) -> tuple:
    basis = full_basis(schedule)
    return basis, np.array([literal_amplitude(schedule, l, i) for l, i in basis])


def literal_chain_probability(schedule: SystemSchedule, labels) -> float:
    """``Tr(C C^dagger)`` with ``C`` the explicit operator product on ``|psi><psi|``."""
    c = np.outer(schedule.initial_state, schedule.initial_state.conj())
    for k, label in enumerate(labels):
        obs = schedule.observables[k]
        c = obs.projectors[obs.labels.index(label)] @ schedule.unitaries[k] @ c
    return float(np.trace(c @ c.conj().T).real)


def literal_q_operator(schedule: SystemSchedule, basis: list, fixed: dict) -> np.ndarray:
    """Dense ``P^dagger P`` for the time projector onto ``fixed`` slots plus
    the final slot, composed with the sequence projector ``fixed``.

    Two basis histories couple iff they agree on every kept slot (and on the
    final index) and both satisfy the constraints.
    """
    n = len(basis)
    last = len(basis[0][0]) - 1
    keep = sorted(set(fixed) | {last})
    ok = [all(l[k] in fixed[k] for k in fixed) for l, _ in basis]
    key = [(tuple(l[k] for k in keep), i) for l, i in basis]
    q = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            if ok[a] and ok[b] and key[a] == key[b]:
                q[a, b] = 1.0
    return q


def brute_partial_probability(schedule: SystemSchedule, fixed: dict) -> float:
    basis, psi = literal_history_vector(schedule)
    q = literal_q_operator(schedule, basis, fixed)
    return float(np.vdot(psi, q @ psi).real)


# --------------------------------------------------------------------------
# random schedules


def random_unitary(rng: np.random.Generator, d: int, method: str | None = None) -> np.ndarray:
    method = method or ("qr" if rng.random() < 0.5 else "expm")
    if method == "qr":
        z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
        q, r = np.linalg.qr(z)
        return q * (np.diag(r) / np.abs(np.diag(r)))
    h = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = (h + h.conj().T) / 2
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * w)) @ v.conj().T


def random_state(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_observable(rng: np.random.Generator, d: int, tag: str = "o", final: bool = False) -> ObservableSpec:
    """Random orthogonal partition of a random basis; ranks may be degenerate."""
    v = random_unitary(rng, d, "qr")
    groups = int(rng.integers(1, d + 1))
    cuts = np.sort(rng.choice(np.arange(1, d), size=groups - 1, replace=False)) if groups > 1 else []
    blocks = np.split(np.arange(d), cuts)
    labels, projectors, bases = [], [], []
    for g, cols in enumerate(blocks):
        vg = v[:, cols]
        labels.append(f"{tag}{g}")
        projectors.append(vg @ vg.conj().T)
        bases.append(tuple(vg[:, j] for j in range(vg.shape[1])))
    return ObservableSpec(tuple(labels), tuple(projectors), tuple(bases) if final else None)


def random_schedule(rng: np.random.Generator, d: int | None = None, n: int | None = None, factors=()) -> SystemSchedule:
    d = int(d or rng.integers(2, 9))
    n = int(n or rng.integers(1, 5))
    return SystemSchedule(
        dim=d,
        initial_state=random_state(rng, d),
        unitaries=tuple(random_unitary(rng, d) for _ in range(n)),
        observables=tuple(random_observable(rng, d, f"o{k}", final=(k == n - 1)) for k in range(n)),
        factors=factors,
    )


def random_product_observable(rng: np.random.Generator, da: int, db: int, final: bool = False) -> ObservableSpec:
    """Joint device built from independent local devices: labels ``"i.j"``."""
    oa = random_observable(rng, da, "a", final=True)
    ob = random_observable(rng, db, "b", final=True)
    labels, projectors, bases = [], [], []
    for la, pa, ba in zip(oa.labels, oa.projectors, oa.final_bases):
        for lb, pb, bb in zip(ob.labels, ob.projectors, ob.final_bases):
            labels.append(f"{la}.{lb}")
            projectors.append(np.kron(pa, pb))
            bases.append(tuple(np.kron(x, y) for x in ba for y in bb))
    return ObservableSpec(tuple(labels), tuple(projectors), tuple(bases) if final else None)


def random_product_schedule(rng: np.random.Generator, da: int, db: int, n: int) -> SystemSchedule:
    """Local unitaries and local devices on a product initial state."""
    return SystemSchedule(
        dim=da * db,
        initial_state=np.kron(random_state(rng, da), random_state(rng, db)),
        unitaries=tuple(np.kron(random_unitary(rng, da), random_unitary(rng, db)) for _ in range(n)),
        observables=tuple(random_product_observable(rng, da, db, final=(k == n - 1)) for k in range(n)),
        factors=(da, db),
    )
