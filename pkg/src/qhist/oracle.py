"""Brute-force check by direct simulation of sequential measurements.

At every time the state is evolved, split into one branch per projector,
and each branch is renormalized; a sequence's probability is the product
of its branch probabilities.  Nothing here touches chain operators or
history vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import SystemSchedule

__all__ = ["BranchNode", "SampleResult", "enumerate_tree", "enumerate_tree_with_residual", "sample"]

BRANCH_PRUNE = 1e-14


@dataclass(frozen=True, eq=False)
class BranchNode:
    state: np.ndarray
    path: tuple
    path_probability: float


@dataclass(frozen=True)
class SampleResult:
    counts: dict
    n_shots: int
    seed: int
    algorithm: str = "numpy.random.PCG64"
    frequencies: dict = field(default_factory=dict)


def _children(schedule: SystemSchedule, node: BranchNode, k: int) -> list:
    v = schedule.unitaries[k] @ node.state
    out = []
    for label, p in zip(schedule.observables[k].labels, schedule.observables[k].projectors):
        w = p @ v
        q = float(np.vdot(w, w).real)
        out.append((label, q, w))
    return out


def enumerate_tree_with_residual(schedule: SystemSchedule, prune: float = BRANCH_PRUNE) -> tuple:
    """Leaf probabilities keyed by label tuple, and the probability mass pruned away."""
    leaves: dict[tuple, float] = {}
    pruned = 0.0
    stack = [(BranchNode(schedule.initial_state, (), 1.0), 0)]
    while stack:
        node, k = stack.pop()
        if k == schedule.n:
            leaves[node.path] = node.path_probability
            continue
        children = _children(schedule, node, k)
        for label, q, w in reversed(children):
            p = node.path_probability * q
            if p < prune:
                pruned += p
                continue
            stack.append((BranchNode(w / np.sqrt(q), node.path + (label,), p), k + 1))
    return dict(sorted(leaves.items())), pruned


def enumerate_tree(schedule: SystemSchedule, prune: float = BRANCH_PRUNE) -> dict:
    """Probability of every outcome sequence reachable above ``prune``."""
    return enumerate_tree_with_residual(schedule, prune)[0]


def sample(schedule: SystemSchedule, n_shots: int, rng_seed: int) -> SampleResult:
    """Simulate ``n_shots`` independent runs; deterministic given ``rng_seed``.

    Branch probabilities are cached per path prefix, so each shot only walks
    the tree.
    """
    if n_shots <= 0:
        raise ValueError("n_shots must be positive")
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    draws = rng.random((n_shots, schedule.n))
    cache: dict[tuple, tuple] = {}
    root = BranchNode(schedule.initial_state, (), 1.0)
    nodes = {(): root}

    def options(path: tuple):
        if path not in cache:
            node = nodes[path]
            children = _children(schedule, node, len(path))
            labels = [c[0] for c in children]
            probs = np.array([c[1] for c in children])
            probs = probs / probs.sum()
            for label, q, w in children:
                if q > 0:
                    nodes[path + (label,)] = BranchNode(w / np.sqrt(q), path + (label,), 0.0)
            cache[path] = (labels, np.cumsum(probs))
        return cache[path]

    counts: dict[tuple, int] = {}
    for shot in range(n_shots):
        path: tuple = ()
        for k in range(schedule.n):
            labels, cum = options(path)
            j = int(np.searchsorted(cum, draws[shot, k] * cum[-1], side="right"))
            j = min(j, len(labels) - 1)
            path = path + (labels[j],)
        counts[path] = counts.get(path, 0) + 1
    counts = dict(sorted(counts.items()))
    freqs = {k: c / n_shots for k, c in counts.items()}
    return SampleResult(counts, n_shots, rng_seed, frequencies=freqs)
