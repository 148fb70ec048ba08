"""Reference selectors: uniform random, k-center greedy, herding."""
from __future__ import annotations

import numpy as np


def baseline_random(m: int, m_target: int, seed) -> np.ndarray:
    """Uniform sample of ``m_target`` row indices without replacement, sorted."""
    if m_target < 1:
        raise ValueError("M_target must be >= 1")
    if m_target > m:
        raise ValueError(f"M_target={m_target} exceeds dataset size {m}")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(m, size=m_target, replace=False))


def baseline_kcenter(points, m_target: int) -> np.ndarray:
    """Farthest-first traversal.

    Starts from the point farthest from the data mean, then repeatedly adds
    the point farthest from the current selection. Indices are returned in
    selection order; ties go to the lowest index.
    """
    x = np.asarray(points, dtype=np.float64)
    m = x.shape[0]
    if not 1 <= m_target <= m:
        raise ValueError(f"M_target must lie in [1, {m}], got {m_target}")
    diff = x - x.mean(axis=0)
    first = int(np.argmax(np.einsum("ij,ij->i", diff, diff)))
    picked = [first]
    diff = x - x[first]
    mind = np.einsum("ij,ij->i", diff, diff)
    mind[first] = -1.0
    for _ in range(1, m_target):
        nxt = int(np.argmax(mind))
        picked.append(nxt)
        diff = x - x[nxt]
        mind = np.minimum(mind, np.einsum("ij,ij->i", diff, diff))
        mind[picked] = -1.0
    return np.asarray(picked, dtype=np.int64)


def baseline_herding(points, m_target: int) -> np.ndarray:
    """Greedy mean matching (linear-kernel herding) without repeats.

    Keeps a residual ``w`` that starts at the data mean; each step picks the
    unselected point maximizing <w, x> and updates ``w += mean - x``.
    """
    x = np.asarray(points, dtype=np.float64)
    m = x.shape[0]
    if not 1 <= m_target <= m:
        raise ValueError(f"M_target must lie in [1, {m}], got {m_target}")
    mu = x.mean(axis=0)
    w = mu.copy()
    taken = np.zeros(m, dtype=bool)
    picked = []
    for _ in range(m_target):
        score = x @ w
        score[taken] = -np.inf
        i = int(np.argmax(score))
        picked.append(i)
        taken[i] = True
        w += mu - x[i]
    return np.asarray(picked, dtype=np.int64)
