"""Independent reference computations used by the tests.

Nothing here imports the code under test beyond plain data types.
"""
from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np


def dense_rw_signature(num_nodes, edges, steps):
    """Mean/std of diag(M^t) with M = D^-1 A built densely and powered directly."""
    A = np.zeros((num_nodes, num_nodes))
    for u, v in edges:
        A[u, v] = 1.0
        A[v, u] = 1.0
    for i in range(num_nodes):
        if A[i].sum() == 0:
            A[i, i] = 1.0
    M = A / A.sum(axis=1, keepdims=True)
    out = []
    for t in range(1, steps + 1):
        d = np.diag(np.linalg.matrix_power(M, t))
        out += [d.mean(), d.std()]
    return np.array(out), M


def sequential_wrs_subsets(weights, n):
    """Exact subset probabilities for n sequential weighted draws without
    replacement, by enumerating every ordered draw sequence."""
    w = [Fraction(x) for x in weights]
    probs: dict[frozenset, Fraction] = {}
    for seq in itertools.permutations([i for i, x in enumerate(w) if x > 0], n):
        p = Fraction(1)
        remaining = sum(w)
        for i in seq:
            p *= w[i] / remaining
            remaining -= w[i]
        key = frozenset(seq)
        probs[key] = probs.get(key, Fraction(0)) + p
    return probs


def inclusion_from_subsets(subsets, n_items):
    inc = [Fraction(0)] * n_items
    for s, p in subsets.items():
        for i in s:
            inc[i] += p
    return inc


def kmeans_exhaustive_optimum(points, k):
    """Minimum within-cluster SSE over every assignment of points to k
    nonempty labeled groups."""
    x = np.asarray(points, dtype=float)
    m = len(x)
    best = np.inf
    for labels in itertools.product(range(k), repeat=m):
        if len(set(labels)) != k:
            continue
        lab = np.array(labels)
        sse = 0.0
        for j in range(k):
            g = x[lab == j]
            sse += float(((g - g.mean(axis=0)) ** 2).sum())
        best = min(best, sse)
    return best


def lloyd_brute(x, init, iters=100):
    """Plain Lloyd in pure numpy, for comparison."""
    c = np.array(init, dtype=float)
    for _ in range(iters):
        d = ((x[:, None, :] - c[None]) ** 2).sum(-1)
        lab = d.argmin(1)
        new = np.array([x[lab == j].mean(0) if (lab == j).any() else c[j] for j in range(len(c))])
        if np.allclose(new, c):
            break
        c = new
    d = ((x[:, None, :] - c[None]) ** 2).sum(-1)
    return float(d.min(1).sum())
