"""Pure numpy versions of the compiled kernels.

Summation order matches ``_kernels.pyx`` term for term: neighbor
contributions are sorted ascending and added left to right, and squared
distances accumulate one coordinate at a time. Any change here must be
mirrored there.
"""
from __future__ import annotations

import math

import numpy as np

# Upper bound on the (rows, n, maxdeg) temporary in the random-walk step.
_RW_BLOCK_ELEMS = 1 << 22
_ASSIGN_BLOCK_ELEMS = 1 << 22


def _one_graph(adj_ptr: np.ndarray, nbr: np.ndarray, steps: int) -> np.ndarray:
    n = len(adj_ptr) - 1
    base = adj_ptr[0]
    counts = np.diff(adj_ptr)
    deg = counts.astype(np.float64)
    maxdeg = int(counts.max())

    # padded neighbor table, -1 marks padding
    pad = np.full((n, maxdeg), -1, dtype=np.int64)
    for j in range(n):
        pad[j, : counts[j]] = nbr[adj_ptr[j] - base : adj_ptr[j + 1] - base]
    valid = pad >= 0
    safe = np.where(valid, pad, 0)
    inv = deg[safe]

    X = np.eye(n)
    out = np.empty(2 * steps)
    rows = max(1, _RW_BLOCK_ELEMS // max(1, n * maxdeg))
    for t in range(steps):
        Y = np.empty_like(X)
        for r0 in range(0, n, rows):
            terms = X[r0 : r0 + rows][:, safe] / inv  # (rows, n, maxdeg)
            terms[:, ~valid] = 0.0
            terms.sort(axis=2)
            acc = np.zeros(terms.shape[:2])
            for c in range(maxdeg):
                acc = acc + terms[:, :, c]
            Y[r0 : r0 + rows] = acc
        X = Y
        diag = sorted(float(x) for x in np.diagonal(X))
        acc_s = 0.0
        for x in diag:
            acc_s = acc_s + x
        mean = acc_s / n
        acc_s = 0.0
        for x in diag:
            d = x - mean
            acc_s = acc_s + d * d
        out[2 * t] = mean
        out[2 * t + 1] = math.sqrt(acc_s / n)
    return out


def rw_signature_batch(node_ptr, adj_ptr, nbr, steps, num_threads=1):
    G = len(node_ptr) - 1
    out = np.empty((G, 2 * steps), dtype=np.float64)
    for g in range(G):
        a = adj_ptr[node_ptr[g] : node_ptr[g + 1] + 1]
        out[g] = _one_graph(a, nbr[a[0] : a[-1]], steps)
    return out


def assign_nearest(X, C, num_threads=1):
    M, D = X.shape
    K = C.shape[0]
    labels = np.empty(M, dtype=np.int64)
    d2 = np.empty(M, dtype=np.float64)
    rows = max(1, _ASSIGN_BLOCK_ELEMS // max(1, K))
    for r0 in range(0, M, rows):
        xb = X[r0 : r0 + rows]
        acc = np.zeros((xb.shape[0], K))
        for j in range(D):
            diff = xb[:, j, None] - C[None, :, j]
            acc = acc + diff * diff
        lab = np.argmin(acc, axis=1)
        labels[r0 : r0 + rows] = lab
        d2[r0 : r0 + rows] = acc[np.arange(xb.shape[0]), lab]
    return labels, d2
