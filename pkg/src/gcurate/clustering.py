"""k-means in the fused space and the per-cluster statistics used for scoring."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

FLOOR = 1e-12

# Quantity definitions recorded in manifests.
DEFINITIONS = {
    "pi": "cluster size / dataset size",
    "d_intra": "root-mean-square member-to-centroid distance, floored at 1e-12",
    "d_inter": "minimum centroid-to-other-centroid distance, floored at 1e-12; 1 when K=1",
    "sigma": "mean member-to-centroid distance",
}


@dataclass
class Clustering:
    assignments: np.ndarray
    centroids: np.ndarray
    objective: float
    iterations: int
    history: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)


@dataclass
class ClusterStats:
    pi: np.ndarray
    d_intra: np.ndarray
    d_inter: np.ndarray
    sigma: np.ndarray
    sizes: np.ndarray


def default_k(m: int) -> int:
    """clamp(round(sqrt(M)), 2, 64), never more than M."""
    return max(1, min(m, min(64, max(2, round(math.sqrt(m))))))


def _sq_dist_to(points: np.ndarray, c: np.ndarray) -> np.ndarray:
    diff = points - c
    return np.einsum("ij,ij->i", diff, diff)


def kmeanspp_init(points, k: int, seed: int) -> np.ndarray:
    """k-means++ seeding: uniform first pick, then D^2-weighted picks."""
    x = np.asarray(points, dtype=np.float64)
    m = x.shape[0]
    if k < 1 or k > m:
        raise ValueError(f"K must satisfy 1 <= K <= M={m}, got {k}")
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(m))]
    d2 = _sq_dist_to(x, x[chosen[0]])
    taken = np.zeros(m, dtype=bool)
    taken[chosen[0]] = True
    for _ in range(1, k):
        w = np.where(taken, 0.0, d2)
        total = w.sum()
        if total > 0.0:
            cum = np.cumsum(w)
            idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
            idx = min(idx, m - 1)
            while w[idx] == 0.0:  # guard against landing on a zero-width bin
                idx -= 1
        else:
            # every remaining point duplicates a chosen centroid
            free = np.flatnonzero(~taken)
            idx = int(free[rng.integers(len(free))])
        chosen.append(idx)
        taken[idx] = True
        d2 = np.minimum(d2, _sq_dist_to(x, x[idx]))
    return x[chosen].copy()


def lloyd(points, init, max_iter: int = 300, tol: float = 1e-6, threads: int = 1) -> Clustering:
    """Lloyd iterations from ``init`` until the relative objective decrease
    drops below ``tol`` or the assignment stops changing."""
    x = np.ascontiguousarray(points, dtype=np.float64)
    centroids = np.array(init, dtype=np.float64, copy=True)
    k = centroids.shape[0]
    if k < 1 or k > x.shape[0]:
        raise ValueError(f"init must have 1 <= K <= M centroids, got {k}")

    history: list[float] = []
    labels = None
    it = 0
    while True:
        new_labels, d2 = kernels.assign_nearest(x, np.ascontiguousarray(centroids), threads)
        obj = float(d2.sum())
        if history and obj > history[-1] * (1.0 + 1e-12) + 1e-300:
            raise RuntimeError(f"k-means objective increased: {history[-1]!r} -> {obj!r}")
        unchanged = labels is not None and np.array_equal(labels, new_labels)
        converged = bool(history) and (
            unchanged or history[-1] == 0.0 or (history[-1] - obj) / history[-1] < tol
        )
        history.append(obj)
        labels = new_labels
        if converged or it >= max_iter:
            break
        it += 1
        sizes = np.bincount(labels, minlength=k)
        for j in np.flatnonzero(sizes):
            centroids[j] = x[labels == j].mean(axis=0)
        empty = np.flatnonzero(sizes == 0)
        if len(empty):
            # re-seed on the points worst served by their current centroid
            order = np.argsort(-d2, kind="stable")
            for j, i in zip(empty, order):
                centroids[j] = x[i]
    return Clustering(labels, centroids, history[-1], it, history)


def kmeans(points, k: int, seed: int, max_iter: int = 300, tol: float = 1e-6, threads: int = 1) -> Clustering:
    return lloyd(points, kmeanspp_init(points, k, seed), max_iter=max_iter, tol=tol, threads=threads)


def cluster_stats(points, clustering: Clustering) -> ClusterStats:
    x = np.asarray(points, dtype=np.float64)
    k = clustering.k
    mu = clustering.centroids
    sizes = clustering.sizes()
    dist = np.sqrt(_sq_dist_rows(x, mu, clustering.assignments))
    d_intra = np.full(k, FLOOR)
    sigma = np.zeros(k)
    for j in np.flatnonzero(sizes):
        dj = dist[clustering.assignments == j]
        d_intra[j] = max(FLOOR, math.sqrt(float(np.mean(dj * dj))))
        sigma[j] = float(np.mean(dj))
    if k == 1:
        d_inter = np.ones(1)
    else:
        cd = np.sqrt(((mu[:, None, :] - mu[None, :, :]) ** 2).sum(axis=2))
        np.fill_diagonal(cd, np.inf)
        d_inter = np.maximum(cd.min(axis=1), FLOOR)
    return ClusterStats(sizes / x.shape[0], d_intra, d_inter, sigma, sizes)


def _sq_dist_rows(x: np.ndarray, mu: np.ndarray, labels: np.ndarray) -> np.ndarray:
    diff = x - mu[labels]
    return np.einsum("ij,ij->i", diff, diff)
