"""Cluster-aware budgeted selection.

Pipeline: k-means -> cluster statistics -> log-domain cluster scores ->
temperature softmax -> integer quotas -> centroid-biased Gaussian weights ->
weighted sampling without replacement inside each cluster.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .clustering import DEFINITIONS, ClusterStats, cluster_stats, default_k, kmeans
from .dataset import target_size
from .errors import CurateError

SIGMA_MODES = ("data", "fixed", "infinite")


@dataclass(frozen=True)
class CurationConfig:
    p_target: float = 0.1
    w: float = 0.5
    tau: float = 0.5
    k: int | None = None
    seed: int = 42
    min_quota: bool = False
    sigma_mode: str = "data"
    sigma_value: float | None = None
    max_iter: int = 300
    tol: float = 1e-6

    def __post_init__(self):
        if not (0.0 < self.p_target <= 1.0):
            raise ValueError(f"p_target must lie in (0, 1], got {self.p_target}")
        if not (0.0 <= self.w <= 1.0):
            raise ValueError(f"w must lie in [0, 1], got {self.w}")
        if not self.tau > 0.0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.sigma_mode not in SIGMA_MODES:
            raise ValueError(f"sigma_mode must be one of {SIGMA_MODES}")
        if self.sigma_mode == "fixed" and not (self.sigma_value is not None and self.sigma_value >= 0):
            raise ValueError("sigma_mode 'fixed' needs a nonnegative sigma_value")
        if self.k is not None and self.k < 1:
            raise ValueError("K must be >= 1")


@dataclass
class SelectionPlan:
    scores: np.ndarray
    proportions: np.ndarray
    quotas: np.ndarray


def cluster_scores(stats: ClusterStats, w: float) -> np.ndarray:
    """log(pi) + w log(d_intra) + (1 - w) log(d_inter), natural log."""
    pi = np.asarray(stats.pi, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.log(pi) + w * np.log(stats.d_intra) + (1.0 - w) * np.log(stats.d_inter)


def softmax_proportions(scores, tau: float) -> np.ndarray:
    if not tau > 0:
        raise ValueError("tau must be positive")
    z = np.asarray(scores, dtype=np.float64) / tau
    z = z - z[np.isfinite(z)].max() if np.isfinite(z).any() else np.zeros_like(z)
    e = np.exp(z)
    return e / e.sum()


def _largest_remainder(units: int, weights: np.ndarray, room: np.ndarray) -> np.ndarray:
    """Split ``units`` over slots proportionally to ``weights`` without
    exceeding ``room``; remainder ties go to the lower index."""
    add = np.zeros(len(weights), dtype=np.int64)
    idx = np.arange(len(weights))
    while units > 0:
        open_ = add < room
        if not open_.any():
            raise CurateError("quota repair ran out of capacity")
        wts = np.where(open_, weights, 0.0)
        if not wts.sum() > 0.0:
            wts = open_.astype(np.float64)
        share = units * wts / wts.sum()
        base = np.floor(share).astype(np.int64)
        frac = np.where(open_, share - base, -1.0)
        left = units - int(base.sum())
        base[np.lexsort((idx, -frac))[:left]] += 1
        step = np.minimum(base, room - add)
        add += step
        units -= int(step.sum())
    return add


def quotas(proportions, m_target: int, cluster_sizes, min_quota: bool = False) -> np.ndarray:
    """Integer per-cluster budgets summing to ``m_target``.

    Starts from floor(m_target * p_j) for all but the last cluster, which
    takes the remainder. Clusters over capacity are capped and the excess is
    re-spread over clusters with room, proportionally to ``proportions``.
    """
    p = np.asarray(proportions, dtype=np.float64)
    sizes = np.asarray(cluster_sizes, dtype=np.int64)
    k = len(p)
    if m_target > int(sizes.sum()):
        raise CurateError(f"M_target={m_target} exceeds the {int(sizes.sum())} available graphs")
    if m_target < 0:
        raise CurateError("M_target must be nonnegative")
    n = np.floor(m_target * p[:-1]).astype(np.int64)
    n = np.append(n, m_target - int(n.sum()))
    n = np.minimum(n, sizes)

    lower = np.zeros(k, dtype=np.int64)
    nonempty = sizes > 0
    if min_quota and m_target >= int(nonempty.sum()):
        lower[nonempty] = 1
        n = np.maximum(n, lower)

    diff = m_target - int(n.sum())
    if diff > 0:
        n += _largest_remainder(diff, p, sizes - n)
    elif diff < 0:
        n -= _largest_remainder(-diff, p, n - lower)
    return n


def within_cluster_probs(member_points, centroid, sigma: float | None, sigma_mode: str = "data") -> np.ndarray:
    """exp(-||h - mu||^2 / (2 sigma^2)), normalized over the cluster.

    Uniform when ``sigma_mode`` is infinite or sigma is 0.
    """
    x = np.asarray(member_points, dtype=np.float64)
    m = x.shape[0]
    if m == 0:
        raise ValueError("empty cluster")
    if sigma_mode == "infinite" or not sigma:
        return np.full(m, 1.0 / m)
    diff = x - np.asarray(centroid, dtype=np.float64)
    d2 = np.einsum("ij,ij->i", diff, diff)
    logits = -d2 / (2.0 * sigma * sigma)
    e = np.exp(logits - logits.max())
    return e / e.sum()


def wrs_without_replacement(weights, n: int, seed) -> np.ndarray:
    """Exponential-key weighted sampling without replacement.

    Each positive-weight item gets key u**(1/w), compared as log(u)/w; the
    ``n`` largest keys win. Returns item indices in ascending order.
    """
    wts = np.asarray(weights, dtype=np.float64)
    if n < 0 or n > len(wts):
        raise ValueError(f"cannot draw {n} of {len(wts)} items")
    if (wts < 0).any() or not np.isfinite(wts).all():
        raise ValueError("weights must be finite and nonnegative")
    pos = np.flatnonzero(wts > 0)
    if len(pos) < n:
        raise ValueError(f"only {len(pos)} positive weights for a draw of {n}")
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    u = rng.random(len(pos))
    with np.errstate(divide="ignore", over="ignore"):
        keys = np.log(u) / wts[pos]
    top = np.argsort(-keys, kind="stable")[:n]
    return np.sort(pos[top])


def cluster_seed(master_seed: int, cluster_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed) & (2**64 - 1), 0x5E1EC7, int(cluster_index)])


@dataclass
class CoresetManifest:
    selected_ids: list[str]
    m_target: int
    config: dict
    seed: int
    clusters: list[dict]
    definitions: dict = field(default_factory=lambda: dict(DEFINITIONS))
    checksum: str = ""

    def payload(self) -> dict:
        return {
            "selected_ids": self.selected_ids,
            "m_target": self.m_target,
            "config": self.config,
            "seed": self.seed,
            "clusters": self.clusters,
            "definitions": self.definitions,
        }

    def compute_checksum(self) -> str:
        canon = json.dumps(self.payload(), sort_keys=True, separators=(",", ":"), allow_nan=False)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def to_json(self) -> str:
        doc = self.payload()
        doc["checksum"] = self.checksum or self.compute_checksum()
        return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_dict(cls, doc: dict) -> "CoresetManifest":
        try:
            m = cls(
                selected_ids=list(doc["selected_ids"]),
                m_target=int(doc["m_target"]),
                config=dict(doc["config"]),
                seed=int(doc["seed"]),
                clusters=list(doc["clusters"]),
                definitions=dict(doc.get("definitions", DEFINITIONS)),
                checksum=str(doc.get("checksum", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CurateError(f"malformed manifest: {exc}") from None
        return m

    @classmethod
    def read(cls, path: str | Path) -> "CoresetManifest":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CurateError(f"cannot read manifest {path}: {exc}") from None
        return cls.from_dict(doc)


def _sigma_for(config: CurationConfig, data_sigma: float) -> float | None:
    if config.sigma_mode == "infinite":
        return None
    if config.sigma_mode == "fixed":
        return float(config.sigma_value)
    return data_sigma


def plan_selection(stats: ClusterStats, m_target: int, config: CurationConfig) -> SelectionPlan:
    scores = cluster_scores(stats, config.w)
    props = softmax_proportions(scores, config.tau)
    n = quotas(props, m_target, stats.sizes, config.min_quota)
    return SelectionPlan(scores, props, n)


def select_coreset(ids: Sequence[str], fused, config: CurationConfig, threads: int = 1) -> CoresetManifest:
    """Run the full selection on a fused matrix aligned with ``ids``."""
    h = np.asarray(getattr(fused, "rows", fused), dtype=np.float64)
    ids = list(ids)
    if h.shape[0] != len(ids):
        raise CurateError(f"{len(ids)} ids but fused matrix has {h.shape[0]} rows")
    m = len(ids)
    m_target = target_size(m, config.p_target)
    k = config.k if config.k is not None else default_k(m)
    if k > m:
        raise CurateError(f"K={k} exceeds dataset size {m}")

    clus = kmeans(h, k, config.seed, max_iter=config.max_iter, tol=config.tol, threads=threads)
    stats = cluster_stats(h, clus)
    plan = plan_selection(stats, m_target, config)

    selected: list[int] = []
    clusters = []
    for j in range(k):
        members = np.flatnonzero(clus.assignments == j)
        entry = {
            "index": j,
            "size": int(stats.sizes[j]),
            "pi": float(stats.pi[j]),
            "d_intra": float(stats.d_intra[j]),
            "d_inter": float(stats.d_inter[j]),
            "sigma": float(stats.sigma[j]),
            "omega": float(plan.scores[j]) if np.isfinite(plan.scores[j]) else None,
            "proportion": float(plan.proportions[j]),
            "quota": int(plan.quotas[j]),
            "ids": [],
        }
        if len(members) and plan.quotas[j] > 0:
            probs = within_cluster_probs(h[members], clus.centroids[j],
                                         _sigma_for(config, float(stats.sigma[j])), config.sigma_mode)
            if (probs > 0).sum() < plan.quotas[j]:
                # extreme bandwidths underflow; keep the ranking, restore support
                probs = np.maximum(probs, np.finfo(np.float64).tiny)
            rng = np.random.default_rng(cluster_seed(config.seed, j))
            picked = members[wrs_without_replacement(probs, int(plan.quotas[j]), rng)]
            selected.extend(int(i) for i in picked)
            entry["ids"] = [ids[i] for i in picked]
            entry["prob_min"] = float(probs.min())
            entry["prob_max"] = float(probs.max())
        clusters.append(entry)

    selected.sort()
    cfg = asdict(config)
    cfg["k"] = k
    manifest = CoresetManifest(
        selected_ids=[ids[i] for i in selected],
        m_target=m_target,
        config=cfg,
        seed=config.seed,
        clusters=clusters,
    )
    manifest.checksum = manifest.compute_checksum()
    if len(set(manifest.selected_ids)) != m_target:
        raise RuntimeError("selection size does not match the budget")
    return manifest
