"""Monte-Carlo check of the stratified-coreset loss-gap bound.

Synthetic problems are linearized: each sample contributes a fixed gradient
``g_i`` at ``W0``. Training for ``T`` steps of size ``eta`` moves the weights
by ``-eta*T`` times the (estimated) mean gradient. The evaluation loss

    L(W) = mean_i[l_i + g_i . (W - W0)] + (L/2) ||W - W0||^2

is L-smooth, and under with-replacement stratified sampling its expected
coreset-vs-full gap equals the bound

    L T^2 eta^2 / (2 M_target) * sum_k pi_k^2 V_k^2 / q_k

exactly, which makes the inequality a sharp, falsifiable check.
"""
from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence

import numpy as np

Z99 = NormalDist().inv_cdf(0.995)
TRIAL_CHUNK = 1000


@dataclass
class LinearizedProblem:
    gradients: np.ndarray  # (M, d)
    cluster_of: np.ndarray  # (M,)
    base_losses: np.ndarray  # (M,)
    smoothness: float = 10.0
    eta: float = 0.05
    steps: int = 20

    def __post_init__(self):
        self.gradients = np.asarray(self.gradients, dtype=np.float64)
        self.cluster_of = np.asarray(self.cluster_of, dtype=np.int64)
        if self.gradients.ndim != 2 or len(self.cluster_of) != len(self.gradients):
            raise ValueError("gradients must be (M, d) with one cluster label per row")
        if self.smoothness <= 0 or self.eta <= 0 or self.steps < 1:
            raise ValueError("need smoothness > 0, eta > 0 and steps >= 1")
        if (np.bincount(self.cluster_of) == 0).any():
            raise ValueError("every cluster label in 0..K-1 must be used")

    @property
    def k(self) -> int:
        return int(self.cluster_of.max()) + 1

    @property
    def m(self) -> int:
        return len(self.cluster_of)

    @property
    def grad_bound(self) -> float:
        return float(np.sqrt((self.gradients**2).sum(axis=1)).max())

    def sizes(self) -> np.ndarray:
        return np.bincount(self.cluster_of, minlength=self.k)

    def masses(self) -> np.ndarray:
        return self.sizes() / self.m

    def members(self, k: int) -> np.ndarray:
        return self.gradients[self.cluster_of == k]

    def with_eta(self, eta: float) -> "LinearizedProblem":
        return LinearizedProblem(self.gradients, self.cluster_of, self.base_losses,
                                 self.smoothness, eta, self.steps)


@dataclass
class Allocation:
    q: np.ndarray  # requested shares
    counts: np.ndarray  # integer M_k, sum == m_target
    m_target: int

    @property
    def realized_q(self) -> np.ndarray:
        return self.counts / self.m_target

    @classmethod
    def from_q(cls, q, m_target: int) -> "Allocation":
        q = np.asarray(q, dtype=np.float64)
        if (q <= 0).any() or abs(q.sum() - 1.0) > 1e-9:
            raise ValueError("q must be positive and sum to 1")
        if m_target < len(q):
            raise ValueError("M_target must be at least K so every cluster gets a sample")
        q = q / q.sum()
        raw = q * m_target
        counts = np.maximum(np.floor(raw).astype(np.int64), 1)
        idx = np.arange(len(q))
        while counts.sum() < m_target:
            j = np.lexsort((idx, -(raw - counts)))[0]
            counts[j] += 1
        while counts.sum() > m_target:
            cand = np.flatnonzero(counts > 1)
            j = cand[np.lexsort((cand, raw[cand] - counts[cand]))[0]]
            counts[j] -= 1
        return cls(q, counts, m_target)


def synth_problem(m: int = 2000, k: int = 5, d: int = 16, separation: float = 3.0, seed: int = 0,
                  noise: float = 1.0, smoothness: float = 10.0, eta: float = 0.05,
                  steps: int = 20) -> LinearizedProblem:
    """Clustered synthetic gradients: centers on a sphere of radius
    ``separation`` plus isotropic noise whose scale differs per cluster."""
    if not (m >= k >= 1 and d >= 1):
        raise ValueError(f"need M >= K >= 1 and d >= 1, got M={m}, K={k}, d={d}")
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(k, d))
    centers *= separation / np.linalg.norm(centers, axis=1, keepdims=True)
    sizes = 1 + rng.multinomial(m - k, rng.dirichlet(np.full(k, 4.0)))
    scales = rng.uniform(0.5, 2.0, size=k) * noise
    labels = rng.permutation(np.repeat(np.arange(k), sizes))
    grads = centers[labels] + scales[labels, None] * rng.normal(size=(m, d))
    losses = rng.normal(size=m)
    return LinearizedProblem(grads, labels, losses, smoothness, eta, steps)


def _cluster_means(problem: LinearizedProblem) -> np.ndarray:
    # shifted mean: identical rows give their exact value back
    out = np.empty((problem.k, problem.gradients.shape[1]))
    for k in range(problem.k):
        g = problem.members(k)
        out[k] = g[0] + (g - g[0]).mean(axis=0)
    return out


def cluster_variance(problem: LinearizedProblem) -> np.ndarray:
    """Per-cluster V_k^2: mean squared deviation from the cluster mean gradient."""
    means = _cluster_means(problem)
    v2 = np.empty(problem.k)
    for k in range(problem.k):
        dev = problem.members(k) - means[k]
        v2[k] = float(np.mean(np.einsum("ij,ij->i", dev, dev)))
    return v2


def bound_rhs(L: float, T: int, eta: float, m_target: int, pi, V2, q) -> float:
    q = np.asarray(q, dtype=np.float64)
    if (q <= 0).any():
        raise ValueError("every q_k must be positive")
    pi = np.asarray(pi, dtype=np.float64)
    V2 = np.asarray(V2, dtype=np.float64)
    return float(L * T**2 * eta**2 / (2.0 * m_target) * np.sum(pi**2 * V2 / q))


def problem_bound(problem: LinearizedProblem, alloc: Allocation) -> float:
    return bound_rhs(problem.smoothness, problem.steps, problem.eta, alloc.m_target,
                     problem.masses(), cluster_variance(problem), alloc.realized_q)


def analytic_gap(problem: LinearizedProblem, alloc: Allocation, replacement: bool = True) -> float:
    """Closed-form expected gap of the stratified estimator."""
    pi, v2, sizes = problem.masses(), cluster_variance(problem), problem.sizes()
    var = pi**2 * v2 / alloc.counts
    if not replacement:
        # finite-population correction (N - n) / (N - 1)
        var = var * np.where(sizes > 1, (sizes - alloc.counts) / np.maximum(sizes - 1, 1), 0.0)
    c = problem.eta * problem.steps
    return float(0.5 * problem.smoothness * c * c * var.sum())


ESTIMATORS = ("stratified", "plain")


def _estimator_deviations(problem: LinearizedProblem, alloc: Allocation, trials: int,
                          seed: int, replacement: bool, estimator: str = "stratified") -> np.ndarray:
    """(trials, d) array of g_hat - g_bar.

    "stratified" weights cluster k's sample mean by pi_k (unbiased);
    "plain" averages all drawn gradients, i.e. weights by M_k / M_target,
    which is biased whenever q differs from pi.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")
    sizes = problem.sizes()
    if not replacement and (alloc.counts > sizes).any():
        raise ValueError("without replacement needs M_k <= |C_k| for every cluster")
    pi = problem.masses()
    means = _cluster_means(problem)
    wts = pi if estimator == "stratified" else alloc.realized_q
    bias = wts @ means - pi @ means if estimator == "plain" else np.zeros(means.shape[1])
    centered = [problem.members(k) - means[k] for k in range(problem.k)]
    d = problem.gradients.shape[1]
    out = np.zeros((trials, d))
    for c0 in range(0, trials, TRIAL_CHUNK):
        n = min(TRIAL_CHUNK, trials - c0)
        rng = np.random.default_rng(np.random.SeedSequence([seed, int(replacement), c0 // TRIAL_CHUNK]))
        acc = np.zeros((n, d))
        for k in range(problem.k):
            mk = int(alloc.counts[k])
            if replacement:
                idx = rng.integers(0, sizes[k], size=(n, mk))
            else:
                idx = np.argpartition(rng.random((n, sizes[k])), mk - 1, axis=1)[:, :mk]
            acc += wts[k] * centered[k][idx].mean(axis=1)
        out[c0 : c0 + n] = acc + bias
    return out


def simulate_gap(problem: LinearizedProblem, alloc: Allocation, trials: int, seed: int,
                 replacement: bool = True, estimator: str = "stratified") -> tuple[float, float]:
    """Mean of L(W_core) - L(W_full) over ``trials`` draws and its 99% half-width."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    delta = _estimator_deviations(problem, alloc, trials, seed, replacement, estimator)
    gbar = (problem.masses()[:, None] * _cluster_means(problem)).sum(axis=0)
    c = problem.eta * problem.steps
    lin = delta @ gbar
    sq = np.einsum("ij,ij->i", delta, delta)
    # L(W) differences expanded around W_full so zero deviation gives exactly zero
    gaps = -c * lin + 0.5 * problem.smoothness * c * c * (2.0 * lin + sq)
    mean = float(gaps.mean())
    half = float(Z99 * gaps.std(ddof=1) / np.sqrt(trials)) if trials > 1 else float("inf")
    return mean, half


def estimator_mean(problem: LinearizedProblem, alloc: Allocation, trials: int, seed: int,
                   estimator: str = "stratified"):
    """Mean and standard error of g_hat over trials, and the true g_bar."""
    gbar = (problem.masses()[:, None] * _cluster_means(problem)).sum(axis=0)
    g_hat = gbar + _estimator_deviations(problem, alloc, trials, seed, True, estimator)
    return g_hat.mean(axis=0), g_hat.std(axis=0, ddof=1) / np.sqrt(trials), gbar


def optimal_allocation(pi, V2, m_target: int) -> Allocation:
    """q_k proportional to pi_k V_k; zero-variance clusters get one sample."""
    pi = np.asarray(pi, dtype=np.float64)
    v = np.sqrt(np.asarray(V2, dtype=np.float64))
    score = pi * v
    if not (score > 0).any():
        warnings.warn("all cluster variances are zero; allocating proportionally to mass")
        return Allocation.from_q(pi / pi.sum(), m_target)
    zero = score <= 0
    q = np.zeros(len(pi))
    q[zero] = 1.0 / m_target
    q[~zero] = (1.0 - zero.sum() / m_target) * score[~zero] / score[~zero].sum()
    return Allocation.from_q(q, m_target)


def optimal_shares(pi, V2) -> np.ndarray:
    s = np.asarray(pi, dtype=np.float64) * np.sqrt(np.asarray(V2, dtype=np.float64))
    return s / s.sum()


def remark_check(pi, V2, qs: Sequence, n_random: int = 1000, seed: int = 0, tol: float = 1e-9) -> dict:
    """Check that q* = pi V / sum(pi V) minimizes sum pi^2 V^2 / q on the simplex.

    Compares against every ``q`` in ``qs`` and ``n_random`` uniform simplex
    points. A comparison fails if q loses to q*, or ties it while further than
    ``tol`` from q*.
    """
    pi = np.asarray(pi, dtype=np.float64)
    V2 = np.asarray(V2, dtype=np.float64)
    qstar = optimal_shares(pi, V2)
    f = lambda q: float(np.sum(pi**2 * V2 / np.asarray(q)))  # noqa: E731
    best = f(qstar)
    rng = np.random.default_rng(seed)
    cands = [np.asarray(q, dtype=np.float64) for q in qs] + list(rng.dirichlet(np.ones(len(pi)), size=n_random))
    failures = 0
    min_gap = np.inf
    for q in cands:
        val = f(q)
        near = np.max(np.abs(q - qstar)) <= tol
        if val < best * (1 - 1e-12) or (not near and val <= best):
            failures += 1
        if not near:
            min_gap = min(min_gap, val - best)
    return {
        "q_star": qstar.tolist(),
        "objective_at_q_star": best,
        "cauchy_schwarz_value": float(np.sum(pi * np.sqrt(V2)) ** 2),
        "candidates": len(cands),
        "failures": failures,
        "min_excess": float(min_gap),
        "pass": failures == 0,
    }


def verify(problem: LinearizedProblem, allocations: Sequence[Allocation], trials: int = 10000,
           seed: int = 0, n_random: int = 1000, rel_tol: float = 0.05) -> dict:
    """Bound vs simulated gap for each allocation, plus the optimality check."""
    if trials < 2:
        raise ValueError("trials must be >= 2")
    pi, v2 = problem.masses(), cluster_variance(problem)
    records = []
    for a, alloc in enumerate(allocations):
        bound = problem_bound(problem, alloc)
        gap, half = simulate_gap(problem, alloc, trials, seed + 7919 * a, replacement=True)
        rec = {
            "q": alloc.realized_q.tolist(),
            "counts": alloc.counts.tolist(),
            "bound": bound,
            "gap_mean": gap,
            "gap_ci99": half,
            "pass": gap - half <= bound,
            "tight": (gap == bound == 0.0)
            or (abs(gap - bound) <= rel_tol * bound and abs(gap - bound) <= half),
        }
        if (alloc.counts <= problem.sizes()).all():
            g2, h2 = simulate_gap(problem, alloc, trials, seed + 7919 * a, replacement=False)
            rec.update(wor_gap_mean=g2, wor_gap_ci99=h2, wor_pass=g2 <= bound)
        records.append(rec)
    remark = remark_check(pi, v2, [r.realized_q for r in allocations], n_random=n_random, seed=seed) \
        if (v2 > 0).any() else {"pass": True, "note": "all variances zero"}
    return {
        "problem": {
            "M": problem.m, "K": problem.k, "d": int(problem.gradients.shape[1]),
            "L": problem.smoothness, "eta": problem.eta, "T": problem.steps,
            "grad_bound": problem.grad_bound,
            "pi": pi.tolist(), "V2": v2.tolist(),
        },
        "trials": trials,
        "seed": seed,
        "allocations": records,
        "remark": remark,
        "pass": all(r["pass"] and r.get("wor_pass", True) for r in records) and remark["pass"],
    }


def default_allocations(problem: LinearizedProblem, m_target: int, seed: int, n_random: int = 2) -> list[Allocation]:
    """Uniform, optimal and ``n_random`` Dirichlet allocations."""
    k = problem.k
    out = [Allocation.from_q(np.full(k, 1.0 / k), m_target),
           optimal_allocation(problem.masses(), cluster_variance(problem), m_target)]
    rng = np.random.default_rng([seed, 31337])
    for _ in range(n_random):
        while True:
            q = rng.dirichlet(np.full(k, 2.0))
            alloc = Allocation.from_q(q, m_target)
            if (alloc.counts <= problem.sizes()).all():
                break
        out.append(alloc)
    return out


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def report_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["allocation", "q", "bound", "gap_mean", "gap_ci99", "pass", "wor_gap_mean", "wor_pass"])
    for i, r in enumerate(report["allocations"]):
        w.writerow([i, " ".join(f"{x:.6g}" for x in r["q"]), repr(r["bound"]), repr(r["gap_mean"]),
                    repr(r["gap_ci99"]), r["pass"], repr(r.get("wor_gap_mean", "")), r.get("wor_pass", "")])
    return buf.getvalue()
