"""Structural descriptors: basic topology counts plus random-walk return
probability signatures."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .dataset import Dataset, GraphRecord


@dataclass(frozen=True)
class StructuralConfig:
    rw_steps: int = 8
    include_basic: bool = True

    def __post_init__(self):
        if self.rw_steps < 1:
            raise ValueError(f"rw_steps must be >= 1, got {self.rw_steps}")

    @property
    def dim(self) -> int:
        return 2 * self.rw_steps + (3 if self.include_basic else 0)

    def column_names(self) -> list[str]:
        names = ["num_nodes", "num_edges", "avg_degree"] if self.include_basic else []
        for t in range(1, self.rw_steps + 1):
            names += [f"rw{t}_mean", f"rw{t}_std"]
        return names


def basic_invariants(graph: GraphRecord) -> np.ndarray:
    """(|V|, |E|, 2|E|/|V|); a self-loop counts as one edge."""
    n, m = graph.num_nodes, graph.num_edges
    return np.array([n, m, 2.0 * m / n], dtype=np.float64)


def pack_graphs(graphs: Sequence[GraphRecord]):
    """CSR-pack the random-walk neighbor lists of several graphs.

    Neighbor indices are local to each graph. A node without edges gets a
    self-transition so every row of D^-1 A is stochastic.

    Returns ``(node_ptr, adj_ptr, nbr)``: graph ``g`` owns nodes
    ``node_ptr[g]:node_ptr[g+1]`` and node ``v`` owns ``nbr[adj_ptr[v]:adj_ptr[v+1]]``.
    """
    node_ptr = np.zeros(len(graphs) + 1, dtype=np.int64)
    node_ptr[1:] = np.cumsum([g.num_nodes for g in graphs])
    counts = np.empty(int(node_ptr[-1]), dtype=np.int64)
    flat: list[int] = []
    pos = 0
    for g in graphs:
        for v, lst in enumerate(g.neighbor_lists()):
            if not lst:
                lst = [v]
            counts[pos] = len(lst)
            flat.extend(lst)
            pos += 1
    adj_ptr = np.zeros(len(counts) + 1, dtype=np.int64)
    np.cumsum(counts, out=adj_ptr[1:])
    return node_ptr, adj_ptr, np.asarray(flat, dtype=np.int32)


def rw_signature(graph: GraphRecord, rw_steps: int, backend=None) -> np.ndarray:
    """(mean_1, std_1, ..., mean_T, std_T) of the per-node return
    probabilities diag(M^t), M = D^-1 A, population std over nodes."""
    if rw_steps < 1:
        raise ValueError("rw_steps must be >= 1")
    impl = backend or kernels
    return impl.rw_signature_batch(*pack_graphs([graph]), rw_steps)[0]


def structural_descriptor(graph: GraphRecord, config: StructuralConfig = StructuralConfig()) -> np.ndarray:
    rw = rw_signature(graph, config.rw_steps)
    if not config.include_basic:
        return rw
    return np.concatenate([basic_invariants(graph), rw])


def structural_matrix(
    dataset: Dataset | Sequence[GraphRecord],
    config: StructuralConfig = StructuralConfig(),
    threads: int = 1,
    batch_size: int = 4096,
    backend=None,
) -> np.ndarray:
    """Descriptor matrix with one row per graph in dataset order.

    Graphs are processed in fixed-size batches; per-graph results do not
    depend on ``threads`` or ``batch_size``.
    """
    impl = backend or kernels
    graphs = list(dataset)
    out = np.empty((len(graphs), config.dim), dtype=np.float64)
    off = 3 if config.include_basic else 0
    for b0 in range(0, len(graphs), batch_size):
        chunk = graphs[b0 : b0 + batch_size]
        out[b0 : b0 + len(chunk), off:] = impl.rw_signature_batch(
            *pack_graphs(chunk), config.rw_steps, num_threads=threads
        )
        if off:
            for i, g in enumerate(chunk):
                out[b0 + i, :3] = basic_invariants(g)
    return out


def write_struct_jsonl(ids: Sequence[str], matrix: np.ndarray, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for gid, row in zip(ids, matrix):
            fh.write(json.dumps({"id": gid, "struct": [float(x) for x in row]}) + "\n")
