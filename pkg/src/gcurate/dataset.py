"""Graph dataset records, JSON Lines I/O and the coreset budget."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DatasetError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GraphRecord:
    """One undirected graph.

    ``edges`` holds canonical pairs ``(u, v)`` with ``u <= v`` in input order.
    Self-loops are allowed; duplicate undirected edges are not.
    """

    id: str
    num_nodes: int
    edges: tuple[tuple[int, int], ...] = ()
    text: str | None = None
    node_features: tuple[tuple[float, ...], ...] | None = None

    @classmethod
    def from_dict(cls, obj: dict) -> "GraphRecord":
        if not isinstance(obj, dict):
            raise DatasetError("record is not a JSON object")
        for key in ("id", "num_nodes", "edges"):
            if key not in obj:
                raise DatasetError(f"missing required key {key!r}")
        gid = obj["id"]
        if not isinstance(gid, str) or not gid:
            raise DatasetError("id must be a nonempty string")
        if "\n" in gid or "\r" in gid:
            raise DatasetError(f"id {gid!r} contains a newline")
        n = obj["num_nodes"]
        if isinstance(n, bool) or not isinstance(n, int):
            raise DatasetError("num_nodes must be an integer")
        if n < 1:
            raise DatasetError(f"graph {gid} has num_nodes={n}; at least one node required")

        raw_edges = obj["edges"]
        if not isinstance(raw_edges, list):
            raise DatasetError("edges must be an array")
        edges = []
        seen = set()
        for e in raw_edges:
            if (
                not isinstance(e, (list, tuple))
                or len(e) != 2
                or any(isinstance(x, bool) or not isinstance(x, int) for x in e)
            ):
                raise DatasetError(f"malformed edge {e!r}")
            u, v = e
            if not (0 <= u < n and 0 <= v < n):
                raise DatasetError("edge index out of range")
            pair = (u, v) if u <= v else (v, u)
            if pair in seen:
                raise DatasetError(f"duplicate edge {list(pair)} in graph {gid}")
            seen.add(pair)
            edges.append(pair)

        text = obj.get("text")
        if text is not None and not isinstance(text, str):
            raise DatasetError("text must be a string")

        feats = obj.get("node_features")
        if feats is not None:
            if not isinstance(feats, list) or len(feats) != n:
                raise DatasetError("node_features must have one row per node")
            try:
                feats = tuple(tuple(float(x) for x in row) for row in feats)
            except (TypeError, ValueError):
                raise DatasetError("node_features must contain numbers") from None
        return cls(gid, n, tuple(edges), text, feats)

    def to_dict(self) -> dict:
        out: dict = {"id": self.id, "num_nodes": self.num_nodes, "edges": [list(e) for e in self.edges]}
        if self.text is not None:
            out["text"] = self.text
        if self.node_features is not None:
            out["node_features"] = [list(r) for r in self.node_features]
        return out

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_self_loops(self) -> int:
        return sum(1 for u, v in self.edges if u == v)

    def neighbor_lists(self) -> list[list[int]]:
        """Sorted adjacency lists; a self-loop lists the node once."""
        nbrs: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for u, v in self.edges:
            nbrs[u].append(v)
            if u != v:
                nbrs[v].append(u)
        for lst in nbrs:
            lst.sort()
        return nbrs


@dataclass(frozen=True)
class Dataset:
    records: tuple[GraphRecord, ...]
    index: dict[str, int] = field(default_factory=dict, compare=False)
    self_loop_ids: tuple[str, ...] = ()

    @classmethod
    def from_records(cls, records: Iterable[GraphRecord]) -> "Dataset":
        records = tuple(records)
        index: dict[str, int] = {}
        for i, r in enumerate(records):
            if r.id in index:
                raise DatasetError(f"duplicate id {r.id}")
            index[r.id] = i
        loops = tuple(r.id for r in records if r.num_self_loops)
        return cls(records, index, loops)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i: int) -> GraphRecord:
        return self.records[i]

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]


def load_dataset(path: str | Path) -> Dataset:
    """Read a JSON Lines graph file; blank lines are skipped."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset file not found: {path}")
    records = []
    index: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"parse failure, line {lineno}: {exc.msg}") from None
            try:
                rec = GraphRecord.from_dict(obj)
            except DatasetError as exc:
                raise DatasetError(f"{exc}, line {lineno}") from None
            if rec.id in index:
                raise DatasetError(f"duplicate id {rec.id}, line {lineno}")
            index[rec.id] = len(records)
            records.append(rec)
    ds = Dataset.from_records(records)
    if ds.self_loop_ids:
        logger.warning("%d graph(s) contain self-loops, e.g. %s", len(ds.self_loop_ids), ds.self_loop_ids[0])
    return ds


def write_dataset(dataset: Dataset | Sequence[GraphRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in dataset:
            fh.write(json.dumps(rec.to_dict(), separators=(",", ":")) + "\n")


def target_size(dataset: Dataset | int, p_target: float) -> int:
    """Coreset budget ``floor(p_target * M)``, clamped to at least one graph."""
    m = dataset if isinstance(dataset, int) else len(dataset)
    if not (0.0 < p_target <= 1.0) or math.isnan(p_target):
        raise ValueError(f"p_target must lie in (0, 1], got {p_target}")
    if m < 1:
        raise ValueError("dataset is empty")
    return max(1, math.floor(p_target * m))


def random_dataset(
    n_graphs: int,
    seed: int = 0,
    min_nodes: int = 5,
    max_nodes: int = 50,
    text_fraction: float = 0.5,
) -> Dataset:
    """Synthetic dataset of mixed-size graphs for tests and benchmarks.

    Each graph is a random spanning tree plus a random number of chords, so
    sizes, densities and cycle structure all vary.
    """
    rng = np.random.default_rng(seed)
    vocab = ["ring", "chain", "aromatic", "ester", "amine", "acid", "hub", "star",
             "cluster", "bridge", "sparse", "dense", "alkyl", "halide", "ketone"]
    records = []
    for g in range(n_graphs):
        n = int(rng.integers(min_nodes, max_nodes + 1))
        edges = set()
        for v in range(1, n):
            u = int(rng.integers(0, v))
            edges.add((u, v))
        extra = int(rng.integers(0, n))
        for _ in range(extra):
            u, v = sorted(int(x) for x in rng.integers(0, n, size=2))
            if u != v:
                edges.add((u, v))
        text = None
        if rng.random() < text_fraction:
            words = rng.choice(vocab, size=int(rng.integers(2, 7)))
            text = " ".join(str(w) for w in words)
        records.append(GraphRecord(f"g{g}", n, tuple(sorted(edges)), text))
    return Dataset.from_records(records)
