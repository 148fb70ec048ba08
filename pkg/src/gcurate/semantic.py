"""Semantic embeddings: graph-to-text serialization and pluggable providers.

Three providers produce one embedding row per graph in dataset order:

* ``precomputed`` reads vectors produced offline (JSON Lines or ``GSEM1``),
* ``remote`` posts texts to an embedding service in batches,
* ``hash`` is a deterministic bag-of-tokens fallback needing no model.
"""
from __future__ import annotations

import hashlib
import logging
import math
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import httpx
import numpy as np

from .dataset import Dataset, GraphRecord
from .errors import EmbeddingError, ServiceError
from .matrixio import SEMANTIC_MAGIC, is_binary_matrix, read_embeddings_jsonl, read_matrix

logger = logging.getLogger(__name__)

MODES = ("precomputed", "remote", "hash")
TOKEN_ENV = "GCURATE_API_TOKEN"
_TOKEN_RE = re.compile(r"[^\W_]+")


@dataclass(frozen=True)
class SemanticProviderConfig:
    mode: str = "hash"
    path: str | None = None
    endpoint: str | None = None
    dim: int | None = 64
    batch_size: int = 64
    timeout: float = 30.0
    max_in_flight: int = 4
    attempts: int = 3
    backoff: float = 0.5
    hash_seed: int = 0
    background: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown provider mode {self.mode!r}; expected one of {MODES}")
        if self.mode == "precomputed" and not self.path:
            raise ValueError("precomputed mode requires a path")
        if self.mode == "remote" and not self.endpoint:
            raise ValueError("remote mode requires an endpoint")
        if self.mode == "hash" and (self.dim is None or self.dim < 1):
            raise ValueError("hash mode requires dim >= 1")
        if self.batch_size < 1 or self.max_in_flight < 1 or self.attempts < 1:
            raise ValueError("batch_size, max_in_flight and attempts must be positive")


@dataclass
class SemanticMatrix:
    rows: np.ndarray
    provider_tag: str

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.rows.shape[0]


def serialize_graph_text(graph: GraphRecord, background: str | None = None) -> str:
    """Text handed to the text encoder.

    Stored domain text wins. Otherwise an adjacency list with nodes and
    neighbors in ascending index order, optionally after a background line.
    """
    if graph.text is not None:
        return graph.text
    lines = [background] if background else []
    lines.append(f"nodes: {graph.num_nodes}")
    for i, nb in enumerate(graph.neighbor_lists()):
        lines.append(f"{i}: " + ",".join(map(str, nb)))
    return "\n".join(lines)


def _token_hash(token: str, seed: int) -> int:
    key = seed.to_bytes(8, "little", signed=False)
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little")


def hash_embed(text: str, dim: int = 64, seed: int = 0) -> np.ndarray:
    """Signed feature hashing of lowercase alphanumeric tokens, L2-normalized."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    vec = np.zeros(dim, dtype=np.float64)
    for tok in _TOKEN_RE.findall(text.lower()):
        h = _token_hash(tok, seed)
        vec[h % dim] += -1.0 if h >> 63 else 1.0
    norm = math.sqrt(math.fsum(vec * vec))
    if norm > 0.0:
        vec /= norm
    return vec


def _check_finite(rows: np.ndarray, ids: Sequence[str] | None = None) -> None:
    bad = ~np.isfinite(rows).all(axis=1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        name = ids[i] if ids is not None else f"row {i}"
        raise EmbeddingError(f"non-finite embedding for {name}")


def load_precomputed(path: str | Path, dataset: Dataset) -> SemanticMatrix:
    """Align a precomputed embedding file to dataset order."""
    path = Path(path)
    if not path.is_file():
        raise EmbeddingError(f"embedding file not found: {path}")
    if is_binary_matrix(path):
        ids, mat, _ = read_matrix(path, SEMANTIC_MAGIC)
        rows = list(mat)
    else:
        ids, rows = read_embeddings_jsonl(path)
    lookup: dict[str, int] = {}
    for pos, gid in enumerate(ids):
        lookup.setdefault(gid, pos)

    if len(dataset) == 0:
        return SemanticMatrix(np.zeros((0, 0)), f"precomputed:{path.name}")
    out = []
    dim = None
    for rec in dataset:
        pos = lookup.get(rec.id)
        if pos is None:
            raise EmbeddingError(f"embedding missing for {rec.id}")
        row = np.asarray(rows[pos], dtype=np.float64)
        if dim is None:
            dim = row.shape[0]
        if row.ndim != 1 or row.shape[0] != dim or dim == 0:
            raise EmbeddingError(f"embedding dimension mismatch for {rec.id}: {row.shape} vs ({dim},)")
        out.append(row)
    extra = len(set(lookup) - set(dataset.index))
    if extra:
        logger.warning("%d embedding(s) in %s have ids not in the dataset; ignored", extra, path)
    mat = np.vstack(out)
    _check_finite(mat, dataset.ids)
    return SemanticMatrix(mat, f"precomputed:{path.name}")


def _post_batch(client: httpx.Client, config: SemanticProviderConfig, headers: dict,
                batch_no: int, texts: list[str]) -> np.ndarray:
    last_exc: Exception | None = None
    for attempt in range(config.attempts):
        if attempt:
            time.sleep(config.backoff * 2 ** (attempt - 1))
        try:
            resp = client.post(config.endpoint, json={"texts": texts}, headers=headers,
                               timeout=config.timeout)
        except httpx.TransportError as exc:
            last_exc = exc
            continue
        if resp.status_code == 429 or resp.status_code >= 500:
            last_exc = ServiceError(f"HTTP {resp.status_code}")
            continue
        if resp.status_code >= 400:
            raise ServiceError(f"batch {batch_no}: service rejected request with HTTP {resp.status_code}")
        try:
            vectors = resp.json()["embeddings"]
            arr = np.asarray(vectors, dtype=np.float64)
        except (ValueError, KeyError, TypeError):
            raise ServiceError(f"batch {batch_no}: malformed response body") from None
        if arr.ndim != 2 or arr.shape[0] != len(texts):
            got = arr.shape[0] if arr.ndim >= 1 else 0
            raise ServiceError(
                f"batch {batch_no}: count mismatch, sent {len(texts)} texts, received {got} embeddings"
            )
        return arr
    raise ServiceError(
        f"batch {batch_no}: embedding service unreachable after {config.attempts} attempts: {last_exc}"
    )


def embed_remote(config: SemanticProviderConfig, texts: Sequence[str],
                 client: httpx.Client | None = None) -> np.ndarray:
    """Embed ``texts`` through the remote service, rows in input order."""
    texts = list(texts)
    headers = {}
    token = os.environ.get(TOKEN_ENV)
    if token:
        headers["Authorization"] = f"Bearer {token}"
    batches = [texts[i : i + config.batch_size] for i in range(0, len(texts), config.batch_size)]
    if not batches:
        return np.zeros((0, config.dim or 0))

    own = client is None
    client = client or httpx.Client()
    try:
        with ThreadPoolExecutor(max_workers=min(config.max_in_flight, len(batches))) as pool:
            futures = [pool.submit(_post_batch, client, config, headers, b, batch)
                       for b, batch in enumerate(batches)]
            results = [f.result() for f in futures]
    finally:
        if own:
            client.close()

    dim = results[0].shape[1]
    for b, arr in enumerate(results):
        if arr.shape[1] != dim:
            raise ServiceError(f"batch {b}: dimension mismatch, got {arr.shape[1]} after {dim}")
    rows = np.vstack(results)
    bad = ~np.isfinite(rows).all(axis=1)
    if bad.any():
        raise ServiceError(f"non-finite embedding returned for row {int(np.flatnonzero(bad)[0])}")
    return rows


def embed_dataset(dataset: Dataset, config: SemanticProviderConfig,
                  client: httpx.Client | None = None) -> SemanticMatrix:
    if config.mode == "precomputed":
        return load_precomputed(config.path, dataset)
    texts = [serialize_graph_text(r, config.background) for r in dataset]
    if config.mode == "hash":
        dim = int(config.dim)
        rows = np.vstack([hash_embed(t, dim, config.hash_seed) for t in texts]) if texts else np.zeros((0, dim))
        return SemanticMatrix(rows, f"hash:dim={dim}:seed={config.hash_seed}")
    rows = embed_remote(config, texts, client=client)
    return SemanticMatrix(rows, f"remote:{config.endpoint}")
