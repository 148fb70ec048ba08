"""Binary matrix files (``GSEM1`` embeddings, ``GSFM1`` feature matrices) and
JSON Lines embedding files.

Binary layout: 5 magic bytes, uint32 LE count, uint32 LE dim, count*dim
float32 LE row-major, then ``count`` UTF-8 ids each terminated by ``\\n``.
"""
from __future__ import annotations

import json
import math
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import MatrixFormatError

SEMANTIC_MAGIC = b"GSEM1"
FEATURE_MAGIC = b"GSFM1"
_HEADER = struct.Struct("<5sII")


def write_matrix(path: str | Path, ids: Sequence[str], matrix: np.ndarray, magic: bytes = FEATURE_MAGIC) -> None:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise MatrixFormatError(f"matrix shape {matrix.shape} does not match {len(ids)} ids")
    if any("\n" in i for i in ids):
        raise MatrixFormatError("ids must not contain newlines")
    count, dim = matrix.shape
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(magic, count, dim))
        fh.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())
        fh.write("".join(f"{i}\n" for i in ids).encode("utf-8"))


def read_matrix(path: str | Path, magic: bytes | None = None) -> tuple[list[str], np.ndarray, bytes]:
    """Return ``(ids, matrix as float64, magic)``.

    ``magic=None`` accepts either format.
    """
    path = Path(path)
    if not path.is_file():
        raise MatrixFormatError(f"matrix file not found: {path}")
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise MatrixFormatError(f"{path}: truncated header")
    got, count, dim = _HEADER.unpack_from(data)
    if got not in (SEMANTIC_MAGIC, FEATURE_MAGIC) or (magic is not None and got != magic):
        raise MatrixFormatError(f"{path}: bad magic {got!r}")
    end = _HEADER.size + 4 * count * dim
    if len(data) < end:
        raise MatrixFormatError(f"{path}: truncated matrix payload")
    mat = np.frombuffer(data, dtype="<f4", count=count * dim, offset=_HEADER.size)
    mat = mat.astype(np.float64).reshape(count, dim)
    text = data[end:].decode("utf-8")
    ids = text.split("\n")
    if ids and ids[-1] == "":
        ids.pop()
    if len(ids) != count:
        raise MatrixFormatError(f"{path}: expected {count} ids, found {len(ids)}")
    return ids, mat, got


def is_binary_matrix(path: str | Path) -> bool:
    with Path(path).open("rb") as fh:
        return fh.read(5) in (SEMANTIC_MAGIC, FEATURE_MAGIC)


def read_embeddings_jsonl(path: str | Path) -> tuple[list[str], list[list[float]]]:
    ids, rows = [], []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                gid, emb = obj["id"], obj["embedding"]
            except (json.JSONDecodeError, KeyError, TypeError):
                raise MatrixFormatError(f"{path}: malformed embedding record, line {lineno}") from None
            if not isinstance(emb, list):
                raise MatrixFormatError(f"{path}: embedding is not an array, line {lineno}")
            ids.append(str(gid))
            rows.append(emb)
    return ids, rows


def write_embeddings_jsonl(path: str | Path, ids: Sequence[str], matrix: np.ndarray) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for gid, row in zip(ids, matrix):
            vals = [float(x) for x in row]
            if not all(math.isfinite(v) for v in vals):
                raise MatrixFormatError(f"non-finite embedding for {gid}")
            fh.write(json.dumps({"id": gid, "embedding": vals}) + "\n")
