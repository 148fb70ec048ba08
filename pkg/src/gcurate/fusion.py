"""Column standardization and block concatenation of the two views."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CurateError

ZERO_STD = 1e-12


@dataclass(frozen=True)
class ColumnStats:
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray  # bool mask of columns zeroed for std < ZERO_STD

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "constant": [int(i) for i in np.flatnonzero(self.constant)],
        }


@dataclass(frozen=True)
class FusedMatrix:
    rows: np.ndarray
    struct_stats: ColumnStats
    semantic_stats: ColumnStats
    struct_dim: int

    @property
    def shape(self):
        return self.rows.shape


def zscore(matrix) -> tuple[np.ndarray, ColumnStats]:
    """Standardize columns with the population std (divide by M).

    Columns whose std is below 1e-12 become all zeros.
    """
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise CurateError(f"zscore needs a nonempty 2-D matrix, got shape {x.shape}")
    bad = ~np.isfinite(x)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise CurateError(f"non-finite entry at row {r}, column {c}")
    mean = x.mean(axis=0)
    centered = x - mean
    std = np.sqrt((centered * centered).mean(axis=0))
    constant = std < ZERO_STD
    safe = np.where(constant, 1.0, std)
    out = centered / safe
    out[:, constant] = 0.0
    return out, ColumnStats(mean, std, constant)


def fuse(struct_matrix, semantic_matrix) -> FusedMatrix:
    """Standardize each block on its own, then concatenate [structural | semantic]."""
    s = np.asarray(struct_matrix, dtype=np.float64)
    t = np.asarray(getattr(semantic_matrix, "rows", semantic_matrix), dtype=np.float64)
    if s.shape[0] != t.shape[0]:
        raise CurateError(f"row-count mismatch: {s.shape[0]} structural vs {t.shape[0]} semantic rows")
    zs, ss = zscore(s)
    zt, st = zscore(t)
    return FusedMatrix(np.hstack([zs, zt]), ss, st, s.shape[1])
