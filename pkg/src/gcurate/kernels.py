"""Backend selection for the hot loops.

The compiled extension is used when it imported cleanly; set
``GCURATE_PURE_PYTHON=1`` to force the numpy fallback. Both backends give
bit-identical results, so the choice only affects speed.
"""
from __future__ import annotations

import os

from . import _fallback

try:
    if os.environ.get("GCURATE_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python backend requested")
    from . import _kernels as _impl

    BACKEND = "compiled"
except ImportError:
    _impl = _fallback
    BACKEND = "python"

rw_signature_batch = _impl.rw_signature_batch
assign_nearest = _impl.assign_nearest


def get_backend(name: str):
    """Return the kernel module for ``"compiled"`` or ``"python"``."""
    if name == "python":
        return _fallback
    if name == "compiled":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def default_threads() -> int:
    return os.cpu_count() or 1
