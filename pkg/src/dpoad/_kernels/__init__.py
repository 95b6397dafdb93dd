"""Kernel selection: compiled extension when available, numpy fallback otherwise.

Set DPOAD_PURE_PYTHON=1 to force the fallback (used by tests and the kernel
benchmark to compare both implementations).
"""
from __future__ import annotations

import os

from . import _pykern

if os.environ.get("DPOAD_PURE_PYTHON"):
    _impl = _pykern
else:
    try:
        from . import _ckern as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _pykern

IMPLEMENTATION: str = _impl.IMPLEMENTATION
laplace_from_uniform = _impl.laplace_from_uniform
ks_distance_sorted = _impl.ks_distance_sorted
ks_distance_rows = _impl.ks_distance_rows
nearest_index = _impl.nearest_index

__all__ = [
    "IMPLEMENTATION",
    "laplace_from_uniform",
    "ks_distance_sorted",
    "ks_distance_rows",
    "nearest_index",
]
