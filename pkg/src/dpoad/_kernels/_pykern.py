"""Numpy implementations of the hot kernels.

These are the reference semantics; the compiled extension in _ckern.pyx
must agree with them (exactly for the integer KS arithmetic, to float
round-off for the Laplace transform).
"""
from __future__ import annotations

import numpy as np

IMPLEMENTATION = "python"

_TINY = np.finfo(np.float64).tiny


def laplace_from_uniform(u: np.ndarray, scale: float) -> np.ndarray:
    """Inverse-CDF Laplace transform for u in [-1/2, 1/2).

    x = -scale * sign(u) * ln(1 - 2|u|); the log argument is clamped to the
    smallest positive normal so u = -1/2 (a measure-zero draw) stays finite.
    """
    arg = 1.0 - 2.0 * np.abs(u)
    np.maximum(arg, _TINY, out=arg)
    return -scale * np.sign(u) * np.log(arg)


def ks_distance_sorted(test_sorted: np.ndarray, ref_sorted: np.ndarray) -> float:
    """Two-sample KS statistic for pre-sorted float arrays.

    Exact: the numerator max |i*m - j*n| is integer arithmetic, evaluated at
    both one-sided limits of every test breakpoint (the sup over all real x
    is attained at one of these).
    """
    n = test_sorted.size
    m = ref_sorted.size
    ar = np.searchsorted(test_sorted, test_sorted, side="right")
    al = np.searchsorted(test_sorted, test_sorted, side="left")
    br = np.searchsorted(ref_sorted, test_sorted, side="right")
    bl = np.searchsorted(ref_sorted, test_sorted, side="left")
    d_right = np.max(np.abs(ar * m - br * n))
    d_left = np.max(np.abs(al * m - bl * n))
    return float(max(d_right, d_left)) / (n * m)


def ks_distance_rows(tests_sorted: np.ndarray, ref_sorted: np.ndarray) -> np.ndarray:
    """KS statistic of each row of a (rows, n) sorted array against one reference."""
    rows, n = tests_sorted.shape
    m = ref_sorted.size
    out = np.empty(rows, dtype=np.float64)
    for r in range(rows):
        out[r] = ks_distance_sorted(tests_sorted[r], ref_sorted)
    return out


def nearest_index(sorted_values: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Index of the nearest entry of an ascending array, ties to the lower index."""
    mids = 0.5 * (sorted_values[1:] + sorted_values[:-1])
    return np.searchsorted(mids, queries, side="left")
