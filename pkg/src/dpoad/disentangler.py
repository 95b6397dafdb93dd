"""Monotonic disentanglement between count space and anomaly-score space.

A ScoreMap sends each count to its normalized surprisal -ln(p)/max so that
improbable counts receive scores near 1 and sit far from the crowded benign
region. Releasing noised scores instead of noised counts concentrates the
privacy protection on the benign mass: benign counts are packed closely in
score space (cheap to confound), rare counts are isolated (survive noise).
reconstruct() is the pseudo-inverse used by the analyst to get pseudo-counts
back for detection.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import DiscretePdf

DEFAULT_N_EFFECTIVE = 1000


@dataclass(frozen=True)
class ScoreMap:
    """Immutable count -> score table plus the nearest-score inverse."""

    pdf: DiscretePdf
    score_table: np.ndarray
    # inverse structures: unique ascending scores and, per score, the lowest
    # count carrying it (ties always break toward the lower count)
    _inv_scores: np.ndarray
    _inv_counts: np.ndarray

    @property
    def c_max(self) -> int:
        return self.pdf.domain_max


def build_score_map(pdf: DiscretePdf, n_effective: int = DEFAULT_N_EFFECTIVE) -> ScoreMap:
    """Normalized negative-log-probability score table.

    The mass floor 1/(10 (c_max+1) n_effective) guards log(0) for counts the
    estimate never saw; n_effective should be the sample count behind the
    pdf. A uniform pdf maps every count to score 1 (no structure to expose).
    """
    floor = 1.0 / (10.0 * (pdf.domain_max + 1) * max(int(n_effective), 1))
    raw = -np.log(np.maximum(pdf.mass, floor))
    top = float(raw.max())
    table = raw / top if top > 0 else np.ones_like(raw)
    order = np.argsort(table, kind="stable")
    sorted_scores = table[order]
    uniq, first = np.unique(sorted_scores, return_index=True)
    low_counts = order[first]
    return ScoreMap(pdf, table, uniq, low_counts.astype(np.int64))


def disentangle(counts, score_map: ScoreMap) -> np.ndarray:
    """Elementwise score lookup; out-of-domain counts clamp with a warning."""
    arr = np.asarray(counts, dtype=np.int64)
    if arr.size == 0:
        return np.empty(arr.shape, dtype=np.float64)
    if arr.min() < 0 or arr.max() > score_map.c_max:
        warnings.warn("counts outside [0, c_max]; clamping", stacklevel=2)
        arr = np.clip(arr, 0, score_map.c_max)
    return score_map.score_table[arr]


def map_sensitivity(delta_q: float, score_map: ScoreMap) -> float:
    """Score-space image of a count-space sensitivity.

    The largest score gap over count pairs at most delta_q apart: the
    Lipschitz bound the score-space Laplace mechanism must cover.
    """
    if delta_q < 0:
        raise ValueError("delta_q must be >= 0")
    d = int(math.floor(delta_q))
    if d <= 0:
        return 0.0
    table = score_map.score_table
    n = table.size
    best = 0.0
    for off in range(1, min(d, n - 1) + 1):
        gap = float(np.max(np.abs(table[off:] - table[:-off])))
        if gap > best:
            best = gap
    return best


def reconstruct(noisy_scores, score_map: ScoreMap) -> np.ndarray:
    """Nearest-score pseudo-counts, ties toward the lower count.

    Realizes normalize(inverse(.)): nearest table entry then the domain
    clamp is implicit (every table entry is a valid count).
    """
    arr = np.asarray(noisy_scores, dtype=np.float64)
    if arr.size == 0:
        return np.empty(arr.shape, dtype=np.int64)
    if score_map._inv_scores.size == 1:
        return np.full(arr.shape, int(score_map._inv_counts[0]), dtype=np.int64)
    idx = _kernels.nearest_index(score_map._inv_scores, arr)
    return score_map._inv_counts[idx]
