"""Analyst-side distribution learning from privatized releases.

Only already-noised values ever reach this module; raw counts never cross
the boundary. The estimator rounds each noisy value half-up to the nearest
integer of [0, c_max] and takes empirical frequencies (the clipped
empirical histogram construction; no deconvolution).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import DiscretePdf


def estimate_pdf(noisy_values, c_max: int) -> DiscretePdf:
    """Empirical pmf of noisy observations rounded/clamped into [0, c_max].

    An empty stream returns the uniform pmf (declared fallback).
    """
    if c_max < 0:
        raise ValueError("c_max must be >= 0")
    vals = np.asarray(noisy_values, dtype=np.float64).ravel()
    if vals.size == 0:
        return DiscretePdf.uniform(c_max)
    # half-up rounding: the estimator maps 6.5 -> 7, not banker's 6
    r = np.clip(np.floor(vals + 0.5), 0, c_max).astype(np.int64)
    freq = np.bincount(r, minlength=c_max + 1).astype(np.float64)
    return DiscretePdf.from_weights(freq, c_max)


def required_samples(N: int, alpha: float, beta: float, epsilon: float,
                     c_const: float = 1.0) -> int:
    """Sample complexity of private (alpha, beta)-learning over an N-point
    domain: ceil(c * ((N + ln(1/beta))/alpha^2 + N ln(1/beta)/(eps*alpha)))."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0 < alpha < 1 or not 0 < beta < 1:
        raise ValueError("alpha and beta must be in (0, 1)")
    if epsilon <= 0 or c_const <= 0:
        raise ValueError("epsilon and c_const must be > 0")
    lb = math.log(1.0 / beta)
    return math.ceil(c_const * ((N + lb) / alpha**2 + N * lb / (epsilon * alpha)))


@dataclass
class LearnerState:
    """Accumulated noisy counts per bin and the current estimates."""

    c_max: int
    n_bins: int
    alpha_target: float = 0.1
    beta: float = 0.1
    n_samples: int = 0
    per_bin_values: list = field(default_factory=list)
    current_pdf: DiscretePdf | None = None
    per_bin_pdfs: list = field(default_factory=list)

    def __post_init__(self):
        if not self.per_bin_values:
            self.per_bin_values = [[] for _ in range(self.n_bins)]
        if self.current_pdf is None:
            self.current_pdf = DiscretePdf.uniform(self.c_max)
        if not self.per_bin_pdfs:
            self.per_bin_pdfs = [DiscretePdf.uniform(self.c_max) for _ in range(self.n_bins)]

    def accumulate(self, noisy_matrix: np.ndarray) -> None:
        """Fold one release (bins x windows of noisy counts) into the estimates."""
        if noisy_matrix.shape[0] != self.n_bins:
            raise ValueError("bin count mismatch")
        for j in range(self.n_bins):
            self.per_bin_values[j].append(np.asarray(noisy_matrix[j], dtype=np.float64))
        self.n_samples += int(noisy_matrix.size)
        self.per_bin_pdfs = [
            estimate_pdf(np.concatenate(self.per_bin_values[j]), self.c_max)
            for j in range(self.n_bins)
        ]
        pooled = np.concatenate([v for chunks in self.per_bin_values for v in chunks])
        self.current_pdf = estimate_pdf(pooled, self.c_max)


def phase_switch_ready(state: LearnerState, epsilon: float, c_const: float = 1.0) -> bool:
    """True once the accumulated sample count reaches the learning target."""
    needed = required_samples(state.c_max + 1, state.alpha_target, state.beta,
                              epsilon, c_const)
    return state.n_samples >= needed


def update_pdf_with_scores(base_pdf: DiscretePdf, observed_counts, scores,
                           blend: float = 0.5) -> DiscretePdf:
    """Score-weighted pmf refresh: each observation contributes 1 - score.

    The weighted empirical pmf is mixed with base_pdf as
    blend * empirical + (1 - blend) * base; zero total weight returns the
    base unchanged. Higher anomaly score => lower resulting mass.
    """
    if not 0 <= blend <= 1:
        raise ValueError("blend must be in [0, 1]")
    counts = np.asarray(observed_counts, dtype=np.int64).ravel()
    sc = np.asarray(scores, dtype=np.float64).ravel()
    if counts.size != sc.size:
        raise ValueError("observed_counts and scores must align")
    if np.any((sc < 0) | (sc > 1)):
        raise ValueError("scores must be in [0, 1]")
    c_max = base_pdf.domain_max
    if counts.size == 0:
        return base_pdf
    weights = 1.0 - sc
    total = weights.sum()
    if total <= 0:
        return base_pdf
    clipped = np.clip(counts, 0, c_max)
    emp = np.bincount(clipped, weights=weights, minlength=c_max + 1) / total
    mixed = blend * emp + (1.0 - blend) * base_pdf.mass
    return DiscretePdf.from_weights(mixed, c_max)
