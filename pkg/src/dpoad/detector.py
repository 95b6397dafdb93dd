"""KS-test anomaly scoring, window classification, and accuracy metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import CountMatrix


def ks_statistic(sample_a, sample_b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic, sup |ECDF_a - ECDF_b|.

    Exact (integer numerator); symmetric in its arguments.
    """
    a = np.sort(np.asarray(sample_a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(sample_b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be non-empty")
    return float(_kernels.ks_distance_sorted(a, b))


def kolmogorov_sf(x: float) -> float:
    """Survival function of the Kolmogorov distribution, Q(x) = 2 sum (-1)^{k-1} e^{-2k^2x^2}."""
    if x <= 0:
        return 1.0
    if x < 0.18:
        return 1.0
    total = 0.0
    for k in range(1, 101):
        term = (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * x * x)
        total += term
        if abs(term) < 1e-17:
            break
    return min(1.0, max(0.0, 2.0 * total))


def ks_pvalue(d: float, n: int, m: int) -> float:
    """Asymptotic two-sample p-value with the small-sample size correction."""
    if n < 1 or m < 1:
        raise ValueError("sample sizes must be >= 1")
    ne = n * m / (n + m)
    x = (math.sqrt(ne) + 0.12 + 0.11 / math.sqrt(ne)) * d
    return kolmogorov_sf(x)


def score_windows(reference: CountMatrix, test: CountMatrix, mode: str = "statistic") -> np.ndarray:
    """Per-bin anomaly score of the test matrix against the reference.

    Each bin's score compares its test-window values with the reference
    distribution of the same bin. mode="statistic" returns the raw KS value
    (default); mode="pvalue" returns 1 - p.
    """
    if reference.n_bins != test.n_bins:
        raise ValueError("bin structure mismatch")
    if reference.n_windows == 0 or test.n_windows == 0:
        raise ValueError("samples must be non-empty")
    out = np.empty(test.n_bins, dtype=np.float64)
    for j in range(test.n_bins):
        ref = np.sort(reference.counts[j].astype(np.float64))
        tst = np.sort(test.counts[j].astype(np.float64))
        d = float(_kernels.ks_distance_sorted(tst, ref))
        if mode == "statistic":
            out[j] = d
        elif mode == "pvalue":
            out[j] = 1.0 - ks_pvalue(d, tst.size, ref.size)
        else:
            raise ValueError(f"unknown score mode: {mode!r}")
    return out


def combine_bin_pvalues(pvalues: np.ndarray, combine: str = "sidak-min") -> float:
    """Collapse per-bin p-values into one window-level anomaly score in [0, 1].

    sidak-min: score = 1 - (1 - (1 - p_min)^B) family correction, i.e. the
    significance of the most anomalous bin corrected for B bins (bins are
    independent under the null). max: 1 - p_min uncorrected. mean: average
    of 1 - p.
    """
    p = np.asarray(pvalues, dtype=np.float64)
    if combine == "sidak-min":
        pmin = float(p.min())
        family_p = 1.0 - (1.0 - pmin) ** p.size
        return 1.0 - family_p
    if combine == "max":
        return 1.0 - float(p.min())
    if combine == "mean":
        return float(np.mean(1.0 - p))
    raise ValueError(f"unknown combine mode: {combine!r}")


def classify(scores, threshold: float) -> np.ndarray:
    """Label = score >= threshold (boundary inclusive)."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must be in (0, 1)")
    return np.asarray(scores, dtype=np.float64) >= threshold


def precision_recall(detected: set, ground_truth: set) -> tuple[float, float]:
    """Empty detected set => precision 1; empty truth => recall 1."""
    hit = len(detected & ground_truth)
    precision = 1.0 if not detected else hit / len(detected)
    recall = 1.0 if not ground_truth else hit / len(ground_truth)
    return precision, recall


def utility_ratio_bound(epsilon: float, m: int, k: int) -> float:
    """Worst-case precision advantage over plain Laplace at quantile level k/m.

    Equals 1 exactly when k = m and grows with m/k; >= 1 always.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if not 1 <= k <= m:
        raise ValueError("need 1 <= k <= m")
    t = m / k
    e_t1 = math.exp(-epsilon * (t + 1.0))
    e_1 = math.exp(-epsilon)
    e_t = math.exp(-epsilon * t)
    num = 2.0 + e_t1 - e_1 - 2.0 * e_t
    den = 2.0 + e_t1 - e_t - 2.0 * e_1
    return num / den


@dataclass(frozen=True)
class AnomalyReport:
    """Window-level scores and labels for one iteration."""

    scores: np.ndarray
    labels: np.ndarray
    threshold: float
    iteration: int

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=bool)
        if scores.shape != labels.shape:
            raise ValueError("scores and labels must align")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must be in (0, 1)")
        if not np.array_equal(labels, scores >= self.threshold):
            raise ValueError("labels inconsistent with scores and threshold")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)


class SessionDetector:
    """Stateful per-session scorer over (bin, window) units.

    Keeps, per bin, the union of previously received pseudo-counts as the
    reference sample. When a bin has no history yet (first iteration of a
    phase) its own current values pooled across windows stand in. Scores are
    computed per bin per window and combined into window scores.
    """

    def __init__(self, n_bins: int, steps_per_window: int, score_mode: str = "pvalue",
                 combine: str = "sidak-min"):
        self.n_bins = n_bins
        self.steps_per_window = steps_per_window
        self.score_mode = score_mode
        self.combine = combine
        self._ref: list[np.ndarray] = [np.empty(0) for _ in range(n_bins)]

    def reset_reference(self) -> None:
        """Drop history (pseudo-count regime change, e.g. phase switch)."""
        self._ref = [np.empty(0) for _ in range(self.n_bins)]

    def score_iteration(self, pseudo: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Score one iteration's (bins x windows*steps) pseudo-counts.

        Returns (window_scores, per_unit_scores) where per_unit_scores is
        (bins x windows) of 1 - p (or the raw statistic in statistic mode).
        """
        s = self.steps_per_window
        if pseudo.shape[0] != self.n_bins or pseudo.shape[1] % s:
            raise ValueError("pseudo-count matrix shape mismatch")
        n_windows = pseudo.shape[1] // s
        pvals = np.empty((self.n_bins, n_windows), dtype=np.float64)
        unit_scores = np.empty((self.n_bins, n_windows), dtype=np.float64)
        for j in range(self.n_bins):
            ref = self._ref[j]
            if ref.size == 0:
                ref = pseudo[j].astype(np.float64)
            ref = np.sort(ref)
            rows = np.sort(pseudo[j].reshape(n_windows, s).astype(np.float64), axis=1)
            ds = _kernels.ks_distance_rows(rows, ref)
            for w in range(n_windows):
                p = ks_pvalue(float(ds[w]), s, ref.size)
                pvals[j, w] = p
                unit_scores[j, w] = float(ds[w]) if self.score_mode == "statistic" else 1.0 - p
        window_scores = np.array([
            combine_bin_pvalues(pvals[:, w], self.combine) if self.score_mode == "pvalue"
            else float(unit_scores[:, w].max())
            for w in range(n_windows)
        ])
        return window_scores, unit_scores

    def commit_iteration(self, pseudo: np.ndarray) -> None:
        """Append an iteration's pseudo-counts to the per-bin references."""
        for j in range(self.n_bins):
            self._ref[j] = np.concatenate([self._ref[j], pseudo[j].astype(np.float64)])
