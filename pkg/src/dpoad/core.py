"""Domain types shared across the protocol, plus distribution distances.

Counts live on the declared integer domain {0..c_max}; the data owner fixes
c_max in configuration and every distribution, score table and sensitivity
sample is defined over that domain.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

MASS_TOL = 1e-9


class Phase(enum.Enum):
    LEARNING = "learning"
    PREDICTION = "prediction"


def validate_records(records) -> np.ndarray:
    """Coerce to a (n_records, arity) float array; reject non-finite values."""
    arr = np.asarray(records, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError("records must be a 1-D or 2-D array")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError("records contain non-finite values")
    return arr


@dataclass(frozen=True)
class Histogram:
    """Binned counts for one time window."""

    bin_edges: np.ndarray
    counts: np.ndarray
    window: int = 0

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.int64)
        if edges.ndim != 1 or edges.size < 2:
            raise ValueError("bin_edges must hold at least two edges")
        if not np.all(np.diff(edges) > 0):
            raise ValueError("bin_edges must be strictly increasing")
        if counts.ndim != 1 or counts.size != edges.size - 1:
            raise ValueError("counts length must be len(bin_edges) - 1")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)


@dataclass(frozen=True)
class CountMatrix:
    """Rows are histogram bins, columns are time windows."""

    counts: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=np.int64)
        if arr.ndim != 2:
            raise ValueError("count matrix must be 2-D (bins x windows)")
        if np.any(arr < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", arr)

    @property
    def n_bins(self) -> int:
        return self.counts.shape[0]

    @property
    def n_windows(self) -> int:
        return self.counts.shape[1]


@dataclass(frozen=True)
class DiscretePdf:
    """Probability mass over the count domain {0..domain_max}."""

    domain_max: int
    mass: np.ndarray

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=np.float64)
        if self.domain_max < 0:
            raise ValueError("domain_max must be >= 0")
        if mass.ndim != 1 or mass.size != self.domain_max + 1:
            raise ValueError("mass length must be domain_max + 1")
        if np.any(mass < 0):
            raise ValueError("mass must be non-negative")
        if abs(float(mass.sum()) - 1.0) > MASS_TOL:
            raise ValueError("mass must sum to 1")
        object.__setattr__(self, "mass", mass)

    @classmethod
    def uniform(cls, domain_max: int) -> "DiscretePdf":
        n = domain_max + 1
        return cls(domain_max, np.full(n, 1.0 / n))

    @classmethod
    def from_weights(cls, weights, domain_max: int | None = None) -> "DiscretePdf":
        """Clip negatives to zero and renormalise; all-zero weights give uniform."""
        w = np.maximum(np.asarray(weights, dtype=np.float64), 0.0)
        if domain_max is None:
            domain_max = w.size - 1
        total = w.sum()
        if total <= 0:
            return cls.uniform(domain_max)
        return cls(domain_max, w / total)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(self.domain_max + 1, size=size, p=self.mass)


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    gamma: float
    rho: float
    phase: Phase = Phase.LEARNING

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must be in (0, 1)")
        if not 0 < self.rho < min(self.gamma, 0.5):
            raise ValueError("rho must be in (0, min(gamma, 1/2))")


def _check_same_domain(p: DiscretePdf, q: DiscretePdf) -> None:
    if p.domain_max != q.domain_max:
        raise ValueError("distributions must share the same domain")


def kolmogorov_distance(p: DiscretePdf, q: DiscretePdf) -> float:
    """max_j |sum_{i<=j} p(i) - sum_{i<=j} q(i)|"""
    _check_same_domain(p, q)
    return float(np.max(np.abs(np.cumsum(p.mass) - np.cumsum(q.mass))))


def tv_distance(p: DiscretePdf, q: DiscretePdf) -> float:
    """0.5 * sum_i |p(i) - q(i)|"""
    _check_same_domain(p, q)
    return float(0.5 * np.sum(np.abs(p.mass - q.mass)))


def bin_indices(values: np.ndarray, bin_edges: np.ndarray) -> np.ndarray:
    """Half-open bins [edge_j, edge_{j+1}); out-of-range values clamp into the
    first/last bin so tail anomalies survive binning."""
    k = bin_edges.size - 1
    idx = np.searchsorted(bin_edges, values, side="right") - 1
    return np.clip(idx, 0, k - 1)


def build_histogram(records, bin_edges, attribute_index: int = 0, window: int = 0) -> Histogram:
    arr = validate_records(records)
    edges = np.asarray(bin_edges, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError("bin_edges must hold at least two edges")
    if not np.all(np.diff(edges) > 0):
        raise ValueError("bin_edges must be strictly increasing")
    if arr.size and not 0 <= attribute_index < arr.shape[1]:
        raise ValueError("attribute_index out of range")
    k = edges.size - 1
    if arr.size == 0:
        return Histogram(edges, np.zeros(k, dtype=np.int64), window)
    idx = bin_indices(arr[:, attribute_index], edges)
    return Histogram(edges, np.bincount(idx, minlength=k), window)


def build_count_matrix(step_values: list[np.ndarray], bin_edges: np.ndarray) -> CountMatrix:
    """Histogram a sequence of time windows into a (bins x windows) matrix.

    step_values holds one 1-D value array per time window (a single
    attribute already selected).
    """
    edges = np.asarray(bin_edges, dtype=np.float64)
    k = edges.size - 1
    n_steps = len(step_values)
    out = np.zeros((k, n_steps), dtype=np.int64)
    if n_steps == 0:
        return CountMatrix(out)
    lengths = np.fromiter((v.size for v in step_values), dtype=np.int64, count=n_steps)
    if lengths.sum() == 0:
        return CountMatrix(out)
    flat = np.concatenate([np.asarray(v, dtype=np.float64) for v in step_values])
    if flat.size and not np.all(np.isfinite(flat)):
        raise ValueError("records contain non-finite values")
    step_ids = np.repeat(np.arange(n_steps), lengths)
    idx = bin_indices(flat, edges)
    np.add.at(out, (idx, step_ids), 1)
    return CountMatrix(out)
