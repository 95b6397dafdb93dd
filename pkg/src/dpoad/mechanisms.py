"""Laplace noise and the epsilon-DP Laplace mechanism over value vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels


def laplace_noise(scale_b: float, rng: np.random.Generator, size=None) -> np.ndarray | float:
    """Draw Lap(scale_b) noise by inverse CDF from the generator's uniforms.

    scale_b = 0 is the degenerate point mass at 0. One uniform is consumed
    per output value regardless of scale, so noise streams replay exactly.
    """
    if scale_b < 0:
        raise ValueError("scale must be >= 0")
    scalar = size is None
    n = 1 if scalar else int(np.prod(size))
    u = rng.random(n) - 0.5
    x = _kernels.laplace_from_uniform(u, float(scale_b))
    if scalar:
        return float(x[0])
    return x.reshape(size)


def sample_laplace(scale_b: float, rng: np.random.Generator) -> float:
    """One draw from Lap(scale_b)."""
    return laplace_noise(scale_b, rng)


@dataclass(frozen=True)
class LaplaceNoise:
    """A reproducible seeded Laplace stream with fixed scale."""

    scale_b: float
    rng_seed: int

    def __post_init__(self):
        if self.scale_b < 0:
            raise ValueError("scale must be >= 0")

    def draws(self, n: int) -> np.ndarray:
        rng = np.random.default_rng(self.rng_seed)
        return laplace_noise(self.scale_b, rng, size=n)


def laplace_mechanism(values, sensitivity: float, epsilon: float,
                      rng: np.random.Generator) -> np.ndarray:
    """Perturb each value independently with Lap(sensitivity/epsilon).

    Output is not rounded or clipped here; post-processing belongs to the
    receiving side (post-processing preserves differential privacy).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if sensitivity < 0:
        raise ValueError("sensitivity must be >= 0")
    arr = np.asarray(values, dtype=np.float64)
    noise = laplace_noise(sensitivity / epsilon, rng, size=arr.shape)
    return arr + noise


def global_sensitivity_count_query(max_records_per_individual: int) -> float:
    """Worst-case change of a bin count when one individual is added/removed."""
    if max_records_per_individual < 1:
        raise ValueError("an individual contributes at least one record")
    return float(max_records_per_individual)
