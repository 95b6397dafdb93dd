"""Sensitivity-sampling calibration.

Learning phase: the (m, k) pair and the optimal confidence split rho* come
from the uniform-domain sampler's closed forms. Prediction phase: (m, k)
depend on T = 2 + n*eps/(2*N*c), which tracks how much privatized data the
analyst has accumulated, and rho* is a fitted function of m, so the pair is
resolved by a short fixed-point iteration.

All logs are natural: the Lambert-W identity exp(W_-1(.) + 1/2) only closes
under natural log.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DiscretePdf

_INV_E = math.exp(-1.0)

# prediction-phase rho* fit constants
RHO_FIT_P = 1.426
RHO_FIT_Q = 0.8389
RHO_FIT_R = 0.4589


def lambert_w_minus1(x: float) -> float:
    """W_-1 branch: the w <= -1 solving w*e^w = x, for x in [-1/e, 0).

    Halley iteration from a branch-appropriate seed; bisection fallback.
    Residual |w*e^w - x| is driven below 1e-13 (branch point exact).
    """
    if not -_INV_E <= x < 0:
        raise ValueError("lambert_w_minus1 requires -1/e <= x < 0")
    if x == -_INV_E:
        return -1.0
    # seed: series near the branch point, log asymptote toward 0-
    if x < -0.25:
        p = -math.sqrt(2.0 * (1.0 + math.e * x))
        w = -1.0 + p - p * p / 3.0 + 11.0 * p**3 / 72.0
    else:
        l1 = math.log(-x)
        l2 = math.log(-l1)
        w = l1 - l2 + l2 / l1
    for _ in range(50):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) < 1e-14 * max(abs(x), 1e-290):
            break
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w -= step
        if abs(step) < 1e-16 * abs(w):
            break
    if abs(w * math.exp(w) - x) > 1e-13:
        # bisection rescue on [-746, -1]; f is monotone decreasing there
        lo, hi = -746.0, -1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid * math.exp(mid) - x > 0:
                lo = mid
            else:
                hi = mid
        w = 0.5 * (lo + hi)
    return w


def rho_star_learning(gamma: float) -> float:
    """Optimal Kolmogorov-confidence split for the learning phase."""
    if not 0 < gamma < 1:
        raise ValueError("gamma must be in (0, 1)")
    arg = -gamma / (2.0 * math.sqrt(math.e))
    return math.exp(lambert_w_minus1(arg) + 0.5)


def rho_star_prediction(m: int) -> float:
    """Fitted k-minimising rho for the prediction phase: p/(m+q)^r."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return RHO_FIT_P / (m + RHO_FIT_Q) ** RHO_FIT_R


def m_learning(gamma: float, rho: float) -> int:
    """ceil(ln(1/rho) / (2 (gamma - rho)^2))"""
    if not 0 < rho < gamma < 1:
        raise ValueError("need 0 < rho < gamma < 1")
    val = math.log(1.0 / rho) / (2.0 * (gamma - rho) ** 2)
    if not math.isfinite(val) or val > 1e15:
        raise ValueError("rho too close to gamma: sample size diverges")
    return math.ceil(val)


def k_learning(m: int, gamma: float, rho: float) -> int:
    """ceil(m (1 - gamma + rho + sqrt(ln(1/rho)/(2m)))), clamped to m.

    The clamp firing means full protection: the chosen sensitivity is the
    maximum candidate.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0 < rho < gamma < 1:
        raise ValueError("need 0 < rho < gamma < 1")
    raw = math.ceil(m * (1.0 - gamma + rho + math.sqrt(math.log(1.0 / rho) / (2.0 * m))))
    return min(raw, m)


def compute_T(n: int, epsilon: float, N: int, c_const: float) -> float:
    """T = 2 + n*eps/(2*N*c): the accumulated-evidence term of the
    prediction-phase calibration."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if N < 1:
        raise ValueError("N must be >= 1")
    if c_const <= 0:
        raise ValueError("c_const must be > 0")
    return 2.0 + n * epsilon / (2.0 * N * c_const)


def _t_gap(T: float) -> float:
    # T - sqrt(T^2 - 4) in the cancellation-free form 4/(T + sqrt(T^2 - 4))
    return 4.0 / (T + math.sqrt(T * T - 4.0))


def m_prediction(rho: float, T: float) -> int:
    """ceil(-2 ln(1 - sqrt(1 - rho)) / (T - sqrt(T^2 - 4))^2)"""
    if not 0 < rho < 1:
        raise ValueError("rho must be in (0, 1)")
    if T <= 2.0:
        raise ValueError("insufficient learning samples: T must exceed 2")
    s = _t_gap(T)
    return math.ceil(-2.0 * math.log(1.0 - math.sqrt(1.0 - rho)) / (s * s))


def k_prediction(m: int, gamma: float, rho: float) -> int:
    """ceil(m (1 - gamma + rho + sqrt(-ln(1 - sqrt(1 - rho))/(2m)))), clamped to m."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0 < rho < 1:
        raise ValueError("rho must be in (0, 1)")
    if not 0 < gamma < 1:
        raise ValueError("gamma must be in (0, 1)")
    inner = -math.log(1.0 - math.sqrt(1.0 - rho))
    raw = math.ceil(m * (1.0 - gamma + rho + math.sqrt(inner / (2.0 * m))))
    return min(raw, m)


def rdp_diagnostic_bound(m: int, T: float) -> float:
    """[1 - exp(-m (T - sqrt(T^2-4))^2 / 2)]^2 - the lower bound on the
    uniform-CDF-approximation event. Reported for audit, never asserted."""
    if m < 0:
        raise ValueError("m must be >= 0")
    if T < 2.0:
        raise ValueError("T must be >= 2")
    if m == 0:
        return 0.0
    s = _t_gap(T)
    return (1.0 - math.exp(-m * s * s / 2.0)) ** 2


@dataclass(frozen=True)
class PredictionCalibration:
    """Resolved prediction-phase parameters.

    rho* is a fit in m while m depends on rho, so both are iterated to a
    fixed point; rho_initial and rho_converged are kept for reporting.
    m_exec/k_exec are the execution pair after the draw-count cap (the k/m
    quantile is preserved); m/k are the exact formula values.
    """

    m: int
    k: int
    rho_initial: float
    rho_converged: float
    T: float
    rounds: int
    m_exec: int
    k_exec: int

    @property
    def full_protection(self) -> bool:
        return self.k >= self.m


def calibrate_prediction(gamma: float, T: float, rho_init: float | None = None,
                         max_rounds: int = 20, tol: float = 1e-6,
                         m_cap: int = 200_000) -> PredictionCalibration:
    if rho_init is None:
        rho_init = rho_star_learning(gamma)
    rho = min(rho_init, 1.0 - 1e-12)
    m = m_prediction(rho, T)
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        rho_new = min(rho_star_prediction(m), 1.0 - 1e-12)
        m_new = m_prediction(rho_new, T)
        converged = abs(rho_new - rho) < tol
        rho, m = rho_new, m_new
        if converged:
            break
    k = k_prediction(m, gamma, rho)
    if m > m_cap:
        k_exec = max(1, math.ceil(k * m_cap / m))
        m_exec = m_cap
    else:
        m_exec, k_exec = m, k
    return PredictionCalibration(m=m, k=k, rho_initial=rho_init, rho_converged=rho,
                                 T=T, rounds=rounds, m_exec=m_exec, k_exec=k_exec)


@dataclass(frozen=True)
class SensitivitySample:
    """Sorted sensitivity candidates and the chosen order statistic (1-indexed k)."""

    candidates: np.ndarray
    k: int

    def __post_init__(self):
        cand = np.asarray(self.candidates, dtype=np.float64)
        if cand.ndim != 1 or cand.size == 0:
            raise ValueError("candidates must be a non-empty vector")
        if np.any(np.diff(cand) < 0):
            raise ValueError("candidates must be sorted ascending")
        if not 1 <= self.k <= cand.size:
            raise ValueError("k must be in [1, m]")
        object.__setattr__(self, "candidates", cand)

    @property
    def chosen(self) -> float:
        return float(self.candidates[self.k - 1])

    @property
    def m(self) -> int:
        return int(self.candidates.size)


def sample_sensitivity(dist: DiscretePdf, m: int, k: int, rng: np.random.Generator,
                       mode: str = "difference") -> SensitivitySample:
    """Draw m sensitivity candidates from a count distribution and keep the
    k-th smallest.

    mode="difference" (default): candidates are |c - c'| with c, c' iid from
    the distribution - the neighbouring-difference reading of sampled
    sensitivity. mode="direct" draws the count values themselves (ablation).
    """
    if m < 1 or not 1 <= k <= m:
        raise ValueError("need m >= 1 and 1 <= k <= m")
    if mode == "difference":
        c = dist.sample(rng, m).astype(np.int64)
        c2 = dist.sample(rng, m).astype(np.int64)
        cand = np.abs(c - c2).astype(np.float64)
    elif mode == "direct":
        cand = dist.sample(rng, m).astype(np.float64)
    else:
        raise ValueError(f"unknown sensitivity mode: {mode!r}")
    cand.sort()
    return SensitivitySample(cand, k)


def sample_sensitivity_uniform(c_max: int, m: int, k: int, rng: np.random.Generator,
                               mode: str = "difference") -> SensitivitySample:
    """Learning-phase sampler: candidates from the uniform count domain."""
    if c_max < 0:
        raise ValueError("c_max must be >= 0")
    if m < 1 or not 1 <= k <= m:
        raise ValueError("need m >= 1 and 1 <= k <= m")
    if mode == "difference":
        c = rng.integers(0, c_max + 1, size=m)
        c2 = rng.integers(0, c_max + 1, size=m)
        cand = np.abs(c - c2).astype(np.float64)
    elif mode == "direct":
        cand = rng.integers(0, c_max + 1, size=m).astype(np.float64)
    else:
        raise ValueError(f"unknown sensitivity mode: {mode!r}")
    cand.sort()
    return SensitivitySample(cand, k)
