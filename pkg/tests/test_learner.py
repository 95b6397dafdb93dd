import math

import numpy as np
import pytest

from dpoad.core import DiscretePdf, kolmogorov_distance
from dpoad.learner import (
    LearnerState,
    estimate_pdf,
    phase_switch_ready,
    required_samples,
    update_pdf_with_scores,
)
from dpoad.mechanisms import laplace_noise


def laplace_cdf(t, b):
    return 0.5 * math.exp(t / b) if t < 0 else 1.0 - 0.5 * math.exp(-t / b)


def analytic_round_clamp_estimate(truth, b, c_max):
    """Oracle: exact distribution of round-half-up(v + Lap(b)) clamped to [0, c_max]."""
    est = np.zeros(c_max + 1)
    for v, pv in enumerate(truth):
        if pv == 0:
            continue
        for j in range(c_max + 1):
            lo = -math.inf if j == 0 else (j - 0.5) - v
            hi = math.inf if j == c_max else (j + 0.5) - v
            plo = 0.0 if lo == -math.inf else laplace_cdf(lo, b)
            phi = 1.0 if hi == math.inf else laplace_cdf(hi, b)
            est[j] += pv * (phi - plo)
    return est


class TestEstimatePdf:
    def test_round_clamp_hand_trace(self):
        pdf = estimate_pdf([4.7, -1.2, 6.5], 10)
        expected = np.zeros(11)
        expected[[5, 0, 7]] = 1 / 3  # half-up: 6.5 -> 7, clamp: -1.2 -> 0
        assert np.allclose(pdf.mass, expected)

    def test_empty_stream_gives_uniform(self):
        assert np.allclose(estimate_pdf([], 4).mass, 0.2)

    def test_always_a_valid_pmf(self, rng):
        for _ in range(20):
            vals = rng.normal(rng.uniform(-5, 15), rng.uniform(0.1, 20), size=50)
            pdf = estimate_pdf(vals, 12)
            assert np.all(pdf.mass >= 0)
            assert abs(pdf.mass.sum() - 1.0) < 1e-9

    def test_matches_analytic_transition_oracle(self):
        # true pmf [0.7, 0.2, 0.1] under Lap(0.5) noise: the round/clamp
        # estimator converges to the noise-convolved pmf, whose Kolmogorov
        # gap from the truth is 0.0895 (the estimator is intentionally
        # biased; no deconvolution)
        c_max = 10
        truth = np.zeros(c_max + 1)
        truth[:3] = [0.7, 0.2, 0.1]
        expected = analytic_round_clamp_estimate(truth, 0.5, c_max)
        rng = np.random.default_rng(902)
        values = rng.choice(3, size=10_000, p=[0.7, 0.2, 0.1]) + laplace_noise(0.5, rng, 10_000)
        est = estimate_pdf(values, c_max)
        assert np.max(np.abs(est.mass - expected)) < 0.02
        truth_pdf = DiscretePdf(c_max, truth)
        dk = kolmogorov_distance(est, truth_pdf)
        dk_analytic = np.max(np.abs(np.cumsum(expected) - np.cumsum(truth)))
        assert dk_analytic == pytest.approx(0.0895, abs=5e-4)
        assert dk == pytest.approx(dk_analytic, abs=0.02)


class TestRequiredSamples:
    def test_worked_example(self):
        assert required_samples(11, 0.1, 0.1, 1.0, 1.0) == 1584

    def test_halving_alpha_more_than_doubles(self):
        assert required_samples(11, 0.05, 0.1, 1.0) > 2 * required_samples(11, 0.1, 0.1, 1.0)

    def test_single_point_domain_minimal(self):
        base = required_samples(1, 0.1, 0.1, 1.0)
        for N in (2, 5, 20):
            assert required_samples(N, 0.1, 0.1, 1.0) > base


class TestPhaseSwitch:
    def test_empty_state_not_ready(self):
        state = LearnerState(c_max=10, n_bins=2)
        assert not phase_switch_ready(state, 1.0)

    def test_boundary_inclusive(self):
        state = LearnerState(c_max=10, n_bins=2)
        state.n_samples = required_samples(11, 0.1, 0.1, 1.0)
        assert phase_switch_ready(state, 1.0)
        state.n_samples -= 1
        assert not phase_switch_ready(state, 1.0)

    def test_switch_threshold_drops_as_alpha_relaxes(self):
        needs = [required_samples(11, a, 0.1, 1.0) for a in (0.05, 0.1, 0.2, 0.4)]
        assert all(a > b for a, b in zip(needs, needs[1:]))

    def test_accumulate_tracks_samples_and_estimates(self, rng):
        state = LearnerState(c_max=6, n_bins=3)
        state.accumulate(rng.normal(3, 1, size=(3, 40)))
        assert state.n_samples == 120
        assert len(state.per_bin_pdfs) == 3
        assert abs(state.current_pdf.mass.sum() - 1) < 1e-9


class TestUpdateWithScores:
    def test_all_benign_is_pure_empirical_blend(self):
        base = DiscretePdf.uniform(4)
        out = update_pdf_with_scores(base, [2, 2, 3], [0.0, 0.0, 0.0], blend=1.0)
        assert out.mass[2] == pytest.approx(2 / 3)
        assert out.mass[3] == pytest.approx(1 / 3)

    def test_all_anomalous_returns_base(self):
        base = DiscretePdf.from_weights([1, 2, 3, 4])
        out = update_pdf_with_scores(base, [0, 1], [1.0, 1.0])
        assert np.array_equal(out.mass, base.mass)

    def test_hand_trace_mass_ratio(self):
        base = DiscretePdf.uniform(10)
        out = update_pdf_with_scores(base, [2, 9], [0.0, 0.9], blend=1.0)
        assert out.mass[2] / out.mass[9] == pytest.approx(10.0)

    def test_permutation_invariance(self, rng):
        base = DiscretePdf.uniform(8)
        counts = rng.integers(0, 9, size=30)
        scores = rng.random(30)
        order = rng.permutation(30)
        a = update_pdf_with_scores(base, counts, scores)
        b = update_pdf_with_scores(base, counts[order], scores[order])
        assert np.allclose(a.mass, b.mass)

    def test_misaligned_lengths_rejected(self):
        with pytest.raises(ValueError):
            update_pdf_with_scores(DiscretePdf.uniform(3), [1, 2], [0.5])

    def test_scores_outside_unit_interval_rejected(self):
        with pytest.raises(ValueError):
            update_pdf_with_scores(DiscretePdf.uniform(3), [1], [1.5])


class TestConsistencyTrend:
    def test_median_error_nonincreasing_with_samples(self):
        truth_mass = np.array([1, 2, 4, 8, 12, 8, 4, 2, 1, 0.5, 0.5])
        truth = DiscretePdf.from_weights(truth_mass)
        counts = (250, 1000, 4000)
        errs = {n: [] for n in counts}
        for seed in range(10):
            rng = np.random.default_rng(seed)
            vals = truth.sample(rng, 4000) + laplace_noise(1.0, rng, 4000)
            for n in counts:
                est = estimate_pdf(vals[:n], 10)
                errs[n].append(kolmogorov_distance(est, truth))
        medians = [np.median(errs[n]) for n in counts]
        assert medians[0] >= medians[1] >= medians[2]
