import numpy as np
import pytest

from dpoad.core import DiscretePdf
from dpoad.disentangler import build_score_map, disentangle, map_sensitivity, reconstruct
from dpoad.mechanisms import laplace_noise


def pdf(masses):
    return DiscretePdf.from_weights(np.asarray(masses, dtype=float))


def distinct_mass_pdf(rng, n):
    w = rng.permutation(np.linspace(1.0, 2.0, n))
    return DiscretePdf.from_weights(w)


class TestBuildScoreMap:
    def test_uniform_pdf_scores_all_one(self):
        table = build_score_map(DiscretePdf.uniform(9)).score_table
        assert np.allclose(table, 1.0)

    def test_hand_case_normalisation(self):
        table = build_score_map(pdf([0.7, 0.2, 0.1])).score_table
        raw = -np.log([0.7, 0.2, 0.1])
        assert np.allclose(table, raw / raw[-1])
        assert table[0] == pytest.approx(0.1549, abs=1e-4)
        assert table[1] == pytest.approx(0.6989, abs=1e-4)
        assert table[2] == 1.0

    def test_monotone_in_improbability(self, rng):
        for _ in range(50):
            p = distinct_mass_pdf(rng, 12)
            table = build_score_map(p).score_table
            order = np.argsort(p.mass)
            # less probable count => weakly larger score
            assert np.all(np.diff(table[order]) <= 1e-12)

    def test_floor_guards_zero_mass(self):
        p = DiscretePdf(3, np.array([0.5, 0.5, 0.0, 0.0]))
        table = build_score_map(p, n_effective=100).score_table
        assert np.isfinite(table).all()
        assert table[2] == table[3] == 1.0


class TestDisentangle:
    def test_max_mass_count_has_min_score(self, rng):
        p = distinct_mass_pdf(rng, 8)
        sm = build_score_map(p)
        scores = disentangle(np.arange(8), sm)
        assert np.argmin(scores) == np.argmax(p.mass)

    def test_empty_vector(self):
        sm = build_score_map(pdf([1, 1]))
        assert disentangle(np.array([], dtype=int), sm).size == 0

    def test_vector_equals_elementwise(self, rng):
        p = distinct_mass_pdf(rng, 6)
        sm = build_score_map(p)
        counts = rng.integers(0, 6, size=30)
        vec = disentangle(counts, sm)
        each = np.array([disentangle(np.array([c]), sm)[0] for c in counts])
        assert np.array_equal(vec, each)

    def test_out_of_domain_clamps_with_warning(self):
        sm = build_score_map(pdf([1, 2, 3]))
        with pytest.warns(UserWarning):
            scores = disentangle(np.array([5]), sm)
        assert scores[0] == sm.score_table[2]


class TestMapSensitivity:
    def test_zero_is_zero(self, rng):
        sm = build_score_map(distinct_mass_pdf(rng, 7))
        assert map_sensitivity(0.0, sm) == 0.0
        assert map_sensitivity(0.9, sm) == 0.0

    def test_full_domain_is_score_range(self, rng):
        sm = build_score_map(distinct_mass_pdf(rng, 7))
        expected = 1.0 - sm.score_table.min()
        assert map_sensitivity(6, sm) == pytest.approx(expected)

    def test_uniform_pdf_gives_zero(self):
        sm = build_score_map(DiscretePdf.uniform(5))
        assert map_sensitivity(3, sm) == 0.0

    def test_matches_pairwise_oracle(self, rng):
        sm = build_score_map(distinct_mass_pdf(rng, 9))
        t = sm.score_table
        for dq in (1, 2, 4, 8):
            oracle = max(
                abs(t[a] - t[b]) for a in range(9) for b in range(9) if abs(a - b) <= dq
            )
            assert map_sensitivity(dq, sm) == pytest.approx(oracle)


class TestReconstruct:
    def test_noiseless_round_trip_identity(self, rng):
        for _ in range(30):
            p = distinct_mass_pdf(rng, 11)
            sm = build_score_map(p)
            counts = np.arange(11)
            assert np.array_equal(reconstruct(disentangle(counts, sm), sm), counts)

    def test_below_minimum_clamps_to_min_score_count(self, rng):
        p = distinct_mass_pdf(rng, 6)
        sm = build_score_map(p)
        lowest = int(np.argmin(sm.score_table))
        assert reconstruct(np.array([-10.0]), sm)[0] == lowest

    def test_hand_case_nearest(self):
        sm = build_score_map(pdf([0.7, 0.2, 0.1]))
        assert reconstruct(np.array([0.7]), sm)[0] == 1  # nearest to 0.699

    def test_ties_break_to_lower_count_both_ways(self):
        p = pdf([0.4, 0.1, 0.4, 0.1])  # counts {0,2} tied, {1,3} tied
        sm = build_score_map(p)
        scores = disentangle(np.array([0, 1, 2, 3]), sm)
        back = reconstruct(scores, sm)
        assert back.tolist() == [0, 1, 0, 1]
        # idempotent on the quotient: a second pass fixes nothing new
        again = reconstruct(disentangle(back, sm), sm)
        assert np.array_equal(back, again)


class TestDisentanglementPayoff:
    def test_score_noise_beats_equivalent_count_noise_on_benign(self):
        # bimodal population: benign cluster {2..5}, anomalies {15..18}
        mass = np.zeros(21)
        mass[2:6] = [0.3, 0.35, 0.2, 0.1]
        mass[15:19] = 0.0125
        p = DiscretePdf.from_weights(mass)
        sm = build_score_map(p, n_effective=10_000)
        benign = np.repeat(np.arange(2, 6), [30, 35, 20, 10])
        benign_scores = disentangle(benign, sm)
        spread = benign_scores.max() - benign_scores.min()
        # score route: noise at the benign score spread covers benign pairs
        # at eps = 1; covering the *full count domain* at the same eps in
        # count space costs scale c_max - that is the entire payoff
        count_scale = 20.0
        rng = np.random.default_rng(5)
        trials = 4000
        vals = np.tile(benign, trials // benign.size + 1)[:trials]
        noisy_scores = disentangle(vals, sm) + laplace_noise(spread, rng, trials)
        err_score = np.abs(reconstruct(noisy_scores, sm) - vals).mean()
        noisy_counts = np.clip(np.floor(vals + laplace_noise(count_scale, rng, trials) + 0.5), 0, 20)
        err_count = np.abs(noisy_counts - vals).mean()
        assert err_score < err_count
