"""Tests for the Monte Carlo gap estimators and their supporting checks."""

import numpy as np
import pytest

from corrmimo import channel as ch
from corrmimo import link, matcore
from corrmimo import metrics as mt
from corrmimo import precoding as pc


def per_draw(model, m, rho, trials, seed, alpha=2.0):
    """Reference link quantities from explicit precoders on each draw."""
    builders = {
        "perf_unconst": lambda h: pc.perfect_unconstrained(h, m, rho),
        "perf_semi": lambda h: pc.perfect_semiunitary(h, m, rho),
        "perf_equalized": lambda h: pc.perfect_equalized(h, m, rho),
        "perf_fixed": lambda h: pc.perfect_fixed(h, m, rho, pc.stat_fixed_powers(model, m, rho, alpha)),
        "stat_semi": lambda h: pc.stat_semiunitary(model, m, rho),
        "stat_fixed": lambda h: pc.stat_fixed(model, m, rho, alpha),
    }
    out = {k: ([], []) for k in builders}
    for r in mt.iter_realizations(model, trials, seed):
        for k, build in builders.items():
            p = build(r)
            out[k][0].append(link.mutual_info(r.h, p))
            out[k][1].append(link.sinr(r.h, p))
    return {k: (np.array(a), np.array(b)) for k, (a, b) in out.items()}


@pytest.fixture(scope="module")
def rotated_model():
    rng = np.random.default_rng(4)
    return ch.SeparableModel(
        [7.0, 5.0, 3.0, 1.0], [6.0, 4.0, 4.0, 2.0],
        matcore.random_unitary(4, rng), matcore.random_unitary(4, rng),
    )


class TestEngine:
    @pytest.mark.parametrize("rho", [0.3, 4.0])
    def test_closed_forms_match_explicit_precoders(self, rotated_model, rho):
        trials = 60
        ref = per_draw(rotated_model, 2, rho, trials, seed=11)
        spectra = mt.draw_spectra(rotated_model, 2, trials, 11)
        for scheme, (mi, sinr) in ref.items():
            out = mt.scheme_outcome(spectra, scheme, rho)
            np.testing.assert_allclose(out.mi, mi, rtol=1e-9, atol=1e-12, err_msg=scheme)
            if scheme != "perf_equalized":
                np.testing.assert_allclose(out.sinr, sinr, rtol=1e-8, atol=1e-10, err_msg=scheme)
            else:
                np.testing.assert_allclose(out.sinr, np.sort(sinr, axis=1), rtol=1e-8, atol=1e-10)

    def test_canonical_closed_forms(self):
        model = ch.CanonicalModel(ch.CANONICAL_4X4_PROFILE)
        ref = per_draw(model, 2, 2.0, 40, seed=3)
        spectra = mt.draw_spectra(model, 2, 40, 3)
        for scheme in ("perf_unconst", "stat_semi", "stat_fixed"):
            out = mt.scheme_outcome(spectra, scheme, 2.0)
            np.testing.assert_allclose(out.mi, ref[scheme][0], rtol=1e-9)

    def test_thread_count_independence(self, monkeypatch, rotated_model):
        runs = []
        for threads in ("1", "3"):
            monkeypatch.setenv("CORRMIMO_THREADS", threads)
            assert mt.thread_count() == int(threads)
            s = mt.draw_spectra(rotated_model, 2, 5000, 8)
            runs.append((s.lam.tobytes(), s.b.tobytes()))
        assert runs[0] == runs[1]

    def test_chunking(self):
        chunks = mt.chunk_generators(0, 2 * mt.CHUNK_SIZE + 5)
        assert [c for c, _ in chunks] == [mt.CHUNK_SIZE, mt.CHUNK_SIZE, 5]
        with pytest.raises(ValueError):
            mt.chunk_generators(0, 0)

    def test_log_error_prob_matches_link(self, rotated_model):
        spectra = mt.draw_spectra(rotated_model, 2, 200, 1)
        out = mt.scheme_outcome(spectra, "stat_semi", 3.0, link.QPSK)
        p = link.stream_error_prob(out.sinr, link.QPSK)
        np.testing.assert_allclose(np.exp(out.log_p_avg), p.mean(axis=1), rtol=1e-10)
        anyp = np.array([link.error_prob_any(row) for row in p])
        np.testing.assert_allclose(np.exp(out.log_p_any), anyp, rtol=1e-9)


class TestEstimators:
    def test_ratio_of_means_stderr(self):
        # delta-method stderr against the spread over independent replications
        rng = np.random.default_rng(0)
        reps, ests = 400, []
        for _ in range(reps):
            den = rng.exponential(2.0, 500)
            num = 0.3 * den + rng.normal(0, 0.5, 500)
            ests.append(mt.ratio_of_means(num, den))
        spread = np.std([e.mean for e in ests], ddof=1)
        mean_se = np.mean([e.stderr for e in ests])
        assert abs(mean_se / spread - 1) < 0.15

    def test_estimate_vector(self):
        e = mt.estimate(np.array([[1.0, 2.0], [3.0, 4.0]]))
        np.testing.assert_allclose(e.mean, [2.0, 3.0])


class TestDeltaReport:
    def test_matched_zero_subspace_gap(self):
        model = ch.make_matched(4, 4, 2, 16)
        spectra = mt.draw_spectra(model, 2, 1000, 5)
        a = mt.scheme_outcome(spectra, "perf_semi", 10.0)
        b = mt.scheme_outcome(spectra, "stat_semi", 10.0)
        assert np.max(np.abs(a.mi - b.mi)) < 1e-9
        # streams differ by a rotation, so only rotation-invariant sums agree
        np.testing.assert_allclose(a.mse.sum(axis=1), b.mse.sum(axis=1), rtol=1e-9)
        rep = mt.estimate_delta(model, 2, 10.0, "perf_semi", "stat_semi", spectra=spectra)
        assert abs(rep.delta_i2.mean) < 1e-12

    def test_identical_schemes(self, rotated_model):
        rep = mt.estimate_delta(rotated_model, 2, 3.0, "stat_semi", "stat_semi", trials=500)
        for name in ("delta_i", "delta_i1", "delta_i2", "delta_p", "delta_mse", "delta_sinr"):
            assert np.all(np.asarray(getattr(rep, name).mean) == 0), name

    def test_decomposition_exact(self, rotated_model):
        rep = mt.estimate_delta(rotated_model, 2, 3.0, trials=2000)
        assert rep.intermediate == "perf_semi"
        assert rep.delta_i1.mean + rep.delta_i2.mean == pytest.approx(rep.delta_i.mean, abs=1e-14)

    def test_intermediate_is_benchmark(self, rotated_model):
        rep = mt.estimate_delta(rotated_model, 2, 3.0, "perf_semi", "stat_semi", trials=500)
        assert rep.intermediate == "perf_semi" and rep.delta_i1.mean == 0

    def test_ratio_conventions(self, rotated_model):
        spectra = mt.draw_spectra(rotated_model, 2, 3000, 2)
        rep = mt.estimate_delta(rotated_model, 2, 3.0, spectra=spectra)
        ob = mt.scheme_outcome(spectra, "perf_unconst", 3.0)
        ot = mt.scheme_outcome(spectra, "stat_semi", 3.0)
        assert rep.delta_i.mean == pytest.approx((ob.mi - ot.mi).mean() / ot.mi.mean(), rel=1e-12)
        pb, pt = np.exp(ob.log_p_avg), np.exp(ot.log_p_avg)
        assert rep.delta_p.mean == pytest.approx(np.mean((pt - pb) / pb), rel=1e-9)
        assert rep.delta_i.mean > 0 and rep.delta_p.mean > 0

    def test_p_definitions_agree_at_small_p(self, rotated_model):
        rep = mt.estimate_delta(rotated_model, 2, 10.0, "perf_semi", "stat_semi", trials=2000)
        assert rep.p_benchmark.mean < 1e-3
        assert rep.delta_p_any.mean == pytest.approx(rep.delta_p.mean, rel=1e-3)

    def test_tilde_discards(self):
        # near-zero power makes many test-scheme mutual informations tiny
        model = ch.SeparableModel([3.0, 1.0], [4.0])
        rep = mt.estimate_delta(model, 1, 1e-11, "perf_semi", "stat_semi", trials=3000)
        assert rep.discarded["delta_i_tilde"] > 0
        assert rep.delta_i_tilde.trials == 3000 - rep.discarded["delta_i_tilde"]

    def test_unknown_scheme(self, rotated_model):
        with pytest.raises(ValueError):
            mt.estimate_delta(rotated_model, 2, 1.0, test="magic", trials=10)

    def test_bit_identical(self, rotated_model):
        a = mt.estimate_delta(rotated_model, 2, 2.0, trials=3000, seed=9)
        b = mt.estimate_delta(rotated_model, 2, 2.0, trials=3000, seed=9)
        assert a.delta_i.mean == b.delta_i.mean and a.delta_p.stderr == b.delta_p.stderr


class TestBeamforming:
    def test_rank_one_zero(self):
        model = ch.SeparableModel([16.0, 0, 0, 0], [4.0] * 4)
        di, dp = mt.estimate_delta_beamforming(model, 10.0, trials=2000)
        assert abs(di.mean) < 1e-12 and abs(dp.mean) < 1e-9

    def test_iid_positive_snapshot(self):
        model = ch.SeparableModel([4.0] * 4, [4.0] * 4)
        di, dp = mt.estimate_delta_beamforming(model, 10.0, trials=100_000, seed=0)
        assert di.mean > 0 and dp.mean > 0
        # regression snapshot recorded from this engine (seed 0, 1e5 draws)
        assert di.mean == pytest.approx(0.267578187867, abs=1e-9)


class TestDeltaSinrIdentity:
    def test_random_separable(self, rng):
        for _ in range(50):
            lt = np.sort(rng.uniform(0.2, 3, 4))[::-1]
            lr = np.sort(rng.uniform(0.2, 3, 4))[::-1]
            lr *= lt.sum() / lr.sum()
            model = ch.SeparableModel(lt, lr)
            h = ch.sample(model, rng)
            for k in range(2):
                assert mt.delta_sinr_identity_check(h, model, 2, float(rng.uniform(0.5, 20)), k)

    def test_single_stream(self, rng):
        model = ch.SeparableModel([3.0, 1.0], [2.0, 2.0])
        assert mt.delta_sinr_identity_check(ch.sample(model, rng), model, 1, 5.0, 0)

    def test_needs_separable(self, rng):
        model = ch.CanonicalModel(ch.CANONICAL_4X4_PROFILE)
        with pytest.raises(ValueError):
            mt.delta_sinr_identity_check(ch.sample(model, rng), model, 2, 1.0, 0)


class TestGapStatistics:
    def test_examples(self):
        g = mt.gap_statistics(ch.SeparableModel([9.80, 5.66, 0.45, 0.09], [4.0] * 4), 2)
        assert g.gap_t == pytest.approx(1 - 5.66 / 9.80)
        assert g.gap_t == pytest.approx(0.4224, abs=1e-4)
        assert g.mu_r2 == pytest.approx(16.0)
        assert mt.gap_statistics(ch.SeparableModel([8.0, 8.0], [8.0, 8.0]), 2).g_m_lambda_t == pytest.approx(8.0)


class TestSupport:
    def test_iid(self):
        rep = mt.rmt_support_check(4, 2000, trials=200)
        assert rep.violations < 0.01

    def test_scalar(self):
        rep = mt.rmt_support_check(1, 2000, trials=200)
        assert rep.violations == 0.0
        assert abs(rep.empirical_extremes.mean() - 1.0) < 0.01

    def test_weighted_fit_reported(self):
        w = np.linspace(0.5, 1.5, 2000)
        rep = mt.rmt_support_check(4, 2000, weights=w, trials=100)
        dev = np.abs(rep.empirical_extremes - w.mean()).max()
        assert rep.gamma_fit == pytest.approx(dev / np.sqrt(4 / 2000))
        assert rep.violations < 0.01

    def test_profile(self):
        prof = np.outer([2.0, 1.0, 1.0, 0.5], np.ones(1000))
        rep = mt.rmt_support_check(4, 1000, variance_profile=prof, trials=100)
        assert rep.violations < 0.01

    def test_args(self):
        with pytest.raises(ValueError):
            mt.rmt_support_check(5, 4)
