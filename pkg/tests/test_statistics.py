import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from bilocal import network as nw
from bilocal import statistics as stats

TARGET = nw.b13_closed_form(0.965, math.sqrt(0.93), 0, math.sqrt(0.93), 0)


@pytest.fixture(scope="module")
def noisy_cfg():
    return nw.NetworkConfig.from_swapped(0.93, 0.965)


class TestSampling:
    def test_deterministic(self, noisy_cfg):
        a = stats.sample_counts(noisy_cfg, 5000, seed=3)
        b = stats.sample_counts(noisy_cfg, 5000, seed=3)
        assert np.array_equal(a.counts, b.counts)
        c = stats.sample_counts(noisy_cfg, 5000, seed=4)
        assert not np.array_equal(a.counts, c.counts)

    def test_worker_count_irrelevant(self, noisy_cfg):
        n = stats.SHARD_SIZE * 2 + 17
        one = stats.sample_counts(noisy_cfg, n, seed=11, workers=1)
        four = stats.sample_counts(noisy_cfg, n, seed=11, workers=4)
        assert np.array_equal(one.counts, four.counts)
        assert (one.counts.sum(axis=(2, 3, 4)) == n).all()

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_converges_to_model(self, noisy_cfg, seed):
        t = stats.counts_to_table(stats.sample_counts(noisy_cfg, 10**6, seed))
        est = stats.b13_with_error(t, 500, seed)
        assert abs(est.value - TARGET) < 5 * est.sigma

    def test_ideal_within_4_sigma(self):
        t = stats.counts_to_table(stats.sample_counts(nw.NetworkConfig.bilocality(), 10**6, 5))
        est = stats.b13_with_error(t, 500, 5)
        assert abs(est.value - math.sqrt(1.5)) < 4 * est.sigma

    def test_rejects_zero_trials(self, noisy_cfg):
        with pytest.raises(ValueError):
            stats.sample_counts(noisy_cfg, 0, 1)


class TestCountsTable:
    def test_poisson_rule(self):
        counts = np.zeros(nw.TABLE_SHAPE, dtype=int)
        counts[0, 0, 0, 0, 0] = 100
        t = stats.counts_to_table(stats.CountsTable(counts, np.full((2, 2), 10000)))
        assert t.probs[0, 0, 0, 0, 0] == pytest.approx(0.01)
        assert t.sigma[0, 0, 0, 0, 0] == pytest.approx(0.001)
        assert t.probs[0, 0, 0, 0, 1] == 0
        assert t.sigma[0, 0, 0, 0, 1] == pytest.approx(1e-4)

    def test_validation(self):
        counts = np.ones(nw.TABLE_SHAPE, dtype=int)
        with pytest.raises(ValueError, match="only 5 trials"):
            stats.CountsTable(counts, np.full((2, 2), 5))
        with pytest.raises(ValueError):
            stats.CountsTable(-counts, np.full((2, 2), 50))
        with pytest.raises(ValueError, match="no trials"):
            stats.counts_to_table(stats.CountsTable(0 * counts, np.zeros((2, 2))))

    def test_json_round_trip(self, tmp_path, noisy_cfg):
        c = stats.sample_counts(noisy_cfg, 1000, 9)
        c.dump(tmp_path / "c.json")
        back = stats.CountsTable.load(tmp_path / "c.json")
        assert np.array_equal(back.counts, c.counts) and np.array_equal(back.trials, c.trials)

    def test_malformed(self, tmp_path):
        with pytest.raises(ValueError, match="trials"):
            stats.CountsTable.from_json({"counts": []})
        with pytest.raises(ValueError, match="malformed"):
            stats.CountsTable.from_json({"trials": {"0,0": 1, "0,1": 1, "1,0": 1, "1,1": 1},
                                         "counts": [{"x": 0, "z": 0, "b": "zz", "a": 0, "c": 0, "n": 1}]})
        (tmp_path / "bad.json").write_text("[")
        with pytest.raises(ValueError, match="invalid JSON"):
            stats.CountsTable.load(tmp_path / "bad.json")

    @pytest.mark.parametrize("n", [8000, 10**6])
    def test_exact_counts_reproduce_model(self, noisy_cfg, n):
        counts = np.rint(nw.model_probs(noisy_cfg) * n).astype(int)
        trials = counts.sum(axis=(2, 3, 4))
        t = stats.counts_to_table(stats.CountsTable(counts, trials))
        assert nw.b13(t).b13 == pytest.approx(TARGET, abs=2 / n)


class TestBootstrap:
    def test_zero_sigma(self):
        t = nw.model_table(nw.NetworkConfig.bilocality())
        est = stats.b13_with_error(t, 200, 0)
        assert est.sigma < 1e-12
        assert est.value == pytest.approx(math.sqrt(1.5))

    def test_sigma_scales_linearly(self):
        t = nw.measured_table()
        s1 = stats.b13_with_error(t, 2000, 1).sigma
        s2 = stats.b13_with_error(nw.ProbabilityTable(t.probs, 2 * t.sigma), 2000, 1).sigma
        assert s2 / s1 == pytest.approx(2.0, rel=0.2)

    def test_printed_table_sigma(self):
        est = stats.b13_with_error(nw.measured_table(), 2000, 0)
        assert 4e-3 / 3 < est.sigma < 4e-3 * 3

    def test_inverse_sqrt_n(self, noisy_cfg):
        sig = {}
        for n in (10**4, 10**5, 10**6):
            t = stats.counts_to_table(stats.sample_counts(noisy_cfg, n, 21))
            sig[n] = stats.b13_with_error(t, 1000, 21).sigma
        assert sig[10**4] / sig[10**5] == pytest.approx(math.sqrt(10), rel=0.3)
        assert sig[10**5] / sig[10**6] == pytest.approx(math.sqrt(10), rel=0.3)

    def test_seeded(self):
        t = nw.measured_table()
        assert stats.b13_with_error(t, 300, 8) == stats.b13_with_error(t, 300, 8)

    def test_minimum_resamples(self):
        with pytest.raises(ValueError):
            stats.b13_with_error(nw.measured_table(), 10)

    def test_chsh_error(self):
        counts = stats.sample_counts(nw.NetworkConfig.from_swapped(0.93, 1.0, mode="chsh"), 8000, 2)
        est = stats.chsh_with_error(stats.counts_to_table(counts), 500, 2)
        assert abs(est.value - nw.chsh_closed_form(1, math.sqrt(0.93), 0, math.sqrt(0.93), 0)) < 5 * est.sigma
        assert 0.01 < est.sigma < 0.2


def test_estimate_rejects_negative_sigma():
    with pytest.raises(ValueError):
        stats.EstimateWithError(1.0, -0.1)


class TestSmallEstimators:
    def test_visibility(self):
        assert stats.visibility_estimate(100, 0) == 1
        assert stats.visibility_estimate(100, 100) == 0
        assert stats.visibility_estimate(985, 15) == pytest.approx(0.97)
        with pytest.raises(ValueError):
            stats.visibility_estimate(0, 0)

    def test_noise_parameter(self):
        assert stats.noise_parameter(50, 50) == 0
        assert stats.noise_parameter(0, 50) == 1
        assert stats.noise_parameter(0.035 * 400, 400) == pytest.approx(0.965)
        with pytest.raises(ValueError):
            stats.noise_parameter(1, 0)

    def test_basis_fidelity(self):
        assert stats.qrng_basis_fidelity(1, 1) == 0.5
        assert stats.qrng_basis_fidelity(9849, 151) == pytest.approx(0.9849)
        assert (0.9849 + 0.9956) / 2 == pytest.approx(0.99025)

    def test_fidelity_to_visibility(self):
        assert stats.fidelity_to_visibility(1) == 1
        assert stats.fidelity_to_visibility(0.25) == 0
        assert stats.fidelity_to_visibility(0.9853) == pytest.approx(0.9804, abs=1e-4)
        with pytest.raises(ValueError):
            stats.fidelity_to_visibility(0.1)


class TestHomBounds:
    def test_values(self):
        assert stats.hom_visibility_bound(0, False) == stats.hom_visibility_bound(0, True) == 1
        assert stats.hom_visibility_bound(0.012, False) == pytest.approx(0.958, abs=5e-4)
        assert stats.hom_visibility_bound(0.012, True) == pytest.approx(0.978, abs=5e-4)

    @given(st.floats(0, 10))
    def test_discarding_helps(self, mu):
        keep = stats.hom_visibility_bound(mu, False)
        assert stats.hom_visibility_bound(mu, True) >= keep - 1e-15
        assert 0 < keep <= 1

    def test_negative_mu(self):
        with pytest.raises(ValueError):
            stats.hom_visibility_bound(-0.1)


class TestHomFit:
    delays = np.linspace(-3, 3, 50)

    def test_noiseless_round_trip(self):
        y = stats.hom_dip(self.delays, 1000, 0.965, 0.8)
        fit = stats.hom_dip_fit(np.c_[self.delays, y])
        assert fit.visibility.value == pytest.approx(0.965, abs=1e-6)
        assert fit.width == pytest.approx(0.8, rel=1e-6)
        assert not fit.degenerate

    def test_flat(self):
        fit = stats.hom_dip_fit(np.c_[self.delays, np.full(50, 300.0)])
        assert fit.visibility.value == 0 and fit.degenerate and math.isnan(fit.width)

    def test_noise_coverage(self):
        inside = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            y = stats.hom_dip(self.delays, 1000, 0.965, 0.8) * (1 + 0.01 * rng.standard_normal(50))
            fit = stats.hom_dip_fit(np.c_[self.delays, y])
            inside += abs(fit.visibility.value - 0.965) <= 3 * fit.visibility.sigma
        assert inside >= 97

    def test_input_checks(self):
        with pytest.raises(ValueError):
            stats.hom_dip_fit([(0, 1), (1, 1)])
        with pytest.raises(stats.FitError):
            stats.hom_dip_fit(np.c_[self.delays, np.zeros(50)])

    def test_csv(self, tmp_path):
        path = tmp_path / "dip.csv"
        y = stats.hom_dip(self.delays, 500, 0.9, 1.0)
        path.write_text("delay_ps,coincidences\n" + "".join(f"{d},{c}\n" for d, c in zip(self.delays, y)))
        assert_allclose(stats.load_hom_csv(path), np.c_[self.delays, y])
        path.write_text("t,n\n1,2\n")
        with pytest.raises(ValueError, match="header"):
            stats.load_hom_csv(path)
        path.write_text("delay_ps,coincidences\n1,x\n")
        with pytest.raises(ValueError, match=":2"):
            stats.load_hom_csv(path)
