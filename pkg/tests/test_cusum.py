import math

import numpy as np
import pytest

from lindley_laplace import fet
from lindley_laplace.core import LaplaceParams, RegimeTag, dispatch_fet_regime
from lindley_laplace.cusum import (
    THETA_MIN,
    CusumSpec,
    average_run_length,
    detector_config,
    llr_params,
    log_mgf,
    post_change_mean,
    run_length_distribution,
    sample_post_change,
    simulate_run_lengths,
)

SPEC = CusumSpec(LaplaceParams(0.0, 1.0), 0.5, 3.0)


class TestLogMgf:
    def test_values(self):
        assert log_mgf(SPEC) == pytest.approx(-math.log(0.75), abs=1e-12)
        assert log_mgf(SPEC) == pytest.approx(0.2876821, abs=1e-7)
        s = CusumSpec(LaplaceParams(0.3, 2.0), 0.4, 1.0)
        assert log_mgf(s) == pytest.approx(0.12 - math.log(1 - 0.64), rel=1e-14)
        assert log_mgf(s) == pytest.approx(1.1417, abs=1e-4)

    def test_vanishes_with_tilt(self):
        s = CusumSpec(LaplaceParams(1.0, 1.0), THETA_MIN, 1.0)
        assert abs(log_mgf(s)) < 2e-6

    def test_matches_empirical_mgf(self, rng):
        s = CusumSpec(LaplaceParams(0.2, 0.7), 0.3, 1.0)
        z = rng.laplace(0.2, 0.7, 2_000_000)
        w = np.exp(0.3 * z)
        assert math.log(w.mean()) == pytest.approx(log_mgf(s), abs=4 * w.std() / w.mean() / 1414)


class TestMapping:
    def test_llr_law(self):
        p = llr_params(SPEC)
        assert p.mu == pytest.approx(-0.2876821, abs=1e-7)
        assert p.sigma == 0.5

    def test_post_change_mean(self):
        assert post_change_mean(SPEC) == pytest.approx(2 * 0.5 / 0.75, rel=1e-15)

    @pytest.mark.parametrize("theta,sigma", [(1.5, 1.0), (1.0, 1.0), (0.0, 1.0), (-0.2, 1.0),
                                             (0.6, 2.0), (1e-7, 1.0)])
    def test_rejects_tilts(self, theta, sigma):
        with pytest.raises(ValueError):
            CusumSpec(LaplaceParams(0.0, sigma), theta, 3.0)

    def test_rejects_threshold(self):
        with pytest.raises(ValueError):
            CusumSpec(LaplaceParams(0.0, 1.0), 0.5, 0.0)

    def test_detector_regime(self):
        cfg = detector_config(SPEC)
        assert cfg.h == 3.0 and cfg.x == 0.0
        assert dispatch_fet_regime(cfg) is RegimeTag.FetMuNeg


class TestRunLength:
    def test_delegates_bit_identically(self):
        a = run_length_distribution(SPEC, 0.0, 60)
        b = fet.fet_values(detector_config(SPEC), 0.0, 60)
        np.testing.assert_array_equal(a, b)

    def test_first_hundred_steps_against_simulation(self):
        # an alarm within 100 observations is far from certain at this threshold
        p = run_length_distribution(SPEC, 0.0, 100)
        assert p.sum() == pytest.approx(0.3977, abs=5e-4)
        rl = simulate_run_lengths(SPEC, 0.0, 200_000, seed=42, n_cap=100, threads=4)
        emp = np.mean(rl <= 100)
        se = math.sqrt(emp * (1 - emp) / rl.size)
        assert abs(emp - p.sum()) < 4 * se

    def test_pmf_against_simulation(self):
        p = run_length_distribution(SPEC, 0.0, 40)
        rl = simulate_run_lengths(SPEC, 0.0, 300_000, seed=1, n_cap=40)
        freq = np.bincount(rl, minlength=42)[1:41] / rl.size
        se = np.sqrt(p * (1 - p) / rl.size)
        assert np.all(np.abs(freq - p) < 4 * se + 1e-12)

    @pytest.mark.slow
    def test_average_run_length(self):
        m = average_run_length(SPEC, 0.0)
        assert m.mean == pytest.approx(194.568, abs=1e-3)
        assert m.tail_bound < 1e-10 * m.mean
        rl = simulate_run_lengths(SPEC, 0.0, 200_000, seed=42, n_cap=20_000, threads=4)
        assert np.all(rl <= 20_000)
        assert abs(rl.mean() - m.mean) < 4 * rl.std() / math.sqrt(rl.size)


class TestPostChange:
    def test_sampler_mean(self, rng):
        z = sample_post_change(SPEC, rng.random(1_000_000))
        assert abs(z.mean() - post_change_mean(SPEC)) < 4 * z.std() / 1e3

    def test_sampler_is_the_tilted_law(self, rng):
        # P(X > 1) under the tilt: int_1^inf e^{0.5 x - b} e^{-x} / 2 dx
        z = sample_post_change(SPEC, rng.random(1_000_000))
        ref = 0.5 * math.exp(-log_mgf(SPEC)) * math.exp(-0.5) / 0.5
        assert np.mean(z > 1.0) == pytest.approx(ref, abs=4 * math.sqrt(ref / 1e6))

    def test_detection_is_fast_after_change(self):
        rl = simulate_run_lengths(SPEC, 0.0, 20_000, seed=3, n_cap=500, post_change=True)
        assert rl.mean() < 15
