import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lindley_laplace import density, oracle
from lindley_laplace.core import RegimeTag
from lindley_laplace.fet import (
    basis_coefficients,
    fet_cdf,
    fet_distribution,
    fet_knots,
    fet_mu_neg_high,
    fet_mu_pos_high,
    fet_pmf,
    fet_values,
    initial_fet_state,
    mean_fet,
    mu_zero_recursion,
    pieces_count,
    step_fet,
    step_fet_mu_neg,
    step_fet_mu_pos,
    step_fet_mu_zero,
)

from conftest import make_cfg

REGIME_CONFIGS = [(0.3, 1, 1, 3), (2, 1, 0.5, 1), (-0.3, 1, 1, 3), (-2, 1, 0.5, 1), (0, 1, 1, 3)]


def fcfg(mu, sigma, x, h):
    return make_cfg(mu, sigma, x, h)


def quadrature_chain(cfg, n):
    return oracle.exit_chain(cfg, n, points=4001)


class TestFirstStep:
    def test_positive_drift(self):
        assert fet_pmf(fcfg(0.3, 1, 1, 3), 1)(1.0) == pytest.approx(math.exp(-1.7) / 2, rel=1e-14)
        assert fet_pmf(fcfg(0.3, 1, 1, 3), 1)(1.0) == pytest.approx(0.0913418, abs=1e-7)

    def test_zero_drift(self):
        assert fet_pmf(fcfg(0, 1, 0, 3), 1)(0.0) == pytest.approx(math.exp(-3) / 2, rel=1e-14)
        assert fet_pmf(fcfg(0, 1, 1, 3), 1)(1.0) == pytest.approx(0.0676676, abs=1e-7)

    def test_negative_drift(self):
        assert fet_pmf(fcfg(-0.3, 1, 1, 3), 1)(1.0) == pytest.approx(math.exp(-2.3) / 2, rel=1e-14)

    def test_is_complement_of_one_step_cdf(self):
        for mu, s, x, h in REGIME_CONFIGS:
            cfg = fcfg(mu, s, x, h)
            d1 = density.density_at(cfg, 1)
            assert fet_values(cfg, x, 1)[0] == pytest.approx(1 - density.cdf(d1, h), abs=1e-15)


class TestPieces:
    def test_positive_count_with_tie(self):
        # 10 * 0.3 reaches h = 3 exactly; the tie counts
        assert [pieces_count(0.3, 3.0, n) for n in (1, 5, 9, 10, 30)] == [2, 6, 10, 10, 10]

    def test_negative_count_strict(self):
        # 10 * 0.3 = 3 is not beyond h, 11 * 0.3 is
        assert [pieces_count(-0.3, 3.0, n) for n in (1, 5, 11, 30)] == [1, 5, 11, 11]

    def test_single_piece_regimes(self):
        assert pieces_count(2.0, 1.0, 7) == 1
        assert pieces_count(-2.0, 1.0, 7) == 1
        assert pieces_count(0.0, 3.0, 7) == 1

    def test_knots_cover_interval(self):
        for mu in (0.3, 0.7, -0.3, -0.7):
            for n in (1, 3, 12):
                ks = fet_knots(mu, 3.0, n)
                assert ks[0][0] == 0.0 and ks[-1][1] == 3.0
                assert all(a[1] == b[0] for a, b in zip(ks, ks[1:]))
                # an exact tie -k mu = h leaves an empty last piece, which is dropped
                assert len(ks) in (pieces_count(mu, 3.0, n), pieces_count(mu, 3.0, n) - 1)

    def test_seed_coefficients(self):
        # first pmf for 0 < mu < h: alpha = e^{(mu-h)/sigma}, beta = -e^{-(mu-h)/sigma}, eta = 1
        cfg = fcfg(0.3, 1, 1, 3)
        (a0, b0, e0), (a1, b1, e1) = basis_coefficients(fet_pmf(cfg, 1))
        assert a0[0] == pytest.approx(math.exp(0.3 - 3.0), rel=1e-13)
        assert b1[0] == pytest.approx(-math.exp(3.0 - 0.3), rel=1e-13)
        assert e1 == pytest.approx(1.0, rel=1e-14)
        assert np.all(b0 == 0) and np.all(a1 == 0) and e0 == 0


class TestSteppers:
    def test_regime_checks(self):
        s = initial_fet_state(fcfg(0.3, 1, 1, 3))
        with pytest.raises(ValueError):
            step_fet_mu_neg(s)
        with pytest.raises(ValueError):
            step_fet_mu_zero(s)
        assert step_fet_mu_pos(s).n == 2
        z = initial_fet_state(fcfg(0, 1, 1, 3))
        assert step_fet(z).regime is RegimeTag.FetMuZero

    @pytest.mark.parametrize("mu", [0.3, -0.3, 0.7])
    def test_constants_travel_with_the_drift(self, mu):
        # eta_{n+1} on a piece equals eta_n on the piece shifted by mu
        cfg = fcfg(mu, 1, 1, 3)
        dist = fet_distribution(cfg, 8)
        for n in range(1, 8):
            now, nxt = dist.pmf(n), dist.pmf(n + 1)
            etas = [e for _, _, e in basis_coefficients(now)]
            for seg, (_, _, eta) in zip(nxt.segments, basis_coefficients(nxt)):
                mid = 0.5 * (seg.lo + seg.hi) + mu
                if 0 <= mid < 3:
                    assert eta == pytest.approx(etas[now._locate(mid)], abs=1e-15)

    def test_positive_drift_against_quadrature(self):
        cfg = fcfg(0.3, 1, 1, 3)
        g = quadrature_chain(cfg, 5)[4]
        assert np.max(np.abs(fet_pmf(cfg, 5)(g.nodes[:-1]) - g.values[:-1])) < 1e-6

    def test_negative_drift_against_quadrature(self):
        cfg = fcfg(-0.3, 1, 1, 3)
        g = quadrature_chain(cfg, 4)[3]
        assert np.max(np.abs(fet_pmf(cfg, 4)(g.nodes[:-1]) - g.values[:-1])) < 1e-6

    def test_zero_drift_against_quadrature(self):
        cfg = fcfg(0, 1, 0, 3)
        g = quadrature_chain(cfg, 3)[2]
        assert np.max(np.abs(fet_pmf(cfg, 3)(g.nodes[:-1]) - g.values[:-1])) < 1e-8


class TestScalarForms:
    def test_high_positive_drift_values(self):
        cfg = fcfg(2, 1, 0, 1)
        assert fet_values(cfg, 0.0, 2) == pytest.approx([0.81606028, 0.15904619], abs=1e-8)
        assert fet_values(cfg, 0.0, 1)[0] == pytest.approx(1 - math.exp(-1) / 2, abs=1e-14)
        assert fet_values(cfg, 0.0, 2)[1] == pytest.approx(
            math.exp(-1) / 2 - math.exp(-3) / 2, abs=1e-14)

    def test_high_positive_drift_closed_form_matches(self):
        cfg = fcfg(2, 1, 0, 1)
        xs = np.linspace(0, 0.99, 12)
        for n in range(1, 15):
            eta, beta = fet_mu_pos_high(cfg, n)
            np.testing.assert_allclose(fet_pmf(cfg, n)(xs), eta + beta * np.exp(-xs),
                                       rtol=1e-12, atol=1e-16)

    def test_high_positive_drift_sums_to_one(self):
        assert fet_cdf(fcfg(2, 1, 0, 1), 0.0, 40)[-1] == pytest.approx(1.0, abs=1e-10)

    def test_high_negative_drift_values(self):
        cfg = fcfg(-2, 1, 0, 1)
        assert fet_values(cfg, 0.0, 2) == pytest.approx([0.024893534, 0.024893534], abs=1e-9)
        eta, alpha = fet_mu_neg_high(cfg, 2)
        assert alpha == 0.0
        assert eta == pytest.approx(math.exp(-3) / 2, rel=1e-15)

    def test_high_negative_drift_recursion_matches(self):
        cfg = fcfg(-2, 1.3, 0, 1)
        xs = np.linspace(0, 0.99, 12)
        for n in range(1, 15):
            eta, alpha = fet_mu_neg_high(cfg, n)
            np.testing.assert_allclose(fet_pmf(cfg, n)(xs), eta + alpha * np.exp(xs / 1.3),
                                       rtol=1e-12, atol=1e-16)

    def test_high_negative_drift_geometric_tail(self):
        p = fet_values(fcfg(-2, 1, 0, 1), 0.0, 200)
        r = p[100:] / p[99:-1]
        assert np.all(r < 1) and np.ptp(r) < 1e-8

    def test_scalar_forms_check_regime(self):
        with pytest.raises(ValueError):
            fet_mu_pos_high(fcfg(0.3, 1, 1, 3), 2)
        with pytest.raises(ValueError):
            fet_mu_neg_high(fcfg(-0.3, 1, 1, 3), 2)

    def test_zero_drift_monomial_recursion(self):
        sigma, h = 1.0, 3.0
        cfg = fcfg(0, sigma, 0, h)
        xs = np.linspace(0, 2.99, 15)
        pv = np.polynomial.polynomial.polyval
        for n, (alpha, beta) in enumerate(mu_zero_recursion(sigma, h, 8), 1):
            assert beta.size == max(n - 1, 1)
            val = (pv(xs, alpha) * np.exp(xs / sigma) + pv(xs, beta) * np.exp(-xs / sigma))
            val /= 2**n * sigma ** (n - 1)
            np.testing.assert_allclose(fet_pmf(cfg, n)(xs), val, rtol=1e-11, atol=1e-16)


class TestDistribution:
    def test_certain_exit(self):
        s = fet_cdf(fcfg(0.3, 1, 1, 3), 1.0, 200)
        assert 0.999 <= s[-1] <= 1 + 1e-10
        assert np.all(np.diff(s) >= -1e-12)

    def test_values_bounds(self):
        with pytest.raises(ValueError):
            fet_values(fcfg(0.3, 1, 1, 3), 3.0, 5)
        with pytest.raises(ValueError):
            fet_pmf(fcfg(0.3, 1, 1, 3), 0)
        with pytest.raises(ValueError):
            fet_values(make_cfg(0.3), 0.0, 5)

    def test_distribution_is_cached_and_extends(self):
        cfg = fcfg(0.7, 1, 1, 3)
        a = fet_distribution(cfg, 4)
        b = fet_distribution(cfg, 9)
        assert b.pmf(4) is a.pmf(4)
        assert b.n_max == 9


class TestMean:
    def test_high_positive_drift(self, rng):
        cfg = fcfg(2, 1, 0, 1)
        m = mean_fet(cfg)
        n = oracle.simulate_exit_times(cfg, 200_000, seed=3, threads=2)
        assert abs(m.mean - n.mean()) < 4 * n.std() / math.sqrt(n.size)
        assert m.ratio < 1

    @pytest.mark.parametrize("mu", [0.3, -0.3])
    def test_against_simulation(self, mu):
        cfg = fcfg(mu, 1, 1, 3)
        m = mean_fet(cfg)
        n = oracle.simulate_exit_times(cfg, 100_000, seed=11, n_cap=10_000, threads=2)
        assert np.all(n <= 10_000)
        assert abs(m.mean - n.mean()) < 4 * n.std() / math.sqrt(n.size)
        assert m.tail_bound < 1e-10 * m.mean

    def test_bad_tolerance(self):
        with pytest.raises(ValueError):
            mean_fet(fcfg(0.3, 1, 1, 3), rel_tol=0)


fet_params = st.tuples(
    st.sampled_from([-2.5, -1.0, -0.4, -0.3, 0.0, 0.3, 0.45, 1.0, 2.5]),
    st.sampled_from([0.5, 1.0, 2.0]),
    st.sampled_from([1.0, 2.0, 3.0]),
    st.floats(0.0, 0.999),
)


@settings(max_examples=40, deadline=None)
@given(fet_params)
def test_probabilities_bounded_and_partial_sums_monotone(p):
    mu, sigma, h, frac = p
    cfg = fcfg(mu, sigma, 0.0, h)
    vals = fet_values(cfg, frac * h, 25)
    assert np.all(vals >= -1e-13) and np.all(vals <= 1 + 1e-13)
    s = np.cumsum(vals)
    assert np.all(np.diff(s) >= -1e-13) and s[-1] <= 1 + 1e-12


@settings(max_examples=30, deadline=None)
@given(fet_params)
def test_pmf_continuous_on_open_interval(p):
    # pieces join continuously except at x = h - mu for the first step
    mu, sigma, h, _ = p
    cfg = fcfg(mu, sigma, 0.0, h)
    for n in range(2, 8):
        pmf = fet_pmf(cfg, n)
        for left, right in zip(pmf.segments, pmf.segments[1:]):
            k = left.hi
            assert left.evaluate(k, sigma) == pytest.approx(right.evaluate(k, sigma),
                                                            abs=1e-12, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(fet_params, st.sampled_from([0.5, 3.0]))
def test_scale_invariance(p, c):
    mu, sigma, h, frac = p
    a = fet_values(fcfg(mu, sigma, 0.0, h), frac * h, 10)
    b = fet_values(fcfg(c * mu, c * sigma, 0.0, c * h), c * frac * h, 10)
    np.testing.assert_allclose(b, a, rtol=1e-9, atol=1e-15)
