import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lineagedist.birthdeath import ModelParams
from lineagedist.distributions import MethodKind, q_second_order, q_series_exact, q_series_exact_array
from lineagedist.errors import DomainError
from lineagedist.tails import (
    CdfRequest,
    Normalization,
    QuantileRequest,
    approximation_error_report,
    cdf,
    cdf_values,
    quantile,
    tail_probability,
)

# 40-digit mpmath: sum_{n<=10} Q_n at r=0.4, theta=0.01
CDF10_04_001 = 0.6550335177746799549923571

TABLE_GRID = [(r, th) for r in (0.4, 0.1) for th in (0.01, 0.1, 0.4)]
TABLE_N = (10, 50, 100, 500, 1000, 2000, 10000)
SUB = ModelParams(1.0, 2.0, 0.1)


def test_frozen_cdf_value():
    p = ModelParams.from_ratios(0.4, 0.01)
    assert cdf_values(p, MethodKind.EXACT_SERIES, [10])[0] == pytest.approx(CDF10_04_001, rel=1e-13)
    assert cdf_values(p, MethodKind.EXACT_QUADRATURE, [10])[0] == pytest.approx(CDF10_04_001, rel=1e-9)


class TestCdf:
    @pytest.mark.parametrize("r,theta", TABLE_GRID)
    @pytest.mark.parametrize("method", list(MethodKind))
    def test_monotone_and_bounded(self, r, theta, method):
        p = ModelParams.from_ratios(r, theta)
        vals = cdf_values(p, method, (1, 2, 5) + TABLE_N + (10**5, 10**6))
        assert np.all(np.diff(vals) >= 0)
        assert np.all((vals >= 0) & (vals <= 1))

    @pytest.mark.parametrize("r,theta", TABLE_GRID)
    @pytest.mark.parametrize("n", [10, 1000])
    def test_one_quadrature_matches_summation(self, r, theta, n):
        p = ModelParams.from_ratios(r, theta)
        summed = math.fsum(q_series_exact_array(p, np.arange(1, n + 1)))
        assert cdf_values(p, MethodKind.EXACT_QUADRATURE, [n])[0] == pytest.approx(summed, abs=1e-8)
        assert cdf_values(p, MethodKind.EXACT_SERIES, [n])[0] == pytest.approx(summed, abs=1e-12)

    def test_first_point_is_pmf(self):
        p = ModelParams.from_ratios(0.4, 0.1)
        assert cdf_values(p, MethodKind.EXACT_SERIES, [1])[0] == pytest.approx(q_series_exact(p, 1), rel=1e-13)

    @pytest.mark.parametrize("r", [0.4, 0.1])
    def test_asymptotic_theta_invariance(self, r):
        a = cdf_values(ModelParams.from_ratios(r, 0.01), MethodKind.ASYMPTOTIC, TABLE_N)
        b = cdf_values(ModelParams.from_ratios(r, 0.4), MethodKind.ASYMPTOTIC, TABLE_N)
        assert np.max(np.abs(a - b)) < 1e-12

    def test_shared_normalisation_keeps_raw_mass(self):
        p = ModelParams.from_ratios(0.4, 0.4)
        shared = cdf(CdfRequest(p, MethodKind.SECOND_ORDER, (10,), Normalization.SHARED))[0][1]
        summed = math.fsum(q_second_order(p, n) for n in range(1, 11))
        assert shared == pytest.approx(summed, rel=1e-10)

    def test_exact_normalisations_agree(self):
        p = ModelParams.from_ratios(0.1, 0.1)
        a = cdf_values(p, "exact", TABLE_N, Normalization.SELF)
        b = cdf_values(p, "exact", TABLE_N, Normalization.SHARED)
        assert np.max(np.abs(a - b)) < 1e-12

    def test_subcritical_geometric_approach(self):
        n = np.arange(5, 60, 5)
        tails = np.array([tail_probability(SUB, int(k)) for k in n])
        slope = np.polyfit(n[3:], np.log(tails[3:]), 1)[0]
        assert slope == pytest.approx(-math.log(SUB.theta), rel=0.02)

    @pytest.mark.parametrize("pts", [(), (0, 1), (3, 3), (5, 2)])
    def test_bad_grid(self, pts):
        with pytest.raises(DomainError):
            CdfRequest(ModelParams.from_ratios(0.4, 0.1), "exact", pts)

    @given(
        r=st.floats(0.05, 3.0),
        theta=st.floats(0.0, 0.8),
        n=st.lists(st.integers(1, 10**7), min_size=2, max_size=6, unique=True),
    )
    @settings(max_examples=40)
    def test_exact_cdf_property(self, r, theta, n):
        p = ModelParams.from_ratios(r, theta)
        vals = cdf_values(p, MethodKind.EXACT_SERIES, sorted(n))
        assert np.all(np.diff(vals) >= -1e-15)
        assert np.all((vals >= 0) & (vals <= 1 + 1e-15))


class TestQuantile:
    @pytest.mark.parametrize("r,theta", TABLE_GRID)
    @pytest.mark.parametrize("p", [0.05, 0.01])
    def test_coherence(self, r, theta, p):
        params = ModelParams.from_ratios(r, theta)
        try:
            n = quantile(QuantileRequest(params, MethodKind.EXACT_SERIES, p))
        except OverflowError:
            pytest.xfail("percentile beyond 2^63-1")
        lo, hi = cdf_values(params, MethodKind.EXACT_SERIES, [n - 1, n]) if n > 1 else (0.0, None)
        hi = hi if hi is not None else cdf_values(params, "exact", [1])[0]
        assert hi >= 1 - p > lo

    @pytest.mark.parametrize("r,theta,p", [(0.1, 0.1, 0.05), (0.4, 0.1, 0.01), (0.4, 0.4, 0.01)])
    def test_series_and_quadrature_agree(self, r, theta, p):
        params = ModelParams.from_ratios(r, theta)
        a = quantile(QuantileRequest(params, MethodKind.EXACT_SERIES, p))
        b = quantile(QuantileRequest(params, MethodKind.EXACT_QUADRATURE, p))
        assert a == b

    def test_matches_direct_summation(self):
        params = ModelParams.from_ratios(0.4, 0.01)
        n = quantile(QuantileRequest(params, MethodKind.EXACT_SERIES, 0.05))
        c = np.cumsum(q_series_exact_array(params, np.arange(1, n + 1)))
        first = int(np.argmax(c >= 0.95)) + 1
        assert first == n

    def test_near_one_gives_singleton(self):
        params = ModelParams.from_ratios(0.4, 0.1)
        assert quantile(QuantileRequest(params, "exact", 1 - 1e-12)) == 1

    def test_overflow_is_reported(self):
        params = ModelParams.from_ratios(0.01, 0.1)
        with pytest.raises(OverflowError):
            quantile(QuantileRequest(params, "exact", 0.01))

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1])
    def test_bad_p(self, p):
        with pytest.raises(DomainError):
            QuantileRequest(ModelParams.from_ratios(0.4, 0.1), "exact", p)

    def test_deterministic(self):
        params = ModelParams.from_ratios(0.4, 0.4)
        req = QuantileRequest(params, "second-order", 0.05)
        assert quantile(req) == quantile(req)

    def test_subcritical(self):
        n = quantile(QuantileRequest(SUB, "exact", 1e-6))
        assert tail_probability(SUB, n) <= 1e-6 < tail_probability(SUB, n - 1)


class TestTailProbability:
    def test_everything_at_or_above_one(self):
        assert tail_probability(ModelParams.from_ratios(0.4, 0.1), 0) == 1.0

    def test_clade_example(self):
        # rho=0.02, omega=0.05, theta=0.1: P(N > 10^4) stays below 2.5%
        lam = 0.05 / 0.9
        p = ModelParams(lam, 0.1 * lam, 0.02)
        assert tail_probability(p, 9999) < 0.025

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            tail_probability(ModelParams.from_ratios(0.4, 0.1), -1)


class TestErrorReport:
    GRID = np.unique(np.round(np.logspace(1, 4, 31)).astype(int))

    @pytest.mark.parametrize("r", [0.4, 0.1])
    def test_second_order_wins_at_small_theta(self, r):
        rep = approximation_error_report(ModelParams.from_ratios(r, 0.01), self.GRID, "cdf")
        assert rep.max_abs_error("second-order") < rep.max_abs_error("asymptotic")

    @pytest.mark.parametrize("r", [0.4, 0.1])
    def test_asymptotic_wins_at_large_theta(self, r):
        rep = approximation_error_report(ModelParams.from_ratios(r, 0.4), self.GRID, "cdf")
        assert rep.max_abs_error("asymptotic") < rep.max_abs_error("second-order")

    def test_pointwise_second_order_better_small_theta(self):
        grid = np.unique(np.round(np.logspace(1, 3, 21)).astype(int))
        rep = approximation_error_report(ModelParams.from_ratios(0.4, 0.01), grid, "pmf")
        assert all(abs(row.err_second_order) < abs(row.err_asymptotic) for row in rep.rows)
        assert rep.crossover is None

    def test_crossover_detected(self):
        rep = approximation_error_report(ModelParams.from_ratios(0.4, 0.4), [1, 2, 5, 10, 10**3, 10**5], "pmf")
        assert rep.crossover is not None

    def test_pure_birth_cubic_decay(self):
        n = np.array([16, 32, 64, 128, 256, 512])
        rep = approximation_error_report(ModelParams.from_ratios(0.4, 0.0), n, "pmf")
        errs = [abs(row.err_second_order) for row in rep.rows]
        slope = np.polyfit(np.log(n), np.log(errs), 1)[0]
        assert slope == pytest.approx(-3.0, abs=0.2)

    def test_bad_quantity(self):
        with pytest.raises(DomainError):
            approximation_error_report(ModelParams.from_ratios(0.4, 0.1), [1], "mean")
