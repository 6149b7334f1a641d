import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdslab.bounds import (
    ProtocolCounts,
    RobustnessMode,
    SecurityReport,
    Source,
    Thresholds,
    compose_security,
    correlation_gap,
    forgery_bit_error,
    forgery_probability,
    repudiation_probability,
    robustness_probability,
    solve_repudiation_root,
)
from qdslab.entropy import sampling_deviation, sampling_tail
from qdslab.errors import ConvergenceError, InfeasibleError


class TestCounts:
    def test_split(self):
        c = ProtocolCounts.from_kept(1000, 100.0, 0.3)
        assert (c.M_t, c.M_u) == pytest.approx((30.0, 70.0))

    @pytest.mark.parametrize("beta", [-0.1, 1.1])
    def test_rejects_beta(self, beta):
        with pytest.raises(ValueError):
            ProtocolCounts.from_kept(10, 5, beta)


class TestThresholds:
    @pytest.mark.parametrize("T_a, T_v", [(0.05, 0.04), (0.01, 0.5), (-0.01, 0.1)])
    def test_rejects(self, T_a, T_v):
        with pytest.raises(ValueError):
            Thresholds(T_a, T_v)


class TestRepudiationRoot:
    @pytest.mark.parametrize("M_u", [1e4, 1e6, 1e9])
    def test_matches_grid_sup_min(self, M_u, sup_min_scan):
        th = Thresholds(0.015, 0.0645)
        A = solve_repudiation_root(0.04, 0.04, th, 0.03)
        eps = repudiation_probability(A, 0.04, th.T_a, M_u)
        assert eps == pytest.approx(sup_min_scan(0.04, 0.04, th, 0.03, M_u), rel=1e-6)

    @settings(max_examples=60, deadline=None)
    @given(
        st.floats(0.01, 0.3), st.floats(0.01, 0.3), st.floats(0.001, 0.05),
        st.floats(0.01, 0.2), st.floats(0.0, 0.1),
    )
    def test_tails_cross_at_root(self, P_B_c, P_C_c, T_a, width, gap):
        th = Thresholds(T_a, min(T_a + gap + width, 0.49))
        if th.T_v - gap <= th.T_a:
            return
        A = solve_repudiation_root(P_B_c, P_C_c, th, gap)
        lhs = (A - P_B_c * T_a) ** 2 / (2 * A)
        P_C = P_C_c * (A / P_B_c + gap)
        rhs = (P_C_c * th.T_v - P_C) ** 2 / (3 * P_C)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-300)
        assert P_B_c * T_a < A < P_B_c * (th.T_v - gap)

    def test_infeasible_gap(self):
        with pytest.raises(InfeasibleError):
            solve_repudiation_root(0.1, 0.1, Thresholds(0.02, 0.05), 0.04)

    def test_zero_authentication_threshold(self):
        A = solve_repudiation_root(0.1, 0.1, Thresholds(0.0, 0.05), 0.01)
        assert 0.0 < A < 0.1 * 0.04

    def test_probability_rejects_bad_root(self):
        with pytest.raises(ValueError):
            repudiation_probability(0.0001, 0.1, 0.01, 100)
        with pytest.raises(ValueError):
            repudiation_probability(0.01, 0.1, 0.01, 0.5)

    def test_convergence_error_type(self):
        assert issubclass(ConvergenceError, RuntimeError)


class TestCorrelationGap:
    def test_adds_sampling_deviation(self):
        c = ProtocolCounts.from_kept(1e8, 1e6, 0.3)
        gap, dev = correlation_gap(0.01, 0.012, 0.05, 0.06, c, 1e-10)
        both = 0.05 * 0.06
        assert dev == pytest.approx(sampling_deviation(both * c.M_u, both * c.M_t, 0.022, 1e-10))
        assert gap == pytest.approx(0.022 + dev)

    def test_requires_both_parts(self):
        with pytest.raises(ValueError):
            correlation_gap(0.01, 0.01, 0.1, 0.1, ProtocolCounts.from_kept(10, 10, 0.0), 1e-10)

    def test_rejects_huge_test_mismatch(self):
        with pytest.raises(InfeasibleError):
            correlation_gap(0.6, 0.6, 0.1, 0.1, ProtocolCounts.from_kept(1e6, 1e5, 0.3), 1e-10)


class TestForgery:
    def test_chernoff_form(self):
        assert forgery_probability(0.07, 0.06, 1e4) == pytest.approx(math.exp(-(0.01**2) / 0.14 * 1e4))

    @pytest.mark.parametrize("threshold", [0.07, 0.08])
    def test_threshold_not_below_mismatch(self, threshold):
        with pytest.raises(InfeasibleError):
            forgery_probability(0.07, threshold, 1e4)

    def test_bit_error_inflation(self):
        c = ProtocolCounts.from_kept(1e8, 1e6, 0.3)
        e = forgery_bit_error(0.01, 0.05, c, 1e-10)
        assert e == pytest.approx(0.01 + sampling_deviation(0.05 * c.M_u, 0.05 * c.M_t, 0.01, 1e-10))

    @given(st.floats(1e3, 1e12))
    def test_decreasing_in_sample(self, n):
        assert forgery_probability(0.07, 0.06, 2 * n) <= forgery_probability(0.07, 0.06, n)


class TestRobustness:
    C = ProtocolCounts.from_kept(1e8, 1e6, 0.3)

    def test_direct_is_tail(self):
        r = robustness_probability(0.01, 0.05, self.C, 0.015)
        assert r == pytest.approx(sampling_tail(0.05 * self.C.M_u, 0.05 * self.C.M_t, 0.01, 0.005))

    def test_fixed_point_is_self_consistent(self):
        n, k = 0.05 * self.C.M_u, 0.05 * self.C.M_t
        r = robustness_probability(0.01, 0.05, self.C, 0.02, RobustnessMode.FIXED_POINT)
        direct = robustness_probability(0.01, 0.05, self.C, 0.02)
        assert r >= direct
        # find E with tail(E) == r and check it equals e + deviation(r)
        from scipy.optimize import brentq

        E = brentq(lambda x: sampling_tail(n, k, x, 0.02 - x) - r, 0.01, 0.0199999)
        assert E == pytest.approx(0.01 + sampling_deviation(n, k, 0.01, r), rel=1e-8)

    def test_fixed_point_infeasible_when_threshold_close(self):
        with pytest.raises(InfeasibleError):
            robustness_probability(0.01, 0.05, ProtocolCounts.from_kept(1e4, 1e3, 0.3), 0.0101,
                                   RobustnessMode.FIXED_POINT)

    def test_zero_error(self):
        assert robustness_probability(0.0, 0.05, self.C, 0.01) == 0.0

    def test_threshold_below_error(self):
        with pytest.raises(InfeasibleError):
            robustness_probability(0.02, 0.05, self.C, 0.01)


class TestSecurityReport:
    KW = dict(
        eps_forge=1e-7, eps_repud=2e-6, eps_sample_forge=1e-10, eps_sample_repud=1e-10,
        eps_decoy=7e-6, eps_rob=1e-9, repudiation_root=0.003, forgery_mismatch=0.07,
        gap=0.03, forge_deviation=0.004, gap_deviation=0.01,
    )

    def test_two_photon_sum(self):
        r = compose_security(Source.TWO_PHOTON, **{**self.KW, "eps_decoy": 0.0})
        assert r.eps_sec == pytest.approx(1e-7 + 2e-6 + 2e-10, rel=1e-15)

    def test_decoy_sum_ignores_forge_sampling(self):
        r = compose_security(Source.SHARED_DECOY, **self.KW)
        assert r.eps_sample_forge == 0.0
        assert r.eps_sec == pytest.approx(1e-7 + 2e-6 + 1e-10 + 7e-6, rel=1e-15)

    @given(st.lists(st.floats(0.0, 1e-3), min_size=5, max_size=5))
    def test_sum_property(self, vals):
        f, rp, sf, sr, d = vals
        kw = {**self.KW, "eps_forge": f, "eps_repud": rp, "eps_sample_forge": sf,
              "eps_sample_repud": sr, "eps_decoy": d}
        assert compose_security(Source.PAIRED_DECOY, **kw).eps_sec == f + rp + sr + d

    def test_formats(self):
        r = compose_security(Source.TWO_PHOTON, **self.KW)
        assert "eps_sec = " in r.format_record()
        header, row = SecurityReport.csv_header().split(","), r.csv_row().split(",")
        assert len(header) == len(row)
        assert header[0] == "source" and row[0] == "two-photon"
