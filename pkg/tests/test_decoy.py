import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qdslab.channel import ChannelParams, paired_photon_yields, shared_photon_yields
from qdslab.decoy import (
    PAIRED_FAILURE_TERMS,
    SHARED_FAILURE_TERMS,
    Observation,
    PairedDecoyConfig,
    SharedDecoyConfig,
    estimate_two_photon_paired,
    estimate_two_photon_shared,
    fluctuate,
    model_observations,
)
from qdslab.errors import EstimateInvalidError

Z6, Z4 = 1.0 / 3.0, 0.5
SHARED_FOUR = SharedDecoyConfig(mu=0.12, nu=0.08, omega=0.008, P_mu=0.52, P_nu=0.23, P_omega=0.23, P_0=0.02)
PAIRED_FOUR = PairedDecoyConfig(mu1=0.075, nu1=0.04, P_mm=0.60, P_nn=0.27)


class TestFluctuate:
    def test_symmetric_spread(self):
        f = fluctuate(0.01, 1e6, 3.0)
        assert f.upper - 0.01 == pytest.approx(0.01 - f.lower)
        assert f.upper == pytest.approx(0.01 * (1 + 3.0 / math.sqrt(1e4)))

    def test_lower_clamped(self):
        f = fluctuate(1e-6, 1e3, 5.0)
        assert f.lower == 0.0
        assert f.degenerate

    def test_zero_gain(self):
        assert fluctuate(0.0, 1e3, 5.0) == (0.0, 0.0, True)

    @pytest.mark.parametrize("args", [(1.5, 10.0, 1.0), (0.1, 0.5, 1.0), (0.1, 10.0, -1.0)])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            fluctuate(*args)

    @given(st.floats(1e-9, 1.0), st.floats(1.0, 1e14), st.floats(0.0, 10.0))
    def test_brackets_value(self, Q, n, k):
        f = fluctuate(Q, n, k)
        assert f.lower <= Q <= f.upper


class TestConfigs:
    def test_shared_ordering(self):
        with pytest.raises(ValueError):
            SharedDecoyConfig(mu=0.1, nu=0.2)

    def test_probabilities_sum(self):
        with pytest.raises(ValueError):
            SharedDecoyConfig(P_mu=0.5)
        with pytest.raises(ValueError):
            PairedDecoyConfig(P_00=0.02)

    def test_paired_settings_cover_seven_pairs(self):
        keys = [k for k, _ in PairedDecoyConfig().settings()]
        assert len(set(keys)) == 7
        assert keys[0] == (0.17, 0.17)


def _true_shared(params, z):
    Y, e = shared_photon_yields(params, z)
    return Y[2], e[2]


def _true_paired(params, z):
    Y, e = paired_photon_yields(params, z)
    return Y[1, 1], e[1, 1]


GRID = np.linspace(0.0, 200.0, 11)


@pytest.mark.parametrize("L", GRID)
@pytest.mark.parametrize("cfg, z", [(SharedDecoyConfig(), Z6), (SHARED_FOUR, Z4)])
@pytest.mark.parametrize("worst_case", [False, True])
def test_shared_estimate_brackets_true_values(L, cfg, z, worst_case):
    params = ChannelParams().symmetric(L)
    obs = model_observations(cfg, params, z, 1e12)
    est = estimate_two_photon_shared(obs, cfg, worst_case=worst_case)
    Y, e = _true_shared(params, z)
    assert est.Y_lower <= Y
    assert est.e_upper >= e
    if not worst_case:
        assert est.Y_lower > 0.9 * Y


@pytest.mark.parametrize("L", GRID)
@pytest.mark.parametrize("cfg, z", [(PairedDecoyConfig(), Z6), (PAIRED_FOUR, Z4)])
@pytest.mark.parametrize("worst_case", [False, True])
def test_paired_estimate_brackets_true_values(L, cfg, z, worst_case):
    params = ChannelParams().symmetric(L)
    obs = model_observations(cfg, params, z, 1e12)
    est = estimate_two_photon_paired(obs, cfg, worst_case=worst_case)
    Y, e = _true_paired(params, z)
    assert est.Y_lower <= Y
    assert est.e_upper >= e


def test_fluctuation_loosens_bounds():
    params = ChannelParams().symmetric(100.0)
    cfg = SharedDecoyConfig()
    obs = model_observations(cfg, params, Z6, 1e10)
    loose = estimate_two_photon_shared(obs, cfg, worst_case=True)
    tight = estimate_two_photon_shared(obs, cfg, worst_case=False)
    assert loose.Y_lower < tight.Y_lower
    assert loose.e_upper > tight.e_upper


def test_failure_term_counts():
    params = ChannelParams().symmetric(50.0)
    s = estimate_two_photon_shared(model_observations(SharedDecoyConfig(), params, Z6, 1e10), SharedDecoyConfig())
    p = estimate_two_photon_paired(model_observations(PairedDecoyConfig(), params, Z6, 1e10), PairedDecoyConfig())
    assert (s.failure_terms, p.failure_terms) == (SHARED_FAILURE_TERMS, PAIRED_FAILURE_TERMS) == (7, 11)
    q = estimate_two_photon_paired(
        model_observations(PairedDecoyConfig(), params, Z6, 1e10), PairedDecoyConfig(), worst_case=False
    )
    assert q.failure_terms == 0


def test_two_photon_gain_weight():
    params = ChannelParams().symmetric(50.0)
    cfg = SharedDecoyConfig()
    est = estimate_two_photon_shared(model_observations(cfg, params, Z6, 1e10), cfg)
    assert est.Q_lower == pytest.approx(math.exp(-cfg.mu) * cfg.mu**2 / 2 * est.Y_lower)


def test_too_few_pulses_invalidates_yield():
    params = ChannelParams().symmetric(150.0)
    cfg = SharedDecoyConfig()
    with pytest.raises(EstimateInvalidError):
        estimate_two_photon_shared(model_observations(cfg, params, Z6, 1e5), cfg)


def test_missing_setting_is_reported():
    cfg = PairedDecoyConfig()
    obs = model_observations(cfg, ChannelParams(), Z6, 1e10)
    del obs[(0.0, 0.0)]
    with pytest.raises(ValueError, match="missing observation"):
        estimate_two_photon_paired(obs, cfg)


def test_observation_validation():
    with pytest.raises(ValueError):
        Observation(gain=1.2, qber=0.0, pulses=10)
    with pytest.raises(ValueError):
        Observation(gain=0.1, qber=0.0, pulses=0)
    assert Observation(0.2, 0.1, 10).error_gain == pytest.approx(0.02)


def test_large_error_flagged_unusable():
    cfg = SharedDecoyConfig()
    obs = model_observations(cfg, ChannelParams(e_d=0.3).symmetric(0.0), Z6, 1e14)
    est = estimate_two_photon_shared(obs, cfg)
    assert est.e_upper <= 0.5
    assert est.usable == (est.e_upper_raw <= 0.5)
