import itertools
import math

import numpy as np
import pytest
from scipy import stats

from qdslab.bounds import Source, Thresholds
from qdslab.channel import ChannelParams, paired_decoy_gains, shared_decoy_gains, two_photon_gains
from qdslab.decoy import PairedDecoyConfig, SharedDecoyConfig
from qdslab.engine import (
    BLOCK_SIZE,
    CSV_COLUMNS,
    Adversary,
    MeasurementBasis,
    Polarization,
    StateSet,
    TrialRecords,
    conclusive_decision,
    empirical_bound_check,
    measure,
    measure_many,
    n_bases,
    run_distribution,
    run_estimation,
    run_messaging,
    simulate_repetition,
    state_sets,
    substitution_rates,
    wilson_interval,
)
from qdslab.entropy import EncodingVariant
from qdslab.errors import EstimateInvalidError
from qdslab.optimizer import ProtocolConfig

SIX = EncodingVariant.SIX_STATE_TWO_PHOTON
FOUR = EncodingVariant.FOUR_STATE_TWO_PHOTON
IDEAL = ChannelParams(alpha=0.0, eta_d=1.0, p_d=0.0, e_d=0.0)
TWO6 = ProtocolConfig()
TWO4 = ProtocolConfig(variant=FOUR)

_S = 1 / math.sqrt(2)
JONES = {
    Polarization.H: np.array([1, 0], dtype=complex),
    Polarization.V: np.array([0, 1], dtype=complex),
    Polarization.PLUS: np.array([_S, _S], dtype=complex),
    Polarization.MINUS: np.array([_S, -_S], dtype=complex),
    Polarization.R: np.array([_S, 1j * _S], dtype=complex),
    Polarization.L: np.array([_S, -1j * _S], dtype=complex),
}


def _overlap(a, b):
    return abs(np.vdot(JONES[a], JONES[b])) ** 2


def _jones_decision(s, outcome):
    if _overlap(outcome, s.first) < 1e-12:
        return 1
    if _overlap(outcome, s.second) < 1e-12:
        return 0
    return None


def _basis_cases(variant):
    bases = list(MeasurementBasis)[: n_bases(variant)]
    for s in state_sets(variant):
        for b in bases:
            for outcome in (Polarization(2 * b), Polarization(2 * b + 1)):
                yield s, b, outcome


class TestStates:
    def test_polarization_structure(self):
        for p, q in itertools.product(Polarization, repeat=2):
            orthogonal = _overlap(p, q) < 1e-12
            assert orthogonal == (q == p.orthogonal)
            if p.basis != q.basis:
                assert _overlap(p, q) == pytest.approx(0.5)

    def test_set_counts(self):
        assert len(state_sets(SIX)) == 12 and len(state_sets(FOUR)) == 4
        assert all(s.first.basis != s.second.basis for s in state_sets(SIX))
        assert len({(s.first, s.second) for s in state_sets(SIX)}) == 12

    def test_rejects_same_basis_pair(self):
        with pytest.raises(ValueError):
            StateSet(Polarization.H, Polarization.V, 0)

    @pytest.mark.parametrize("variant, count", [(SIX, 72), (FOUR, 16)])
    def test_decision_matches_jones_orthogonality(self, variant, count):
        cases = list(_basis_cases(variant))
        assert len(cases) == count
        for s, b, outcome in cases:
            assert conclusive_decision(s, b, outcome) == _jones_decision(s, outcome)

    def test_decision_rejects_foreign_outcome(self):
        with pytest.raises(ValueError):
            conclusive_decision(state_sets(SIX)[0], MeasurementBasis.Z, Polarization.PLUS)


class TestMeasurement:
    @pytest.mark.parametrize("state", list(Polarization))
    @pytest.mark.parametrize("basis", list(MeasurementBasis))
    def test_born_frequencies(self, state, basis):
        n = 200_000
        rng = np.random.default_rng(int(state) * 3 + int(basis))
        out = measure_many(
            np.full(n, int(state)), np.full(n, int(basis)), rng.random(n), rng.random(n) < 0.02
        )
        assert set(np.unique(out)) <= {2 * int(basis), 2 * int(basis) + 1}
        first = Polarization(2 * int(basis))
        p = 0.98 * _overlap(state, first) + 0.02 * (1 - _overlap(state, first))
        k = int((out == int(first)).sum())
        assert abs(k - n * p) <= 4 * math.sqrt(n * p * (1 - p)) + 1e-9

    def test_scalar_measure(self):
        rng = np.random.default_rng(1)
        assert measure(Polarization.R, MeasurementBasis.Y, 0.0, rng) == Polarization.R
        assert measure(Polarization.R, MeasurementBasis.Y, 1.0, rng) == Polarization.L
        with pytest.raises(ValueError):
            measure(Polarization.R, MeasurementBasis.Y, 1.5, rng)


def _sigma_ok(k, n, p, k_sigma):
    return abs(k - n * p) <= k_sigma * math.sqrt(n * p * (1 - p)) + 1e-9


class TestDistribution:
    @pytest.mark.parametrize("cfg, frac", [(TWO6, 1 / 6), (TWO4, 1 / 4)])
    def test_ideal_channel(self, cfg, frac):
        n = 300_000
        r = run_distribution(cfg, IDEAL, n, seed=3, workers=4)
        assert len(r) == n == r.n_sent
        for col in (r.bob_conclusive, r.charlie_conclusive):
            assert _sigma_ok(int((col >= 0).sum()), n, frac, 3)
            conclusive = col >= 0
            assert np.all(col[conclusive] == r.sent_bit[conclusive])

    def test_dark_and_lossless_nothing_kept(self):
        r = run_distribution(TWO6, ChannelParams(eta_d=0.0, p_d=0.0), 50_000)
        assert len(r) == 0

    @pytest.mark.parametrize("L", [0.0, 25.0, 50.0, 75.0, 100.0])
    def test_gains_match_channel_model(self, L):
        ch = ChannelParams(e_d=0.02).symmetric(L)
        n = 400_000
        r = run_distribution(TWO6, ch, n, seed=int(L))
        g = two_photon_gains(ch, TWO6.z)
        assert _sigma_ok(len(r), n, g.Q, 4)
        for col, Qc, ec in ((r.bob_conclusive, g.Q_B_c, g.e_B_c), (r.charlie_conclusive, g.Q_C_c, g.e_C_c)):
            conclusive = col >= 0
            nc = int(conclusive.sum())
            assert _sigma_ok(nc, n, Qc, 4)
            assert _sigma_ok(int((col[conclusive] != r.sent_bit[conclusive]).sum()), nc, ec, 4)

    def test_shared_decoy_gains(self):
        cfg = ProtocolConfig(source=Source.SHARED_DECOY, shared=SharedDecoyConfig())
        ch = ChannelParams(p_d=1e-4).symmetric(20.0)
        n = 400_000
        r = run_distribution(cfg, ch, n, seed=11)
        for i, (lam, p) in enumerate(cfg.shared.settings()):
            g = shared_decoy_gains(lam, ch, cfg.z)
            kept = r.setting == i
            assert _sigma_ok(int(kept.sum()), n, p * g.Q, 4)
            assert _sigma_ok(int((r.charlie_conclusive[kept] >= 0).sum()), n, p * g.Q_C_c, 4)

    def test_paired_decoy_gains(self):
        cfg = ProtocolConfig(source=Source.PAIRED_DECOY, paired=PairedDecoyConfig(), n_alpha=4.845)
        ch = ChannelParams(p_d=1e-4).symmetric(20.0)
        n = 400_000
        r = run_distribution(cfg, ch, n, seed=12)
        for i, ((gamma, chi), p) in enumerate(cfg.paired.settings()):
            g = paired_decoy_gains(gamma, chi, ch, cfg.z)
            assert _sigma_ok(int((r.setting == i).sum()), n, p * g.Q, 4)

    def test_worker_count_does_not_change_records(self):
        n = 3 * BLOCK_SIZE + 17
        ch = ChannelParams().symmetric(30.0)
        a = run_distribution(TWO6, ch, n, seed=5, workers=1).to_csv()
        b = run_distribution(TWO6, ch, n, seed=5, workers=8).to_csv()
        assert a == b
        assert a != run_distribution(TWO6, ch, n, seed=6).to_csv()

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            run_distribution(TWO6, IDEAL, -1)
        with pytest.raises(ValueError):
            run_distribution(TWO6, IDEAL, 10, workers=0)


class TestSubstitution:
    def test_hits_target_mismatch(self):
        ch = ChannelParams(e_d=0.01).symmetric(10.0)
        g = two_photon_gains(ch, TWO6.z)
        adv = Adversary.repudiation(0.3 * g.P_B_c, 0.1 * g.P_C_c)
        r = run_distribution(TWO6, ch, 400_000, adv, seed=2)
        M = len(r)
        for col, target in ((r.bob_conclusive, adv.target_P_B), (r.charlie_conclusive, adv.target_P_C)):
            wrong = int(((col >= 0) & (col != r.sent_bit)).sum())
            assert _sigma_ok(wrong, M, target, 4)

    def test_unreachable_target(self):
        g = two_photon_gains(IDEAL, TWO6.z)
        with pytest.raises(ValueError):
            substitution_rates(TWO6, IDEAL, Adversary.repudiation(2 * g.P_B_c, 0.0))

    def test_honest_has_no_substitution(self):
        assert substitution_rates(TWO6, IDEAL, Adversary.honest()) == (0.0, 0.0)

    def test_adversary_validation(self):
        with pytest.raises(ValueError):
            Adversary.forger(1.5)


def _records():
    return run_distribution(TWO6, ChannelParams().symmetric(10.0), 100_000, seed=9)


class TestEstimation:
    @pytest.mark.parametrize("beta", [0.01, 0.3, 0.5])
    def test_test_count_is_ceiling(self, beta):
        recs = _records()
        est = run_estimation(recs, beta, np.random.default_rng(0))
        assert est.M_t == math.ceil(beta * len(recs))
        assert est.M_t + est.M_u == len(recs)
        assert int((est.records.role == 1).sum()) == est.M_t

    def test_all_test_leaves_nothing_for_messaging(self):
        est = run_estimation(_records(), 1.0, np.random.default_rng(0))
        with pytest.raises(EstimateInvalidError):
            run_messaging(est.records, Thresholds(0.015, 0.0645))

    def test_error_free_channel(self):
        recs = run_distribution(TWO6, IDEAL, 20_000, seed=1)
        est = run_estimation(recs, 0.3, np.random.default_rng(0))
        assert est.e_B_c == est.e_C_c == 0.0
        assert est.P_B_c == pytest.approx(1 / 6, abs=0.02)

    def test_empty_records(self):
        empty = run_distribution(TWO6, IDEAL, 0)
        with pytest.raises(EstimateInvalidError):
            run_estimation(empty, 0.3, np.random.default_rng(0))

    def test_rejects_beta(self):
        with pytest.raises(ValueError):
            run_estimation(_records(), 1.5, np.random.default_rng(0))


class TestMessaging:
    TH = Thresholds(0.015, 0.0645)

    def _estimated(self):
        return run_estimation(_records(), 0.3, np.random.default_rng(4)).records

    def test_honest_accepts(self):
        out = run_messaging(self._estimated(), self.TH)
        assert out.bob_accepts and out.charlie_accepts

    def test_half_flips_rejected_by_charlie(self):
        out = run_messaging(self._estimated(), self.TH, Adversary.forger(0.5), np.random.default_rng(1))
        assert out.bob_accepts and not out.charlie_accepts
        assert out.E_C_c == pytest.approx(0.5, abs=0.05)

    def test_zero_flips_is_honest(self):
        recs = self._estimated()
        assert run_messaging(recs, self.TH, Adversary.forger(0.0)) == run_messaging(recs, self.TH)

    def test_forger_needs_rng(self):
        with pytest.raises(ValueError):
            run_messaging(self._estimated(), self.TH, Adversary.forger(0.2))


class TestWilson:
    @pytest.mark.parametrize("k, n", [(0, 10), (3, 10), (10, 10), (15, 10_000), (5000, 10_000)])
    def test_matches_scipy(self, k, n):
        ci = stats.binomtest(k, n).proportion_ci(confidence_level=0.95, method="wilson")
        assert wilson_interval(k, n) == pytest.approx((ci.low, ci.high), abs=1e-12)

    @pytest.mark.parametrize("k, n", [(-1, 10), (11, 10), (0, 0)])
    def test_rejects(self, k, n):
        with pytest.raises(ValueError):
            wilson_interval(k, n)


class TestRepetitions:
    def test_record_dump_header(self):
        res = simulate_repetition(TWO6, ChannelParams().symmetric(10.0), 5000, seed=1)
        lines = res.records.to_csv().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert {line.rsplit(",", 1)[1] for line in lines[1:]} == {"test", "untested"}

    def test_decoy_keeps_signal_setting(self):
        cfg = ProtocolConfig(source=Source.SHARED_DECOY, shared=SharedDecoyConfig())
        res = simulate_repetition(cfg, ChannelParams().symmetric(10.0), 20_000, seed=1)
        assert np.all(res.records.setting == 0)

    def test_bound_check_deterministic_across_workers(self):
        ch = ChannelParams().symmetric(10.0)
        a = empirical_bound_check(Adversary.honest(), 6, TWO6, ch, 20_000, seed=3, workers=1)
        b = empirical_bound_check(Adversary.honest(), 6, TWO6, ch, 20_000, seed=3, workers=3)
        assert a.format_record() == b.format_record()
        assert a.bob_reject.count == 0 and a.charlie_accept.count == 6

    def test_no_usable_repetition(self):
        with pytest.raises(EstimateInvalidError):
            empirical_bound_check(Adversary.honest(), 2, TWO6, ChannelParams(eta_d=0.0, p_d=0.0), 100)

    def test_concat_keeps_columns(self):
        r = _records()
        both = TrialRecords.concat([r, r], 2 * r.n_sent)
        assert len(both) == 2 * len(r) and both.n_sent == 2 * r.n_sent
