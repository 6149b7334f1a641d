"""
Minimal pulse counts and signature-rate curves.

The pipeline for one pulse count N is deterministic and uses expected
(analytic) statistics: gains from the channel model, decoy bounds with
Gaussian fluctuation, then the forgery, repudiation and robustness bounds.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import bounds as B
from .bounds import RobustnessMode, SecurityReport, Source, Thresholds
from .channel import ChannelParams, paired_decoy_gains, shared_decoy_gains, two_photon_gains
from .decoy import (
    PairedDecoyConfig,
    SharedDecoyConfig,
    estimate_two_photon_paired,
    estimate_two_photon_shared,
    model_observations,
)
from .entropy import EncodingVariant, gaussian_tail, min_forgery_mismatch
from .errors import EstimateInvalidError, InfeasibleError, QDSError

N_CEILING = 10**16


class SplitPolicy(enum.Enum):
    """How the security budget is tested.

    EVEN: after the fixed sampling and decoy failure terms, the remainder is
    split equally and eps_forge and eps_repud must each fit in their half.
    TOTAL: only the sum eps_sec is compared with the budget.
    """

    EVEN = "even"
    TOTAL = "total"


@dataclass(frozen=True)
class ProtocolConfig:
    """Everything about the protocol except the physical channel."""

    source: Source = Source.TWO_PHOTON
    variant: EncodingVariant = EncodingVariant.SIX_STATE_TWO_PHOTON
    thresholds: Thresholds = Thresholds(T_a=0.015, T_v=0.0645)
    beta: float = 0.3
    shared: Optional[SharedDecoyConfig] = None
    paired: Optional[PairedDecoyConfig] = None
    n_alpha: float = 4.753
    eps_sample_forge: float = 1e-10
    eps_sample_repud: float = 1e-10
    robustness: RobustnessMode = RobustnessMode.DIRECT

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.source is Source.SHARED_DECOY and self.shared is None:
            raise ValueError("shared-decoy source needs a SharedDecoyConfig")
        if self.source is Source.PAIRED_DECOY and self.paired is None:
            raise ValueError("paired-decoy source needs a PairedDecoyConfig")
        if self.variant is EncodingVariant.SIX_STATE_SINGLE_PHOTON:
            raise ValueError("rate pipeline supports the two-photon encodings only")

    @property
    def z(self) -> float:
        return self.variant.basis_factor

    @property
    def decoy(self):
        if self.source is Source.SHARED_DECOY:
            return self.shared
        if self.source is Source.PAIRED_DECOY:
            return self.paired
        return None


@dataclass(frozen=True)
class RateTarget:
    eps_sec_max: float = 1e-5
    eps_rob_max: float = 1e-6
    clock_rate: float = 1e10
    policy: SplitPolicy = SplitPolicy.EVEN

    def __post_init__(self):
        if not (0 < self.eps_sec_max < 1 and 0 < self.eps_rob_max < 1):
            raise ValueError("budgets must lie in (0, 1)")
        if not self.clock_rate > 0:
            raise ValueError("clock rate must be positive")


@dataclass
class RatePoint:
    """Result of the minimal-N search at one distance."""

    L: float
    N_min: Optional[int]
    report: Optional[SecurityReport]
    policy: str
    clock_rate: float
    reason: str = ""

    @property
    def feasible(self) -> bool:
        return self.N_min is not None

    @property
    def R(self) -> float:
        return 1.0 / (2.0 * self.N_min) if self.feasible else 0.0

    @property
    def bps(self) -> float:
        return self.R * self.clock_rate


def _signal_gains(L: float, cfg: ProtocolConfig, channel: ChannelParams):
    ch = channel.symmetric(L)
    if cfg.source is Source.TWO_PHOTON:
        return ch, two_photon_gains(ch, cfg.z)
    if cfg.source is Source.SHARED_DECOY:
        return ch, shared_decoy_gains(cfg.shared.mu, ch, cfg.z)
    m = cfg.paired.mu1
    return ch, paired_decoy_gains(m, m, ch, cfg.z)


@dataclass(frozen=True)
class TransferabilityBounds:
    """Repudiation and robustness terms, which do not involve the forger."""

    eps_repud: float
    eps_rob: float
    repudiation_root: float
    gap: float
    gap_deviation: float
    counts: B.ProtocolCounts


def _transferability(N, L, cfg, channel):
    if not N >= 1:
        raise ValueError(f"N must be at least 1, got {N}")
    ch, sig = _signal_gains(L, cfg, channel)
    if sig.Q <= 0 or sig.degenerate:
        raise InfeasibleError("no conclusive coincidences on the signal setting")
    M = sig.Q * N
    if cfg.source.is_decoy:
        M *= cfg.decoy.signal_probability
    counts = B.ProtocolCounts.from_kept(N, M, cfg.beta)
    th = cfg.thresholds
    gap, gap_dev = B.correlation_gap(
        sig.e_B_c, sig.e_C_c, sig.P_B_c, sig.P_C_c, counts, cfg.eps_sample_repud
    )
    root = B.solve_repudiation_root(sig.P_B_c, sig.P_C_c, th, gap)
    bounds = TransferabilityBounds(
        eps_repud=B.repudiation_probability(root, sig.P_B_c, th.T_a, counts.M_u),
        eps_rob=B.robustness_probability(sig.e_B_c, sig.P_B_c, counts, th.T_a, cfg.robustness),
        repudiation_root=root,
        gap=gap,
        gap_deviation=gap_dev,
        counts=counts,
    )
    return ch, sig, bounds


def transferability_bounds(
    N: float, L: float, cfg: ProtocolConfig, channel: ChannelParams
) -> TransferabilityBounds:
    """
    Repudiation and honest-abort bounds at ``N`` pulses and distance ``L``.

    Defined even when the verification threshold is too loose for a
    forgery bound, which makes it usable for small test configurations.
    """
    return _transferability(N, L, cfg, channel)[2]


def evaluate_at_n(N: float, L: float, cfg: ProtocolConfig, channel: ChannelParams) -> SecurityReport:
    """
    Full analytic bound pipeline at ``N`` pulses and total distance ``L``.

    The two arms are each ``L / 2`` long. Only signal-setting pulses form
    the test and untested strings for decoy sources.

    Raises
    ------
    InfeasibleError, EstimateInvalidError
        When no bound can be given at this N.
    """
    ch, sig, tb = _transferability(N, L, cfg, channel)
    counts, th = tb.counts, cfg.thresholds

    if cfg.source is Source.TWO_PHOTON:
        bit_error = B.forgery_bit_error(sig.e_C_c, sig.P_C_c, counts, cfg.eps_sample_forge)
        forge_dev = bit_error - sig.e_C_c
        threshold = th.T_v
        n_conclusive = sig.P_C_c * counts.M_u
        eps_decoy = 0.0
    else:
        obs = model_observations(cfg.decoy, ch, cfg.z, N)
        if cfg.source is Source.SHARED_DECOY:
            est = estimate_two_photon_shared(obs, cfg.shared, cfg.n_alpha)
        else:
            est = estimate_two_photon_paired(obs, cfg.paired, cfg.n_alpha)
        if not est.usable:
            raise EstimateInvalidError(f"two-photon error bound {est.e_upper_raw:.4g} exceeds 1/2")
        bit_error = est.e_upper
        forge_dev = 0.0
        # fraction of Charlie's conclusive signal bits that come from two-photon emissions
        two_photon_share = est.Q_lower / sig.Q_C_c
        threshold = th.T_v / two_photon_share
        n_conclusive = two_photon_share * sig.P_C_c * counts.M_u
        eps_decoy = est.failure_terms * gaussian_tail(cfg.n_alpha)

    mismatch = min_forgery_mismatch(min(bit_error, 0.5), cfg.variant)
    eps_forge = B.forgery_probability(mismatch, threshold, n_conclusive)

    return B.compose_security(
        cfg.source,
        eps_forge=eps_forge,
        eps_repud=tb.eps_repud,
        eps_sample_forge=cfg.eps_sample_forge,
        eps_sample_repud=cfg.eps_sample_repud,
        eps_decoy=eps_decoy,
        eps_rob=tb.eps_rob,
        repudiation_root=tb.repudiation_root,
        forgery_mismatch=mismatch,
        gap=tb.gap,
        forge_deviation=forge_dev,
        gap_deviation=tb.gap_deviation,
        bit_error=bit_error,
        effective_threshold=threshold,
        N=float(N),
        M=counts.M,
        M_u=counts.M_u,
    )


def meets_target(report: SecurityReport, target: RateTarget) -> bool:
    if report.eps_rob > target.eps_rob_max:
        return False
    if target.policy is SplitPolicy.TOTAL:
        return report.eps_sec <= target.eps_sec_max
    fixed = report.eps_sec - report.eps_forge - report.eps_repud
    half = (target.eps_sec_max - fixed) / 2.0
    return half > 0 and report.eps_forge <= half and report.eps_repud <= half


def _check(N: int, L, cfg, channel, target):
    try:
        report = evaluate_at_n(N, L, cfg, channel)
    except (QDSError, ValueError) as exc:
        return None, str(exc)
    if meets_target(report, target):
        return report, ""
    return None, "budget not met"


def min_pulses(
    L: float, cfg: ProtocolConfig, channel: ChannelParams, target: RateTarget = RateTarget()
) -> RatePoint:
    """
    Smallest integer N whose bounds fit the budgets at distance ``L``.

    Doubles N from 1 to bracket the threshold, then bisects on integers.
    Relies on every bound being monotone in N.

    Raises
    ------
    InfeasibleError
        If no N up to 1e16 meets the budgets.
    """
    hi = 1
    report, reason = _check(hi, L, cfg, channel, target)
    while report is None:
        if hi >= N_CEILING:
            raise InfeasibleError(f"no N <= {N_CEILING:.0e} meets the budgets at L={L} km: {reason}")
        hi = min(hi * 2, N_CEILING)
        report, reason = _check(hi, L, cfg, channel, target)
    lo = hi // 2  # infeasible (or zero)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        rep, _ = _check(mid, L, cfg, channel, target)
        if rep is None:
            lo = mid
        else:
            hi, report = mid, rep
    return RatePoint(L=L, N_min=hi, report=report, policy=target.policy.value,
                     clock_rate=target.clock_rate)


def _sweep_point(L, cfg, channel, target) -> RatePoint:
    try:
        return min_pulses(L, cfg, channel, target)
    except InfeasibleError as exc:
        return RatePoint(L=L, N_min=None, report=None, policy=target.policy.value,
                         clock_rate=target.clock_rate, reason=str(exc))


def distance_grid(L_min: float, L_max: float, step: float) -> np.ndarray:
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    if L_min > L_max or L_min < 0:
        raise ValueError(f"need 0 <= L_min <= L_max, got {L_min}, {L_max}")
    n = int(math.floor((L_max - L_min) / step + 1e-9)) + 1
    return L_min + step * np.arange(n)


def sweep(
    L_min: float,
    L_max: float,
    step: float,
    cfg: ProtocolConfig,
    channel: ChannelParams,
    target: RateTarget = RateTarget(),
    workers: int = 1,
) -> List[RatePoint]:
    """Minimal-N search over a distance grid; infeasible points are flagged, not raised."""
    grid = [float(L) for L in distance_grid(L_min, L_max, step)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda L: _sweep_point(L, cfg, channel, target), grid))
    return [_sweep_point(L, cfg, channel, target) for L in grid]


SWEEP_COLUMNS = ["L_km", "N_min", "R", "bps", "eps_forge", "eps_repud", "eps_rob", "eps_sec", "feasible"]


def sweep_csv(points: List[RatePoint]) -> str:
    """CSV text for a sweep, header first, 12 significant digits."""
    rows = [",".join(SWEEP_COLUMNS)]
    for p in points:
        r = p.report
        vals = [
            f"{p.L:.12g}",
            str(p.N_min) if p.feasible else "",
            f"{p.R:.12g}",
            f"{p.bps:.12g}",
            f"{r.eps_forge:.12g}" if r else "",
            f"{r.eps_repud:.12g}" if r else "",
            f"{r.eps_rob:.12g}" if r else "",
            f"{r.eps_sec:.12g}" if r else "",
            "true" if p.feasible else "false",
        ]
        rows.append(",".join(vals))
    return "\n".join(rows) + "\n"


def log_rate_csv(points: List[RatePoint]) -> str:
    """Companion plotting file: distance and log10 of the rate (blank if infeasible)."""
    rows = ["L_km,log10_R"]
    for p in points:
        rows.append(f"{p.L:.12g}," + (f"{math.log10(p.R):.12g}" if p.feasible else ""))
    return "\n".join(rows) + "\n"
