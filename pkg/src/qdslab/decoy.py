"""
Decoy-state bounds on the two-photon component seen by the verifier.

Two source layouts are supported:

* shared intensity: one modulator before the splitter, intensities
  mu > nu > omega > 0 plus vacuum; the two-photon yield is bounded from
  the four conclusive gains.
* paired intensities: a modulator in each arm, seven intensity pairs
  built from mu1 > nu1 > 0; the (1, 1)-photon yield is bounded in the
  same way as measurement-device-independent QKD.

Finite statistics enter through a Gaussian fluctuation of every observed
gain (and error-gain product) by ``n_alpha`` standard deviations, each
pushed in the direction that loosens the bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Hashable, Iterable, NamedTuple, Tuple

from .channel import ChannelParams, paired_decoy_gains, shared_decoy_gains
from .errors import EstimateInvalidError

SHARED_FAILURE_TERMS = 7
PAIRED_FAILURE_TERMS = 11


class Fluctuation(NamedTuple):
    upper: float
    lower: float
    degenerate: bool


def fluctuate(Q: float, n_pulses: float, n_alpha: float) -> Fluctuation:
    """
    Upper and lower statistical bounds on a gain measured over ``n_pulses``.

    ``Q (1 +/- n_alpha / sqrt(n_pulses Q))``; the lower bound is clamped at
    zero. ``degenerate`` marks fewer than one expected event.
    """
    if not 0.0 <= Q <= 1.0:
        raise ValueError(f"gain must lie in [0, 1], got {Q}")
    if not n_pulses >= 1:
        raise ValueError(f"pulse count must be at least 1, got {n_pulses}")
    if n_alpha < 0:
        raise ValueError(f"n_alpha must be non-negative, got {n_alpha}")
    events = n_pulses * Q
    if Q == 0.0:
        return Fluctuation(0.0, 0.0, True)
    spread = n_alpha * math.sqrt(Q / n_pulses)
    return Fluctuation(Q + spread, max(0.0, Q - spread), events < 1.0)


@dataclass(frozen=True)
class Observation:
    """Verifier-side conclusive gain, its QBER, and the pulses sent at that setting."""

    gain: float
    qber: float
    pulses: float

    def __post_init__(self):
        if not (0.0 <= self.gain <= 1.0 and 0.0 <= self.qber <= 1.0):
            raise ValueError(f"gain and qber must lie in [0, 1], got {self.gain}, {self.qber}")
        if not self.pulses >= 1:
            raise ValueError(f"pulse count must be at least 1, got {self.pulses}")

    @property
    def error_gain(self) -> float:
        return self.gain * self.qber


ObservedGains = Dict[Hashable, Observation]


def _check_probabilities(probs: Iterable[float]) -> None:
    probs = list(probs)
    if any(not 0.0 < p < 1.0 for p in probs):
        raise ValueError(f"selection probabilities must lie in (0, 1), got {probs}")
    if abs(sum(probs) - 1.0) > 1e-9:
        raise ValueError(f"selection probabilities must sum to 1, got {sum(probs)}")


@dataclass(frozen=True)
class SharedDecoyConfig:
    """Intensities and selection probabilities for the shared-intensity source."""

    mu: float = 0.34
    nu: float = 0.16
    omega: float = 0.01
    P_mu: float = 0.55
    P_nu: float = 0.25
    P_omega: float = 0.18
    P_0: float = 0.02

    def __post_init__(self):
        if not (self.mu > self.nu > self.omega > 0):
            raise ValueError(
                f"need mu > nu > omega > 0, got {(self.mu, self.nu, self.omega)}"
            )
        _check_probabilities((self.P_mu, self.P_nu, self.P_omega, self.P_0))

    @property
    def signal(self) -> float:
        return self.mu

    @property
    def signal_probability(self) -> float:
        return self.P_mu

    def settings(self) -> Tuple[Tuple[float, float], ...]:
        """(intensity, probability) for every setting, signal first."""
        return (
            (self.mu, self.P_mu),
            (self.nu, self.P_nu),
            (self.omega, self.P_omega),
            (0.0, self.P_0),
        )


@dataclass(frozen=True)
class PairedDecoyConfig:
    """Intensities and the seven pair probabilities for the paired source.

    Pair probabilities are named ``P_<bob><charlie>`` with ``m`` for mu1,
    ``n`` for nu1 and ``0`` for vacuum.
    """

    mu1: float = 0.17
    nu1: float = 0.08
    P_mm: float = 0.57
    P_m0: float = 0.01
    P_0m: float = 0.01
    P_nn: float = 0.30
    P_n0: float = 0.05
    P_0n: float = 0.05
    P_00: float = 0.01

    def __post_init__(self):
        if not (self.mu1 > self.nu1 > 0):
            raise ValueError(f"need mu1 > nu1 > 0, got {(self.mu1, self.nu1)}")
        _check_probabilities(p for _, p in self.settings())

    @property
    def signal(self) -> Tuple[float, float]:
        return (self.mu1, self.mu1)

    @property
    def signal_probability(self) -> float:
        return self.P_mm

    def settings(self) -> Tuple[Tuple[Tuple[float, float], float], ...]:
        m, n = self.mu1, self.nu1
        return (
            ((m, m), self.P_mm),
            ((m, 0.0), self.P_m0),
            ((0.0, m), self.P_0m),
            ((n, n), self.P_nn),
            ((n, 0.0), self.P_n0),
            ((0.0, n), self.P_0n),
            ((0.0, 0.0), self.P_00),
        )


@dataclass(frozen=True)
class TwoPhotonEstimate:
    """Bounds on the verifier's two-photon statistics.

    ``e_upper`` is clamped to 1/2; ``e_upper_raw`` keeps the unclamped value
    and ``usable`` is False when it exceeded 1/2.
    """

    Y_lower: float
    e_upper: float
    Q_lower: float
    failure_terms: int
    e_upper_raw: float

    @property
    def usable(self) -> bool:
        return self.e_upper_raw <= 0.5


def model_observations(cfg, params: ChannelParams, z: float, n_pulses: float) -> ObservedGains:
    """Expected verifier-side observations for every decoy setting of ``cfg``."""
    obs: ObservedGains = {}
    for key, prob in cfg.settings():
        if isinstance(cfg, SharedDecoyConfig):
            table = shared_decoy_gains(key, params, z)
        else:
            table = paired_decoy_gains(key[0], key[1], params, z)
        obs[key] = Observation(table.Q_C_c, table.e_C_c, prob * n_pulses)
    return obs


class _Picker:
    """Chooses raw or fluctuated observations in the pessimal direction."""

    def __init__(self, obs: ObservedGains, n_alpha: float, worst_case: bool):
        self.obs = obs
        self.n_alpha = n_alpha
        self.worst_case = worst_case

    def _get(self, key) -> Observation:
        try:
            return self.obs[key]
        except KeyError:
            raise ValueError(f"missing observation for intensity setting {key!r}") from None

    def _pick(self, value: float, pulses: float, want_high: bool) -> float:
        if not self.worst_case:
            return value
        f = fluctuate(value, pulses, self.n_alpha)
        return f.upper if want_high else f.lower

    def gain(self, key, coef: float, lower_bound: bool) -> float:
        """coef * gain, moved to shrink a lower bound (or grow an upper bound)."""
        o = self._get(key)
        want_high = (coef < 0) if lower_bound else (coef > 0)
        return coef * self._pick(o.gain, o.pulses, want_high)

    def error_gain(self, key, coef: float) -> float:
        o = self._get(key)
        return coef * self._pick(o.error_gain, o.pulses, coef > 0)


def _finish(Y: float, numerator: float, scale: float, q_weight: float, terms: int) -> TwoPhotonEstimate:
    e_raw = numerator / (scale * Y)
    e_raw = max(e_raw, 0.0)
    return TwoPhotonEstimate(
        Y_lower=Y,
        e_upper=min(e_raw, 0.5),
        Q_lower=q_weight * Y,
        failure_terms=terms,
        e_upper_raw=e_raw,
    )


def estimate_two_photon_shared(
    obs: ObservedGains,
    cfg: SharedDecoyConfig,
    n_alpha: float = 4.753,
    worst_case: bool = True,
) -> TwoPhotonEstimate:
    """
    Lower-bound Y_2 and upper-bound e_2 for the shared-intensity source.

    Parameters
    ----------
    obs : dict
        Observations keyed by intensity (``cfg.mu``, ``cfg.nu``,
        ``cfg.omega`` and ``0.0``).
    cfg : SharedDecoyConfig
    n_alpha : float
        Standard deviations of fluctuation applied when ``worst_case``.
    worst_case : bool
        Fluctuate each observed quantity in its pessimal direction. Seven
        quantities are fluctuated (four gains, three error gains).

    Raises
    ------
    EstimateInvalidError
        If the yield lower bound is not positive.
    """
    mu, nu, om = cfg.mu, cfg.nu, cfg.omega
    p = _Picker(obs, n_alpha, worst_case)
    vac = mu**3 * (nu - om) + nu**3 * (om - mu) + om**3 * (mu - nu)
    bracket = (
        p.gain(nu, mu * om * (mu**2 - om**2) * math.exp(nu), True)
        + p.gain(om, -mu * nu * (mu**2 - nu**2) * math.exp(om), True)
        + p.gain(mu, -nu * om * (nu**2 - om**2) * math.exp(mu), True)
        + p.gain(0.0, vac, True)
    )
    Y = 2.0 * bracket / (mu * nu * om * (mu - nu) * (mu - om) * (nu - om))
    if not Y > 0:
        raise EstimateInvalidError(f"two-photon yield bound is not positive ({Y:.3e})")
    numerator = (
        p.error_gain(nu, om * math.exp(nu))
        + p.error_gain(om, -nu * math.exp(om))
        + p.error_gain(0.0, nu - om)
    )
    terms = SHARED_FAILURE_TERMS if worst_case else 0
    return _finish(Y, 2.0 * numerator, nu * om * (nu - om), math.exp(-mu) * mu**2 / 2.0, terms)


def estimate_two_photon_paired(
    obs: ObservedGains,
    cfg: PairedDecoyConfig,
    n_alpha: float = 4.845,
    worst_case: bool = True,
) -> TwoPhotonEstimate:
    """Lower-bound Y_11 and upper-bound e_11 for the paired-intensity source.

    Observations are keyed by ``(bob_intensity, charlie_intensity)``.
    Eleven quantities are fluctuated (seven gains, four error gains).
    """
    m, n = cfg.mu1, cfg.nu1
    em, en = math.exp(m), math.exp(n)
    p = _Picker(obs, n_alpha, worst_case)
    bracket = (
        p.gain((n, n), m**3 * en**2, True)
        + p.gain((n, 0.0), -(m**3) * en, True)
        + p.gain((0.0, n), -(m**3) * en, True)
        + p.gain((m, m), -(n**3) * em**2, True)
        + p.gain((m, 0.0), n**3 * em, True)
        + p.gain((0.0, m), n**3 * em, True)
        + p.gain((0.0, 0.0), m**3 - n**3, True)
    )
    Y = bracket / (m**2 * n**2 * (m - n))
    if not Y > 0:
        raise EstimateInvalidError(f"(1,1)-photon yield bound is not positive ({Y:.3e})")
    numerator = (
        p.error_gain((n, n), en**2)
        + p.error_gain((n, 0.0), -en)
        + p.error_gain((0.0, n), -en)
        + p.error_gain((0.0, 0.0), 1.0)
    )
    terms = PAIRED_FAILURE_TERMS if worst_case else 0
    return _finish(Y, numerator, n**2, math.exp(-2.0 * m) * m**2, terms)
