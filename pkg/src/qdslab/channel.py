"""
Fibre and threshold-detector model.

Produces coincidence gains, conclusive-result gains and conclusive QBERs
for three sources: two copies of a single photon, one phase-randomised
weak coherent pulse split 50:50 into the two arms (shared intensity), and
two independently modulated weak coherent pulses (paired intensities).

All three share one structure. For each receiving arm let ``m`` be the
probability that no signal photon is detected. Then the arm clicks with
probability ``1 - (1 - Y0) m`` and, given the other arm clicks, its
conclusive and erroneous-conclusive probabilities are
``z [Y0 m + (1/2 + e_d)(1 - m)]`` and ``z [Y0 m / 2 + e_d (1 - m)]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .entropy import EncodingVariant


@dataclass(frozen=True)
class ChannelParams:
    """Physical link and detector parameters.

    Attributes
    ----------
    alpha : float
        Fibre loss in dB/km.
    eta_d : float
        Detector efficiency.
    p_d : float
        Dark count probability per detector per gate.
    e_d : float
        Misalignment error probability.
    L_AB, L_AC : float
        Signer-to-recipient fibre lengths in km.
    """

    alpha: float = 0.16
    eta_d: float = 0.93
    p_d: float = 1e-7
    e_d: float = 0.005
    L_AB: float = 0.0
    L_AC: float = 0.0

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")
        for name in ("eta_d", "p_d", "e_d"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not (self.L_AB >= 0 and self.L_AC >= 0):
            raise ValueError("distances must be non-negative")

    def symmetric(self, total_km: float) -> "ChannelParams":
        """Copy with each arm set to half of ``total_km``."""
        return replace(self, L_AB=total_km / 2.0, L_AC=total_km / 2.0)

    @property
    def eta_B(self) -> float:
        return transmittance(self.L_AB, self)

    @property
    def eta_C(self) -> float:
        return transmittance(self.L_AC, self)


@dataclass(frozen=True)
class GainTable:
    """Gains and conclusive statistics for one source setting.

    ``eQ_B_c`` and ``eQ_C_c`` are the error-gain products e^c * Q^c, kept
    separately because the decoy estimators consume them directly.
    ``degenerate`` is set when a conclusive gain is zero; the matching QBER
    is then reported as 0.
    """

    Q: float
    Q_B_c: float
    Q_C_c: float
    eQ_B_c: float
    eQ_C_c: float
    degenerate: bool = False

    @property
    def e_B_c(self) -> float:
        return self.eQ_B_c / self.Q_B_c if self.Q_B_c > 0 else 0.0

    @property
    def e_C_c(self) -> float:
        return self.eQ_C_c / self.Q_C_c if self.Q_C_c > 0 else 0.0

    @property
    def P_B_c(self) -> float:
        return self.Q_B_c / self.Q if self.Q > 0 else 0.0

    @property
    def P_C_c(self) -> float:
        return self.Q_C_c / self.Q if self.Q > 0 else 0.0


def transmittance(L: float, params: ChannelParams) -> float:
    """Fibre-plus-detector transmittance over ``L`` km."""
    if L < 0:
        raise ValueError(f"distance must be non-negative, got {L}")
    return params.eta_d * 10.0 ** (-params.alpha * L / 10.0)


def dark_yield(p_d: float) -> float:
    """Vacuum click probability with two detectors and active basis choice."""
    if not 0.0 <= p_d <= 1.0:
        raise ValueError(f"p_d must lie in [0, 1], got {p_d}")
    return 2.0 * p_d * (1.0 - p_d)


def basis_factor(variant: EncodingVariant) -> float:
    return variant.basis_factor


def _check_z(z: float) -> None:
    if not (math.isclose(z, 1.0 / 3.0) or math.isclose(z, 0.5)):
        raise ValueError(f"basis factor must be 1/3 or 1/2, got {z}")


def _arm_statistics(miss_B: float, miss_C: float, params: ChannelParams, z: float) -> GainTable:
    Y0 = dark_yield(params.p_d)
    click_B = 1.0 - (1.0 - Y0) * miss_B
    click_C = 1.0 - (1.0 - Y0) * miss_C

    def conclusive(miss):
        return z * (Y0 * miss + (0.5 + params.e_d) * (1.0 - miss))

    def wrong(miss):
        return z * (0.5 * Y0 * miss + params.e_d * (1.0 - miss))

    Q_B_c = conclusive(miss_B) * click_C
    Q_C_c = conclusive(miss_C) * click_B
    return GainTable(
        Q=click_B * click_C,
        Q_B_c=Q_B_c,
        Q_C_c=Q_C_c,
        eQ_B_c=wrong(miss_B) * click_C,
        eQ_C_c=wrong(miss_C) * click_B,
        degenerate=(Q_B_c == 0.0 or Q_C_c == 0.0),
    )


def two_photon_gains(params: ChannelParams, z: float) -> GainTable:
    """Gains when each recipient receives one copy of a single photon."""
    _check_z(z)
    return _arm_statistics(1.0 - params.eta_B, 1.0 - params.eta_C, params, z)


def shared_decoy_gains(lam: float, params: ChannelParams, z: float) -> GainTable:
    """
    Gains for a weak coherent pulse of intensity ``lam`` split 50:50.

    Each arm carries a Poisson field of mean ``lam / 2``.
    """
    _check_z(z)
    if lam < 0:
        raise ValueError(f"intensity must be non-negative, got {lam}")
    return _arm_statistics(
        math.exp(-lam * params.eta_B / 2.0), math.exp(-lam * params.eta_C / 2.0), params, z
    )


def paired_decoy_gains(gamma: float, chi: float, params: ChannelParams, z: float) -> GainTable:
    """Gains when the recipients' arms carry independent intensities ``gamma`` and ``chi``."""
    _check_z(z)
    if gamma < 0 or chi < 0:
        raise ValueError(f"intensities must be non-negative, got {(gamma, chi)}")
    return _arm_statistics(math.exp(-gamma * params.eta_B), math.exp(-chi * params.eta_C), params, z)


def shared_photon_yields(params: ChannelParams, z: float, n_max: int = 20):
    """
    Charlie-side conclusive yields per emitted photon number, shared source.

    Returns ``(Y, e)`` arrays of length ``n_max + 1`` where ``Y[n]`` is the
    probability that both arms click and the verifier is conclusive given an
    ``n``-photon pulse, and ``e[n]`` the error rate of those events.
    Weighting by Poisson(lam) reproduces :func:`shared_decoy_gains`.
    """
    _check_z(z)
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    n = np.arange(n_max + 1)
    Y0 = dark_yield(params.p_d)
    sB, sC = params.eta_B / 2.0, params.eta_C / 2.0

    def expand(hit, dark):
        # z [hit + (dark - hit) m_C] [1 - (1 - Y0) m_B], with m -> (1 - s)^n per photon
        return z * (
            hit
            - hit * (1.0 - Y0) * (1.0 - sB) ** n
            + (dark - hit) * (1.0 - sC) ** n
            - (dark - hit) * (1.0 - Y0) * (1.0 - sB - sC) ** n
        )

    Y = expand(0.5 + params.e_d, Y0)
    eY = expand(params.e_d, 0.5 * Y0)
    with np.errstate(invalid="ignore", divide="ignore"):
        e = np.where(Y > 0, eY / np.where(Y > 0, Y, 1.0), 0.0)
    return Y, e


def paired_photon_yields(params: ChannelParams, z: float, n_max: int = 20):
    """
    Charlie-side conclusive yields for ``n`` photons to Bob and ``m`` to Charlie.

    Returns ``(Y, e)`` arrays of shape ``(n_max + 1, n_max + 1)`` indexed
    ``[n, m]``.
    """
    _check_z(z)
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    k = np.arange(n_max + 1)
    Y0 = dark_yield(params.p_d)
    miss_B = (1.0 - params.eta_B) ** k
    miss_C = (1.0 - params.eta_C) ** k
    click_B = 1.0 - (1.0 - Y0) * miss_B
    Y = np.outer(click_B, z * (Y0 * miss_C + (0.5 + params.e_d) * (1.0 - miss_C)))
    eY = np.outer(click_B, z * (0.5 * Y0 * miss_C + params.e_d * (1.0 - miss_C)))
    with np.errstate(invalid="ignore", divide="ignore"):
        e = np.where(Y > 0, eY / np.where(Y > 0, Y, 1.0), 0.0)
    return Y, e
