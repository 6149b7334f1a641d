"""
Entropy and concentration-bound kernel.

Binary entropy and its inverse, the phase/bit error-rate relations for the
SARG04-style encodings, the forger's information about the verifier's
conclusive bits, and the finite-sample deviation and tail functions for
random sampling without replacement.

Everything here is a pure function of floats.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from scipy import optimize, special

_LOG_TOL = 1e-12
_SQRT2 = math.sqrt(2.0)

#: e_p at zero bit error for the two-photon encodings, (2 - sqrt 2) / 4.
TWO_PHOTON_PHASE_FLOOR = (2.0 - _SQRT2) / 4.0


class EncodingVariant(enum.Enum):
    """Which phase-error relation (and state alphabet) applies."""

    SIX_STATE_TWO_PHOTON = "six-state-two-photon"
    FOUR_STATE_TWO_PHOTON = "four-state-two-photon"
    SIX_STATE_SINGLE_PHOTON = "six-state-single-photon"

    @property
    def n_states(self) -> int:
        return 4 if self is EncodingVariant.FOUR_STATE_TWO_PHOTON else 6

    @property
    def basis_factor(self) -> float:
        """Probability weight z of the one basis that can give a conclusive result."""
        return 0.5 if self.n_states == 4 else 1.0 / 3.0


@dataclass(frozen=True)
class ErrorRates:
    """Bit error rate, phase error rate and their joint probability.

    Attributes
    ----------
    e_b : float
        Bit error rate.
    e_p : float
        Phase error rate.
    a : float
        Probability that a bit error and a phase error occur together.
    """

    e_b: float
    e_p: float
    a: float

    def __post_init__(self):
        for name in ("e_b", "e_p", "a"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < -_LOG_TOL or v > 1.0 + _LOG_TOL:
                raise ValueError(f"{name} must be a probability, got {v}")
        if self.a > self.e_b + _LOG_TOL or self.a > self.e_p + _LOG_TOL:
            raise ValueError(
                f"joint error a={self.a} exceeds e_b={self.e_b} or e_p={self.e_p}"
            )


def _check_unit(name: str, x: float) -> None:
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {x}")


def binary_entropy(x: float) -> float:
    """Binary Shannon entropy in bits, with 0 log 0 = 0."""
    _check_unit("x", x)
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def inverse_binary_entropy(y: float) -> float:
    """
    Return the x in [0, 1/2] with ``binary_entropy(x) == y``.

    The entropy is strictly increasing on [0, 1/2], so the root is unique.
    Solved by bracketed root finding to an absolute tolerance below 1e-12.
    """
    _check_unit("y", y)
    if y == 0.0:
        return 0.0
    if y == 1.0:
        return 0.5
    return optimize.brentq(
        lambda x: binary_entropy(x) - y, 0.0, 0.5, xtol=1e-15, rtol=1e-15, maxiter=200
    )


def four_state_phase_error(e_b: float) -> float:
    """
    Phase error rate of the two-photon four-state encoding.

    Minimises ``x*e_b + (3 - 2x + sqrt(6 - 6 sqrt(2) x + 4 x^2)) / 6`` over
    all real x. The stationarity condition has a closed-form solution for
    0 < e_b < 2/3; at e_b = 0 the infimum is approached as x -> inf and
    equals (2 - sqrt 2) / 4.
    """
    _check_unit("e_b", e_b)
    if e_b == 0.0:
        return TWO_PHOTON_PHASE_FLOOR
    c = 2.0 - 6.0 * e_b
    # r = c / u where u is the scaled stationary point; finite for every e_b > 0
    r = math.sqrt(e_b * (6.0 - 9.0 * e_b) / 1.5)
    slope_term = (3.0 * _SQRT2 * e_b + c * math.sqrt(1.5 * e_b / (6.0 - 9.0 * e_b))) / 4.0
    # 3 - 2x + sqrt(...) rearranged so the large terms cancel analytically
    tail = 1.5 * r / (math.sqrt(c * c / 4.0 + 1.5 * r * r) + c / 2.0)
    return slope_term + (3.0 - 1.5 * _SQRT2 + tail) / 6.0


def four_state_objective(x: float, e_b: float) -> float:
    """The function minimised by :func:`four_state_phase_error`."""
    return x * e_b + (3.0 - 2.0 * x + math.sqrt(6.0 - 6.0 * _SQRT2 * x + 4.0 * x * x)) / 6.0


def phase_error_relation(e_b: float, variant: EncodingVariant) -> ErrorRates:
    """Map a bit error rate to (e_b, e_p, joint error) for an encoding."""
    if not (0.0 <= e_b <= 0.5):
        raise ValueError(f"e_b must lie in [0, 1/2], got {e_b}")
    if variant is EncodingVariant.SIX_STATE_TWO_PHOTON:
        e_p = TWO_PHOTON_PHASE_FLOOR + 3.0 / (2.0 * _SQRT2) * e_b
        a = (4.0 + _SQRT2) / 8.0 * e_b
    elif variant is EncodingVariant.FOUR_STATE_TWO_PHOTON:
        e_p = four_state_phase_error(e_b)
        a = e_b * e_p
    elif variant is EncodingVariant.SIX_STATE_SINGLE_PHOTON:
        e_p = 1.5 * e_b
        a = 0.75 * e_b
    else:  # pragma: no cover
        raise ValueError(f"unknown variant {variant!r}")
    return ErrorRates(e_b=e_b, e_p=min(e_p, 1.0), a=a)


def _neg_plog_ratio(p: float, q: float) -> float:
    """-p log2(p/q) with 0 log 0 = 0; p within -1e-12 of zero counts as zero."""
    if p < -_LOG_TOL:
        raise ValueError(f"negative probability {p} inside a logarithm")
    if p <= 0.0:
        return 0.0
    return -p * math.log2(p / q)


def forger_information(rates: ErrorRates) -> float:
    """
    Conditional entropy H(e_p | e_b) bounding the forger's information.

    This is the upper bound on what the dishonest authenticator can learn
    about the verifier's conclusive bits under collective attacks. The
    result is clamped to [0, 1].
    """
    e_b, e_p, a = rates.e_b, rates.e_p, rates.a
    info = _neg_plog_ratio(1.0 + a - e_b - e_p, 1.0 - e_b)
    info += _neg_plog_ratio(e_p - a, 1.0 - e_b)
    if e_b > 0.0:
        info += _neg_plog_ratio(e_b - a, e_b) + _neg_plog_ratio(a, e_b)
    return min(max(info, 0.0), 1.0)


def min_forgery_mismatch(e_b: float, variant: EncodingVariant) -> float:
    """
    Smallest mismatch rate an optimal collective forger can reach.

    Takes the equality case of ``H(S) >= 1 - I``, which is the most
    favourable value for the forger.

    Examples
    --------
    >>> round(min_forgery_mismatch(0.01, EncodingVariant.SIX_STATE_TWO_PHOTON), 6)
    0.074564
    """
    info = forger_information(phase_error_relation(e_b, variant))
    return inverse_binary_entropy(max(0.0, 1.0 - info))


def _check_sampling(n: float, k: float, lam: float) -> None:
    if not (n > 0 and k > 0):
        raise ValueError(f"population sizes must be positive, got n={n}, k={k}")
    if not (0.0 < lam < 1.0):
        raise ValueError(f"rate must lie strictly inside (0, 1), got {lam}")


def _log_sampling_correction(n: float, k: float, lam: float) -> float:
    return (
        1.0 / (8.0 * (n + k))
        + 1.0 / (12.0 * k)
        - 1.0 / (12.0 * k * lam + 1.0)
        - 1.0 / (12.0 * k * (1.0 - lam) + 1.0)
    )


def sampling_correction(n: float, k: float, lam: float) -> float:
    """Stirling correction factor shared by the deviation and tail bounds.

    Overflows to ``inf`` for vanishing sample sizes.
    """
    _check_sampling(n, k, lam)
    log_c = _log_sampling_correction(n, k, lam)
    return math.exp(log_c) if log_c < 700.0 else math.inf


def sampling_deviation(n: float, k: float, lam: float, eps: float) -> float:
    """
    Deviation of an untested population's rate from a sampled rate.

    For a population of size ``n`` and a random test sample of size ``k``
    drawn without replacement with observed rate ``lam``, the untested
    rate exceeds ``lam + sampling_deviation(...)`` with probability at most
    ``eps``.

    Parameters
    ----------
    n, k : float
        Untested and tested sizes. Real-valued sizes are accepted because
        callers pass expected counts.
    lam : float
        Observed rate in the test sample. At 0 or 1 the deviation is 0.
    eps : float
        Failure probability in (0, 1).

    Returns
    -------
    float
        Non-negative deviation; 0 when the logarithm's argument is below 1.
    """
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if lam in (0.0, 1.0):
        if not (n > 0 and k > 0):
            raise ValueError(f"population sizes must be positive, got n={n}, k={k}")
        return 0.0
    _check_sampling(n, k, lam)
    var = lam * (1.0 - lam)
    log_arg = (
        0.5 * math.log(n + k)
        + _log_sampling_correction(n, k, lam)
        - 0.5 * math.log(2.0 * math.pi * n * k * var)
        - math.log(eps)
    )
    if log_arg <= 0.0:
        return 0.0
    return math.sqrt(2.0 * (n + k) * var / (n * k)) * math.sqrt(log_arg)


def sampling_tail(n: float, k: float, lam: float, t: float) -> float:
    """
    Probability bound for a deviation ``t`` between test and untested rates.

    Inverse of :func:`sampling_deviation` in its last argument. Not clamped
    to 1; for small samples the bound can exceed 1 and is then vacuous.
    """
    _check_sampling(n, k, lam)
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    var = lam * (1.0 - lam)
    nk = n * k / (n + k)
    log_tail = (
        -nk * t * t / (2.0 * var)
        + _log_sampling_correction(n, k, lam)
        - 0.5 * math.log(2.0 * math.pi * nk * var)
    )
    return math.exp(log_tail) if log_tail < 700.0 else math.inf


def gaussian_tail(n_sigma: float) -> float:
    """Upper tail of the standard normal beyond ``n_sigma`` deviations."""
    if not n_sigma >= 0:
        raise ValueError(f"n_sigma must be non-negative, got {n_sigma}")
    return float(special.ndtr(-n_sigma))
