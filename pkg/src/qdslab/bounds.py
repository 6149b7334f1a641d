"""
Forgery, repudiation and robustness bounds, and their composition.

Notation follows the protocol description: ``P_B_c`` / ``P_C_c`` are the
probabilities that Bob / Charlie obtain a conclusive result on a kept
pulse, ``e_B_c`` / ``e_C_c`` the mismatch rates of their conclusive test
bits, ``T_a`` / ``T_v`` the authentication / verification thresholds.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Tuple

from scipy import optimize

from .entropy import sampling_deviation, sampling_tail
from .errors import ConvergenceError, InfeasibleError


class Source(enum.Enum):
    """Photon source feeding the two recipients."""

    TWO_PHOTON = "two-photon"
    SHARED_DECOY = "shared-decoy"
    PAIRED_DECOY = "paired-decoy"

    @property
    def is_decoy(self) -> bool:
        return self is not Source.TWO_PHOTON


@dataclass(frozen=True)
class ProtocolCounts:
    """Pulse bookkeeping for one message.

    Counts are floats because the analytic pipeline works with expected
    values; the Monte Carlo engine fills them with integers.
    """

    N: float
    M: float
    M_t: float
    M_u: float
    beta: float

    @classmethod
    def from_kept(cls, N: float, M: float, beta: float) -> "ProtocolCounts":
        """Split ``M`` kept pulses into a ``beta`` test fraction and the rest."""
        if not 0.0 <= beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {beta}")
        if M < 0:
            raise ValueError(f"M must be non-negative, got {M}")
        M_t = beta * M
        return cls(N=N, M=M, M_t=M_t, M_u=M - M_t, beta=beta)


@dataclass(frozen=True)
class Thresholds:
    """Authentication and verification mismatch thresholds."""

    T_a: float
    T_v: float

    def __post_init__(self):
        if not (0.0 <= self.T_a < self.T_v < 0.5):
            raise ValueError(f"need 0 <= T_a < T_v < 1/2, got T_a={self.T_a}, T_v={self.T_v}")


def correlation_gap(
    e_B_c: float,
    e_C_c: float,
    P_B_c: float,
    P_C_c: float,
    counts: ProtocolCounts,
    eps_sample: float,
) -> Tuple[float, float]:
    """
    Bound the Bob-Charlie mismatch on doubly conclusive untested bits.

    Returns ``(gap, deviation)`` where ``gap = e_B_c + e_C_c + deviation``
    and ``deviation`` is the sampling correction over the doubly
    conclusive populations ``P_C_c P_B_c M_u`` and ``P_C_c P_B_c M_t``.
    """
    if counts.M_t <= 0 or counts.M_u <= 0:
        raise ValueError("need a non-empty test sample and untested remainder")
    test_gap = e_B_c + e_C_c
    both = P_B_c * P_C_c
    if not 0.0 <= test_gap < 1.0:
        raise InfeasibleError(f"test mismatch sum {test_gap} leaves no room for a bound")
    deviation = sampling_deviation(both * counts.M_u, both * counts.M_t, test_gap, eps_sample)
    return test_gap + deviation, deviation


def _crossing(P_B_c: float, P_C_c: float, th: Thresholds, gap: float):
    T_a, T_v = th.T_a, th.T_v

    def f(A: float) -> float:
        charlie = A / P_B_c + gap
        return (A - P_B_c * T_a) ** 2 / (2.0 * A) - (P_C_c * T_v - P_C_c * charlie) ** 2 / (
            3.0 * P_C_c * charlie
        )

    return f


def solve_repudiation_root(P_B_c: float, P_C_c: float, th: Thresholds, gap: float) -> float:
    """
    Bob's expected untested mismatch at the signer's best repudiation attack.

    Finds the unique crossing of Bob's acceptance tail and Charlie's
    rejection tail on ``P_B_c T_a < A < P_B_c (T_v - gap)``, where the
    signer pushes Charlie's rate to the edge allowed by ``gap``.

    Raises
    ------
    InfeasibleError
        If ``T_v - gap <= T_a``.
    ConvergenceError
        If the endpoint signs do not bracket a root.
    """
    if not (P_B_c > 0 and P_C_c > 0):
        raise ValueError("conclusive probabilities must be positive")
    if th.T_v - gap <= th.T_a:
        raise InfeasibleError(
            f"T_v - gap = {th.T_v - gap:.6g} does not exceed T_a = {th.T_a:.6g}"
        )
    f = _crossing(P_B_c, P_C_c, th, gap)
    lo = P_B_c * th.T_a
    hi = P_B_c * (th.T_v - gap)
    lo_eval = lo if lo > 0 else hi * 1e-15
    f_lo, f_hi = f(lo_eval), f(hi)
    if not (f_lo < 0 < f_hi):
        raise ConvergenceError(f"repudiation equation not bracketed: f(lo)={f_lo}, f(hi)={f_hi}")
    return optimize.brentq(f, lo_eval, hi, xtol=1e-300, rtol=1e-13, maxiter=500)


def repudiation_probability(A: float, P_B_c: float, T_a: float, M_u: float) -> float:
    """Chernoff bound on Bob accepting while Charlie rejects, at root ``A``."""
    if not A >= P_B_c * T_a or A <= 0:
        raise ValueError(f"A={A} must exceed P_B_c*T_a={P_B_c * T_a}")
    if M_u < 1:
        raise ValueError(f"M_u must be at least 1, got {M_u}")
    return math.exp(-((A - P_B_c * T_a) ** 2) / (2.0 * A) * M_u)


def bob_accepts_bound(P_B: float, P_B_c: float, T_a: float, M_u: float) -> float:
    """Chernoff bound on Bob accepting when his expected mismatch is ``P_B``."""
    return math.exp(-((P_B - P_B_c * T_a) ** 2) / (2.0 * P_B) * M_u)


def charlie_rejects_bound(P_C: float, P_C_c: float, T_v: float, M_u: float) -> float:
    """Chernoff bound on Charlie rejecting when his expected mismatch is ``P_C``."""
    return math.exp(-((P_C_c * T_v - P_C) ** 2) / (3.0 * P_C) * M_u)


def forgery_probability(mismatch: float, threshold: float, n_conclusive: float) -> float:
    """
    Chernoff bound on Charlie accepting a forged message.

    Parameters
    ----------
    mismatch : float
        Minimum mismatch rate the forger can achieve.
    threshold : float
        Effective verification threshold.
    n_conclusive : float
        Number of Charlie's untested conclusive bits that the bound covers.
    """
    if threshold >= mismatch:
        raise InfeasibleError(
            f"threshold {threshold:.6g} is not below forger mismatch {mismatch:.6g}"
        )
    if n_conclusive < 1:
        raise ValueError(f"need at least one conclusive bit, got {n_conclusive}")
    return math.exp(-((mismatch - threshold) ** 2) / (2.0 * mismatch) * n_conclusive)


def forgery_bit_error(
    e_C_c: float, P_C_c: float, counts: ProtocolCounts, eps_sample: float
) -> float:
    """Charlie's untested conclusive error rate, bounded from his test sample."""
    if counts.M_t <= 0 or counts.M_u <= 0:
        raise ValueError("need a non-empty test sample and untested remainder")
    return e_C_c + sampling_deviation(P_C_c * counts.M_u, P_C_c * counts.M_t, e_C_c, eps_sample)


class RobustnessMode(enum.Enum):
    """How the honest-abort probability is bounded.

    DIRECT evaluates the tail at the observed test error rate. FIXED_POINT
    first inflates the test rate by a sampling deviation whose failure
    probability equals the resulting tail, and solves for self-consistency.
    """

    DIRECT = "direct"
    FIXED_POINT = "fixed-point"


def robustness_probability(
    e_B_c: float,
    P_B_c: float,
    counts: ProtocolCounts,
    T_a: float,
    mode: RobustnessMode = RobustnessMode.DIRECT,
) -> float:
    """
    Bound on Bob rejecting an honest message.

    Raises
    ------
    InfeasibleError
        If the threshold does not exceed the (inflated) error rate.
    """
    n, k = P_B_c * counts.M_u, P_B_c * counts.M_t
    if not (n > 0 and k > 0):
        raise ValueError("need conclusive test and untested bits")
    if e_B_c == 0.0:
        # zero error probability: Bob never sees a mismatch
        return 0.0
    if T_a <= e_B_c:
        raise InfeasibleError(f"T_a={T_a} does not exceed the error rate {e_B_c}")
    if mode is RobustnessMode.DIRECT:
        return sampling_tail(n, k, e_B_c, T_a - e_B_c)

    def tail_at(E: float) -> float:
        return sampling_tail(n, k, E, T_a - E)

    def residual(E: float) -> float:
        eps = min(tail_at(E), 1.0 - 1e-16)
        return sampling_deviation(n, k, e_B_c, eps) - (E - e_B_c)

    r_hi = residual(T_a)
    if r_hi > 0:
        raise InfeasibleError("inflated error rate reaches T_a; robustness bound is vacuous")
    r_lo = residual(e_B_c)
    if r_lo <= 0:
        return tail_at(e_B_c)
    E = optimize.brentq(residual, e_B_c, T_a, xtol=1e-15, rtol=1e-13, maxiter=500)
    return tail_at(E)


@dataclass
class SecurityReport:
    """Every bound and intermediate for one operating point.

    ``eps_sec`` is exactly the sum of the components for the source:
    two-photon ``eps_forge + eps_repud + eps_sample_forge + eps_sample_repud``,
    decoy ``eps_forge + eps_repud + eps_sample_repud + eps_decoy``.
    """

    source: str
    eps_forge: float
    eps_repud: float
    eps_sample_forge: float
    eps_sample_repud: float
    eps_decoy: float
    eps_rob: float
    repudiation_root: float
    forgery_mismatch: float
    gap: float
    forge_deviation: float
    gap_deviation: float
    bit_error: float = float("nan")
    effective_threshold: float = float("nan")
    N: float = float("nan")
    M: float = float("nan")
    M_u: float = float("nan")
    eps_sec: float = field(init=False)

    def __post_init__(self):
        self.eps_sec = _sum_components(
            Source(self.source),
            self.eps_forge,
            self.eps_repud,
            self.eps_sample_forge,
            self.eps_sample_repud,
            self.eps_decoy,
        )

    def to_record(self) -> dict:
        return asdict(self)

    def format_record(self) -> str:
        """Flat ``key = value`` text, one field per line."""
        lines = []
        for key, value in self.to_record().items():
            lines.append(f"{key} = {_fmt(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def csv_header(cls) -> str:
        return ",".join(_REPORT_FIELDS)

    def csv_row(self) -> str:
        rec = self.to_record()
        return ",".join(_fmt(rec[k]) for k in _REPORT_FIELDS)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _sum_components(source: Source, forge, repud, sample_forge, sample_repud, decoy) -> float:
    if source is Source.TWO_PHOTON:
        return forge + repud + sample_forge + sample_repud
    return forge + repud + sample_repud + decoy


def compose_security(source: Source, **components) -> SecurityReport:
    """Build a :class:`SecurityReport`; decoy sources ignore ``eps_sample_forge``."""
    if source.is_decoy:
        components["eps_sample_forge"] = 0.0
    else:
        components.setdefault("eps_decoy", 0.0)
    return SecurityReport(source=source.value, **components)


_REPORT_FIELDS = [
    "source",
    "N",
    "M",
    "M_u",
    "eps_forge",
    "eps_repud",
    "eps_sample_forge",
    "eps_sample_repud",
    "eps_decoy",
    "eps_sec",
    "eps_rob",
    "repudiation_root",
    "forgery_mismatch",
    "bit_error",
    "effective_threshold",
    "gap",
    "forge_deviation",
    "gap_deviation",
]
