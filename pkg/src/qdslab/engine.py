"""
Monte Carlo simulation of distribution, estimation and messaging.

Polarizations are integer codes with ``basis = code // 2`` and the
orthogonal state at ``code ^ 1``, so Born-rule sampling and the
orthogonality rule reduce to integer arithmetic on numpy arrays.

Randomness comes from counter-based Philox streams keyed by
``(seed, repetition, block)``. Pulses are generated in fixed-size blocks,
so the record stream does not depend on how blocks are spread over
worker threads.
"""
from __future__ import annotations

import enum
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .bounds import Source, Thresholds
from .channel import ChannelParams, GainTable, dark_yield
from .entropy import EncodingVariant
from .errors import EstimateInvalidError, QDSError

BLOCK_SIZE = 1 << 14
_ESTIMATION_TAG = 1 << 40
_MESSAGING_TAG = (1 << 40) + 1

NO_CLICK = -1
INCONCLUSIVE = -1


class Polarization(enum.IntEnum):
    H = 0
    V = 1
    PLUS = 2
    MINUS = 3
    R = 4
    L = 5

    @property
    def basis(self) -> "MeasurementBasis":
        return MeasurementBasis(self.value // 2)

    @property
    def orthogonal(self) -> "Polarization":
        return Polarization(self.value ^ 1)


class MeasurementBasis(enum.IntEnum):
    Z = 0
    X = 1
    Y = 2


_P = Polarization
_SIX_STATE_SETS = (
    (_P.H, _P.PLUS), (_P.PLUS, _P.V), (_P.V, _P.MINUS), (_P.MINUS, _P.H),
    (_P.H, _P.R), (_P.R, _P.V), (_P.V, _P.L), (_P.L, _P.H),
    (_P.PLUS, _P.R), (_P.R, _P.MINUS), (_P.MINUS, _P.L), (_P.L, _P.PLUS),
)


@dataclass(frozen=True)
class StateSet:
    """Two non-orthogonal states; ``first`` encodes 0 and ``second`` encodes 1."""

    first: Polarization
    second: Polarization
    index: int

    def __post_init__(self):
        if self.first.basis == self.second.basis:
            raise ValueError(f"states {self.first.name}, {self.second.name} are not non-orthogonal")


def state_sets(variant: EncodingVariant) -> Tuple[StateSet, ...]:
    """Twelve sets for six-state encodings, the first four for four-state."""
    pairs = _SIX_STATE_SETS[:4] if variant.n_states == 4 else _SIX_STATE_SETS
    return tuple(StateSet(a, b, i) for i, (a, b) in enumerate(pairs))


def n_bases(variant: EncodingVariant) -> int:
    return 2 if variant.n_states == 4 else 3


def conclusive_decision(s: StateSet, basis: MeasurementBasis, outcome: Polarization) -> Optional[int]:
    """
    Bit inferred from an outcome, or ``None`` when inconclusive.

    An outcome orthogonal to one state of the set rules that state out.

    Examples
    --------
    >>> s = StateSet(Polarization.H, Polarization.PLUS, 0)
    >>> conclusive_decision(s, MeasurementBasis.X, Polarization.MINUS)
    0
    >>> conclusive_decision(s, MeasurementBasis.Y, Polarization.R) is None
    True
    """
    if outcome.basis != basis:
        raise ValueError(f"outcome {outcome.name} is not an eigenstate of basis {basis.name}")
    if outcome == s.first.orthogonal:
        return 1
    if outcome == s.second.orthogonal:
        return 0
    return None


def measure(state: Polarization, basis: MeasurementBasis, e_d: float, rng: np.random.Generator) -> Polarization:
    """Born-rule outcome in ``basis``, flipped to the orthogonal eigenstate with probability ``e_d``."""
    if not 0.0 <= e_d <= 1.0:
        raise ValueError(f"e_d must lie in [0, 1], got {e_d}")
    out = measure_many(
        np.array([int(state)]), np.array([int(basis)]), rng.random(1), rng.random(1) < e_d
    )
    return Polarization(int(out[0]))


def measure_many(states, bases, u, flip):
    """
    Vectorised :func:`measure` on polarization codes.

    ``u`` holds uniform draws that pick the outcome when the state is not an
    eigenstate of the basis; ``flip`` marks misalignment flips.
    """
    same = states // 2 == bases
    out = np.where(same, states, 2 * bases + (u < 0.5))
    return out ^ flip.astype(out.dtype)


def _conclusive_codes(firsts, seconds, outcomes):
    res = np.full(outcomes.shape, INCONCLUSIVE, dtype=np.int8)
    res[outcomes == (firsts ^ 1)] = 1
    res[outcomes == (seconds ^ 1)] = 0
    res[outcomes == NO_CLICK] = INCONCLUSIVE
    return res


class AdversaryKind(enum.Enum):
    HONEST = "honest"
    REPUDIATION = "repudiation"
    FORGER = "forger"


@dataclass(frozen=True)
class Adversary:
    """
    Who deviates from the protocol, and how.

    ``target_P_B`` / ``target_P_C`` are the expected conclusive mismatches
    per kept untested pulse that a repudiating signer aims for.
    ``flip_fraction`` is the share of forwarded bits a naive forger flips.
    """

    kind: AdversaryKind = AdversaryKind.HONEST
    target_P_B: float = 0.0
    target_P_C: float = 0.0
    flip_fraction: float = 0.0

    def __post_init__(self):
        for name in ("target_P_B", "target_P_C", "flip_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @classmethod
    def honest(cls) -> "Adversary":
        return cls()

    @classmethod
    def repudiation(cls, target_P_B: float, target_P_C: float) -> "Adversary":
        return cls(AdversaryKind.REPUDIATION, target_P_B=target_P_B, target_P_C=target_P_C)

    @classmethod
    def forger(cls, flip_fraction: float) -> "Adversary":
        return cls(AdversaryKind.FORGER, flip_fraction=flip_fraction)


def _substitution_rate(target: float, P_c: float, e_c: float) -> float:
    """Probability of sending the other state of the set so that P_c * mismatch hits ``target``."""
    if P_c <= 0:
        raise ValueError("conclusive probability must be positive")
    want = target / P_c
    if not e_c <= want <= 1.0 - e_c:
        raise ValueError(
            f"target mismatch rate {want:.6g} is outside the reachable range "
            f"[{e_c:.6g}, {1 - e_c:.6g}]"
        )
    return (want - e_c) / (1.0 - 2.0 * e_c)


@dataclass
class TrialRecords:
    """Columnar kept-pulse records; one array per field, all the same length.

    Outcome codes are polarization integers or -1 for no click; conclusive
    columns hold the inferred bit or -1. ``role`` is 1 for test, 0 for
    untested and -1 before estimation. ``setting`` indexes the decoy setting
    (always 0 for the two-photon source).
    """

    pulse_index: np.ndarray
    set_index: np.ndarray
    sent_bit: np.ndarray
    setting: np.ndarray
    bob_outcome: np.ndarray
    charlie_outcome: np.ndarray
    bob_basis: np.ndarray
    charlie_basis: np.ndarray
    bob_conclusive: np.ndarray
    charlie_conclusive: np.ndarray
    role: np.ndarray
    n_sent: int = 0

    def __len__(self) -> int:
        return int(self.pulse_index.shape[0])

    def _arrays(self):
        return [f.name for f in fields(self) if f.name != "n_sent"]

    def select(self, mask: np.ndarray) -> "TrialRecords":
        return TrialRecords(**{k: getattr(self, k)[mask] for k in self._arrays()}, n_sent=self.n_sent)

    def with_role(self, role: np.ndarray) -> "TrialRecords":
        kw = {k: getattr(self, k) for k in self._arrays()}
        kw["role"] = role
        return TrialRecords(**kw, n_sent=self.n_sent)

    @classmethod
    def concat(cls, parts: Sequence["TrialRecords"], n_sent: int) -> "TrialRecords":
        names = [f.name for f in fields(cls) if f.name != "n_sent"]
        return cls(**{k: np.concatenate([getattr(p, k) for p in parts]) for k in names}, n_sent=n_sent)

    def to_csv(self) -> str:
        """Record dump with a fixed header; bases as letters, empty cells for inconclusive."""
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        letters = np.array([b.name for b in MeasurementBasis])
        roles = {1: "test", 0: "untested", -1: ""}

        def bit(v):
            return "" if v < 0 else str(int(v))

        for i in range(len(self)):
            buf.write(
                f"{self.pulse_index[i]},{self.set_index[i]},{self.sent_bit[i]},"
                f"{int(self.bob_outcome[i] >= 0)},{int(self.charlie_outcome[i] >= 0)},"
                f"{letters[self.bob_basis[i]]},{letters[self.charlie_basis[i]]},"
                f"{bit(self.bob_conclusive[i])},{bit(self.charlie_conclusive[i])},"
                f"{roles[int(self.role[i])]}\n"
            )
        return buf.getvalue()


CSV_COLUMNS = [
    "pulse_index", "set_index", "sent_bit", "bob_click", "charlie_click",
    "bob_basis", "charlie_basis", "bob_conclusive", "charlie_conclusive", "role",
]


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def _source_settings(cfg) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(probability, mean photons to Bob, mean photons to Charlie) per setting."""
    if cfg.source is Source.TWO_PHOTON:
        return np.array([1.0]), np.array([np.nan]), np.array([np.nan])
    if cfg.source is Source.SHARED_DECOY:
        st = cfg.shared.settings()
        lam = np.array([s[0] for s in st]) / 2.0
        return np.array([s[1] for s in st]), lam, lam
    st = cfg.paired.settings()
    return (
        np.array([s[1] for s in st]),
        np.array([s[0][0] for s in st]),
        np.array([s[0][1] for s in st]),
    )


def _signal_gains_at(cfg, ch: ChannelParams) -> GainTable:
    from .channel import paired_decoy_gains, shared_decoy_gains, two_photon_gains

    if cfg.source is Source.TWO_PHOTON:
        return two_photon_gains(ch, cfg.z)
    if cfg.source is Source.SHARED_DECOY:
        return shared_decoy_gains(cfg.shared.mu, ch, cfg.z)
    return paired_decoy_gains(cfg.paired.mu1, cfg.paired.mu1, ch, cfg.z)


def substitution_rates(cfg, ch: ChannelParams, adversary: Adversary) -> Tuple[float, float]:
    """Per-pulse probabilities that the signer swaps the state sent to Bob / Charlie."""
    if adversary.kind is not AdversaryKind.REPUDIATION:
        return 0.0, 0.0
    g = _signal_gains_at(cfg, ch)
    return (
        _substitution_rate(adversary.target_P_B, g.P_B_c, g.e_B_c),
        _substitution_rate(adversary.target_P_C, g.P_C_c, g.e_C_c),
    )


def _block(cfg, ch: ChannelParams, n: int, start: int, rng, flips, sets_arr) -> TrialRecords:
    probs, lam_B, lam_C = _source_settings(cfg)
    Y0 = dark_yield(ch.p_d)
    nb = n_bases(cfg.variant)

    set_idx = rng.integers(len(sets_arr), size=n)
    bit = rng.integers(2, size=n)
    setting = rng.choice(len(probs), size=n, p=probs) if len(probs) > 1 else np.zeros(n, dtype=np.int64)

    outcomes, bases_out, conclusive = [], [], []
    for arm, (eta, lam, flip_p) in enumerate(
        ((ch.eta_B, lam_B, flips[0]), (ch.eta_C, lam_C, flips[1]))
    ):
        swap = rng.random(n) < flip_p
        state = sets_arr[set_idx, bit ^ swap]
        if cfg.source is Source.TWO_PHOTON:
            signal = rng.random(n) < eta
        else:
            photons = rng.poisson(lam[setting])
            signal = rng.binomial(photons, eta) > 0
        dark = rng.random(n) < Y0
        basis = rng.integers(nb, size=n)
        sig_out = measure_many(state, basis, rng.random(n), rng.random(n) < ch.e_d)
        dark_out = 2 * basis + (rng.random(n) < 0.5)
        take_dark = dark & (~signal | (rng.random(n) < 0.5))
        out = np.where(take_dark, dark_out, sig_out)
        out = np.where(signal | dark, out, NO_CLICK)
        outcomes.append(out)
        bases_out.append(basis)
        conclusive.append(_conclusive_codes(sets_arr[set_idx, 0], sets_arr[set_idx, 1], out))

    kept = (outcomes[0] != NO_CLICK) & (outcomes[1] != NO_CLICK)
    idx = np.arange(start, start + n, dtype=np.int64)
    return TrialRecords(
        pulse_index=idx[kept],
        set_index=set_idx[kept].astype(np.int16),
        sent_bit=bit[kept].astype(np.int8),
        setting=setting[kept].astype(np.int8),
        bob_outcome=outcomes[0][kept].astype(np.int8),
        charlie_outcome=outcomes[1][kept].astype(np.int8),
        bob_basis=bases_out[0][kept].astype(np.int8),
        charlie_basis=bases_out[1][kept].astype(np.int8),
        bob_conclusive=conclusive[0][kept],
        charlie_conclusive=conclusive[1][kept],
        role=np.full(int(kept.sum()), -1, dtype=np.int8),
    )


def run_distribution(
    cfg,
    channel: ChannelParams,
    n_pulses: int,
    adversary: Adversary = Adversary(),
    seed: int = 0,
    repetition: int = 0,
    workers: int = 1,
) -> TrialRecords:
    """
    Simulate ``n_pulses`` two-copy transmissions and keep double clicks.

    Parameters
    ----------
    cfg : ProtocolConfig
        Source, encoding and decoy settings.
    channel : ChannelParams
        Link parameters; the per-arm lengths are used as given.
    adversary : Adversary
        A repudiating signer swaps the state sent to each recipient for
        the other state of the set, independently per pulse.
    seed, repetition : int
        Keys of the random stream.
    workers : int
        Threads generating blocks; the output does not depend on it.
    """
    if n_pulses < 0:
        raise ValueError(f"n_pulses must be non-negative, got {n_pulses}")
    if workers < 1:
        raise ValueError(f"workers must be at least 1, got {workers}")
    flips = substitution_rates(cfg, channel, adversary)
    sets_arr = np.array([[int(s.first), int(s.second)] for s in state_sets(cfg.variant)], dtype=np.int64)
    starts = list(range(0, n_pulses, BLOCK_SIZE))

    def one(b: int) -> TrialRecords:
        start = starts[b]
        n = min(BLOCK_SIZE, n_pulses - start)
        return _block(cfg, channel, n, start, _stream(seed, repetition, b), flips, sets_arr)

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(len(starts))))
    else:
        parts = [one(b) for b in range(len(starts))]
    if not parts:
        parts = [_block(cfg, channel, 0, 0, _stream(seed, repetition, 0), flips, sets_arr)]
    return TrialRecords.concat(parts, n_pulses)


@dataclass(frozen=True)
class EstimationOutcome:
    records: TrialRecords
    M_t: int
    M_u: int
    P_B_c: float
    P_C_c: float
    e_B_c: float
    e_C_c: float
    degenerate: bool


def _rate(num: int, den: int) -> float:
    return num / den if den > 0 else 0.0


def run_estimation(records: TrialRecords, beta: float, rng: np.random.Generator) -> EstimationOutcome:
    """
    Mark ``ceil(beta * M)`` random records as test and estimate from them.

    ``degenerate`` is set when either recipient has no conclusive test bit.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    M = len(records)
    if M == 0:
        raise EstimateInvalidError("no kept records to estimate from")
    M_t = min(M, math.ceil(beta * M - 1e-9))
    role = np.zeros(M, dtype=np.int8)
    role[rng.choice(M, size=M_t, replace=False)] = 1
    recs = records.with_role(role)
    test = role == 1
    bc, cc = recs.bob_conclusive[test], recs.charlie_conclusive[test]
    sent = recs.sent_bit[test]
    nb, nc = int((bc >= 0).sum()), int((cc >= 0).sum())
    eb = int(((bc >= 0) & (bc != sent)).sum())
    ec = int(((cc >= 0) & (cc != sent)).sum())
    return EstimationOutcome(
        records=recs,
        M_t=M_t,
        M_u=M - M_t,
        P_B_c=_rate(nb, M_t),
        P_C_c=_rate(nc, M_t),
        e_B_c=_rate(eb, nb),
        e_C_c=_rate(ec, nc),
        degenerate=(nb == 0 or nc == 0),
    )


@dataclass(frozen=True)
class MessagingOutcome:
    bob_accepts: bool
    charlie_accepts: bool
    E_B_c: float
    E_C_c: float


def run_messaging(
    records: TrialRecords,
    th: Thresholds,
    forger: Adversary = Adversary(),
    rng: Optional[np.random.Generator] = None,
) -> MessagingOutcome:
    """
    Check the signer's announced bits against each recipient's untested bits.

    Inconclusive positions count as matches. Bob accepts when his
    conclusive mismatch rate is at most ``T_a``; Charlie then checks the
    string Bob forwards against ``T_v``. A forger flips a uniformly chosen
    ``round(flip_fraction * M_u)`` of the forwarded bits.
    """
    untested = records.role == 0
    M_u = int(untested.sum())
    if M_u == 0:
        raise EstimateInvalidError("no untested records left for messaging")
    announced = records.sent_bit[untested]
    bc, cc = records.bob_conclusive[untested], records.charlie_conclusive[untested]
    nb, nc = int((bc >= 0).sum()), int((cc >= 0).sum())
    E_B = _rate(int(((bc >= 0) & (bc != announced)).sum()), nb)

    forwarded = announced.copy()
    if forger.kind is AdversaryKind.FORGER and forger.flip_fraction > 0:
        if rng is None:
            raise ValueError("a forger needs a random generator")
        k = int(round(forger.flip_fraction * M_u))
        forwarded[rng.choice(M_u, size=k, replace=False)] ^= 1
    E_C = _rate(int(((cc >= 0) & (cc != forwarded)).sum()), nc)
    return MessagingOutcome(E_B <= th.T_a, E_C <= th.T_v, E_B, E_C)


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError(f"need 0 <= successes <= trials and trials >= 1, got {successes}/{trials}")
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    p = successes / trials
    den = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class Frequency:
    count: int
    trials: int
    low: float
    high: float

    @property
    def value(self) -> float:
        return self.count / self.trials

    @classmethod
    def of(cls, count: int, trials: int) -> "Frequency":
        lo, hi = wilson_interval(count, trials)
        return cls(count, trials, lo, hi)


@dataclass(frozen=True)
class BoundCheckReport:
    """Empirical event frequencies over independent protocol repetitions.

    ``bob_accept_charlie_reject`` is the repudiation event, ``charlie_accept``
    the forgery event, ``bob_reject`` the honest-abort event. Repetitions
    that could not run (no kept pulses or an empty test or untested part)
    are counted in ``skipped`` and excluded from the trials.
    """

    adversary: str
    repetitions: int
    n_pulses: int
    bob_accept_charlie_reject: Frequency
    charlie_accept: Frequency
    bob_reject: Frequency
    skipped: int
    mean_kept: float

    def format_record(self) -> str:
        lines = [
            f"adversary = {self.adversary}",
            f"repetitions = {self.repetitions}",
            f"pulses = {self.n_pulses}",
            f"skipped = {self.skipped}",
            f"mean_kept = {self.mean_kept:.12g}",
        ]
        for name in ("bob_accept_charlie_reject", "charlie_accept", "bob_reject"):
            f = getattr(self, name)
            lines.append(f"{name}.count = {f.count}")
            lines.append(f"{name}.frequency = {f.value:.12g}")
            lines.append(f"{name}.wilson95_low = {f.low:.12g}")
            lines.append(f"{name}.wilson95_high = {f.high:.12g}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RepetitionResult:
    """One full protocol run; ``messaging`` is None when it could not run."""

    records: TrialRecords
    estimation: Optional[EstimationOutcome]
    messaging: Optional[MessagingOutcome]


def simulate_repetition(
    cfg, channel: ChannelParams, n_pulses: int, adversary: Adversary = Adversary(),
    seed: int = 0, repetition: int = 0, workers: int = 1,
) -> RepetitionResult:
    """Distribution, estimation and messaging for one signed bit.

    Decoy sources keep only signal-setting records for the later stages.
    """
    recs = run_distribution(cfg, channel, n_pulses, adversary, seed, repetition, workers)
    if cfg.source is not Source.TWO_PHOTON:
        recs = recs.select(recs.setting == 0)
    try:
        est = run_estimation(recs, cfg.beta, _stream(seed, repetition, _ESTIMATION_TAG))
    except QDSError:
        return RepetitionResult(recs, None, None)
    try:
        msg = run_messaging(
            est.records, cfg.thresholds, adversary, _stream(seed, repetition, _MESSAGING_TAG)
        )
    except QDSError:
        msg = None
    return RepetitionResult(est.records, est, msg)


def empirical_bound_check(
    adversary: Adversary,
    repetitions: int,
    cfg,
    channel: ChannelParams,
    n_pulses: int,
    seed: int = 0,
    workers: int = 1,
) -> BoundCheckReport:
    """Repeat the whole protocol and tally acceptance events with Wilson intervals."""
    if repetitions < 1:
        raise ValueError(f"repetitions must be at least 1, got {repetitions}")
    if workers < 1:
        raise ValueError(f"workers must be at least 1, got {workers}")

    def run(rep):
        res = simulate_repetition(cfg, channel, n_pulses, adversary, seed, rep)
        return res.messaging, len(res.records)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(repetitions)))
    else:
        results = [run(r) for r in range(repetitions)]

    done = [m for m, _ in results if m is not None]
    trials = len(done)
    skipped = repetitions - trials
    if trials == 0:
        raise EstimateInvalidError("no repetition produced usable test and untested records")
    ba_cr = sum(m.bob_accepts and not m.charlie_accepts for m in done)
    ca = sum(m.charlie_accepts for m in done)
    br = sum(not m.bob_accepts for m in done)
    return BoundCheckReport(
        adversary=adversary.kind.value,
        repetitions=repetitions,
        n_pulses=n_pulses,
        bob_accept_charlie_reject=Frequency.of(ba_cr, trials),
        charlie_accept=Frequency.of(ca, trials),
        bob_reject=Frequency.of(br, trials),
        skipped=skipped,
        mean_kept=float(np.mean([k for _, k in results])),
    )


def saturating_repudiation(cfg, channel: ChannelParams, n_pulses: float) -> Adversary:
    """
    Individual repudiation attack at the analytic root.

    Bob's expected mismatch is set to the root ``A`` and Charlie's to
    ``P_C_c (A / P_B_c + gap)``, the largest the correlation test allows.
    """
    from . import bounds as B

    g = _signal_gains_at(cfg, channel)
    M = g.Q * n_pulses
    if cfg.source.is_decoy:
        M *= cfg.decoy.signal_probability
    counts = B.ProtocolCounts.from_kept(n_pulses, M, cfg.beta)
    gap, _ = B.correlation_gap(g.e_B_c, g.e_C_c, g.P_B_c, g.P_C_c, counts, cfg.eps_sample_repud)
    A = B.solve_repudiation_root(g.P_B_c, g.P_C_c, cfg.thresholds, gap)
    return Adversary.repudiation(A, g.P_C_c * (A / g.P_B_c + gap))
