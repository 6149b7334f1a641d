"""
Command-line entry point.

Subcommands: ``bounds``, ``rate-curve``, ``simulate``, ``decoy`` and
``reproduce-fig2``. Exit codes: 0 ok, 1 a reference check failed,
2 configuration error, 3 infeasible parameters.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

from .bounds import SecurityReport, Source
from .config import PRESET_NAMES, ConfigError, RunConfig, load_config, with_overrides
from .decoy import (
    Observation,
    estimate_two_photon_paired,
    estimate_two_photon_shared,
)
from .engine import (
    Adversary,
    empirical_bound_check,
    saturating_repudiation,
    simulate_repetition,
    substitution_rates,
)
from .entropy import EncodingVariant, min_forgery_mismatch
from .errors import EstimateInvalidError, InfeasibleError, QDSError
from .optimizer import (
    evaluate_at_n,
    log_rate_csv,
    min_pulses,
    sweep,
    sweep_csv,
    transferability_bounds,
)

EXIT_OK = 0
EXIT_GOLDEN = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="configuration file (overrides the preset)")
    p.add_argument("--preset", choices=PRESET_NAMES, help="named parameter block")
    p.add_argument("--seed", type=int, help="master random seed (unsigned 64-bit)")
    p.add_argument("--out", metavar="PATH", help="write the main output here instead of stdout")
    p.add_argument("--distance-km", type=float, help="total recipient-to-recipient distance")
    p.add_argument("--pulses", type=int, help="pulses N per signed bit")
    p.add_argument("--workers", type=int, help="worker threads (default: $QDSLAB_WORKERS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qdslab", description="Three-party quantum digital signature toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bounds", help="security report at one distance and pulse count")
    _common(p)
    p.add_argument("--csv", action="store_true", help="emit a CSV header and row instead of key = value")

    p = sub.add_parser("rate-curve", help="minimal pulse count and signature rate versus distance")
    _common(p)
    p.add_argument("--l-min", type=float, help="first distance (km)")
    p.add_argument("--l-max", type=float, help="last distance (km)")
    p.add_argument("--step", type=float, help="distance step (km)")
    p.add_argument("--log-out", metavar="PATH", help="companion CSV of log10(R) for plotting")

    p = sub.add_parser("simulate", help="Monte Carlo frequencies against the analytic bounds")
    _common(p)
    p.add_argument("--repetitions", type=int, help="protocol repetitions")
    p.add_argument("--dump", metavar="PATH", help="write the first repetition's records as CSV")

    p = sub.add_parser("decoy", help="two-photon bounds from observed gains")
    _common(p)
    p.add_argument("--input", metavar="PATH", required=True,
                   help="CSV with intensity,gain,qber,pulses (shared) or gamma,chi,gain,qber,pulses (paired)")

    p = sub.add_parser("reproduce-fig2", help="compare headline numbers with the reference values")
    _common(p)
    return parser


def _workers(args) -> int:
    if args.workers is not None:
        w = args.workers
    else:
        env = os.environ.get("QDSLAB_WORKERS", "1")
        try:
            w = int(env)
        except ValueError:
            raise ConfigError(f"QDSLAB_WORKERS must be an integer, got {env!r}") from None
    if w < 1:
        raise ConfigError(f"workers must be at least 1, got {w}")
    return w


def _load(args) -> RunConfig:
    cfg = load_config(args.preset, args.config)
    return with_overrides(
        cfg,
        seed=args.seed,
        distance_km=args.distance_km,
        pulses=args.pulses,
        repetitions=getattr(args, "repetitions", None),
    )


def _emit(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror}") from None


def cmd_bounds(args) -> int:
    cfg = _load(args)
    report = evaluate_at_n(cfg.run.pulses, cfg.run.distance_km, cfg.protocol, cfg.channel)
    if args.csv:
        text = SecurityReport.csv_header() + "\n" + report.csv_row() + "\n"
    else:
        text = f"distance_km = {cfg.run.distance_km:.12g}\n" + report.format_record()
    _emit(text, args.out)
    return EXIT_OK


def cmd_rate_curve(args) -> int:
    cfg = _load(args)
    sw = cfg.sweep
    try:
        sw = replace(
            sw,
            L_min=sw.L_min if args.l_min is None else args.l_min,
            L_max=sw.L_max if args.l_max is None else args.l_max,
            step=sw.step if args.step is None else args.step,
        )
    except ValueError as exc:
        raise ConfigError(f"invalid sweep range: {exc}") from None
    points = sweep(sw.L_min, sw.L_max, sw.step, cfg.protocol, cfg.channel, cfg.target, _workers(args))
    _emit(sweep_csv(points), args.out)
    if args.log_out:
        _emit(log_rate_csv(points), args.log_out)
    return EXIT_OK


def _adversary(cfg: RunConfig, ch) -> Adversary:
    run = cfg.run
    if run.adversary == "honest":
        return Adversary.honest()
    if run.adversary == "forger":
        return Adversary.forger(run.flip_fraction)
    if run.adversary == "repudiation":
        return Adversary.repudiation(run.target_P_B, run.target_P_C)
    return saturating_repudiation(cfg.protocol, ch, run.pulses)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    ch = cfg.channel.symmetric(cfg.run.distance_km)
    try:
        adversary = _adversary(cfg, ch)
        substitution_rates(cfg.protocol, ch, adversary)
    except ValueError as exc:
        if isinstance(exc, InfeasibleError):
            raise
        raise ConfigError(f"invalid adversary settings: {exc}") from None
    workers = _workers(args)
    report = empirical_bound_check(
        adversary, cfg.run.repetitions, cfg.protocol, ch, cfg.run.pulses, cfg.run.seed, workers
    )
    lines = [f"distance_km = {cfg.run.distance_km:.12g}", f"seed = {cfg.run.seed}"]
    text = "\n".join(lines) + "\n" + report.format_record()
    args_n = (cfg.run.pulses, cfg.run.distance_km, cfg.protocol, cfg.channel)
    try:
        tb = transferability_bounds(*args_n)
    except (InfeasibleError, EstimateInvalidError) as exc:
        text += f"analytic = infeasible ({exc})\n"
    else:
        text += f"analytic.eps_repud = {tb.eps_repud:.12g}\nanalytic.eps_rob = {tb.eps_rob:.12g}\n"
        try:
            text += f"analytic.eps_forge = {evaluate_at_n(*args_n).eps_forge:.12g}\n"
        except (InfeasibleError, EstimateInvalidError) as exc:
            text += f"analytic.eps_forge = undefined ({exc})\n"
    _emit(text, args.out)
    if args.dump:
        rep = simulate_repetition(cfg.protocol, ch, cfg.run.pulses, adversary, cfg.run.seed, 0, workers)
        _emit(rep.records.to_csv(), args.dump)
    return EXIT_OK


def read_observations(path: str, source: Source):
    """Parse a decoy observation CSV into the estimator's input mapping."""
    shared_cols = ["intensity", "gain", "qber", "pulses"]
    paired_cols = ["gamma", "chi", "gain", "qber", "pulses"]
    want = shared_cols if source is Source.SHARED_DECOY else paired_cols
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    if not rows or [c.strip() for c in rows[0]] != want:
        raise ConfigError(f"{path}:1: header must be {','.join(want)}")
    obs = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(want):
            raise ConfigError(f"{path}:{lineno}: expected {len(want)} columns, got {len(row)}")
        try:
            vals = [float(c) for c in row]
            key = vals[0] if source is Source.SHARED_DECOY else (vals[0], vals[1])
            obs[key] = Observation(gain=vals[-3], qber=vals[-2], pulses=vals[-1])
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return obs


def _match_settings(obs, cfg_decoy, path):
    """Re-key observations onto the configured settings (tolerant float matching)."""
    out = {}
    for key, _ in cfg_decoy.settings():
        ks = key if isinstance(key, tuple) else (key,)
        for okey, o in obs.items():
            oks = okey if isinstance(okey, tuple) else (okey,)
            if all(math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12) for a, b in zip(ks, oks)):
                out[key] = o
                break
        else:
            raise ConfigError(f"{path}: no row for configured setting {key!r}")
    return out


def cmd_decoy(args) -> int:
    cfg = _load(args)
    p = cfg.protocol
    if not p.source.is_decoy:
        raise ConfigError("decoy needs protocol.source = shared-decoy or paired-decoy")
    obs = _match_settings(read_observations(args.input, p.source), p.decoy, args.input)
    if p.source is Source.SHARED_DECOY:
        est = estimate_two_photon_shared(obs, p.shared, p.n_alpha)
    else:
        est = estimate_two_photon_paired(obs, p.paired, p.n_alpha)
    text = (
        f"source = {p.source.value}\n"
        f"Y_lower = {est.Y_lower:.12g}\n"
        f"e_upper = {est.e_upper:.12g}\n"
        f"e_upper_raw = {est.e_upper_raw:.12g}\n"
        f"Q_lower = {est.Q_lower:.12g}\n"
        f"failure_terms = {est.failure_terms}\n"
        f"usable = {'true' if est.usable else 'false'}\n"
    )
    _emit(text, args.out)
    return EXIT_OK


@dataclass(frozen=True)
class GoldenRow:
    label: str
    reference: float
    computed: float
    tolerance: float
    relative: bool

    @property
    def deviation(self) -> float:
        d = self.computed - self.reference
        return d / self.reference if self.relative else d

    @property
    def passed(self) -> bool:
        return math.isfinite(self.computed) and abs(self.deviation) <= self.tolerance


def golden_rows() -> List[GoldenRow]:
    """Reference headline numbers next to freshly computed ones, with tolerances."""
    six, four = EncodingVariant.SIX_STATE_TWO_PHOTON, EncodingVariant.FOUR_STATE_TWO_PHOTON
    rows = [
        GoldenRow("S_c six-state e_b=0.01", 0.074564, min_forgery_mismatch(0.01, six), 1e-4, False),
        GoldenRow("S_c four-state e_b=0.01", 0.045035, min_forgery_mismatch(0.01, four), 1e-4, False),
        GoldenRow("S_c six-state e_b=0", 0.079135, min_forgery_mismatch(0.0, six), 1e-4, False),
    ]
    cases = [
        ("bps two-photon six-state 100 km", "fig2-sixstate-twophoton", 294.0, 0.25),
        ("bps shared-decoy six-state 100 km", "fig2-sixstate-shared-decoy", 0.78, 0.35),
        ("bps paired-decoy six-state 100 km", "fig2-sixstate-paired-decoy", 1.12, 0.35),
    ]
    for label, preset, reference, tol in cases:
        cfg = load_config(preset)
        try:
            point = min_pulses(100.0, cfg.protocol, cfg.channel, cfg.target)
            bps = point.bps
        except InfeasibleError:
            bps = float("nan")
        rows.append(GoldenRow(label, reference, bps, tol, True))
    return rows


def _breakdown(preset: str) -> str:
    cfg = load_config(preset)
    try:
        point = min_pulses(100.0, cfg.protocol, cfg.channel, cfg.target)
    except InfeasibleError as exc:
        return f"  {preset}: infeasible ({exc})\n"
    r = point.report
    return (
        f"  {preset}: N_min={point.N_min} eps_forge={r.eps_forge:.3e} eps_repud={r.eps_repud:.3e} "
        f"eps_sample={r.eps_sample_forge + r.eps_sample_repud:.3e} eps_decoy={r.eps_decoy:.3e} "
        f"eps_sec={r.eps_sec:.3e} eps_rob={r.eps_rob:.3e}\n"
    )


def cmd_reproduce(args) -> int:
    t0 = time.perf_counter()
    rows = golden_rows()
    out = [f"{'check':36s} {'reference':>12s} {'computed':>14s} {'deviation':>11s} {'tol':>8s} verdict"]
    for r in rows:
        dev = f"{100 * r.deviation:+.2f}%" if r.relative else f"{r.deviation:+.2e}"
        tol = f"{100 * r.tolerance:.0f}%" if r.relative else f"{r.tolerance:.0e}"
        out.append(
            f"{r.label:36s} {r.reference:12.6g} {r.computed:14.8g} {dev:>11s} {tol:>8s} "
            f"{'PASS' if r.passed else 'FAIL'}"
        )
    text = "\n".join(out) + "\n\nsecurity budget at the minimal N:\n"
    for preset in ("fig2-sixstate-twophoton", "fig2-sixstate-shared-decoy", "fig2-sixstate-paired-decoy"):
        text += _breakdown(preset)
    text += f"\nelapsed = {time.perf_counter() - t0:.2f} s\n"
    _emit(text, args.out)
    return EXIT_OK if all(r.passed for r in rows) else EXIT_GOLDEN


COMMANDS = {
    "bounds": cmd_bounds,
    "rate-curve": cmd_rate_curve,
    "simulate": cmd_simulate,
    "decoy": cmd_decoy,
    "reproduce-fig2": cmd_reproduce,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleError, EstimateInvalidError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except QDSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
