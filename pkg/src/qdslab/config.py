"""
Run configuration: flat ``section.key = value`` text and named presets.

Lines are ``key = value``; ``#`` starts a comment; blank lines are
ignored. Unknown keys, duplicate keys and unparsable values are rejected
with the offending line number. Serialisation writes every field with
``repr`` floats, so parsing it back gives the same configuration.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, fields, replace
from importlib import resources
from typing import Dict, List, Optional, Tuple

from .bounds import RobustnessMode, Source, Thresholds
from .channel import ChannelParams
from .decoy import PairedDecoyConfig, SharedDecoyConfig
from .entropy import EncodingVariant
from .errors import QDSError
from .optimizer import ProtocolConfig, RateTarget


class ConfigError(QDSError, ValueError):
    """Malformed or inconsistent configuration."""


ADVERSARIES = ("honest", "forger", "repudiation", "saturating-repudiation")


@dataclass(frozen=True)
class RunSettings:
    """Per-invocation settings for the bounds and simulate commands."""

    distance_km: float = 100.0
    pulses: int = 10_000_000
    seed: int = 0
    repetitions: int = 100
    adversary: str = "honest"
    flip_fraction: float = 0.0
    target_P_B: float = 0.0
    target_P_C: float = 0.0

    def __post_init__(self):
        if self.distance_km < 0:
            raise ValueError(f"distance_km must be non-negative, got {self.distance_km}")
        if self.pulses < 1 or self.repetitions < 1:
            raise ValueError("pulses and repetitions must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.adversary not in ADVERSARIES:
            raise ValueError(f"adversary must be one of {ADVERSARIES}, got {self.adversary!r}")


@dataclass(frozen=True)
class SweepSettings:
    L_min: float = 0.0
    L_max: float = 200.0
    step: float = 10.0

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if not 0 <= self.L_min <= self.L_max:
            raise ValueError(f"need 0 <= L_min <= L_max, got {self.L_min}, {self.L_max}")


@dataclass(frozen=True)
class RunConfig:
    channel: ChannelParams = ChannelParams()
    protocol: ProtocolConfig = ProtocolConfig()
    target: RateTarget = RateTarget()
    run: RunSettings = RunSettings()
    sweep: SweepSettings = SweepSettings()


# protocol.* keys: flattened ProtocolConfig plus the two thresholds
_PROTOCOL_KEYS: Dict[str, object] = {
    "source": Source.TWO_PHOTON,
    "variant": EncodingVariant.SIX_STATE_TWO_PHOTON,
    "T_a": 0.015,
    "T_v": 0.0645,
    "beta": 0.3,
    "n_alpha": 4.753,
    "eps_sample_forge": 1e-10,
    "eps_sample_repud": 1e-10,
    "robustness": RobustnessMode.DIRECT,
}

_DATACLASS_SECTIONS = {
    "channel": (ChannelParams, ("alpha", "eta_d", "p_d", "e_d")),
    "shared": (SharedDecoyConfig, None),
    "paired": (PairedDecoyConfig, None),
    "target": (RateTarget, None),
    "run": (RunSettings, None),
    "sweep": (SweepSettings, None),
}


def _section_defaults(section: str) -> Dict[str, object]:
    if section == "protocol":
        return dict(_PROTOCOL_KEYS)
    cls, names = _DATACLASS_SECTIONS[section]
    inst = cls()
    return {f.name: getattr(inst, f.name) for f in fields(cls) if names is None or f.name in names}


SECTIONS = ("protocol", "channel", "shared", "paired", "target", "run", "sweep")


def _convert(raw: str, default):
    if isinstance(default, enum.Enum):
        return type(default)(raw)
    if isinstance(default, bool):
        if raw.lower() not in ("true", "false"):
            raise ValueError(f"expected true or false, got {raw!r}")
        return raw.lower() == "true"
    if isinstance(default, int):
        try:
            return int(raw)
        except ValueError:
            pass
        v = float(raw)
        if v != int(v):
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(v)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_entries(text: str, origin: str = "<config>") -> Dict[str, Tuple[object, int]]:
    """Parse text into ``{"section.key": (typed value, line)}``."""
    out: Dict[str, Tuple[object, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{origin}:{lineno}: expected 'section.key = value', got {body!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        section, _, name = key.partition(".")
        if section not in SECTIONS or not name:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        defaults = _section_defaults(section)
        if name not in defaults:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r} (first on line {out[key][1]})")
        try:
            out[key] = (_convert(raw, defaults[name]), lineno)
        except ValueError as exc:
            raise ConfigError(f"{origin}:{lineno}: bad value for {key!r}: {exc}") from None
    return out


def _build(section: str, entries: Dict[str, Tuple[object, int]], origin: str):
    values = _section_defaults(section)
    for key, (v, _) in entries.items():
        sec, _, name = key.partition(".")
        if sec == section:
            values[name] = v
    cls = _DATACLASS_SECTIONS[section][0]
    try:
        return cls(**values)
    except ValueError as exc:
        raise ConfigError(f"{origin}: invalid [{section}] settings: {exc}") from None


def build_config(entries: Dict[str, Tuple[object, int]], origin: str = "<config>") -> RunConfig:
    """Assemble and validate a :class:`RunConfig` from parsed entries."""
    proto = dict(_PROTOCOL_KEYS)
    for key, (v, _) in entries.items():
        sec, _, name = key.partition(".")
        if sec == "protocol":
            proto[name] = v
    source = proto["source"]
    for sec, needed in (("shared", Source.SHARED_DECOY), ("paired", Source.PAIRED_DECOY)):
        stray = [(k, ln) for k, (_, ln) in entries.items() if k.startswith(sec + ".")]
        if stray and source is not needed:
            k, ln = stray[0]
            raise ConfigError(f"{origin}:{ln}: {k!r} requires protocol.source = {needed.value}")
    try:
        thresholds = Thresholds(T_a=proto.pop("T_a"), T_v=proto.pop("T_v"))
        protocol = ProtocolConfig(
            thresholds=thresholds,
            shared=_build("shared", entries, origin) if source is Source.SHARED_DECOY else None,
            paired=_build("paired", entries, origin) if source is Source.PAIRED_DECOY else None,
            **proto,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{origin}: invalid [protocol] settings: {exc}") from None
    return RunConfig(
        channel=_build("channel", entries, origin),
        protocol=protocol,
        target=_build("target", entries, origin),
        run=_build("run", entries, origin),
        sweep=_build("sweep", entries, origin),
    )


def parse_config(text: str, origin: str = "<config>") -> RunConfig:
    return build_config(parse_entries(text, origin), origin)


def _fmt(v) -> str:
    if isinstance(v, enum.Enum):
        return str(v.value)
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _flatten(cfg: RunConfig) -> List[Tuple[str, object]]:
    p = cfg.protocol
    items: List[Tuple[str, object]] = []
    for name in _PROTOCOL_KEYS:
        v = getattr(p.thresholds, name) if name in ("T_a", "T_v") else getattr(p, name)
        items.append((f"protocol.{name}", v))
    for name in _section_defaults("channel"):
        items.append((f"channel.{name}", getattr(cfg.channel, name)))
    if p.shared is not None:
        items += [(f"shared.{f.name}", getattr(p.shared, f.name)) for f in fields(p.shared)]
    if p.paired is not None:
        items += [(f"paired.{f.name}", getattr(p.paired, f.name)) for f in fields(p.paired)]
    for sec in ("target", "run", "sweep"):
        obj = getattr(cfg, sec)
        items += [(f"{sec}.{f.name}", getattr(obj, f.name)) for f in fields(obj)]
    return items


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text for ``cfg``; ``parse_config`` reads it back unchanged."""
    lines = []
    last = None
    for key, v in _flatten(cfg):
        sec = key.split(".", 1)[0]
        if last is not None and sec != last:
            lines.append("")
        last = sec
        lines.append(f"{key} = {_fmt(v)}")
    return "\n".join(lines) + "\n"


PRESET_NAMES = (
    "fig2-sixstate-twophoton",
    "fig2-fourstate-twophoton",
    "fig2-sixstate-shared-decoy",
    "fig2-fourstate-shared-decoy",
    "fig2-sixstate-paired-decoy",
    "fig2-fourstate-paired-decoy",
)


def preset_text(name: str) -> str:
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    return resources.files("qdslab").joinpath("presets", f"{name}.cfg").read_text()


def load_config(preset: Optional[str] = None, path: Optional[str] = None) -> RunConfig:
    """
    Defaults, overlaid by a preset, overlaid by a config file.

    Keys in the file replace keys from the preset.
    """
    entries: Dict[str, Tuple[object, int]] = {}
    origin = "<defaults>"
    if preset is not None:
        entries.update(parse_entries(preset_text(preset), f"preset:{preset}"))
        origin = f"preset:{preset}"
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        entries.update(parse_entries(text, path))
        origin = path
    return build_config(entries, origin)


def with_overrides(cfg: RunConfig, **run_fields) -> RunConfig:
    """Copy with selected ``run.*`` fields replaced (``None`` leaves a field alone)."""
    changes = {k: v for k, v in run_fields.items() if v is not None}
    if not changes:
        return cfg
    try:
        return replace(cfg, run=replace(cfg.run, **changes))
    except ValueError as exc:
        raise ConfigError(f"invalid command-line value: {exc}") from None
