"""Study configuration: flat key=value text with sections.

The format is plain INI (configparser): diff-friendly, line-oriented, and
trivially parseable elsewhere. Unknown sections or keys are rejected so
typos fail loudly. Every value has a default; an empty config is a valid
full study.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, asdict

from .biomech import LimbParams
from .errors import ConfigError


@dataclass(frozen=True)
class CohortConfig:
    subjects: int = 5
    jitter: float = 0.2
    seed: int = 1234


@dataclass(frozen=True)
class ProtocolConfig:
    frequencies: tuple[float, ...] = (1.0, 3.0)   # Hz, low then high
    duration_s: float = 10.0
    amplitude_m: float = 0.03
    relaxed_target: float = 0.05
    stiff_target: float = 0.40
    analysis_window_s: float = 5.0
    directions: int = 8


@dataclass(frozen=True)
class RatesConfig:
    robot_hz: float = 1000.0
    emg_hz: float = 2148.0


@dataclass(frozen=True)
class EmgConfig:
    rms_window_s: float = 0.25
    rms_stride_s: float = 0.05
    feedback_channels: tuple[int, ...] = (0, 2)


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    jobs: int = 1


@dataclass(frozen=True)
class ScenarioConfig:
    field_kind: str = "negative-damping"
    field_damping: float = -5.0     # b_f; negative pumps energy
    spring_gain: float = 300.0      # used by delayed-spring fields
    spring_delay_s: float = 0.02
    duration_s: float = 10.0
    direction: int = 0
    activation: float = 0.40
    frequency_hz: float = 1.0
    amplitude_m: float = 0.03
    safety_factor: float = 0.8
    seed: int = 7


@dataclass(frozen=True)
class StudyConfig:
    cohort: CohortConfig = field(default_factory=CohortConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    rates: RatesConfig = field(default_factory=RatesConfig)
    emg: EmgConfig = field(default_factory=EmgConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    limb: LimbParams = field(default_factory=LimbParams)
    stabilizer: ScenarioConfig = field(default_factory=ScenarioConfig)

    def validate(self) -> None:
        p = self.protocol
        if self.cohort.subjects < 1:
            raise ConfigError("cohort.subjects must be >= 1")
        if not 0 <= self.cohort.jitter < 1:
            raise ConfigError("cohort.jitter must be in [0, 1)")
        if len(p.frequencies) not in (1, 2) or any(f <= 0 for f in p.frequencies):
            raise ConfigError("protocol.frequencies needs 1 or 2 positive values")
        if len(p.frequencies) == 2 and p.frequencies[0] >= p.frequencies[1]:
            raise ConfigError("protocol.frequencies must be increasing")
        if p.directions != 8:
            raise ConfigError("protocol.directions must be 8 (cardinal directions)")
        for name, value in (("duration_s", p.duration_s), ("amplitude_m", p.amplitude_m),
                            ("analysis_window_s", p.analysis_window_s)):
            if value <= 0:
                raise ConfigError(f"protocol.{name} must be > 0")
        if p.analysis_window_s > p.duration_s:
            raise ConfigError("protocol.analysis_window_s exceeds duration_s")
        for name, value in (("relaxed_target", p.relaxed_target), ("stiff_target", p.stiff_target)):
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"protocol.{name} must be within [0, 1]")
        if self.rates.robot_hz < 20.0 * max(p.frequencies):
            raise ConfigError("rates.robot_hz too low for the protocol frequencies")
        if self.rates.emg_hz <= 2 * 450.0:
            raise ConfigError("rates.emg_hz must exceed twice the EMG band edge")
        if self.output.jobs < 1:
            raise ConfigError("output.jobs must be >= 1")
        if self.stabilizer.field_kind not in ("negative-damping", "delayed-spring"):
            raise ConfigError(f"unknown stabilizer.field_kind {self.stabilizer.field_kind!r}")
        if not 0 <= self.stabilizer.direction < 8:
            raise ConfigError("stabilizer.direction must be in 0..7")

    def as_dict(self) -> dict:
        doc = {
            "cohort": asdict(self.cohort),
            "protocol": asdict(self.protocol),
            "rates": asdict(self.rates),
            "emg": asdict(self.emg),
            "output": asdict(self.output),
            "limb": asdict(self.limb),
            "stabilizer": asdict(self.stabilizer),
        }
        doc["protocol"]["frequencies"] = list(self.protocol.frequencies)
        doc["emg"]["feedback_channels"] = list(self.emg.feedback_channels)
        doc["limb"]["direction_gains"] = list(self.limb.direction_gains)
        return doc


_SECTION_TYPES = {
    "cohort": CohortConfig,
    "protocol": ProtocolConfig,
    "rates": RatesConfig,
    "emg": EmgConfig,
    "output": OutputConfig,
    "limb": LimbParams,
    "stabilizer": ScenarioConfig,
}


def _convert(section: str, key: str, raw: str, default):
    try:
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            elem = default[0] if default else 0.0
            return tuple(type(elem)(p) for p in parts)
        return raw
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None


def load_config(path) -> StudyConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r") as fh:
            parser.read_file(fh)
    except OSError:
        raise
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    kwargs: dict[str, object] = {}
    for section in parser.sections():
        if section not in _SECTION_TYPES:
            raise ConfigError(f"{path}: unknown section [{section}]")
        cls = _SECTION_TYPES[section]
        defaults = cls()
        values = {}
        for key, raw in parser.items(section):
            if not hasattr(defaults, key):
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            values[key] = _convert(section, key, raw, getattr(defaults, key))
        try:
            kwargs[section] = cls(**{**_dataclass_values(defaults), **values})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: [{section}]: {exc}") from None
    config = StudyConfig(**kwargs)
    config.validate()
    return config


def _dataclass_values(instance) -> dict:
    return {name: getattr(instance, name) for name in instance.__dataclass_fields__}


def default_config() -> StudyConfig:
    config = StudyConfig()
    config.validate()
    return config


def frequency_labels(protocol: ProtocolConfig) -> list[tuple[str, float]]:
    """Label -> Hz pairs for the protocol grid ("low" first)."""
    labels = ("low", "high")
    return [(labels[i], hz) for i, hz in enumerate(protocol.frequencies)]
