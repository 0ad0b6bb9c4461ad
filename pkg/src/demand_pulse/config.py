"""Pipeline configuration.

The config file is INI-style key/value text::

    [inputs]            trips, epidemic, vaccination, zones (paths; relative
                        paths resolve against the config file's directory)
    [trip_columns]      optional overrides of TripSchema column names
    [epidemic_columns]  optional overrides of EPIDEMIC_COLUMNS
    [vaccination_columns]
    [zone_columns]
    [periods]           before = YYYY-MM-DD..YYYY-MM-DD, after = ...
    [analysis]          smoothing, dtw_normalization, dtw_cost,
                        tlcc_max_offset, distance_threshold, fit_intercept
    [output]            dir

Every key except the four inputs has a default.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path

from .dtw import COST_MODES
from .errors import ConfigError, DataError
from .ingest import EPIDEMIC_COLUMNS, VACCINATION_COLUMNS, ZONE_COLUMNS, TripSchema
from .series import AFTER_VACCINATION, BEFORE_VACCINATION, AnalysisPeriod
from .spatial import DEFAULT_THRESHOLD_MI
from .lag import DEFAULT_MAX_OFFSET

INPUT_ROLES = ("trips", "epidemic", "vaccination", "zones")
NORMALIZATION_MODES = ("zscore", "minmax", "none")


class InputNotFound(DataError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    inputs: dict[str, Path]
    trip_columns: dict[str, str] = field(default_factory=dict)
    epidemic_columns: dict[str, str] = field(default_factory=dict)
    vaccination_columns: dict[str, str] = field(default_factory=dict)
    zone_columns: dict[str, str] = field(default_factory=dict)
    before: AnalysisPeriod = BEFORE_VACCINATION
    after: AnalysisPeriod = AFTER_VACCINATION
    smoothing: bool = True
    dtw_normalization: str = "zscore"
    dtw_cost: str = "absolute"
    tlcc_max_offset: int = DEFAULT_MAX_OFFSET
    distance_threshold: float = DEFAULT_THRESHOLD_MI
    fit_intercept: bool = True
    output_dir: Path = Path("out")

    def __post_init__(self):
        missing = [r for r in INPUT_ROLES if r not in self.inputs]
        if missing:
            raise ConfigError(f"[inputs] is missing {missing}")
        if self.dtw_normalization not in NORMALIZATION_MODES:
            raise ConfigError(f"dtw_normalization must be one of {NORMALIZATION_MODES}")
        if self.dtw_cost not in COST_MODES:
            raise ConfigError(f"dtw_cost must be one of {COST_MODES}")
        if self.tlcc_max_offset < 1:
            raise ConfigError("tlcc_max_offset must be >= 1")
        if not self.distance_threshold > 0:
            raise ConfigError("distance_threshold must be > 0")
        TripSchema.from_mapping(self.trip_columns)

    @property
    def trip_schema(self) -> TripSchema:
        return TripSchema.from_mapping(self.trip_columns)

    def check_inputs(self) -> None:
        for role in INPUT_ROLES:
            path = self.inputs[role]
            if not path.is_file():
                raise InputNotFound(f"{role} input not found: {path}")

    def with_output(self, output_dir) -> "PipelineConfig":
        return replace(self, output_dir=Path(output_dir))

    def canonical(self) -> dict:
        """Everything that affects results; the output directory does not."""
        return {
            "inputs": {r: self.inputs[r].name for r in INPUT_ROLES},
            "trip_columns": TripSchema.from_mapping(self.trip_columns).__dict__,
            "epidemic_columns": {**EPIDEMIC_COLUMNS, **self.epidemic_columns},
            "vaccination_columns": {**VACCINATION_COLUMNS, **self.vaccination_columns},
            "zone_columns": {**ZONE_COLUMNS, **self.zone_columns},
            "periods": {
                "before": [self.before.start.isoformat(), self.before.end.isoformat()],
                "after": [self.after.start.isoformat(), self.after.end.isoformat()],
            },
            "smoothing": self.smoothing,
            "dtw_normalization": self.dtw_normalization,
            "dtw_cost": self.dtw_cost,
            "tlcc_max_offset": self.tlcc_max_offset,
            "distance_threshold": self.distance_threshold,
            "fit_intercept": self.fit_intercept,
        }

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _period(text: str, name: str) -> AnalysisPeriod:
    try:
        lo, hi = (part.strip() for part in text.split(".."))
        return AnalysisPeriod(date.fromisoformat(lo), date.fromisoformat(hi), name)
    except ValueError as exc:
        raise ConfigError(f"period {name!r}: expected YYYY-MM-DD..YYYY-MM-DD, got {text!r} ({exc})") from None


def _bool(section, key: str, default: bool) -> bool:
    try:
        return section.getboolean(key, fallback=default)
    except ValueError:
        raise ConfigError(f"{key} must be true/false, got {section.get(key)!r}") from None


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # column names are case-sensitive
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not parser.has_section("inputs"):
        raise ConfigError(f"{path}: missing [inputs] section")
    base = path.parent
    inputs = {k: (base / v.strip()) for k, v in parser["inputs"].items()}
    unknown = set(inputs) - set(INPUT_ROLES)
    if unknown:
        raise ConfigError(f"unknown input roles {sorted(unknown)}")

    def section(name: str) -> dict[str, str]:
        return dict(parser[name]) if parser.has_section(name) else {}

    periods = section("periods")
    analysis = parser["analysis"] if parser.has_section("analysis") else parser[parser.default_section]
    try:
        max_offset = analysis.getint("tlcc_max_offset", fallback=DEFAULT_MAX_OFFSET)
        threshold = analysis.getfloat("distance_threshold", fallback=DEFAULT_THRESHOLD_MI)
    except ValueError as exc:
        raise ConfigError(f"[analysis]: {exc}") from None
    out_dir = section("output").get("dir", "out")
    try:
        return PipelineConfig(
            inputs=inputs,
            trip_columns=section("trip_columns"),
            epidemic_columns=section("epidemic_columns"),
            vaccination_columns=section("vaccination_columns"),
            zone_columns=section("zone_columns"),
            before=_period(periods["before"], "before") if "before" in periods else BEFORE_VACCINATION,
            after=_period(periods["after"], "after") if "after" in periods else AFTER_VACCINATION,
            smoothing=_bool(analysis, "smoothing", True),
            dtw_normalization=analysis.get("dtw_normalization", "zscore"),
            dtw_cost=analysis.get("dtw_cost", "absolute"),
            tlcc_max_offset=max_offset,
            distance_threshold=threshold,
            fit_intercept=_bool(analysis, "fit_intercept", True),
            output_dir=base / out_dir,
        )
    except DataError as exc:
        raise ConfigError(str(exc)) from None
