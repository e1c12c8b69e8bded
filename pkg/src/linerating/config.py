"""Run settings read from an INI file, with command-line overrides on top.

Recognized keys (all optional; unknown keys are rejected)::

    [conductor]
    diameter_mm, resistance_ohm_per_km, emissivity, absorptivity,
    max_surface_temp, elevation

    [simulation]
    policies          comma-separated policy names
    voll              $/MWh
    dlr_fraction
    segments          piecewise-linear cost segments
    wind_speed        m/s, used by every policy
    effective_solar   W/m^2
    seed              demand generator seed
    year              simulation year picked from the weather file
    min_coverage      fraction of hours a month needs to count as complete

    [weather]
    time_column, temp_column, wind_column, time_format, station
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .criteria import Policy
from .opf import DEFAULT_SEGMENTS, DEFAULT_VOLL
from .thermal import ConductorSpec
from .weather import CsvSchema

__all__ = ["ConfigError", "ConductorSettings", "RunSettings", "load_settings"]

DEFAULT_INI = Path(__file__).with_name("data") / "default.ini"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ConductorSettings:
    diameter_mm: float = 30.42
    resistance_ohm_per_km: float = 0.0804
    emissivity: float = 0.5
    absorptivity: float = 0.5
    max_surface_temp: float = 90.0
    elevation: float = 0.0

    def spec(self) -> ConductorSpec:
        return ConductorSpec.from_catalog_units(
            self.diameter_mm,
            self.resistance_ohm_per_km,
            emissivity=self.emissivity,
            absorptivity=self.absorptivity,
            max_surface_temp=self.max_surface_temp,
            elevation=self.elevation,
        )


@dataclass(frozen=True)
class RunSettings:
    conductor: ConductorSettings = ConductorSettings()
    policies: tuple[Policy, ...] = tuple(Policy)
    voll: float = DEFAULT_VOLL
    dlr_fraction: float = 0.10
    segments: int = DEFAULT_SEGMENTS
    wind_speed: float = 0.5
    effective_solar: float = 1000.0
    seed: int = 0
    year: int | None = None
    min_coverage: float = 0.9
    weather: CsvSchema = field(default_factory=CsvSchema)

    def override(self, **values) -> "RunSettings":
        """Copy with every non-None keyword replaced; conductor keys go to the conductor."""
        values = {k: v for k, v in values.items() if v is not None}
        cond_keys = {f.name for f in dataclasses.fields(ConductorSettings)}
        cond = {k: values.pop(k) for k in list(values) if k in cond_keys}
        if "policies" in values:
            values["policies"] = _parse_policies(values["policies"])
        out = dataclasses.replace(self, **values)
        if cond:
            out = dataclasses.replace(out, conductor=dataclasses.replace(self.conductor, **cond))
        return out


def _parse_policies(value) -> tuple[Policy, ...]:
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    policies = tuple(dict.fromkeys(p if isinstance(p, Policy) else Policy.parse(p) for p in value))
    if not policies:
        raise ConfigError("policy list is empty")
    return policies


def _coerce(section: str, key: str, raw: str, target):
    try:
        if target is int:
            return int(raw)
        if target is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None


def load_settings(path=None) -> RunSettings:
    """Settings from ``path`` (defaults where keys are absent)."""
    settings = RunSettings()
    if path is None:
        return settings
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with path.open(encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise FileNotFoundError(f"cannot read config {path}: {exc.strerror}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    known = {
        "conductor": {f.name: f.type for f in dataclasses.fields(ConductorSettings)},
        "simulation": {
            "policies": str, "voll": float, "dlr_fraction": float, "segments": int, "wind_speed": float,
            "effective_solar": float, "seed": int, "year": int, "min_coverage": float,
        },
        "weather": {f.name: str for f in dataclasses.fields(CsvSchema) if f.name != "encoding"},
    }
    values: dict = {}
    weather: dict = {}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in known[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            target = known[section][key]
            if section == "conductor":
                target = float
            value = _coerce(section, key, raw.strip(), target)
            (weather if section == "weather" else values)[key] = value
    try:
        settings = settings.override(**values)
        if weather:
            settings = dataclasses.replace(settings, weather=dataclasses.replace(settings.weather, **weather))
        settings.conductor.spec()
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return settings
