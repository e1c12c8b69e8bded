"""Steady-state conductor ampacity from a heat balance.

The balance is ``I^2 R = q_c + q_r - q_s``: convective and radiative losses
against solar gain, evaluated at the maximum allowable surface temperature.
Air properties use the IEEE 738 polynomial fits at the film temperature
``(T_s + T_a) / 2``:

    mu_f  = 1.458e-6 (T_film + 273)^1.5 / (T_film + 383.4)        kg/(m s)
    rho_f = (1.293 - 1.525e-4 H + 6.379e-9 H^2) / (1 + 0.00367 T_film)  kg/m^3
    k_f   = 2.424e-2 + 7.477e-5 T_film - 4.407e-9 T_film^2          W/(m K)

All lengths are meters and resistance is ohm per meter.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "AirProperties",
    "AmbientConditions",
    "AmpacityTrace",
    "ConductorSpec",
    "ConvectionRegime",
    "HeatBalance",
    "KEPCO_ACSR_480",
    "NoThermalHeadroom",
    "ThermalDomainError",
    "air_properties",
    "ampacity",
    "ampacity_series",
    "convection_loss",
    "convection_terms",
    "heat_balance",
    "radiation_loss",
    "solar_gain",
]

# Exponent on (T_s - T_a) in the natural-convection term.
NATURAL_EXPONENT = 1.25


class ThermalDomainError(ValueError):
    """Input outside the range the heat-balance correlations accept."""


class NoThermalHeadroom(ArithmeticError):
    """Solar gain exceeds the conductor's capacity to shed heat."""


class ConvectionRegime(enum.Enum):
    LOW_WIND = "LowWind"
    HIGH_WIND = "HighWind"
    NATURAL = "Natural"


@dataclass(frozen=True)
class ConductorSpec:
    """Physical and electrical data of one bare overhead conductor."""

    outside_diameter: float  # m
    ac_resistance: float  # ohm/m at the average conductor temperature
    emissivity: float = 0.5
    absorptivity: float = 0.5
    max_surface_temp: float = 90.0  # degC
    elevation: float = 0.0  # m above sea level

    def __post_init__(self):
        if not self.outside_diameter > 0:
            raise ThermalDomainError(f"outside_diameter must be > 0, got {self.outside_diameter}")
        if not self.ac_resistance > 0:
            raise ThermalDomainError(f"ac_resistance must be > 0, got {self.ac_resistance}")
        for name in ("emissivity", "absorptivity"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ThermalDomainError(f"{name} must lie in [0, 1], got {value}")
        if not self.max_surface_temp > -273.15:
            raise ThermalDomainError(f"max_surface_temp below absolute zero: {self.max_surface_temp}")
        if self.elevation < 0:
            raise ThermalDomainError(f"elevation must be >= 0, got {self.elevation}")

    @classmethod
    def from_catalog_units(
        cls,
        diameter_mm: float,
        resistance_ohm_per_km: float,
        **kwargs,
    ) -> "ConductorSpec":
        """Build a spec from catalog units (mm, ohm/km)."""
        return cls(
            outside_diameter=diameter_mm / 1000.0,
            ac_resistance=resistance_ohm_per_km / 1000.0,
            **kwargs,
        )

    def with_resistance(self, ac_resistance: float) -> "ConductorSpec":
        return ConductorSpec(
            self.outside_diameter,
            ac_resistance,
            self.emissivity,
            self.absorptivity,
            self.max_surface_temp,
            self.elevation,
        )


# ACSR 480 mm^2 as rated by KEPCO: 30.42 mm, 0.0804 ohm/km, 90 degC surface.
KEPCO_ACSR_480 = ConductorSpec.from_catalog_units(
    30.42, 0.0804, emissivity=0.5, absorptivity=0.5, max_surface_temp=90.0
)


@dataclass(frozen=True)
class AmbientConditions:
    air_temp: float  # degC
    wind_speed: float  # m/s
    wind_direction_factor: float = 1.0
    effective_solar: float = 1000.0  # W/m^2, Q_se * sin(theta) collapsed into one input

    def __post_init__(self):
        if not self.wind_speed >= 0:
            raise ThermalDomainError(f"wind_speed must be >= 0, got {self.wind_speed}")
        if not self.effective_solar >= 0:
            raise ThermalDomainError(f"effective_solar must be >= 0, got {self.effective_solar}")
        if not 0.0 < self.wind_direction_factor <= 1.0:
            raise ThermalDomainError(
                f"wind_direction_factor must lie in (0, 1], got {self.wind_direction_factor}"
            )


class AirProperties(NamedTuple):
    thermal_conductivity: float  # W/(m K)
    density: float  # kg/m^3
    dynamic_viscosity: float  # kg/(m s)


@dataclass(frozen=True)
class HeatBalance:
    q_convection: float
    q_radiation: float
    q_solar: float
    which_convection: ConvectionRegime

    @property
    def net(self) -> float:
        return self.q_convection + self.q_radiation - self.q_solar


def air_properties(film_temp: float, elevation: float = 0.0) -> AirProperties:
    if not -40.0 <= film_temp <= 200.0:
        raise ThermalDomainError(f"film temperature {film_temp} degC outside [-40, 200]")
    if elevation < 0:
        raise ThermalDomainError(f"elevation must be >= 0, got {elevation}")
    viscosity = 1.458e-6 * (film_temp + 273.0) ** 1.5 / (film_temp + 383.4)
    density = (1.293 - 1.525e-4 * elevation + 6.379e-9 * elevation**2) / (1.0 + 0.00367 * film_temp)
    conductivity = 2.424e-2 + 7.477e-5 * film_temp - 4.407e-9 * film_temp**2
    return AirProperties(conductivity, density, viscosity)


def _check_temps(spec: ConductorSpec, air_temp: float) -> None:
    if air_temp > spec.max_surface_temp:
        raise ThermalDomainError(
            f"air temperature {air_temp} degC exceeds conductor limit {spec.max_surface_temp} degC"
        )


def convection_terms(
    spec: ConductorSpec, amb: AmbientConditions, linear_natural: bool = False
) -> dict[ConvectionRegime, float]:
    """All three candidate convective losses (W/m), keyed by regime.

    ``linear_natural`` drops the 1.25 exponent on the temperature rise in the
    natural-convection term.
    """
    _check_temps(spec, amb.air_temp)
    rise = spec.max_surface_temp - amb.air_temp
    film = (spec.max_surface_temp + amb.air_temp) / 2.0
    k_f, rho_f, mu_f = air_properties(film, spec.elevation)
    diameter = spec.outside_diameter
    reynolds = diameter * rho_f * amb.wind_speed / mu_f
    k_angle = amb.wind_direction_factor

    low = k_angle * (1.01 + 1.35 * reynolds**0.52) * k_f * rise
    high = k_angle * 0.754 * reynolds**0.6 * k_f * rise
    exponent = 1.0 if linear_natural else NATURAL_EXPONENT
    natural = 3.645 * rho_f**0.5 * diameter**0.75 * rise**exponent
    return {
        ConvectionRegime.LOW_WIND: low,
        ConvectionRegime.HIGH_WIND: high,
        ConvectionRegime.NATURAL: natural,
    }


def convection_loss(
    spec: ConductorSpec, amb: AmbientConditions, linear_natural: bool = False
) -> tuple[float, ConvectionRegime]:
    """Largest of the three convective losses and the regime that produced it."""
    terms = convection_terms(spec, amb, linear_natural)
    # Ties resolve in enum order: LowWind, HighWind, Natural.
    which = max(terms, key=terms.__getitem__)
    return terms[which], which


def radiation_loss(spec: ConductorSpec, air_temp: float) -> float:
    surface = ((spec.max_surface_temp + 273.0) / 100.0) ** 4
    ambient = ((air_temp + 273.0) / 100.0) ** 4
    return 17.8 * spec.outside_diameter * spec.emissivity * (surface - ambient)


def solar_gain(spec: ConductorSpec, amb: AmbientConditions) -> float:
    # Projected area per unit length is taken as the outside diameter.
    return spec.absorptivity * amb.effective_solar * spec.outside_diameter


def heat_balance(
    spec: ConductorSpec, amb: AmbientConditions, linear_natural: bool = False
) -> HeatBalance:
    q_c, which = convection_loss(spec, amb, linear_natural)
    return HeatBalance(q_c, radiation_loss(spec, amb.air_temp), solar_gain(spec, amb), which)


def ampacity(spec: ConductorSpec, amb: AmbientConditions, linear_natural: bool = False) -> float:
    """Allowable steady-state current in amperes.

    Raises:
        ThermalDomainError: ambient temperature above the conductor limit.
        NoThermalHeadroom: solar gain exceeds convective plus radiative loss.
    """
    balance = heat_balance(spec, amb, linear_natural)
    net = balance.net
    if net < 0:
        raise NoThermalHeadroom(
            f"net heat balance {net:.4g} W/m is negative at {amb.air_temp} degC"
        )
    return math.sqrt(net / spec.ac_resistance)


@dataclass(frozen=True)
class AmpacityTrace:
    """Per-point ampacity; points without thermal headroom are NaN and flagged."""

    values: np.ndarray
    no_headroom: np.ndarray

    def __len__(self) -> int:
        return len(self.values)


def ampacity_series(
    spec: ConductorSpec,
    series,
    default_wind: float = 0.5,
    effective_solar: float = 1000.0,
    wind_direction_factor: float = 1.0,
    linear_natural: bool = False,
) -> AmpacityTrace:
    """Hourly ampacity along a weather series.

    ``series`` is any iterable of points with ``air_temp`` and optional
    ``wind_speed`` (None means ``default_wind``).
    """
    points = list(series)
    if not points:
        raise ValueError("ampacity_series needs a nonempty series")
    values = np.empty(len(points))
    failed = np.zeros(len(points), dtype=bool)
    for i, point in enumerate(points):
        wind = point.wind_speed
        if wind is None or (isinstance(wind, float) and math.isnan(wind)):
            wind = default_wind
        amb = AmbientConditions(point.air_temp, wind, wind_direction_factor, effective_solar)
        try:
            values[i] = ampacity(spec, amb, linear_natural)
        except (NoThermalHeadroom, ThermalDomainError):
            values[i] = np.nan
            failed[i] = True
    return AmpacityTrace(values, failed)
