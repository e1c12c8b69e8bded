"""Seeded synthetic inputs: hourly weather histories and demand-ratio profiles.

Weather: ``T = mean + trend*(year - first_year) - seasonal*cos(2pi(doy - coldest_doy)/365)
+ diurnal*cos(2pi(hour - 15)/24) + anomaly``, where the anomaly is an hourly
AR(1) process with stationary standard deviation ``anomaly_sd``.

Demand ratio: ``level * daily(hour) * seasonal(doy) * weekday + noise`` with a
two-peak seasonal term (winter and summer maxima), clipped at zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .criteria import HOURS_PER_YEAR
from .weather import WeatherSeries

__all__ = ["ClimateModel", "DemandModel", "synthetic_demand", "synthetic_weather"]


@dataclass(frozen=True)
class ClimateModel:
    annual_mean: float = 13.0
    seasonal_amplitude: float = 12.0
    coldest_doy: int = 20
    diurnal_amplitude: float = 4.5
    anomaly_sd: float = 3.0
    anomaly_persistence: float = 0.98  # hourly AR(1) coefficient
    trend_per_year: float = 0.03


def synthetic_weather(
    first_year: int,
    last_year: int,
    seed: int = 0,
    model: ClimateModel = ClimateModel(),
    station: str = "synthetic",
    wind_speed: float | None = None,
) -> WeatherSeries:
    """Gap-free hourly series covering ``first_year`` .. ``last_year`` inclusive."""
    if last_year < first_year:
        raise ValueError("last_year precedes first_year")
    times = np.arange(f"{first_year}-01-01T00", f"{last_year + 1}-01-01T00", dtype="datetime64[h]")
    rng = np.random.default_rng(seed)
    years = times.astype("datetime64[Y]").astype(int) + 1970
    doy = (times.astype("datetime64[D]") - times.astype("datetime64[Y]")).astype(int)
    hour = (times - times.astype("datetime64[D]")).astype(int)

    phi = model.anomaly_persistence
    shocks = rng.normal(0.0, model.anomaly_sd * np.sqrt(1.0 - phi**2), len(times))
    anomaly = np.empty(len(times))
    state = rng.normal(0.0, model.anomaly_sd)
    for i, shock in enumerate(shocks):
        state = phi * state + shock
        anomaly[i] = state

    temps = (
        model.annual_mean
        + model.trend_per_year * (years - first_year)
        - model.seasonal_amplitude * np.cos(2 * np.pi * (doy - model.coldest_doy) / 365.0)
        + model.diurnal_amplitude * np.cos(2 * np.pi * (hour - 15) / 24.0)
        + anomaly
    )
    temps = np.round(np.clip(temps, -40.0, 60.0), 1)
    wind = None if wind_speed is None else np.full(len(times), float(wind_speed))
    return WeatherSeries(times, temps, wind, station)


@dataclass(frozen=True)
class DemandModel:
    level: float = 1.2
    daily_amplitude: float = 0.15
    seasonal_amplitude: float = 0.12
    weekend_factor: float = 0.92
    noise_sd: float = 0.02


def synthetic_demand(seed: int = 0, model: DemandModel = DemandModel(), first_weekday: int = 6) -> np.ndarray:
    """8760 hourly demand ratios.

    ``first_weekday`` is the weekday of Jan 1 (Monday = 0); 2023 began on a
    Sunday.
    """
    rng = np.random.default_rng(seed)
    hours = np.arange(HOURS_PER_YEAR)
    hour_of_day = hours % 24
    day = hours // 24
    # morning ramp to an early-evening peak, night trough
    daily = 1.0 + model.daily_amplitude * (
        0.7 * np.cos(2 * np.pi * (hour_of_day - 18) / 24.0) + 0.3 * np.cos(4 * np.pi * (hour_of_day - 11) / 24.0)
    )
    seasonal = 1.0 + model.seasonal_amplitude * np.cos(4 * np.pi * (day - 20) / 365.0)
    weekday = (day + first_weekday) % 7
    week = np.where(weekday >= 5, model.weekend_factor, 1.0)
    ratio = model.level * daily * seasonal * week + rng.normal(0.0, model.noise_sd, HOURS_PER_YEAR)
    return np.clip(ratio, 0.0, None)
