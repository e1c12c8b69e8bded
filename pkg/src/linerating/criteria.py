"""Temperature criteria from historical maxima and the hourly rating schedules they imply."""

from __future__ import annotations

import calendar
import csv
import enum
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .thermal import (
    AmbientConditions,
    ConductorSpec,
    NoThermalHeadroom,
    ThermalDomainError,
    ampacity,
)
from .weather import MonthlyMaxTable, WeatherSeries

__all__ = [
    "CriteriaError",
    "HOURS_PER_YEAR",
    "Policy",
    "RatingSchedule",
    "REFERENCE_TEMP",
    "REFERENCE_WIND",
    "SEASONAL",
    "SEMIANNUAL",
    "SeasonMap",
    "TemperatureCriteria",
    "blockify",
    "build_schedule",
    "capacity_ratio",
    "conventional_criteria",
    "derive_monthly_criteria",
    "dlr_subset_size",
    "exceedance_probability",
    "month_of_hour",
    "read_criteria_csv",
    "select_dlr_lines",
    "write_criteria_csv",
    "write_schedule_csv",
    "year_weather_8760",
]

REFERENCE_TEMP = 40.0  # degC, conventional static rating
REFERENCE_WIND = 0.5  # m/s
HOURS_PER_YEAR = 8760


class CriteriaError(ValueError):
    pass


class Policy(enum.Enum):
    CONVENTIONAL = "conventional"
    MONTHLY = "monthly"
    SEASONAL = "seasonal"
    SEMIANNUAL = "semiannual"
    DYNAMIC_SUBSET = "dlr"

    @classmethod
    def parse(cls, text: str) -> "Policy":
        try:
            return cls(text.strip().lower())
        except ValueError:
            names = ", ".join(p.value for p in cls)
            raise CriteriaError(f"unknown policy {text!r}; expected one of {names}") from None


def _month_hours() -> np.ndarray:
    # 8760-hour convention: a non-leap calendar
    days = [calendar.monthrange(2023, m)[1] for m in range(1, 13)]
    return np.repeat(np.arange(1, 13), np.array(days) * 24)


_MONTH_OF_HOUR = _month_hours()
_MONTH_OF_HOUR.setflags(write=False)


def month_of_hour(hour=None):
    """Calendar month (1-12) of a 0-based hour of the non-leap year."""
    if hour is None:
        return _MONTH_OF_HOUR
    return _MONTH_OF_HOUR[hour]


@dataclass(frozen=True)
class SeasonMap:
    name: str
    blocks: Mapping[int, str]  # month -> block label

    def __post_init__(self):
        if sorted(self.blocks) != list(range(1, 13)):
            raise CriteriaError(f"season map {self.name!r} must cover months 1-12 exactly")

    def members(self, block: str) -> list[int]:
        return [m for m in range(1, 13) if self.blocks[m] == block]

    def labels(self) -> list[str]:
        seen: list[str] = []
        for m in range(1, 13):
            if self.blocks[m] not in seen:
                seen.append(self.blocks[m])
        return seen


SEASONAL = SeasonMap(
    "seasonal",
    {
        12: "winter", 1: "winter", 2: "winter",
        3: "spring_autumn", 4: "spring_autumn", 10: "spring_autumn", 11: "spring_autumn",
        5: "summer", 6: "summer", 7: "summer", 8: "summer", 9: "summer",
    },
)
SEMIANNUAL = SeasonMap(
    "semiannual",
    {
        **{m: "nov_apr" for m in (11, 12, 1, 2, 3, 4)},
        **{m: "may_oct" for m in (5, 6, 7, 8, 9, 10)},
    },
)
_BLOCK_POLICY = {"seasonal": Policy.SEASONAL, "semiannual": Policy.SEMIANNUAL}


@dataclass(frozen=True)
class TemperatureCriteria:
    """Design air temperature for each calendar month under one policy."""

    temps: tuple[float, ...]
    policy: Policy
    provenance: str = ""

    def __post_init__(self):
        temps = tuple(float(t) for t in self.temps)
        object.__setattr__(self, "temps", temps)
        if len(temps) != 12:
            raise CriteriaError(f"need 12 monthly temperatures, got {len(temps)}")
        if self.policy is Policy.DYNAMIC_SUBSET:
            raise CriteriaError("dynamic-subset schedules take conventional criteria for static lines")
        if self.policy is Policy.CONVENTIONAL and any(t != REFERENCE_TEMP for t in temps):
            raise CriteriaError("conventional criteria must be 40 degC in every month")
        if self.policy in (Policy.SEASONAL, Policy.SEMIANNUAL):
            smap = SEASONAL if self.policy is Policy.SEASONAL else SEMIANNUAL
            for label in smap.labels():
                if len({temps[m - 1] for m in smap.members(label)}) != 1:
                    raise CriteriaError(f"{self.policy.value} criteria vary within block {label!r}")

    def month(self, month: int) -> float:
        return self.temps[month - 1]


def conventional_criteria() -> TemperatureCriteria:
    return TemperatureCriteria((REFERENCE_TEMP,) * 12, Policy.CONVENTIONAL, "fixed 40 degC")


def derive_monthly_criteria(table: MonthlyMaxTable, sigmas: float = 3.0) -> TemperatureCriteria:
    """Per month: highest yearly maximum plus ``sigmas`` sample standard deviations.

    Only months flagged complete enter the max and the deviation.
    """
    temps = []
    for month in range(1, 13):
        values = [v for _, v in table.month_values(month, complete_only=True)]
        if len(values) < 2:
            raise CriteriaError(
                f"month {month} has {len(values)} complete year(s); at least 2 are needed"
            )
        arr = np.asarray(values)
        temps.append(float(arr.max() + sigmas * arr.std(ddof=1)))
    years = table.years()
    provenance = f"max+{sigmas:g}sd over {years[0]}-{years[-1]}" if years else ""
    return TemperatureCriteria(tuple(temps), Policy.MONTHLY, provenance)


def blockify(criteria: TemperatureCriteria, season_map: SeasonMap) -> TemperatureCriteria:
    """Replace each month by the maximum over its block."""
    if criteria.policy is not Policy.MONTHLY:
        raise CriteriaError("blockify expects monthly criteria")
    block_max = {
        label: max(criteria.month(m) for m in season_map.members(label))
        for label in season_map.labels()
    }
    temps = tuple(block_max[season_map.blocks[m]] for m in range(1, 13))
    policy = _BLOCK_POLICY[season_map.name]
    return TemperatureCriteria(temps, policy, criteria.provenance)


def criteria_for(policy: Policy, monthly: TemperatureCriteria | None) -> TemperatureCriteria:
    """Criteria driving the static lines of ``policy``."""
    if policy in (Policy.CONVENTIONAL, Policy.DYNAMIC_SUBSET):
        return conventional_criteria()
    if monthly is None:
        raise CriteriaError(f"policy {policy.value} needs monthly criteria")
    if policy is Policy.MONTHLY:
        return monthly
    return blockify(monthly, SEASONAL if policy is Policy.SEASONAL else SEMIANNUAL)


def _ampacity_at(spec: ConductorSpec, temp: float, wind: float, solar: float) -> float:
    return ampacity(spec, AmbientConditions(temp, wind, effective_solar=solar))


def capacity_ratio(
    spec: ConductorSpec,
    design_temp: float,
    wind_speed: float = REFERENCE_WIND,
    effective_solar: float = 1000.0,
) -> float:
    """Ampacity at ``design_temp`` relative to ampacity at 40 degC, same wind and sun."""
    if design_temp > spec.max_surface_temp:
        raise ThermalDomainError(
            f"design temperature {design_temp} exceeds conductor limit {spec.max_surface_temp}"
        )
    reference = _ampacity_at(spec, REFERENCE_TEMP, wind_speed, effective_solar)
    return _ampacity_at(spec, design_temp, wind_speed, effective_solar) / reference


def exceedance_probability(table: MonthlyMaxTable, month: int, criteria_temp: float) -> float:
    """Upper-tail probability of a normal fitted to the month's yearly maxima."""
    values = np.asarray([v for _, v in table.month_values(month)])
    if len(values) < 2:
        raise CriteriaError(f"month {month} needs at least 2 years, has {len(values)}")
    mu, sigma = values.mean(), values.std(ddof=1)
    if sigma == 0:
        return 0.0 if criteria_temp >= values.max() else 1.0
    return 0.5 * math.erfc((criteria_temp - mu) / (sigma * math.sqrt(2.0)))


def year_weather_8760(series: WeatherSeries) -> WeatherSeries:
    """Drop Feb 29 (with a warning) and require exactly 8760 hourly points."""
    months = series.months
    days = (series.times.astype("datetime64[D]") - series.times.astype("datetime64[M]")).astype(int) + 1
    leap = (months == 2) & (days == 29)
    if leap.any():
        warnings.warn("dropping Feb 29 to keep an 8760-hour year", stacklevel=2)
        series = WeatherSeries(series.times[~leap], series.temps[~leap], series.wind[~leap], series.station)
    if len(series) != HOURS_PER_YEAR:
        raise CriteriaError(f"year weather must have {HOURS_PER_YEAR} hourly points, got {len(series)}")
    year = int(series.years[0])
    expected = np.arange(f"{year}-01-01T00", f"{year + 1}-01-01T00", dtype="datetime64[h]")
    exp_days = (expected.astype("datetime64[D]") - expected.astype("datetime64[M]")).astype(int) + 1
    exp_months = expected.astype("datetime64[M]").astype(int) % 12 + 1
    expected = expected[~((exp_months == 2) & (exp_days == 29))]
    if not np.array_equal(series.times, expected):
        raise CriteriaError(f"year weather must cover {year} hourly without gaps")
    return series


@dataclass(frozen=True)
class RatingSchedule:
    """Line limits in MW, shape (lines, 8760)."""

    limits: np.ndarray
    policy: Policy
    capacity_ratio: np.ndarray  # (8760,) ratio applied to static lines
    dlr_ratio: np.ndarray | None = None  # (8760,) ratio applied to DLR lines
    dlr_lines: tuple[int, ...] = ()
    flagged: np.ndarray = field(default=None)  # (lines, 8760) bool: zeroed for lack of headroom
    criteria: TemperatureCriteria | None = None

    def __post_init__(self):
        self.limits.setflags(write=False)
        if self.flagged is None:
            object.__setattr__(self, "flagged", np.zeros(self.limits.shape, dtype=bool))

    @property
    def n_lines(self) -> int:
        return self.limits.shape[0]

    def hours(self, start: int, stop: int) -> np.ndarray:
        return self.limits[:, start:stop]


def _ratio_or_zero(spec, temp, wind, solar, reference) -> float:
    try:
        return _ampacity_at(spec, temp, wind, solar) / reference
    except (NoThermalHeadroom, ThermalDomainError):
        return 0.0


def build_schedule(
    base_limits: Sequence[float],
    criteria: TemperatureCriteria,
    conductor: ConductorSpec,
    year_weather: WeatherSeries | None = None,
    dlr_lines: Iterable[int] | None = None,
    wind_speed: float = REFERENCE_WIND,
    effective_solar: float = 1000.0,
) -> RatingSchedule:
    """Hourly line limits for a policy.

    ``base_limits`` are the MW ratings at the 40 degC reference, or a
    ``NetworkCase`` carrying them. Lines listed in ``dlr_lines`` (0-based
    indices) follow the hourly temperature of ``year_weather``; the rest follow
    ``criteria``. Hours without thermal headroom get a zero limit and are
    flagged rather than raising.
    """
    base = np.asarray(getattr(base_limits, "base_limits", base_limits), dtype=float)
    if np.any(base <= 0):
        raise CriteriaError("base line limits must be > 0")
    dlr = tuple(sorted(set(dlr_lines or ())))
    if any(not 0 <= i < len(base) for i in dlr):
        raise CriteriaError(f"DLR line index out of range: {dlr}")

    reference = _ampacity_at(conductor, REFERENCE_TEMP, wind_speed, effective_solar)
    month_ratio = np.array(
        [_ratio_or_zero(conductor, criteria.month(m), wind_speed, effective_solar, reference) for m in range(1, 13)]
    )
    static_ratio = month_ratio[month_of_hour() - 1]
    limits = np.outer(base, static_ratio)
    flagged = np.zeros(limits.shape, dtype=bool)
    flagged[:, static_ratio == 0] = True

    dlr_ratio = None
    if dlr:
        if year_weather is None:
            raise CriteriaError("dynamic-subset schedules need the year's hourly weather")
        year = year_weather_8760(year_weather)
        cache: dict[float, float] = {}
        dlr_ratio = np.empty(HOURS_PER_YEAR)
        for h, temp in enumerate(year.temps):
            temp = float(temp)
            if temp not in cache:
                cache[temp] = _ratio_or_zero(conductor, temp, wind_speed, effective_solar, reference)
            dlr_ratio[h] = cache[temp]
        for i in dlr:
            limits[i] = base[i] * dlr_ratio
            flagged[i] = dlr_ratio == 0
        policy = Policy.DYNAMIC_SUBSET
    else:
        policy = criteria.policy
    if np.any(flagged):
        warnings.warn(
            f"{int(flagged.sum())} line-hours have no thermal headroom; their limits are zero",
            stacklevel=2,
        )
    return RatingSchedule(limits, policy, static_ratio, dlr_ratio, dlr, flagged, criteria)


def dlr_subset_size(n_lines: int, fraction: float) -> int:
    return max(1, int(math.floor(fraction * n_lines + 1e-9)))


def select_dlr_lines(flows: np.ndarray, limits: np.ndarray, fraction: float = 0.10, rel_tol: float = 1e-6) -> tuple[int, ...]:
    """Most congested lines of a baseline year, by binding-hour count.

    ``flows`` and ``limits`` are (hours, lines) MW arrays from a conventional
    run. Ties go to the larger total |flow|, then the lower line index.
    """
    flows = np.abs(np.asarray(flows, dtype=float))
    limits = np.asarray(limits, dtype=float)
    if flows.shape != limits.shape:
        raise CriteriaError("flows and limits must have the same shape")
    binding = (flows >= limits - rel_tol * np.maximum(1.0, limits)).sum(axis=0)
    total = flows.sum(axis=0)
    n_lines = flows.shape[1]
    order = sorted(range(n_lines), key=lambda i: (-binding[i], -total[i], i))
    return tuple(sorted(order[: dlr_subset_size(n_lines, fraction)]))


def write_criteria_csv(criteria: TemperatureCriteria, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["month", "temp_c", "policy"])
        for month in range(1, 13):
            writer.writerow([month, repr(criteria.month(month)), criteria.policy.value])


def read_criteria_csv(path) -> TemperatureCriteria:
    with Path(path).open(newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != 12:
        raise CriteriaError(f"{path}: expected 12 rows, found {len(rows)}")
    rows.sort(key=lambda r: int(r["month"]))
    if [int(r["month"]) for r in rows] != list(range(1, 13)):
        raise CriteriaError(f"{path}: months must be 1-12")
    policies = {r["policy"] for r in rows}
    if len(policies) != 1:
        raise CriteriaError(f"{path}: mixed policies {sorted(policies)}")
    return TemperatureCriteria(
        tuple(float(r["temp_c"]) for r in rows), Policy.parse(policies.pop()), str(path)
    )


def write_schedule_csv(schedule: RatingSchedule, path, line_ids: Sequence | None = None) -> None:
    line_ids = list(line_ids) if line_ids is not None else list(range(1, schedule.n_lines + 1))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["line", "hour", "mw"])
        for i, line in enumerate(line_ids):
            for h, value in enumerate(schedule.limits[i]):
                writer.writerow([line, h, repr(float(value))])
