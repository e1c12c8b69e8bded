"""Hourly weather ingestion and historical temperature analytics."""

from __future__ import annotations

import calendar
import csv
import io
import math
import warnings
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

__all__ = [
    "CsvSchema",
    "LoadSummary",
    "MonthlyMax",
    "MonthlyMaxTable",
    "WeatherFormatError",
    "WeatherPoint",
    "WeatherSeries",
    "annual_maxima",
    "load_weather_csv",
    "monthly_maxima",
    "moving_average",
    "pivot_monthly_max",
    "read_pivot_csv",
    "trend_table",
    "write_trend_csv",
]

HOUR = np.timedelta64(1, "h")


class WeatherFormatError(ValueError):
    pass


class WeatherPoint(NamedTuple):
    timestamp: datetime
    air_temp: float
    wind_speed: float | None = None


class WeatherSeries:
    """Immutable hourly series, stored column-wise.

    ``wind`` holds NaN where the source had no wind reading.
    """

    def __init__(self, times, temps, wind=None, station: str = ""):
        times = np.asarray(times, dtype="datetime64[h]")
        temps = np.asarray(temps, dtype=float)
        wind = np.full(len(temps), np.nan) if wind is None else np.asarray(wind, dtype=float)
        if not (len(times) == len(temps) == len(wind)):
            raise ValueError("times, temps and wind must have equal length")
        if len(times) > 1 and not np.all(np.diff(times) > np.timedelta64(0, "h")):
            raise ValueError("timestamps must be strictly increasing")
        if np.any((temps < -90) | (temps > 90)):
            raise ValueError("air temperature outside [-90, 90] degC")
        if np.any(wind[~np.isnan(wind)] < 0):
            raise ValueError("wind speed must be >= 0")
        for arr in (times, temps, wind):
            arr.setflags(write=False)
        self.times = times
        self.temps = temps
        self.wind = wind
        self.station = station

    @classmethod
    def from_points(cls, points: Iterable[WeatherPoint], station: str = "") -> "WeatherSeries":
        points = list(points)
        times = [np.datetime64(p.timestamp, "h") for p in points]
        temps = [p.air_temp for p in points]
        wind = [np.nan if p.wind_speed is None else p.wind_speed for p in points]
        return cls(times, temps, wind, station)

    def __len__(self) -> int:
        return len(self.temps)

    def __getitem__(self, i: int) -> WeatherPoint:
        wind = self.wind[i]
        return WeatherPoint(
            self.times[i].astype(datetime),
            float(self.temps[i]),
            None if math.isnan(wind) else float(wind),
        )

    def __iter__(self) -> Iterator[WeatherPoint]:
        return (self[i] for i in range(len(self)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeatherSeries):
            return NotImplemented
        return (
            np.array_equal(self.times, other.times)
            and np.array_equal(self.temps, other.temps)
            and np.array_equal(self.wind, other.wind, equal_nan=True)
        )

    @property
    def years(self) -> np.ndarray:
        return self.times.astype("datetime64[Y]").astype(int) + 1970

    @property
    def months(self) -> np.ndarray:
        return self.times.astype("datetime64[M]").astype(int) % 12 + 1

    def select_year(self, year: int) -> "WeatherSeries":
        mask = self.years == year
        return WeatherSeries(self.times[mask], self.temps[mask], self.wind[mask], self.station)

    def gaps(self) -> np.ndarray:
        """Length in hours of every hole between consecutive readings."""
        if len(self) < 2:
            return np.zeros(0, dtype=int)
        steps = np.diff(self.times).astype(int)
        return steps[steps > 1] - 1


@dataclass(frozen=True)
class CsvSchema:
    """Column layout of an hourly weather export.

    Defaults match ``timestamp,air_temp[,wind_speed]`` with ISO-like
    ``YYYY-MM-DD HH:MM`` stamps. KMA ASOS exports, for instance, use
    ``CsvSchema("일시", "기온(°C)", "풍속(m/s)")``.
    """

    time_column: str = "timestamp"
    temp_column: str = "air_temp"
    wind_column: str | None = "wind_speed"
    time_format: str = "%Y-%m-%d %H:%M"
    station: str = ""
    encoding: str = "utf-8-sig"


@dataclass(frozen=True)
class LoadSummary:
    rows: int
    gap_count: int
    longest_gap_hours: int
    reordered: bool


def _parse_float(text: str, row: int, column: str) -> float | None:
    text = text.strip()
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        raise WeatherFormatError(f"row {row}: cannot parse {column}={text!r} as a number") from None


def load_weather_csv(path, schema: CsvSchema = CsvSchema()) -> tuple[WeatherSeries, LoadSummary]:
    """Read an hourly weather CSV into a sorted series.

    Row numbers in errors count the header as row 1. Rows with an empty
    temperature are an error; an empty wind cell becomes "no reading".
    """
    path = Path(path)
    with path.open(newline="", encoding=schema.encoding) as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (schema.time_column, schema.temp_column):
            if col not in header:
                raise WeatherFormatError(f"{path}: missing column {col!r} (have {header})")
        wind_col = schema.wind_column if schema.wind_column in header else None

        stamps, temps, winds, rows = [], [], [], []
        for row_no, record in enumerate(reader, start=2):
            raw_time = (record.get(schema.time_column) or "").strip()
            try:
                stamp = datetime.strptime(raw_time, schema.time_format)
            except ValueError:
                raise WeatherFormatError(
                    f"row {row_no}: cannot parse timestamp {raw_time!r} with {schema.time_format!r}"
                ) from None
            if stamp.minute or stamp.second:
                raise WeatherFormatError(f"row {row_no}: timestamp {raw_time!r} is not on the hour")
            temp = _parse_float(record.get(schema.temp_column) or "", row_no, schema.temp_column)
            if temp is None:
                raise WeatherFormatError(f"row {row_no}: empty {schema.temp_column}")
            wind = None
            if wind_col is not None:
                wind = _parse_float(record.get(wind_col) or "", row_no, wind_col)
            stamps.append(stamp)
            temps.append(temp)
            winds.append(np.nan if wind is None else wind)
            rows.append(row_no)

    times = np.array(stamps, dtype="datetime64[h]")
    order = np.argsort(times, kind="stable")
    sorted_times = times[order]
    if len(sorted_times) > 1:
        dup = np.flatnonzero(np.diff(sorted_times) == np.timedelta64(0, "h"))
        if dup.size:
            first, second = rows[order[dup[0]]], rows[order[dup[0] + 1]]
            raise WeatherFormatError(
                f"{path}: duplicate timestamp {sorted_times[dup[0]]} at rows {first} and {second}"
            )
    series = WeatherSeries(
        sorted_times,
        np.asarray(temps)[order],
        np.asarray(winds)[order],
        schema.station or path.stem,
    )
    gaps = series.gaps()
    summary = LoadSummary(
        rows=len(series),
        gap_count=int(gaps.size),
        longest_gap_hours=int(gaps.max()) if gaps.size else 0,
        reordered=bool(np.any(order != np.arange(len(order)))),
    )
    return series, summary


def write_weather_csv(series: WeatherSeries, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp", "air_temp", "wind_speed"])
        stamps = np.datetime_as_string(series.times, unit="m")
        for stamp, temp, wind in zip(stamps, series.temps, series.wind):
            writer.writerow([stamp.replace("T", " "), repr(float(temp)), "" if math.isnan(wind) else repr(float(wind))])


class MonthlyMax(NamedTuple):
    value: float
    hours: int
    complete: bool


class MonthlyMaxTable(dict):
    """``(year, month) -> MonthlyMax``; keys kept in calendar order."""

    def value(self, year: int, month: int) -> float:
        return self[(year, month)].value

    def years(self) -> list[int]:
        return sorted({y for y, _ in self})

    def month_values(self, month: int, complete_only: bool = True) -> list[tuple[int, float]]:
        return [
            (y, entry.value)
            for (y, m), entry in sorted(self.items())
            if m == month and (entry.complete or not complete_only)
        ]


def monthly_maxima(series: WeatherSeries, min_coverage: float = 0.9) -> MonthlyMaxTable:
    """Per (year, month) maximum hourly temperature.

    A month is flagged complete when at least ``min_coverage`` of its
    calendar hours are present.
    """
    if len(series) == 0:
        raise ValueError("monthly_maxima needs a nonempty series")
    years, months = series.years, series.months
    key = years * 12 + (months - 1)
    # series is sorted so each (year, month) is one contiguous run
    starts = np.flatnonzero(np.r_[True, np.diff(key) != 0])
    maxima = np.maximum.reduceat(series.temps, starts)
    counts = np.diff(np.r_[starts, len(key)])
    table = MonthlyMaxTable()
    for start, peak, count in zip(starts, maxima, counts):
        year, month = int(years[start]), int(months[start])
        hours_in_month = 24 * calendar.monthrange(year, month)[1]
        table[(year, month)] = MonthlyMax(float(peak), int(count), count >= min_coverage * hours_in_month)
    return table


def annual_maxima(table: MonthlyMaxTable, complete_only: bool = False) -> list[tuple[int, float]]:
    out: dict[int, float] = {}
    for (year, _), entry in sorted(table.items()):
        if complete_only and not entry.complete:
            continue
        out[year] = max(out.get(year, -math.inf), entry.value)
    return sorted(out.items())


def moving_average(annual_values: Sequence[tuple[int, float]], window: int) -> list[tuple[int, float]]:
    """Trailing mean over ``window`` consecutive entries, labelled by the last year."""
    if window < 1:
        raise ValueError("window must be >= 1")
    years = [y for y, _ in annual_values]
    if any(b <= a for a, b in zip(years, years[1:])):
        raise ValueError("annual values must be sorted by year")
    if window > len(annual_values):
        warnings.warn(
            f"window {window} exceeds series length {len(annual_values)}; no averages produced",
            stacklevel=2,
        )
        return []
    values = np.array([v for _, v in annual_values], dtype=float)
    sums = np.convolve(values, np.ones(window), mode="valid")
    return [(years[i + window - 1], float(s / window)) for i, s in enumerate(sums)]


def trend_table(table: MonthlyMaxTable, windows: Sequence[int] = (3, 5, 10)) -> list[dict]:
    """Rows of (year, annual max, MA per window); missing averages are None."""
    annual = annual_maxima(table)
    rows = [{"year": y, "annual_max": v} for y, v in annual]
    for window in windows:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            averaged = dict(moving_average(annual, window))
        for row in rows:
            row[f"ma{window}"] = averaged.get(row["year"])
    return rows


def write_trend_csv(table: MonthlyMaxTable, path, windows: Sequence[int] = (3, 5, 10)) -> None:
    rows = trend_table(table, windows)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["year", "annual_max"] + [f"ma{w}" for w in windows])
        for row in rows:
            writer.writerow(
                [row["year"], repr(row["annual_max"])]
                + ["" if row[f"ma{w}"] is None else repr(row[f"ma{w}"]) for w in windows]
            )


def pivot_monthly_max(table: MonthlyMaxTable) -> str:
    """Years x 12 months CSV text; missing months are empty cells.

    Incomplete months are written like complete ones; the pivot carries values only.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["year"] + [str(m) for m in range(1, 13)])
    for year in table.years():
        cells = []
        for month in range(1, 13):
            entry = table.get((year, month))
            cells.append("" if entry is None else repr(entry.value))
        writer.writerow([year] + cells)
    return buf.getvalue()


def read_pivot_csv(source) -> MonthlyMaxTable:
    """Parse a pivot produced by :func:`pivot_monthly_max` (path or CSV text)."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        text = Path(source).read_text(encoding="utf-8-sig")
    else:
        text = source
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header[:1] != ["year"] or [int(h) for h in header[1:]] != list(range(1, 13)):
        raise WeatherFormatError(f"unexpected pivot header {header}")
    table = MonthlyMaxTable()
    for row_no, row in enumerate(reader, start=2):
        if not row:
            continue
        year = int(row[0])
        for month, cell in enumerate(row[1:13], start=1):
            if cell.strip() == "":
                continue
            try:
                value = float(cell)
            except ValueError:
                raise WeatherFormatError(f"row {row_no}: bad value {cell!r} for month {month}") from None
            hours = 24 * calendar.monthrange(year, month)[1]
            table[(year, month)] = MonthlyMax(value, hours, True)
    return table
