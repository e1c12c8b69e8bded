"""Year-long policy comparison: 365 daily dispatch problems per rating policy."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import svg
from .criteria import (
    HOURS_PER_YEAR,
    Policy,
    RatingSchedule,
    TemperatureCriteria,
    build_schedule,
    criteria_for,
    month_of_hour,
    select_dlr_lines,
    year_weather_8760,
)
from .network import NetworkCase
from .opf import DEFAULT_SEGMENTS, DEFAULT_VOLL, DayProblem, DayResult, DispatchError, DispatchModel, solve_day
from .thermal import ConductorSpec
from .weather import WeatherSeries

__all__ = [
    "CostReport",
    "DemandProfile",
    "PolicyFragment",
    "ReportError",
    "SimulationError",
    "YearResult",
    "YearRunConfig",
    "compare_policies",
    "emit_reports",
    "read_reports",
    "run_policies",
    "run_year",
]

log = logging.getLogger(__name__)

DAYS = 365
MONTH_NAMES = ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"]
REPORT_FILES = ("monthly_costs.csv", "normalized.csv", "annual.csv", "shed.csv")
BINDING_TOL = 1e-6


class SimulationError(RuntimeError):
    pass


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class DemandProfile:
    """Hourly multipliers on every bus's base load for a non-leap year."""

    ratios: np.ndarray

    def __post_init__(self):
        ratios = np.asarray(self.ratios, dtype=float)
        if ratios.shape != (HOURS_PER_YEAR,):
            raise ValueError(f"demand profile needs {HOURS_PER_YEAR} hourly ratios, got {ratios.shape}")
        if np.any(ratios < 0) or not np.all(np.isfinite(ratios)):
            raise ValueError("demand ratios must be finite and nonnegative")
        ratios.setflags(write=False)
        object.__setattr__(self, "ratios", ratios)

    @classmethod
    def constant(cls, value: float = 1.0) -> "DemandProfile":
        return cls(np.full(HOURS_PER_YEAR, float(value)))

    @classmethod
    def from_csv(cls, path) -> "DemandProfile":
        """Read ``hour,ratio`` rows (hour 0-8759, any order)."""
        ratios = np.full(HOURS_PER_YEAR, np.nan)
        with Path(path).open(newline="", encoding="utf-8-sig") as fh:
            for row_no, row in enumerate(csv.DictReader(fh), start=2):
                try:
                    hour, value = int(row["hour"]), float(row["ratio"])
                except (KeyError, TypeError, ValueError):
                    raise ValueError(f"{path}: row {row_no} needs integer 'hour' and numeric 'ratio'") from None
                if not 0 <= hour < HOURS_PER_YEAR:
                    raise ValueError(f"{path}: row {row_no} hour {hour} outside 0-{HOURS_PER_YEAR - 1}")
                if not math.isnan(ratios[hour]):
                    raise ValueError(f"{path}: hour {hour} appears twice")
                ratios[hour] = value
        missing = np.flatnonzero(np.isnan(ratios))
        if missing.size:
            raise ValueError(f"{path}: {missing.size} hours missing, first is {missing[0]}")
        return cls(ratios)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["hour", "ratio"])
            for h, r in enumerate(self.ratios):
                writer.writerow([h, repr(float(r))])


def _digest(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()


@dataclass
class YearRunConfig:
    case: NetworkCase
    conductor: ConductorSpec
    weather: WeatherSeries
    demand: DemandProfile
    monthly_criteria: TemperatureCriteria | None = None
    voll: float = DEFAULT_VOLL
    dlr_fraction: float = 0.10
    segments: int = DEFAULT_SEGMENTS
    wind_speed: float = 0.5
    effective_solar: float = 1000.0

    def __post_init__(self):
        self.weather = year_weather_8760(self.weather)
        if not 0 < self.dlr_fraction <= 1:
            raise ValueError("dlr_fraction must lie in (0, 1]")

    def fingerprint(self) -> str:
        c = self.conductor
        payload = {
            "case": self.case.fingerprint(),
            "conductor": [c.outside_diameter, c.ac_resistance, c.emissivity, c.absorptivity, c.max_surface_temp, c.elevation],
            "weather": [str(self.weather.times[0]), _digest(self.weather.temps)],
            "demand": _digest(self.demand.ratios),
            "monthly_criteria": None if self.monthly_criteria is None else list(self.monthly_criteria.temps),
            "voll": self.voll,
            "dlr_fraction": self.dlr_fraction,
            "segments": self.segments,
            "wind_speed": self.wind_speed,
            "effective_solar": self.effective_solar,
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def demand_matrix(self) -> np.ndarray:
        """(8760, buses) MW."""
        return np.outer(self.demand.ratios, self.case.load_vector())


@dataclass
class PolicyFragment:
    policy: Policy
    config_hash: str
    day_costs: np.ndarray
    monthly_shed: np.ndarray  # MWh
    monthly_binding: np.ndarray  # binding line-hours
    dlr_lines: tuple[int, ...] = ()

    @property
    def monthly_cost(self) -> np.ndarray:
        months = month_of_hour(np.arange(DAYS) * 24)
        return np.array([math.fsum(self.day_costs[months == m]) for m in range(1, 13)])

    @property
    def annual_cost(self) -> float:
        return math.fsum(self.day_costs)

    def to_json(self) -> str:
        return json.dumps(
            {
                "policy": self.policy.value,
                "config_hash": self.config_hash,
                "day_costs": [float(v) for v in self.day_costs],
                "monthly_shed": [float(v) for v in self.monthly_shed],
                "monthly_binding": [int(v) for v in self.monthly_binding],
                "dlr_lines": list(self.dlr_lines),
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "PolicyFragment":
        data = json.loads(text)
        return cls(
            Policy.parse(data["policy"]),
            data["config_hash"],
            np.array(data["day_costs"], dtype=float),
            np.array(data["monthly_shed"], dtype=float),
            np.array(data["monthly_binding"], dtype=int),
            tuple(data["dlr_lines"]),
        )


@dataclass
class YearResult:
    policy: Policy
    schedule: RatingSchedule
    days: list[DayResult]
    fragment: PolicyFragment

    @property
    def flows(self) -> np.ndarray:
        return np.concatenate([d.flows for d in self.days])

    @property
    def limits(self) -> np.ndarray:
        return np.concatenate([d.limits for d in self.days])

    @property
    def shed(self) -> np.ndarray:
        return np.concatenate([d.shed for d in self.days])

    @property
    def hourly_costs(self) -> np.ndarray:
        return np.concatenate([d.costs for d in self.days])


def _solve_chunk(case, voll, segments, first_day, demand, limits) -> list[DayResult]:
    model = DispatchModel(case, voll, segments)
    out = []
    for k in range(demand.shape[0] // 24):
        sl = slice(24 * k, 24 * (k + 1))
        try:
            out.append(solve_day(model, DayProblem(demand[sl], limits[sl])))
        except DispatchError as exc:
            raise SimulationError(f"day {first_day + k}: {exc}") from exc
    return out


def _day_path(checkpoint_dir: Path, policy: Policy, day: int) -> Path:
    return checkpoint_dir / policy.value / f"day_{day:03d}.npz"


def _save_day(path: Path, day: DayResult, config_hash: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp.npz")
    np.savez(
        tmp, config_hash=np.array(config_hash), generation=day.generation, angles=day.angles, flows=day.flows,
        shed=day.shed, costs=day.costs, demand=day.demand, limits=day.limits,
    )
    os.replace(tmp, path)


def _load_day(path: Path, config_hash: str) -> DayResult | None:
    try:
        with np.load(path) as data:
            if str(data["config_hash"]) != config_hash:
                return None
            return DayResult(
                data["generation"], data["angles"], data["flows"], data["shed"],
                data["costs"], data["demand"], data["limits"],
            )
    except (OSError, KeyError, ValueError):
        return None


def schedule_for(config: YearRunConfig, policy: Policy, dlr_lines: Sequence[int] = ()) -> RatingSchedule:
    criteria = criteria_for(policy, config.monthly_criteria)
    return build_schedule(
        config.case.base_limits,
        criteria,
        config.conductor,
        year_weather=config.weather if policy is Policy.DYNAMIC_SUBSET else None,
        dlr_lines=dlr_lines if policy is Policy.DYNAMIC_SUBSET else None,
        wind_speed=config.wind_speed,
        effective_solar=config.effective_solar,
    )


def run_year(
    config: YearRunConfig,
    policy: Policy,
    baseline: YearResult | None = None,
    jobs: int = 1,
    checkpoint_dir=None,
    progress: Callable[[Policy, int], None] | None = None,
) -> YearResult:
    """Dispatch the 365 days of one policy.

    The dynamic-subset policy needs ``baseline``, a conventional run whose
    congestion picks the DLR lines. With ``checkpoint_dir`` every solved day
    is stored and reused on the next call with the same configuration.
    """
    dlr_lines: tuple[int, ...] = ()
    if policy is Policy.DYNAMIC_SUBSET:
        if baseline is None or baseline.policy is not Policy.CONVENTIONAL:
            raise SimulationError("the dynamic-subset policy needs a conventional baseline run")
        dlr_lines = select_dlr_lines(baseline.flows, baseline.limits, config.dlr_fraction, BINDING_TOL)
    schedule = schedule_for(config, policy, dlr_lines)
    config_hash = config.fingerprint()
    demand = config.demand_matrix()
    limits = schedule.limits.T  # (8760, lines)

    days: list[DayResult | None] = [None] * DAYS
    ckpt = Path(checkpoint_dir) if checkpoint_dir is not None else None
    tag = f"{config_hash}:{policy.value}:{','.join(map(str, dlr_lines))}"
    if ckpt is not None:
        for d in range(DAYS):
            path = _day_path(ckpt, policy, d)
            if path.exists():
                days[d] = _load_day(path, tag)
        resumed = sum(r is not None for r in days)
        if resumed:
            log.info("%s: resumed %d days from %s", policy.value, resumed, ckpt)

    todo = [d for d in range(DAYS) if days[d] is None]
    # contiguous runs of unsolved days
    runs: list[list[int]] = []
    for d in todo:
        if runs and runs[-1][-1] == d - 1 and len(runs[-1]) < max(1, math.ceil(DAYS / max(jobs, 1) / 4)):
            runs[-1].append(d)
        else:
            runs.append([d])

    def chunk_args(run):
        sl = slice(24 * run[0], 24 * (run[-1] + 1))
        return config.case, config.voll, config.segments, run[0], demand[sl], limits[sl]

    def store(run, solved):
        for d, day in zip(run, solved):
            days[d] = day
            if ckpt is not None:
                _save_day(_day_path(ckpt, policy, d), day, tag)
            if progress is not None:
                progress(policy, d)

    if jobs > 1 and len(runs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [(run, pool.submit(_solve_chunk, *chunk_args(run))) for run in runs]
            for run, fut in futures:
                store(run, fut.result())
    else:
        for run in runs:
            store(run, _solve_chunk(*chunk_args(run)))

    fragment = _fragment(policy, config_hash, days, dlr_lines)
    return YearResult(policy, schedule, days, fragment)


def _fragment(policy, config_hash, days: list[DayResult], dlr_lines) -> PolicyFragment:
    day_costs = np.array([d.cost for d in days])
    months = month_of_hour(np.arange(DAYS) * 24)
    shed = np.array([d.shed.sum() for d in days])
    binding = np.array(
        [
            int(np.sum((np.abs(d.flows) >= d.limits - BINDING_TOL * np.maximum(1.0, d.limits)) & (d.limits > 0)))
            for d in days
        ]
    )
    monthly_shed = np.array([math.fsum(shed[months == m]) for m in range(1, 13)])
    monthly_binding = np.array([int(binding[months == m].sum()) for m in range(1, 13)])
    return PolicyFragment(policy, config_hash, day_costs, monthly_shed, monthly_binding, tuple(dlr_lines))


def run_policies(
    config: YearRunConfig,
    policies: Iterable[Policy],
    jobs: int = 1,
    checkpoint_dir=None,
    progress=None,
) -> dict[Policy, YearResult]:
    """Run every requested policy; the conventional baseline always runs first."""
    wanted = list(dict.fromkeys(policies))
    order = [Policy.CONVENTIONAL] + [p for p in wanted if p is not Policy.CONVENTIONAL]
    results: dict[Policy, YearResult] = {}
    for policy in order:
        log.info("running %s", policy.value)
        results[policy] = run_year(
            config, policy, baseline=results.get(Policy.CONVENTIONAL), jobs=jobs,
            checkpoint_dir=checkpoint_dir, progress=progress,
        )
    return results


@dataclass
class CostReport:
    """Monthly cost, shed energy and congestion per policy."""

    policies: list[str]
    monthly_cost: dict[str, np.ndarray]
    monthly_shed: dict[str, np.ndarray]
    monthly_binding: dict[str, np.ndarray]
    reference: str = Policy.CONVENTIONAL.value

    @property
    def annual_cost(self) -> dict[str, float]:
        return {p: math.fsum(self.monthly_cost[p]) for p in self.policies}

    @property
    def normalized(self) -> dict[str, np.ndarray]:
        ref = self.monthly_cost[self.reference]
        out = {}
        for p in self.policies:
            cost = self.monthly_cost[p]
            with np.errstate(divide="ignore", invalid="ignore"):
                out[p] = np.where(ref > 0, 100.0 * cost / ref, np.where(cost == ref, 100.0, np.inf))
        return out

    @property
    def normalized_annual(self) -> dict[str, float]:
        annual = self.annual_cost
        ref = annual[self.reference]
        return {p: (100.0 * v / ref if ref > 0 else 100.0) for p, v in annual.items()}

    @property
    def ranking(self) -> list[str]:
        annual = self.annual_cost
        return sorted(self.policies, key=lambda p: (annual[p], self.policies.index(p)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, CostReport):
            return NotImplemented
        return (
            self.policies == other.policies
            and self.reference == other.reference
            and all(
                np.array_equal(getattr(self, f)[p], getattr(other, f)[p])
                for f in ("monthly_cost", "monthly_shed", "monthly_binding")
                for p in self.policies
            )
        )


def compare_policies(fragments: Sequence[PolicyFragment]) -> CostReport:
    if not fragments:
        raise ReportError("no policy results to compare")
    hashes = {f.config_hash for f in fragments}
    if len(hashes) != 1:
        raise ReportError("policy results come from different run configurations")
    names = [f.policy.value for f in fragments]
    if len(set(names)) != len(names):
        raise ReportError(f"duplicate policies in {names}")
    if Policy.CONVENTIONAL.value not in names:
        raise ReportError("the conventional policy is the normalization reference and must be present")
    order = [p.value for p in Policy if p.value in names]
    by_name = {f.policy.value: f for f in fragments}
    return CostReport(
        order,
        {p: by_name[p].monthly_cost for p in order},
        {p: np.asarray(by_name[p].monthly_shed, dtype=float) for p in order},
        {p: np.asarray(by_name[p].monthly_binding, dtype=int) for p in order},
    )


def _fmt(value: float) -> str:
    return repr(float(value))


def emit_reports(report: CostReport, out_dir) -> list[Path]:
    """Write the report CSVs and charts; returns the written paths."""
    if not report.policies:
        raise ReportError("report has no policies")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"cannot create {out}: {exc}") from exc
    written = []

    def write(name: str, header: list[str], rows: list[list]) -> None:
        path = out / name
        try:
            with path.open("w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(header)
                writer.writerows(rows)
        except OSError as exc:
            raise ReportError(f"cannot write {path}: {exc}") from exc
        written.append(path)

    pols = report.policies
    write("monthly_costs.csv", ["month"] + pols,
          [[m + 1] + [_fmt(report.monthly_cost[p][m]) for p in pols] for m in range(12)])
    normalized = report.normalized
    write("normalized.csv", ["month"] + pols,
          [[m + 1] + [_fmt(normalized[p][m]) for p in pols] for m in range(12)])
    annual, norm_annual, ranking = report.annual_cost, report.normalized_annual, report.ranking
    write("annual.csv", ["policy", "annual_cost", "normalized", "rank"],
          [[p, _fmt(annual[p]), _fmt(norm_annual[p]), ranking.index(p) + 1] for p in pols])
    write("shed.csv", ["month", "policy", "shed_mwh", "binding_line_hours"],
          [[m + 1, p, _fmt(report.monthly_shed[p][m]), int(report.monthly_binding[p][m])]
           for m in range(12) for p in pols])

    charts = {
        "normalized.svg": svg.bar_chart(
            MONTH_NAMES, {p: list(normalized[p]) for p in pols},
            title="Monthly operating cost (conventional = 100)", ylabel="relative cost", reference=100.0,
        ),
        "annual.svg": svg.bar_chart(
            ["annual"], {p: [annual[p] / 1000.0] for p in pols},
            title="Annual operating cost", ylabel="cost (k$)",
        ),
    }
    for name, text in charts.items():
        path = out / name
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written


def read_reports(out_dir) -> CostReport:
    out = Path(out_dir)
    for name in ("monthly_costs.csv", "shed.csv"):
        if not (out / name).exists():
            raise ReportError(f"missing report file {out / name}")
    with (out / "monthly_costs.csv").open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    pols = rows[0][1:]
    if len(rows) != 13:
        raise ReportError("monthly_costs.csv must have 12 month rows")
    monthly = {p: np.array([float(r[i + 1]) for r in rows[1:]]) for i, p in enumerate(pols)}
    shed = {p: np.zeros(12) for p in pols}
    binding = {p: np.zeros(12, dtype=int) for p in pols}
    with (out / "shed.csv").open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            m = int(row["month"]) - 1
            shed[row["policy"]][m] = float(row["shed_mwh"])
            binding[row["policy"]][m] = int(row["binding_line_hours"])
    return CostReport(pols, monthly, shed, binding)
