"""End-to-end acceptance checks, one test per criterion.

Each test prints a one-line verdict; the terminal summary (see conftest)
lists every criterion as PASS or FAIL. The year-long runs are shared by
criteria 6-9 and take a few minutes on one core.
"""

import csv
import itertools
import json
import math
import statistics
import time
from pathlib import Path

import numpy as np
import pytest

from instances import SEGMENTS, random_instance
from linerating.cli import main
from linerating.config import RunSettings
from linerating.criteria import (
    SEASONAL,
    SEMIANNUAL,
    Policy,
    TemperatureCriteria,
    blockify,
    derive_monthly_criteria,
    read_criteria_csv,
)
from linerating.network import bundled_case, two_bus_case
from linerating.opf import DayResult, DispatchModel, solve_hour
from linerating.sim import DemandProfile, PolicyFragment, YearRunConfig, schedule_for
from linerating.thermal import (
    KEPCO_ACSR_480,
    AmbientConditions,
    NoThermalHeadroom,
    ampacity,
    convection_loss,
    convection_terms,
    radiation_loss,
    solar_gain,
)
from linerating.weather import MonthlyMax, MonthlyMaxTable, load_weather_csv

REPORT_CSVS = ("monthly_costs.csv", "normalized.csv", "annual.csv", "shed.csv", "criteria.csv")
ALL_POLICIES = [p.value for p in Policy]


def verdict(number: int, ok: bool, detail: str) -> None:
    print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")


# shared year-long runs -------------------------------------------------------


@pytest.fixture(scope="module")
def full_runs(tmp_path_factory):
    """Synthetic inputs and two identical 5-policy simulate runs on the 30-bus case."""
    root = tmp_path_factory.mktemp("acceptance")
    assert main(["synthesize", "--first-year", "1974", "--last-year", "2023", "--out", str(root / "inputs")]) == 0
    timings = []
    for name in ("run_a", "run_b"):
        start = time.perf_counter()
        code = main([
            "simulate", "--weather", str(root / "inputs" / "weather.csv"),
            "--demand", str(root / "inputs" / "demand.csv"), "--out", str(root / name),
        ])
        timings.append(time.perf_counter() - start)
        assert code == 0
    return root, timings


def rebuild_config(root: Path) -> YearRunConfig:
    settings = RunSettings()
    weather, _ = load_weather_csv(root / "inputs" / "weather.csv")
    return YearRunConfig(
        bundled_case("case30"), settings.conductor.spec(), weather.select_year(2023),
        DemandProfile.from_csv(root / "inputs" / "demand.csv"), read_criteria_csv(root / "run_a" / "criteria.csv"),
    )


def fragments(run: Path) -> dict[str, PolicyFragment]:
    return {p.stem: PolicyFragment.from_json(p.read_text()) for p in sorted((run / "fragments").glob("*.json"))}


# 1 -----------------------------------------------------------------------------


def test_criterion_1_reference_ampacity():
    amps = ampacity(KEPCO_ACSR_480, AmbientConditions(40.0, 0.5, effective_solar=1000.0))
    deviation = amps / 917.0 - 1.0
    ok = abs(deviation) <= 0.03
    verdict(1, ok, f"{amps:.2f} A vs 917 A ({100 * deviation:+.2f}%, tolerance 3%)")
    assert ok


# 2 -----------------------------------------------------------------------------


def test_criterion_2_thermal_properties():
    rng = np.random.default_rng(738)
    n = 10_000
    ta = rng.uniform(-30.0, 85.0, n)
    wind = rng.uniform(0.0, 20.0, n)
    solar = rng.uniform(0.0, 1200.0, n)
    dt, dv = 0.25, 0.1
    spec = KEPCO_ACSR_480
    heavier = spec.with_resistance(spec.ac_resistance * 2.5)
    counts = dict.fromkeys(["evaluated", "no_headroom", "temp", "wind", "max3", "resistance"], 0)

    start = time.perf_counter()
    for t, v, s in zip(ta, wind, solar):
        amb = AmbientConditions(float(t), float(v), effective_solar=float(s))
        terms = convection_terms(spec, amb)
        q_c, regime = convection_loss(spec, amb)
        assert q_c == max(terms.values()) and terms[regime] == q_c
        counts["max3"] += 1
        try:
            base = ampacity(spec, amb)
        except NoThermalHeadroom:
            counts["no_headroom"] += 1
            # warmer air cannot restore headroom
            with pytest.raises(NoThermalHeadroom):
                ampacity(spec, AmbientConditions(float(t) + dt, float(v), effective_solar=float(s)))
            continue
        counts["evaluated"] += 1
        net = q_c + radiation_loss(spec, amb.air_temp) - solar_gain(spec, amb)
        assert base == pytest.approx(math.sqrt(net / spec.ac_resistance), rel=1e-12)

        try:
            warmer = ampacity(spec, AmbientConditions(float(t) + dt, float(v), effective_solar=float(s)))
        except NoThermalHeadroom:
            warmer = -1.0
        assert warmer < base
        counts["temp"] += 1

        windier = ampacity(spec, AmbientConditions(float(t), float(v) + dv, effective_solar=float(s)))
        assert windier >= base * (1 - 1e-12)
        counts["wind"] += 1

        assert ampacity(heavier, amb) == pytest.approx(base / math.sqrt(2.5), rel=1e-12)
        counts["resistance"] += 1

    # surface temperature equals air temperature: every loss vanishes
    for v, s in zip(wind[:200], solar[:200]):
        amb = AmbientConditions(spec.max_surface_temp, float(v), effective_solar=0.0)
        assert all(q == 0.0 for q in convection_terms(spec, amb).values())
        assert radiation_loss(spec, spec.max_surface_temp) == 0.0
        assert ampacity(spec, amb) == 0.0
        if s > 0:
            with pytest.raises(NoThermalHeadroom):
                ampacity(spec, AmbientConditions(spec.max_surface_temp, float(v), effective_solar=float(s)))
    elapsed = time.perf_counter() - start

    ok = elapsed < 5.0 and counts["max3"] == n
    verdict(2, ok, f"{n} points in {elapsed:.2f} s; {counts}")
    assert elapsed < 5.0


# 3 -----------------------------------------------------------------------------

# Published monthly criteria and the block values that go with them (degC).
PUBLISHED_MONTHLY = (24.37, 32.0, 32.61, 36.95, 42.91, 40.25, 45.11, 44.65, 41.0, 34.87, 32.86, 26.22)
PUBLISHED_SEASONAL = (32.0, 32.0, 36.95, 36.95, 45.11, 45.11, 45.11, 45.11, 45.11, 36.95, 36.95, 32.0)
PUBLISHED_SEMIANNUAL = (36.95,) * 4 + (45.11,) * 6 + (36.95,) * 2


def planted_table(rng):
    """Each month holds x-a, x, x+a (binary-exact), so max = x+a and the sample sd is a."""
    table = MonthlyMaxTable()
    planted = []
    for month in range(1, 13):
        x = float(rng.integers(40, 180)) / 4.0
        a = float(rng.integers(1, 17)) / 4.0
        values = rng.permutation([x - a, x, x + a])
        years = rng.choice(np.arange(1980, 2020), size=5, replace=False)
        for year, value in zip(years[:3], values):
            table[(int(year), month)] = MonthlyMax(float(value), 744, True)
        # incomplete months must not count, however hot
        for year in years[3:]:
            table[(int(year), month)] = MonthlyMax(x + 50.0, 100, False)
        planted.append(x + a + 3.0 * a)
    return table, planted


def test_criterion_3_criteria_derivation():
    rng = np.random.default_rng(3)
    exact = 0
    for _ in range(200):
        table, planted = planted_table(rng)
        derived = derive_monthly_criteria(table).temps
        assert list(derived) == planted
        exact += 1

    # general data against the standard library's sample deviation
    for _ in range(100):
        table = MonthlyMaxTable()
        expected = []
        for month in range(1, 13):
            values = rng.normal(30.0, 4.0, int(rng.integers(2, 40)))
            for i, v in enumerate(values):
                table[(1950 + i, month)] = MonthlyMax(float(v), 720, True)
            expected.append(max(values) + 3.0 * statistics.stdev(values))
        assert derive_monthly_criteria(table).temps == pytest.approx(expected, rel=1e-12)

    # blocks: every month takes the maximum over the months sharing its block
    seasonal_groups = [{12, 1, 2}, {3, 4, 10, 11}, {5, 6, 7, 8, 9}]
    semiannual_groups = [{11, 12, 1, 2, 3, 4}, {5, 6, 7, 8, 9, 10}]
    for _ in range(300):
        monthly = TemperatureCriteria(tuple(rng.uniform(-10.0, 50.0, 12)), Policy.MONTHLY)
        for smap, groups in ((SEASONAL, seasonal_groups), (SEMIANNUAL, semiannual_groups)):
            blocked = blockify(monthly, smap).temps
            for group in groups:
                top = max(monthly.month(m) for m in group)
                assert all(blocked[m - 1] == top for m in group)

    published = TemperatureCriteria(PUBLISHED_MONTHLY, Policy.MONTHLY)
    seasonal = blockify(published, SEASONAL).temps
    semiannual = blockify(published, SEMIANNUAL).temps
    assert seasonal == PUBLISHED_SEASONAL
    assert semiannual == PUBLISHED_SEMIANNUAL
    assert seasonal[0] == seasonal[11] == PUBLISHED_MONTHLY[1]  # winter block = February
    assert semiannual[4] == PUBLISHED_MONTHLY[6]  # summer half = July
    verdict(3, True, f"{exact} planted datasets exact; published block structure reproduced")


# 4 -----------------------------------------------------------------------------


def test_criterion_4_lp_oracle_equivalence():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(500):
        case, loads, voll, oracle = random_instance(rng)
        ours = solve_hour(case, loads, case.base_limits, voll, SEGMENTS).cost
        ref = oracle()
        rel = abs(ours - ref) / max(abs(ref), 1e-12)
        worst = max(worst, rel)
        assert ours == pytest.approx(ref, rel=1e-6)
    elapsed = time.perf_counter() - start
    ok = elapsed < 60.0 and worst <= 1e-6
    verdict(4, ok, f"500 instances, worst relative gap {worst:.2e}, {elapsed:.1f} s")
    assert elapsed < 60.0


# 5 -----------------------------------------------------------------------------


def test_criterion_5_hand_solved_dispatch():
    free = solve_hour(two_bus_case(), [0.0, 50.0], [100.0], voll=9000.0).cost
    tight = solve_hour(two_bus_case(), [0.0, 50.0], [30.0], voll=9000.0).cost
    ok = round(free, 2) == 500.00 and round(tight, 2) == 180300.00
    verdict(5, ok, f"unconstrained ${free:,.2f}; 30 MW limit ${tight:,.2f}")
    assert round(free, 2) == 500.00
    assert round(tight, 2) == 180300.00


# 6 -----------------------------------------------------------------------------


def test_criterion_6_relaxation_dominance(full_runs):
    root, _ = full_runs
    config = rebuild_config(root)
    manifest = json.loads((root / "run_a" / "manifest.json").read_text())
    assert config.fingerprint() == manifest["config_hash"]
    frags = fragments(root / "run_a")
    schedules = {name: schedule_for(config, Policy.parse(name), f.dlr_lines).limits for name, f in frags.items()}

    ordered = []
    for a, b in itertools.permutations(frags, 2):
        if np.all(schedules[a] >= schedules[b]):
            ordered.append((a, b))
            cost_a, cost_b = frags[a].annual_cost, frags[b].annual_cost
            assert cost_a <= cost_b * (1 + 1e-9), f"{a} relaxes {b} but costs {cost_a} > {cost_b}"
    ok = len(ordered) >= 3
    verdict(6, ok, f"{len(ordered)} ordered pairs, all cost-ordered: " + ", ".join(f"{a}<={b}" for a, b in ordered))
    assert ok


# 7 -----------------------------------------------------------------------------


def test_criterion_7_monthly_cost_pattern(full_runs):
    root, _ = full_runs
    criteria = read_criteria_csv(root / "run_a" / "criteria.csv").temps
    with (root / "run_a" / "normalized.csv").open() as fh:
        normalized = [float(r["monthly"]) for r in csv.DictReader(fh)]
    below = [m for m in range(12) if criteria[m] < 40.0]
    above = [m for m in range(12) if criteria[m] > 40.0]
    assert below and above
    bad = [m + 1 for m in below if not normalized[m] < 100.0] + [m + 1 for m in above if not normalized[m] >= 100.0]
    detail = " ".join(f"{m + 1}:{criteria[m]:.1f}C->{normalized[m]:.2f}" for m in range(12))
    verdict(7, not bad, f"monthly normalized cost by month; violations {bad}; {detail}")
    assert not bad


# 8 -----------------------------------------------------------------------------


def test_criterion_8_balance_and_flow_residuals(full_runs):
    root, timings = full_runs
    case = bundled_case("case30")
    model = DispatchModel(case)
    worst_balance = worst_flow = 0.0
    hours = 0
    for policy in ALL_POLICIES:
        for day in range(365):
            with np.load(root / "run_a" / "checkpoints" / policy / f"day_{day:03d}.npz") as data:
                result = DayResult(*(data[k] for k in ("generation", "angles", "flows", "shed", "costs", "demand", "limits")))
            for hour in result.hours:
                worst_balance = max(worst_balance, model.balance_residual(hour))
                worst_flow = max(worst_flow, model.flow_residual(hour) / case.base_mva)
                hours += 1
    ok = hours == 8760 * 5 and worst_balance <= 1e-6 and worst_flow <= 1e-6 and max(timings) < 600.0
    verdict(
        8, ok,
        f"{hours} hours; max balance residual {worst_balance:.2e} pu, max flow residual {worst_flow:.2e} pu; "
        f"run times {', '.join(f'{t:.0f} s' for t in timings)}",
    )
    assert hours == 8760 * 5
    assert worst_balance <= 1e-6
    assert worst_flow <= 1e-6
    assert max(timings) < 600.0


# 9 -----------------------------------------------------------------------------


def test_criterion_9_determinism(full_runs):
    root, _ = full_runs
    names = list(REPORT_CSVS) + ["manifest.json"] + [f"fragments/{p}.json" for p in ALL_POLICIES]
    differing = [n for n in names if (root / "run_a" / n).read_bytes() != (root / "run_b" / n).read_bytes()]
    verdict(9, not differing, f"{len(names)} files compared byte for byte; differing: {differing or 'none'}")
    assert not differing
