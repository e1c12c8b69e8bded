import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from linerating.criteria import (
    HOURS_PER_YEAR,
    SEASONAL,
    SEMIANNUAL,
    CriteriaError,
    Policy,
    TemperatureCriteria,
    blockify,
    build_schedule,
    capacity_ratio,
    conventional_criteria,
    criteria_for,
    derive_monthly_criteria,
    dlr_subset_size,
    exceedance_probability,
    month_of_hour,
    read_criteria_csv,
    select_dlr_lines,
    write_criteria_csv,
    write_schedule_csv,
    year_weather_8760,
)
from linerating.thermal import KEPCO_ACSR_480, ThermalDomainError
from linerating.weather import MonthlyMax, MonthlyMaxTable, WeatherSeries
from oracles import oracle_ampacity

# Monthly column of the published criteria table (degC).
PUBLISHED_MONTHLY = (24.37, 32.0, 32.61, 36.95, 42.91, 40.25, 45.11, 44.65, 41.0, 34.87, 32.86, 26.22)
PUBLISHED_SEASONAL = (32, 32, 36.95, 36.95, 45.11, 45.11, 45.11, 45.11, 45.11, 36.95, 36.95, 32)
PUBLISHED_SEMIANNUAL = (36.95,) * 4 + (45.11,) * 6 + (36.95,) * 2


def table_from(per_month: dict[int, list[float]], first_year=2000) -> MonthlyMaxTable:
    table = MonthlyMaxTable()
    for month, values in per_month.items():
        for i, v in enumerate(values):
            table[(first_year + i, month)] = MonthlyMax(v, 720, True)
    return table


def year_series(temps, year=2023):
    times = np.arange(f"{year}-01-01T00", f"{year + 1}-01-01T00", dtype="datetime64[h]")
    return WeatherSeries(times, np.broadcast_to(np.asarray(temps, dtype=float), times.shape))


def test_month_of_hour_calendar():
    months = month_of_hour()
    assert len(months) == HOURS_PER_YEAR
    assert month_of_hour(0) == 1 and month_of_hour(HOURS_PER_YEAR - 1) == 12
    assert month_of_hour(31 * 24 - 1) == 1 and month_of_hour(31 * 24) == 2
    assert np.sum(months == 2) == 28 * 24


def test_zero_spread_gives_the_maximum():
    crit = derive_monthly_criteria(table_from({m: [30.0, 30.0, 30.0] for m in range(1, 13)}))
    assert crit.temps == (30.0,) * 12
    assert crit.policy is Policy.MONTHLY


def test_sample_sigma_example():
    crit = derive_monthly_criteria(table_from({m: [28.0, 30.0, 32.0] for m in range(1, 13)}))
    assert crit.month(7) == 38.0


@given(
    st.lists(st.floats(-10, 40), min_size=2, max_size=60),
    st.floats(0.0, 5.0),
)
def test_planted_max_plus_three_sigma(values, shift):
    per_month = {m: [v + shift * m for v in values] for m in range(1, 13)}
    crit = derive_monthly_criteria(table_from(per_month))
    for m in range(1, 13):
        arr = np.array(per_month[m])
        assert crit.month(m) == arr.max() + 3 * arr.std(ddof=1)


def test_incomplete_months_are_excluded():
    table = table_from({m: [20.0, 22.0] for m in range(1, 13)})
    table[(2002, 7)] = MonthlyMax(99.0, 100, False)
    assert derive_monthly_criteria(table).month(7) == pytest.approx(22 + 3 * math.sqrt(2))


def test_too_few_years_names_the_month():
    per_month = {m: [20.0, 22.0] for m in range(1, 13)}
    per_month[4] = [20.0]
    with pytest.raises(CriteriaError, match="month 4"):
        derive_monthly_criteria(table_from(per_month))


def test_blocks_reproduce_published_structure():
    monthly = TemperatureCriteria(PUBLISHED_MONTHLY, Policy.MONTHLY)
    seasonal = blockify(monthly, SEASONAL)
    semiannual = blockify(monthly, SEMIANNUAL)
    assert seasonal.temps == pytest.approx(PUBLISHED_SEASONAL)
    assert semiannual.temps == pytest.approx(PUBLISHED_SEMIANNUAL)
    # winter equals February, the semi-annual summer equals July
    assert seasonal.month(1) == monthly.month(2)
    assert semiannual.month(6) == monthly.month(7)


@given(st.lists(st.floats(-10, 60), min_size=12, max_size=12))
def test_block_values_are_member_maxima(temps):
    monthly = TemperatureCriteria(tuple(temps), Policy.MONTHLY)
    for smap in (SEASONAL, SEMIANNUAL):
        blocked = blockify(monthly, smap)
        for m in range(1, 13):
            members = smap.members(smap.blocks[m])
            assert blocked.month(m) == max(monthly.month(k) for k in members)
            assert blocked.month(m) >= monthly.month(m)


def test_blockify_identity_on_constant():
    monthly = TemperatureCriteria((33.0,) * 12, Policy.MONTHLY)
    assert blockify(monthly, SEASONAL).temps == monthly.temps


def test_criteria_invariants():
    with pytest.raises(CriteriaError):
        TemperatureCriteria((39.0,) * 12, Policy.CONVENTIONAL)
    with pytest.raises(CriteriaError):
        TemperatureCriteria((30.0,) * 11 + (31.0,), Policy.SEASONAL)
    with pytest.raises(CriteriaError):
        TemperatureCriteria((30.0,) * 11, Policy.MONTHLY)
    with pytest.raises(CriteriaError):
        criteria_for(Policy.MONTHLY, None)


def test_capacity_ratio_values():
    assert capacity_ratio(KEPCO_ACSR_480, 40.0) == 1.0
    assert capacity_ratio(KEPCO_ACSR_480, 24.37) > 1.0
    expected = oracle_ampacity(45.11, 0.5) / oracle_ampacity(40.0, 0.5)
    assert capacity_ratio(KEPCO_ACSR_480, 45.11) == pytest.approx(expected, rel=1e-12)
    assert expected < 1.0
    with pytest.raises(ThermalDomainError):
        capacity_ratio(KEPCO_ACSR_480, 95.0)


@given(st.floats(-20, 60), st.floats(0.1, 20))
def test_capacity_ratio_monotone(t, dt):
    assert capacity_ratio(KEPCO_ACSR_480, t + dt) < capacity_ratio(KEPCO_ACSR_480, t)


def test_exceedance_examples():
    values = [28.0, 30.0, 32.0]
    table = table_from({m: values for m in range(1, 13)})
    mu, sigma = 30.0, 2.0
    assert exceedance_probability(table, 5, mu) == pytest.approx(0.5)
    assert exceedance_probability(table, 5, mu + 3 * sigma) == pytest.approx(0.0013498980316301, rel=1e-9)
    flat = table_from({m: [30.0, 30.0] for m in range(1, 13)})
    assert exceedance_probability(flat, 1, 30.0) == 0.0
    assert exceedance_probability(flat, 1, 29.0) == 1.0


def test_exceedance_against_monte_carlo():
    rng = np.random.default_rng(11)
    sample = rng.normal(30.0, 2.0, 500)
    table = table_from({m: list(sample) for m in range(1, 13)})
    mu, sd = sample.mean(), sample.std(ddof=1)
    draws = rng.normal(mu, sd, 1_000_000)
    mc = np.mean(draws > 36.0)
    # binomial standard error at p ~ 1e-3 over 1e6 draws is ~4e-5
    assert exceedance_probability(table, 3, 36.0) == pytest.approx(mc, abs=2e-4)


def test_conventional_schedule_is_constant_base():
    base = np.array([100.0, 50.0, 75.0])
    schedule = build_schedule(base, conventional_criteria(), KEPCO_ACSR_480)
    assert schedule.limits.shape == (3, HOURS_PER_YEAR)
    assert np.all(schedule.limits == base[:, None])
    assert np.all(schedule.limits > 0)


def test_monthly_schedule_uses_month_ratio():
    monthly = TemperatureCriteria(PUBLISHED_MONTHLY, Policy.MONTHLY)
    schedule = build_schedule([100.0], monthly, KEPCO_ACSR_480)
    months = month_of_hour()
    jan = schedule.limits[0, months == 1]
    assert np.all(jan == jan[0])
    assert jan[0] == pytest.approx(100 * capacity_ratio(KEPCO_ACSR_480, 24.37), rel=1e-12)
    for m in range(1, 13):
        assert len(set(schedule.limits[0, months == m])) == 1


def test_non_dlr_schedules_ignore_weather():
    monthly = TemperatureCriteria(PUBLISHED_MONTHLY, Policy.MONTHLY)
    a = build_schedule([100.0, 80.0], monthly, KEPCO_ACSR_480)
    b = build_schedule([100.0, 80.0], monthly, KEPCO_ACSR_480, year_weather=year_series(10.0))
    assert np.array_equal(a.limits, b.limits)


def test_block_dominance_in_schedules():
    monthly = TemperatureCriteria(PUBLISHED_MONTHLY, Policy.MONTHLY)
    base = [100.0, 60.0]
    m = build_schedule(base, monthly, KEPCO_ACSR_480).limits
    for smap in (SEASONAL, SEMIANNUAL):
        assert np.all(build_schedule(base, blockify(monthly, smap), KEPCO_ACSR_480).limits <= m)


def test_dlr_schedule_varies_only_selected_lines():
    rng = np.random.default_rng(0)
    weather = year_series(rng.uniform(0, 38, HOURS_PER_YEAR))
    base = np.full(41, 100.0)
    lines = (3, 17, 20, 40)
    schedule = build_schedule(base, conventional_criteria(), KEPCO_ACSR_480, weather, lines)
    assert schedule.policy is Policy.DYNAMIC_SUBSET
    varying = [i for i in range(41) if np.ptp(schedule.limits[i]) > 0]
    assert tuple(varying) == lines
    hot = int(np.argmax(weather.temps))
    assert schedule.limits[3, hot] == pytest.approx(
        100 * oracle_ampacity(float(weather.temps[hot]), 0.5) / oracle_ampacity(40.0, 0.5), rel=1e-10
    )


def test_no_headroom_hours_are_zeroed_and_flagged():
    temps = np.full(HOURS_PER_YEAR, 20.0)
    temps[5] = 89.9
    with pytest.warns(UserWarning, match="no thermal headroom"):
        schedule = build_schedule([100.0, 50.0], conventional_criteria(), KEPCO_ACSR_480, year_series(temps), [1])
    assert schedule.limits[1, 5] == 0.0 and schedule.flagged[1, 5]
    assert schedule.flagged.sum() == 1
    assert schedule.limits[0, 5] == 100.0


def test_year_weather_drops_leap_day():
    leap = year_series(15.0, year=2024)
    with pytest.warns(UserWarning, match="Feb 29"):
        year = year_weather_8760(leap)
    assert len(year) == HOURS_PER_YEAR
    with pytest.raises(CriteriaError):
        year_weather_8760(WeatherSeries(leap.times[:100], leap.temps[:100]))


def test_dlr_subset_sizes():
    assert dlr_subset_size(41, 0.10) == 4
    assert dlr_subset_size(1, 0.10) == 1
    assert dlr_subset_size(10, 0.10) == 1
    assert dlr_subset_size(20, 0.10) == 2


def test_select_dlr_lines_ranking():
    limits = np.full((4, 3), 10.0)
    flows = np.array([[10.0, 10.0, 1.0], [10.0, -10.0, 1.0], [5.0, 9.0, 1.0], [1.0, -10.0, 1.0]])
    # line 1 binds 3 hours, line 0 twice
    assert select_dlr_lines(flows, limits, fraction=0.34) == (1,)
    # tie on binding hours goes to the larger total flow
    flows2 = np.array([[10.0, 10.0], [2.0, 5.0]])
    assert select_dlr_lines(flows2, np.full((2, 2), 10.0), fraction=0.5) == (1,)
    # full tie goes to the lower index
    assert select_dlr_lines(np.ones((2, 2)), np.full((2, 2), 10.0), fraction=0.5) == (0,)
    assert select_dlr_lines(np.ones((3, 1)), np.ones((3, 1)), fraction=0.1) == (0,)


def test_criteria_csv_round_trip(tmp_path):
    crit = blockify(TemperatureCriteria(PUBLISHED_MONTHLY, Policy.MONTHLY), SEASONAL)
    path = tmp_path / "crit.csv"
    write_criteria_csv(crit, path)
    again = read_criteria_csv(path)
    assert again.temps == crit.temps and again.policy is Policy.SEASONAL


def test_schedule_csv(tmp_path):
    schedule = build_schedule([100.0, 50.0], conventional_criteria(), KEPCO_ACSR_480)
    path = tmp_path / "s.csv"
    write_schedule_csv(schedule, path, ["a", "b"])
    lines = path.read_text().splitlines()
    assert lines[0] == "line,hour,mw"
    assert lines[1] == "a,0,100.0"
    assert len(lines) == 1 + 2 * HOURS_PER_YEAR
