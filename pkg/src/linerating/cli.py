"""Batch command line: ``linerating <command> [options]``.

Exit codes: 0 success, 1 domain or solver error, 2 usage or I/O error.
Every command that writes files also writes a JSON run manifest.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, svg
from .config import ConfigError, RunSettings, load_settings
from .criteria import (
    REFERENCE_TEMP,
    CriteriaError,
    Policy,
    build_schedule,
    criteria_for,
    derive_monthly_criteria,
    read_criteria_csv,
    write_criteria_csv,
    write_schedule_csv,
)
from .network import CaseError, bundled_case, load_matpower
from .opf import DispatchError
from .sim import (
    DemandProfile,
    PolicyFragment,
    ReportError,
    SimulationError,
    YearRunConfig,
    compare_policies,
    emit_reports,
    run_policies,
)
from .synth import synthetic_demand, synthetic_weather
from .thermal import AmbientConditions, NoThermalHeadroom, ThermalDomainError, ampacity, ampacity_series
from .weather import (
    WeatherFormatError,
    load_weather_csv,
    monthly_maxima,
    pivot_monthly_max,
    read_pivot_csv,
    trend_table,
    write_trend_csv,
    write_weather_csv,
)

log = logging.getLogger("linerating")

DOMAIN_ERRORS = (
    ThermalDomainError,
    NoThermalHeadroom,
    CriteriaError,
    DispatchError,
    SimulationError,
    ReportError,
)
INPUT_ERRORS = (OSError, WeatherFormatError, ConfigError, CaseError)


class UsageError(Exception):
    pass


# manifests --------------------------------------------------------------


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _timestamp(inputs: list[Path]) -> str:
    """SOURCE_DATE_EPOCH if set, else the newest input's mtime (never the wall clock)."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        seconds = int(epoch)
    else:
        seconds = int(max((p.stat().st_mtime for p in inputs), default=0))
    return datetime.fromtimestamp(seconds, tz=timezone.utc).isoformat()


def write_manifest(
    path: Path,
    argv: list[str],
    inputs: dict[str, Path],
    outputs: list[Path],
    config_hash: str,
    out_root: Path | None = None,
) -> None:
    """Record what produced ``outputs``.

    The output location is replaced by ``<out>`` in the recorded command so
    that identical runs into different directories give identical manifests.
    """
    inputs = {k: Path(v) for k, v in inputs.items() if v is not None}
    command = ["linerating"] + argv
    if out_root is not None:
        command = [a.replace(str(out_root), "<out>") for a in command]
    rel = (lambda p: p.relative_to(out_root).as_posix()) if out_root is not None else (lambda p: p.name)
    manifest = {
        "tool": "linerating",
        "version": __version__,
        "command": command,
        "config_hash": config_hash,
        "inputs": {k: _sha256(p) for k, p in sorted(inputs.items())},
        "outputs": {rel(p): _sha256(p) for p in sorted(outputs)},
        "timestamp": _timestamp(list(inputs.values())),
    }
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _settings_hash(settings: RunSettings, **extra) -> str:
    payload = dataclasses.asdict(settings)
    payload["policies"] = [p.value for p in settings.policies]
    payload.update(extra)
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()


# shared helpers -----------------------------------------------------------


def _existing(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"input file not found: {p}")
    return p


def _settings(args) -> RunSettings:
    cfg = getattr(args, "config", None)
    settings = load_settings(_existing(cfg) if cfg else None)
    overrides = {
        key: getattr(args, key, None)
        for key in (
            "diameter_mm", "resistance_ohm_per_km", "emissivity", "absorptivity", "max_surface_temp",
            "voll", "dlr_fraction", "segments", "seed", "year", "policies",
        )
    }
    if getattr(args, "wind", None) is not None and args.command != "ampacity":
        overrides["wind_speed"] = args.wind
    if getattr(args, "solar", None) is not None and args.command != "ampacity":
        overrides["effective_solar"] = args.solar
    try:
        return settings.override(**overrides)
    except (CriteriaError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _load_weather(path, settings: RunSettings):
    series, summary = load_weather_csv(_existing(path), settings.weather)
    if summary.gap_count:
        log.warning("%s: %d gaps, longest %d h", path, summary.gap_count, summary.longest_gap_hours)
    return series


def _simulation_year(series, requested: int | None) -> int:
    if requested is not None:
        return requested
    counts = {int(y): int(n) for y, n in zip(*np.unique(series.years, return_counts=True))}
    full = [y for y, n in counts.items() if n >= 8760]
    if not full:
        raise CriteriaError("weather has no complete year to simulate; pass --year")
    return max(full)


def _load_case(path):
    return bundled_case("case30") if path is None else load_matpower(_existing(path))


def _prepare_out(out) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# commands -----------------------------------------------------------------


def cmd_ampacity(args) -> int:
    settings = _settings(args)
    spec = settings.conductor.spec()
    amb = AmbientConditions(args.temp, args.wind, effective_solar=args.solar)
    print(f"{ampacity(spec, amb, linear_natural=args.linear_qcn):.2f}")
    return 0


def cmd_analyze_weather(args) -> int:
    settings = _settings(args)
    series = _load_weather(args.weather, settings)
    out = _prepare_out(args.out)
    table = monthly_maxima(series, settings.min_coverage)
    written = [out / "monthly_max.csv", out / "trend.csv", out / "trend.svg"]
    written[0].write_text(pivot_monthly_max(table), encoding="utf-8")
    write_trend_csv(table, written[1])
    rows = trend_table(table)
    years = [r["year"] for r in rows]
    written[2].write_text(
        svg.line_chart(
            years,
            {k: [r[k] for r in rows] for k in ("annual_max", "ma3", "ma5", "ma10")},
            title="Annual maximum temperature", ylabel="degC",
        ),
        encoding="utf-8",
    )
    if args.year is not None:
        spec = settings.conductor.spec()
        year = series.select_year(args.year)
        if len(year) == 0:
            raise CriteriaError(f"weather has no data for {args.year}")
        trace = ampacity_series(spec, year, settings.wind_speed, settings.effective_solar)
        reference = ampacity(spec, AmbientConditions(REFERENCE_TEMP, settings.wind_speed,
                                                     effective_solar=settings.effective_solar))
        path = out / f"ampacity_{args.year}.csv"
        with path.open("w", encoding="utf-8") as fh:
            fh.write("timestamp,air_temp,ampacity_a,margin_a\n")
            for t, temp, amp in zip(year.times, year.temps, trace.values):
                stamp = str(t).replace("T", " ") + ":00"
                amp_s = "" if np.isnan(amp) else repr(float(amp))
                margin = "" if np.isnan(amp) else repr(float(amp - reference))
                fh.write(f"{stamp},{temp!r},{amp_s},{margin}\n")
        written.append(path)
        path = out / f"monthly_margin_{args.year}.csv"
        months = year.months
        with path.open("w", encoding="utf-8") as fh:
            fh.write("month,min_ampacity_a,hours_below_reference\n")
            for m in range(1, 13):
                vals = trace.values[months == m]
                if vals.size == 0:
                    continue
                low = np.nanmin(vals) if np.any(~np.isnan(vals)) else 0.0
                below = int(np.sum(np.nan_to_num(vals, nan=0.0) < reference))
                fh.write(f"{m},{float(low)!r},{below}\n")
        written.append(path)
    write_manifest(out / "manifest.json", args.argv, {"weather": Path(args.weather), "config": args.config},
                   written, _settings_hash(settings), out)
    log.info("wrote %d files to %s", len(written), out)
    return 0


def cmd_derive(args) -> int:
    settings = _settings(args)
    if (args.weather is None) == (args.pivot is None):
        raise UsageError("give exactly one of --weather or --pivot")
    if args.weather is not None:
        table = monthly_maxima(_load_weather(args.weather, settings), settings.min_coverage)
    else:
        table = read_pivot_csv(_existing(args.pivot))
    monthly = derive_monthly_criteria(table, args.sigmas)
    criteria = criteria_for(Policy.parse(args.policy), monthly)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_criteria_csv(criteria, out)
    for m in range(1, 13):
        print(f"{m:2d} {criteria.month(m):7.2f}")
    write_manifest(out.with_name(out.name + ".manifest.json"), args.argv,
                   {"weather": args.weather, "pivot": args.pivot, "config": args.config}, [out],
                   _settings_hash(settings, sigmas=args.sigmas, policy=args.policy))
    return 0


def cmd_schedule(args) -> int:
    settings = _settings(args)
    policy = Policy.parse(args.policy)
    case = _load_case(args.case)
    monthly = read_criteria_csv(_existing(args.criteria)) if args.criteria else None
    if policy not in (Policy.CONVENTIONAL, Policy.DYNAMIC_SUBSET) and monthly is None:
        raise UsageError(f"policy {policy.value} needs --criteria")
    year_weather = None
    dlr_lines = None
    if policy is Policy.DYNAMIC_SUBSET:
        if not args.dlr_lines or args.weather is None:
            raise UsageError("the dlr policy needs --weather and --dlr-lines (simulate picks lines automatically)")
        dlr_lines = [int(v) - 1 for v in args.dlr_lines.split(",")]
        series = _load_weather(args.weather, settings)
        year_weather = series.select_year(_simulation_year(series, settings.year))
    criteria = criteria_for(policy if policy is not Policy.DYNAMIC_SUBSET else Policy.CONVENTIONAL, monthly)
    schedule = build_schedule(case, criteria, settings.conductor.spec(), year_weather, dlr_lines,
                              settings.wind_speed, settings.effective_solar)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_schedule_csv(schedule, out, case.line_ids)
    write_manifest(out.with_name(out.name + ".manifest.json"), args.argv,
                   {"case": args.case, "criteria": args.criteria, "weather": args.weather, "config": args.config},
                   [out], _settings_hash(settings, case=case.fingerprint(), policy=policy.value))
    return 0


def cmd_simulate(args) -> int:
    settings = _settings(args)
    case = _load_case(args.case)
    history = _load_weather(args.weather, settings)
    year = _simulation_year(history, settings.year)
    if args.criteria:
        monthly = read_criteria_csv(_existing(args.criteria))
    else:
        monthly = derive_monthly_criteria(monthly_maxima(history, settings.min_coverage))
    if monthly.policy is not Policy.MONTHLY:
        raise UsageError("--criteria must hold monthly criteria; blocks are derived from them")
    demand = (
        DemandProfile.from_csv(_existing(args.demand)) if args.demand
        else DemandProfile(synthetic_demand(settings.seed))
    )
    config = YearRunConfig(
        case, settings.conductor.spec(), history.select_year(year), demand, monthly,
        settings.voll, settings.dlr_fraction, settings.segments, settings.wind_speed, settings.effective_solar,
    )
    out = _prepare_out(args.out)
    checkpoint = None if args.no_checkpoint else out / "checkpoints"
    jobs = args.jobs or os.cpu_count() or 1
    results = run_policies(config, settings.policies, jobs=jobs, checkpoint_dir=checkpoint)

    frag_dir = out / "fragments"
    frag_dir.mkdir(exist_ok=True)
    written = []
    for policy, result in results.items():
        path = frag_dir / f"{policy.value}.json"
        path.write_text(result.fragment.to_json() + "\n", encoding="utf-8")
        written.append(path)
    criteria_path = out / "criteria.csv"
    write_criteria_csv(monthly, criteria_path)
    written.append(criteria_path)
    report = compare_policies([r.fragment for r in results.values()])
    written += emit_reports(report, out)
    write_manifest(out / "manifest.json", args.argv,
                   {"case": args.case, "weather": Path(args.weather), "demand": args.demand,
                    "criteria": args.criteria, "config": args.config},
                   written, config.fingerprint(), out)
    annual = report.normalized_annual
    for name in report.ranking:
        print(f"{name:13s} {report.annual_cost[name]:16.2f} {annual[name]:8.2f}")
    return 0


def cmd_report(args) -> int:
    run = Path(args.run)
    frag_paths = sorted((run / "fragments").glob("*.json"))
    if not frag_paths:
        raise FileNotFoundError(f"no policy fragments under {run / 'fragments'}")
    fragments = [PolicyFragment.from_json(p.read_text(encoding="utf-8")) for p in frag_paths]
    report = compare_policies(fragments)
    out = _prepare_out(args.out or run)
    written = emit_reports(report, out)
    write_manifest(out / "report-manifest.json", args.argv,
                   {p.stem: p for p in frag_paths}, written, fragments[0].config_hash, out)
    for name in report.ranking:
        print(f"{name:13s} {report.annual_cost[name]:16.2f} {report.normalized_annual[name]:8.2f}")
    return 0


def cmd_synthesize(args) -> int:
    out = _prepare_out(args.out)
    written = []
    weather = synthetic_weather(args.first_year, args.last_year, seed=args.seed)
    path = out / "weather.csv"
    write_weather_csv(weather, path)
    written.append(path)
    path = out / "demand.csv"
    DemandProfile(synthetic_demand(args.demand_seed)).to_csv(path)
    written.append(path)
    write_manifest(out / "manifest.json", args.argv, {}, written,
                   hashlib.sha256(f"{args.first_year}:{args.last_year}:{args.seed}:{args.demand_seed}".encode()).hexdigest(), out)
    return 0


# parser -------------------------------------------------------------------


def _add_conductor(p):
    g = p.add_argument_group("conductor (overrides --config)")
    g.add_argument("--diameter-mm", type=float)
    g.add_argument("--resistance-ohm-per-km", type=float)
    g.add_argument("--emissivity", type=float)
    g.add_argument("--absorptivity", type=float)
    g.add_argument("--max-surface-temp", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linerating", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ampacity", help="print conductor ampacity in amperes")
    p.add_argument("--temp", type=float, required=True, help="air temperature, degC")
    p.add_argument("--wind", type=float, default=0.5, help="wind speed, m/s")
    p.add_argument("--solar", type=float, default=1000.0, help="effective solar radiation, W/m^2")
    p.add_argument("--linear-qcn", action="store_true", help="natural convection linear in the temperature rise")
    p.add_argument("--config")
    _add_conductor(p)
    p.set_defaults(func=cmd_ampacity)

    p = sub.add_parser("analyze-weather", help="monthly maxima, trends and optional hourly ampacity")
    p.add_argument("--weather", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--year", type=int, help="also write hourly ampacity and monthly margins for this year")
    p.add_argument("--config")
    p.add_argument("--wind", type=float)
    p.add_argument("--solar", type=float)
    _add_conductor(p)
    p.set_defaults(func=cmd_analyze_weather)

    p = sub.add_parser("derive", help="temperature criteria from weather history")
    p.add_argument("--weather")
    p.add_argument("--pivot", help="monthly maximum table written by analyze-weather")
    p.add_argument("--policy", default="monthly", choices=["monthly", "seasonal", "semiannual"])
    p.add_argument("--sigmas", type=float, default=3.0)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("schedule", help="hourly line limits for one policy")
    p.add_argument("--case", help="MATPOWER case file (default: bundled 30-bus case)")
    p.add_argument("--policy", required=True, choices=[x.value for x in Policy])
    p.add_argument("--criteria", help="monthly criteria CSV")
    p.add_argument("--weather")
    p.add_argument("--dlr-lines", help="comma-separated 1-based line positions")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--year", type=int)
    p.add_argument("--wind", type=float)
    p.add_argument("--solar", type=float)
    _add_conductor(p)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("simulate", help="year-long dispatch under each policy")
    p.add_argument("--case", help="MATPOWER case file (default: bundled 30-bus case)")
    p.add_argument("--weather", required=True, help="hourly weather history; the last full year is simulated")
    p.add_argument("--demand", help="hour,ratio CSV (default: synthetic profile)")
    p.add_argument("--criteria", help="monthly criteria CSV (default: derived from --weather)")
    p.add_argument("--policies", help="comma-separated subset of policies")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--year", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--voll", type=float)
    p.add_argument("--dlr-fraction", type=float)
    p.add_argument("--segments", type=int)
    p.add_argument("--wind", type=float)
    p.add_argument("--solar", type=float)
    p.add_argument("--jobs", type=int, help="worker processes (default: all cores)")
    p.add_argument("--no-checkpoint", action="store_true", help="do not persist per-day results")
    _add_conductor(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="rebuild report files from a simulate run directory")
    p.add_argument("--run", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synthesize", help="write a seeded synthetic weather history and demand profile")
    p.add_argument("--first-year", type=int, default=1974)
    p.add_argument("--last-year", type=int, default=2023)
    p.add_argument("--seed", type=int, default=7, help="weather seed")
    p.add_argument("--demand-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synthesize)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    logging.captureWarnings(True)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except UsageError as exc:
        print(f"linerating {args.command}: {exc}", file=sys.stderr)
        return 2
    except DOMAIN_ERRORS as exc:
        print(f"linerating {args.command}: {exc}", file=sys.stderr)
        return 1
    except INPUT_ERRORS as exc:
        print(f"linerating {args.command}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"linerating {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
