"""Stage-by-stage orchestration of the full study.

Each stage reads the intermediate files written by earlier stages under the
output directory and writes its own, so ``run`` and the individual CLI
subcommands produce the same files. Layout::

    ingest/     trip_counts.csv, trip_distance.csv, cleaning_report.json,
                epidemic.csv, vaccination.csv, zones.csv
    correlate/  correlation_matrix.csv, correlation_matrix.json
    dtw/        dtw_distances.csv, dtw_results.json
    tlcc/       profile_<label>.csv, tlcc_summary.json
    spatial/    zone_metrics.csv, distance_change.csv, fit.json
    report/     report.json plus plot-ready CSVs
    manifest.json
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import shutil
import tempfile
import time
from pathlib import Path
from typing import Callable

from . import __version__
from .config import INPUT_ROLES, PipelineConfig
from .correlation import CorrelationMatrix, correlation_matrix
from .dtw import GROUPS, DtwReport, dtw_report
from .errors import DataError, InvariantViolation, MissingIntermediate, StageError
from .ingest import (
    CITY,
    EPIDEMIC_LABELS,
    RULES,
    VACCINATION_LABELS,
    CleaningReport,
    DailyAccumulator,
    MAX_YEAR,
    MIN_DISTANCE_MI,
    MIN_DURATION_S,
    MIN_YEAR,
    ZoneInfo,
    clean_trips,
    keyed_series_from_csv,
    keyed_series_to_csv,
    open_text,
    parse_epidemic,
    parse_trips,
    parse_vaccination,
    parse_zones,
    records_to_series,
    zones_to_csv,
)
from .lag import CONVENTION, tlcc_sweep
from .series import DateIndexedSeries, align_common_dates, describe, restrict, rolling_mean_7
from .spatial import (
    classify_distance_change,
    distance_change_csv,
    ols_fit,
    zero_population_zones,
    zone_metrics_csv,
    zone_period_metrics,
)

logger = logging.getLogger(__name__)

STAGES = ("ingest", "correlate", "dtw", "tlcc", "spatial", "report")
TAXI = "taxi_trips"
REPORT_SCHEMA_VERSION = 1

SERIES_ORDER = (
    "new_cases", "new_hospitalizations", "new_deaths",
    "cum_cases", "cum_hospitalizations", "cum_deaths",
    "new_first_dose", "new_second_dose", "new_total_dose",
    "cum_first_dose", "cum_second_dose", "cum_total_dose",
    TAXI,
)

SERIES_GROUP = {
    "new_cases": "daily_epidemic",
    "new_hospitalizations": "daily_epidemic",
    "new_deaths": "daily_epidemic",
    "cum_cases": "cumulative_epidemic",
    "cum_hospitalizations": "cumulative_epidemic",
    "cum_deaths": "cumulative_epidemic",
    "new_first_dose": "daily_vaccination",
    "new_second_dose": "daily_vaccination",
    "new_total_dose": "daily_vaccination",
    "cum_first_dose": "cumulative_vaccination",
    "cum_second_dose": "cumulative_vaccination",
    "cum_total_dose": "cumulative_vaccination",
}

TLCC_SERIES = ("cum_first_dose", "cum_second_dose", "cum_total_dose")


# ---------------------------------------------------------------------------
# file helpers
# ---------------------------------------------------------------------------

def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _need(out: Path, rel: str) -> Path:
    path = out / rel
    if not path.is_file():
        raise MissingIntermediate(path, rel.split("/")[0])
    return path


def _read_json(out: Path, rel: str):
    with open(_need(out, rel), encoding="utf-8") as fh:
        return json.load(fh)


def _read_keyed(out: Path, rel: str, unit: str = "") -> dict:
    with open(_need(out, rel), encoding="utf-8", newline="") as fh:
        return keyed_series_from_csv(fh, unit)


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def decisions(config: PipelineConfig) -> dict:
    """Every tunable choice in effect for a run."""
    return {
        "rolling_window": "trailing 7 days",
        "rolling_partial_windows": "average of available days",
        "smoothing": config.smoothing,
        "zscore_std": "population (divide by n)",
        "trip_day": "calendar day of trip start timestamp",
        "cleaning_rule_order": list(RULES),
        "cleaning_year_range": [MIN_YEAR, MAX_YEAR],
        "cleaning_min_duration_s": MIN_DURATION_S,
        "cleaning_min_distance_mi": MIN_DISTANCE_MI,
        "duration_source": "recorded column, else end - start",
        "zero_trip_days": "count 0; mean distance missing",
        "deduplicate_trips": False,
        "correlation_alignment": "pairwise-complete common dates",
        "dtw_cost": config.dtw_cost,
        "dtw_normalization": config.dtw_normalization,
        "dtw_tie_break": ["diagonal", "up (i-1, j)", "left (i, j-1)"],
        "dtw_window_constraint": "none",
        "tlcc_convention": CONVENTION,
        "tlcc_window": "truncate to overlap",
        "tlcc_max_offset": config.tlcc_max_offset,
        "tlcc_tie_break": "smallest |offset|, then negative",
        "per_capita_basis": "period totals per 1000 residents",
        "fit_intercept": config.fit_intercept,
        "distance_threshold_mi": config.distance_threshold,
        "distance_threshold_boundary": "strict (equal to threshold is NotSignificant)",
        "descriptive_std": "sample (n - 1)",
        "periods": {
            "before": [config.before.start.isoformat(), config.before.end.isoformat()],
            "after": [config.after.start.isoformat(), config.after.end.isoformat()],
        },
    }


def _load_manifest(out: Path, config: PipelineConfig) -> dict:
    path = out / "manifest.json"
    if path.is_file():
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
        if manifest.get("config_hash") == config.digest():
            return manifest
    return {
        "tool": "demand-pulse",
        "version": __version__,
        "config_hash": config.digest(),
        "inputs": {},
        "decisions": decisions(config),
        "stages": {},
        "runtime": {"threads": None, "timings_s": {}},
    }


def _record(out: Path, config: PipelineConfig, stage: str, rows: dict, seconds: float, threads: int, inputs=None) -> None:
    manifest = _load_manifest(out, config)
    if inputs is not None:
        manifest["inputs"] = inputs
    manifest["stages"][stage] = rows
    manifest["stages"] = {s: manifest["stages"][s] for s in STAGES if s in manifest["stages"]}
    manifest["runtime"]["threads"] = threads
    manifest["runtime"]["timings_s"][stage] = round(seconds, 6)
    _write(out / "manifest.json", _dump(manifest))


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def stage_ingest(config: PipelineConfig, out: Path, threads: int = 1) -> dict:
    config.check_inputs()
    current = {"path": None}

    def guarded(role: str, fn: Callable):
        current["path"] = config.inputs[role]
        with open_text(config.inputs[role]) as fh:
            return fn(fh)

    acc = DailyAccumulator()

    def trips(fh):
        rows, report = clean_trips(parse_trips(fh, config.trip_schema))
        acc.consume(rows)
        report.check()
        return report

    try:
        report: CleaningReport = guarded("trips", trips)
        epidemic = guarded("epidemic", lambda fh: parse_epidemic(fh, config.epidemic_columns))
        vaccination = guarded("vaccination", lambda fh: parse_vaccination(fh, config.vaccination_columns))
        zones = guarded("zones", lambda fh: parse_zones(fh, config.zone_columns))
    except DataError as exc:
        raise StageError("ingest", exc, current["path"]) from exc
    if acc.is_empty():
        raise StageError("ingest", DataError("no trips survived cleaning"), config.inputs["trips"])

    counts = {CITY: acc.counts(CITY)[CITY], **acc.counts("pickup_zone")}
    distance = {CITY: acc.mean_distance(CITY)[CITY], **acc.mean_distance("pickup_zone")}
    d = out / "ingest"
    buf = io.StringIO()
    keyed_series_to_csv(counts, buf)
    _write(d / "trip_counts.csv", buf.getvalue())
    buf = io.StringIO()
    keyed_series_to_csv(distance, buf)
    _write(d / "trip_distance.csv", buf.getvalue())
    _write(d / "cleaning_report.json", _dump(report.to_json_obj()))
    buf = io.StringIO()
    keyed_series_to_csv(records_to_series(epidemic, EPIDEMIC_LABELS), buf)
    _write(d / "epidemic.csv", buf.getvalue())
    buf = io.StringIO()
    keyed_series_to_csv(records_to_series(vaccination, VACCINATION_LABELS), buf)
    _write(d / "vaccination.csv", buf.getvalue())
    buf = io.StringIO()
    zones_to_csv(zones, buf)
    _write(d / "zones.csv", buf.getvalue())
    return {
        "trip_rows_in": report.rows_in,
        "trip_rows_out": report.rows_out,
        "trip_days": len(counts[CITY]),
        "zones_with_trips": len(counts) - 1,
        "epidemic_days": len(epidemic),
        "vaccination_days": len(vaccination),
        "zones": len(zones),
    }


def load_raw_series(out: Path) -> dict[str, DateIndexedSeries]:
    """The thirteen study series as ingested (unsmoothed), in display order."""
    counts = _read_keyed(out, "ingest/trip_counts.csv", "trips")
    epi = _read_keyed(out, "ingest/epidemic.csv", "people")
    vac = _read_keyed(out, "ingest/vaccination.csv", "people")
    pool = {TAXI: counts[CITY].relabel(TAXI), **epi, **vac}
    return {label: pool[label] for label in SERIES_ORDER if label in pool}


def prepared_series(config: PipelineConfig, out: Path) -> dict[str, DateIndexedSeries]:
    """Study series after optional smoothing, restricted to the after period."""
    raw = load_raw_series(out)
    out_series = {}
    for label, s in raw.items():
        if config.smoothing:
            s = rolling_mean_7(s).relabel(label)
        out_series[label] = restrict(s, config.after)
    return out_series


def _analysis_guard(stage: str, fn):
    try:
        return fn()
    except DataError as exc:
        raise StageError(stage, exc) from exc


def stage_correlate(config: PipelineConfig, out: Path, threads: int = 1) -> dict:
    series = _analysis_guard("correlate", lambda: prepared_series(config, out))
    matrix = _analysis_guard("correlate", lambda: correlation_matrix(list(series.values()), threads=threads))
    d = out / "correlate"
    _write(d / "correlation_matrix.csv", matrix.to_csv())
    _write(d / "correlation_matrix.json", _dump(matrix.to_json_obj()))
    return {"series": len(series), "missing_cells": len(matrix.errors)}


def stage_dtw(config: PipelineConfig, out: Path, threads: int = 1) -> dict:
    series = _analysis_guard("dtw", lambda: prepared_series(config, out))
    if TAXI not in series:
        raise StageError("dtw", DataError("taxi trip series missing"))
    pairs = [(label, s, SERIES_GROUP[label]) for label, s in series.items() if label != TAXI]
    report = dtw_report(pairs, series[TAXI], config.dtw_normalization, config.dtw_cost, threads=threads)
    d = out / "dtw"
    _write(d / "dtw_distances.csv", report.to_csv())
    _write(d / "dtw_results.json", _dump(report.to_json_obj(include_paths=True)))
    return {"pairs": len(report.rows), "failed_pairs": sum(r.result is None for r in report.rows)}


def _profile_file(label: str) -> str:
    return f"profile_{label}.csv"


def stage_tlcc(config: PipelineConfig, out: Path, threads: int = 1) -> dict:
    series = _analysis_guard("tlcc", lambda: prepared_series(config, out))
    summaries = []
    d = out / "tlcc"
    for label in TLCC_SERIES:
        if label not in series:
            continue

        def sweep():
            x, y = align_common_dates(series[label], series[TAXI])
            return tlcc_sweep(x, y, config.tlcc_max_offset, threads=threads)

        profile = _analysis_guard("tlcc", sweep)
        _write(d / _profile_file(label), profile.to_csv())
        summaries.append({**profile.summary(), "profile": _profile_file(label)})
    _write(d / "tlcc_summary.json", _dump({
        "convention": CONVENTION,
        "max_offset": config.tlcc_max_offset,
        "profiles": summaries,
    }))
    return {"profiles": len(summaries)}


def _load_zones(out: Path) -> list[ZoneInfo]:
    with open(_need(out, "ingest/zones.csv"), encoding="utf-8", newline="") as fh:
        return parse_zones(fh)


def stage_spatial(config: PipelineConfig, out: Path, threads: int = 1) -> dict:
    counts = _read_keyed(out, "ingest/trip_counts.csv", "trips")
    distance = _read_keyed(out, "ingest/trip_distance.csv", "miles")
    zones = _load_zones(out)
    counts.pop(CITY, None)
    distance.pop(CITY, None)

    def compute():
        before = zone_period_metrics(counts, distance, zones, config.before)
        after = zone_period_metrics(counts, distance, zones, config.after)
        return before, after

    before, after = _analysis_guard("spatial", compute)
    after_by_zone = {r.zone_id: r for r in after}
    points = [(b.trips_per_1000, after_by_zone[b.zone_id].trips_per_1000) for b in before if b.zone_id in after_by_zone]
    fit = _analysis_guard("spatial", lambda: ols_fit(points, through_origin=not config.fit_intercept))
    changes = [
        classify_distance_change(b.mean_distance, after_by_zone[b.zone_id].mean_distance, config.distance_threshold, b.zone_id)
        for b in before
        if b.zone_id in after_by_zone
    ]
    d = out / "spatial"
    _write(d / "zone_metrics.csv", zone_metrics_csv([*before, *after]))
    _write(d / "distance_change.csv", distance_change_csv(changes))
    _write(d / "fit.json", _dump({
        **fit.to_json_obj(),
        "x": "before-period trips per 1000 residents",
        "y": "after-period trips per 1000 residents",
        "zero_population_zones": zero_population_zones(zones),
    }))
    return {"zones": len(zones), "fit_points": fit.n_points}


def _describe_periods(config: PipelineConfig, raw: dict[str, DateIndexedSeries]) -> dict:
    out = {}
    for period in (config.before, config.after):
        stats = {}
        for label, s in raw.items():
            try:
                stats[label] = describe(restrict(s, period))
            except DataError:
                continue
        out[period.name] = {
            "start": period.start.isoformat(),
            "end": period.end.isoformat(),
            "days": period.days,
            "series": stats,
        }
    return out


def stage_report(config: PipelineConfig, out: Path, threads: int = 1) -> dict:
    cleaning = _read_json(out, "ingest/cleaning_report.json")
    matrix = CorrelationMatrix.from_json_obj(_read_json(out, "correlate/correlation_matrix.json"))
    dtw = DtwReport.from_json_obj(_read_json(out, "dtw/dtw_results.json"))
    tlcc = _read_json(out, "tlcc/tlcc_summary.json")
    fit = _read_json(out, "spatial/fit.json")
    zone_metrics_text = _need(out, "spatial/zone_metrics.csv").read_text(encoding="utf-8")
    change_text = _need(out, "spatial/distance_change.csv").read_text(encoding="utf-8")
    zones = _load_zones(out)
    raw = load_raw_series(out)

    d = out / "report"
    # daily series, raw and as analysed
    buf = io.StringIO()
    smoothed = {}
    for label, s in raw.items():
        smoothed[label] = s
        if config.smoothing:
            smoothed[label + "_7d"] = rolling_mean_7(s)
    keyed_series_to_csv(smoothed, buf)
    _write(d / "series_daily.csv", buf.getvalue())
    _write(d / "correlation_matrix.csv", matrix.to_csv())
    _write(d / "dtw_distances.csv", dtw.to_csv())

    lines = ["series,offset,r"]
    for p in tlcc["profiles"]:
        text = _need(out, "tlcc/" + p["profile"]).read_text(encoding="utf-8").splitlines()[1:]
        lines.extend(f"{p['x']},{row}" for row in text)
    _write(d / "tlcc_profiles.csv", "\n".join(lines) + "\n")

    metrics = _zone_rows(zone_metrics_text)
    changes = {int(r["zone_id"]): r for r in _csv_rows(change_text)}
    zone_lines = ["zone_id,name,population,before_total,before_per_1000,after_total,after_per_1000,"
                  "before_mean_distance,after_mean_distance,distance_class"]
    zone_table = []
    for z in zones:
        b = metrics.get((z.id, config.before.name), {})
        a = metrics.get((z.id, config.after.name), {})
        c = changes.get(z.id, {})
        row = {
            "zone_id": z.id,
            "name": z.name,
            "population": z.population,
            "before_total": _num(b.get("total_trips")),
            "before_per_1000": _num(b.get("trips_per_1000")),
            "after_total": _num(a.get("total_trips")),
            "after_per_1000": _num(a.get("trips_per_1000")),
            "before_mean_distance": _num(b.get("mean_distance")),
            "after_mean_distance": _num(a.get("mean_distance")),
            "distance_class": c.get("class") or None,
        }
        zone_table.append(row)
        zone_lines.append(",".join(_csv_cell(v) for v in row.values()))
    _write(d / "zone_table.csv", "\n".join(zone_lines) + "\n")

    bundle = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "tool_version": __version__,
        "config_hash": config.digest(),
        "decisions": decisions(config),
        "cleaning": cleaning,
        "descriptive_statistics": _describe_periods(config, raw),
        "correlation": matrix.to_json_obj(),
        "dtw": dtw.to_json_obj(include_paths=False),
        "tlcc": tlcc,
        "spatial": {
            "fit": fit,
            "zones": zone_table,
            "distance_change_counts": _class_counts(zone_table),
        },
        "files": sorted(p.name for p in d.glob("*.csv")),
    }
    _write(d / "report.json", _dump(bundle))
    return {"zones": len(zone_table), "files": len(bundle["files"]) + 1}


def _csv_rows(text: str) -> list[dict]:
    import csv

    return list(csv.DictReader(io.StringIO(text)))


def _zone_rows(text: str) -> dict:
    return {(int(r["zone_id"]), r["period"]): r for r in _csv_rows(text)}


def _num(text):
    if text is None or text == "":
        return None
    v = float(text)
    return int(v) if v.is_integer() and "." not in text else v


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    s = str(v)
    return f'"{s}"' if "," in s or '"' in s else s


def _class_counts(rows: list[dict]) -> dict:
    out: dict[str, int] = {}
    for r in rows:
        if r["distance_class"]:
            out[r["distance_class"]] = out.get(r["distance_class"], 0) + 1
    return dict(sorted(out.items()))


STAGE_FUNCS = {
    "ingest": stage_ingest,
    "correlate": stage_correlate,
    "dtw": stage_dtw,
    "tlcc": stage_tlcc,
    "spatial": stage_spatial,
    "report": stage_report,
}


def input_digests(config: PipelineConfig) -> dict:
    return {
        role: {
            "file": config.inputs[role].name,
            "sha256": sha256_file(config.inputs[role]),
            "bytes": config.inputs[role].stat().st_size,
        }
        for role in INPUT_ROLES
    }


def run_stage(stage: str, config: PipelineConfig, out: Path | None = None, threads: int = 1) -> dict:
    """Run one stage against the intermediates under ``out``; updates the manifest."""
    out = Path(out if out is not None else config.output_dir)
    t0 = time.perf_counter()
    inputs = None
    if stage == "ingest":
        config.check_inputs()
        inputs = input_digests(config)
    try:
        rows = STAGE_FUNCS[stage](config, out, threads)
    except (StageError, MissingIntermediate, InvariantViolation):
        raise
    except DataError as exc:
        raise StageError(stage, exc) from exc
    _record(out, config, stage, rows, time.perf_counter() - t0, threads, inputs)
    logger.info("stage %s done: %s", stage, rows)
    return rows


def run(config: PipelineConfig, out: Path | None = None, threads: int = 1) -> dict:
    """Execute every stage in order and return the manifest.

    Work happens in a scratch directory next to ``out``; files are moved into
    place only after the last stage succeeds, so a failed run leaves nothing
    behind.
    """
    out = Path(out if out is not None else config.output_dir)
    config.check_inputs()
    out.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".demand-pulse-", dir=out.parent))
    try:
        for stage in STAGES:
            run_stage(stage, config, scratch, threads)
        out.mkdir(parents=True, exist_ok=True)
        for item in sorted(scratch.iterdir()):
            target = out / item.name
            if target.is_dir():
                shutil.rmtree(target)
            elif target.exists():
                target.unlink()
            item.rename(target)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
    with open(out / "manifest.json", encoding="utf-8") as fh:
        return json.load(fh)


def data_files(out: Path) -> dict[str, bytes]:
    """All output files except the manifest, keyed by relative path."""
    out = Path(out)
    return {
        str(p.relative_to(out)): p.read_bytes()
        for p in sorted(out.rglob("*"))
        if p.is_file() and p.name != "manifest.json"
    }


def manifest_without_runtime(out: Path) -> dict:
    with open(Path(out) / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    manifest.pop("runtime", None)
    return manifest
