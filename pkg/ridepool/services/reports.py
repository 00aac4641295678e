import logging
from pathlib import Path

import pandas as pd
import yaml

from ridepool.analysis.laws import law_curves
from ridepool.analysis.validation import (
    fit_load_approximation, fit_summary, remaining_capacity_table, validate_sweep,
)
from ridepool.errors import MetricsError
from ridepool.models.simulation import RunManifest, SimConfig, SimReport, SweepAxes
from ridepool.services.audit import events_frame, rtv_frame
from ridepool.services.config_loader import config_to_dict, write_manifest
from ridepool.services.engine import derive_seeds

logger = logging.getLogger(__name__)

SERIES_COLUMNS = ["time", "occupancy", "onboard", "waiting"]
HISTOGRAM_COLUMNS = ["bin_start", "bin_end", "count"]


def write_run_outputs(report: SimReport, out_dir: str | Path, trace: bool = False, dump_rtv: bool = False) -> list[Path]:
    """summary.yaml, series.csv and pickup_histogram.csv, plus events.csv / rtv.csv when collected."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "summary.yaml", out / "series.csv", out / "pickup_histogram.csv"]

    written[0].write_text(yaml.safe_dump(report.summary(), sort_keys=False))
    pd.DataFrame(
        zip(report.step_times, report.step_occupancy, report.step_onboard, report.step_waiting),
        columns=SERIES_COLUMNS,
    ).to_csv(written[1], index=False)
    edges = report.histogram_edges
    pd.DataFrame(
        zip(edges[:-1], edges[1:], report.histogram_counts),
        columns=HISTOGRAM_COLUMNS,
    ).to_csv(written[2], index=False)

    if trace:
        events_frame(report.events).to_csv(out / "events.csv", index=False)
        written.append(out / "events.csv")
    if dump_rtv:
        rtv_frame(report.rtv_rows).to_csv(out / "rtv.csv", index=False)
        written.append(out / "rtv.csv")
    return written


def write_validation_outputs(table: pd.DataFrame, out_dir: str | Path, detour_ratio: float, complexity: float = 0.0,
                             u_max: float = 8.0) -> list[str]:
    """Residual tables, fit summary, law curves, u-vs-x and remaining-capacity tables.

    Returns the fits that could not be computed; every table that can be
    computed is still written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problems = []

    validations = []
    for which in ("occupancy", "service_rate"):
        try:
            result = validate_sweep(table, which)
        except MetricsError as exc:
            logger.warning(f"{which} fit skipped: {exc}")
            problems.append(f"{which}: {exc}")
            continue
        result.residuals.to_csv(out / f"residuals_{which}.csv", index=False)
        validations.append(result)
    fit_summary(validations).to_csv(out / "fit_summary.csv", index=False)

    capacities = sorted({int(c) for c in table["capacity"].dropna()})
    measured_max = table["system_load"].max() if "system_load" in table else 0.0
    curve_max = max(u_max, float(measured_max)) if pd.notna(measured_max) else u_max
    law_curves(capacities, curve_max).to_csv(out / "law_curves.csv", index=False)

    try:
        load_fit = fit_load_approximation(table, detour_ratio, complexity)
    except MetricsError as exc:
        logger.warning(f"load approximation fit skipped: {exc}")
        problems.append(f"load_approximation: {exc}")
    else:
        logger.info(f"Load approximation: slope={load_fit.slope:.3f} R²={load_fit.r2:.3f}")
        load_fit.table.assign(slope=load_fit.slope, r2=load_fit.r2).to_csv(out / "load_approximation.csv", index=False)

    remaining_capacity_table(table).to_csv(out / "remaining_capacity.csv", index=False)
    return problems


def build_manifest(cfg: SimConfig, out_dir: str | Path, inputs: dict, version: str,
                   axes: SweepAxes | None = None) -> RunManifest:
    return RunManifest(
        config=config_to_dict(cfg, axes),
        inputs={k: v for k, v in inputs.items() if v is not None},
        output_dir=str(out_dir),
        version=version,
        seed=cfg.seed,
    )


def save_manifest(manifest: RunManifest, out_dir: str | Path) -> Path:
    fleet_seed, demand_seed = derive_seeds(manifest.seed)
    path = Path(out_dir) / "manifest.yaml"
    write_manifest(manifest, path, seeds={"fleet": fleet_seed, "demand": demand_seed})
    return path
