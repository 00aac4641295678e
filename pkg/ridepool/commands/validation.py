from pathlib import Path

import click
import pandas as pd
from flask import Blueprint, current_app

from ridepool.commands import cli_errors
from ridepool.errors import ConfigError
from ridepool.services.reports import write_validation_outputs

validation_bp = Blueprint("validation", __name__, cli_group=None)

REQUIRED_COLUMNS = ["capacity", "fleet_size", "arrival_rate", "system_load", "occupancy", "service_rate",
                    "normalized_load"]


@validation_bp.cli.command("validate")
@click.argument("sweep_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--detour-ratio", type=float, default=0.5, show_default=True,
              help="Maximal detour ratio used by the runs (load approximation).")
@click.option("--complexity", type=float, default=0.0, show_default=True,
              help="Network complexity T of the load approximation.")
@click.option("--output-dir", type=click.Path(file_okay=False), default=None,
              help="Directory for the fit outputs; default OUTPUT_DIR.")
@click.option("--u-max", type=float, default=8.0, show_default=True)
@cli_errors
def validate(sweep_path, detour_ratio, complexity, output_dir, u_max):
    """Recompute the law fits from an existing sweep.csv."""
    table = pd.read_csv(sweep_path)
    missing = [c for c in REQUIRED_COLUMNS if c not in table.columns]
    if missing:
        raise ConfigError("sweep", f"{sweep_path} is missing columns: {', '.join(missing)}")
    if "error" in table.columns:
        table["error"] = table["error"].fillna("")

    out = Path(output_dir or current_app.config["OUTPUT_DIR"])
    problems = write_validation_outputs(table, out, detour_ratio, complexity, u_max)
    fits = pd.read_csv(out / "fit_summary.csv")
    for row in fits.itertuples(index=False):
        click.echo(f"{row.law:<13} C={row.capacity:<4} R²={row.r2:.3f} MAPE={row.mape_pct:.1f}%")
    current_app.logger.info(f"Fit outputs written to {out}")
    if problems:
        raise click.ClickException(f"fits not computed: {'; '.join(problems)}")
