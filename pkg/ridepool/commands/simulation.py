from dataclasses import replace
from pathlib import Path

import click
from flask import Blueprint, current_app

from ridepool import __version__
from ridepool.commands import cli_errors, number_list
from ridepool.services.config_loader import load_config
from ridepool.services.engine import build_network, run, sweep
from ridepool.services.reports import build_manifest, save_manifest, write_run_outputs, write_validation_outputs

simulation_bp = Blueprint("simulation", __name__, cli_group=None)


def _inputs(config_path, cfg) -> dict:
    return {
        "config": str(Path(config_path).resolve()),
        "network": cfg.network.file,
        "trips_file": cfg.trips_file,
        "requests_file": cfg.requests_file,
    }


@simulation_bp.cli.command("simulate")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--output-dir", type=click.Path(file_okay=False), default=None,
              help="Directory for the run outputs; default OUTPUT_DIR.")
@click.option("--trace/--no-trace", default=None, help="Write the request event trace (events.csv).")
@click.option("--dump-rtv/--no-dump-rtv", default=None, help="Write every RTV edge per step (rtv.csv).")
@cli_errors
def simulate(config_path, output_dir, trace, dump_rtv):
    """Run one simulation and write summary, series, histogram and manifest."""
    cfg, _ = load_config(config_path)
    if trace is not None:
        cfg = replace(cfg, trace=trace)
    if dump_rtv is not None:
        cfg = replace(cfg, dump_rtv=dump_rtv)
    out = Path(output_dir or current_app.config["OUTPUT_DIR"])

    report = run(
        cfg,
        histogram_bin=current_app.config["HISTOGRAM_BIN"],
        apsp_max_nodes=current_app.config["APSP_MAX_NODES"],
    )
    write_run_outputs(report, out, trace=cfg.trace, dump_rtv=cfg.dump_rtv)
    save_manifest(build_manifest(cfg, out, _inputs(config_path, cfg), __version__), out)

    current_app.logger.info(f"Run outputs written to {out}")
    click.echo(
        f"occupancy={report.occupancy:.3f} service_rate={report.service_rate:.3f} "
        f"u={report.system_load:.3f} served={report.served}/{report.total_requests}"
    )


@simulation_bp.cli.command("sweep")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--arrival-rates", callback=number_list(float), default=None,
              help="Comma-separated arrival rates (requests/s); overrides sweep.arrival_rates.")
@click.option("--capacities", callback=number_list(int), default=None,
              help="Comma-separated capacities; overrides sweep.capacities.")
@click.option("--fleet-sizes", callback=number_list(int), default=None,
              help="Comma-separated fleet sizes; overrides sweep.fleet_sizes.")
@click.option("--jobs", type=int, default=None, help="Parallel runs; default sweep.jobs, then RIDEPOOL_JOBS.")
@click.option("--output-dir", type=click.Path(file_okay=False), default=None,
              help="Directory for the sweep outputs; default OUTPUT_DIR.")
@click.option("--u-max", type=float, default=8.0, show_default=True, help="Upper load of the sampled law curves.")
@cli_errors
def sweep_command(config_path, arrival_rates, capacities, fleet_sizes, jobs, output_dir, u_max):
    """Run the (capacity, fleet size, arrival rate) cross product and fit the laws."""
    cfg, axes = load_config(config_path)
    axes = replace(
        axes,
        arrival_rates=tuple(arrival_rates or axes.arrival_rates),
        capacities=tuple(capacities or axes.capacities),
        fleet_sizes=tuple(fleet_sizes or axes.fleet_sizes),
        jobs=jobs if jobs is not None else axes.jobs,
    )
    n_jobs = axes.jobs if axes.jobs is not None else current_app.config["JOBS"]
    out = Path(output_dir or current_app.config["OUTPUT_DIR"])
    out.mkdir(parents=True, exist_ok=True)

    table = sweep(
        cfg,
        list(axes.arrival_rates),
        list(axes.capacities),
        list(axes.fleet_sizes),
        n_jobs=n_jobs,
        graph=build_network(cfg.network),
        histogram_bin=current_app.config["HISTOGRAM_BIN"],
        apsp_max_nodes=current_app.config["APSP_MAX_NODES"],
    )
    table.to_csv(out / "sweep.csv", index=False)
    problems = write_validation_outputs(
        table, out, cfg.constraints.max_detour_ratio, cfg.network.complexity, u_max
    )
    save_manifest(build_manifest(cfg, out, _inputs(config_path, cfg), __version__, axes), out)

    failed = int((table["error"] != "").sum())
    click.echo(f"{len(table) - failed}/{len(table)} runs completed -> {out}")
    if failed or problems:
        raise click.ClickException(
            f"{failed} run(s) failed" + (f"; fits not computed: {'; '.join(problems)}" if problems else "")
        )
