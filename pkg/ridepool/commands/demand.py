from pathlib import Path

import click
from flask import Blueprint, current_app

from ridepool.commands import cli_errors
from ridepool.services.config_loader import load_config
from ridepool.services.demand import write_requests
from ridepool.services.engine import build_network, load_demand, seeded
from ridepool.services.road_network import DistanceOracle

demand_bp = Blueprint("demand", __name__, cli_group=None)


@demand_bp.cli.command("gen-demand")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "-o", type=click.Path(dir_okay=False), default=None,
              help="Request file to write; default <OUTPUT_DIR>/requests.csv.")
@cli_errors
def gen_demand(config_path, output):
    """Write the requests a run of CONFIG_PATH would see.

    Synthetic Poisson demand, or a raw trip file filtered, snapped and
    subsampled, depending on the demand section.
    """
    cfg, _ = load_config(config_path)
    cfg = seeded(cfg)
    g = build_network(cfg.network)
    oracle = DistanceOracle(g, current_app.config["APSP_MAX_NODES"])
    requests = load_demand(cfg, g, oracle)

    path = Path(output) if output else Path(current_app.config["OUTPUT_DIR"]) / "requests.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_requests(requests, path, g)
    current_app.logger.info(f"{len(requests)} requests written to {path}")
    click.echo(f"{len(requests)} requests -> {path}")
