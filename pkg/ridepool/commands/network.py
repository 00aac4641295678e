import re
from pathlib import Path

import click
from flask import Blueprint, current_app

from ridepool.commands import cli_errors
from ridepool.services.road_network import generate_grid, generate_irregular_grid, write_graph

network_bp = Blueprint("network", __name__, cli_group=None)

GRID_PATTERN = re.compile(r"^(\d+)x(\d+)$")


def _grid(ctx, param, value):
    match = GRID_PATTERN.match(value.strip().lower())
    if not match:
        raise click.BadParameter(f"expected ROWSxCOLS, got {value!r}")
    return int(match.group(1)), int(match.group(2))


@network_bp.cli.command("gen-network")
@click.option("--grid", default="20x20", callback=_grid, show_default=True, help="Lattice size ROWSxCOLS.")
@click.option("--spacing", type=float, default=100.0, show_default=True, help="Block length in meters.")
@click.option("--drop-fraction", type=float, default=0.0, show_default=True,
              help="Share of street segments removed (irregular lattice).")
@click.option("--jitter", type=float, default=0.0, show_default=True,
              help="Intersection jitter as a share of spacing (irregular lattice).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", "-o", type=click.Path(dir_okay=False), default=None,
              help="Network file to write; default <OUTPUT_DIR>/network.txt.")
@cli_errors
def gen_network(grid, spacing, drop_fraction, jitter, seed, output):
    """Write a synthetic road network in the node/edge text format."""
    rows, cols = grid
    if drop_fraction > 0 or jitter > 0:
        g = generate_irregular_grid(rows, cols, spacing, drop_fraction, jitter, seed)
    else:
        g = generate_grid(rows, cols, spacing)

    path = Path(output) if output else Path(current_app.config["OUTPUT_DIR"]) / "network.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(write_graph(g))
    current_app.logger.info(f"Network with {g.node_count} nodes and {g.edge_count} edges written to {path}")
    click.echo(f"{g.node_count} nodes, {g.edge_count} edges -> {path}")
