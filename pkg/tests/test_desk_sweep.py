"""Desk-scale sweeps on the shipped configs; each module fixture runs once."""
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from ridepool.analysis.validation import fit_load_approximation, validate_sweep
from ridepool.services.config_loader import load_config
from ridepool.services.engine import sweep

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

pytestmark = pytest.mark.slow


def run_sweep(name, n_jobs=-1, **overrides):
    cfg, axes = load_config(CONFIGS / name)
    if "horizon" in overrides and cfg.demand is not None:
        overrides["demand"] = replace(cfg.demand, horizon=overrides["horizon"])
    cfg = replace(cfg, **overrides)
    table = sweep(cfg, list(axes.arrival_rates), list(axes.capacities), list(axes.fleet_sizes), n_jobs=n_jobs)
    assert (table["error"] == "").all(), table.loc[table["error"] != "", "error"].tolist()
    return cfg, table


def load_at(rows, u, column):
    rows = rows.sort_values("system_load")
    loads = rows["system_load"].to_numpy()
    assert loads[0] <= u <= loads[-1], f"{u} outside the measured range {loads[0]:.2f}..{loads[-1]:.2f}"
    return float(np.interp(u, loads, rows[column].to_numpy()))


@pytest.fixture(scope="module")
def desk():
    return run_sweep("desk_sweep.yaml")


@pytest.mark.parametrize("which", ["occupancy", "service_rate"])
def test_laws_fit_the_desk_sweep(desk, which):
    _, table = desk
    result = validate_sweep(table, which)
    assert result.pooled.r2 >= 0.85
    assert result.pooled.mape <= 0.15


def test_desk_sweep_covers_the_load_range(desk):
    _, table = desk
    for _, rows in table.groupby("capacity"):
        assert rows["system_load"].min() <= 0.5
        assert rows["system_load"].max() >= 4.0


def test_light_load_serves_almost_everyone_in_the_sweep(desk):
    _, table = desk
    light = table[table["system_load"] <= 0.8]
    assert len(light) >= 2
    assert light["service_rate"].min() >= 0.97


def test_stationary_identity_holds_on_every_loaded_run(desk):
    _, table = desk
    loaded = table[table["system_load"] > 0.5]
    assert len(loaded) > 0
    assert loaded["identity_residual"].max() <= 0.15


def test_no_pickup_beyond_the_matching_radius(desk):
    cfg, table = desk
    assert table["max_pickup_time"].max() <= cfg.constraints.matching_radius_time + cfg.delta


def test_load_approximation_on_the_desk_sweep(desk):
    cfg, table = desk
    fit = fit_load_approximation(table, cfg.constraints.max_detour_ratio, cfg.network.complexity)
    assert fit.slope > 0
    assert fit.r2 >= 0.9


def test_sweep_tables_are_byte_identical():
    _, first = run_sweep("desk_sweep.yaml", n_jobs=1, horizon=1800.0, warmup=180.0)
    _, second = run_sweep("desk_sweep.yaml", n_jobs=2, horizon=1800.0, warmup=180.0)
    assert first.to_csv(index=False) == second.to_csv(index=False)


def test_six_seats_serve_more_than_two_at_heavy_load():
    _, table = run_sweep("desk_capacity.yaml")
    two = load_at(table[table["capacity"] == 2], 4.0, "service_rate")
    six = load_at(table[table["capacity"] == 6], 4.0, "service_rate")
    assert six - two >= 0.15


def test_fleet_density_barely_moves_occupancy():
    _, table = run_sweep("desk_density.yaml")
    small = table[table["fleet_size"] == 50]
    large = table[table["fleet_size"] == 100]
    low, high = small["system_load"].min(), small["system_load"].max()
    matched = large[(large["system_load"] >= low) & (large["system_load"] <= high)]
    assert len(matched) >= 2
    for _, row in matched.iterrows():
        assert abs(row["occupancy"] - load_at(small, row["system_load"], "occupancy")) <= 0.15
