"""
Desk-scale validation of the occupancy and service-rate laws
Run this script once to produce the sweep table and the fit summary.

Usage:
    python scripts/run_desk_validation.py [config] [output_dir]
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from ridepool.config import Config
from ridepool.services.config_loader import load_config
from ridepool.services.engine import build_network, sweep
from ridepool.services.reports import write_validation_outputs

CONFIG = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "configs" / "desk_sweep.yaml"
OUTPUT = Path(sys.argv[2]) if len(sys.argv) > 2 else Path(Config.OUTPUT_DIR) / "desk_validation"
OUTPUT.mkdir(parents=True, exist_ok=True)

# ─────────────────────────────────────────────
# Sweep
# ─────────────────────────────────────────────

cfg, axes = load_config(CONFIG)
print(f"Sweeping {len(axes.capacities) * len(axes.fleet_sizes) * len(axes.arrival_rates)} runs from {CONFIG}...")

table = sweep(
    cfg,
    list(axes.arrival_rates),
    list(axes.capacities),
    list(axes.fleet_sizes),
    n_jobs=axes.jobs if axes.jobs is not None else Config.JOBS,
    graph=build_network(cfg.network),
    histogram_bin=Config.HISTOGRAM_BIN,
    apsp_max_nodes=Config.APSP_MAX_NODES,
)
table.to_csv(OUTPUT / "sweep.csv", index=False)

failed = table[table["error"] != ""]
if len(failed):
    print(f"⚠️  {len(failed)} run(s) failed:")
    print(failed[["index", "target_arrival_rate", "capacity", "fleet_size", "error"]].to_string(index=False))

# ─────────────────────────────────────────────
# Fits
# ─────────────────────────────────────────────

problems = write_validation_outputs(table, OUTPUT, cfg.constraints.max_detour_ratio, cfg.network.complexity)
for problem in problems:
    print(f"⚠️  {problem}")

print("\nMeasured points:")
print(table[["capacity", "fleet_size", "system_load", "occupancy", "service_rate"]].round(3).to_string(index=False))

fits = (OUTPUT / "fit_summary.csv").read_text()
print("\nFit summary:")
print(fits)

light = table[(table["system_load"] <= 0.8) & (table["error"] == "")]
if len(light):
    print(f"Lowest service rate at u <= 0.8: {light['service_rate'].min():.3f} (expected >= 0.97)")

print(f"✅ Outputs saved to {OUTPUT}")
