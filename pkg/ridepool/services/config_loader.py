"""YAML run documents to SimConfig, and the resolved config written back into manifests."""
import logging
from pathlib import Path

import yaml

from ridepool.errors import ConfigError
from ridepool.models.demand import BoundingBox, DemandConfig
from ridepool.models.fleet import FleetConfig
from ridepool.models.matching import MAX_EXHAUSTIVE_STOPS, ConstraintSet, RtvLimits
from ridepool.models.simulation import NetworkConfig, RunManifest, SimConfig, SweepAxes

logger = logging.getLogger(__name__)

SECTIONS = ("network", "demand", "fleet", "constraints", "simulation", "sweep")
FIELDS = {
    "network": {"rows", "cols", "spacing", "file", "drop_fraction", "jitter", "seed", "complexity"},
    "demand": {"arrival_rate", "od_distribution", "hotspot_center", "hotspot_spread", "od_pairs", "trips_file",
               "requests_file", "subsample_rate", "area"},
    "fleet": {"size", "capacity", "speed"},
    "constraints": {"max_pickup_time", "max_detour_ratio", "max_wait_time", "matching_radius_time"},
    "simulation": {"delta", "horizon", "warmup", "routing_mode", "seed", "allow_reassignment", "exclude_inflight",
                   "value_per_request", "max_requests_per_vehicle", "max_trips_per_vehicle", "trace", "dump_rtv"},
    "sweep": {"arrival_rates", "capacities", "fleet_sizes", "jobs"},
}


class _Section:
    """Typed access to one mapping of the document; errors carry the dotted field."""

    def __init__(self, name: str, values, base_dir: Path):
        if values is None:
            values = {}
        if not isinstance(values, dict):
            raise ConfigError(name, "must be a mapping")
        unknown = sorted(set(values) - FIELDS[name])
        if unknown:
            raise ConfigError(f"{name}.{unknown[0]}", "unknown field")
        self.name = name
        self.values = values
        self.base_dir = base_dir

    def has(self, key: str) -> bool:
        return self.values.get(key) is not None

    def _fail(self, key: str, message: str):
        raise ConfigError(f"{self.name}.{key}", message)

    def integer(self, key: str, default=None):
        value = self.values.get(key)
        if value is None:
            value = default
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            self._fail(key, f"expected an integer, got {value!r}")
        return value

    def number(self, key: str, default=None):
        value = self.values.get(key)
        if value is None:
            value = default
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self._fail(key, f"expected a number, got {value!r}")
        return float(value)

    def flag(self, key: str, default: bool) -> bool:
        value = self.values.get(key)
        value = default if value is None else value
        if not isinstance(value, bool):
            self._fail(key, f"expected true or false, got {value!r}")
        return value

    def text(self, key: str, default=None):
        value = self.values.get(key)
        value = default if value is None else value
        if value is not None and not isinstance(value, str):
            self._fail(key, f"expected a string, got {value!r}")
        return value

    def path(self, key: str):
        value = self.text(key)
        if value is None:
            return None
        path = Path(value)
        return str(path if path.is_absolute() else self.base_dir / path)

    def numbers(self, key: str, length: int | None = None, integer: bool = False):
        value = self.values.get(key)
        if value is None:
            return None
        if not isinstance(value, list):
            self._fail(key, f"expected a list, got {value!r}")
        if length is not None and len(value) != length:
            self._fail(key, f"expected {length} values, got {len(value)}")
        for item in value:
            if isinstance(item, bool) or not isinstance(item, int if integer else (int, float)):
                self._fail(key, f"expected {'integers' if integer else 'numbers'}, got {item!r}")
        return tuple(value if integer else [float(v) for v in value])


def parse_config(doc, base_dir: str | Path = ".") -> tuple[SimConfig, SweepAxes]:
    """Build the run config and sweep axes from a parsed document; every omitted field takes its default."""
    if not isinstance(doc, dict):
        raise ConfigError("document", "must be a mapping of sections")
    if "config" in doc:
        # a run manifest: the resolved config sits under `config`
        doc = doc["config"]
        if not isinstance(doc, dict):
            raise ConfigError("config", "must be a mapping of sections")
    unknown = sorted(set(doc) - set(SECTIONS))
    if unknown:
        raise ConfigError(unknown[0], "unknown section")
    base_dir = Path(base_dir)
    net, dem, flt, con, sim, swp = (_Section(name, doc.get(name), base_dir) for name in SECTIONS)

    network = NetworkConfig(
        rows=net.integer("rows", 20),
        cols=net.integer("cols", 20),
        spacing=net.number("spacing", 100.0),
        file=net.path("file"),
        drop_fraction=net.number("drop_fraction", 0.0),
        jitter=net.number("jitter", 0.0),
        seed=net.integer("seed", 0),
        complexity=net.number("complexity", 0.0),
    )
    fleet = FleetConfig(
        size=flt.integer("size", 50),
        capacity=flt.integer("capacity", 2),
        speed=flt.number("speed", 6.0),
    )
    constraints = ConstraintSet(
        max_pickup_time=con.number("max_pickup_time", 900.0),
        max_detour_ratio=con.number("max_detour_ratio", 0.5),
        max_wait_time=con.number("max_wait_time", 300.0),
        matching_radius_time=con.number("matching_radius_time", 900.0),
    )
    limits = RtvLimits(
        max_requests_per_vehicle=sim.integer("max_requests_per_vehicle", 8),
        max_trips_per_vehicle=sim.integer("max_trips_per_vehicle", 128),
    )
    horizon = sim.number("horizon", 7200.0)

    trips_file = dem.path("trips_file")
    requests_file = dem.path("requests_file")
    demand = None
    if dem.has("arrival_rate") or not (trips_file or requests_file):
        pairs = dem.values.get("od_pairs") or []
        if not isinstance(pairs, list) or any(not isinstance(p, list) or len(p) != 3 for p in pairs):
            raise ConfigError("demand.od_pairs", "expected a list of [origin, destination, weight]")
        try:
            od_pairs = tuple((int(o), int(d), float(w)) for o, d, w in pairs)
        except (TypeError, ValueError):
            raise ConfigError("demand.od_pairs", "origin and destination must be node ids, weight a number") from None
        center = dem.numbers("hotspot_center", length=2)
        demand = DemandConfig(
            arrival_rate=dem.number("arrival_rate", 0.0),
            horizon=horizon,
            od_distribution=dem.text("od_distribution", "uniform"),
            hotspot_center=center,
            hotspot_spread=dem.number("hotspot_spread"),
            od_pairs=od_pairs,
        )
    area = dem.numbers("area", length=4)

    cfg = SimConfig(
        fleet=fleet,
        network=network,
        constraints=constraints,
        demand=demand,
        trips_file=trips_file,
        requests_file=requests_file,
        subsample_rate=dem.number("subsample_rate", 1.0),
        area=BoundingBox(*area) if area else None,
        delta=sim.number("delta", 2.0),
        horizon=horizon,
        warmup=sim.number("warmup"),
        routing_mode=sim.text("routing_mode", "auto"),
        seed=sim.integer("seed", 0),
        allow_reassignment=sim.flag("allow_reassignment", False),
        exclude_inflight=sim.flag("exclude_inflight", True),
        value_per_request=sim.number("value_per_request"),
        limits=limits,
        trace=sim.flag("trace", False),
        dump_rtv=sim.flag("dump_rtv", False),
    )

    axes = SweepAxes(
        arrival_rates=swp.numbers("arrival_rates") or ((demand.arrival_rate,) if demand else (0.0,)),
        capacities=swp.numbers("capacities", integer=True) or (fleet.capacity,),
        fleet_sizes=swp.numbers("fleet_sizes", integer=True) or (fleet.size,),
        jobs=swp.integer("jobs"),
    )
    if cfg.routing_mode == "exhaustive" and 2 * max(axes.capacities) > MAX_EXHAUSTIVE_STOPS:
        raise ConfigError("sweep.capacities", f"exhaustive routing plans at most {MAX_EXHAUSTIVE_STOPS // 2} seats")
    return cfg, axes


def load_config(path: str | Path) -> tuple[SimConfig, SweepAxes]:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError("document", f"no such file: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("document", f"not valid YAML: {exc}") from None
    return parse_config(doc, path.parent)


def config_to_dict(cfg: SimConfig, axes: SweepAxes | None = None) -> dict:
    """Fully resolved document; parse_config(config_to_dict(cfg)) rebuilds an equivalent config."""
    demand = {
        "trips_file": cfg.trips_file,
        "requests_file": cfg.requests_file,
        "subsample_rate": cfg.subsample_rate,
        "area": [cfg.area.xmin, cfg.area.ymin, cfg.area.xmax, cfg.area.ymax] if cfg.area else None,
    }
    if cfg.demand is not None:
        demand.update({
            "arrival_rate": cfg.demand.arrival_rate,
            "od_distribution": cfg.demand.od_distribution,
            "hotspot_center": list(cfg.demand.hotspot_center) if cfg.demand.hotspot_center else None,
            "hotspot_spread": cfg.demand.hotspot_spread,
            "od_pairs": [list(p) for p in cfg.demand.od_pairs],
        })
    doc = {
        "network": {
            "rows": cfg.network.rows,
            "cols": cfg.network.cols,
            "spacing": cfg.network.spacing,
            "file": cfg.network.file,
            "drop_fraction": cfg.network.drop_fraction,
            "jitter": cfg.network.jitter,
            "seed": cfg.network.seed,
            "complexity": cfg.network.complexity,
        },
        "demand": demand,
        "fleet": {"size": cfg.fleet.size, "capacity": cfg.fleet.capacity, "speed": cfg.fleet.speed},
        "constraints": {
            "max_pickup_time": cfg.constraints.max_pickup_time,
            "max_detour_ratio": cfg.constraints.max_detour_ratio,
            "max_wait_time": cfg.constraints.max_wait_time,
            "matching_radius_time": cfg.constraints.matching_radius_time,
        },
        "simulation": {
            "delta": cfg.delta,
            "horizon": cfg.horizon,
            "warmup": cfg.effective_warmup,
            "routing_mode": cfg.routing_mode,
            "seed": cfg.seed,
            "allow_reassignment": cfg.allow_reassignment,
            "exclude_inflight": cfg.exclude_inflight,
            "value_per_request": cfg.request_value,
            "max_requests_per_vehicle": cfg.limits.max_requests_per_vehicle,
            "max_trips_per_vehicle": cfg.limits.max_trips_per_vehicle,
            "trace": cfg.trace,
            "dump_rtv": cfg.dump_rtv,
        },
    }
    if axes is not None:
        doc["sweep"] = {
            "arrival_rates": list(axes.arrival_rates),
            "capacities": list(axes.capacities),
            "fleet_sizes": list(axes.fleet_sizes),
            "jobs": axes.jobs,
        }
    return doc


def write_manifest(manifest: RunManifest, path: str | Path, seeds: dict | None = None):
    doc = {
        "version": manifest.version,
        "seed": manifest.seed,
        "derived_seeds": seeds or {},
        "output_dir": manifest.output_dir,
        "inputs": manifest.inputs,
        "config": manifest.config,
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))
    logger.debug(f"Manifest written to {path}")
