"""Time-stepped ride-pooling simulation.

Every Δ seconds the engine admits new requests, cancels those that waited too
long, matches the waiting pool to vehicles (preassign, RTV graph, exact
assignment), moves every vehicle Δ seconds along its schedule and records the
mean number of scheduled passengers per vehicle.
"""
import logging
import math
from dataclasses import replace
from itertools import product

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from ridepool.analysis.laws import loads, stationary_identity_residual
from ridepool.dispatch.assignment import solve_ilp
from ridepool.dispatch.rtv import build_rtv, preassign
from ridepool.errors import ConfigError
from ridepool.models.demand import Request
from ridepool.models.fleet import StopKind
from ridepool.models.laws import LoadInputs
from ridepool.models.network import RoadGraph
from ridepool.models.simulation import NetworkConfig, SimConfig, SimReport
from ridepool.services.audit import EventTrace, rtv_rows
from ridepool.services.demand import filter_trips, generate_poisson, read_requests, read_trips, subsample
from ridepool.services.fleet import advance, check_schedule, commit_schedule, initialize_fleet, scheduled_count
from ridepool.services.road_network import DistanceOracle, generate_grid, generate_irregular_grid, read_graph

logger = logging.getLogger(__name__)

TIME_EPS = 1e-9

SWEEP_KEYS = ["index", "seed", "target_arrival_rate", "subsample_rate"]
REPORT_KEYS = [
    "occupancy", "service_rate", "service_time", "mean_pickup_time", "max_pickup_time", "system_load",
    "arrival_rate", "total_requests", "served", "expired", "in_flight", "zero_count", "fleet_size", "capacity",
    "mean_wait_time", "mean_detour_ratio", "mean_onboard", "vehicle_distance", "mean_direct_distance",
    "normalized_load", "approximate_load", "identity_residual",
]
SWEEP_COLUMNS = SWEEP_KEYS + REPORT_KEYS + ["error"]


# ── Setup ─────────────────────────────────────────────────

def derive_seeds(seed: int) -> tuple[int, int]:
    """Independent (fleet, demand) seeds spawned from the run seed."""
    fleet_seq, demand_seq = np.random.SeedSequence(seed).spawn(2)
    return int(fleet_seq.generate_state(1)[0]), int(demand_seq.generate_state(1)[0])


def seeded(cfg: SimConfig) -> SimConfig:
    """Config with fleet and demand seeds derived from cfg.seed and the demand horizon aligned."""
    fleet_seed, demand_seed = derive_seeds(cfg.seed)
    demand = None
    if cfg.demand is not None:
        demand = replace(cfg.demand, seed=demand_seed, horizon=cfg.horizon)
    return replace(cfg, fleet=replace(cfg.fleet, seed=fleet_seed), demand=demand)


def build_network(net: NetworkConfig) -> RoadGraph:
    if net.file:
        return read_graph(net.file)
    if net.drop_fraction > 0 or net.jitter > 0:
        return generate_irregular_grid(net.rows, net.cols, net.spacing, net.drop_fraction, net.jitter, net.seed)
    return generate_grid(net.rows, net.cols, net.spacing)


def ingest(cfg: SimConfig, g: RoadGraph, oracle: DistanceOracle) -> list[Request]:
    """Every request of the configured trips or request file, before subsampling."""
    if cfg.requests_file:
        return read_requests(cfg.requests_file, g)
    if cfg.trips_file:
        return filter_trips(read_trips(cfg.trips_file), g, cfg.delta, cfg.area, cfg.fleet.speed, oracle)
    return []


def load_demand(cfg: SimConfig, g: RoadGraph, oracle: DistanceOracle,
                ingested: list[Request] | None = None) -> list[Request]:
    if cfg.demand is not None:
        return generate_poisson(cfg.demand, g, cfg.delta, cfg.fleet.speed, oracle)
    requests = ingested if ingested is not None else ingest(cfg, g, oracle)
    if cfg.subsample_rate < 1:
        requests = subsample(requests, cfg.subsample_rate, derive_seeds(cfg.seed)[1])
    return requests


# ── Simulation ────────────────────────────────────────────

class Simulation:
    """Private world state of one run."""

    def __init__(self, cfg: SimConfig, g: RoadGraph, requests: list[Request], oracle: DistanceOracle):
        self.cfg = cfg
        self.oracle = oracle
        self.speed = cfg.fleet.speed
        self.requests = sorted(requests, key=lambda r: (r.request_time, r.id))
        self.registry = {r.id: r for r in self.requests}
        if len(self.registry) != len(self.requests):
            raise ConfigError("demand", "request ids must be unique")
        self.vehicles = initialize_fleet(cfg.fleet, self.requests, g)

        self.waiting: dict[int, Request] = {}
        self.reverted: set[int] = set()
        self.assigned: dict[int, int] = {}
        self.assign_time: dict[int, float] = {}
        self.pickup_time: dict[int, float] = {}
        self.dropoff_time: dict[int, float] = {}
        self.expired_at: dict[int, float] = {}
        self.admitted: list[Request] = []
        self._next = 0

        self.trace = EventTrace(cfg.trace)
        self.rtv_log: list[dict] = []
        self.step_times: list[float] = []
        self.step_occupancy: list[float] = []
        self.step_onboard: list[float] = []
        self.step_waiting: list[int] = []

    def _admit(self, now: float):
        while self._next < len(self.requests) and self.requests[self._next].request_time <= now + TIME_EPS:
            req = self.requests[self._next]
            self._next += 1
            self.waiting[req.id] = req
            self.admitted.append(req)
            self.trace.log_action(now, "requested", req.id, node=req.origin)

    def _expire(self, now: float):
        cs = self.cfg.constraints
        for rid in sorted(self.waiting):
            req = self.waiting[rid]
            # a request dropped from a re-planned vehicle can still be served until its pickup limit
            limit = cs.max_pickup_time if rid in self.reverted else cs.max_wait_time
            if now - req.request_time > limit + TIME_EPS:
                del self.waiting[rid]
                self.expired_at[rid] = now
                self.trace.log_action(now, "expired", rid, details={"waited": now - req.request_time})

    def _release(self):
        """Planning copies of the vehicles with not-yet-boarded requests taken off their schedules."""
        released: dict[int, int] = {}
        planning = []
        for v in self.vehicles:
            pending = set(v.pending_pickups())
            if pending:
                for rid in pending:
                    released[rid] = v.id
                v = replace(v, schedule=[s for s in v.schedule if s.request_id not in pending], leg=[])
            planning.append(v)
        return planning, released

    def _match(self, now: float):
        cfg = self.cfg
        pool = dict(self.waiting)
        planning, released, bonus = self.vehicles, {}, {}
        if cfg.allow_reassignment:
            planning, released = self._release()
            for rid in released:
                pool[rid] = self.registry[rid]
                bonus[rid] = cfg.request_value
        if not pool:
            return

        ordered = [pool[rid] for rid in sorted(pool)]
        candidates = preassign(ordered, planning, cfg.constraints, self.oracle, self.speed)
        for rid, vid in released.items():
            vids = candidates.setdefault(rid, [])
            if vid not in vids:
                vids.append(vid)
                vids.sort()

        rtv = build_rtv(candidates, planning, pool, cfg.constraints, self.oracle, self.speed, now, cfg.routing_mode,
                        self.registry, cfg.request_value, cfg.limits, bonus)
        solution = solve_ilp(rtv)
        if cfg.dump_rtv:
            self.rtv_log.extend(rtv_rows(now, rtv, solution))

        chosen = {e.vehicle_id: e for e in solution.chosen}
        taken = {rid: e.vehicle_id for e in solution.chosen for rid in e.trip}
        for v in self.vehicles:
            edge = chosen.get(v.id)
            if edge is not None:
                commit_schedule(v, edge.route)
            elif released and any(s.request_id in taken for s in v.schedule):
                v.schedule = [s for s in v.schedule if s.request_id not in taken]
                v.leg = []
                check_schedule(v)

        for rid, vid in taken.items():
            if released.get(rid) == vid:
                continue
            self.waiting.pop(rid, None)
            self.reverted.discard(rid)
            self.assigned[rid] = vid
            self.assign_time.setdefault(rid, now)
            action = "reassigned" if rid in released else "assigned"
            self.trace.log_action(now, action, rid, vid, details={"value": round(chosen[vid].value, 6)})

        for rid, vid in released.items():
            if rid not in taken and vid in chosen:
                # its vehicle took a new schedule without it
                del self.assigned[rid]
                self.assign_time.pop(rid, None)
                self.waiting[rid] = self.registry[rid]
                self.reverted.add(rid)
                self.trace.log_action(now, "released", rid, vid)

        logger.debug(
            f"t={now:.0f}s pool={len(pool)} candidates={len(candidates)} edges={len(rtv.edges)} "
            f"assigned={len(taken)} objective={solution.objective:.1f}"
        )

    def _move(self, now: float):
        for v in self.vehicles:
            events = advance(v, self.cfg.delta, self.oracle, self.speed, now)
            for ev in events:
                if ev.event == "picked_up":
                    self.pickup_time[ev.request_id] = ev.time
                else:
                    self.dropoff_time[ev.request_id] = ev.time
                    self.assigned.pop(ev.request_id, None)
            self.trace.log_vehicle_events(events)

    def _record(self, now: float):
        self.step_times.append(now)
        self.step_occupancy.append(float(np.mean([scheduled_count(v) for v in self.vehicles])))
        self.step_onboard.append(float(np.mean([len(v.onboard) for v in self.vehicles])))
        self.step_waiting.append(len(self.waiting))

    def step(self, now: float):
        self._admit(now)
        self._expire(now)
        self._match(now)
        self._move(now)
        self._record(now)

    def run(self, histogram_bin: float = 60.0) -> SimReport:
        steps = int(math.floor(self.cfg.horizon / self.cfg.delta + TIME_EPS))
        for k in range(steps):
            self.step(k * self.cfg.delta)
        return self.report(histogram_bin)

    def report(self, histogram_bin: float = 60.0) -> SimReport:
        cfg = self.cfg
        warmup = cfg.effective_warmup
        window = [r for r in self.admitted if r.request_time >= warmup - TIME_EPS]
        served = [r for r in window if r.id in self.dropoff_time]
        expired = sum(1 for r in window if r.id in self.expired_at)
        total = len(window)
        in_flight = total - len(served) - expired

        denominator = len(served) + expired if cfg.exclude_inflight else total
        service_rate = len(served) / denominator if denominator else 1.0

        times = np.asarray(self.step_times)
        post = times >= warmup - TIME_EPS
        occupancy = float(np.mean(np.asarray(self.step_occupancy)[post])) if post.any() else 0.0
        onboard = float(np.mean(np.asarray(self.step_onboard)[post])) if post.any() else 0.0

        arrival_rate = total / (cfg.horizon - warmup)
        service_time = _mean([self.dropoff_time[r.id] - self.assign_time[r.id] for r in served])
        pickups = [self.pickup_time[r.id] - r.request_time for r in window if r.id in self.pickup_time]
        waits = [self.assign_time[r.id] - r.request_time for r in window if r.id in self.assign_time]
        detours = [
            (self.dropoff_time[r.id] - self.pickup_time[r.id] - r.direct_time) / r.direct_time for r in served
        ]
        direct = _mean([r.direct_distance for r in window])

        load = loads(LoadInputs(
            arrival_rate=arrival_rate,
            fleet_size=cfg.fleet.size,
            service_time=service_time,
            mean_distance=direct,
            speed=self.speed,
            detour_ratio=cfg.constraints.max_detour_ratio,
            complexity=cfg.network.complexity,
            capacity=cfg.fleet.capacity,
        ))
        residual = 0.0
        if total:
            residual = stationary_identity_residual(occupancy, arrival_rate, service_time, service_rate,
                                                    cfg.fleet.size)

        edges, counts = [], []
        if pickups:
            top = max(histogram_bin, math.ceil(max(pickups) / histogram_bin) * histogram_bin)
            bins = np.arange(0.0, top + histogram_bin / 2, histogram_bin)
            hist, bins = np.histogram(pickups, bins=bins)
            edges, counts = bins.tolist(), hist.tolist()

        return SimReport(
            occupancy=occupancy,
            service_rate=service_rate,
            service_time=service_time,
            mean_pickup_time=_mean(pickups),
            system_load=load["system_load"],
            arrival_rate=arrival_rate,
            total_requests=total,
            served=len(served),
            expired=expired,
            in_flight=in_flight,
            zero_count=denominator == 0,
            fleet_size=cfg.fleet.size,
            capacity=cfg.fleet.capacity,
            mean_wait_time=_mean(waits),
            mean_detour_ratio=_mean(detours),
            mean_onboard=onboard,
            vehicle_distance=float(sum(v.odometer for v in self.vehicles)),
            mean_direct_distance=direct,
            normalized_load=load["normalized_load"],
            approximate_load=load["approximate_load"],
            identity_residual=residual,
            max_pickup_time=max(pickups, default=0.0),
            histogram_edges=edges,
            histogram_counts=counts,
            step_times=list(self.step_times),
            step_occupancy=list(self.step_occupancy),
            step_onboard=list(self.step_onboard),
            step_waiting=list(self.step_waiting),
            events=self.trace.rows,
            rtv_rows=self.rtv_log,
        )


def _mean(values) -> float:
    return float(np.mean(values)) if len(values) else 0.0


def run(cfg: SimConfig, graph: RoadGraph | None = None, requests: list[Request] | None = None,
        oracle: DistanceOracle | None = None, histogram_bin: float = 60.0, apsp_max_nodes: int = 2500) -> SimReport:
    cfg = seeded(cfg)
    g = graph if graph is not None else build_network(cfg.network)
    oracle = oracle if oracle is not None else DistanceOracle(g, apsp_max_nodes)
    if requests is None:
        requests = load_demand(cfg, g, oracle)

    logger.info(
        f"Run start: N={cfg.fleet.size} C={cfg.fleet.capacity} requests={len(requests)} "
        f"horizon={cfg.horizon:g}s seed={cfg.seed}"
    )
    report = Simulation(cfg, g, requests, oracle).run(histogram_bin)
    logger.info(
        f"Run end: occupancy={report.occupancy:.3f} service_rate={report.service_rate:.3f} "
        f"u={report.system_load:.3f} served={report.served}/{report.total_requests}"
    )
    return report


# ── Sweeps ────────────────────────────────────────────────

def dedupe(values: list, field: str) -> list:
    if not values:
        raise ConfigError(field, "must not be empty")
    unique = list(dict.fromkeys(values))
    if len(unique) < len(values):
        logger.warning(f"Duplicate values in {field} dropped: {values} -> {unique}")
    return unique


def _row_config(base: SimConfig, index: int, arrival_rate: float, capacity: int, fleet_size: int,
                ingested_rate: float | None) -> SimConfig:
    fleet = replace(base.fleet, size=fleet_size, capacity=capacity)
    cfg = replace(base, fleet=fleet, seed=base.seed ^ index)
    if base.demand is not None:
        return replace(cfg, demand=replace(base.demand, arrival_rate=arrival_rate))
    if ingested_rate:
        return replace(cfg, subsample_rate=min(1.0, arrival_rate / ingested_rate))
    return cfg


def _sweep_row(index: int, base: SimConfig, arrival_rate: float, capacity: int, fleet_size: int, g: RoadGraph,
               ingested: list[Request] | None, ingested_rate: float | None, histogram_bin: float,
               apsp_max_nodes: int) -> dict:
    row = {"index": index, "seed": base.seed ^ index, "target_arrival_rate": arrival_rate,
           "subsample_rate": math.nan, "fleet_size": fleet_size, "capacity": capacity, "error": ""}
    try:
        cfg = _row_config(base, index, arrival_rate, capacity, fleet_size, ingested_rate)
        row["subsample_rate"] = cfg.subsample_rate if cfg.demand is None else math.nan
        oracle = DistanceOracle(g, apsp_max_nodes)
        requests = load_demand(seeded(cfg), g, oracle, ingested)
        report = run(cfg, g, requests, oracle, histogram_bin)
    except Exception as exc:
        logger.warning(f"Sweep row {index} (λ={arrival_rate}, C={capacity}, N={fleet_size}) failed: {exc}")
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(report.summary())
    return row


def sweep(base: SimConfig, arrival_rates: list[float], capacities: list[int], fleet_sizes: list[int],
          n_jobs: int = -1, graph: RoadGraph | None = None, histogram_bin: float = 60.0,
          apsp_max_nodes: int = 2500) -> pd.DataFrame:
    """One run per (capacity, fleet size, arrival rate), row seed = base seed XOR row index.

    On ingested demand each target rate becomes a subsample rate of the trace.
    A failed row keeps its axes and error message; the other rows still run.
    """
    arrival_rates = dedupe(list(arrival_rates), "sweep.arrival_rates")
    capacities = dedupe(list(capacities), "sweep.capacities")
    fleet_sizes = dedupe(list(fleet_sizes), "sweep.fleet_sizes")
    g = graph if graph is not None else build_network(base.network)

    ingested, ingested_rate = None, None
    if base.demand is None and (base.trips_file or base.requests_file):
        ingested = ingest(base, g, DistanceOracle(g, apsp_max_nodes))
        ingested_rate = len(ingested) / base.horizon

    axes = list(product(capacities, fleet_sizes, arrival_rates))
    logger.info(f"Sweep start: {len(axes)} runs, n_jobs={n_jobs}")
    rows = Parallel(n_jobs=n_jobs)(
        delayed(_sweep_row)(i, base, lam, c, n, g, ingested, ingested_rate, histogram_bin, apsp_max_nodes)
        for i, (c, n, lam) in enumerate(axes)
    )
    table = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    failed = int((table["error"] != "").sum())
    logger.info(f"Sweep end: {len(table) - failed} completed, {failed} failed")
    return table
