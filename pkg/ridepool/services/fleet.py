import logging

import numpy as np

from ridepool.errors import FleetInvariantError
from ridepool.models.demand import Request
from ridepool.models.fleet import FleetConfig, Stop, StopKind, Vehicle, VehicleEvent
from ridepool.models.matching import FeasibleRoute
from ridepool.models.network import RoadGraph
from ridepool.services.road_network import DistanceOracle

logger = logging.getLogger(__name__)

# distance below which a vehicle counts as having reached a node
ARRIVAL_EPS = 1e-9


def initialize_fleet(cfg: FleetConfig, requests: list[Request], g: RoadGraph) -> list[Vehicle]:
    """Place vehicles at nodes drawn from the empirical origin distribution of requests."""
    rng = np.random.default_rng(cfg.seed)
    if requests:
        origins = np.array([r.origin for r in requests], dtype=np.int64)
        nodes = rng.choice(origins, size=cfg.size, replace=True)
    else:
        logger.warning("No requests to sample vehicle positions from; placing vehicles uniformly")
        nodes = rng.choice(g.node_count, size=cfg.size, replace=True)
    return [Vehicle(id=i, capacity=cfg.capacity, node=int(node)) for i, node in enumerate(nodes)]


def scheduled_count(vehicle: Vehicle) -> int:
    """Onboard passengers plus passengers scheduled to be picked up."""
    return len(vehicle.onboard) + sum(1 for s in vehicle.schedule if s.kind is StopKind.PICKUP)


def anchor(vehicle: Vehicle, speed: float) -> tuple[int, float]:
    """Node where re-planning starts and the seconds needed to reach it.

    A vehicle between nodes first completes its current edge.
    """
    if vehicle.edge is None:
        return vehicle.node, 0.0
    _, to, length = vehicle.edge
    return to, (length - vehicle.progress) / speed


def commit_schedule(vehicle: Vehicle, route: FeasibleRoute):
    vehicle.schedule = list(route.stop_sequence)
    vehicle.leg = []
    check_schedule(vehicle)


def check_schedule(vehicle: Vehicle):
    """Raise FleetInvariantError when the schedule breaks capacity or precedence."""
    if scheduled_count(vehicle) > vehicle.capacity:
        raise FleetInvariantError(f"vehicle {vehicle.id} scheduled beyond capacity {vehicle.capacity}")
    picked = set()
    dropped = set()
    for stop in vehicle.schedule:
        rid = stop.request_id
        if stop.kind is StopKind.PICKUP:
            if rid in vehicle.onboard or rid in picked:
                raise FleetInvariantError(f"vehicle {vehicle.id} picks up request {rid} twice")
            picked.add(rid)
        else:
            if rid not in vehicle.onboard and rid not in picked:
                raise FleetInvariantError(f"vehicle {vehicle.id} drops request {rid} before pickup")
            if rid in dropped:
                raise FleetInvariantError(f"vehicle {vehicle.id} drops request {rid} twice")
            dropped.add(rid)
    missing = (vehicle.onboard | picked) - dropped
    if missing:
        raise FleetInvariantError(f"vehicle {vehicle.id} has no dropoff for {sorted(missing)}")


def _serve_stops(vehicle: Vehicle, time: float, events: list[VehicleEvent]):
    while vehicle.schedule and vehicle.schedule[0].node == vehicle.node:
        stop = vehicle.schedule.pop(0)
        rid = stop.request_id
        if stop.kind is StopKind.PICKUP:
            if rid in vehicle.onboard:
                raise FleetInvariantError(f"request {rid} boarded vehicle {vehicle.id} twice")
            vehicle.onboard.add(rid)
            if len(vehicle.onboard) > vehicle.capacity:
                raise FleetInvariantError(f"vehicle {vehicle.id} over capacity after boarding {rid}")
            vehicle.boarded_at[rid] = time
            events.append(VehicleEvent(time, vehicle.id, "picked_up", rid, vehicle.node))
        else:
            if rid not in vehicle.onboard:
                raise FleetInvariantError(f"request {rid} alighted vehicle {vehicle.id} without boarding")
            vehicle.onboard.discard(rid)
            vehicle.boarded_at.pop(rid, None)
            events.append(VehicleEvent(time, vehicle.id, "dropped_off", rid, vehicle.node))


def advance(vehicle: Vehicle, dt: float, oracle: DistanceOracle, speed: float, now: float) -> list[VehicleEvent]:
    """Move the vehicle speed*dt meters along its planned route, serving stops on the way.

    Stops are served instantly; the remaining distance carries over toward the
    next stop. An empty schedule leaves the vehicle where it is.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    g = oracle.graph
    budget = speed * dt
    travelled = 0.0
    events: list[VehicleEvent] = []

    while True:
        if vehicle.edge is None:
            _serve_stops(vehicle, now + travelled / speed, events)
            if not vehicle.schedule:
                vehicle.leg = []
                break
            if budget - travelled <= ARRIVAL_EPS:
                break
            if not vehicle.leg:
                vehicle.leg = list(oracle.path(vehicle.node, vehicle.schedule[0].node).node_sequence[1:])
            nxt = vehicle.leg.pop(0)
            vehicle.edge = (vehicle.node, nxt, g.edge_length(vehicle.node, nxt))
            vehicle.progress = 0.0

        _, to, length = vehicle.edge
        remaining = length - vehicle.progress
        available = budget - travelled
        if available + ARRIVAL_EPS >= remaining:
            travelled += remaining
            vehicle.odometer += remaining
            vehicle.node = to
            vehicle.edge = None
            vehicle.progress = 0.0
            continue
        vehicle.progress += available
        vehicle.odometer += available
        break

    return events
