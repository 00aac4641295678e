import logging
from collections.abc import Iterable, Mapping
from itertools import combinations

import numpy as np

from ridepool.models.demand import Request
from ridepool.models.fleet import Vehicle
from ridepool.models.matching import ConstraintSet, FeasibleRoute, RtvEdge, RtvGraph, RtvLimits, Trip
from ridepool.dispatch.routing import plan_route
from ridepool.services.fleet import anchor, scheduled_count
from ridepool.services.road_network import DistanceOracle

logger = logging.getLogger(__name__)

RADIUS_EPS = 1e-9


def preassign(requests: Iterable[Request], vehicles: list[Vehicle], cs: ConstraintSet, oracle: DistanceOracle,
              speed: float) -> dict[int, list[int]]:
    """Candidate vehicles per request: within the matching radius and not full.

    Requests without a candidate are left out; they wait for the next step.
    """
    requests = list(requests)
    open_vehicles = [v for v in vehicles if scheduled_count(v) < v.capacity]
    if not requests or not open_vehicles:
        return {}

    anchors = [anchor(v, speed) for v in open_vehicles]
    nodes = [node for node, _ in anchors]
    lags = np.array([lag for _, lag in anchors])
    times = oracle.distances(nodes, [r.origin for r in requests]) / speed + lags[:, None]
    within = times <= cs.matching_radius_time + RADIUS_EPS

    candidates = {}
    for col, req in enumerate(requests):
        rows = np.flatnonzero(within[:, col])
        if len(rows):
            candidates[req.id] = [open_vehicles[j].id for j in rows]
    return candidates


def trip_value(trip: Trip, route: FeasibleRoute, value_per_request: float,
               bonus: Mapping[int, float] | None = None) -> float:
    """Sum over the trip's requests of (request value - delay cost in seconds)."""
    bonus = bonus or {}
    return sum(value_per_request + bonus.get(rid, 0.0) - route.costs[rid] for rid in trip)


def _nearest(vehicle: Vehicle, rids: list[int], pool: Mapping[int, Request], oracle: DistanceOracle,
             limit: int) -> list[int]:
    if limit == 0 or len(rids) <= limit:
        return sorted(rids)
    node = anchor(vehicle, 1.0)[0]
    row = oracle.row(node)
    ranked = sorted(rids, key=lambda rid: (row[pool[rid].origin], rid))
    return sorted(ranked[:limit])


def vehicle_trips(vehicle: Vehicle, rids: list[int], pool: Mapping[int, Request], cs: ConstraintSet,
                  oracle: DistanceOracle, speed: float, now: float, registry: Mapping[int, Request],
                  routing_mode: str, limits: RtvLimits) -> dict[Trip, FeasibleRoute]:
    """Feasible trips of one vehicle, grown level by level.

    A size-k trip is tried only when every (k-1)-subset was feasible for this
    vehicle, so the result is downward closed.
    """
    room = vehicle.capacity - scheduled_count(vehicle)
    feasible: dict[Trip, FeasibleRoute] = {}
    level: list[Trip] = []

    for rid in rids:
        route = plan_route(vehicle, [pool[rid]], cs, oracle, speed, now, registry, routing_mode)
        if route is not None:
            feasible[(rid,)] = route
            level.append((rid,))

    for k in range(2, room + 1):
        if len(feasible) >= limits.max_trips_per_vehicle:
            break
        previous = set(level)
        level = []
        tried = set()
        for a, b in combinations(sorted(previous), 2):
            union = tuple(sorted(set(a) | set(b)))
            if len(union) != k or union in tried:
                continue
            tried.add(union)
            if any(sub not in previous for sub in combinations(union, k - 1)):
                continue
            route = plan_route(vehicle, [pool[r] for r in union], cs, oracle, speed, now, registry, routing_mode)
            if route is None:
                continue
            feasible[union] = route
            level.append(union)
            if len(feasible) >= limits.max_trips_per_vehicle:
                break
        if not level:
            break
    return feasible


def build_rtv(candidates: Mapping[int, list[int]], vehicles: list[Vehicle], pool: Mapping[int, Request],
              cs: ConstraintSet, oracle: DistanceOracle, speed: float, now: float, routing_mode: str = "auto",
              registry: Mapping[int, Request] | None = None, value_per_request: float = 3000.0,
              limits: RtvLimits | None = None, bonus: Mapping[int, float] | None = None) -> RtvGraph:
    """RTV graph over the waiting pool.

    `pool` holds the requests being matched; `registry` resolves requests
    already scheduled on vehicles (defaults to `pool`).
    """
    limits = limits or RtvLimits()
    registry = registry if registry is not None else pool
    by_vehicle: dict[int, list[int]] = {}
    for rid, vids in candidates.items():
        for vid in vids:
            by_vehicle.setdefault(vid, []).append(rid)

    rtv = RtvGraph()
    for vehicle in sorted(vehicles, key=lambda v: v.id):
        rids = by_vehicle.get(vehicle.id)
        if not rids:
            continue
        rids = _nearest(vehicle, rids, pool, oracle, limits.max_requests_per_vehicle)
        trips = vehicle_trips(vehicle, rids, pool, cs, oracle, speed, now, registry, routing_mode, limits)
        for trip in sorted(trips, key=lambda t: (len(t), t)):
            route = trips[trip]
            rtv.edges.append(RtvEdge(trip, vehicle.id, route, trip_value(trip, route, value_per_request, bonus)))

    logger.debug(f"RTV graph: {len(rtv.edges)} edges over {len(by_vehicle)} vehicles")
    return rtv
