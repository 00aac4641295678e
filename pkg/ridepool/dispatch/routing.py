"""Route planning for one vehicle and a set of requests.

A plan covers every passenger the vehicle is responsible for: onboard
passengers contribute a dropoff, scheduled and new passengers a pickup and a
dropoff. Cost of a route is the summed delay in seconds: pickup time (request
to pickup) plus detour time (in-vehicle time beyond the direct trip time).
"""
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

from ridepool.errors import RoutingError
from ridepool.models.demand import Request
from ridepool.models.fleet import Stop, StopKind, Vehicle
from ridepool.models.matching import MAX_EXHAUSTIVE_STOPS, ConstraintSet, FeasibleRoute, RequestTiming
from ridepool.services.fleet import anchor
from ridepool.services.road_network import DistanceOracle

# auto mode switches to nearest-neighbour routing above this many stops
AUTO_EXHAUSTIVE_STOPS = 8
CONSTRAINT_EPS = 1e-9


@dataclass
class _Plan:
    start_time: float
    capacity: int
    onboard: frozenset[int]
    stops: list[Stop]
    info: dict[int, Request]
    boarded_at: dict[int, float]
    dist: list[list[float]]  # local matrix; index 0 is the start node, i+1 is stops[i]
    speed: float
    cs: ConstraintSet


def _make_plan(vehicle: Vehicle, new_requests: Iterable[Request], cs: ConstraintSet, oracle: DistanceOracle,
               speed: float, now: float, registry: Mapping[int, Request] | None) -> _Plan:
    new_requests = sorted(new_requests, key=lambda r: r.id)
    registry = registry or {}
    info = {}
    for rid in list(vehicle.onboard) + vehicle.pending_pickups():
        if rid not in registry:
            raise RoutingError(f"request {rid} on vehicle {vehicle.id} is missing from the registry")
        info[rid] = registry[rid]
    for r in new_requests:
        if r.id in info:
            raise RoutingError(f"request {r.id} is already scheduled on vehicle {vehicle.id}")
        info[r.id] = r

    pending = vehicle.pending_pickups()
    if len(vehicle.onboard) + len(pending) + len(new_requests) > vehicle.capacity:
        raise RoutingError(f"vehicle {vehicle.id} cannot hold {len(new_requests)} more passengers")

    stops = [Stop(StopKind.DROPOFF, rid, info[rid].destination) for rid in sorted(vehicle.onboard)]
    for rid in sorted(pending + [r.id for r in new_requests]):
        stops.append(Stop(StopKind.PICKUP, rid, info[rid].origin))
        stops.append(Stop(StopKind.DROPOFF, rid, info[rid].destination))
    stops.sort(key=lambda s: (s.request_id, s.kind is StopKind.DROPOFF))

    start, lag = anchor(vehicle, speed)
    nodes = [start] + [s.node for s in stops]
    dist = oracle.distances(nodes, nodes).tolist()
    return _Plan(
        start_time=now + lag,
        capacity=vehicle.capacity,
        onboard=frozenset(vehicle.onboard),
        stops=stops,
        info=info,
        boarded_at=dict(vehicle.boarded_at),
        dist=dist,
        speed=speed,
        cs=cs,
    )


def _evaluate(plan: _Plan, order: list[int]) -> FeasibleRoute | None:
    """Timings and cost of visiting plan.stops in `order`; None if a constraint fails."""
    cs = plan.cs
    t = plan.start_time
    here = 0
    load = len(plan.onboard)
    picked: dict[int, float] = {}
    timings: dict[int, RequestTiming] = {}
    costs: dict[int, float] = {}
    pickup_times: dict[int, float] = {}

    for idx in order:
        stop = plan.stops[idx]
        t += plan.dist[here][idx + 1] / plan.speed
        here = idx + 1
        req = plan.info[stop.request_id]
        if stop.kind is StopKind.PICKUP:
            load += 1
            wait = t - req.request_time
            if load > plan.capacity or wait > cs.max_pickup_time + CONSTRAINT_EPS:
                return None
            picked[req.id] = t
            pickup_times[req.id] = wait
        else:
            boarded = picked.get(req.id, plan.boarded_at.get(req.id))
            if boarded is None:
                return None
            ratio = (t - boarded - req.direct_time) / req.direct_time
            if ratio > cs.max_detour_ratio + CONSTRAINT_EPS:
                return None
            load -= 1
            pickup = pickup_times.get(req.id, 0.0)
            timings[req.id] = RequestTiming(pickup_time=pickup, detour_ratio=ratio)
            costs[req.id] = pickup + (t - boarded - req.direct_time)

    return FeasibleRoute(
        stop_sequence=tuple(plan.stops[i] for i in order),
        total_cost=sum(costs.values()),
        per_request=timings,
        costs=costs,
    )


def _exhaustive_order(plan: _Plan) -> list[int] | None:
    """Branch-and-bound over precedence-valid orderings; first minimum in stop order wins."""
    cs = plan.cs
    stops = plan.stops
    n = len(stops)
    pickup_index = {s.request_id: i for i, s in enumerate(stops) if s.kind is StopKind.PICKUP}
    dropoff_index = {s.request_id: i for i, s in enumerate(stops) if s.kind is StopKind.DROPOFF}
    best_cost = math.inf
    best_order: list[int] | None = None
    order: list[int] = []
    done = [False] * n
    board_time = dict(plan.boarded_at)

    def bound_ok(here: int, t: float) -> bool:
        # every open passenger must still be deliverable / collectable from here
        for rid, d_idx in dropoff_index.items():
            if done[d_idx]:
                continue
            req = plan.info[rid]
            p_idx = pickup_index.get(rid)
            if p_idx is None or done[p_idx]:
                eta = t + plan.dist[here][d_idx + 1] / plan.speed
                if (eta - board_time[rid] - req.direct_time) / req.direct_time > cs.max_detour_ratio + CONSTRAINT_EPS:
                    return False
            else:
                eta = t + plan.dist[here][p_idx + 1] / plan.speed
                if eta - req.request_time > cs.max_pickup_time + CONSTRAINT_EPS:
                    return False
        return True

    def dfs(here: int, t: float, load: int, cost: float):
        nonlocal best_cost, best_order
        if cost >= best_cost:
            return
        if len(order) == n:
            best_cost = cost
            best_order = list(order)
            return
        for idx in range(n):
            if done[idx]:
                continue
            stop = stops[idx]
            rid = stop.request_id
            req = plan.info[rid]
            if stop.kind is StopKind.DROPOFF:
                p_idx = pickup_index.get(rid)
                if p_idx is not None and not done[p_idx]:
                    continue
            arrive = t + plan.dist[here][idx + 1] / plan.speed
            if stop.kind is StopKind.PICKUP:
                wait = arrive - req.request_time
                if load + 1 > plan.capacity or wait > cs.max_pickup_time + CONSTRAINT_EPS:
                    continue
                step_cost, next_load = wait, load + 1
                board_time[rid] = arrive
            else:
                ride = arrive - board_time[rid]
                if (ride - req.direct_time) / req.direct_time > cs.max_detour_ratio + CONSTRAINT_EPS:
                    continue
                step_cost, next_load = ride - req.direct_time, load - 1
            done[idx] = True
            order.append(idx)
            if bound_ok(idx + 1, arrive):
                dfs(idx + 1, arrive, next_load, cost + step_cost)
            order.pop()
            done[idx] = False
            if stop.kind is StopKind.PICKUP and rid not in plan.boarded_at:
                board_time.pop(rid, None)

    dfs(0, plan.start_time, len(plan.onboard), 0.0)
    return best_order


def _nearest_order(plan: _Plan) -> list[int]:
    stops = plan.stops
    pickup_index = {s.request_id: i for i, s in enumerate(stops) if s.kind is StopKind.PICKUP}
    done = [False] * len(stops)
    order = []
    here = 0
    for _ in range(len(stops)):
        best = None
        for idx, stop in enumerate(stops):
            if done[idx]:
                continue
            if stop.kind is StopKind.DROPOFF:
                p_idx = pickup_index.get(stop.request_id)
                if p_idx is not None and not done[p_idx]:
                    continue
            key = (plan.dist[here][idx + 1], stop.request_id, stop.kind is StopKind.DROPOFF)
            if best is None or key < best[0]:
                best = (key, idx)
        idx = best[1]
        done[idx] = True
        order.append(idx)
        here = idx + 1
    return order


def total_stops(vehicle: Vehicle, new_count: int) -> int:
    return len(vehicle.onboard) + 2 * (len(vehicle.pending_pickups()) + new_count)


def route_exhaustive(vehicle: Vehicle, new_requests: Iterable[Request], cs: ConstraintSet, oracle: DistanceOracle,
                     speed: float, now: float, registry: Mapping[int, Request] | None = None) -> FeasibleRoute | None:
    """Minimum-cost feasible ordering over all precedence-valid orderings, or None."""
    plan = _make_plan(vehicle, new_requests, cs, oracle, speed, now, registry)
    if len(plan.stops) > MAX_EXHAUSTIVE_STOPS:
        raise RoutingError(f"{len(plan.stops)} stops exceed the enumeration cap of {MAX_EXHAUSTIVE_STOPS}")
    order = _exhaustive_order(plan)
    return None if order is None else _evaluate(plan, order)


def route_nn(vehicle: Vehicle, new_requests: Iterable[Request], cs: ConstraintSet, oracle: DistanceOracle,
             speed: float, now: float, registry: Mapping[int, Request] | None = None) -> FeasibleRoute | None:
    """Always drive to the network-nearest eligible stop, then check constraints."""
    plan = _make_plan(vehicle, new_requests, cs, oracle, speed, now, registry)
    return _evaluate(plan, _nearest_order(plan))


def plan_route(vehicle: Vehicle, new_requests: list[Request], cs: ConstraintSet, oracle: DistanceOracle,
               speed: float, now: float, registry: Mapping[int, Request] | None = None,
               mode: str = "auto") -> FeasibleRoute | None:
    if mode == "auto":
        mode = "exhaustive" if total_stops(vehicle, len(new_requests)) <= AUTO_EXHAUSTIVE_STOPS else "nn"
    if mode == "exhaustive":
        return route_exhaustive(vehicle, new_requests, cs, oracle, speed, now, registry)
    if mode == "nn":
        return route_nn(vehicle, new_requests, cs, oracle, speed, now, registry)
    raise RoutingError(f"unknown routing mode '{mode}'")
