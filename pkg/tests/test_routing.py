import itertools

import numpy as np
import pytest

from factories import line_graph, line_oracle, onboard_vehicle, request
from ridepool.errors import RoutingError
from ridepool.models.fleet import Vehicle
from ridepool.models.matching import ConstraintSet
from ridepool.dispatch.routing import plan_route, route_exhaustive, route_nn
from ridepool.services.road_network import DistanceOracle, generate_grid

SPEED = 10.0
EPS = 1e-9


def order_of(route):
    return [(s.kind.value, s.request_id, s.node) for s in route.stop_sequence]


@pytest.fixture
def abc():
    """A-B-C street, 100 m blocks; r1 A->C and r2 B->C, vehicle waiting at A."""
    oracle = line_oracle(3)
    return oracle, Vehicle(id=0, capacity=2, node=0), [request(1, 0, 2, oracle), request(2, 1, 2, oracle)]


def test_shared_ride_on_a_line(abc, constraints):
    oracle, vehicle, requests = abc
    route = route_exhaustive(vehicle, requests, constraints, oracle, SPEED, now=0.0)
    assert order_of(route) == [("pickup", 1, 0), ("pickup", 2, 1), ("dropoff", 1, 2), ("dropoff", 2, 2)]
    assert route.per_request[1].pickup_time == 0.0
    assert route.per_request[1].detour_ratio == 0.0
    assert route.per_request[2].pickup_time == 10.0
    assert route.per_request[2].detour_ratio == 0.0
    assert route.total_cost == 10.0
    assert route.costs == {1: 0.0, 2: 10.0}


def test_nearest_neighbour_agrees_on_the_line(abc, constraints):
    oracle, vehicle, requests = abc
    nn = route_nn(vehicle, requests, constraints, oracle, SPEED, now=0.0)
    exact = route_exhaustive(vehicle, requests, constraints, oracle, SPEED, now=0.0)
    assert nn.stop_sequence == exact.stop_sequence


def test_single_request_costs_its_pickup_time(constraints):
    oracle = line_oracle(3)
    route = route_exhaustive(Vehicle(id=0, capacity=1, node=0), [request(5, 1, 2, oracle)], constraints, oracle,
                             SPEED, now=0.0)
    assert order_of(route) == [("pickup", 5, 1), ("dropoff", 5, 2)]
    assert route.total_cost == route.per_request[5].pickup_time == 10.0


def test_sharing_that_stretches_a_ride_is_rejected():
    # the vehicle at node 1 carries a rider on to node 2; the newcomer waits behind it at node 0
    g = line_graph([0.0, 100.0, 200.0])
    oracle = DistanceOracle(g)
    rider = request(1, 1, 2, oracle)
    vehicle = onboard_vehicle(0, 1, 2, [rider])
    newcomer = request(2, 0, 2, oracle)
    cs = ConstraintSet(max_pickup_time=15.0, max_detour_ratio=0.5, max_wait_time=15.0, matching_radius_time=15.0)
    registry = {1: rider}
    # fetching the newcomer first triples the rider's trip; dropping the rider first makes the newcomer wait 30 s
    assert route_exhaustive(vehicle, [newcomer], cs, oracle, SPEED, 0.0, registry) is None
    assert route_nn(vehicle, [newcomer], cs, oracle, SPEED, 0.0, registry) is None


def test_nearest_neighbour_can_miss_a_feasible_order():
    # nodes at x = -250, -150, 0, 100, 200; vehicle at x = 0
    oracle = DistanceOracle(line_graph([-250.0, -150.0, 0.0, 100.0, 200.0]))
    vehicle = Vehicle(id=0, capacity=2, node=2)
    near = request(1, 3, 4, oracle, request_time=0.0)
    behind = request(2, 1, 0, oracle, request_time=-45.0)
    cs = ConstraintSet(max_pickup_time=60.0, max_detour_ratio=0.5, max_wait_time=60.0, matching_radius_time=60.0)

    assert route_nn(vehicle, [near, behind], cs, oracle, SPEED, now=0.0) is None
    route = route_exhaustive(vehicle, [near, behind], cs, oracle, SPEED, now=0.0)
    assert order_of(route) == [("pickup", 2, 1), ("dropoff", 2, 0), ("pickup", 1, 3), ("dropoff", 1, 4)]


def test_onboard_rider_keeps_its_dropoff(constraints):
    oracle = line_oracle(4)
    rider = request(1, 0, 3, oracle)
    vehicle = onboard_vehicle(0, 1, 2, [rider], boarded_at=-10.0)
    route = route_exhaustive(vehicle, [request(2, 2, 3, oracle)], constraints, oracle, SPEED, 0.0, {1: rider})
    assert order_of(route) == [("pickup", 2, 2), ("dropoff", 1, 3), ("dropoff", 2, 3)]
    assert route.per_request[1].pickup_time == 0.0
    assert route.per_request[1].detour_ratio == 0.0


def test_missing_registry_entry(constraints):
    oracle = line_oracle(3)
    vehicle = onboard_vehicle(0, 0, 2, [request(1, 0, 2, oracle)])
    with pytest.raises(RoutingError, match="missing from the registry"):
        route_exhaustive(vehicle, [request(2, 1, 2, oracle)], constraints, oracle, SPEED, 0.0, {})


def test_over_capacity_is_an_error(abc, constraints):
    oracle, _, requests = abc
    with pytest.raises(RoutingError, match="cannot hold"):
        route_nn(Vehicle(id=0, capacity=1, node=0), requests, constraints, oracle, SPEED, 0.0)


def test_enumeration_cap(constraints):
    oracle = DistanceOracle(generate_grid(4, 4, 100.0))
    requests = [request(i, i, 15 - i, oracle) for i in range(6)]
    with pytest.raises(RoutingError, match="enumeration cap"):
        route_exhaustive(Vehicle(id=0, capacity=6, node=0), requests, constraints, oracle, SPEED, 0.0)


def test_auto_mode_falls_back_to_nearest_neighbour(constraints):
    oracle = DistanceOracle(generate_grid(4, 4, 100.0))
    requests = [request(i, i, 15 - i, oracle) for i in range(5)]
    vehicle = Vehicle(id=0, capacity=5, node=0)
    auto = plan_route(vehicle, requests, constraints, oracle, SPEED, 0.0, mode="auto")
    nn = route_nn(vehicle, requests, constraints, oracle, SPEED, 0.0)
    assert auto == nn


def test_unknown_mode(abc, constraints):
    oracle, vehicle, requests = abc
    with pytest.raises(RoutingError, match="unknown routing mode"):
        plan_route(vehicle, requests, constraints, oracle, SPEED, 0.0, mode="fastest")


# ── Permutation oracle ────────────────────────────────────

def brute_force(vehicle, requests, registry, cs, oracle, now):
    """Cheapest feasible precedence-valid order, by trying every permutation; None if infeasible."""
    info = {**registry, **{r.id: r for r in requests}}
    stops = [("drop", rid) for rid in vehicle.onboard]
    for r in requests:
        stops += [("pick", r.id), ("drop", r.id)]

    best = None
    for perm in itertools.permutations(stops):
        if not precedence_ok(perm, vehicle.onboard):
            continue
        t, here, load, cost = now, vehicle.node, len(vehicle.onboard), 0.0
        boarded = dict(vehicle.boarded_at)
        ok = True
        for kind, rid in perm:
            r = info[rid]
            node = r.origin if kind == "pick" else r.destination
            t += oracle.distance(here, node) / SPEED
            here = node
            if kind == "pick":
                load += 1
                wait = t - r.request_time
                if load > vehicle.capacity or wait > cs.max_pickup_time + EPS:
                    ok = False
                    break
                boarded[rid] = t
                cost += wait
            else:
                ride = t - boarded[rid]
                if (ride - r.direct_time) / r.direct_time > cs.max_detour_ratio + EPS:
                    ok = False
                    break
                load -= 1
                cost += ride - r.direct_time
        if ok and (best is None or cost < best):
            best = cost
    return best


def precedence_ok(perm, onboard):
    picked = set(onboard)
    for kind, rid in perm:
        if kind == "pick":
            picked.add(rid)
        elif rid not in picked:
            return False
    return True


def random_instance(rng, oracle, node_count):
    vehicle_node = int(rng.integers(node_count))
    new_count = int(rng.integers(1, 4))
    registry = {}
    riders = []
    if new_count <= 2 and rng.random() < 0.5:
        origin, destination = (int(x) for x in rng.choice(node_count, size=2, replace=False))
        rider = request(100, origin, destination, oracle, request_time=-300.0)
        riders.append(rider)
        registry[100] = rider
    vehicle = onboard_vehicle(0, vehicle_node, 3, riders)
    if riders:
        # boarded at its origin and drove straight to the vehicle's node
        vehicle.boarded_at[100] = -oracle.distance(riders[0].origin, vehicle_node) / SPEED
    requests = []
    for rid in range(1, new_count + 1):
        origin, destination = (int(x) for x in rng.choice(node_count, size=2, replace=False))
        requests.append(request(rid, origin, destination, oracle, request_time=-float(rng.integers(0, 60))))
    return vehicle, requests, registry


def test_exhaustive_matches_permutation_oracle():
    oracle = DistanceOracle(generate_grid(4, 4, 100.0))
    cs = ConstraintSet(max_pickup_time=90.0, max_detour_ratio=0.5, max_wait_time=90.0, matching_radius_time=90.0)
    rng = np.random.default_rng(2024)
    feasible = 0
    for _ in range(500):
        vehicle, requests, registry = random_instance(rng, oracle, 16)
        expected = brute_force(vehicle, requests, registry, cs, oracle, now=0.0)
        route = route_exhaustive(vehicle, requests, cs, oracle, SPEED, 0.0, registry)
        if expected is None:
            assert route is None
        else:
            feasible += 1
            assert route is not None
            assert route.total_cost == pytest.approx(expected, abs=1e-9)
    assert feasible > 50


def test_nearest_neighbour_never_beats_exhaustive():
    oracle = DistanceOracle(generate_grid(4, 4, 100.0))
    cs = ConstraintSet(max_pickup_time=120.0, max_detour_ratio=0.8, max_wait_time=120.0, matching_radius_time=120.0)
    rng = np.random.default_rng(7)
    for _ in range(600):
        vehicle, requests, registry = random_instance(rng, oracle, 16)
        nn = route_nn(vehicle, requests, cs, oracle, SPEED, 0.0, registry)
        if nn is None:
            continue
        exact = route_exhaustive(vehicle, requests, cs, oracle, SPEED, 0.0, registry)
        assert exact is not None
        assert exact.total_cost <= nn.total_cost + 1e-9

