from collections import Counter

import pytest

from factories import line_oracle, onboard_vehicle, request
from ridepool.errors import ConfigError, FleetInvariantError
from ridepool.models.demand import Request
from ridepool.models.fleet import FleetConfig, Stop, StopKind, Vehicle
from ridepool.models.matching import FeasibleRoute
from ridepool.services.fleet import (
    advance, anchor, check_schedule, commit_schedule, initialize_fleet, scheduled_count,
)
from ridepool.services.road_network import generate_grid


def test_scheduled_count_idle():
    assert scheduled_count(Vehicle(id=0, capacity=2, node=0)) == 0


def test_scheduled_count_counts_onboard_and_pending():
    oracle = line_oracle(5)
    riders = [request(1, 0, 3, oracle), request(2, 0, 4, oracle)]
    v = onboard_vehicle(0, 0, 4, riders)
    v.schedule = [Stop(StopKind.PICKUP, 3, 2)] + v.schedule + [Stop(StopKind.DROPOFF, 3, 4)]
    assert scheduled_count(v) == 3


def test_scheduled_count_full_vehicle():
    oracle = line_oracle(5)
    riders = [request(i, 0, 4, oracle) for i in range(4)]
    assert scheduled_count(onboard_vehicle(0, 0, 4, riders)) == 4


def test_fleet_starts_at_request_origins():
    g = generate_grid(5, 5, 100.0)
    requests = [Request(i, 7, 24, float(i), 1000.0, 100.0) for i in range(30)]
    fleet = initialize_fleet(FleetConfig(size=12, capacity=3, seed=4), requests, g)
    assert [v.id for v in fleet] == list(range(12))
    assert {v.node for v in fleet} == {7}
    assert all(v.capacity == 3 and v.is_idle for v in fleet)


def test_fleet_placement_is_reproducible():
    g = generate_grid(20, 20, 100.0)
    requests = [Request(i, i, (i + 7) % 400, 0.0, 700.0, 100.0) for i in range(400)]
    cfg = FleetConfig(size=200, capacity=2, seed=99)
    first = Counter(v.node for v in initialize_fleet(cfg, requests, g))
    second = Counter(v.node for v in initialize_fleet(cfg, requests, g))
    assert first == second
    assert sum(first.values()) == 200


def test_fleet_without_requests_spreads_over_nodes():
    g = generate_grid(5, 5, 100.0)
    fleet = initialize_fleet(FleetConfig(size=10, capacity=2, seed=1), [], g)
    assert len(fleet) == 10
    assert all(0 <= v.node < g.node_count for v in fleet)


@pytest.mark.parametrize("kwargs,field", [
    ({"size": 0, "capacity": 2}, "fleet.size"),
    ({"size": 3, "capacity": 0}, "fleet.capacity"),
    ({"size": 3, "capacity": 2, "speed": 0.0}, "fleet.speed"),
])
def test_fleet_config_validation(kwargs, field):
    with pytest.raises(ConfigError) as err:
        FleetConfig(**kwargs)
    assert err.value.field == field


def test_idle_vehicle_stays_put():
    oracle = line_oracle(3)
    v = Vehicle(id=0, capacity=2, node=1)
    assert advance(v, 2.0, oracle, speed=10.0, now=0.0) == []
    assert (v.node, v.edge, v.odometer) == (1, None, 0.0)


def test_pickup_then_residual_progress():
    oracle = line_oracle(4)
    v = Vehicle(id=0, capacity=2, node=0,
                schedule=[Stop(StopKind.PICKUP, 9, 1), Stop(StopKind.DROPOFF, 9, 3)])
    events = advance(v, 20.0, oracle, speed=10.0, now=50.0)

    assert [(e.event, e.request_id, e.time, e.node) for e in events] == [("picked_up", 9, 60.0, 1)]
    assert v.onboard == {9}
    assert v.boarded_at == {9: 60.0}
    # 100 m beyond the pickup: standing on node 2, dropoff still ahead
    assert (v.node, v.edge) == (2, None)
    assert v.schedule == [Stop(StopKind.DROPOFF, 9, 3)]
    assert v.odometer == 200.0


def test_dropoff_of_last_passenger_empties_vehicle():
    oracle = line_oracle(3)
    rider = request(4, 0, 1, oracle)
    v = onboard_vehicle(0, 0, 2, [rider])
    events = advance(v, 20.0, oracle, speed=10.0, now=0.0)
    assert [(e.event, e.time) for e in events] == [("dropped_off", 10.0)]
    assert v.is_idle
    assert v.node == 1


def test_stop_mid_edge_then_anchor():
    oracle = line_oracle(3)
    v = Vehicle(id=0, capacity=2, node=0, schedule=[Stop(StopKind.PICKUP, 1, 2), Stop(StopKind.DROPOFF, 1, 0)])
    advance(v, 5.0, oracle, speed=10.0, now=0.0)
    assert v.edge == (0, 1, 100.0)
    assert v.progress == 50.0
    assert anchor(v, 10.0) == (1, 5.0)


def test_rejects_non_positive_step():
    with pytest.raises(ValueError):
        advance(Vehicle(id=0, capacity=1, node=0), 0.0, line_oracle(2), speed=10.0, now=0.0)


def test_commit_rejects_schedule_beyond_capacity():
    v = Vehicle(id=0, capacity=1, node=0)
    route = FeasibleRoute(
        stop_sequence=(Stop(StopKind.PICKUP, 1, 1), Stop(StopKind.PICKUP, 2, 1),
                       Stop(StopKind.DROPOFF, 1, 2), Stop(StopKind.DROPOFF, 2, 2)),
        total_cost=0.0,
        per_request={},
    )
    with pytest.raises(FleetInvariantError, match="beyond capacity"):
        commit_schedule(v, route)


def test_schedule_dropping_before_pickup_is_invalid():
    v = Vehicle(id=3, capacity=2, node=0, schedule=[Stop(StopKind.DROPOFF, 1, 2), Stop(StopKind.PICKUP, 1, 1)])
    with pytest.raises(FleetInvariantError, match="drops request 1 before pickup"):
        check_schedule(v)


def test_schedule_missing_dropoff_is_invalid():
    v = Vehicle(id=3, capacity=2, node=0, schedule=[Stop(StopKind.PICKUP, 1, 1)])
    with pytest.raises(FleetInvariantError, match="no dropoff"):
        check_schedule(v)
