import numpy as np
import pytest

from ridepool.analysis.laws import (
    LAW_CURVE_COLUMNS, approximate_load, correlation_factor, law_curves, linear_remaining_capacity, loads,
    normalized_load, predicted_occupancy, predicted_service_rate, stationary_identity_residual, system_load,
    transition_load,
)
from ridepool.models.laws import LoadInputs

CAPACITIES = [1, 2, 3, 4, 6, 10]


def test_system_load_examples():
    assert system_load(0.5, 100, 600) == 3.0
    assert system_load(0.25, 150, 600) == 1.0
    assert system_load(0.5, 10**9, 600) < 1e-6


@pytest.mark.parametrize("args", [(0, 10, 600), (0.5, 0, 600), (0.5, 10, 0)])
def test_system_load_needs_positive_inputs(args):
    with pytest.raises(ValueError):
        system_load(*args)


@pytest.mark.parametrize("capacity", CAPACITIES)
def test_occupancy_is_one_at_unit_load(capacity):
    assert predicted_occupancy(1.0, capacity) == 1.0


def test_occupancy_examples():
    assert predicted_occupancy(4.0, 2) == pytest.approx(1.6)
    assert predicted_occupancy(0.3, 4) == 0.3
    assert predicted_occupancy(1e9, 6) == pytest.approx(6.0, rel=1e-6)


def test_service_rate_examples():
    assert predicted_service_rate(0.5, 4) == 1.0
    assert predicted_service_rate(4.0, 6) == pytest.approx(2 / 3)
    assert predicted_service_rate(4.0, 2) == pytest.approx(0.4)


@pytest.mark.parametrize("capacity", [2, 3, 4, 6, 10])
def test_laws_are_continuous_at_unit_load(capacity):
    right = capacity * 1.0 / (capacity - 1 + 1.0)
    assert abs(right - predicted_occupancy(1.0, capacity)) <= 1e-12
    assert abs(capacity / (capacity - 1 + 1.0) - predicted_service_rate(1.0, capacity)) <= 1e-12
    assert predicted_occupancy(1 + 1e-9, capacity) == pytest.approx(predicted_occupancy(1 - 1e-9, capacity), abs=1e-8)


@pytest.mark.parametrize("capacity", CAPACITIES)
def test_laws_are_monotone_and_bounded(capacity):
    u = np.linspace(0, 50, 2001)
    occupancy = np.array([predicted_occupancy(x, capacity) for x in u])
    service = np.array([predicted_service_rate(x, capacity) for x in u])
    assert (np.diff(occupancy) >= 0).all()
    assert (np.diff(service) <= 0).all()
    assert ((0 <= occupancy) & (occupancy <= capacity)).all()
    assert ((0 < service) & (service <= 1)).all()


@pytest.mark.parametrize("capacity", CAPACITIES)
def test_occupancy_is_load_times_service_rate(capacity):
    for u in (0.2, 1.0, 2.5, 9.0):
        assert predicted_occupancy(u, capacity) == pytest.approx(u * predicted_service_rate(u, capacity))


@pytest.mark.parametrize("capacity,expected", [(2, 1.0), (3, 0.5), (6, 0.2)])
def test_correlation_factor(capacity, expected):
    assert correlation_factor(capacity) == pytest.approx(expected)


def test_correlation_factor_needs_sharing():
    with pytest.raises(ValueError):
        correlation_factor(1)


@pytest.mark.parametrize("capacity", [2, 3, 6])
def test_regimes_meet_at_unit_load(capacity):
    assert transition_load(capacity) == pytest.approx(1.0)


@pytest.mark.parametrize("capacity,occupancy,expected", [(4, 1.0, 1.0), (4, 4.0, 0.0), (6, 3.0, 0.6), (2, 0.5, 1.0)])
def test_linear_remaining_capacity(capacity, occupancy, expected):
    assert linear_remaining_capacity(capacity, occupancy) == pytest.approx(expected)


def test_normalized_load_examples():
    assert normalized_load(1.0, 3000, 100, 6) == pytest.approx(5.0)
    assert normalized_load(0.0, 3000, 100, 6) == 0.0
    assert normalized_load(1.0, 3000, 200, 6) == pytest.approx(normalized_load(1.0, 3000, 100, 6) / 2)


def test_approximate_load_examples():
    assert approximate_load(0.0, 0.5, 0.5, 4) == 0.0
    assert approximate_load(2.0, 0.5, 0.0, 8) == pytest.approx(5.0)
    assert approximate_load(1.0, 0.5, 0.5, 1) == pytest.approx(2.0)


def test_identity_residual_vanishes_when_consistent():
    # λ = 0.2/s, t̄ = 500 s, R̄ = 0.8, N = 40 -> C̄ = 2
    assert stationary_identity_residual(2.0, 0.2, 500.0, 0.8, 40) == pytest.approx(0.0)
    assert stationary_identity_residual(2.2, 0.2, 500.0, 0.8, 40) == pytest.approx(0.1 / 1.1)


def test_identity_residual_floors_small_occupancy():
    assert stationary_identity_residual(0.0, 0.01, 100.0, 1.0, 50) == pytest.approx(0.02 / 0.1)


def test_loads_from_measured_inputs():
    values = loads(LoadInputs(arrival_rate=0.5, fleet_size=100, service_time=600.0, mean_distance=1200.0,
                              speed=6.0, detour_ratio=0.5, complexity=0.0, capacity=8))
    assert values["system_load"] == pytest.approx(3.0)
    assert values["normalized_load"] == pytest.approx(1.0)
    assert values["approximate_load"] == pytest.approx(2.5)


def test_loads_without_demand_are_zero():
    values = loads(LoadInputs(arrival_rate=0.0, fleet_size=10, service_time=0.0, mean_distance=0.0, speed=6.0))
    assert values == {"system_load": 0.0, "normalized_load": 0.0, "approximate_load": 0.0}


def test_law_curves_table():
    curves = law_curves([4, 2, 2], u_max=8.0, points=161)
    assert list(curves.columns) == LAW_CURVE_COLUMNS
    assert len(curves) == 2 * 161
    assert sorted(curves["capacity"].unique()) == [2, 4]
    row = curves[(curves["capacity"] == 2) & np.isclose(curves["u"], 4.0)].iloc[0]
    assert row["occupancy"] == pytest.approx(1.6)
    assert row["service_rate"] == pytest.approx(0.4)
