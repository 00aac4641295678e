"""Scaling laws for pooled fleets.

The system load u = λ t̄ / N compares demand with the rate a fleet of N
vehicles can serve one-at-a-time. Below u = 1 vehicles rarely share and every
request is served; above it occupancy saturates toward C and the service rate
falls as C / (C - 1 + u).
"""

import numpy as np
import pandas as pd

from ridepool.models.laws import LoadInputs

LAW_CURVE_COLUMNS = ["u", "capacity", "occupancy", "service_rate"]


def _positive(**values):
    for name, value in values.items():
        if not value > 0:
            raise ValueError(f"{name} must be > 0, got {value}")


def system_load(arrival_rate: float, fleet_size: int, service_time: float) -> float:
    _positive(arrival_rate=arrival_rate, fleet_size=fleet_size, service_time=service_time)
    return arrival_rate * service_time / fleet_size


def predicted_occupancy(u: float, capacity: int) -> float:
    if u <= 1:
        return u
    return capacity * u / (capacity - 1 + u)


def predicted_service_rate(u: float, capacity: int) -> float:
    if u <= 1:
        return 1.0
    return capacity / (capacity - 1 + u)


def correlation_factor(capacity: int) -> float:
    """k_c in R̄ = 1 - k_c (C̄ - 1); undefined without sharing."""
    if capacity < 2:
        raise ValueError(f"correlation factor needs capacity >= 2, got {capacity}")
    return 1.0 / (capacity - 1)


def transition_load(capacity: int) -> float:
    """Load at which the two regimes meet: C - 1/k_c."""
    return capacity - 1.0 / correlation_factor(capacity)


def linear_remaining_capacity(capacity: int, occupancy: float) -> float:
    rate = (capacity - occupancy) * correlation_factor(capacity)
    return min(1.0, max(0.0, rate))


def normalized_load(arrival_rate: float, mean_distance: float, fleet_size: int, speed: float) -> float:
    if arrival_rate < 0:
        raise ValueError(f"arrival_rate must be >= 0, got {arrival_rate}")
    _positive(mean_distance=mean_distance, fleet_size=fleet_size, speed=speed)
    return arrival_rate * mean_distance / (fleet_size * speed)


def approximate_load(x: float, detour_ratio: float, complexity: float, capacity: int) -> float:
    return (detour_ratio + complexity + capacity ** (1 / 3)) * x


def stationary_identity_residual(occupancy: float, arrival_rate: float, service_time: float,
                                 service_rate: float, fleet_size: int) -> float:
    """Relative gap between C̄ and λ t̄ R̄ / N, floored at 0.1 in the denominator."""
    expected = arrival_rate * service_time * service_rate / fleet_size
    return abs(occupancy - expected) / max(occupancy, 0.1)


def loads(inputs: LoadInputs) -> dict:
    """u, x and the approximation of u for one set of measured inputs; zeros where undefined."""
    u = 0.0
    if inputs.arrival_rate > 0 and inputs.service_time > 0:
        u = system_load(inputs.arrival_rate, inputs.fleet_size, inputs.service_time)
    x = 0.0
    if inputs.mean_distance > 0:
        x = normalized_load(inputs.arrival_rate, inputs.mean_distance, inputs.fleet_size, inputs.speed)
    return {
        "system_load": u,
        "normalized_load": x,
        "approximate_load": approximate_load(x, inputs.detour_ratio, inputs.complexity, inputs.capacity),
    }


def law_curves(capacities: list[int], u_max: float = 8.0, points: int = 161) -> pd.DataFrame:
    """Sampled occupancy and service-rate curves, one block per capacity."""
    if points < 2:
        raise ValueError(f"points must be >= 2, got {points}")
    grid = np.linspace(0.0, u_max, points)
    rows = [
        (float(u), c, predicted_occupancy(float(u), c), predicted_service_rate(float(u), c))
        for c in sorted(set(capacities))
        for u in grid
    ]
    return pd.DataFrame(rows, columns=LAW_CURVE_COLUMNS)
