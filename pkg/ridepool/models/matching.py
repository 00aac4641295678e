from dataclasses import dataclass, field

from ridepool.errors import ConfigError
from ridepool.models.fleet import Stop

ROUTING_MODES = ("exhaustive", "nn", "auto")
# orderings beyond this many stops are never enumerated
MAX_EXHAUSTIVE_STOPS = 10


@dataclass(frozen=True)
class ConstraintSet:
    max_pickup_time: float = 900.0
    max_detour_ratio: float = 0.5
    max_wait_time: float = 300.0
    matching_radius_time: float = 900.0

    def __post_init__(self):
        for name in ("max_pickup_time", "max_detour_ratio", "max_wait_time", "matching_radius_time"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"constraints.{name}", "must be > 0")
        if self.matching_radius_time < self.max_pickup_time:
            raise ConfigError("constraints.matching_radius_time", "must be >= max_pickup_time")


@dataclass(frozen=True)
class RtvLimits:
    # nearest candidate requests examined per vehicle (0 = all)
    max_requests_per_vehicle: int = 8
    max_trips_per_vehicle: int = 128

    def __post_init__(self):
        if self.max_requests_per_vehicle < 0:
            raise ConfigError("simulation.max_requests_per_vehicle", "must be >= 0")
        if self.max_trips_per_vehicle < 1:
            raise ConfigError("simulation.max_trips_per_vehicle", "must be >= 1")


@dataclass(frozen=True)
class RequestTiming:
    pickup_time: float  # seconds from request to pickup; 0 for passengers already onboard
    detour_ratio: float


@dataclass(frozen=True)
class FeasibleRoute:
    stop_sequence: tuple[Stop, ...]
    total_cost: float
    per_request: dict[int, RequestTiming]
    # seconds of delay per request (pickup + detour), the c_rj of the trip value
    costs: dict[int, float] = field(default_factory=dict)


Trip = tuple[int, ...]


@dataclass(frozen=True)
class RtvEdge:
    trip: Trip
    vehicle_id: int
    route: FeasibleRoute
    value: float


@dataclass
class RtvGraph:
    edges: list[RtvEdge] = field(default_factory=list)

    def for_vehicle(self, vehicle_id: int) -> list[RtvEdge]:
        return [e for e in self.edges if e.vehicle_id == vehicle_id]

    def requests(self) -> set[int]:
        return {r for e in self.edges for r in e.trip}


@dataclass(frozen=True)
class AssignmentSolution:
    chosen: tuple[RtvEdge, ...] = ()
    objective: float = 0.0
