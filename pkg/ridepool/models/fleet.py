from dataclasses import dataclass, field
from enum import Enum

from ridepool.errors import ConfigError


class StopKind(str, Enum):
    PICKUP = "pickup"
    DROPOFF = "dropoff"


@dataclass(frozen=True, slots=True)
class Stop:
    kind: StopKind
    request_id: int
    node: int


@dataclass(frozen=True, slots=True)
class VehicleEvent:
    time: float
    vehicle_id: int
    event: str  # picked_up | dropped_off
    request_id: int
    node: int


@dataclass
class Vehicle:
    """Capacity-C agent.

    Position is either a node (`edge` is None) or a point `progress` meters
    along `edge` = (from, to, length). `leg` holds the remaining nodes of the
    shortest path toward the next stop, recomputed lazily after a new schedule.
    """

    id: int
    capacity: int
    node: int
    edge: tuple[int, int, float] | None = None
    progress: float = 0.0
    leg: list[int] = field(default_factory=list)
    schedule: list[Stop] = field(default_factory=list)
    onboard: set[int] = field(default_factory=set)
    boarded_at: dict[int, float] = field(default_factory=dict)
    odometer: float = 0.0

    @property
    def is_idle(self) -> bool:
        return not self.schedule and not self.onboard

    def pending_pickups(self) -> list[int]:
        return [s.request_id for s in self.schedule if s.kind is StopKind.PICKUP]


@dataclass(frozen=True)
class FleetConfig:
    size: int
    capacity: int
    speed: float = 6.0
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.size, int) or self.size < 1:
            raise ConfigError("fleet.size", "must be an integer >= 1")
        if not isinstance(self.capacity, int) or self.capacity < 1:
            raise ConfigError("fleet.capacity", "must be an integer >= 1")
        if not self.speed > 0:
            raise ConfigError("fleet.speed", "must be > 0")
