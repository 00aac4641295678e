from dataclasses import dataclass, field

from ridepool.errors import ConfigError

OD_PRESETS = ("uniform", "hotspot", "custom")


@dataclass(frozen=True, slots=True)
class Request:
    """One passenger's trip. Times in seconds from simulation start, distances in meters."""

    id: int
    origin: int
    destination: int
    request_time: float
    direct_distance: float
    direct_time: float


@dataclass(frozen=True)
class RawTrip:
    timestamp: float
    origin_x: float
    origin_y: float
    dest_x: float
    dest_y: float


@dataclass(frozen=True)
class BoundingBox:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def contains(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax


@dataclass(frozen=True)
class DemandConfig:
    arrival_rate: float
    horizon: float
    od_distribution: str = "uniform"
    seed: int = 0
    # hotspot preset: Gaussian bump of origin weight; None = network centroid / quarter extent
    hotspot_center: tuple[float, float] | None = None
    hotspot_spread: float | None = None
    # custom preset: explicit (origin, destination, weight) triples
    od_pairs: tuple[tuple[int, int, float], ...] = field(default=())

    def __post_init__(self):
        if not self.arrival_rate >= 0:
            raise ConfigError("demand.arrival_rate", "must be >= 0")
        if not self.horizon > 0:
            raise ConfigError("demand.horizon", "must be > 0")
        if self.od_distribution not in OD_PRESETS:
            raise ConfigError("demand.od_distribution", f"must be one of {', '.join(OD_PRESETS)}")
        if self.hotspot_spread is not None and not self.hotspot_spread > 0:
            raise ConfigError("demand.hotspot_spread", "must be > 0")
        if self.od_distribution == "custom":
            weights = [w for _, _, w in self.od_pairs]
            if not weights or any(w < 0 for w in weights) or sum(weights) <= 0:
                raise ConfigError("demand.od_pairs", "weights must be nonnegative and not all zero")
