from dataclasses import dataclass, field

from ridepool.errors import ConfigError
from ridepool.models.demand import BoundingBox, DemandConfig
from ridepool.models.fleet import FleetConfig
from ridepool.models.matching import MAX_EXHAUSTIVE_STOPS, ROUTING_MODES, ConstraintSet, RtvLimits


@dataclass(frozen=True)
class NetworkConfig:
    rows: int = 20
    cols: int = 20
    spacing: float = 100.0
    file: str | None = None
    # irregular lattice: fraction of street segments removed, coordinate jitter as a share of spacing
    drop_fraction: float = 0.0
    jitter: float = 0.0
    seed: int = 0
    # network complexity T of the load approximation; supplied metadata, not computed
    complexity: float = 0.0

    def __post_init__(self):
        if self.file is None:
            if self.rows < 2:
                raise ConfigError("network.rows", "must be >= 2")
            if self.cols < 2:
                raise ConfigError("network.cols", "must be >= 2")
            if not self.spacing > 0:
                raise ConfigError("network.spacing", "must be > 0")
        if not 0 <= self.drop_fraction < 1:
            raise ConfigError("network.drop_fraction", "must be in [0, 1)")
        if not 0 <= self.jitter < 0.5:
            raise ConfigError("network.jitter", "must be in [0, 0.5)")
        if self.complexity < 0:
            raise ConfigError("network.complexity", "must be >= 0")


@dataclass(frozen=True)
class SimConfig:
    fleet: FleetConfig
    network: NetworkConfig = field(default_factory=NetworkConfig)
    constraints: ConstraintSet = field(default_factory=ConstraintSet)
    demand: DemandConfig | None = None
    # ingested demand: raw trips run through filter_trips + subsample, or a ready request file
    trips_file: str | None = None
    requests_file: str | None = None
    subsample_rate: float = 1.0
    area: BoundingBox | None = None
    delta: float = 2.0
    horizon: float = 7200.0
    warmup: float | None = None
    routing_mode: str = "auto"
    seed: int = 0
    allow_reassignment: bool = False
    exclude_inflight: bool = True
    value_per_request: float | None = None
    limits: RtvLimits = field(default_factory=RtvLimits)
    trace: bool = False
    dump_rtv: bool = False

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigError("simulation.delta", "must be > 0")
        if not self.horizon > 0:
            raise ConfigError("simulation.horizon", "must be > 0")
        if self.warmup is not None and not 0 <= self.warmup < self.horizon:
            raise ConfigError("simulation.warmup", "must be in [0, horizon)")
        if self.routing_mode not in ROUTING_MODES:
            raise ConfigError("simulation.routing_mode", f"must be one of {', '.join(ROUTING_MODES)}")
        if self.routing_mode == "exhaustive" and 2 * self.fleet.capacity > MAX_EXHAUSTIVE_STOPS:
            raise ConfigError(
                "simulation.routing_mode",
                f"exhaustive routing plans at most {MAX_EXHAUSTIVE_STOPS // 2} seats, capacity is {self.fleet.capacity}",
            )
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("simulation.seed", "must be an integer >= 0")
        if not 0 < self.subsample_rate <= 1:
            raise ConfigError("demand.subsample_rate", "must be in (0, 1]")
        if self.value_per_request is not None and not self.value_per_request > 0:
            raise ConfigError("simulation.value_per_request", "must be > 0")
        sources = [self.demand is not None, self.trips_file is not None, self.requests_file is not None]
        if sum(sources) > 1:
            raise ConfigError("demand", "give one of arrival_rate, trips_file or requests_file")

    @property
    def effective_warmup(self) -> float:
        return 0.1 * self.horizon if self.warmup is None else self.warmup

    @property
    def request_value(self) -> float:
        if self.value_per_request is not None:
            return self.value_per_request
        return 10.0 * self.constraints.max_wait_time


@dataclass
class SimReport:
    occupancy: float  # C-bar
    service_rate: float  # R-bar
    service_time: float  # t-bar
    mean_pickup_time: float
    system_load: float  # measured u
    arrival_rate: float  # realized, post-warmup
    total_requests: int
    served: int
    expired: int
    in_flight: int
    zero_count: bool
    fleet_size: int
    capacity: int
    mean_wait_time: float = 0.0
    mean_detour_ratio: float = 0.0
    mean_onboard: float = 0.0
    vehicle_distance: float = 0.0
    mean_direct_distance: float = 0.0
    normalized_load: float = 0.0
    approximate_load: float = 0.0
    identity_residual: float = 0.0
    max_pickup_time: float = 0.0
    histogram_edges: list[float] = field(default_factory=list)
    histogram_counts: list[int] = field(default_factory=list)
    step_times: list[float] = field(default_factory=list)
    step_occupancy: list[float] = field(default_factory=list)
    step_onboard: list[float] = field(default_factory=list)
    step_waiting: list[int] = field(default_factory=list)
    events: list = field(default_factory=list, repr=False)
    rtv_rows: list = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {
            "occupancy": self.occupancy,
            "service_rate": self.service_rate,
            "service_time": self.service_time,
            "mean_pickup_time": self.mean_pickup_time,
            "max_pickup_time": self.max_pickup_time,
            "system_load": self.system_load,
            "arrival_rate": self.arrival_rate,
            "total_requests": self.total_requests,
            "served": self.served,
            "expired": self.expired,
            "in_flight": self.in_flight,
            "zero_count": self.zero_count,
            "fleet_size": self.fleet_size,
            "capacity": self.capacity,
            "mean_wait_time": self.mean_wait_time,
            "mean_detour_ratio": self.mean_detour_ratio,
            "mean_onboard": self.mean_onboard,
            "vehicle_distance": self.vehicle_distance,
            "mean_direct_distance": self.mean_direct_distance,
            "normalized_load": self.normalized_load,
            "approximate_load": self.approximate_load,
            "identity_residual": self.identity_residual,
        }


@dataclass(frozen=True)
class RunManifest:
    config: dict
    inputs: dict
    output_dir: str
    version: str
    seed: int


@dataclass(frozen=True)
class SweepAxes:
    arrival_rates: tuple[float, ...]
    capacities: tuple[int, ...]
    fleet_sizes: tuple[int, ...]
    jobs: int | None = None  # None = RIDEPOOL_JOBS
