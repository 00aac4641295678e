import math
from dataclasses import dataclass


@dataclass(frozen=True)
class LoadInputs:
    """Every quantity entering the load definitions. Rates per second, lengths in meters."""

    arrival_rate: float
    fleet_size: int
    service_time: float
    mean_distance: float
    speed: float
    detour_ratio: float = 0.5
    complexity: float = 0.0
    capacity: int = 2


@dataclass(frozen=True)
class FitResult:
    r2: float
    mse: float
    rmse: float
    mae: float
    mape: float  # fraction; percent only at presentation
    points: int = 0
    scenarios: int = 0

    def as_row(self) -> dict:
        return {
            "r2": self.r2,
            "mse": self.mse,
            "rmse": self.rmse,
            "mae": self.mae,
            "mape_pct": self.mape * 100,
            "points": self.points,
            "scenarios": self.scenarios,
        }

    @property
    def is_consistent(self) -> bool:
        return math.isclose(self.rmse ** 2, self.mse, rel_tol=1e-12, abs_tol=1e-300) and self.mae <= self.rmse + 1e-15


@dataclass
class SweepValidation:
    which: str  # occupancy | service_rate
    pooled: FitResult
    per_capacity: dict
    residuals: object  # DataFrame: u, capacity, fleet_size, measured, predicted, residual


@dataclass
class LoadFit:
    slope: float
    r2: float
    table: object  # DataFrame of measured u against (r_dt + T + C^(1/3)) x
