import logging
import math

import numpy as np
import pandas as pd
from sklearn.linear_model import LinearRegression
from sklearn.metrics import mean_absolute_error, mean_absolute_percentage_error, mean_squared_error, r2_score

from ridepool.analysis.laws import (
    approximate_load, linear_remaining_capacity, predicted_occupancy, predicted_service_rate,
)
from ridepool.errors import MetricsError
from ridepool.models.laws import FitResult, LoadFit, SweepValidation

logger = logging.getLogger(__name__)

LAWS = {
    "occupancy": predicted_occupancy,
    "service_rate": predicted_service_rate,
}
FIT_COLUMNS = ["law", "capacity", "r2", "mse", "rmse", "mae", "mape_pct", "points", "scenarios"]
RESIDUAL_COLUMNS = ["u", "capacity", "fleet_size", "measured", "predicted", "residual"]
LOAD_FIT_COLUMNS = ["capacity", "fleet_size", "arrival_rate", "normalized_load", "load_factor", "approximation_input",
                    "measured_u", "fitted_u"]
REMAINING_COLUMNS = ["capacity", "fleet_size", "u", "occupancy", "remaining_capacity", "measured_service_rate",
                     "linear_prediction"]


def error_metrics(observed: list, predicted: list) -> FitResult:
    """R² averaged over scenarios; MSE, RMSE, MAE and MAPE pooled over all points.

    `observed` and `predicted` are lists of per-scenario sequences.
    """
    if len(observed) != len(predicted) or not observed:
        raise MetricsError("need matching, non-empty scenario lists")

    r2s = []
    for i, (y, y_hat) in enumerate(zip(observed, predicted)):
        y = np.asarray(y, dtype=float)
        y_hat = np.asarray(y_hat, dtype=float)
        if y.shape != y_hat.shape:
            raise MetricsError(f"scenario {i}: {len(y)} observations against {len(y_hat)} predictions")
        if len(y) < 2:
            raise MetricsError(f"scenario {i}: R² needs at least 2 points")
        if np.var(y) == 0:
            raise MetricsError(f"scenario {i}: R² undefined for constant observations")
        r2s.append(r2_score(y, y_hat))

    y_all = np.concatenate([np.asarray(y, dtype=float) for y in observed])
    y_hat_all = np.concatenate([np.asarray(y, dtype=float) for y in predicted])
    if (y_all == 0).any():
        raise MetricsError("MAPE undefined: an observed value is zero")

    mse = float(mean_squared_error(y_all, y_hat_all))
    return FitResult(
        r2=float(np.mean(r2s)),
        mse=mse,
        rmse=math.sqrt(mse),
        mae=float(mean_absolute_error(y_all, y_hat_all)),
        mape=float(mean_absolute_percentage_error(y_all, y_hat_all)),
        points=len(y_all),
        scenarios=len(r2s),
    )


def _completed(table: pd.DataFrame) -> pd.DataFrame:
    rows = table
    if "error" in rows.columns:
        rows = rows[rows["error"].isna() | (rows["error"] == "")]
    rows = rows.dropna(subset=["system_load", "occupancy", "service_rate"])
    if "total_requests" in rows.columns:
        rows = rows[rows["total_requests"] > 0]
    return rows


def residual_table(table: pd.DataFrame, which: str) -> pd.DataFrame:
    if which not in LAWS:
        raise ValueError(f"unknown law '{which}', expected one of {', '.join(LAWS)}")
    law = LAWS[which]
    rows = _completed(table)
    predicted = [law(u, int(c)) for u, c in zip(rows["system_load"], rows["capacity"])]
    residuals = pd.DataFrame({
        "u": rows["system_load"].to_numpy(dtype=float),
        "capacity": rows["capacity"].to_numpy(dtype=int),
        "fleet_size": rows["fleet_size"].to_numpy(dtype=int),
        "measured": rows[which].to_numpy(dtype=float),
        "predicted": np.asarray(predicted, dtype=float),
    })
    residuals["residual"] = residuals["measured"] - residuals["predicted"]
    return residuals.sort_values(["capacity", "fleet_size", "u"], kind="stable").reset_index(drop=True)[RESIDUAL_COLUMNS]


def _scenario_fit(residuals: pd.DataFrame) -> FitResult:
    groups = [g for _, g in residuals.groupby(["capacity", "fleet_size"], sort=True)]
    return error_metrics([g["measured"] for g in groups], [g["predicted"] for g in groups])


def validate_sweep(table: pd.DataFrame, which: str = "occupancy") -> SweepValidation:
    """Compare measured occupancy or service rate with the law at the measured load.

    A scenario is one (capacity, fleet size) series; the pooled result covers
    every scenario, `per_capacity` one FitResult per capacity.
    """
    residuals = residual_table(table, which)
    if residuals.empty:
        raise MetricsError("sweep table has no completed runs")
    pooled = _scenario_fit(residuals)
    per_capacity = {int(c): _scenario_fit(g) for c, g in residuals.groupby("capacity", sort=True)}
    logger.info(f"{which}: R²={pooled.r2:.3f} MAPE={pooled.mape * 100:.1f}% over {pooled.scenarios} scenarios")
    return SweepValidation(which=which, pooled=pooled, per_capacity=per_capacity, residuals=residuals)


def fit_summary(validations: list[SweepValidation]) -> pd.DataFrame:
    rows = []
    for v in validations:
        rows.append({"law": v.which, "capacity": "all", **v.pooled.as_row()})
        for capacity, fit in v.per_capacity.items():
            rows.append({"law": v.which, "capacity": str(capacity), **fit.as_row()})
    return pd.DataFrame(rows, columns=FIT_COLUMNS)


def fit_load_approximation(table: pd.DataFrame, detour_ratio: float, complexity: float = 0.0) -> LoadFit:
    """Least-squares line through the origin of measured u against (r_dt + T + C^(1/3)) x."""
    rows = _completed(table)
    rows = rows[rows["system_load"] > 0]
    if len(rows) < 2:
        raise MetricsError("load approximation fit needs at least 2 runs with positive load")

    capacity = rows["capacity"].to_numpy(dtype=int)
    x = rows["normalized_load"].to_numpy(dtype=float)
    factor = np.array([approximate_load(1.0, detour_ratio, complexity, c) for c in capacity])
    inputs = factor * x
    measured = rows["system_load"].to_numpy(dtype=float)

    model = LinearRegression(fit_intercept=False)
    model.fit(inputs.reshape(-1, 1), measured)
    fitted = model.predict(inputs.reshape(-1, 1))
    if np.var(measured) == 0:
        raise MetricsError("R² undefined for constant measured load")

    fit_table = pd.DataFrame({
        "capacity": capacity,
        "fleet_size": rows["fleet_size"].to_numpy(dtype=int),
        "arrival_rate": rows["arrival_rate"].to_numpy(dtype=float),
        "normalized_load": x,
        "load_factor": factor,
        "approximation_input": inputs,
        "measured_u": measured,
        "fitted_u": fitted,
    })[LOAD_FIT_COLUMNS]
    return LoadFit(slope=float(model.coef_[0]), r2=float(r2_score(measured, fitted)), table=fit_table)


def remaining_capacity_table(table: pd.DataFrame) -> pd.DataFrame:
    """Measured service rate against the linear prediction (C - C̄)/(C - 1)."""
    rows = _completed(table)
    rows = rows[rows["capacity"] >= 2]
    out = pd.DataFrame({
        "capacity": rows["capacity"].to_numpy(dtype=int),
        "fleet_size": rows["fleet_size"].to_numpy(dtype=int),
        "u": rows["system_load"].to_numpy(dtype=float),
        "occupancy": rows["occupancy"].to_numpy(dtype=float),
    })
    out["remaining_capacity"] = out["capacity"] - out["occupancy"]
    out["measured_service_rate"] = rows["service_rate"].to_numpy(dtype=float)
    out["linear_prediction"] = [
        linear_remaining_capacity(int(c), float(occ)) for c, occ in zip(out["capacity"], out["occupancy"])
    ]
    return out[REMAINING_COLUMNS]
