import pandas as pd

from ridepool.models.fleet import VehicleEvent
from ridepool.models.matching import AssignmentSolution, RtvGraph

EVENT_COLUMNS = ["time", "action", "request_id", "vehicle_id", "node", "details"]
RTV_COLUMNS = ["time", "vehicle_id", "trip", "value", "chosen"]


class EventTrace:
    """In-memory log of request lifecycle actions; a disabled trace records nothing."""

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.rows: list[dict] = []

    def log_action(self, time: float, action: str, request_id: int | None = None, vehicle_id: int | None = None,
                   node: int | None = None, details: dict | None = None):
        """Log any significant action in the simulation."""
        if not self.enabled:
            return
        self.rows.append({
            "time": time,
            "action": action,  # requested | assigned | released | expired | picked_up | dropped_off
            "request_id": request_id,
            "vehicle_id": vehicle_id,
            "node": node,
            "details": ";".join(f"{k}={v}" for k, v in (details or {}).items()),
        })

    def log_vehicle_events(self, events: list[VehicleEvent]):
        for ev in events:
            self.log_action(ev.time, ev.event, ev.request_id, ev.vehicle_id, ev.node)


def events_frame(rows: list[dict]) -> pd.DataFrame:
    return pd.DataFrame(rows, columns=EVENT_COLUMNS)


def rtv_rows(time: float, rtv: RtvGraph, solution: AssignmentSolution) -> list[dict]:
    chosen = {(e.vehicle_id, e.trip) for e in solution.chosen}
    return [
        {
            "time": time,
            "vehicle_id": e.vehicle_id,
            "trip": ";".join(str(r) for r in e.trip),
            "value": e.value,
            "chosen": (e.vehicle_id, e.trip) in chosen,
        }
        for e in rtv.edges
    ]


def rtv_frame(rows: list[dict]) -> pd.DataFrame:
    return pd.DataFrame(rows, columns=RTV_COLUMNS)
