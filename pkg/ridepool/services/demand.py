import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd

from ridepool.errors import DemandError
from ridepool.models.demand import BoundingBox, DemandConfig, RawTrip, Request
from ridepool.models.network import RoadGraph
from ridepool.services.road_network import DistanceOracle, snap_points

logger = logging.getLogger(__name__)

# Trips with a network distance of no more than this are not considered
MIN_TRIP_DISTANCE = 500.0
MAX_RESAMPLE_ROUNDS = 1000

TRIP_COLUMNS = ["timestamp", "origin_x", "origin_y", "dest_x", "dest_y"]
REQUEST_COLUMNS = ["id", "request_time", "origin", "destination", "direct_distance", "direct_time"]


def round_to_interval(timestamp: float, delta: float) -> float:
    """Nearest multiple of delta; exact halves round up."""
    return math.floor(timestamp / delta + 0.5) * delta


def _trip_array(raw) -> np.ndarray:
    if isinstance(raw, pd.DataFrame):
        missing = [c for c in TRIP_COLUMNS if c not in raw.columns]
        if missing:
            raise DemandError(f"missing columns: {', '.join(missing)}")
        frame = raw[TRIP_COLUMNS]
    else:
        rows = []
        for i, trip in enumerate(raw):
            if isinstance(trip, RawTrip):
                rows.append((trip.timestamp, trip.origin_x, trip.origin_y, trip.dest_x, trip.dest_y))
            elif len(trip) == 5:
                rows.append(tuple(trip))
            else:
                raise DemandError(f"expected 5 fields, got {len(trip)}", index=i)
        frame = pd.DataFrame(rows, columns=TRIP_COLUMNS)

    try:
        values = frame.to_numpy(dtype=float).reshape(-1, 5)
    except (TypeError, ValueError):
        for i, row in enumerate(frame.itertuples(index=False)):
            try:
                [float(v) for v in row]
            except (TypeError, ValueError):
                raise DemandError("non-numeric field", index=i) from None
        raise
    bad = np.flatnonzero(~np.isfinite(values).all(axis=1))
    if len(bad):
        raise DemandError("non-finite field", index=int(bad[0]))
    return values


def filter_trips(raw, g: RoadGraph, delta: float, area: BoundingBox | None = None, speed: float = 6.0,
                 oracle: DistanceOracle | None = None, min_distance: float = MIN_TRIP_DISTANCE) -> list[Request]:
    """Turn raw trip records into requests.

    Order of rules: study-area filter, snap to nearest intersections,
    drop trips with network distance <= min_distance, round timestamps to the
    matching grid. Ids follow (request_time, input order).
    """
    if not delta > 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    if not speed > 0:
        raise ValueError(f"speed must be > 0, got {speed}")
    values = _trip_array(raw)
    if len(values) == 0:
        return []

    area = area or BoundingBox(*g.extent())
    inside = np.array([
        area.contains(ox, oy) and area.contains(dx, dy) for _, ox, oy, dx, dy in values
    ], dtype=bool)
    index = np.flatnonzero(inside)
    kept = values[index]

    oracle = oracle or DistanceOracle(g)
    origins = snap_points(g, kept[:, 1], kept[:, 2])
    destinations = snap_points(g, kept[:, 3], kept[:, 4])
    distances = oracle.pair_distances(origins, destinations)
    long_enough = distances > min_distance

    candidates = []
    for pos in np.flatnonzero(long_enough):
        request_time = round_to_interval(float(kept[pos, 0]), delta)
        candidates.append((request_time, int(index[pos]), int(origins[pos]), int(destinations[pos]), float(distances[pos])))
    candidates.sort(key=lambda c: (c[0], c[1]))

    logger.info(
        f"Filtered {len(values)} trips: {len(values) - len(index)} outside area, "
        f"{int((~long_enough).sum())} too short, {len(candidates)} kept"
    )
    return [
        Request(id=i, origin=o, destination=d, request_time=t, direct_distance=dist, direct_time=dist / speed)
        for i, (t, _, o, d, dist) in enumerate(candidates)
    ]


def subsample(requests: list[Request], rate: float, seed: int) -> list[Request]:
    """Keep each request independently with probability `rate`.

    One uniform draw per request compared against the rate: for a fixed seed a
    lower rate keeps a subset of what a higher rate keeps.
    """
    if not 0 < rate <= 1:
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    draws = np.random.default_rng(seed).random(len(requests))
    return [r for r, u in zip(requests, draws) if u < rate]


# ── Synthetic demand ──────────────────────────────────────

def od_weights(cfg: DemandConfig, g: RoadGraph) -> tuple[np.ndarray, np.ndarray]:
    """Origin and destination weights for the uniform and hotspot presets."""
    uniform = np.full(g.node_count, 1.0 / g.node_count)
    if cfg.od_distribution == "uniform":
        return uniform, uniform
    if cfg.od_distribution != "hotspot":
        raise DemandError(f"no node weights for preset '{cfg.od_distribution}'")

    xmin, ymin, xmax, ymax = g.extent()
    cx, cy = cfg.hotspot_center or ((xmin + xmax) / 2, (ymin + ymax) / 2)
    spread = cfg.hotspot_spread or max(xmax - xmin, ymax - ymin) / 4 or 1.0
    bump = np.exp(-((g.xs - cx) ** 2 + (g.ys - cy) ** 2) / (2 * spread ** 2))
    if bump.sum() <= 0:
        raise DemandError("hotspot weights vanish on every node")
    return bump / bump.sum(), uniform


def _pair_sampler(cfg: DemandConfig, g: RoadGraph, rng: np.random.Generator):
    if cfg.od_distribution == "custom":
        pairs = np.array([(o, d) for o, d, _ in cfg.od_pairs], dtype=np.int64)
        if (pairs < 0).any() or (pairs >= g.node_count).any():
            raise DemandError("custom OD pair references an unknown node")
        weights = np.array([w for _, _, w in cfg.od_pairs], dtype=float)
        weights = weights / weights.sum()

        def sample(size):
            picks = rng.choice(len(pairs), size=size, p=weights)
            return pairs[picks, 0], pairs[picks, 1]
        return sample

    origin_w, dest_w = od_weights(cfg, g)

    def sample(size):
        return rng.choice(g.node_count, size=size, p=origin_w), rng.choice(g.node_count, size=size, p=dest_w)
    return sample


def generate_poisson(cfg: DemandConfig, g: RoadGraph, delta: float, speed: float = 6.0,
                     oracle: DistanceOracle | None = None, min_distance: float = MIN_TRIP_DISTANCE) -> list[Request]:
    """Poisson(λΔ) requests per matching step, OD pairs resampled until longer than min_distance."""
    if not delta > 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    rng = np.random.default_rng(cfg.seed)
    steps = int(math.floor(cfg.horizon / delta + 1e-9))
    if cfg.arrival_rate == 0 or steps == 0:
        return []

    counts = rng.poisson(cfg.arrival_rate * delta, size=steps)
    total = int(counts.sum())
    if total == 0:
        return []

    oracle = oracle or DistanceOracle(g)
    sample = _pair_sampler(cfg, g, rng)
    origins, destinations = sample(total)
    distances = oracle.pair_distances(origins, destinations)
    bad = np.flatnonzero(distances <= min_distance)
    rounds = 0
    while len(bad):
        rounds += 1
        if rounds > MAX_RESAMPLE_ROUNDS:
            raise DemandError(f"OD distribution admits no pair longer than {min_distance:g} m")
        o, d = sample(len(bad))
        origins[bad], destinations[bad] = o, d
        distances[bad] = oracle.pair_distances(o, d)
        bad = bad[distances[bad] <= min_distance]

    times = np.repeat(np.arange(steps) * delta, counts)
    return [
        Request(id=i, origin=int(o), destination=int(d), request_time=float(t),
                direct_distance=float(dist), direct_time=float(dist) / speed)
        for i, (t, o, d, dist) in enumerate(zip(times, origins, destinations, distances))
    ]


def mean_direct_distance(requests: list[Request]) -> float:
    if not requests:
        raise DemandError("mean direct distance of an empty request list")
    return float(np.mean([r.direct_distance for r in requests]))


# ── Delimited IO ──────────────────────────────────────────

def read_trips(path: str | Path) -> pd.DataFrame:
    frame = pd.read_csv(path)
    missing = [c for c in TRIP_COLUMNS if c not in frame.columns]
    if missing:
        raise DemandError(f"trip file {path} is missing columns: {', '.join(missing)}")
    return frame[TRIP_COLUMNS]


def requests_frame(requests: list[Request]) -> pd.DataFrame:
    return pd.DataFrame(
        [(r.id, r.request_time, r.origin, r.destination, r.direct_distance, r.direct_time) for r in requests],
        columns=REQUEST_COLUMNS,
    )


def write_requests(requests: list[Request], path: str | Path, g: RoadGraph | None = None):
    frame = requests_frame(requests)
    if g is not None:
        # raw columns so the file also reads back as a trip file
        frame.insert(1, "timestamp", frame["request_time"])
        frame["origin_x"] = g.xs[frame["origin"]] if len(frame) else []
        frame["origin_y"] = g.ys[frame["origin"]] if len(frame) else []
        frame["dest_x"] = g.xs[frame["destination"]] if len(frame) else []
        frame["dest_y"] = g.ys[frame["destination"]] if len(frame) else []
    frame.to_csv(path, index=False)


def read_requests(path: str | Path, g: RoadGraph | None = None) -> list[Request]:
    frame = pd.read_csv(path)
    missing = [c for c in REQUEST_COLUMNS if c not in frame.columns]
    if missing:
        raise DemandError(f"request file {path} is missing columns: {', '.join(missing)}")
    requests = []
    for i, row in enumerate(frame[REQUEST_COLUMNS].itertuples(index=False)):
        if row.origin == row.destination:
            raise DemandError("origin equals destination", index=i)
        if g is not None and not (g.has_node(int(row.origin)) and g.has_node(int(row.destination))):
            raise DemandError("request references an unknown node", index=i)
        requests.append(Request(
            id=int(row.id), origin=int(row.origin), destination=int(row.destination),
            request_time=float(row.request_time), direct_distance=float(row.direct_distance),
            direct_time=float(row.direct_time),
        ))
    return sorted(requests, key=lambda r: (r.request_time, r.id))
