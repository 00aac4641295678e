import heapq
import logging
import math
import threading
from functools import lru_cache
from pathlib import Path

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from ridepool.errors import GraphError, UnreachableError
from ridepool.models.network import NodeId, PathResult, RoadGraph

logger = logging.getLogger(__name__)

NODE_HEADER = ("id", "x", "y")
EDGE_HEADER = ("from", "to", "length_m")


# ── Construction & validation ─────────────────────────────

def build_graph(nodes: list[tuple[int, float, float]], edges: list[tuple[int, int, float]]) -> RoadGraph:
    """Validate nodes/edges and build an immutable RoadGraph.

    Parallel edges collapse to the shortest one.
    """
    if not nodes:
        raise GraphError("graph has no nodes")

    ids = sorted(n[0] for n in nodes)
    if ids != list(range(len(ids))):
        raise GraphError("node ids must be unique and dense in [0, node_count)")

    ordered = sorted(nodes)
    xs = np.array([n[1] for n in ordered], dtype=float)
    ys = np.array([n[2] for n in ordered], dtype=float)
    if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
        raise GraphError("node coordinates must be finite")

    n = len(ordered)
    best: dict[tuple[int, int], float] = {}
    for u, v, length in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u}, {v}) references an unknown node")
        if not (math.isfinite(length) and length > 0):
            raise GraphError(f"edge ({u}, {v}) has non-positive or non-finite length {length}")
        if (u, v) in best:
            logger.warning(f"Parallel edge ({u}, {v}) collapsed to the shorter length")
            length = min(length, best[(u, v)])
        best[(u, v)] = float(length)

    unique = tuple(sorted((u, v, length) for (u, v), length in best.items()))
    adjacency = [[] for _ in range(n)]
    for u, v, length in unique:
        adjacency[u].append((v, length))

    graph = RoadGraph(
        xs=xs,
        ys=ys,
        edges=unique,
        adjacency=tuple(tuple(adj) for adj in adjacency),
    )
    if not is_strongly_connected(graph):
        raise GraphError("graph is not strongly connected")
    return graph


def to_networkx(g: RoadGraph) -> nx.DiGraph:
    digraph = nx.DiGraph()
    digraph.add_nodes_from(range(g.node_count))
    digraph.add_weighted_edges_from(g.edges, weight="length")
    return digraph


def is_strongly_connected(g: RoadGraph) -> bool:
    return nx.is_strongly_connected(to_networkx(g))


# ── Text document format ──────────────────────────────────

def load_graph(source: str) -> RoadGraph:
    """Parse a node/edge document.

    Layout: a `[nodes]` section with header `id,x,y` and an `[edges]` section
    with header `from,to,length_m`. Blank lines and `#` comments are ignored.
    """
    section = None
    header_seen = False
    nodes: list[tuple[int, float, float]] = []
    edges: list[tuple[int, int, float]] = []
    node_lines: dict[int, int] = {}
    edge_lines: list[int] = []

    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.lower() in ("[nodes]", "[edges]"):
            section = line.lower()[1:-1]
            header_seen = False
            continue
        if section is None:
            raise GraphError("data before a [nodes] or [edges] section", line=lineno)

        fields = [f.strip() for f in line.split(",")]
        if not header_seen:
            expected = NODE_HEADER if section == "nodes" else EDGE_HEADER
            if tuple(f.lower() for f in fields) != expected:
                raise GraphError(f"expected header '{','.join(expected)}'", line=lineno)
            header_seen = True
            continue
        if len(fields) != 3:
            raise GraphError(f"expected 3 fields, got {len(fields)}", line=lineno)

        try:
            if section == "nodes":
                node_id = int(fields[0])
                if node_id in node_lines:
                    raise GraphError(f"duplicate node id {node_id}", line=lineno)
                node_lines[node_id] = lineno
                nodes.append((node_id, float(fields[1]), float(fields[2])))
            else:
                edges.append((int(fields[0]), int(fields[1]), float(fields[2])))
                edge_lines.append(lineno)
        except ValueError as e:
            raise GraphError(f"cannot parse value: {e}", line=lineno) from None

    count = len(node_lines)
    for node_id, lineno in sorted(node_lines.items(), key=lambda item: item[1]):
        if not 0 <= node_id < count:
            raise GraphError(f"node id {node_id} outside [0, {count}); ids must be dense", line=lineno)

    # Reference and length checks carry the offending line
    for (u, v, length), lineno in zip(edges, edge_lines):
        for endpoint in (u, v):
            if endpoint not in node_lines:
                raise GraphError(f"edge references unknown node {endpoint}", line=lineno)
        if not (math.isfinite(length) and length > 0):
            raise GraphError(f"edge length must be positive, got {length}", line=lineno)

    return build_graph(nodes, edges)


def read_graph(path: str | Path) -> RoadGraph:
    return load_graph(Path(path).read_text())


def write_graph(g: RoadGraph) -> str:
    lines = ["[nodes]", ",".join(NODE_HEADER)]
    lines += [f"{i},{x!r},{y!r}" for i, (x, y) in enumerate(zip(g.xs.tolist(), g.ys.tolist()))]
    lines += ["", "[edges]", ",".join(EDGE_HEADER)]
    lines += [f"{u},{v},{length!r}" for u, v, length in g.edges]
    return "\n".join(lines) + "\n"


# ── Synthetic networks ────────────────────────────────────

def _lattice(rows: int, cols: int) -> list[tuple[int, int]]:
    segments = []
    for r in range(rows):
        for c in range(cols):
            node = r * cols + c
            if c + 1 < cols:
                segments.append((node, node + 1))
            if r + 1 < rows:
                segments.append((node, node + cols))
    return segments


def generate_grid(rows: int, cols: int, spacing: float) -> RoadGraph:
    """Bidirectional square lattice; node id = row * cols + col."""
    if rows < 2:
        raise GraphError(f"rows must be >= 2, got {rows}")
    if cols < 2:
        raise GraphError(f"cols must be >= 2, got {cols}")
    if not spacing > 0:
        raise GraphError(f"spacing must be > 0, got {spacing}")

    nodes = [(r * cols + c, c * float(spacing), r * float(spacing)) for r in range(rows) for c in range(cols)]
    edges = []
    for a, b in _lattice(rows, cols):
        edges += [(a, b, float(spacing)), (b, a, float(spacing))]
    return build_graph(nodes, edges)


def generate_irregular_grid(rows: int, cols: int, spacing: float, drop_fraction: float = 0.2,
                            jitter: float = 0.25, seed: int = 0) -> RoadGraph:
    """Lattice with jittered intersections and a share of street segments removed.

    Removals that would disconnect the network are skipped, so the result can
    keep more segments than requested.
    """
    if not 0 <= drop_fraction < 1:
        raise GraphError(f"drop_fraction must be in [0, 1), got {drop_fraction}")
    if not 0 <= jitter < 0.5:
        raise GraphError(f"jitter must be in [0, 0.5), got {jitter}")
    base = generate_grid(rows, cols, spacing)
    rng = np.random.default_rng(seed)

    offsets = rng.uniform(-jitter * spacing, jitter * spacing, size=(base.node_count, 2))
    xs = base.xs + offsets[:, 0]
    ys = base.ys + offsets[:, 1]

    segments = _lattice(rows, cols)
    street = nx.Graph(segments)
    target = int(round(drop_fraction * len(segments)))
    dropped = 0
    for idx in rng.permutation(len(segments)):
        if dropped >= target:
            break
        a, b = segments[idx]
        street.remove_edge(a, b)
        if nx.has_path(street, a, b):
            dropped += 1
        else:
            street.add_edge(a, b)
    if dropped < target:
        logger.info(f"Irregular grid kept {target - dropped} extra segments to stay connected")

    nodes = [(i, float(xs[i]), float(ys[i])) for i in range(base.node_count)]
    edges = []
    for a, b in sorted(street.edges()):
        length = math.hypot(xs[a] - xs[b], ys[a] - ys[b])
        edges += [(a, b, length), (b, a, length)]
    return build_graph(nodes, edges)


# ── Routing ───────────────────────────────────────────────

def _check_node(g: RoadGraph, node: NodeId):
    if not g.has_node(node):
        raise GraphError(f"unknown node {node}")


def shortest_path(g: RoadGraph, source: NodeId, target: NodeId) -> PathResult:
    """Dijkstra from source to target.

    Nodes settle in (distance, node id) order and a predecessor is replaced only
    on strict improvement, so equal-length alternatives resolve the same way
    on every run.
    """
    _check_node(g, source)
    _check_node(g, target)
    if source == target:
        return PathResult(0.0, (source,))

    dist = {source: 0.0}
    pred: dict[NodeId, NodeId] = {}
    settled = set()
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in settled:
            continue
        if u == target:
            break
        settled.add(u)
        for v, length in g.adjacency[u]:
            nd = d + length
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))

    if target not in dist:
        raise UnreachableError(f"node {target} is unreachable from {source}")

    sequence = [target]
    while sequence[-1] != source:
        sequence.append(pred[sequence[-1]])
    return PathResult(dist[target], tuple(reversed(sequence)))


def travel_time(distance: float, speed: float) -> float:
    if not speed > 0:
        raise ValueError(f"speed must be > 0, got {speed}")
    if distance < 0:
        raise ValueError(f"distance must be >= 0, got {distance}")
    return distance / speed


def snap_to_nearest_node(g: RoadGraph, x: float, y: float) -> NodeId:
    # argmin returns the first minimum, i.e. the lowest node id on ties
    return int(np.argmin((g.xs - x) ** 2 + (g.ys - y) ** 2))


def snap_points(g: RoadGraph, xs, ys, chunk: int = 2048) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    out = np.empty(len(xs), dtype=np.int64)
    for start in range(0, len(xs), chunk):
        px = xs[start:start + chunk, None]
        py = ys[start:start + chunk, None]
        out[start:start + chunk] = np.argmin((g.xs[None, :] - px) ** 2 + (g.ys[None, :] - py) ** 2, axis=1)
    return out


class DistanceOracle:
    """Cached network distances for the dispatcher.

    Graphs up to `apsp_max_nodes` get a precomputed all-pairs matrix; larger
    ones compute single-source rows on demand and memoize them. Both caches are
    safe to share between threads.
    """

    def __init__(self, g: RoadGraph, apsp_max_nodes: int = 2500, path_cache: int = 65536):
        self.graph = g
        n = g.node_count
        us = [u for u, _, _ in g.edges]
        vs = [v for _, v, _ in g.edges]
        lengths = [length for _, _, length in g.edges]
        self._csr = csr_matrix((lengths, (us, vs)), shape=(n, n))
        self._rows: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()
        self._matrix = dijkstra(self._csr, directed=True) if n <= apsp_max_nodes else None
        if self._matrix is not None and not np.isfinite(self._matrix).all():
            raise UnreachableError("distance matrix contains unreachable pairs")
        self.path = lru_cache(maxsize=path_cache)(self._path)
        logger.debug(f"Distance oracle ready for {n} nodes (precomputed={self._matrix is not None})")

    @property
    def precomputed(self) -> bool:
        return self._matrix is not None

    def _path(self, source: NodeId, target: NodeId) -> PathResult:
        return shortest_path(self.graph, source, target)

    def row(self, source: NodeId) -> np.ndarray:
        if self._matrix is not None:
            return self._matrix[source]
        with self._lock:
            cached = self._rows.get(source)
        if cached is None:
            cached = dijkstra(self._csr, directed=True, indices=source)
            with self._lock:
                self._rows.setdefault(source, cached)
        return cached

    def distance(self, source: NodeId, target: NodeId) -> float:
        return float(self.row(source)[target])

    def travel_time(self, source: NodeId, target: NodeId, speed: float) -> float:
        return travel_time(self.distance(source, target), speed)

    def pair_distances(self, sources, targets) -> np.ndarray:
        """Elementwise distances sources[i] -> targets[i]."""
        sources = np.asarray(sources, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.int64)
        if self._matrix is not None:
            return self._matrix[sources, targets]
        return np.array([self.row(int(s))[int(t)] for s, t in zip(sources, targets)], dtype=float)

    def distances(self, sources, targets) -> np.ndarray:
        sources = np.asarray(sources, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.int64)
        if self._matrix is not None:
            return self._matrix[np.ix_(sources, targets)]
        if len(sources) == 0:
            return np.empty((0, len(targets)))
        return np.vstack([self.row(int(s))[targets] for s in sources])
