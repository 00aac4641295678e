from dataclasses import dataclass, field

import numpy as np

NodeId = int


@dataclass(frozen=True, eq=False)
class RoadGraph:
    """Directed street network. Node ids are dense in [0, node_count).

    Build instances through `services.road_network` (load_graph, build_graph,
    generate_grid); those validate lengths and strong connectivity.
    """

    xs: np.ndarray
    ys: np.ndarray
    edges: tuple[tuple[NodeId, NodeId, float], ...]
    adjacency: tuple[tuple[tuple[NodeId, float], ...], ...] = field(repr=False)

    @property
    def node_count(self) -> int:
        return len(self.xs)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def edge_length(self, u: NodeId, v: NodeId) -> float:
        for w, length in self.adjacency[u]:
            if w == v:
                return length
        raise KeyError((u, v))

    def has_node(self, node: NodeId) -> bool:
        return 0 <= node < self.node_count

    def extent(self) -> tuple[float, float, float, float]:
        return float(self.xs.min()), float(self.ys.min()), float(self.xs.max()), float(self.ys.max())


@dataclass(frozen=True)
class PathResult:
    distance: float
    node_sequence: tuple[NodeId, ...]
