"""Exact trip-vehicle assignment.

max sum x_ij v_ij  s.t. each vehicle takes at most one trip, each request is
in at most one chosen trip, x binary. Solved per connected component of the
RTV graph by depth-first branch-and-bound: vehicles in id order, each
vehicle's edges by descending value, then the "leave idle" branch. The bound
adds, for every remaining vehicle, its best edge still compatible with the
requests taken so far. Ties go to the lexicographically smallest sorted
(vehicle, trip) set.

Components with more than `max_search_vehicles` vehicles get their optimum
from the HiGHS MILP solver. Edges the LP relaxation rules out of every
optimal assignment are dropped, what is left is split again, and each part
is either searched as above or resolved vehicle by vehicle: every vehicle in
id order moves to its smallest trip that still allows an optimal assignment.
Both routes return the same set the search alone would.
"""
import logging

import networkx as nx
import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp
from scipy.sparse import lil_matrix

from ridepool.models.matching import AssignmentSolution, RtvEdge, RtvGraph, Trip

logger = logging.getLogger(__name__)

MAX_SEARCH_VEHICLES = 8


def _tol(value: float) -> float:
    return 1e-9 * max(1.0, abs(value))


def _key(edges) -> tuple:
    return tuple(sorted((e.vehicle_id, e.trip) for e in edges))


def _total(edges) -> float:
    return sum(e.value for e in edges)


def greedy_assignment(rtv: RtvGraph) -> AssignmentSolution:
    """Take edges by descending value while vehicle and requests are still free."""
    used_vehicles = set()
    used_requests = set()
    chosen = []
    for edge in sorted(rtv.edges, key=lambda e: (-e.value, e.vehicle_id, e.trip)):
        if edge.value <= 0 or edge.vehicle_id in used_vehicles or not used_requests.isdisjoint(edge.trip):
            continue
        chosen.append(edge)
        used_vehicles.add(edge.vehicle_id)
        used_requests.update(edge.trip)
    chosen.sort(key=lambda e: (e.vehicle_id, e.trip))
    return AssignmentSolution(tuple(chosen), _total(chosen))


def _components(edges: list[RtvEdge]) -> list[list[RtvEdge]]:
    linkage = nx.Graph()
    for e in edges:
        linkage.add_node(("v", e.vehicle_id))
        for rid in e.trip:
            linkage.add_edge(("v", e.vehicle_id), ("r", rid))
    groups = {}
    for idx, comp in enumerate(nx.connected_components(linkage)):
        for node in comp:
            groups[node] = idx
    split: dict[int, list[RtvEdge]] = {}
    for e in edges:
        split.setdefault(groups[("v", e.vehicle_id)], []).append(e)
    return sorted(split.values(), key=lambda es: min(e.vehicle_id for e in es))


def _vehicle_count(edges: list[RtvEdge]) -> int:
    return len({e.vehicle_id for e in edges})


def _solve_component(edges: list[RtvEdge]) -> tuple[list[RtvEdge], float]:
    vehicle_ids = sorted({e.vehicle_id for e in edges})
    options = {
        vid: sorted((e for e in edges if e.vehicle_id == vid), key=lambda e: (-e.value, e.trip))
        for vid in vehicle_ids
    }
    incumbent = greedy_assignment(RtvGraph(edges))
    best_value = incumbent.objective
    best_edges = list(incumbent.chosen)
    best_key = _key(best_edges)

    used: set[int] = set()
    chosen: list[RtvEdge] = []

    def bound(i: int) -> float:
        total = 0.0
        for vid in vehicle_ids[i:]:
            for e in options[vid]:
                if used.isdisjoint(e.trip):
                    total += e.value
                    break
        return total

    def dfs(i: int, value: float):
        nonlocal best_value, best_edges, best_key
        if i == len(vehicle_ids):
            if value > best_value + _tol(best_value):
                best_value, best_edges, best_key = value, list(chosen), _key(chosen)
            elif abs(value - best_value) <= _tol(best_value):
                key = _key(chosen)
                if key < best_key:
                    best_value, best_edges, best_key = value, list(chosen), key
            return
        rest = bound(i + 1)
        for e in options[vehicle_ids[i]]:
            if value + e.value + rest < best_value - _tol(best_value):
                break
            if not used.isdisjoint(e.trip):
                continue
            used.update(e.trip)
            chosen.append(e)
            dfs(i + 1, value + e.value)
            chosen.pop()
            used.difference_update(e.trip)
        if value + rest >= best_value - _tol(best_value):
            dfs(i + 1, value)

    dfs(0, 0.0)
    return best_edges, best_value


def _packing_matrix(edges: list[RtvEdge]):
    """One row per vehicle, then one per request; column j is edge j."""
    vehicle_rows = {vid: i for i, vid in enumerate(sorted({e.vehicle_id for e in edges}))}
    request_rows = {rid: len(vehicle_rows) + i for i, rid in enumerate(sorted({r for e in edges for r in e.trip}))}
    a = lil_matrix((len(vehicle_rows) + len(request_rows), len(edges)))
    for col, e in enumerate(edges):
        a[vehicle_rows[e.vehicle_id], col] = 1
        for rid in e.trip:
            a[request_rows[rid], col] = 1
    return a.tocsr()


def _solve_milp(
    edges: list[RtvEdge],
    fixed: dict[int, Trip | None] | None = None,
    require: list[RtvEdge] = (),
) -> list[RtvEdge] | None:
    """Optimal edge set, or None if the solver finds none.

    `fixed` pins vehicles to a trip (None = idle); at least one edge of
    `require` must be chosen.
    """
    fixed = fixed or {}
    lower = np.zeros(len(edges))
    upper = np.ones(len(edges))
    for col, e in enumerate(edges):
        if e.vehicle_id in fixed:
            pinned = fixed[e.vehicle_id] == e.trip
            lower[col] = upper[col] = 1.0 if pinned else 0.0

    constraints = [LinearConstraint(_packing_matrix(edges), -np.inf, 1)]
    if require:
        wanted = {(e.vehicle_id, e.trip) for e in require}
        row = np.array([[1.0 if (e.vehicle_id, e.trip) in wanted else 0.0 for e in edges]])
        constraints.append(LinearConstraint(row, 1, 1))

    result = milp(
        -np.array([e.value for e in edges]),
        constraints=constraints,
        integrality=np.ones(len(edges)),
        bounds=Bounds(lower, upper),
        options={"mip_rel_gap": 0.0},
    )
    if not result.success:
        return None
    return [e for e, x in zip(edges, result.x) if x > 0.5]


def _optimal_candidates(edges: list[RtvEdge], target: float) -> list[RtvEdge]:
    """Edges that can still be part of an assignment worth `target`.

    With y the LP dual, every assignment containing edge e is worth at most
    sum(y) minus the reduced cost of e.
    """
    a = _packing_matrix(edges)
    values = np.array([e.value for e in edges])
    lp = linprog(-values, A_ub=a, b_ub=np.ones(a.shape[0]), bounds=(0, None), method="highs")
    if lp.status != 0:
        return edges
    duals = np.maximum(-lp.ineqlin.marginals, 0.0)
    reduced = a.T @ duals - values
    slack = 1e-6 * max(1.0, abs(target)) + np.maximum(-reduced, 0.0).sum()
    ceiling = duals.sum() - reduced
    return [e for e, top in zip(edges, ceiling) if top >= target - slack]


def _lex_smallest(edges: list[RtvEdge], witness: list[RtvEdge]) -> list[RtvEdge]:
    """Smallest sorted (vehicle, trip) set among those worth as much as `witness`."""
    edges = sorted(edges, key=lambda e: (e.vehicle_id, e.trip))
    target = _total(witness)
    current = {e.vehicle_id: e for e in witness}
    fixed: dict[int, Trip | None] = {}
    for vid in sorted({e.vehicle_id for e in edges}):
        while True:
            mine = current.get(vid)
            smaller = [e for e in edges if e.vehicle_id == vid and (mine is None or e.trip < mine.trip)]
            if not smaller:
                break
            better = _solve_milp(edges, fixed, smaller)
            if better is None or _total(better) < target - _tol(target):
                break
            current = {e.vehicle_id: e for e in better}
        fixed[vid] = current[vid].trip if vid in current else None
    return list(current.values())


def _solve_large(edges: list[RtvEdge], max_search_vehicles: int) -> list[RtvEdge]:
    edges = sorted(edges, key=lambda e: (e.vehicle_id, e.trip))
    witness = _solve_milp(edges)
    if witness is None:
        logger.warning(f"MILP solver failed on {_vehicle_count(edges)} vehicles; falling back to the combinatorial search")
        return _solve_component(edges)[0]

    target = _total(witness)
    kept = _optimal_candidates(edges, target)
    kept_keys = {(e.vehicle_id, e.trip) for e in kept}
    if any((e.vehicle_id, e.trip) not in kept_keys for e in witness):
        kept = edges
    logger.debug(f"Component of {_vehicle_count(edges)} vehicles: {len(kept)}/{len(edges)} edges can be optimal")

    chosen: list[RtvEdge] = []
    for part in _components(kept):
        if _vehicle_count(part) > max_search_vehicles:
            vehicles = {e.vehicle_id for e in part}
            chosen.extend(_lex_smallest(part, [e for e in witness if e.vehicle_id in vehicles]))
        else:
            chosen.extend(_solve_component(part)[0])
    return chosen


def solve_ilp(rtv: RtvGraph, max_search_vehicles: int = MAX_SEARCH_VEHICLES) -> AssignmentSolution:
    """Exact optimum; ties resolve to the lexicographically smallest (vehicle, trip) set."""
    edges = [e for e in rtv.edges if e.value > 0]
    if not edges:
        return AssignmentSolution()

    chosen: list[RtvEdge] = []
    for comp in _components(edges):
        if _vehicle_count(comp) > max_search_vehicles:
            chosen.extend(_solve_large(comp, max_search_vehicles))
        else:
            chosen.extend(_solve_component(comp)[0])
    chosen.sort(key=lambda e: (e.vehicle_id, e.trip))
    objective = _total(chosen)
    logger.debug(f"Assignment: {len(chosen)} trips, objective {objective:.3f}")
    return AssignmentSolution(tuple(chosen), objective)
