"""Road-network machinery.

Validated undirected graphs, dense all-pairs shortest paths with next-hop
routing, shortest-path (graph) Voronoi partitions, range-limited graph cells,
and mass-weighted graph centroids.

Vehicle positions elsewhere in the library are either a node id (``int``) or a
mid-edge triple ``(u, v, offset_m)`` meaning "offset_m meters from u while
driving toward v"; :func:`position_node_distance` implements the shortest-path
distance for both forms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DisconnectedGraphError,
    DuplicateEdgeError,
    EmptyCellError,
    EmptyGeneratorSetError,
    NonPositiveLengthError,
)


@dataclass(frozen=True)
class RoadGraph:
    """Undirected road graph with dense integer node ids 0..N-1.

    coords : (N, 2) planar node coordinates in meters
    edge_u, edge_v : (E,) endpoint ids
    edge_len : (E,) edge lengths in meters, strictly positive
    """

    coords: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_len: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.coords)

    @property
    def n_edges(self) -> int:
        return len(self.edge_len)

    def edge_length(self, u: int, v: int) -> float:
        return self._length_lookup[(u, v)]

    def neighbors(self, u: int) -> list[tuple[int, float]]:
        return self._adjacency[u]

    def __post_init__(self):
        lookup: dict[tuple[int, int], float] = {}
        adjacency: list[list[tuple[int, float]]] = [[] for _ in range(self.n_nodes)]
        for u, v, w in zip(self.edge_u, self.edge_v, self.edge_len):
            u, v, w = int(u), int(v), float(w)
            lookup[(u, v)] = w
            lookup[(v, u)] = w
            adjacency[u].append((v, w))
            adjacency[v].append((u, w))
        object.__setattr__(self, "_length_lookup", lookup)
        object.__setattr__(self, "_adjacency", adjacency)
        for arr in (self.coords, self.edge_u, self.edge_v, self.edge_len):
            arr.flags.writeable = False

    def bounding_box(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the node coordinates."""
        xmin, ymin = self.coords.min(axis=0)
        xmax, ymax = self.coords.max(axis=0)
        return float(xmin), float(ymin), float(xmax), float(ymax)


@dataclass(frozen=True)
class DistanceOracle:
    """Dense all-pairs shortest distances plus first-hop routing table.

    dist[i, j] is the shortest-path length in meters; next_hop[i, j] is the
    first node after i on a shortest path toward j (next_hop[i, i] == i).
    """

    dist: np.ndarray
    next_hop: np.ndarray

    def __post_init__(self):
        self.dist.flags.writeable = False
        self.next_hop.flags.writeable = False

    def path(self, a: int, b: int) -> list[int]:
        """Node sequence from a to b inclusive, following next hops."""
        out = [a]
        cur = a
        while cur != b:
            cur = int(self.next_hop[cur, b])
            out.append(cur)
        return out


@dataclass(frozen=True)
class GraphCell:
    """Range-limited graph Voronoi cell: member nodes of one generator."""

    generator: int
    members: np.ndarray  # sorted node ids

    def __len__(self) -> int:
        return len(self.members)


def build_graph(nodes, edges) -> RoadGraph:
    """Validate and build an undirected road graph.

    nodes: iterable of (id, x_m, y_m) with ids exactly 0..N-1 in any order.
    edges: iterable of (u, v, length_m).

    Raises DuplicateEdgeError, NonPositiveLengthError, DisconnectedGraphError,
    or ValueError for malformed ids.
    """
    nodes = list(nodes)
    if not nodes:
        raise ValueError("graph needs at least one node")
    n = len(nodes)
    coords = np.full((n, 2), np.nan)
    seen_ids = set()
    for nid, x, y in nodes:
        nid = int(nid)
        if nid in seen_ids:
            raise ValueError(f"duplicate node id {nid}")
        if not 0 <= nid < n:
            raise ValueError(f"node ids must be dense 0..{n - 1}, got {nid}")
        seen_ids.add(nid)
        coords[nid] = (float(x), float(y))

    eu, ev, el = [], [], []
    seen_edges = set()
    for u, v, length in edges:
        u, v, length = int(u), int(v), float(length)
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge endpoint out of range: ({u}, {v})")
        if u == v:
            raise DuplicateEdgeError(f"self-loop at node {u}")
        if length <= 0:
            raise NonPositiveLengthError(f"edge ({u}, {v}) has length {length}")
        key = (min(u, v), max(u, v))
        if key in seen_edges:
            raise DuplicateEdgeError(f"edge ({u}, {v}) appears twice")
        seen_edges.add(key)
        eu.append(u)
        ev.append(v)
        el.append(length)

    graph = RoadGraph(
        coords=coords,
        edge_u=np.asarray(eu, dtype=np.int64),
        edge_v=np.asarray(ev, dtype=np.int64),
        edge_len=np.asarray(el, dtype=np.float64),
    )

    # connectivity check via BFS from node 0
    if n > 1:
        visited = np.zeros(n, dtype=bool)
        stack = [0]
        visited[0] = True
        while stack:
            u = stack.pop()
            for v, _ in graph.neighbors(u):
                if not visited[v]:
                    visited[v] = True
                    stack.append(v)
        if not visited.all():
            missing = int(np.flatnonzero(~visited)[0])
            raise DisconnectedGraphError(f"node {missing} unreachable from node 0")
    return graph


def grid_graph(k: int, spacing_m: float) -> RoadGraph:
    """k-by-k lattice with uniform edge length; node id = row * k + col."""
    if k < 2:
        raise ValueError("grid needs k >= 2")
    nodes = [(r * k + c, c * spacing_m, r * spacing_m) for r in range(k) for c in range(k)]
    edges = []
    for r in range(k):
        for c in range(k):
            nid = r * k + c
            if c + 1 < k:
                edges.append((nid, nid + 1, spacing_m))
            if r + 1 < k:
                edges.append((nid, nid + k, spacing_m))
    return build_graph(nodes, edges)


def graph_to_json(graph: RoadGraph) -> dict:
    return {
        "nodes": [[i, float(x), float(y)] for i, (x, y) in enumerate(graph.coords)],
        "edges": [
            [int(u), int(v), float(w)]
            for u, v, w in zip(graph.edge_u, graph.edge_v, graph.edge_len)
        ],
    }


def graph_from_json(doc) -> RoadGraph:
    """Load a graph from a parsed JSON document or a file path."""
    if isinstance(doc, (str, bytes)):
        with open(doc) as fh:
            doc = json.load(fh)
    return build_graph(doc["nodes"], doc["edges"])


def all_pairs_shortest(graph: RoadGraph) -> DistanceOracle:
    """Dense all-pairs shortest paths (Floyd-Warshall) with next hops."""
    n = graph.n_nodes
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    nxt = np.full((n, n), -1, dtype=np.int32)
    nxt[np.arange(n), np.arange(n)] = np.arange(n)
    u, v, w = graph.edge_u, graph.edge_v, graph.edge_len
    dist[u, v] = w
    dist[v, u] = w
    nxt[u, v] = v
    nxt[v, u] = u

    for k in range(n):
        alt = dist[:, k, None] + dist[None, k, :]
        better = alt < dist
        if better.any():
            dist[better] = alt[better]
            nxt[better] = np.broadcast_to(nxt[:, k, None], (n, n))[better]
    return DistanceOracle(dist=dist, next_hop=nxt)


def graph_voronoi(oracle: DistanceOracle, generators) -> np.ndarray:
    """Assign every node to its shortest-path-nearest generator.

    Returns an array of length N whose entries are generator node ids.
    Distance ties go to the smaller generator id.
    """
    gens = np.asarray(sorted(int(g) for g in generators), dtype=np.int64)
    if gens.size == 0:
        raise EmptyGeneratorSetError("no generators")
    if len(set(gens.tolist())) != len(gens):
        raise ValueError("generators must be distinct")
    # argmin over rows of the sorted generator list: first occurrence wins,
    # which is the smallest generator id.
    rows = oracle.dist[gens, :]
    return gens[np.argmin(rows, axis=0)]


def r_limited_graph_cell(
    assignment: np.ndarray, oracle: DistanceOracle, generator: int, r_graph_m: float
) -> GraphCell:
    """Members of a generator's Voronoi cell within graph distance r_graph_m."""
    generator = int(generator)
    owned = assignment == generator
    if not owned.any():
        raise ValueError(f"node {generator} is not a generator of this assignment")
    near = oracle.dist[generator] <= r_graph_m
    members = np.flatnonzero(owned & near)
    return GraphCell(generator=generator, members=members)


def graph_centroid(cell: GraphCell, mass: np.ndarray, oracle: DistanceOracle) -> int:
    """Mass-weighted graph centroid of a cell.

    Returns the member node minimizing the mass-weighted sum of squared
    shortest-path distances to all members; ties go to the smallest node id.
    """
    members = cell.members
    if len(members) == 0:
        raise EmptyCellError("cell has no member nodes")
    d = oracle.dist[np.ix_(members, members)]
    cost = (d * d) @ np.asarray(mass)[members]
    return int(members[int(np.argmin(cost))])


def nearest_node(graph: RoadGraph, point) -> int:
    """Euclidean-nearest node to a planar point; ties to the smallest id."""
    delta = graph.coords - np.asarray(point, dtype=np.float64)
    return int(np.argmin(np.einsum("ij,ij->i", delta, delta)))


def nearest_nodes(graph: RoadGraph, points) -> np.ndarray:
    """Vectorized nearest_node over rows of ``points``."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    coords = graph.coords
    d2 = (
        np.einsum("ij,ij->i", pts, pts)[:, None]
        + np.einsum("ij,ij->i", coords, coords)[None, :]
        - 2.0 * (pts @ coords.T)
    )
    return np.argmin(d2, axis=1)


def position_node_distance(graph: RoadGraph, oracle: DistanceOracle, pos, node: int) -> float:
    """Shortest-path distance from a vehicle position to a node.

    Mid-edge positions take the cheaper of backtracking to the rear endpoint
    or continuing to the forward endpoint.
    """
    if isinstance(pos, (int, np.integer)):
        return float(oracle.dist[pos, node])
    u, v, offset = pos
    length = graph.edge_length(u, v)
    return float(min(offset + oracle.dist[u, node], (length - offset) + oracle.dist[v, node]))
