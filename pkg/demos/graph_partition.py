"""Shortest-path Voronoi partitions and centroids on a road grid.

Three vehicles sit on a 12x12 street grid with 250 m blocks. Nodes are
assigned to the vehicle with the shortest road distance, each cell is cut
at a graph radius, and the cell centroid (the node minimizing the
mass-weighted squared road distance to the rest of the cell) is the node
the vehicle would be sent to.
"""

import numpy as np

from cvrsim.roadnet import (
    all_pairs_shortest,
    graph_centroid,
    graph_voronoi,
    grid_graph,
    r_limited_graph_cell,
)

graph = grid_graph(12, 250.0)
oracle = all_pairs_shortest(graph)
print(f"network: {graph.n_nodes} intersections, {graph.n_edges} road links")

rng = np.random.default_rng(3)
demand = rng.random(graph.n_nodes) ** 3  # a few strong nodes
demand /= demand.sum()

vehicles = [14, 70, 128]
assignment = graph_voronoi(oracle, vehicles)
radius = np.sqrt(2.0) * 1000.0

for vehicle in vehicles:
    cell_nodes = np.flatnonzero(assignment == vehicle)
    cell = r_limited_graph_cell(assignment, oracle, vehicle, radius)
    centroid = graph_centroid(cell, demand, oracle)
    print(
        f"vehicle at node {vehicle:3d}: owns {len(cell_nodes):3d} nodes, "
        f"{len(cell):3d} within {radius:.0f} m, centroid -> node {centroid:3d} "
        f"({oracle.dist[vehicle, centroid]:.0f} m away)"
    )

share = [np.flatnonzero(assignment == v).size for v in vehicles]
print(f"\npartition sizes {share} cover all {sum(share)} nodes exactly once")
