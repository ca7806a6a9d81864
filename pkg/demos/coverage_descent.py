"""Move-toward-the-centroid coverage on a rasterized demand field.

Six agents start in random positions over a 3 km square with two demand hot
spots. Each step recomputes the Voronoi partition of the agents, limits
every cell to the coverage radius, and moves each agent to its cell's
weighted centroid. The coverage objective (the mass-weighted squared
distance to the nearest agent, cut at the radius) trends steadily down,
with occasional hiccups of a few pixels entering or leaving cells at the
coverage rim, and the agents settle around the hot spots. With a radius
covering the whole box the descent is exactly monotone.
"""

import numpy as np

from cvrsim.plane import coverage_objective, lloyd_step, rasterize_mixture

box = (0.0, 0.0, 3000.0, 3000.0)
field = rasterize_mixture(
    box, resolution=50.0,
    components=[
        (0.7, [2000.0, 2100.0], [[250_000.0, 0.0], [0.0, 250_000.0]]),
        (0.3, [900.0, 800.0], [[400_000.0, 0.0], [0.0, 400_000.0]]),
    ],
)

rng = np.random.default_rng(0)
agents = rng.uniform(0, 3000, size=(6, 2))
radius = 1000.0

print(f"{'step':>4}  {'objective (mass*m^2)':>22}  mean position shift (m)")
h = coverage_objective(agents, field, radius)
for step in range(30):
    moved = lloyd_step(agents, field, radius, step_fraction=1.0)
    shift = float(np.linalg.norm(moved - agents, axis=1).mean())
    agents = moved
    h = coverage_objective(agents, field, radius)
    print(f"{step:>4}  {h:>22.1f}  {shift:>10.1f}")
    if shift < 1.0:
        print("converged: every agent sits on its cell centroid")
        break

print("\nfinal agent positions (m):")
for i, (x, y) in enumerate(agents):
    print(f"  agent {i}: ({x:7.1f}, {y:7.1f})")
