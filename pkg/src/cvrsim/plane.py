"""Rasterized continuous-space coverage machinery.

A city region is a bounding box cut into square pixels; demand is a
normalized mass per pixel. All geometry below (Voronoi assignment, range
limited cells, weighted centroids, polar moments, the coverage objective,
and the move-toward-centroid step) works on pixel centers, with sums taken
in ascending pixel index order so results do not depend on scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyGeneratorSetError,
    EmptyGridError,
    NodeOutsideBoxError,
    NonPositiveDefiniteCovarianceError,
    ZeroMassCellError,
)
from .roadnet import RoadGraph

_CHUNK = 16384  # pixels per block in distance scans, bounds peak memory


@dataclass(frozen=True)
class GridField:
    """Rasterized demand density over a bounding box.

    Pixels are squares of side ``resolution`` laid row-major from the lower
    left corner: pixel (ix, iy) has flat index iy * nx + ix and center
    (xmin + (ix + 0.5) * resolution, ymin + (iy + 0.5) * resolution).
    ``mass`` is nonnegative and sums to one.
    """

    xmin: float
    ymin: float
    resolution: float
    nx: int
    ny: int
    mass: np.ndarray      # flat (nx * ny,)
    centers: np.ndarray   # (nx * ny, 2)

    def __post_init__(self):
        self.mass.flags.writeable = False
        self.centers.flags.writeable = False

    @property
    def n_pixels(self) -> int:
        return self.nx * self.ny

    def diagonal(self) -> float:
        return float(np.hypot(self.nx * self.resolution, self.ny * self.resolution))


@dataclass(frozen=True)
class PlanarCell:
    """One generator's (possibly range-limited) share of the raster."""

    generator: np.ndarray  # (2,) position in meters
    pixels: np.ndarray     # sorted flat pixel indices


def _grid_geometry(box, resolution: float):
    xmin, ymin, xmax, ymax = (float(b) for b in box)
    if xmax <= xmin or ymax <= ymin or resolution <= 0:
        raise EmptyGridError(f"degenerate box {box!r} at resolution {resolution}")
    nx = int(np.ceil((xmax - xmin) / resolution - 1e-9))
    ny = int(np.ceil((ymax - ymin) / resolution - 1e-9))
    ix = np.arange(nx)
    iy = np.arange(ny)
    cx = xmin + (ix + 0.5) * resolution
    cy = ymin + (iy + 0.5) * resolution
    gx, gy = np.meshgrid(cx, cy)  # row-major: index iy * nx + ix
    centers = np.column_stack([gx.ravel(), gy.ravel()])
    return xmin, ymin, nx, ny, centers


def _field_from_raw(box, resolution, raw: np.ndarray, xmin, ymin, nx, ny, centers) -> GridField:
    total = raw.sum()
    if not total > 0:
        raise EmptyGridError("rasterized density is identically zero")
    return GridField(
        xmin=xmin, ymin=ymin, resolution=float(resolution),
        nx=nx, ny=ny, mass=raw / total, centers=centers,
    )


def rasterize_mixture(box, resolution: float, components) -> GridField:
    """Rasterize a 2-D Gaussian mixture onto a pixel grid.

    components: iterable of (weight, mean, cov) with weights >= 0 summing to
    one and positive definite 2x2 covariances. The pixel masses are the
    mixture density at pixel centers, renormalized to sum to one.
    """
    xmin, ymin, nx, ny, centers = _grid_geometry(box, resolution)
    components = list(components)
    weights = np.array([float(w) for w, _, _ in components])
    if (weights < 0).any() or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("component weights must be nonnegative and sum to 1")
    raw = np.zeros(len(centers))
    for weight, mean, cov in components:
        cov = np.asarray(cov, dtype=np.float64)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise NonPositiveDefiniteCovarianceError(f"covariance {cov.tolist()}") from None
        delta = centers - np.asarray(mean, dtype=np.float64)
        # solve L z = delta^T, quadratic form = |z|^2
        z = np.linalg.solve(chol, delta.T)
        quad = np.einsum("ij,ij->j", z, z)
        det = chol[0, 0] * chol[1, 1]
        raw += float(weight) * np.exp(-0.5 * quad) / (2.0 * np.pi * det)
    return _field_from_raw(box, resolution, raw, xmin, ymin, nx, ny, centers)


def rasterize_node_mass(box, resolution: float, graph: RoadGraph, node_mass) -> GridField:
    """Deposit each node's probability mass into the pixel containing it."""
    xmin, ymin, nx, ny, centers = _grid_geometry(box, resolution)
    node_mass = np.asarray(node_mass, dtype=np.float64)
    coords = graph.coords
    fx = (coords[:, 0] - xmin) / resolution
    fy = (coords[:, 1] - ymin) / resolution
    if (fx < -1e-9).any() or (fy < -1e-9).any() or (fx > nx + 1e-9).any() or (fy > ny + 1e-9).any():
        bad = int(np.flatnonzero((fx < -1e-9) | (fy < -1e-9) | (fx > nx + 1e-9) | (fy > ny + 1e-9))[0])
        raise NodeOutsideBoxError(f"node {bad} at {coords[bad].tolist()} lies outside {box!r}")
    ix = np.clip(fx.astype(np.int64), 0, nx - 1)
    iy = np.clip(fy.astype(np.int64), 0, ny - 1)
    raw = np.zeros(nx * ny)
    np.add.at(raw, iy * nx + ix, node_mass)
    return _field_from_raw(box, resolution, raw, xmin, ymin, nx, ny, centers)


def plane_voronoi(field: GridField, generators) -> np.ndarray:
    """Assign each pixel center to its Euclidean-nearest generator.

    Returns flat int32 generator indices; ties go to the smallest index.
    """
    gens = np.atleast_2d(np.asarray(generators, dtype=np.float64))
    if gens.size == 0:
        raise EmptyGeneratorSetError("no generators")
    out = np.empty(field.n_pixels, dtype=np.int32)
    centers = field.centers
    for start in range(0, field.n_pixels, _CHUNK):
        block = centers[start:start + _CHUNK]
        delta = block[:, None, :] - gens[None, :, :]
        d2 = np.einsum("pgc,pgc->pg", delta, delta)
        out[start:start + _CHUNK] = np.argmin(d2, axis=1)
    return out


@dataclass(frozen=True)
class CoverageSummary:
    """One-pass per-generator statistics of a range-limited partition.

    Centroids are NaN where the limited cell carries no mass. j_full is the
    polar moment over the unlimited Voronoi cell, j_limited over the cell cut
    to the coverage radius.
    """

    assignment: np.ndarray
    limited_mass: np.ndarray
    limited_centroid: np.ndarray  # (n, 2), NaN rows for massless cells
    j_limited: np.ndarray
    j_full: np.ndarray


def coverage_summary(field: GridField, generators, r_m: float) -> CoverageSummary:
    """Assignment, limited centroids, and polar moments in one raster pass.

    Numerically equivalent to composing plane_voronoi, r_limited_cell,
    weighted_centroid, and polar_moment per generator, up to summation
    order; results are deterministic for a given input.
    """
    gens = np.atleast_2d(np.asarray(generators, dtype=np.float64))
    if gens.size == 0:
        raise EmptyGeneratorSetError("no generators")
    n = len(gens)
    r2 = r_m * r_m
    assignment = np.empty(field.n_pixels, dtype=np.int32)
    mass_w = np.zeros(n)
    sum_x = np.zeros(n)
    sum_y = np.zeros(n)
    j_lim = np.zeros(n)
    j_full = np.zeros(n)
    centers = field.centers
    mass = field.mass
    g2 = np.einsum("ij,ij->i", gens, gens)
    for start in range(0, field.n_pixels, _CHUNK):
        block = centers[start:start + _CHUNK]
        w = mass[start:start + _CHUNK]
        p2 = np.einsum("ij,ij->i", block, block)
        d2 = p2[:, None] + g2[None, :] - 2.0 * (block @ gens.T)
        owner = np.argmin(d2, axis=1)
        assignment[start:start + _CHUNK] = owner
        own_d2 = np.maximum(d2[np.arange(len(block)), owner], 0.0)
        j_full += np.bincount(owner, weights=w * own_d2, minlength=n)
        inside = own_d2 <= r2
        owner_in = owner[inside]
        w_in = w[inside]
        mass_w += np.bincount(owner_in, weights=w_in, minlength=n)
        sum_x += np.bincount(owner_in, weights=w_in * block[inside, 0], minlength=n)
        sum_y += np.bincount(owner_in, weights=w_in * block[inside, 1], minlength=n)
        j_lim += np.bincount(owner_in, weights=w_in * own_d2[inside], minlength=n)
    with np.errstate(invalid="ignore", divide="ignore"):
        centroid = np.column_stack([sum_x, sum_y]) / mass_w[:, None]
    centroid[mass_w <= 0] = np.nan
    return CoverageSummary(assignment=assignment, limited_mass=mass_w,
                           limited_centroid=centroid, j_limited=j_lim, j_full=j_full)


def r_limited_cell(
    assignment: np.ndarray, field: GridField, index: int, position, r_m: float
) -> PlanarCell:
    """Pixels of generator ``index`` whose centers lie within r_m of it."""
    position = np.asarray(position, dtype=np.float64)
    owned = np.flatnonzero(assignment == index)
    delta = field.centers[owned] - position
    d2 = np.einsum("ij,ij->i", delta, delta)
    return PlanarCell(generator=position, pixels=owned[d2 <= r_m * r_m])


def cell_mass(cell: PlanarCell, field: GridField) -> float:
    return float(field.mass[cell.pixels].sum())


def weighted_centroid(cell: PlanarCell, field: GridField) -> np.ndarray:
    """Mass-weighted mean of the cell's pixel centers."""
    w = field.mass[cell.pixels]
    total = w.sum()
    if not total > 0:
        raise ZeroMassCellError("cell carries no mass")
    return (w @ field.centers[cell.pixels]) / total


def polar_moment(cell: PlanarCell, field: GridField, point) -> float:
    """Mass-weighted sum of squared distances from ``point`` to the cell."""
    delta = field.centers[cell.pixels] - np.asarray(point, dtype=np.float64)
    d2 = np.einsum("ij,ij->i", delta, delta)
    return float(d2 @ field.mass[cell.pixels])


def coverage_objective(generators, field: GridField, r_m: float) -> float:
    """Sum of per-generator polar moments over range-limited cells."""
    gens = np.atleast_2d(np.asarray(generators, dtype=np.float64))
    assignment = plane_voronoi(field, gens)
    total = 0.0
    for i, g in enumerate(gens):
        cell = r_limited_cell(assignment, field, i, g, r_m)
        total += polar_moment(cell, field, g)
    return total


def lloyd_step(generators, field: GridField, r_m: float, step_fraction: float = 1.0) -> np.ndarray:
    """Move each generator a fraction of the way toward its cell centroid.

    Generators whose range-limited cell carries no mass stay put.
    """
    if not 0.0 < step_fraction <= 1.0:
        raise ValueError("step fraction must lie in (0, 1]")
    gens = np.atleast_2d(np.asarray(generators, dtype=np.float64)).copy()
    assignment = plane_voronoi(field, gens)
    for i in range(len(gens)):
        cell = r_limited_cell(assignment, field, i, gens[i], r_m)
        try:
            target = weighted_centroid(cell, field)
        except ZeroMassCellError:
            continue
        gens[i] = gens[i] + step_fraction * (target - gens[i])
    return gens
