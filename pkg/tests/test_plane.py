import numpy as np
import pytest

from cvrsim.errors import (
    EmptyGeneratorSetError,
    NodeOutsideBoxError,
    NonPositiveDefiniteCovarianceError,
    ZeroMassCellError,
)
from cvrsim.plane import (
    GridField,
    coverage_objective,
    coverage_summary,
    lloyd_step,
    plane_voronoi,
    polar_moment,
    r_limited_cell,
    rasterize_mixture,
    rasterize_node_mass,
    weighted_centroid,
)
from cvrsim.roadnet import build_graph

from oracles import brute_coverage_objective, brute_plane_assignment

BIG_R = 1e9


def uniform_field(n=10, res=1.0):
    mass = np.full(n * n, 1.0 / (n * n))
    centers = np.array([[(i % n + 0.5) * res, (i // n + 0.5) * res] for i in range(n * n)])
    return GridField(xmin=0.0, ymin=0.0, resolution=res, nx=n, ny=n,
                     mass=mass, centers=centers)


def point_mass_field(pixel_xy, n=10, res=1.0):
    """All mass in the pixel whose center is pixel_xy."""
    field = uniform_field(n, res)
    mass = np.zeros(field.n_pixels)
    idx = int(np.argmin(np.einsum("ij,ij->i", field.centers - pixel_xy,
                                  field.centers - pixel_xy)))
    mass[idx] = 1.0
    return GridField(xmin=0.0, ymin=0.0, resolution=res, nx=n, ny=n,
                     mass=mass, centers=field.centers)


# -- rasterize_mixture ----------------------------------------------------------

def test_isotropic_component_peaks_at_center_pixel():
    field = rasterize_mixture((0, 0, 50, 50), 1.0, [(1.0, [25, 25], [[16, 0], [0, 16]])])
    peak = field.centers[np.argmax(field.mass)]
    assert np.allclose(peak, [25.5, 25.5]) or np.allclose(peak, [24.5, 24.5])
    assert field.mass.sum() == pytest.approx(1.0, abs=1e-12)


def test_huge_variance_approaches_uniform():
    field = rasterize_mixture((0, 0, 10, 10), 1.0, [(1.0, [5, 5], [[1e8, 0], [0, 1e8]])])
    assert field.mass.max() / field.mass.min() < 1.01


def test_mirrored_components_give_mirror_symmetric_field():
    field = rasterize_mixture(
        (0, 0, 20, 10), 1.0,
        [(0.5, [5, 5], [[9, 0], [0, 9]]), (0.5, [15, 5], [[9, 0], [0, 9]])],
    )
    grid = field.mass.reshape(field.ny, field.nx)
    assert np.allclose(grid, grid[:, ::-1], atol=1e-12)


def test_non_positive_definite_covariance_rejected():
    with pytest.raises(NonPositiveDefiniteCovarianceError):
        rasterize_mixture((0, 0, 10, 10), 1.0, [(1.0, [5, 5], [[1, 2], [2, 1]])])


# -- rasterize_node_mass -----------------------------------------------------------

def line_graph(coords):
    nodes = [(i, x, y) for i, (x, y) in enumerate(coords)]
    edges = [(i, i + 1, 1.0) for i in range(len(coords) - 1)]
    return build_graph(nodes, edges)


def test_single_node_mass_lands_in_one_pixel():
    g = line_graph([(2.5, 2.5), (2.6, 2.6)])
    field = rasterize_node_mass((0, 0, 10, 10), 1.0, g, [1.0, 0.0])
    assert np.count_nonzero(field.mass) == 1
    assert field.mass.max() == 1.0


def test_same_pixel_masses_add():
    g = line_graph([(2.2, 2.2), (2.8, 2.8)])
    field = rasterize_node_mass((0, 0, 10, 10), 1.0, g, [0.3, 0.7])
    assert field.mass.max() == pytest.approx(1.0)


def test_four_nodes_four_pixels():
    g = build_graph(
        [(0, 1.5, 1.5), (1, 5.5, 1.5), (2, 1.5, 5.5), (3, 5.5, 5.5)],
        [(0, 1, 4.0), (0, 2, 4.0), (1, 3, 4.0)],
    )
    field = rasterize_node_mass((0, 0, 8, 8), 1.0, g, [0.25] * 4)
    assert np.count_nonzero(field.mass) == 4
    assert np.all(field.mass[field.mass > 0] == 0.25)


def test_node_outside_box_rejected():
    g = line_graph([(2.5, 2.5), (15.0, 2.5)])
    with pytest.raises(NodeOutsideBoxError):
        rasterize_node_mass((0, 0, 10, 10), 1.0, g, [0.5, 0.5])


# -- plane_voronoi ---------------------------------------------------------------

def test_single_generator_owns_all_pixels():
    field = uniform_field()
    assert np.all(plane_voronoi(field, [[3.0, 3.0]]) == 0)


def test_mirrored_generators_split_with_tie_to_smaller_index():
    field = uniform_field(10)
    # pixel centers sit at x = 0.5..9.5; the column at x=5.5 is equidistant
    assignment = plane_voronoi(field, [[4.5, 5.0], [6.5, 5.0]])
    grid = assignment.reshape(10, 10)
    assert np.all(grid[:, :5] == 0)
    assert np.all(grid[:, 5] == 0)  # tie on the midline column goes to index 0
    assert np.all(grid[:, 6:] == 1)


def test_matches_brute_force_assignment():
    field = uniform_field(20)
    rng = np.random.default_rng(0)
    gens = rng.uniform(0, 20, size=(3, 2))
    assert np.array_equal(plane_voronoi(field, gens), brute_plane_assignment(field, gens))


def test_empty_generator_set_rejected():
    with pytest.raises(EmptyGeneratorSetError):
        plane_voronoi(uniform_field(), np.empty((0, 2)))


def test_every_pixel_assigned_exactly_once():
    field = uniform_field(15)
    gens = np.random.default_rng(1).uniform(0, 15, size=(5, 2))
    assignment = plane_voronoi(field, gens)
    assert assignment.shape == (field.n_pixels,)
    assert np.all((assignment >= 0) & (assignment < 5))


# -- r_limited_cell ----------------------------------------------------------------

def test_huge_radius_recovers_full_cell():
    field = uniform_field(10)
    gens = [[2.0, 2.0], [8.0, 8.0]]
    assignment = plane_voronoi(field, gens)
    cell = r_limited_cell(assignment, field, 0, gens[0], BIG_R)
    assert np.array_equal(cell.pixels, np.flatnonzero(assignment == 0))


def test_tiny_radius_keeps_at_most_own_pixel():
    field = uniform_field(10)
    gens = [[2.5, 2.5]]
    assignment = plane_voronoi(field, gens)
    cell = r_limited_cell(assignment, field, 0, gens[0], 0.4)
    assert len(cell.pixels) == 1


def test_disk_cell_area_within_one_pixel_ring():
    field = uniform_field(100)
    center = [50.0, 50.0]
    assignment = plane_voronoi(field, [center])
    r = 25.0
    cell = r_limited_cell(assignment, field, 0, center, r)
    area = len(cell.pixels) * field.resolution ** 2
    assert abs(area - np.pi * r * r) <= 2 * np.pi * r * field.resolution


# -- weighted_centroid / polar_moment -----------------------------------------------

def test_uniform_cell_centroid_is_geometric_center():
    field = uniform_field(10)
    assignment = plane_voronoi(field, [[5.0, 5.0]])
    cell = r_limited_cell(assignment, field, 0, [5.0, 5.0], BIG_R)
    assert np.allclose(weighted_centroid(cell, field), [5.0, 5.0])


def test_point_mass_centroid_is_that_pixel():
    field = point_mass_field(np.array([3.5, 7.5]))
    assignment = plane_voronoi(field, [[0.0, 0.0]])
    cell = r_limited_cell(assignment, field, 0, [0.0, 0.0], BIG_R)
    assert np.allclose(weighted_centroid(cell, field), [3.5, 7.5])


def test_two_pixel_weighted_mean():
    centers = np.array([[0.0, 0.0], [10.0, 0.0]])
    field = GridField(xmin=-5, ymin=-5, resolution=10.0, nx=2, ny=1,
                      mass=np.array([0.25, 0.75]), centers=centers)
    from cvrsim.plane import PlanarCell
    cell = PlanarCell(generator=np.zeros(2), pixels=np.array([0, 1]))
    assert weighted_centroid(cell, field)[0] == pytest.approx(7.5)


def test_zero_mass_cell_rejected():
    field = point_mass_field(np.array([9.5, 9.5]))
    from cvrsim.plane import PlanarCell
    cell = PlanarCell(generator=np.zeros(2), pixels=np.array([0, 1, 2]))
    with pytest.raises(ZeroMassCellError):
        weighted_centroid(cell, field)


def test_polar_moment_of_single_pixel_at_centroid_is_zero():
    field = point_mass_field(np.array([3.5, 3.5]))
    from cvrsim.plane import PlanarCell
    idx = int(np.argmax(field.mass))
    cell = PlanarCell(generator=np.zeros(2), pixels=np.array([idx]))
    assert polar_moment(cell, field, [3.5, 3.5]) == 0.0


def test_polar_moment_equidistant_pixels():
    centers = np.array([[-3.0, 0.0], [3.0, 0.0]])
    field = GridField(xmin=-6, ymin=-1, resolution=6.0, nx=2, ny=1,
                      mass=np.array([0.5, 0.5]), centers=centers)
    from cvrsim.plane import PlanarCell
    cell = PlanarCell(generator=np.zeros(2), pixels=np.array([0, 1]))
    assert polar_moment(cell, field, [0.0, 0.0]) == pytest.approx(9.0)  # M=1, d=3


def test_polar_moment_matches_manual_sum():
    rng = np.random.default_rng(4)
    field = uniform_field(12)
    from cvrsim.plane import PlanarCell
    pixels = np.sort(rng.choice(field.n_pixels, size=5, replace=False))
    cell = PlanarCell(generator=np.zeros(2), pixels=pixels)
    x = rng.uniform(0, 12, size=2)
    manual = sum(field.mass[p] * np.sum((field.centers[p] - x) ** 2) for p in pixels)
    assert polar_moment(cell, field, x) == pytest.approx(manual, rel=1e-12)


# -- coverage_objective ----------------------------------------------------------------

def test_objective_zero_when_mass_sits_on_generators():
    field = point_mass_field(np.array([2.5, 2.5]))
    assert coverage_objective([[2.5, 2.5]], field, BIG_R) == 0.0


def test_objective_single_pixel_at_distance():
    field = point_mass_field(np.array([2.5, 2.5]))
    assert coverage_objective([[5.5, 2.5]], field, BIG_R) == pytest.approx(9.0)
    assert coverage_objective([[5.5, 2.5]], field, 2.0) == 0.0  # outside radius


def test_objective_matches_brute_force():
    field = uniform_field(10)
    rng = np.random.default_rng(9)
    gens = rng.uniform(0, 10, size=(2, 2))
    for r in (BIG_R, 3.0):
        assert coverage_objective(gens, field, r) == pytest.approx(
            brute_coverage_objective(field, gens, r), rel=1e-12)


# -- lloyd_step ------------------------------------------------------------------------

def test_generator_at_centroid_is_fixed_point():
    field = uniform_field(10)
    gens = np.array([[5.0, 5.0]])
    assert np.allclose(lloyd_step(gens, field, BIG_R, 1.0), gens)


def test_full_step_jumps_to_center_of_mass():
    field = uniform_field(10)
    gens = np.array([[1.0, 2.0]])
    assert np.allclose(lloyd_step(gens, field, BIG_R, 1.0), [[5.0, 5.0]])


def test_half_step_is_midpoint():
    field = point_mass_field(np.array([4.0, 0.0]), n=8, res=1.0)
    # shift the grid so a pixel center sits exactly at (4, 0)
    centers = field.centers - np.array([0.5, 0.5])
    field = GridField(xmin=-0.5, ymin=-0.5, resolution=1.0, nx=8, ny=8,
                      mass=field.mass, centers=centers)
    mass = np.zeros(field.n_pixels)
    mass[np.argmin(np.einsum("ij,ij->i", centers - [4.0, 0.0], centers - [4.0, 0.0]))] = 1.0
    field = GridField(xmin=-0.5, ymin=-0.5, resolution=1.0, nx=8, ny=8,
                      mass=mass, centers=centers)
    out = lloyd_step(np.array([[0.0, 0.0]]), field, BIG_R, 0.5)
    assert np.allclose(out, [[2.0, 0.0]])


def test_zero_mass_cells_stay_put():
    field = point_mass_field(np.array([1.5, 1.5]))
    gens = np.array([[1.5, 1.5], [8.0, 8.0]])  # second cell has no mass
    out = lloyd_step(gens, field, BIG_R, 1.0)
    assert np.allclose(out[1], [8.0, 8.0])


def test_step_fraction_validated():
    with pytest.raises(ValueError):
        lloyd_step(np.array([[1.0, 1.0]]), uniform_field(), BIG_R, 0.0)


# -- identities and descent --------------------------------------------------------------

def test_parallel_axis_identity_random_triples():
    rng = np.random.default_rng(21)
    field = rasterize_mixture((0, 0, 30, 30), 1.0,
                              [(1.0, [14, 17], [[30, 5], [5, 40]])])
    gens = rng.uniform(0, 30, size=(4, 2))
    assignment = plane_voronoi(field, gens)
    for _ in range(50):
        i = int(rng.integers(0, 4))
        cell = r_limited_cell(assignment, field, i, gens[i], float(rng.uniform(3, 50)))
        mass = field.mass[cell.pixels].sum()
        if mass <= 0:
            continue
        c = weighted_centroid(cell, field)
        x = rng.uniform(-5, 35, size=2)
        j_x = polar_moment(cell, field, x)
        j_c = polar_moment(cell, field, c)
        identity = j_c + mass * float(np.sum((x - c) ** 2))
        assert abs(j_x - identity) <= 1e-9 * max(j_x, 1e-12)


def test_fixed_partition_move_toward_centroid_never_increases_moment():
    rng = np.random.default_rng(31)
    field = rasterize_mixture((0, 0, 20, 20), 1.0, [(1.0, [8, 12], [[20, 0], [0, 12]])])
    gens = rng.uniform(0, 20, size=(3, 2))
    assignment = plane_voronoi(field, gens)
    for i in range(3):
        cell = r_limited_cell(assignment, field, i, gens[i], BIG_R)
        c = weighted_centroid(cell, field)
        j0 = polar_moment(cell, field, gens[i])
        for lam in (0.1, 0.5, 1.0):
            x = gens[i] + lam * (c - gens[i])
            assert polar_moment(cell, field, x) <= j0 + 1e-12


def test_full_lloyd_descent_unlimited_radius():
    rng = np.random.default_rng(41)
    for _ in range(20):
        field = rasterize_mixture(
            (0, 0, 25, 25), 1.0,
            [(1.0, rng.uniform(5, 20, size=2), [[rng.uniform(4, 30), 0], [0, rng.uniform(4, 30)]])])
        gens = rng.uniform(0, 25, size=(4, 2))
        h = coverage_objective(gens, field, BIG_R)
        for _ in range(15):
            gens = lloyd_step(gens, field, BIG_R, 1.0)
            h_next = coverage_objective(gens, field, BIG_R)
            assert h_next <= h + 1e-9 * max(h, 1e-12)
            h = h_next


def _limited_membership(field, gens, r):
    """(inside-some-limited-cell mask, owner) for descent bookkeeping."""
    summary = coverage_summary(field, gens, r)
    own_d2 = np.einsum(
        "ij,ij->i", field.centers - gens[summary.assignment],
        field.centers - gens[summary.assignment])
    return own_d2 <= r * r, summary.assignment


def test_finite_radius_descent_up_to_boundary_churn():
    # With a finite radius the full-step objective can rise by the mass of
    # pixels whose limited-cell membership flips (each worth at most r^2),
    # and by nothing else; net descent over the run still holds.
    rng = np.random.default_rng(51)
    field = rasterize_mixture((0, 0, 30, 30), 1.0, [(1.0, [15, 15], [[60, 0], [0, 60]])])
    r = 8.0
    gens = rng.uniform(0, 30, size=(5, 2))
    h_start = h = coverage_objective(gens, field, r)
    mask, owner = _limited_membership(field, gens, r)
    for _ in range(30):
        gens_next = lloyd_step(gens, field, r, 1.0)
        mask_next, owner_next = _limited_membership(field, gens_next, r)
        churned = (mask != mask_next) | (mask & mask_next & (owner != owner_next))
        slack = field.mass[churned].sum() * r * r + field.mass.max() * field.resolution ** 2
        h_next = coverage_objective(gens_next, field, r)
        assert h_next <= h + slack
        gens, h, mask, owner = gens_next, h_next, mask_next, owner_next
    assert h < h_start


def test_centroid_stays_inside_cell_bounding_box():
    rng = np.random.default_rng(61)
    field = rasterize_mixture((0, 0, 20, 20), 1.0, [(1.0, [10, 6], [[25, 0], [0, 25]])])
    gens = rng.uniform(0, 20, size=(4, 2))
    assignment = plane_voronoi(field, gens)
    for i in range(4):
        cell = r_limited_cell(assignment, field, i, gens[i], BIG_R)
        if field.mass[cell.pixels].sum() <= 0:
            continue
        c = weighted_centroid(cell, field)
        pts = field.centers[cell.pixels]
        assert pts[:, 0].min() <= c[0] <= pts[:, 0].max()
        assert pts[:, 1].min() <= c[1] <= pts[:, 1].max()


# -- bulk summary consistency -----------------------------------------------------------

def test_coverage_summary_matches_granular_ops():
    rng = np.random.default_rng(71)
    field = rasterize_mixture((0, 0, 25, 25), 1.0, [(1.0, [10, 15], [[40, 8], [8, 30]])])
    gens = rng.uniform(0, 25, size=(6, 2))
    r = 7.0
    summary = coverage_summary(field, gens, r)
    assignment = plane_voronoi(field, gens)
    assert np.array_equal(summary.assignment, assignment)
    for i in range(6):
        limited = r_limited_cell(assignment, field, i, gens[i], r)
        full_pixels = np.flatnonzero(assignment == i)
        from cvrsim.plane import PlanarCell
        full = PlanarCell(generator=gens[i], pixels=full_pixels)
        assert summary.limited_mass[i] == pytest.approx(
            field.mass[limited.pixels].sum(), abs=1e-15)
        assert summary.j_limited[i] == pytest.approx(
            polar_moment(limited, field, gens[i]), rel=1e-9, abs=1e-12)
        assert summary.j_full[i] == pytest.approx(
            polar_moment(full, field, gens[i]), rel=1e-9, abs=1e-12)
        if summary.limited_mass[i] > 0:
            assert np.allclose(summary.limited_centroid[i],
                               weighted_centroid(limited, field), rtol=1e-9)
