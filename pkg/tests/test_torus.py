import math

import numpy as np
import pytest

from condensim.errors import ContractViolation
from condensim.torus import (
    TorusSpec,
    build_cell_grid,
    cube_annulus_volume,
    cube_ball_volume,
    torus_distance,
    wrap_points,
)


def brute_torus_distance(x, y, spec):
    # oracle: minimum over the 3^d shifted copies of y
    d = spec.d
    L = spec.side
    shifts = np.array(np.meshgrid(*([[-1.0, 0.0, 1.0]] * d), indexing="ij"))
    shifts = shifts.reshape(d, -1).T * L
    return min(np.linalg.norm(np.asarray(x) - (np.asarray(y) + s)) for s in shifts)


def test_wraparound_1d():
    spec = TorusSpec(d=1, volume=1.0)
    assert torus_distance([0.1], [0.9], spec) == pytest.approx(0.2)


def test_identity_distance():
    spec = TorusSpec(d=3, volume=27.0)
    x = np.array([0.3, 2.9, 1.0])
    assert torus_distance(x, x, spec) == 0.0


def test_corner_distance_matches_brute_force():
    spec = TorusSpec(d=2, volume=100.0)
    x = np.array([0.0, 0.0])
    y = np.array([9.0, 9.0])
    assert torus_distance(x, y, spec) == pytest.approx(math.sqrt(2.0))
    assert torus_distance(x, y, spec) == pytest.approx(brute_torus_distance(x, y, spec))


def test_random_distances_match_brute_force():
    rng = np.random.default_rng(0)
    for d in (1, 2, 3):
        spec = TorusSpec(d=d, volume=7.3 ** d)
        for _ in range(50):
            x = rng.random(d) * spec.side
            y = rng.random(d) * spec.side
            assert torus_distance(x, y, spec) == pytest.approx(
                brute_torus_distance(x, y, spec), abs=1e-12
            )


def test_symmetry_triangle_and_bound():
    rng = np.random.default_rng(1)
    spec = TorusSpec(d=2, volume=25.0)
    pts = rng.random((10_000, 3, 2)) * spec.side
    a, b, c = pts[:, 0], pts[:, 1], pts[:, 2]
    dab = torus_distance(a, b, spec)
    dba = torus_distance(b, a, spec)
    dbc = torus_distance(b, c, spec)
    dac = torus_distance(a, c, spec)
    assert np.array_equal(dab, dba)
    assert np.all(dac <= dab + dbc + 1e-12)
    assert np.all(dab <= spec.half_diagonal + 1e-12)


def test_dimension_mismatch_rejected():
    spec = TorusSpec(d=2, volume=4.0)
    with pytest.raises(ContractViolation):
        torus_distance([0.1], [0.2], spec)


def test_wrap_points_canonical():
    spec = TorusSpec(d=1, volume=10.0)
    assert wrap_points([-0.5], spec)[0] == pytest.approx(9.5)
    assert wrap_points([10.0], spec)[0] == 0.0


# ---------------------------------------------------------------------------
# cube/ball volumes
# ---------------------------------------------------------------------------

def test_annulus_interval_length_1d():
    assert cube_annulus_volume(0.0, 0.3, 1) == pytest.approx(0.6)
    assert cube_annulus_volume(0.0, 0.5, 1) == pytest.approx(1.0)


def test_annulus_inscribed_disk_2d():
    assert cube_annulus_volume(0.0, 0.5, 2) == pytest.approx(math.pi / 4, abs=1e-9)


def test_annulus_circumscribed_disk_2d():
    assert cube_annulus_volume(0.0, math.sqrt(2) / 2, 2) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_total_volume_is_one(d):
    assert cube_annulus_volume(0.0, math.sqrt(d) / 2, d) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_annulus_additivity(d):
    rng = np.random.default_rng(2)
    top = math.sqrt(d) / 2
    for _ in range(25):
        b1, b2, b3 = np.sort(rng.random(3)) * top
        if b2 - b1 < 1e-9 or b3 - b2 < 1e-9 or b1 < 1e-9:
            continue
        lhs = cube_annulus_volume(b1, b2, d) + cube_annulus_volume(b2, b3, d)
        rhs = cube_annulus_volume(b1, b3, d)
        assert lhs == pytest.approx(rhs, abs=2e-6)


@pytest.mark.parametrize("d", [2, 3])
def test_ball_volume_against_monte_carlo(d):
    # oracle: uniform points in the cube
    rng = np.random.default_rng(3)
    pts = rng.random((1_000_000, d)) - 0.5
    norms = np.linalg.norm(pts, axis=1)
    for r in (0.35, 0.55, 0.8 * math.sqrt(d) / 2):
        est = float(np.mean(norms <= r))
        se = math.sqrt(est * (1 - est) / len(pts))
        assert cube_ball_volume(r, d) == pytest.approx(est, abs=5 * se + 1e-6)


def test_annulus_contract_violations():
    with pytest.raises(ContractViolation):
        cube_annulus_volume(0.4, 0.3, 1)
    with pytest.raises(ContractViolation):
        cube_annulus_volume(0.0, 0.9, 1)


# ---------------------------------------------------------------------------
# cell grid
# ---------------------------------------------------------------------------

def test_empty_grid():
    spec = TorusSpec(d=2, volume=16.0)
    grid = build_cell_grid(np.empty((0, 2)), spec, 1.0)
    assert grid.query_ball([1.0, 1.0], 2.0).size == 0


def test_exact_divisor_layout():
    spec = TorusSpec(d=1, volume=10.0)
    grid = build_cell_grid(np.array([[0.1]]), spec, 2.5)
    assert grid.cells_per_axis == 4
    assert grid.cell_side == pytest.approx(2.5)


def test_target_side_not_dividing():
    spec = TorusSpec(d=1, volume=10.0)
    grid = build_cell_grid(np.array([[0.1]]), spec, 3.0)
    assert grid.cells_per_axis == 3
    assert grid.cell_side == pytest.approx(10.0 / 3.0)


@pytest.mark.parametrize("d", [1, 2])
def test_query_ball_equals_naive_filter(d):
    rng = np.random.default_rng(4)
    spec = TorusSpec(d=d, volume=30.0 ** d)
    pts = rng.random((1000, d)) * spec.side
    for target in (1.2, 4.0, 11.0):
        grid = build_cell_grid(pts, spec, target)
        for _ in range(20):
            center = rng.random(d) * spec.side
            radius = rng.random() * 6.0 + 0.2
            got = set(grid.query_ball(center, radius).tolist())
            want = set(
                np.flatnonzero(torus_distance(pts, center, spec) <= radius).tolist()
            )
            assert got == want


def test_every_point_in_exactly_one_bucket():
    rng = np.random.default_rng(5)
    spec = TorusSpec(d=2, volume=64.0)
    pts = rng.random((500, 2)) * spec.side
    grid = build_cell_grid(pts, spec, 2.0)
    seen = np.concatenate([grid.bucket(c) for c in range(grid.n_cells)])
    assert sorted(seen.tolist()) == list(range(500))
