import numpy as np
import pytest

from jdcontrol import build_grid


def test_paper_grid_spacing_and_count():
    grid = build_grid(2.0, 2.0, 10, 10)
    assert grid.dx == pytest.approx(0.4)
    assert grid.dv == pytest.approx(0.4)
    assert grid.n_centers == 100


def test_first_center_value():
    # x^1 = 0.5*0.4 - 2
    grid = build_grid(2.0, 2.0, 10, 10)
    assert grid.centers[0] == pytest.approx([-1.8, -1.8], abs=1e-14)


def test_two_by_two_centers():
    grid = build_grid(1.0, 1.0, 2, 2)
    expected = {(-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5)}
    got = {(round(x, 12), round(v, 12)) for x, v in grid.centers}
    assert got == expected


def test_centers_follow_cell_centered_formula():
    grid = build_grid(1.7, 0.9, 7, 5)
    for i in range(grid.n_x):
        assert grid.centers_x[i] == pytest.approx((i + 0.5) * grid.dx - grid.x_max, rel=1e-14)
    for l in range(grid.n_v):
        assert grid.centers_v[l] == pytest.approx((l + 0.5) * grid.dv - grid.v_max, rel=1e-14)


@pytest.mark.parametrize("n_x,n_v", [(2, 2), (3, 5), (10, 10), (9, 4)])
def test_symmetry_about_origin(n_x, n_v):
    grid = build_grid(2.0, 1.5, n_x, n_v)
    # mirrored centers negate exactly, so the sums vanish exactly
    assert grid.centers[:, 0].sum() == 0.0
    assert grid.centers[:, 1].sum() == 0.0
    center_set = {(x, v) for x, v in grid.centers}
    for x, v in grid.centers:
        assert (-x, -v) in center_set


def test_centers_strictly_inside_box():
    grid = build_grid(2.0, 2.0, 10, 10)
    assert np.all(np.abs(grid.centers[:, 0]) < grid.x_max)
    assert np.all(np.abs(grid.centers[:, 1]) < grid.v_max)


def test_enumeration_is_row_major_bijection():
    grid = build_grid(2.0, 2.0, 3, 4)
    seen = set()
    for i in range(grid.n_x):
        for l in range(grid.n_v):
            flat = grid.flat_index(i, l)
            seen.add(flat)
            assert grid.centers[flat, 0] == grid.centers_x[i]
            assert grid.centers[flat, 1] == grid.centers_v[l]
    assert seen == set(range(grid.n_centers))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(x_max=0.0, v_max=1.0, n_x=2, n_v=2),
        dict(x_max=1.0, v_max=-1.0, n_x=2, n_v=2),
        dict(x_max=1.0, v_max=1.0, n_x=1, n_v=2),
        dict(x_max=1.0, v_max=1.0, n_x=2, n_v=0),
    ],
)
def test_invalid_arguments_rejected(kwargs):
    with pytest.raises(ValueError):
        build_grid(**kwargs)
