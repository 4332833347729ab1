import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tvoed.errors import InvalidArgument
from tvoed.grid import Image, build_grid, restrict


@pytest.mark.parametrize("dim,N,n", [(2, 100, 10_000), (3, 50, 125_000), (2, 2, 4)])
def test_build_grid_counts(dim, N, n):
    g = build_grid(dim, N)
    assert g.n == n
    assert g.h * g.N == 1.0
    assert g.n_total == N + 2


def test_build_grid_rejects_small_and_bad_dim():
    with pytest.raises(InvalidArgument):
        build_grid(2, 1)
    with pytest.raises(InvalidArgument):
        build_grid(4, 10)


def test_lattice_roundtrip():
    g = build_grid(3, 5)
    for i in range(g.n):
        assert g.index(*g.lattice(i)) == i


def test_cell_center_small_grid():
    g = build_grid(2, 2)
    assert np.allclose(g.cell_center(0), [0.25, 0.25])
    assert np.allclose(g.cell_center(3), [0.75, 0.75])
    with pytest.raises(InvalidArgument):
        g.cell_center(4)


def test_centers_inside_and_distinct():
    g = build_grid(2, 7)
    c = g.centers()
    assert np.all((c > 0) & (c < 1))
    assert len({tuple(x) for x in c}) == g.n
    assert np.allclose(c[5], g.cell_center(5))


def test_neighbors_along_z_are_h_apart():
    g = build_grid(3, 50)
    arr = g.centers().reshape(50, 50, 50, 3, order="F")
    dz = arr[:, :, 1:, :] - arr[:, :, :-1, :]
    assert np.allclose(dz[..., 2], 0.02, atol=1e-15)
    assert np.allclose(dz[..., :2], 0.0)


def test_image_length_checked():
    with pytest.raises(InvalidArgument):
        Image(build_grid(2, 4), np.zeros(15))


def test_restrict_constant():
    fine = build_grid(2, 100)
    out = restrict(Image.constant(fine, 0.7), build_grid(2, 31))
    assert np.allclose(out.values, 0.7, atol=1e-14)
    assert out.grid.n == 31 * 31


def test_restrict_reproduces_linear_ramp():
    fine, coarse = build_grid(2, 40), build_grid(2, 13)
    ramp = Image(fine, fine.centers()[:, 0])
    out = restrict(ramp, coarse)
    # multilinear interpolation is exact for functions linear along the axes
    assert np.allclose(out.values, coarse.centers()[:, 0], atol=1e-12)


def test_restrict_3d_ramp():
    fine, coarse = build_grid(3, 12), build_grid(3, 5)
    c = fine.centers()
    out = restrict(Image(fine, c[:, 2] + 2 * c[:, 1]), coarse)
    cc = coarse.centers()
    assert np.allclose(out.values, cc[:, 2] + 2 * cc[:, 1], atol=1e-12)


def test_restrict_rejects_mismatch():
    with pytest.raises(InvalidArgument):
        restrict(Image.constant(build_grid(2, 8), 1.0), build_grid(3, 4))
    with pytest.raises(InvalidArgument):
        restrict(Image.constant(build_grid(2, 8), 1.0), build_grid(2, 9))


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**32 - 1))
def test_restrict_linear_and_idempotent(a, b, seed):
    rng = np.random.default_rng(seed)
    fine, coarse = build_grid(2, 17), build_grid(2, 6)
    u = Image(fine, rng.normal(size=fine.n))
    v = Image(fine, rng.normal(size=fine.n))
    lhs = restrict(a * u + b * v, coarse).values
    rhs = a * restrict(u, coarse).values + b * restrict(v, coarse).values
    assert np.allclose(lhs, rhs, atol=1e-12)
    once = restrict(u, coarse)
    assert np.array_equal(restrict(once, coarse).values, once.values)
