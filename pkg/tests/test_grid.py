import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from chnsdbc.grid import ChannelDomain, Grid, build_domain


def test_shapes_and_spacing():
    g = build_domain(Lx=2.0, Ly=1.0, Nx=16, Ny=10)
    assert g.node_shape == (16, 11) and g.cell_shape == (16, 10)
    assert g.dx == 0.125 and g.dy == 0.1
    assert g.area == 2.0 and g.boundary_length == 4.0
    assert g.sigma_measure == 6.0
    assert g.mesh("ux")[0].shape == g.cell_shape and g.mesh("uy")[0].shape == g.node_shape


@pytest.mark.parametrize(
    "kwargs",
    [dict(Lx=-1.0), dict(Ly=0.0), dict(Nx=15), dict(Nx=6), dict(Ny=4), dict(Nx=16.5)],
)
def test_invalid_domains(kwargs):
    with pytest.raises(ValueError):
        build_domain(**kwargs)


def test_build_domain_rejects_mixed_arguments():
    with pytest.raises(TypeError):
        build_domain(ChannelDomain(), Nx=8)


def test_grid_is_hashable_and_immutable():
    g1, g2 = build_domain(Nx=16, Ny=8), build_domain(Nx=16, Ny=8)
    assert g1 == g2 and hash(g1) == hash(g2)
    with pytest.raises(ValueError):
        g1.x_c[0] = 1.0


def test_quadrature_exact_for_constants_and_linear():
    g = build_domain(Lx=3.0, Ly=2.0, Nx=12, Ny=9)
    assert g.integrate_bulk(np.ones(g.node_shape)) == pytest.approx(6.0, rel=1e-14)
    assert g.integrate_bulk(np.ones(g.cell_shape)) == pytest.approx(6.0, rel=1e-14)
    _, y = g.mesh("node")
    assert g.integrate_bulk(y) == pytest.approx(3.0 * 2.0**2 / 2, rel=1e-14)
    assert g.integrate_boundary(np.ones(g.Nx)) == pytest.approx(6.0)
    assert g.integrate_boundary(np.ones(g.Nx), wall="lower") == pytest.approx(3.0)


def test_quadrature_second_order():
    errs = []
    for n in (16, 32, 64):
        g = build_domain(Lx=1.0, Ly=1.0, Nx=16, Ny=n)
        _, y = g.mesh("node")
        errs.append(abs(g.integrate_bulk(np.exp(y)) - (np.e - 1.0)))
    assert np.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.05)
    assert np.log2(errs[1] / errs[2]) == pytest.approx(2.0, abs=0.05)


def test_integrate_boundary_errors():
    g = build_domain(Nx=8, Ny=8)
    with pytest.raises(ValueError):
        g.integrate_boundary(np.ones(g.Nx), wall="left")
    with pytest.raises(ValueError):
        g.integrate_boundary(np.ones(5))
    with pytest.raises(ValueError):
        g.integrate_bulk(np.ones((3, 3)))


def test_sigma_symbol_matches_second_difference():
    g = build_domain(Lx=2.0, Nx=16, Ny=8)
    for m in range(g.Nx // 2 + 1):
        c = np.cos(2 * np.pi * m * g.x_c / g.Lx)
        d2 = (np.roll(c, -1) - 2 * c + np.roll(c, 1)) / g.dx**2
        np.testing.assert_allclose(-d2, g.sigma_x[m] * c, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(
    Lx=hst.floats(0.5, 20.0),
    Ly=hst.floats(0.5, 20.0),
    nx=hst.integers(4, 32),
    ny=hst.integers(8, 40),
)
def test_node_weights_sum_to_area(Lx, Ly, nx, ny):
    g = Grid(Lx, Ly, 2 * nx, ny)
    assert np.sum(g.w_node) == pytest.approx(Lx * Ly, rel=1e-12)
    assert np.sum(g.w_cell) == pytest.approx(Lx * Ly, rel=1e-12)
    assert np.all(g.sigma_x >= 0) and g.sigma_x[0] == 0
