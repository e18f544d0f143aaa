import numpy as np
import pytest
from hypothesis import given, strategies as st

from gradrubin.divcurl2d import Field2D, reference_field_2d, spiral_field
from gradrubin.geometry import Domain2D, make_grid
from gradrubin.spectral import BoundaryFourier
from gradrubin.transport2d import (TransportError, flow_jacobian_check, footpoints,
                                   trace_characteristic, transport_modes, transport_scalar)

L = 2.0


@pytest.fixture(scope="module")
def grid():
    return make_grid(L, 32, 8)


@pytest.fixture(scope="module")
def B0(grid):
    return reference_field_2d(Domain2D(L), grid)


@pytest.fixture(scope="module")
def spiral(grid):
    return spiral_field(Domain2D(L), grid, 0.5)


def test_monopole_characteristic(B0):
    p = trace_characteristic(B0, 0.0)
    assert p.exit_parameter == pytest.approx((L * L - 1) / 2, rel=1e-9)
    assert np.max(np.abs(p.r - np.sqrt(1 + 2 * p.s))) < 1e-9
    assert np.max(np.abs(p.theta)) < 1e-12
    back = trace_characteristic(B0, 0.3, "backward")
    assert back.r[-1] == pytest.approx(1.0) and back.theta[-1] == pytest.approx(0.3)
    with pytest.raises(ValueError):
        trace_characteristic(B0, 0.0, "sideways")


def test_spiral_characteristic(spiral):
    p = trace_characteristic(spiral, 0.0)
    assert p.theta[-1] - p.theta[0] == pytest.approx(0.5 * np.log(L), rel=1e-9)


def test_constant_field_gives_straight_line(grid):
    # a uniform field along e_x restricted to the right half-plane strip
    d = Domain2D(L)

    def contra(r, th):
        return np.cos(th), -np.sin(th) / r
    B = Field2D.from_exact(d, grid, contra)
    p = trace_characteristic(B, 0.0)
    assert np.max(np.abs(p.points[:, 1])) < 1e-12
    assert p.points[-1, 0] == pytest.approx(L)


def test_vanishing_field_is_reported(grid):
    B = Field2D.from_exact(Domain2D(L), grid, lambda r, th: ((1.5 - r) / r, 0 * r))
    with pytest.raises(TransportError):
        trace_characteristic(B, 0.0)


def test_footpoints_monopole_and_spiral(B0, spiral, grid):
    fp = footpoints(B0)
    _, tt = grid.mesh()
    assert np.max(np.abs(fp.theta - tt)) < 1e-12
    assert np.all(fp.s[0] == 0) and np.all(fp.theta[0] == grid.phi)
    fs = footpoints(spiral)
    rr, tt = grid.mesh()
    assert np.max(np.abs(fs.theta - (tt - 0.5 * np.log(rr)))) < 1e-9


def test_footpoints_reject_inflow_violation(B0, grid):
    bad = Field2D(B0.domain, grid, -B0.br, B0.bt)
    with pytest.raises(TransportError):
        footpoints(bad)


def test_transport_examples(B0, spiral, grid):
    rr, tt = grid.mesh()
    one = transport_scalar(BoundaryFourier.constant(1.0), footpoints(spiral))
    assert np.max(np.abs(one.values - 1)) < 1e-15
    e3 = transport_scalar(BoundaryFourier.from_modes(3, {3: 1.0}), footpoints(B0))
    assert np.max(np.abs(e3.values - np.exp(3j * tt))) < 1e-12
    e1 = transport_scalar(BoundaryFourier.from_modes(1, {1: 1.0}), footpoints(spiral))
    assert np.max(np.abs(e1.values - np.exp(1j * (tt - 0.5 * np.log(rr))))) < 1e-9
    modes = transport_modes(2, footpoints(B0))
    assert modes.shape == (5,) + grid.shape
    assert np.max(np.abs(modes[4] - np.exp(2j * tt))) < 1e-12


@given(c=st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_transport_preserves_range(spiral, c):
    fp = footpoints(spiral)
    j0 = BoundaryFourier(np.array([c[0] - 0.5j * c[1], c[2], c[0] + 0.5j * c[1]]))
    vals = np.real(transport_scalar(j0, fp).values)
    # j0 = c2 + 2|a| cos(θ + arg a) with a = c0 + i c1 / 2
    amp = 2 * abs(c[0] + 0.5j * c[1])
    assert vals.min() >= c[2] - amp - 1e-10 and vals.max() <= c[2] + amp + 1e-10


def test_advection_residual_converges():
    res = []
    # coarse grids: by N_r = 64 the residual reaches the ODE tolerance floor
    for n in (16, 32, 64):
        grid = make_grid(L, n, 8)
        S = spiral_field(Domain2D(L), grid, 0.5)
        j = transport_scalar(BoundaryFourier.from_modes(2, {2: 0.5, -2: 0.5}), footpoints(S))
        res.append(j.advection_residual(S))
    assert np.log2(res[0] / res[1]) >= 2 and np.log2(res[1] / res[2]) >= 2


def test_flow_jacobian(B0, spiral, grid):
    assert flow_jacobian_check(B0, n_samples=20) < 1e-8
    assert flow_jacobian_check(spiral, n_samples=20) < 1e-7
    leaky = Field2D.from_exact(Domain2D(L), grid, lambda r, th: (1.0 + 0 * th, 0 * r))
    assert flow_jacobian_check(leaky, n_samples=20) > 0.1
