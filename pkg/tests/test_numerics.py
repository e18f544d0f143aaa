import numpy as np
import pytest
from hypothesis import given, strategies as st

from gradrubin.fd import fornberg_weights, inner_trace_row, radial_matrices
from gradrubin.spectral import (BoundaryFourier, angular_wavenumbers, antiderivative, ddtheta,
                                periodic_trapezoid)


@given(st.floats(-1, 1), st.integers(0, 4))
def test_fornberg_exact_on_polynomials(x0, deg):
    x = np.linspace(-1.5, 1.5, 7)
    w = fornberg_weights(x0, x, 2)
    assert w[0] @ x**deg == pytest.approx(x0**deg, abs=1e-12)
    assert w[1] @ x**deg == pytest.approx(deg * x0 ** max(deg - 1, 0), abs=1e-10)
    expected = deg * (deg - 1) * x0 ** max(deg - 2, 0)
    assert w[2] @ x**deg == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("order", [2, 4, 6, 8])
def test_radial_matrices_exact_on_polynomials(order):
    r = np.sort(np.concatenate([[1.0, 2.0], 1 + np.random.default_rng(0).random(30)]))
    d1, d2 = radial_matrices(r, order)
    p = r**order
    assert np.max(np.abs(d1 @ p - order * r ** (order - 1))) < 1e-7
    assert np.max(np.abs(d2 @ p - order * (order - 1) * r ** (order - 2))) < 1e-5


@pytest.mark.parametrize("order", [2, 4, 6])
def test_inner_trace_row_exact(order):
    r = np.linspace(1, 2, 40)
    row = inner_trace_row(r, order)
    assert row @ (r ** (order + 1)) == pytest.approx(order + 1.0, rel=1e-9)


def test_radial_derivative_converges_at_order():
    errs = []
    for n in (32, 64, 128):
        r = np.linspace(1, 2, n)
        d1, _ = radial_matrices(r, 6)
        errs.append(np.max(np.abs(d1 @ np.sin(5 * r) - 5 * np.cos(5 * r))))
    assert np.log2(errs[0] / errs[1]) > 5 and np.log2(errs[1] / errs[2]) > 5


@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=9, max_size=9))
def test_fourier_nodal_round_trip(vals):
    c = np.array([a + 1j * b for a, b in vals])
    f = BoundaryFourier(c)
    back = BoundaryFourier.from_nodal(f.to_nodal(32), 4)
    assert np.max(np.abs(back.coeffs - c)) < 1e-13


def test_fourier_evaluate_and_modes():
    f = BoundaryFourier.from_modes(3, {2: 0.5, -2: 0.5})
    th = np.linspace(0, 2 * np.pi, 17)
    assert np.max(np.abs(f.evaluate(th) - np.cos(2 * th))) < 1e-14
    assert f.is_real()
    assert list(f.modes) == list(range(-3, 4))
    with pytest.raises(ValueError):
        BoundaryFourier.from_modes(1, {2: 1.0})
    with pytest.raises(ValueError):
        BoundaryFourier(np.zeros(4))


def test_from_nodal_rejects_underresolved():
    with pytest.raises(ValueError):
        BoundaryFourier.from_nodal(np.zeros(8), 4)


def test_angular_wavenumbers_keep_nyquist_positive():
    assert list(angular_wavenumbers(6)) == [0, 1, 2, 3, -2, -1]


@given(st.integers(1, 10), st.floats(-2, 2))
def test_ddtheta_and_antiderivative(k, a):
    th = 2 * np.pi * np.arange(64) / 64
    u = a * np.sin(k * th) + 0.25
    assert np.max(np.abs(ddtheta(u) - a * k * np.cos(k * th))) < 1e-11 * max(1, k)
    F, mean = antiderivative(u)
    assert mean == pytest.approx(0.25, abs=1e-14)
    assert np.max(np.abs(F - a * (1 - np.cos(k * th)) / k)) < 1e-12
    assert F[0] == 0.0


def test_periodic_trapezoid():
    th = 2 * np.pi * np.arange(32) / 32
    assert periodic_trapezoid(np.cos(th) ** 2) == pytest.approx(np.pi, abs=1e-14)
