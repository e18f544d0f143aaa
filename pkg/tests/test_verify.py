import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import gamma

from gradrubin.current2d import assemble_A, closed_form_multiplier
from gradrubin.divcurl2d import DivCurlSolver, Field2D, reference_field_2d, spiral_field
from gradrubin.geometry import Domain2D, make_grid
from gradrubin.shell3d import multiplier3d
from gradrubin.verify import (DecayFit, check_field_admissible, cutoff, kernel_ft_decay,
                              kernel_transform, numeric_symbol2d, numeric_symbol3d,
                              predicted_symbol)

L = 2.0


def test_admissibility_of_B0(annulus, small_grid):
    rep = check_field_admissible(reference_field_2d(annulus, small_grid))
    assert rep.passed
    assert rep.min_magnitude == pytest.approx(0.5) and rep.location[0] == pytest.approx(L)
    assert rep.min_inflow == pytest.approx(1.0) and rep.min_outflow == pytest.approx(0.5)
    assert rep.as_dict()["passed"] is True


def test_admissibility_detects_a_zero(annulus, small_grid):
    rr, tt = small_grid.mesh()
    i, j = 20, 5
    bump = np.exp(-((rr - small_grid.r[i]) ** 2 + (tt - small_grid.phi[j]) ** 2) / 1e-3)
    B = Field2D(annulus, small_grid, (1 - bump) / rr, -bump * 0.0 + 0 * rr)
    rep = check_field_admissible(B)
    assert not rep.passed
    assert rep.location == (pytest.approx(small_grid.r[i]), pytest.approx(small_grid.phi[j]))
    zero = Field2D(annulus, small_grid, 0 * rr, 0 * rr)
    assert not check_field_admissible(zero).passed


def test_admissibility_of_harmonic_gradient(annulus, small_grid):
    # ∇u for harmonic u with inner data below outer data points outwards everywhere
    solver = DivCurlSolver(annulus, small_grid)
    th = small_grid.phi
    u = solver.poisson.solve(np.zeros(small_grid.shape), 0.2 * np.cos(th), 2.0)
    gi = solver.chart.ginv
    ur = solver.d1 @ u
    B = Field2D(annulus, small_grid, gi[..., 0, 0] * ur, np.zeros_like(u))
    assert check_field_admissible(B).passed


@given(st.floats(-3, 3))
def test_cutoff_shape(z):
    v = float(cutoff(z))
    assert 0 <= v <= 1 and v == float(cutoff(-z))
    if abs(z) <= 1:
        assert v == 1
    if abs(z) >= 2:
        assert v == 0


def test_kernel_transforms_match_asymptotes():
    xi = np.array([1e3, 1e4])
    sym = kernel_transform("symmetric_log", xi)
    assert np.max(np.abs(sym * xi / np.pi - 1)) < 1e-8
    one = kernel_transform("one_sided_log", xi)
    asym = np.sqrt((np.log(xi) + np.euler_gamma) ** 2 + np.pi**2 / 4) / xi
    assert np.max(np.abs(one / asym - 1)) < 1e-8
    p = 0.5
    power = kernel_transform("power", xi, p=p)
    c = 2 * np.pi * 2 ** (1 - p) * gamma(1 - p / 2) / gamma(p / 2)
    assert np.max(np.abs(power / (c * xi ** (p - 2)) - 1)) < 1e-6


def test_kernel_transform_guards():
    with pytest.raises(ValueError):
        kernel_transform("symmetric_log", np.array([1e3]), N=1000)
    with pytest.raises(ValueError):
        kernel_transform("cubic", np.array([1e3]))
    with pytest.raises(ValueError):
        kernel_transform("power", np.array([1e3]), p=2.5)
    with pytest.raises(ValueError):
        DecayFit("x", np.array([1.0, 2.0]), np.ones(2), "c/xi", 0, {}, 1, -1, False)


def test_decay_model_choice_stable_under_refinement():
    for kind, model in (("symmetric_log", "c/xi"), ("one_sided_log", "c*log(xi)/xi")):
        coarse = kernel_ft_decay(kind, xi=np.geomspace(1e3, 1e5, 16))
        fine = kernel_ft_decay(kind, xi=np.geomspace(1e3, 1e5, 31))
        assert coarse.model == fine.model == model


def test_predicted_symbol_examples():
    assert predicted_symbol(8, 1.0, 1.0, np.pi / 2) == pytest.approx(1 / 8)
    beta = 0.5
    angle = np.arctan2(1.0, beta)
    p = predicted_symbol(8, np.sqrt(1 + beta**2), 1.0, angle)
    assert abs(p.imag) > 0 and np.cos(angle) == pytest.approx(beta / np.sqrt(1 + beta**2))


def test_numeric_symbol2d_small_cases():
    d = Domain2D(L)
    grid = make_grid(d, 128, 8)
    B0 = reference_field_2d(d, grid)
    A = assemble_A(B0, 8, grid)
    s1, s8 = numeric_symbol2d(A, B0, [1, 8])
    # the diagonal entry carries the outward-derivative sign of the multiplier
    assert s8.measured.real == pytest.approx(-closed_form_multiplier(8, L), rel=1e-6)
    assert s1.relative_deviation == pytest.approx(4 / 9, rel=1e-8) and s8.relative_deviation < s1.relative_deviation
    assert s8.leakage < 1e-8
    with pytest.raises(ValueError):
        numeric_symbol2d(A, B0, [0])
    with pytest.raises(ValueError):
        numeric_symbol2d(A, B0, [9])


def test_symbol2d_spiral_deviation_nonincreasing(suite_result):
    samples = suite_result("symbol2d").info["spiral_samples"]
    dev = np.array([s["relative_deviation"] for s in samples if s["k"] >= 16])
    smooth = np.convolve(dev, np.ones(3) / 3, mode="valid")
    assert np.all(np.diff(smooth) <= 0)


@pytest.mark.parametrize("L3", [2.0, 10.0])
def test_numeric_symbol3d_linear_growth(L3):
    fit = numeric_symbol3d(L3)
    assert abs(fit.slope - 1) < 0.03
    m = np.array([multiplier3d(l, L3) for l in range(1, 33)])
    again = numeric_symbol3d(L3, multipliers=m)
    assert again.slope == pytest.approx(fit.slope, rel=1e-12)
    with pytest.raises(ValueError):
        numeric_symbol3d(L3, range(1, 10))


def test_verification_is_deterministic():
    a = kernel_ft_decay("symmetric_log", xi=np.geomspace(1e3, 1e5, 11))
    b = kernel_ft_decay("symmetric_log", xi=np.geomspace(1e3, 1e5, 11))
    assert a.as_dict() == b.as_dict()
