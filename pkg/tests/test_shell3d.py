import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import sph_harm_y

from gradrubin.divcurl2d import CompatibilityError
from gradrubin.shell3d import (NORMAL_SIGN, BoundarySH, TangentialSH, a3d_diagonal,
                               closed_form_radial, curl_residual, divergence_residual,
                               hodge_assemble, jrho_from_g, linear_sweep3d, multiplier3d,
                               potential_mode, potential_profile, radial_grid, sh_analysis,
                               sh_synthesis, solve_radial_bvp, solve_surface_elliptic,
                               sphere_grid, surface_hodge, transport_monopole)

LM = 4


def sh(modes, l_max=LM):
    return BoundarySH.from_modes(l_max, modes)


def test_boundary_sh_basics():
    c = sh({(2, 1): 1 + 2j, (2, -1): -(1 - 2j)})
    assert c.is_real() and c.coefficient(2, 1) == 1 + 2j and c.coefficient(9, 0) == 0
    assert c.l_max == LM and len(list(c.modes())) == 25
    with pytest.raises(ValueError):
        sh({(1, 2): 1.0})
    with pytest.raises(ValueError):
        BoundarySH(np.zeros(5))
    th, ph = np.array([0.3, 1.1]), np.array([0.2, 4.0])
    assert np.allclose(sh({(3, -2): 1.0}).evaluate(th, ph), sph_harm_y(3, -2, th, ph))
    s = (c + c) * 0.5 - c
    assert np.max(np.abs(s.coeffs)) == 0 and np.allclose((-c).coeffs, -c.coeffs)
    assert c.resized(2).l_max == 2 and c.resized(6).coefficient(2, 1) == 1 + 2j


@given(st.lists(st.floats(-1, 1), min_size=25, max_size=25))
def test_quadrature_round_trip(vals):
    c = BoundarySH(np.array(vals) * (1 + 0.5j))
    grid = sphere_grid(LM)
    back = sh_analysis(sh_synthesis(c, grid), grid, LM)
    assert np.max(np.abs(back.coeffs - c.coeffs)) < 1e-12


def test_hodge_examples():
    psi, phi = surface_hodge(TangentialSH(sh({(1, 0): 0.7}), BoundarySH.zeros(LM)))
    assert phi.coefficient(1, 0) == 0.7 and psi.max_abs() == 0
    psi, phi = surface_hodge(TangentialSH(BoundarySH.zeros(LM), sh({(2, 1): 1.0})))
    assert phi.max_abs() == 0 and psi.coefficient(2, 1) == NORMAL_SIGN
    with pytest.raises(ValueError):
        surface_hodge(TangentialSH(sh({(0, 0): 1.0}), BoundarySH.zeros(LM)))


@given(st.lists(st.floats(-1, 1), min_size=48, max_size=48))
def test_hodge_round_trip(vals):
    # tangent fields have no l = 0 content
    a = np.concatenate([[0.0], vals[:24]])
    b = np.concatenate([[0.0], vals[24:]])
    u = TangentialSH(BoundarySH(a), BoundarySH(b))
    back = hodge_assemble(*surface_hodge(u))
    assert np.max(np.abs(back.grad.coeffs - a)) < 1e-12
    assert np.max(np.abs(back.curl.coeffs - b)) < 1e-12


def test_jrho_examples():
    assert jrho_from_g(TangentialSH(sh({(2, 0): 1.0}), BoundarySH.zeros(LM))).max_abs() == 0
    assert jrho_from_g(TangentialSH.zeros(LM)).max_abs() == 0


def test_jrho_quadrature_oracle_l2_m0():
    # g = Φ_20 = r̂×∇Y_20 = e_φ ∂θY; with n = -r̂, n×g = e_θ ∂θY and
    # div_S(e_θ F) = (sinθ F)'/sinθ; evaluate by finite differences and project on Y_20
    grid = sphere_grid(8)
    th, ph = grid.mesh()
    h = 1e-4

    def Y(t):
        return np.real(sph_harm_y(2, 0, t, ph))

    def F(t):
        return (Y(t + h) - Y(t - h)) / (2 * h)

    div = ((np.sin(th + h) * F(th + h) - np.sin(th - h) * F(th - h)) / (2 * h)) / np.sin(th)
    oracle = sh_analysis(div, grid, 8).coefficient(2, 0)
    j = jrho_from_g(TangentialSH(BoundarySH.zeros(8), sh({(2, 0): 1.0}, 8)))
    assert j.coefficient(2, 0) == pytest.approx(oracle.real, rel=1e-6)
    assert j.coefficient(2, 0) == pytest.approx(-6.0)


def test_surface_elliptic_examples():
    jr = sh({(2, 0): 1.0})
    assert solve_surface_elliptic(BoundarySH.zeros(LM), jr).coefficient(2, 0) == pytest.approx(1 / 3)
    assert solve_surface_elliptic(BoundarySH.zeros(LM), jr, curvature=True).max_abs() == 0
    assert solve_surface_elliptic(sh({(3, 1): 5.0}), BoundarySH.zeros(LM)).max_abs() == 0
    with pytest.raises(CompatibilityError):
        solve_surface_elliptic(BoundarySH.zeros(LM), sh({(0, 0): 1.0}))


def test_transport_monopole_examples():
    r = np.linspace(1, 2, 5)
    cur = transport_monopole(sh({(1, 0): 1.0}), BoundarySH.zeros(LM), sh({(2, 1): 1.0}))
    jr, j1, j2 = cur.profiles(1, 0, r)
    assert np.allclose(jr, r**-2) and np.all(j1 == 0)
    assert np.allclose(cur.profiles(2, 1, r)[2], r)
    with pytest.raises(ValueError):
        transport_monopole(BoundarySH.zeros(LM), sh({(2, 0): 1.0}), BoundarySH.zeros(LM))
    with pytest.raises(CompatibilityError):
        transport_monopole(sh({(0, 0): 1.0}), BoundarySH.zeros(LM), BoundarySH.zeros(LM))


@pytest.mark.parametrize("l", [2, 3])
def test_radial_bvp_matches_closed_form(l):
    P = solve_radial_bvp(l, (None, None, lambda r: r), 2.0, 512)
    exact = closed_form_radial(l, 2.0, P.r)
    assert np.max(np.abs(P.br - exact)) / np.max(np.abs(exact)) < 1e-6
    assert abs(P.br[0]) < 1e-12 and abs(P.br[-1]) < 1e-12


def test_radial_bvp_zero_and_guards():
    P = solve_radial_bvp(4, (None, None, None), 2.0, 64)
    assert np.max(np.abs(P.br)) == 0 and np.max(np.abs(P.b1)) == 0
    with pytest.raises(ValueError):
        solve_radial_bvp(0, (None, None, None), 2.0, 64)
    with pytest.raises(ValueError):
        radial_grid(1.0)


def test_radial_divergence_identity_converges():
    res = []
    for n in (32, 64):
        P = solve_radial_bvp(2, (lambda r: r**-2, lambda r: 0 * r, lambda r: r), 2.0, n)
        res.append(divergence_residual(P))
    assert res[1] < 1e-6 and np.log2(res[0] / res[1]) >= 2


FROZEN_3D = {(1, 2.0): -29 / 35, (2, 2.0): -43 / 62, (3, 2.0): -0.5557478895182352,
             (4, 2.0): -0.438600782778865, (1, 5.0): -7.058064516129034,
             (3, 1.5): -0.28781414972787683}


@pytest.mark.parametrize("key", sorted(FROZEN_3D))
def test_multiplier3d_frozen(key):
    assert multiplier3d(*key) == pytest.approx(FROZEN_3D[key], rel=1e-13)


def test_multiplier3d_l3_branch_and_fd_oracle():
    L = 2.0
    c = L * L * np.log(L) / (L**-5 - L * L)
    assert multiplier3d(3, L) == pytest.approx((4 * c + 3 * c + 1) / 7, rel=1e-15)
    for l in (1, 3):
        P = solve_radial_bvp(l, (None, None, lambda r: r), L, 256)
        assert P.b1[0] / multiplier3d(l, L) == pytest.approx(1, abs=1e-6)
    assert a3d_diagonal(4, L) == pytest.approx(20 * multiplier3d(4, L))
    with pytest.raises(ValueError):
        multiplier3d(0, L)


@given(st.integers(1, 32), st.sampled_from([1.1, 2.0, 5.0, 10.0]))
def test_multiplier3d_nonzero(l, L):
    assert multiplier3d(l, L) < 0


@given(st.integers(0, 6), st.floats(-1, 1), st.floats(-1, 1))
def test_potential_mode_traces(l, fm, fp):
    L = 2.0
    if l == 0:
        fp = -fm / L**2
    a, c = potential_mode(l, fm, fp, L)
    P = potential_profile(l, 0, a, c, np.array([1.0, L]))
    assert -P.br[0] == pytest.approx(fm, abs=1e-12)
    assert P.br[1] == pytest.approx(fp, abs=1e-12)


def test_sweep_zero_data():
    z = BoundarySH.zeros(LM)
    profiles, diag = linear_sweep3d((z, z), TangentialSH.zeros(LM), 2.0, LM, 64)
    assert all(np.max(np.abs(P.br)) == 0 and np.max(np.abs(P.b1)) == 0 for P in profiles.values())
    assert diag.max_current == 0


def test_sweep_single_phi_mode():
    z = BoundarySH.zeros(LM)
    g = TangentialSH(z, sh({(2, 0): 1e-3}))
    profiles, diag = linear_sweep3d((z, z), g, 2.0, LM, 128)
    assert profiles[(2, 0)].b2[0] / 1e-3 == pytest.approx(1.0, abs=1e-6)
    assert diag.trace_error < 1e-12
    others = [P for k, P in profiles.items() if k != (2, 0)]
    assert all(np.max(np.abs(P.b2)) == 0 for P in others)


def test_sweep_single_psi_mode_multiplier_consistent():
    z = BoundarySH.zeros(LM)
    g = TangentialSH(sh({(2, 0): 1e-3}), z)
    profiles, diag = linear_sweep3d((z, z), g, 2.0, LM, 256)
    assert diag.multiplier_error < 1e-6 and diag.trace_error < 1e-9
    assert diag.curl_residual < 1e-8 and diag.divergence_residual < 1e-8


def test_sweep_potential_data_is_current_free():
    f = (sh({(1, 0): 1e-3}), BoundarySH.zeros(LM))
    a, c = potential_mode(1, 1e-3, 0.0, 2.0)
    H = potential_profile(1, 0, a, c, np.ones(1))
    g = TangentialSH(sh({(1, 0): H.b1[0]}), BoundarySH.zeros(LM))
    profiles, diag = linear_sweep3d(f, g, 2.0, LM, 128)
    assert diag.max_current < 1e-15 and curl_residual(profiles[(1, 0)]) < 1e-8
    # with g = 0 instead, a current is needed to cancel the potential's tangential trace
    _, diag0 = linear_sweep3d(f, TangentialSH.zeros(LM), 2.0, LM, 128)
    assert diag0.max_current > 1e-4


def test_sweep_flux_imbalance_rejected():
    with pytest.raises(CompatibilityError):
        linear_sweep3d((sh({(0, 0): 1.0}), BoundarySH.zeros(LM)), TangentialSH.zeros(LM),
                       2.0, LM, 64)
    f = (sh({(0, 0): 1.0}), sh({(0, 0): -0.25}))
    profiles, diag = linear_sweep3d(f, TangentialSH.zeros(LM), 2.0, LM, 64)
    assert diag.normal_error < 1e-12
