"""Spherical-shell computations around the monopole ``B₀ = x/|x|³``.

Vector fields are expanded in vector spherical harmonics

    Y_lm = Y_lm r̂,    Ψ_lm = r ∇Y_lm,    Φ_lm = r̂ × Ψ_lm,

so a field reads ``Σ b^r Y_lm + b^(1) Ψ_lm + b^(2) Φ_lm`` with radial profiles.
Then

    ∇·B = r⁻² (r² b^r)' − l(l+1) b^(1)/r,
    ∇×B = −l(l+1) b^(2)/r Y − r⁻¹(r b^(2))' Ψ + r⁻¹((r b^(1))' − b^r) Φ.

The inner sphere ``r = 1`` is the inflow boundary; its outward normal is
``n = NORMAL_SIGN · r̂`` with ``NORMAL_SIGN = -1``.  Distinct ``(l, m)``
never couple, so everything is done mode by mode in coefficient space.
Radial problems are discretized on a grid uniform in ``x = ln r``, where the
Euler-Cauchy operators have constant coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np
import scipy.linalg as sla
from scipy.special import roots_legendre, sph_harm_y

from .divcurl2d import CompatibilityError
from .fd import radial_matrices

NORMAL_SIGN = -1.0
DEFAULT_L_MAX = 16
DEFAULT_N_R = 256
DEFAULT_FD_ORDER_3D = 8


def _index(l: int, m: int) -> int:
    return l * l + l + m


@dataclass(frozen=True)
class BoundarySH:
    """Coefficients on orthonormal ``Y_lm`` (Condon-Shortley phase), flat index ``l² + l + m``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        n = int(round(np.sqrt(c.size)))
        if c.ndim != 1 or n * n != c.size:
            raise ValueError("coefficient array must have (l_max+1)² entries")
        object.__setattr__(self, "coeffs", c)

    @property
    def l_max(self) -> int:
        return int(round(np.sqrt(self.coeffs.size))) - 1

    @classmethod
    def zeros(cls, l_max: int) -> "BoundarySH":
        return cls(np.zeros((l_max + 1) ** 2, dtype=complex))

    @classmethod
    def from_modes(cls, l_max: int, modes: dict[tuple[int, int], complex]) -> "BoundarySH":
        c = np.zeros((l_max + 1) ** 2, dtype=complex)
        for (l, m), v in modes.items():
            if not (0 <= l <= l_max and abs(m) <= l):
                raise ValueError(f"mode ({l}, {m}) outside l_max={l_max}")
            c[_index(l, m)] = v
        return cls(c)

    def coefficient(self, l: int, m: int) -> complex:
        if l > self.l_max:
            return 0j
        return complex(self.coeffs[_index(l, m)])

    def modes(self) -> Iterator[tuple[int, int]]:
        for l in range(self.l_max + 1):
            for m in range(-l, l + 1):
                yield l, m

    @property
    def degrees(self) -> np.ndarray:
        return np.concatenate([np.full(2 * l + 1, l) for l in range(self.l_max + 1)])

    def scaled(self, factor: Callable[[np.ndarray], np.ndarray]) -> "BoundarySH":
        """Multiply each coefficient by ``factor(l)``."""
        return BoundarySH(self.coeffs * factor(self.degrees))

    def resized(self, l_max: int) -> "BoundarySH":
        c = np.zeros((l_max + 1) ** 2, dtype=complex)
        n = min(c.size, self.coeffs.size)
        c[:n] = self.coeffs[:n]
        return BoundarySH(c)

    def is_real(self, tol: float = 1e-12) -> bool:
        """``c_{l,-m} = (-1)^m conj(c_{lm})``."""
        for l, m in self.modes():
            if m > 0 and abs(self.coefficient(l, -m) - (-1) ** m * np.conj(self.coefficient(l, m))) > tol:
                return False
        return True

    def evaluate(self, theta, phi) -> np.ndarray:
        theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
        out = np.zeros(theta.shape, dtype=complex)
        for (l, m), c in zip(self.modes(), self.coeffs):
            if c != 0:
                out += c * sph_harm_y(l, m, theta, phi)
        return out

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def _aligned(self, other: "BoundarySH"):
        l_max = max(self.l_max, other.l_max)
        return self.resized(l_max).coeffs, other.resized(l_max).coeffs

    def __add__(self, other: "BoundarySH") -> "BoundarySH":
        a, b = self._aligned(other)
        return BoundarySH(a + b)

    def __sub__(self, other: "BoundarySH") -> "BoundarySH":
        a, b = self._aligned(other)
        return BoundarySH(a - b)

    def __neg__(self) -> "BoundarySH":
        return BoundarySH(-self.coeffs)

    def __mul__(self, scalar) -> "BoundarySH":
        return BoundarySH(self.coeffs * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class TangentialSH:
    """Tangent field ``Σ grad_lm Ψ_lm + curl_lm Φ_lm`` on the unit sphere."""

    grad: BoundarySH
    curl: BoundarySH

    @classmethod
    def zeros(cls, l_max: int) -> "TangentialSH":
        return cls(BoundarySH.zeros(l_max), BoundarySH.zeros(l_max))

    @property
    def l_max(self) -> int:
        return max(self.grad.l_max, self.curl.l_max)


@dataclass(frozen=True)
class VSHModeProfile:
    """Radial profiles of one ``(l, m)`` mode of a field and its current."""

    l: int
    m: int
    r: np.ndarray
    br: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    jr: np.ndarray = field(default=None, repr=False)
    j1: np.ndarray = field(default=None, repr=False)
    j2: np.ndarray = field(default=None, repr=False)

    def __add__(self, other: "VSHModeProfile") -> "VSHModeProfile":
        if (self.l, self.m) != (other.l, other.m) or not np.array_equal(self.r, other.r):
            raise ValueError("profiles live on different modes or grids")
        z = np.zeros_like(self.r)

        def s(a, b):
            return (z if a is None else a) + (z if b is None else b)
        return VSHModeProfile(self.l, self.m, self.r, self.br + other.br, self.b1 + other.b1,
                              self.b2 + other.b2, s(self.jr, other.jr), s(self.j1, other.j1),
                              s(self.j2, other.j2))


# surface operations

def surface_hodge(u: TangentialSH, tol: float = 1e-14) -> tuple[BoundarySH, BoundarySH]:
    """Split ``u = n×∇ψ + ∇φ`` on the inner sphere; returns ``(ψ, φ)``.

    ``Ψ_lm = ∇Y_lm`` gives ``φ_lm = u^(1)_lm``; ``n×∇Y_lm = NORMAL_SIGN Φ_lm``
    gives ``ψ_lm = NORMAL_SIGN u^(2)_lm``.  Constants are set to zero.
    """
    if abs(u.grad.coefficient(0, 0)) > tol or abs(u.curl.coefficient(0, 0)) > tol:
        raise ValueError("tangent fields carry no l=0 content")
    return u.curl * NORMAL_SIGN, u.grad


def hodge_assemble(psi: BoundarySH, phi: BoundarySH) -> TangentialSH:
    """Inverse of :func:`surface_hodge`."""
    return TangentialSH(phi, psi * NORMAL_SIGN)


def jrho_from_g(g: TangentialSH) -> BoundarySH:
    """``div_S(n×g)`` on the inner sphere.

    ``n×Ψ = NORMAL_SIGN Φ``, ``n×Φ = −NORMAL_SIGN Ψ`` and ``div_S Ψ_lm =
    −l(l+1)Y_lm``, so the result is ``NORMAL_SIGN · l(l+1) g^(2)``.  With
    ``NORMAL_SIGN = -1`` this equals ``j·r̂`` at ``r = 1`` for any field whose
    tangential trace is g.
    """
    return g.curl.scaled(lambda l: NORMAL_SIGN * l * (l + 1.0))


def solve_surface_elliptic(psi: BoundarySH, jrho: BoundarySH, curvature: bool = False,
                           tol: float = 1e-12) -> BoundarySH:
    """Gradient potential ``φ`` of the inflow current around the monopole.

    With ``Bρ = 1`` and ``∂Bρ/∂ρ = −2`` on the unit sphere the mode equation is
    ``−l(l+1) φ_lm = (−2 + κ) jρ_lm``.  ``curvature=False`` uses ``κ = 0``,
    giving ``φ = 2jρ/(l(l+1))``.  ``curvature=True`` includes the mean-curvature
    term ``κ = 2/ρ`` of the divergence on a sphere, which cancels the source
    so that ``φ = 0``, as required by ``div j = 0`` for the transported
    current.  ``ψ`` does not enter for the monopole.
    """
    del psi
    if abs(jrho.coefficient(0, 0)) > tol:
        raise CompatibilityError("jρ has nonzero mean on the inflow sphere")
    kappa = 2.0 if curvature else 0.0
    deg = jrho.degrees.astype(float)
    out = np.zeros_like(jrho.coeffs)
    nz = deg > 0
    out[nz] = (2.0 - kappa) * jrho.coeffs[nz] / (deg[nz] * (deg[nz] + 1))
    return BoundarySH(out)


# transport

@dataclass(frozen=True)
class MonopoleCurrent:
    """Current transported along the monopole from inflow data.

    ``j = r⁻² jr(θ,φ) r̂ + r j∥(θ,φ)`` with the tangential part in ``Ψ`` (j1)
    and ``Φ`` (j2) coefficients.
    """

    jr: BoundarySH
    j1: BoundarySH
    j2: BoundarySH

    def profiles(self, l: int, m: int, r: np.ndarray):
        r = np.asarray(r, dtype=float)
        return (self.jr.coefficient(l, m) * r**-2, self.j1.coefficient(l, m) * r,
                self.j2.coefficient(l, m) * r)


def transport_monopole(jr: BoundarySH, j1: BoundarySH, j2: BoundarySH,
                       tol: float = 1e-12) -> MonopoleCurrent:
    """Validate inflow current data and return its transport along B₀.

    The divergence of the transported current is ``−l(l+1) j^(1) / r`` per
    mode, so ``j^(1)`` must vanish for ``l ≥ 1``; ``jr_00`` must vanish since
    a Y₀₀ radial current has nonzero flux through the inner sphere.
    """
    if j1.coeffs.size > 1 and np.max(np.abs(j1.coeffs[1:])) > tol:
        raise ValueError("transported current must have zero Ψ part for l ≥ 1")
    if abs(jr.coefficient(0, 0)) > tol:
        raise CompatibilityError("radial current has nonzero flux (l = 0)")
    return MonopoleCurrent(jr, j1, j2)


# radial problems

def radial_grid(L: float, N_r: int = DEFAULT_N_R) -> np.ndarray:
    """Nodes uniform in ``ln r`` on ``[1, L]``."""
    if not L > 1:
        raise ValueError("L must exceed 1")
    return np.exp(np.linspace(0.0, np.log(L), N_r))


def _log_matrices(r: np.ndarray, fd_order: int):
    return radial_matrices(np.log(r), fd_order)


def _profile(src, r):
    if src is None:
        return np.zeros_like(r)
    if callable(src):
        return np.broadcast_to(np.asarray(src(r), dtype=complex), r.shape).copy()
    return np.broadcast_to(np.asarray(src, dtype=complex), r.shape).copy()


def solve_radial_bvp(l: int, j_sources, L: float, N_r: int = DEFAULT_N_R, m: int = 0,
                     fd_order: int = DEFAULT_FD_ORDER_3D) -> VSHModeProfile:
    """Div-curl problem for one mode with ``b^r = 0`` at ``r = 1`` and ``r = L``.

    ``j_sources = (j^r, j^(1), j^(2))`` as callables of r or arrays on
    :func:`radial_grid`.  Eliminating ``b^(1)`` through the divergence gives

        r² b'' + 4 r b' + (2 − l(l+1)) b = l(l+1) r j^(2)

    for ``b = b^r``; then ``b^(1) = (r² b)'/(l(l+1) r)`` and
    ``b^(2) = −r j^r/(l(l+1))``.  ``j^(1)`` must equal ``−(r b^(2))'/r``, which
    holds for divergence-free currents; it is carried through, not solved for.
    """
    if l < 1:
        raise ValueError("radial div-curl problem needs l ≥ 1")
    r = radial_grid(L, N_r)
    jr, j1, j2 = (_profile(s, r) for s in j_sources)
    ll = l * (l + 1.0)
    d1, d2 = _log_matrices(r, fd_order)
    M = d2 + 3 * d1 + (2 - ll) * np.eye(N_r)
    rhs = ll * r * j2
    # homogeneous Dirichlet ends: solve for interior unknowns only
    br = np.zeros(N_r, dtype=complex)
    try:
        br[1:-1] = sla.solve(M[1:-1, 1:-1], rhs[1:-1])
    except sla.LinAlgError as exc:
        raise RuntimeError(f"radial system for l={l} is singular") from exc
    b1 = (2 * br + d1 @ br) / ll
    b2 = -r * jr / ll
    return VSHModeProfile(l, m, r, br, b1, b2, jr, j1, j2)


def closed_form_radial(l: int, L: float, r) -> np.ndarray:
    """``b^r`` for the source ``j^(2) = r`` (unit coefficient), both branches."""
    r = np.asarray(r, dtype=float)
    L = float(L)
    ll = l * (l + 1.0)
    if l == 3:
        a = L * L * np.log(L) / (L**-5 - L * L)
        return (12.0 / 7.0) * (r * r * np.log(r) + a * r * r - a * r**-5)
    X = (L * L - L ** (-2.0 - l)) / (L ** (-2.0 - l) - L ** (l - 1.0))
    Y = (L ** (l - 1.0) - L * L) / (L ** (-2.0 - l) - L ** (l - 1.0))
    return ll / (12 - ll) * (r * r + X * r ** (l - 1.0) + Y * r ** (-2.0 - l))


def multiplier3d(l: int, L: float) -> float:
    """``b^(1)(1)`` per unit ``j^(2)`` for the current ``j^(2) r Φ_lm`` on B₀.

    Equals ``(b^r)'(1)/(l(l+1))`` for the solution of :func:`closed_form_radial`.
    The same formula holds at ``l = 1``; only ``l = 3`` needs the logarithmic
    branch.
    """
    if l < 1:
        raise ValueError("multiplier3d needs l ≥ 1")
    L = float(L)
    if l == 3:
        c = L * L * np.log(L) / (L**-5 - L * L)
        return (7 * c + 1) / 7
    ll = l * (l + 1.0)
    den = L ** (-2.0 - l) - L ** (l - 1.0)
    X = (L * L - L ** (-2.0 - l)) / den
    Y = (L ** (l - 1.0) - L * L) / den
    return ((l + 1) * X - l * Y + 4) / (12 - ll)


def a3d_diagonal(l: int, L: float) -> float:
    """Multiplier of ``ψ ↦ div_S B_τ`` where the inflow current is ``n×∇ψ``.

    ``j^(2) = NORMAL_SIGN ψ`` and ``div_S(b^(1) Ψ) = −l(l+1) b^(1)``, so the
    value is ``l(l+1) m_l`` with ``m_l`` from :func:`multiplier3d`.
    """
    return l * (l + 1.0) * multiplier3d(l, L)


def potential_mode(l: int, f_minus: complex, f_plus: complex, L: float) -> tuple[complex, complex]:
    """Coefficients ``(a, c)`` of ``χ = a r^l + c r^{−l−1}`` (``χ = a + c/r`` at l = 0).

    ``∇(χ Y_lm)`` has outward normal trace ``f_minus`` on ``r = 1`` and
    ``f_plus`` on ``r = L``.  At ``l = 0`` only ``c`` is determined (``a = 0``).
    """
    L = float(L)
    if l == 0:
        return 0j, complex(f_minus)
    # -χ'(1) = f_minus, χ'(L) = f_plus
    M = np.array([[-l, l + 1.0], [l * L ** (l - 1.0), -(l + 1.0) * L ** (-l - 2.0)]])
    a, c = np.linalg.solve(M, np.array([f_minus, f_plus], dtype=complex))
    return complex(a), complex(c)


def potential_profile(l: int, m: int, a: complex, c: complex, r: np.ndarray) -> VSHModeProfile:
    r = np.asarray(r, dtype=float)
    if l == 0:
        br = -c * r**-2
        chi = c / r
    else:
        br = a * l * r ** (l - 1.0) - c * (l + 1) * r ** (-l - 2.0)
        chi = a * r**l + c * r ** (-l - 1.0)
    z = np.zeros_like(r, dtype=complex)
    b1 = z + (0 if l == 0 else chi / r)
    return VSHModeProfile(l, m, r, br + z, b1, z.copy(), z.copy(), z.copy(), z.copy())


def curl_residual(p: VSHModeProfile, fd_order: int = DEFAULT_FD_ORDER_3D) -> float:
    """Max over interior nodes of ``|∇×b − j|`` in the three VSH components."""
    if p.l == 0:
        return 0.0
    r = p.r
    d1, _ = _log_matrices(r, fd_order)
    ll = p.l * (p.l + 1.0)
    cy = -ll * p.b2 / r - p.jr
    cpsi = -(d1 @ (r * p.b2)) / r**2 - p.j1
    cphi = ((d1 @ (r * p.b1)) / r - p.br) / r - p.j2
    s = slice(1, len(r) - 1)
    return float(max(np.max(np.abs(cy[s])), np.max(np.abs(cpsi[s])), np.max(np.abs(cphi[s]))))


def divergence_residual(p: VSHModeProfile, fd_order: int = DEFAULT_FD_ORDER_3D) -> float:
    r = p.r
    d1, _ = _log_matrices(r, fd_order)
    div = (d1 @ (r * r * p.br)) / r**3 - p.l * (p.l + 1.0) * p.b1 / r
    return float(np.max(np.abs(div[1:-1])))


@dataclass(frozen=True)
class SweepDiagnostics:
    """Boundary and interior checks of one linearized sweep.

    ``trace_error`` compares the Ψ and Φ parts of the reconstructed tangential
    trace with g; ``multiplier_error`` is the largest relative gap between the
    finite-difference ``b^(1)(1)/j^(2)`` and :func:`multiplier3d`.
    """

    trace_error: float
    normal_error: float
    multiplier_error: float
    curl_residual: float
    divergence_residual: float
    max_current: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("trace_error", "normal_error", "multiplier_error",
                                              "curl_residual", "divergence_residual",
                                              "max_current")}


def linear_sweep3d(f: tuple[BoundarySH, BoundarySH], g: TangentialSH, L: float,
                   l_max: int = DEFAULT_L_MAX, N_r: int = DEFAULT_N_R,
                   fd_order: int = DEFAULT_FD_ORDER_3D, tol: float = 1e-12):
    """One linearized Grad-Rubin sweep around B₀ for perturbation data.

    ``f = (f₋, f₊)`` is the perturbation of ``B·n`` (outward normals) on the
    inner and outer spheres and ``g`` the tangential field on the inner one.
    Returns ``(profiles, diagnostics)`` with ``profiles[(l, m)]`` the
    perturbation ``W − B₀``.
    """
    f_minus, f_plus = (x.resized(l_max) for x in f)
    g = TangentialSH(g.grad.resized(l_max), g.curl.resized(l_max))
    L = float(L)
    flux = f_minus.coefficient(0, 0) + L * L * f_plus.coefficient(0, 0)
    if abs(flux) > tol * max(1.0, f_minus.max_abs(), f_plus.max_abs()):
        raise CompatibilityError(f"perturbation has net flux {abs(flux):.3e} (l = 0 sector)")
    jrho = jrho_from_g(g)
    psi, _ = surface_hodge(TangentialSH(BoundarySH.zeros(l_max), g.curl))
    phi = solve_surface_elliptic(psi, jrho, curvature=True)
    r = radial_grid(L, N_r)
    j2 = BoundarySH.zeros(l_max).coeffs
    profiles: dict[tuple[int, int], VSHModeProfile] = {}
    potentials: dict[tuple[int, int], VSHModeProfile] = {}
    mult_err = 0.0
    for l, m in f_minus.modes():
        a, c = potential_mode(l, f_minus.coefficient(l, m), f_plus.coefficient(l, m), L)
        potentials[(l, m)] = H = potential_profile(l, m, a, c, r)
        if l > 0:
            j2[_index(l, m)] = (g.grad.coefficient(l, m) - H.b1[0]) / multiplier3d(l, L)
    current = transport_monopole(jrho, phi, BoundarySH(j2))
    trace_err = 0.0
    normal_err = 0.0
    curl_res = 0.0
    div_res = 0.0
    for l, m in f_minus.modes():
        H = potentials[(l, m)]
        if l == 0:
            profiles[(l, m)] = H
            normal_err = max(normal_err, abs(-H.br[0] - f_minus.coefficient(0, 0)),
                             abs(H.br[-1] - f_plus.coefficient(0, 0)))
            continue
        jr_c = current.jr.coefficient(l, m)
        j2_c = current.j2.coefficient(l, m)
        P = solve_radial_bvp(l, (lambda x, c=jr_c: c * x**-2, None, lambda x, c=j2_c: c * x),
                             L, N_r, m, fd_order)
        if abs(j2_c) > 0:
            fd_mult = P.b1[0] / j2_c
            mult_err = max(mult_err, abs(fd_mult / multiplier3d(l, L) - 1))
        W = P + H
        profiles[(l, m)] = W
        trace_err = max(trace_err, abs(W.b1[0] - g.grad.coefficient(l, m)),
                        abs(W.b2[0] - g.curl.coefficient(l, m)))
        normal_err = max(normal_err, abs(-W.br[0] - f_minus.coefficient(l, m)),
                         abs(W.br[-1] - f_plus.coefficient(l, m)))
        curl_res = max(curl_res, curl_residual(W, fd_order))
        div_res = max(div_res, divergence_residual(W, fd_order))
    max_j = float(max(np.max(np.abs(current.jr.coeffs)), np.max(np.abs(current.j2.coeffs))))
    return profiles, SweepDiagnostics(float(trace_err), float(normal_err), float(mult_err),
                                      float(curl_res), float(div_res), max_j)


# optional quadrature transforms

@dataclass(frozen=True)
class SphereGrid:
    """Gauss-Legendre in ``cos θ`` times uniform ``φ``; exact for degree ≤ l_max products."""

    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.theta, self.phi, indexing="ij")


def sphere_grid(l_max: int) -> SphereGrid:
    n_t = l_max + 1
    x, w = roots_legendre(n_t)
    n_p = 2 * l_max + 2
    th = np.arccos(x)
    ph = 2 * np.pi * np.arange(n_p) / n_p
    return SphereGrid(th, ph, np.outer(w, np.full(n_p, 2 * np.pi / n_p)))


def sh_synthesis(c: BoundarySH, grid: SphereGrid) -> np.ndarray:
    return c.evaluate(*grid.mesh())


def sh_analysis(values: np.ndarray, grid: SphereGrid, l_max: int) -> BoundarySH:
    """Quadrature projection of samples on ``grid`` onto ``Y_lm``, ``l ≤ l_max``."""
    th, ph = grid.mesh()
    out = np.zeros((l_max + 1) ** 2, dtype=complex)
    for l in range(l_max + 1):
        for m in range(-l, l + 1):
            out[_index(l, m)] = np.sum(values * np.conj(sph_harm_y(l, m, th, ph)) * grid.weights)
    return BoundarySH(out)
