"""Divergence-free fields with prescribed curl and normal trace in 2D.

A field is stored by its contravariant components ``(b^r, b^θ)`` in the
reference polar coordinates of the domain chart; on the exact annulus
``b^r = B_r`` and ``b^θ = B_φ / r``.

The reconstruction is

    W = λ B_mono + ∇⊥u + J ∇⊥φ,       ∇⊥ = (-∂_y, ∂_x),

with ``B_mono = ∇ ln|x|²`` absorbing the flux through the inner boundary,
``Δu = j`` with Dirichlet data given by antiderivatives of the corrected
normal flux, and ``φ`` the harmonic function equal to 0 on the inner and 1
on the outer boundary.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.interpolate import make_interp_spline

from .elliptic2d import (DEFAULT_FD_ORDER, normal_derivative_inner, poisson_solver)
from .fd import radial_matrices
from .geometry import Domain2D, TensorGrid2D
from .spectral import BoundaryFourier, antiderivative, ddtheta, periodic_trapezoid


class CompatibilityError(ValueError):
    pass


def monopole_field(point) -> np.ndarray:
    """``∇ ln(x² + y²) = 2x/|x|²``."""
    p = np.asarray(point, dtype=float)
    r2 = np.sum(p * p, axis=-1, keepdims=True)
    if np.any(r2 == 0):
        raise ValueError("monopole field is singular at the origin")
    return 2 * p / r2


def reference_field(point) -> np.ndarray:
    """``B₀ = x/|x|²``."""
    return 0.5 * monopole_field(point)


@dataclass(frozen=True)
class GaugeConstants:
    lam: float | None = None
    J: float = 0.0


ExactField = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True, eq=False)
class Field2D:
    """Nodal vector field on a tensor grid, optionally backed by a closed form.

    ``exact(r, θ)`` (if given) returns contravariant components at arbitrary
    reference points and is used for off-grid evaluation.
    """

    domain: Domain2D
    grid: TensorGrid2D
    br: np.ndarray
    bt: np.ndarray
    exact: ExactField | None = field(default=None, repr=False)

    @classmethod
    def from_exact(cls, domain: Domain2D, grid: TensorGrid2D, fn: ExactField) -> "Field2D":
        rr, tt = grid.mesh()
        br, bt = fn(rr, tt)
        return cls(domain, grid, np.broadcast_to(br, rr.shape).astype(float),
                   np.broadcast_to(bt, rr.shape).astype(float), fn)

    @classmethod
    def from_cartesian(cls, domain: Domain2D, grid: TensorGrid2D,
                       fn: Callable[[np.ndarray], np.ndarray]) -> "Field2D":
        """Field given by Cartesian components as a function of the image point."""
        def contra(r, th):
            ch = domain.chart(r, th)
            return ch.to_contravariant(fn(ch.F))
        return cls.from_exact(domain, grid, contra)

    @cached_property
    def chart(self):
        return self.domain.chart(*self.grid.mesh())

    def cartesian(self) -> np.ndarray:
        return self.chart.to_cartesian(self.br, self.bt)

    def polar(self) -> tuple[np.ndarray, np.ndarray]:
        """Components along the polar unit vectors of the image point."""
        v = self.cartesian()
        F = self.chart.F
        rho = np.linalg.norm(F, axis=-1)
        er = F / rho[..., None]
        return (np.sum(v * er, -1), er[..., 0] * v[..., 1] - er[..., 1] * v[..., 0])

    def magnitude(self) -> np.ndarray:
        return np.linalg.norm(self.cartesian(), axis=-1)

    def sup_distance(self, other: "Field2D") -> float:
        """Nodal max over both Cartesian components."""
        return float(np.max(np.abs(self.cartesian() - other.cartesian())))

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for a in (self.br, self.bt, self.grid.r):
            h.update(np.ascontiguousarray(a, dtype=float).tobytes())
        h.update(repr((self.grid.n_phi, self.domain.L,
                       None if self.domain.map is None else self.domain.map.params())).encode())
        return h.hexdigest()[:16]

    def combine(self, other: "Field2D", a: float, b: float) -> "Field2D":
        """Nodal ``a·self + b·other`` (closed forms are dropped)."""
        return Field2D(self.domain, self.grid, a * self.br + b * other.br,
                       a * self.bt + b * other.bt)

    @cached_property
    def _interp(self):
        n = self.grid.n_phi
        cr = np.fft.rfft(self.br, axis=-1) / n
        ct = np.fft.rfft(self.bt, axis=-1) / n
        w = np.full(cr.shape[-1], 2.0)
        w[0] = 1.0
        if n % 2 == 0:
            w[-1] = 1.0
        c = np.concatenate([cr * w, ct * w], axis=-1)
        c = np.concatenate([c.real, c.imag], axis=-1)
        return make_interp_spline(self.grid.r, c, k=5, axis=0), cr.shape[-1]

    def evaluate(self, r, th) -> tuple[np.ndarray, np.ndarray]:
        """Contravariant components at arbitrary reference points."""
        r = np.asarray(r, dtype=float)
        th = np.asarray(th, dtype=float)
        if self.exact is not None:
            br, bt = self.exact(r, th)
            shape = np.broadcast_shapes(r.shape, th.shape)
            return np.broadcast_to(br, shape), np.broadcast_to(bt, shape)
        r, th = np.broadcast_arrays(r, th)
        return self._series(self._radial_coeffs(r), th)

    def evaluate_rows(self, r_rows, th) -> tuple[np.ndarray, np.ndarray]:
        """Like :meth:`evaluate` with ``r_rows[i]`` shared by the row ``th[i]``.

        The radial interpolation is done once per row, which is what makes
        tracing a whole grid at once affordable.
        """
        r_rows = np.asarray(r_rows, dtype=float)
        th = np.asarray(th, dtype=float)
        if self.exact is not None:
            return self.evaluate(np.broadcast_to(r_rows[:, None], th.shape), th)
        return self._series(self._radial_coeffs(r_rows)[:, None, :], th)

    def _radial_coeffs(self, r):
        spline, nk = self._interp
        c = spline(np.clip(r, 1.0, self.grid.L))
        half = c.shape[-1] // 2
        return c[..., :half] + 1j * c[..., half:]

    def _series(self, c, th):
        # Horner in z = e^{iθ} for both components at once
        nk = self._interp[1]
        z = np.exp(1j * th)
        c = np.moveaxis(np.broadcast_to(c, th.shape + c.shape[-1:]), -1, 0)
        acc_r = np.zeros(th.shape, dtype=complex)
        acc_t = np.zeros(th.shape, dtype=complex)
        for k in range(nk - 1, -1, -1):
            acc_r *= z
            acc_r += c[k]
            acc_t *= z
            acc_t += c[nk + k]
        return acc_r.real, acc_t.real

    # differential diagnostics
    def divergence(self, fd_order: int = DEFAULT_FD_ORDER) -> np.ndarray:
        d1, _ = radial_matrices(self.grid.r, fd_order)
        sg = self.chart.sqrtg
        return (d1 @ (sg * self.br) + ddtheta(sg * self.bt)) / sg

    def covariant(self) -> tuple[np.ndarray, np.ndarray]:
        g = self.chart.g
        return (g[..., 0, 0] * self.br + g[..., 0, 1] * self.bt,
                g[..., 1, 0] * self.br + g[..., 1, 1] * self.bt)

    def curl(self, fd_order: int = DEFAULT_FD_ORDER) -> np.ndarray:
        d1, _ = radial_matrices(self.grid.r, fd_order)
        b_r, b_t = self.covariant()
        return (d1 @ b_t - ddtheta(b_r)) / self.chart.sqrtg

    def normal_trace(self, boundary: str) -> np.ndarray:
        """``B·n`` (outward) at the boundary nodes."""
        i = 0 if boundary == "inner" else -1
        sign = -1.0 if boundary == "inner" else 1.0
        grr = self.chart.ginv[i, :, 0, 0]
        return sign * self.br[i] / np.sqrt(grr)

    def tangential_trace_inner(self) -> np.ndarray:
        """``B·t`` along the counterclockwise tangent of the inner boundary."""
        _, b_t = self.covariant()
        return b_t[0] / np.sqrt(self.chart.g[0, :, 1, 1])


def reference_field_2d(domain: Domain2D, grid: TensorGrid2D) -> Field2D:
    """``B₀ = x/|x|²`` on the domain."""
    if domain.is_exact_annulus:
        return Field2D.from_exact(domain, grid, lambda r, th: (1.0 / r, np.zeros_like(r)))
    return Field2D.from_cartesian(domain, grid, reference_field)


def spiral_field(domain: Domain2D, grid: TensorGrid2D, beta: float) -> Field2D:
    """``(e_r + β e_θ)/r`` on the exact annulus: divergence- and curl-free."""
    if not domain.is_exact_annulus:
        raise ValueError("spiral field is defined on the exact annulus")
    return Field2D.from_exact(domain, grid,
                              lambda r, th: (1.0 / r, beta / r**2 + 0 * th))


class DivCurlSolver:
    """Cached machinery for repeated div-curl solves on one domain and grid."""

    def __init__(self, domain: Domain2D, grid: TensorGrid2D, fd_order: int = DEFAULT_FD_ORDER):
        if domain.L != grid.L:
            raise ValueError("grid and domain outer radii differ")
        self.domain = domain
        self.grid = grid
        self.fd_order = fd_order
        self.poisson = poisson_solver(domain, grid, fd_order)
        self.d1 = radial_matrices(grid.r, fd_order)[0]
        rr, tt = grid.mesh()
        self.chart = domain.chart(rr, tt)
        self.dl = {"inner": domain.arclength_density("inner", grid.phi),
                   "outer": domain.arclength_density("outer", grid.phi)}

    # gauge pieces
    @cached_property
    def monopole(self) -> Field2D:
        def contra(r, th):
            ch = self.domain.chart(r, th)
            return ch.to_contravariant(monopole_field(ch.F))
        return Field2D.from_exact(self.domain, self.grid, contra)

    @cached_property
    def monopole_flux_inner(self) -> float:
        return float(periodic_trapezoid(self.monopole.normal_trace("inner") * self.dl["inner"]))

    @cached_property
    def harmonic_potential(self) -> np.ndarray:
        return self.poisson.solve(np.zeros(self.grid.shape), 0.0, 1.0)

    @cached_property
    def harmonic_field(self) -> Field2D:
        return self.perp_gradient(self.harmonic_potential)

    @cached_property
    def harmonic_trace(self) -> np.ndarray:
        """``n·∇φ`` on the inner boundary (nodal)."""
        return normal_derivative_inner(self.harmonic_potential, self.grid, self.domain,
                                       self.fd_order)

    def perp_gradient(self, u: np.ndarray) -> Field2D:
        sg = self.chart.sqrtg
        return Field2D(self.domain, self.grid, -ddtheta(u) / sg, (self.d1 @ u) / sg)

    def normal_derivative(self, u: np.ndarray) -> np.ndarray:
        return normal_derivative_inner(u, self.grid, self.domain, self.fd_order)

    # flux bookkeeping
    def boundary_potentials(self, f: tuple[BoundaryFourier, BoundaryFourier], tol: float = 1e-10):
        n = self.grid.n_phi
        fm = f[0].to_nodal(n) if isinstance(f[0], BoundaryFourier) else np.asarray(f[0])
        fp = f[1].to_nodal(n) if isinstance(f[1], BoundaryFourier) else np.asarray(f[1])
        flux_m = periodic_trapezoid(fm * self.dl["inner"])
        flux_p = periodic_trapezoid(fp * self.dl["outer"])
        scale = periodic_trapezoid(np.abs(fm) * self.dl["inner"]) + \
            periodic_trapezoid(np.abs(fp) * self.dl["outer"])
        if abs(flux_m + flux_p) > tol * max(scale, 1.0):
            raise CompatibilityError(f"total boundary flux {flux_m + flux_p:.3e} is not zero")
        lam = float(flux_m / self.monopole_flux_inner)
        mono_m = self.monopole.normal_trace("inner")
        mono_p = self.monopole.normal_trace("outer")
        dens_m = (fm - lam * mono_m) * self.dl["inner"]
        dens_p = (fp - lam * mono_p) * self.dl["outer"]
        h_minus, res_m = antiderivative(dens_m)
        h_plus, res_p = antiderivative(dens_p)
        h_plus = -h_plus
        for res in (res_m, res_p):
            if abs(res) * 2 * np.pi > tol * max(scale, 1.0):
                raise CompatibilityError(f"corrected flux has nonzero mean {res:.3e}")
        return h_minus, h_plus, lam

    def solve(self, j: np.ndarray, f, J: float = 0.0):
        """Return ``(W, λ, u)`` for current ``j`` and normal data ``f``."""
        h_minus, h_plus, lam = self.boundary_potentials(f)
        u = self.poisson.solve(np.asarray(j, dtype=float), h_minus, h_plus)
        w = self.perp_gradient(u)
        br = lam * self.monopole.br + w.br + J * self.harmonic_field.br
        bt = lam * self.monopole.bt + w.bt + J * self.harmonic_field.bt
        return Field2D(self.domain, self.grid, br, bt), lam, u


def boundary_potentials(f: tuple[BoundaryFourier, BoundaryFourier], grid: TensorGrid2D,
                        domain: Domain2D | None = None):
    """Return ``(h₋, h₊, λ)``: λ from the inner flux, h± as Fourier series."""
    domain = domain or Domain2D(grid.L)
    hm, hp, lam = DivCurlSolver(domain, grid).boundary_potentials(f)
    K = grid.n_phi // 2 - 1
    return BoundaryFourier.from_nodal(hm, K), BoundaryFourier.from_nodal(hp, K), lam


def harmonic_tangent_field(grid: TensorGrid2D, domain: Domain2D | None = None) -> Field2D:
    """``∇⊥φ`` for the harmonic ``φ`` with φ=0 inside and 1 outside."""
    return DivCurlSolver(domain or Domain2D(grid.L), grid).harmonic_field


def solve_divcurl(j, f, gauges: GaugeConstants | float = 0.0, grid: TensorGrid2D | None = None,
                  domain: Domain2D | None = None) -> Field2D:
    values = j.values if hasattr(j, "values") else np.asarray(j)
    grid = grid or j.grid
    domain = domain or Domain2D(grid.L)
    g = gauges if isinstance(gauges, GaugeConstants) else GaugeConstants(None, float(gauges))
    W, lam, _ = DivCurlSolver(domain, grid).solve(values, f, g.J)
    if g.lam is not None and abs(g.lam - lam) > 1e-10 * max(1.0, abs(lam)):
        raise CompatibilityError(f"λ={g.lam} inconsistent with the flux ratio {lam}")
    return W
