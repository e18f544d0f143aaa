"""Poisson and Laplace solves on the annulus and on mapped near-annular domains.

The exact annulus is handled mode by mode: after an FFT in θ each Fourier
mode solves the radial Euler–Cauchy boundary value problem

    u'' + u'/r - k² u / r² = ĵ,   u(1) = a,  u(L) = b

with high-order finite differences.  Mapped domains are solved in the
reference coordinates of the chart with GMRES, preconditioned by the
annulus solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .fd import inner_trace_row, radial_matrices
from .geometry import DiffeoMap, Domain2D, TensorGrid2D, make_grid
from .spectral import BoundaryFourier, angular_wavenumbers, ddtheta

DEFAULT_FD_ORDER = 6


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModeProfile:
    """Radial profile of one Fourier mode."""

    k: int
    r: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class ScalarField2D:
    """Nodal scalar on a tensor grid (``values`` has shape ``(N_r, n_phi)``)."""

    grid: TensorGrid2D
    values: np.ndarray

    @property
    def modes(self) -> np.ndarray:
        """Angular Fourier coefficients per radius, numpy FFT ordering."""
        return np.fft.fft(self.values, axis=-1) / self.grid.n_phi

    def mode(self, k: int) -> np.ndarray:
        return self.modes[:, k % self.grid.n_phi]


def _boundary_nodal(data, n_phi: int) -> np.ndarray:
    if isinstance(data, BoundaryFourier):
        return data.to_nodal(n_phi)
    data = np.asarray(data)
    if data.ndim == 0:
        return np.full(n_phi, data.item())
    return data


class PolarPoissonSolver:
    """Per-mode solver for ``Δu = s`` on the exact annulus with Dirichlet data."""

    def __init__(self, grid: TensorGrid2D, fd_order: int = DEFAULT_FD_ORDER):
        self.grid = grid
        self.fd_order = fd_order
        self.d1, self.d2 = radial_matrices(grid.r, fd_order)
        self.trace_row = inner_trace_row(grid.r, fd_order)
        self._lu: dict[int, tuple] = {}

    def mode_matrix(self, k: int) -> np.ndarray:
        r = self.grid.r
        m = self.d2 + self.d1 / r[:, None] - np.diag(k * k / r**2)
        m[0] = 0.0
        m[-1] = 0.0
        m[0, 0] = m[-1, -1] = 1.0
        return m

    def _factor(self, k: int):
        k = abs(int(k))
        if k not in self._lu:
            m = self.mode_matrix(k)
            lu = sla.lu_factor(m)
            if not np.all(np.isfinite(lu[0])) or np.min(np.abs(np.diag(lu[0]))) == 0:
                raise SolverError(f"singular radial system for mode {k}")
            self._lu[k] = lu
        return self._lu[k]

    def solve_mode(self, k: int, source: np.ndarray, a, b) -> np.ndarray:
        """Radial profile(s); ``source`` has radial axis first."""
        rhs = np.array(source, dtype=complex if np.iscomplexobj(source) or np.iscomplexobj(a)
                       or np.iscomplexobj(b) else float)
        rhs[0] = a
        rhs[-1] = b
        return sla.lu_solve(self._factor(k), rhs)

    def solve(self, source: np.ndarray, h_minus=0.0, h_plus=0.0) -> np.ndarray:
        """Nodal solution; ``source`` may carry leading batch axes."""
        source = np.asarray(source)
        n = self.grid.n_phi
        hm = np.broadcast_to(_boundary_nodal(h_minus, n), source.shape[:-2] + (n,))
        hp = np.broadcast_to(_boundary_nodal(h_plus, n), source.shape[:-2] + (n,))
        real = not (np.iscomplexobj(source) or np.iscomplexobj(hm) or np.iscomplexobj(hp))
        S = np.fft.fft(source, axis=-1)
        Hm = np.fft.fft(hm, axis=-1)
        Hp = np.fft.fft(hp, axis=-1)
        batch = S.shape[:-2]
        S = S.reshape((-1,) + S.shape[-2:])
        Hm = Hm.reshape(-1, n)
        Hp = Hp.reshape(-1, n)
        U = np.empty_like(S)
        for j, k in enumerate(angular_wavenumbers(n)):
            U[:, :, j] = self.solve_mode(int(k), S[:, :, j].T, Hm[:, j], Hp[:, j]).T
        u = np.fft.ifft(U, axis=-1).reshape(batch + S.shape[-2:])
        return u.real if real else u

    def radial_derivative(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("ij,...jk->...ik", self.d1, u)

    def inner_dr(self, u: np.ndarray) -> np.ndarray:
        """``∂u/∂r`` at ``r = 1`` by the one-sided trace stencil."""
        return np.einsum("j,...jk->...k", self.trace_row, u)


class MappedPoissonSolver:
    """Poisson solve on the image of the annulus under a chart.

    Solves ``∂_a(√g g^{ab} ∂_b v) = √g f`` in reference coordinates, which is
    ``Δu = f`` pulled back.  With ``volume_weighted=False`` the weight is
    dropped on both sides, giving ``∂_a(g^{ab} ∂_b v) = f``.
    """

    def __init__(self, domain: Domain2D, grid: TensorGrid2D,
                 fd_order: int = DEFAULT_FD_ORDER, volume_weighted: bool = True,
                 rtol: float = 1e-12, maxiter: int = 5):
        self.domain = domain
        self.grid = grid
        self.fd_order = fd_order
        self.rtol = rtol
        self.maxiter = maxiter
        self.polar = PolarPoissonSolver(grid, fd_order)
        rr, tt = grid.mesh()
        ch = domain.chart(rr, tt)
        w = ch.sqrtg if volume_weighted else np.ones(grid.shape)
        gi = ch.ginv
        self.weight = w
        self.a_rr = w * gi[..., 0, 0]
        self.a_rt = w * gi[..., 0, 1]
        self.a_tt = w * gi[..., 1, 1]
        d1 = self.polar.d1
        self.b_r = d1 @ self.a_rr + ddtheta(self.a_rt)
        self.b_t = d1 @ self.a_rt + ddtheta(self.a_tt)
        self.residuals: list[float] = []

    def apply(self, v: np.ndarray) -> np.ndarray:
        d1, d2 = self.polar.d1, self.polar.d2
        vr = d1 @ v
        out = (self.a_rr * (d2 @ v) + self.b_r * vr + self.a_tt * ddtheta(v, 2)
               + self.b_t * ddtheta(v) + 2 * self.a_rt * ddtheta(vr))
        out[0] = v[0]
        out[-1] = v[-1]
        return out

    def _precondition(self, y: np.ndarray) -> np.ndarray:
        r = self.grid.r[:, None]
        return self.polar.solve(y / r, y[0], y[-1])

    def solve(self, source: np.ndarray, h_minus=0.0, h_plus=0.0) -> np.ndarray:
        source = np.asarray(source)
        if source.ndim > 2:
            return np.stack([self.solve(s, h_minus, h_plus) for s in source])
        n = self.grid.n_phi
        hm = _boundary_nodal(h_minus, n)
        hp = _boundary_nodal(h_plus, n)
        dtype = complex if (np.iscomplexobj(source) or np.iscomplexobj(hm)
                            or np.iscomplexobj(hp)) else float
        rhs = (self.weight * source).astype(dtype)
        rhs[0] = hm
        rhs[-1] = hp
        shape = self.grid.shape
        size = shape[0] * shape[1]
        # left preconditioning: the polar solve maps residuals to solution units,
        # so the stopping test is not limited by the O(N²) row scaling
        def pa(x):
            return self._precondition(self.apply(x.reshape(shape))).ravel()
        A = spla.LinearOperator((size, size), dtype=dtype, matvec=pa)
        b = self._precondition(rhs).ravel()
        x, info = spla.gmres(A, b, x0=b.copy(), rtol=self.rtol, atol=0.0,
                             restart=60, maxiter=self.maxiter)
        res = np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1e-300)
        self.residuals.append(float(res))
        # info > 0 only means rtol was not met; the residual bar is what matters
        if info < 0 or res > 1e-10:
            raise SolverError(f"variable-coefficient solve stalled: relative residual {res:.3e}")
        return x.reshape(shape)

    def radial_derivative(self, u):
        return self.polar.radial_derivative(u)

    def inner_dr(self, u):
        return self.polar.inner_dr(u)


def poisson_solver(domain: Domain2D, grid: TensorGrid2D, fd_order: int = DEFAULT_FD_ORDER):
    if domain.is_exact_annulus:
        return PolarPoissonSolver(grid, fd_order)
    return MappedPoissonSolver(domain, grid, fd_order)


def solve_poisson_mode(k: int, source_profile, bc: tuple[complex, complex], L: float,
                       N_r: int, fd_order: int = DEFAULT_FD_ORDER) -> ModeProfile:
    """Radial Euler–Cauchy BVP ``ρ²u'' + ρu' − k²u = ρ²ĵ`` with Dirichlet ends."""
    if N_r < 16:
        raise ValueError(f"N_r must be at least 16, got {N_r}")
    grid = make_grid(L, N_r, 1)
    r = grid.r
    src = source_profile(r) if callable(source_profile) else np.broadcast_to(source_profile, r.shape)
    solver = PolarPoissonSolver(grid, fd_order)
    return ModeProfile(k, r, solver.solve_mode(k, np.asarray(src, dtype=complex), bc[0], bc[1]))


def solve_poisson(source, dirichlet=(0.0, 0.0), grid: TensorGrid2D | None = None,
                  fd_order: int = DEFAULT_FD_ORDER) -> ScalarField2D:
    """``Δu = source`` on the exact annulus with ``u = h∓`` on the inner/outer circle."""
    values = source.values if hasattr(source, "values") else np.asarray(source)
    grid = grid or source.grid
    u = PolarPoissonSolver(grid, fd_order).solve(values, *dirichlet)
    return ScalarField2D(grid, u)


def harmonic_extension(h_minus, h_plus, grid: TensorGrid2D,
                       domain: Domain2D | None = None,
                       fd_order: int = DEFAULT_FD_ORDER) -> ScalarField2D:
    domain = domain or Domain2D(grid.L)
    solver = poisson_solver(domain, grid, fd_order)
    return ScalarField2D(grid, solver.solve(np.zeros(grid.shape), h_minus, h_plus))


def solve_variable_coeff(source, gmap: DiffeoMap, dirichlet=(0.0, 0.0),
                         grid: TensorGrid2D | None = None, fd_order: int = DEFAULT_FD_ORDER,
                         volume_weighted: bool = True) -> ScalarField2D:
    """Poisson solve on ``γ(annulus)`` written on the reference grid."""
    values = source.values if hasattr(source, "values") else np.asarray(source)
    grid = grid or source.grid
    solver = MappedPoissonSolver(Domain2D(grid.L, gmap), grid, fd_order, volume_weighted)
    return ScalarField2D(grid, solver.solve(values, *dirichlet))


def normal_derivative_inner(u: np.ndarray, grid: TensorGrid2D, domain: Domain2D | None = None,
                            fd_order: int = DEFAULT_FD_ORDER) -> np.ndarray:
    """Outward normal derivative ``n·∇u`` on the inner boundary, nodal in θ.

    The outward normal there points into the hole, so on the exact annulus
    this is ``-∂u/∂r``.  Leading batch axes of ``u`` are kept.
    """
    ur = np.einsum("j,...jk->...k", inner_trace_row(grid.r, fd_order), u)
    if domain is None or domain.is_exact_annulus:
        return -ur
    gi = domain.chart(np.ones(grid.n_phi), grid.phi).ginv
    ut = ddtheta(u[..., 0, :])
    return -(gi[..., 0, 0] * ur + gi[..., 0, 1] * ut) / np.sqrt(gi[..., 0, 0])


def neumann_trace_inner(u: ScalarField2D, domain: Domain2D | None = None,
                        K: int | None = None, fd_order: int = DEFAULT_FD_ORDER) -> BoundaryFourier:
    """Fourier coefficients of ``n·∇u`` on the inner boundary (outward normal)."""
    nodal = normal_derivative_inner(u.values, u.grid, domain, fd_order)
    return BoundaryFourier.from_nodal(nodal, K)
