"""The boundary operator A[B], its closed forms for B₀, and the current equation.

``A[B]`` maps inflow current data ``j₀`` on the inner circle to the outward
normal derivative ``n·∇φ`` on the inner circle, where ``Δφ = j`` with zero
Dirichlet data and ``j`` is ``j₀`` transported along the field lines of B.

Sign table (exact annulus, B₀ = x/|x|²):

===============================  ==========================================
quantity                         value on mode k
===============================  ==========================================
``closed_form_multiplier(k, L)`` ``m_k = ∂_ρ u_k(1)`` (radial derivative)
``A[B₀]`` diagonal               ``TRACE_SIGN · m_k = -m_k`` (outward normal)
===============================  ==========================================

Tangential data ``g`` follows the counterclockwise tangent.  Along it the
rotated gradient satisfies ``∇⊥w·t = -n·∇w``, so the current equation reads

    A j₀ = λ B_mono·t − n·∇v − J n·∇φ_H − g,

and a single mode of ``g`` on B₀ gives ``j₀ = ĝ_k / m_k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg as sla

from .divcurl2d import DivCurlSolver, Field2D
from .geometry import TensorGrid2D
from .spectral import BoundaryFourier
from .transport2d import FootpointMap, footpoints, transport_modes

TRACE_SIGN = -1.0
MAX_CONDITION = 1e12


class OperatorError(RuntimeError):
    pass


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense ``(2K+1)²`` matrix on modes ``k = -K..K`` (column = input mode)."""

    matrix: np.ndarray
    K: int
    fingerprint: str = ""

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def entry(self, k_out: int, k_in: int) -> complex:
        return complex(self.matrix[k_out + self.K, k_in + self.K])

    def diagonal(self) -> np.ndarray:
        return np.diag(self.matrix).copy()

    def offdiagonal_ratio(self) -> float:
        """Off-diagonal mass relative to diagonal mass (Frobenius)."""
        d = np.linalg.norm(np.diag(self.matrix))
        off = np.linalg.norm(self.matrix - np.diag(np.diag(self.matrix)))
        return float(off / d)

    def condition(self) -> float:
        return float(np.linalg.cond(self.matrix))

    def apply(self, j0: BoundaryFourier) -> BoundaryFourier:
        return BoundaryFourier(self.matrix @ j0.resized(self.K).coeffs)

    def to_csv_rows(self) -> list[str]:
        """Row-major ``re,im`` pairs."""
        return [",".join(f"{z.real:.17g},{z.imag:.17g}" for z in row) for row in self.matrix]


def closed_form_multiplier(k: int, L: float) -> float:
    """``∂_ρ u(1)`` for ``ρ²u'' + ρu' − k²u = ρ²``, ``u(1) = u(L) = 0``.

    Separate branches for the resonant modes ``k = 0`` and ``|k| = 2``.
    """
    if not L > 1:
        raise ValueError("L must exceed 1")
    a = float(L)
    k = abs(int(k))
    if k == 0:
        return (1 - a * a + 2 * np.log(a)) / (4 * np.log(a))
    if k == 2:
        return (4 * a * a * np.log(a) + (a**-2 - a * a)) / (4 * (a**-2 - a * a))
    # divide through by a^k to stay finite for large k
    num = (k - 2) * a ** (-2.0 * k) + (k + 2) - 2 * k * a ** (2.0 - k)
    den = (4 - k * k) * (1 - a ** (-2.0 * k))
    return num / den


def assemble_A(B: Field2D, K: int, grid: TensorGrid2D | None = None,
               solver: DivCurlSolver | None = None, fp: FootpointMap | None = None) -> OperatorMatrix:
    """Columns ``n·∇(Δ⁻¹ transport(e^{ikθ}))`` projected onto modes ``|k'| ≤ K``."""
    grid = grid or B.grid
    if 4 * K + 2 > grid.n_phi:
        raise OperatorError(f"grid with n_phi={grid.n_phi} cannot carry K={K}")
    solver = solver or DivCurlSolver(B.domain, grid)
    fp = fp or footpoints(B, grid)
    sources = transport_modes(K, fp)
    u = solver.poisson.solve(sources, 0.0, 0.0)
    traces = solver.normal_derivative(u)
    coeffs = np.fft.fft(traces, axis=-1) / grid.n_phi
    k = np.arange(-K, K + 1)
    mat = coeffs[:, k % grid.n_phi].T
    return OperatorMatrix(mat, K, B.fingerprint())


@dataclass(frozen=True)
class CurrentEquationSolution:
    j0: BoundaryFourier
    J: float
    lam: float
    residual: float
    condition: float
    loop_defect: float | None = None
    diagnostics: dict = field(default_factory=dict)


def _nodal(x, n):
    if isinstance(x, BoundaryFourier):
        return x.resized(min(x.K, n // 2 - 1)).to_nodal(n)
    x = np.asarray(x)
    return np.full(n, x.item()) if x.ndim == 0 else x


def _project(x, K: int, n: int) -> np.ndarray:
    return BoundaryFourier.from_nodal(_nodal(x, n), K).coeffs


def boundary_inner(a, b, dl=None, n: int = 256) -> float:
    """``∮ a b dℓ`` over the inner boundary (real parts)."""
    av, bv = np.real(_nodal(a, n)), np.real(_nodal(b, n))
    w = np.ones(n) if dl is None else _nodal(dl, n)
    return float(np.mean(av * bv * w) * 2 * np.pi)


def compute_J(f, A: OperatorMatrix, g, lam: float, v_trace, phi_trace, mono_trace=0.0,
              dl=None, n: int = 256, degeneracy: float = 1e-10) -> float:
    """Harmonic-field strength that makes the pressure single valued.

    ``J = ⟨f, A⁻¹G⟩ / ⟨f, A⁻¹H⟩`` with ``G = λB_mono·t − n·∇v − g``,
    ``H = n·∇φ_H`` and ``⟨a, b⟩ = ∮ a b dℓ`` on the inner boundary.
    """
    K = A.K
    rhs = lam * _project(mono_trace, K, n) - _project(v_trace, K, n) - _project(g, K, n)
    H = _project(phi_trace, K, n)
    lu = sla.lu_factor(A.matrix)
    AG = BoundaryFourier(sla.lu_solve(lu, rhs))
    AH = BoundaryFourier(sla.lu_solve(lu, H))
    den = boundary_inner(f, AH, dl, n)
    fnorm = np.sqrt(boundary_inner(f, f, dl, n))
    if abs(den) < degeneracy * max(fnorm, 1e-300):
        raise OperatorError(f"pressure condition is degenerate: ∮ f A⁻¹(n·∇φ) = {den:.3e}")
    return boundary_inner(f, AG, dl, n) / den


def solve_current_equation(A: OperatorMatrix, g, lam: float = 0.0, v_trace=0.0,
                           phi_trace=0.0, mono_trace=0.0,
                           mode: Literal["fixed_J", "pressure_J"] = "fixed_J", J: float = 0.0,
                           f=None, dl=None, n: int = 256) -> CurrentEquationSolution:
    """Solve ``A j₀ = λB_mono·t − n·∇v − J n·∇φ_H − g`` on the truncated basis."""
    cond = A.condition()
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise OperatorError(f"operator is ill conditioned (cond = {cond:.3e})")
    K = A.K
    if mode == "pressure_J":
        if f is None:
            raise ValueError("pressure_J mode needs the normal data f")
        J = compute_J(f, A, g, lam, v_trace, phi_trace, mono_trace, dl, n)
    elif mode != "fixed_J":
        raise ValueError(f"unknown mode {mode!r}")
    rhs = (lam * _project(mono_trace, K, n) - _project(v_trace, K, n)
           - J * _project(phi_trace, K, n) - _project(g, K, n))
    j0 = np.linalg.solve(A.matrix, rhs)
    residual = float(np.max(np.abs(A.matrix @ j0 - rhs)))
    sol = BoundaryFourier(j0)
    defect = boundary_inner(sol, f, dl, n) if f is not None else None
    return CurrentEquationSolution(sol, float(J), float(lam), residual, cond, defect)
