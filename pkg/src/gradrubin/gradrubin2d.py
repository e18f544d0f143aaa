"""Grad-Rubin fixed-point iteration for 2D magnetohydrostatic equilibria.

One step ``B ↦ T[B]``:

1. trace the footpoints of B and assemble ``A[B]`` on modes ``|k| ≤ K``;
2. solve the current equation for ``j₀`` (and ``J`` in ``pressure_J`` mode);
3. transport ``j₀`` along B;
4. rebuild ``W = λB_mono + ∇⊥u + J∇⊥φ`` from the current and the normal data.

The pressure follows from ``∇p = j W⊥`` with ``W⊥ = ẑ × W``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg as sla

from .current2d import (CurrentEquationSolution, OperatorMatrix, assemble_A,
                        solve_current_equation)
from .divcurl2d import DivCurlSolver, Field2D, reference_field_2d
from .elliptic2d import DEFAULT_FD_ORDER
from .fd import radial_matrices
from .geometry import Domain2D, TensorGrid2D, make_grid
from .spectral import BoundaryFourier, antiderivative, ddtheta, periodic_trapezoid
from .transport2d import ATOL, RTOL, CurrentScalar2D, footpoints, transport_scalar
from .verify import AdmissibilityReport, check_field_admissible


class ConvergenceError(RuntimeError):
    """Raised when the iteration stops contracting or runs out of steps."""

    def __init__(self, message: str, report: "IterationReport"):
        super().__init__(message)
        self.report = report


class AdmissibilityError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Discretization and iteration controls.

    ``perturbation_size`` bounds ``max|f − B̃₀·n| + max|g|`` when set.
    ``reuse_operator`` keeps ``A[B₀]`` for every step instead of reassembling.
    """

    K: int = 16
    N_r: int = 128
    tol_fixed_point: float = 1e-10
    tol_residual: float = 1e-8
    max_iter: int = 40
    damping: float = 1.0
    perturbation_size: float | None = None
    mode: Literal["pressure_J", "fixed_J"] = "pressure_J"
    J: float = 0.0
    reuse_operator: bool = False
    fd_order: int = DEFAULT_FD_ORDER
    rtol: float = RTOL
    atol: float = ATOL
    admissibility_floor: float = 1e-6

    def __post_init__(self):
        if not (self.tol_fixed_point > 0 and self.tol_residual > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.mode not in ("pressure_J", "fixed_J"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class PressureField:
    grid: TensorGrid2D
    values: np.ndarray
    loop_defect: float


@dataclass(frozen=True)
class ResidualReport:
    """Max-norm residuals; interior quantities use nodes ``1..N_r-2``."""

    divergence: float
    curl_minus_j: float
    force_balance: float
    normal_inner: float
    normal_outer: float
    tangential_inner: float
    force_location: tuple[float, float]

    def max_interior(self) -> float:
        return max(self.divergence, self.curl_minus_j, self.force_balance)

    def max_boundary(self) -> float:
        return max(self.normal_inner, self.normal_outer, self.tangential_inner)

    def as_dict(self) -> dict:
        return {"divergence": self.divergence, "curl_minus_j": self.curl_minus_j,
                "force_balance": self.force_balance, "normal_inner": self.normal_inner,
                "normal_outer": self.normal_outer, "tangential_inner": self.tangential_inner,
                "force_location": list(self.force_location)}


@dataclass(frozen=True)
class StepDiagnostics:
    lam: float
    J: float
    condition: float
    current_residual: float
    loop_defect: float | None
    j0: BoundaryFourier
    current: CurrentScalar2D
    admissibility: AdmissibilityReport


@dataclass
class IterationReport:
    """Per-iteration history plus the final residuals.

    ``contraction`` is the ratio of successive increments and is ``None`` for
    the first iteration.
    """

    iterations: list[dict] = field(default_factory=list)
    converged: bool = False
    residuals: ResidualReport | None = None
    loop_defect: float | None = None
    current: CurrentScalar2D | None = None
    message: str = ""

    @property
    def n_iterations(self) -> int:
        return len(self.iterations)

    def contraction_factor(self) -> float | None:
        """Largest ratio of successive increments above the round-off floor."""
        ratios = [it["contraction"] for it in self.iterations
                  if it["contraction"] is not None and it["prev_increment"] > 1e-8]
        return max(ratios) if ratios else None

    def as_dict(self) -> dict:
        return {"converged": self.converged, "n_iterations": self.n_iterations,
                "contraction_factor": self.contraction_factor(),
                "loop_defect": self.loop_defect, "message": self.message,
                "residuals": None if self.residuals is None else self.residuals.as_dict(),
                "iterations": [{k: v for k, v in it.items() if k != "prev_increment"}
                               for it in self.iterations]}


def _as_pair(f):
    if isinstance(f, (tuple, list)) and len(f) == 2:
        return tuple(f)
    raise ValueError("normal data must be a pair (f_inner, f_outer)")


def _nodal(x, n: int) -> np.ndarray:
    if isinstance(x, BoundaryFourier):
        return np.real(x.to_nodal(n))
    x = np.asarray(x, dtype=float)
    return np.full(n, float(x)) if x.ndim == 0 else x


class GradRubinProblem:
    """Boundary data, grid and cached solver pieces for one run."""

    def __init__(self, f, g, cfg: SolverConfig, domain: Domain2D | float = 2.0,
                 grid: TensorGrid2D | None = None):
        domain = domain if isinstance(domain, Domain2D) else Domain2D(float(domain))
        self.domain = domain
        self.cfg = cfg
        self.grid = grid or make_grid(domain, cfg.N_r, cfg.K)
        self.solver = DivCurlSolver(domain, self.grid, cfg.fd_order)
        n = self.grid.n_phi
        fm, fp = _as_pair(f)
        self.f_inner = _nodal(fm, n)
        self.f_outer = _nodal(fp, n)
        self.g = _nodal(g, n)
        self.h_minus, self.h_plus, self.lam = self.solver.boundary_potentials(
            (self.f_inner, self.f_outer))
        v = self.solver.poisson.solve(np.zeros(self.grid.shape), self.h_minus, self.h_plus)
        self.v_trace = self.solver.normal_derivative(v)
        self.mono_trace = self.solver.monopole.tangential_trace_inner()
        self.dl = self.solver.dl["inner"]
        self._A0: OperatorMatrix | None = None
        if cfg.perturbation_size is not None:
            B0 = self.initial_field()
            size = (np.max(np.abs(self.f_inner - B0.normal_trace("inner")))
                    + np.max(np.abs(self.f_outer - B0.normal_trace("outer")))
                    + np.max(np.abs(self.g)))
            if size > cfg.perturbation_size:
                raise ValueError(f"data perturbation {size:.3e} exceeds the configured "
                                 f"bound {cfg.perturbation_size:.3e}")

    def initial_field(self) -> Field2D:
        """``B₀ = x/|x|²`` on the annulus, ``∇(ln L · φ)`` on a mapped domain."""
        if self.domain.is_exact_annulus:
            return reference_field_2d(self.domain, self.grid)
        return reference_potential_field(self.solver)

    def operator(self, B: Field2D, fp) -> OperatorMatrix:
        if self.cfg.reuse_operator:
            if self._A0 is None:
                B0 = self.initial_field()
                self._A0 = assemble_A(B0, self.cfg.K, self.grid, self.solver)
            return self._A0
        return assemble_A(B, self.cfg.K, self.grid, self.solver, fp)

    def current_equation(self, A: OperatorMatrix, J: float | None = None) -> CurrentEquationSolution:
        cfg = self.cfg
        mode = cfg.mode if J is None else "fixed_J"
        return solve_current_equation(
            A, self.g, self.lam, self.v_trace, self.solver.harmonic_trace, self.mono_trace,
            mode=mode, J=cfg.J if J is None else J, f=self.f_inner, dl=self.dl,
            n=self.grid.n_phi)


def reference_potential_field(solver: DivCurlSolver) -> Field2D:
    """``∇ũ`` with ``ũ = ln L · φ``, the analogue of ``x/|x|²`` on a mapped annulus."""
    u = np.log(solver.grid.L) * solver.harmonic_potential
    ur, ut = solver.d1 @ u, ddtheta(u)
    gi = solver.chart.ginv
    return Field2D(solver.domain, solver.grid,
                   gi[..., 0, 0] * ur + gi[..., 0, 1] * ut,
                   gi[..., 1, 0] * ur + gi[..., 1, 1] * ut)


def perturbed_data(problem_domain: Domain2D | float, grid: TensorGrid2D, delta: float,
                   mode: int = 1):
    """Normal data ``B̃₀·n + δ cos(mθ)`` inside, flux-balanced outside; ``g = δ sin(mθ)``."""
    domain = (problem_domain if isinstance(problem_domain, Domain2D)
              else Domain2D(float(problem_domain)))
    solver = DivCurlSolver(domain, grid)
    B0 = (reference_field_2d(domain, grid) if domain.is_exact_annulus
          else reference_potential_field(solver))
    th = grid.phi
    fm = B0.normal_trace("inner") + delta * np.cos(mode * th)
    fp = B0.normal_trace("outer")
    imbalance = periodic_trapezoid(fm * solver.dl["inner"]) + \
        periodic_trapezoid(fp * solver.dl["outer"])
    fp = fp - imbalance / periodic_trapezoid(solver.dl["outer"])
    return (fm, fp), delta * np.sin(mode * th)


def grad_rubin_step(B: Field2D, f, g, cfg: SolverConfig,
                    problem: GradRubinProblem | None = None, J: float | None = None):
    """Apply T once; returns ``(B_next, StepDiagnostics)``.

    ``J`` overrides the configured mode with a fixed harmonic strength.
    """
    problem = problem or GradRubinProblem(f, g, cfg, B.domain, B.grid)
    adm = check_field_admissible(B, cfg.admissibility_floor)
    if not adm.passed:
        raise AdmissibilityError(
            f"field is not admissible: min|B|={adm.min_magnitude:.3e} at "
            f"(r, φ)={adm.location}, inflow {adm.min_inflow:.3e}, outflow {adm.min_outflow:.3e}")
    fp = footpoints(B, problem.grid, cfg.rtol, cfg.atol, cfg.admissibility_floor)
    A = problem.operator(B, fp)
    sol = problem.current_equation(A, J)
    jt = transport_scalar(sol.j0, fp)
    jv = np.real(jt.values)
    j = CurrentScalar2D(problem.grid, jv)
    W, lam, _ = problem.solver.solve(jv, (problem.f_inner, problem.f_outer), sol.J)
    if cfg.damping < 1:
        W = W.combine(B, cfg.damping, 1 - cfg.damping)
    diag = StepDiagnostics(lam, sol.J, sol.condition, sol.residual, sol.loop_defect,
                           sol.j0, j, adm)
    return W, diag


_radial_lu_cache: dict = {}


def _radial_integrator(r: np.ndarray, fd_order: int):
    key = (r.tobytes(), fd_order)
    if key not in _radial_lu_cache:
        d1, _ = radial_matrices(r, fd_order)
        M = np.array(d1)
        M[0] = 0.0
        M[0, 0] = 1.0
        _radial_lu_cache[key] = sla.lu_factor(M)
    return _radial_lu_cache[key]


def reconstruct_pressure(j: CurrentScalar2D, W: Field2D, anchor: tuple[int, int] = (0, 0),
                         fd_order: int = DEFAULT_FD_ORDER) -> PressureField:
    """Integrate ``∇p = j ẑ×W`` angularly along ``r = 1`` then radially.

    The covariant components of ``ẑ×W`` are ``(-√g W^θ, √g W^r)``.  ``anchor``
    is the grid node ``(i_r, i_φ)`` where ``p = 0``.  The loop defect is
    ``∮ j₀ (W·n) dℓ`` over the inner boundary, i.e. minus the circulation of
    ``∇p`` around it.
    """
    if j.grid != W.grid:
        raise ValueError("current and field live on different grids")
    grid = W.grid
    jv = np.real(j.values)
    sg = W.chart.sqrtg
    q_theta = jv * sg * W.br
    q_r = -jv * sg * W.bt
    p1, mean = antiderivative(q_theta[0])
    dl = W.domain.arclength_density("inner", grid.phi)
    defect = float(periodic_trapezoid(jv[0] * W.normal_trace("inner") * dl))
    rhs = np.array(q_r)
    rhs[0] = np.real(p1)
    p = sla.lu_solve(_radial_integrator(grid.r, fd_order), rhs)
    p = p - p[anchor]
    return PressureField(grid, p, defect)


def mhs_residuals(B: Field2D, j: CurrentScalar2D, p: PressureField, f=None, g=None,
                  fd_order: int = DEFAULT_FD_ORDER) -> ResidualReport:
    """Divergence, ``curl B − j``, force balance and boundary trace errors.

    ``f = (f₋, f₊)`` and ``g`` are optional; missing data give zero trace error.
    """
    grid = B.grid
    n = grid.n_phi
    interior = slice(1, grid.N_r - 1)
    div = B.divergence(fd_order)
    curl = B.curl(fd_order)
    jv = np.real(j.values)
    d1, _ = radial_matrices(grid.r, fd_order)
    sg = B.chart.sqrtg
    Rr = d1 @ p.values + curl * sg * B.bt
    Rt = ddtheta(p.values) - curl * sg * B.br
    gi = B.chart.ginv
    force = B.chart.to_cartesian(gi[..., 0, 0] * Rr + gi[..., 0, 1] * Rt,
                                 gi[..., 1, 0] * Rr + gi[..., 1, 1] * Rt)
    fmag = np.linalg.norm(force, axis=-1)[interior]
    i, jj = np.unravel_index(np.argmax(fmag), fmag.shape)
    if f is not None:
        fm, fp = _as_pair(f)
        en = float(np.max(np.abs(B.normal_trace("inner") - _nodal(fm, n))))
        ep = float(np.max(np.abs(B.normal_trace("outer") - _nodal(fp, n))))
    else:
        en = ep = 0.0
    et = float(np.max(np.abs(B.tangential_trace_inner() - _nodal(g, n)))) if g is not None else 0.0
    return ResidualReport(float(np.max(np.abs(div[interior]))),
                          float(np.max(np.abs((curl - jv)[interior]))),
                          float(fmag[i, jj]), en, ep, et,
                          (float(grid.r[i + 1]), float(grid.phi[jj])))


def solve_fixed_point(f, g, cfg: SolverConfig, domain: Domain2D | float = 2.0,
                      B_init: Field2D | None = None, grid: TensorGrid2D | None = None):
    """Iterate T from ``B_init`` (default the reference field).

    Returns ``(B, PressureField, IterationReport)``.  Raises
    :class:`ConvergenceError` after three consecutive increment ratios ``≥ 1``
    or when ``max_iter`` steps do not reach ``tol_fixed_point``.
    """
    problem = GradRubinProblem(f, g, cfg, domain, grid if grid is not None else
                               (B_init.grid if B_init is not None else None))
    B = B_init if B_init is not None else problem.initial_field()
    report = IterationReport()
    prev = None
    growing = 0
    fdata = (problem.f_inner, problem.f_outer)
    for it in range(cfg.max_iter):
        B_next, diag = grad_rubin_step(B, fdata, problem.g, cfg, problem)
        inc = B_next.sup_distance(B)
        ratio = None if prev is None or prev == 0 else inc / prev
        pressure = reconstruct_pressure(diag.current, B_next, fd_order=cfg.fd_order)
        res = mhs_residuals(B_next, diag.current, pressure, fdata, problem.g, cfg.fd_order)
        report.iterations.append({
            "iteration": it + 1, "increment": inc, "contraction": ratio,
            "prev_increment": prev if prev is not None else 0.0,
            "divergence": res.divergence, "curl_minus_j": res.curl_minus_j,
            "force_balance": res.force_balance, "lam": diag.lam, "J": diag.J,
            "condition": diag.condition})
        B = B_next
        report.residuals, report.loop_defect, report.current = res, pressure.loop_defect, diag.current
        if inc < cfg.tol_fixed_point:
            report.converged = True
            report.message = f"converged after {it + 1} iterations"
            return B, pressure, report
        growing = growing + 1 if ratio is not None and ratio >= 1 else 0
        if growing >= 3:
            report.message = "iteration is not contracting"
            raise ConvergenceError(report.message, report)
        prev = inc
    report.message = f"no convergence within {cfg.max_iter} iterations"
    raise ConvergenceError(report.message, report)
