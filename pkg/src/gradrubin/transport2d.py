"""Characteristics of a 2D field and transport of the scalar current.

In 2D the current is a scalar constant along field lines, ``(B·∇)j = 0``, so
``j(x) = j₀(θ*(x))`` where ``θ*`` is the inner-boundary footpoint of the
field line through ``x``.  Footpoints are found by tracing backwards from
every grid node; since admissible fields cross each circle ``r = const``
outwards, the radius serves as the integration variable and all nodes are
integrated together in one vectorised ODE solve.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.integrate import solve_ivp

from .divcurl2d import Field2D
from .fd import radial_matrices
from .geometry import TensorGrid2D
from .spectral import BoundaryFourier, ddtheta

RTOL = 1e-10
ATOL = 1e-12


class TransportError(RuntimeError):
    pass


@dataclass(frozen=True)
class FootpointMap:
    """Footpoint angle ``θ*`` and arrival parameter ``s`` at every grid node."""

    grid: TensorGrid2D
    theta: np.ndarray
    s: np.ndarray
    valid: np.ndarray


@dataclass(frozen=True)
class CurrentScalar2D:
    grid: TensorGrid2D
    values: np.ndarray

    def advection_residual(self, B: Field2D, fd_order: int = 6) -> float:
        """``max |(B·∇)j|`` over interior nodes."""
        d1, _ = radial_matrices(self.grid.r, fd_order)
        res = B.br * (d1 @ self.values) + B.bt * ddtheta(self.values)
        return float(np.max(np.abs(res[1:-1])))


@dataclass(frozen=True)
class Path:
    """Sampled characteristic: reference coordinates, image points, parameter."""

    r: np.ndarray
    theta: np.ndarray
    points: np.ndarray
    s: np.ndarray

    @property
    def exit_parameter(self) -> float:
        return float(self.s[-1])


def _check_inflow(B: Field2D, floor: float):
    bn = B.normal_trace("inner")
    scale = float(np.max(B.magnitude()))
    if np.max(bn) >= 0 or np.min(np.abs(bn)) < floor * scale:
        raise TransportError(
            f"inflow condition fails on the inner boundary: max B·n = {np.max(bn):.3e}")
    if np.min(B.br) <= 0:
        i, j = np.unravel_index(np.argmin(B.br), B.br.shape)
        raise TransportError(
            f"field is not outgoing across r = {B.grid.r[i]:.6g} at φ = {B.grid.phi[j]:.6g}")


def trace_characteristic(B: Field2D, start_angle: float,
                         direction: Literal["forward", "backward"] = "forward",
                         rtol: float = RTOL, atol: float = ATOL, s_max: float | None = None,
                         vanishing_floor: float = 1e-10, n_samples: int = 200) -> Path:
    """Integrate ``dΦ/ds = ±B(Φ)`` across the annulus.

    Forward paths start on the inner circle and stop on ``r = L``; backward
    paths start on the outer circle and stop on ``r = 1``.  The crossing is
    refined by bisection on the dense output until it is within 1e-12 in radius.
    """
    L = B.grid.L
    if direction == "forward":
        r0, target, sign = 1.0, L, 1.0
    elif direction == "backward":
        r0, target, sign = L, 1.0, -1.0
    else:
        raise ValueError(f"unknown direction {direction!r}")
    bmin = float(np.min(B.magnitude()))
    s_max = s_max or 100 * (L - 1) / max(bmin, 1e-300)

    def rhs(s, y):
        br, bt = B.evaluate(np.array(y[0]), np.array(y[1]))
        return [sign * float(br), sign * float(bt)]

    def crossing(s, y):
        return y[0] - target
    crossing.terminal = True

    def vanishing(s, y):
        br, bt = B.evaluate(np.array(y[0]), np.array(y[1]))
        ch = B.domain.chart(np.array(y[0]), np.array(y[1]))
        return float(np.linalg.norm(ch.to_cartesian(np.array(br), np.array(bt)))) - vanishing_floor
    vanishing.terminal = True

    sol =solve_ivp(rhs, (0.0, s_max), [r0, start_angle], method="DOP853", rtol=rtol,
                    atol=atol, dense_output=True, events=(crossing, vanishing))
    if sol.t_events[1].size:
        raise TransportError("field vanishes along the characteristic")
    if not sol.t_events[0].size:
        raise TransportError("characteristic failed to exit the annulus")
    lo, hi = 0.0, float(sol.t_events[0][0])
    f_hi = sol.sol(hi)[0] - target
    if abs(f_hi) > 1e-12:
        lo = float(sol.t[-2]) if len(sol.t) > 1 else 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            f_mid = sol.sol(mid)[0] - target
            if abs(f_mid) <= 1e-12:
                hi = mid
                break
            if np.sign(f_mid) == np.sign(f_hi):
                hi, f_hi = mid, f_mid
            else:
                lo = mid
    s = np.linspace(0.0, hi, n_samples)
    y = sol.sol(s)
    y[0, -1] = target
    lo_r, hi_r = 1.0 - 1e-9, L + 1e-9
    if np.min(y[0]) < lo_r or np.max(y[0]) > hi_r:
        raise TransportError("characteristic left the annulus before its exit point")
    pts = B.domain.image(y[0], y[1])
    return Path(y[0], y[1], pts, s)


def footpoints(B: Field2D, grid: TensorGrid2D | None = None, rtol: float = RTOL,
               atol: float = ATOL, tangency_floor: float = 1e-6) -> FootpointMap:
    """Backward-trace every grid node to the inner boundary."""
    grid = grid or B.grid
    _check_inflow(B, tangency_floor)
    rr, tt = grid.mesh()
    dr_rows = grid.r[1:] - 1.0
    dr = np.repeat(dr_rows, grid.n_phi)
    m = dr.size
    rows = (grid.N_r - 1, grid.n_phi)

    def rhs(tau, y):
        th = y[:m].reshape(rows)
        br, bt = B.evaluate_rows(grid.r[1:] - tau * dr_rows, th)
        br, bt = br.ravel(), bt.ravel()
        if np.min(br) <= 0:
            raise TransportError("field turned inward along a characteristic")
        return np.concatenate([-dr * bt / br, dr / br])

    y0 = np.concatenate([tt[1:].ravel(), np.zeros(m)])
    sol = solve_ivp(rhs, (0.0, 1.0), y0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise TransportError(f"footpoint integration failed: {sol.message}")
    th = np.empty(grid.shape)
    s = np.zeros(grid.shape)
    th[0] = grid.phi
    th[1:] = sol.y[:m, -1].reshape(grid.N_r - 1, grid.n_phi)
    s[1:] = sol.y[m:, -1].reshape(grid.N_r - 1, grid.n_phi)
    return FootpointMap(grid, th, s, np.ones(grid.shape, dtype=bool))


def transport_scalar(j0: BoundaryFourier, fp: FootpointMap) -> CurrentScalar2D:
    """``j(x) = j₀(θ*(x))`` by direct evaluation of the Fourier series."""
    if not np.all(fp.valid):
        raise TransportError("footpoint map has invalid nodes")
    return CurrentScalar2D(fp.grid, j0.evaluate(fp.theta))


def transport_modes(K: int, fp: FootpointMap) -> np.ndarray:
    """``e^{ikθ*}`` for ``k = -K..K`` stacked on a leading axis."""
    k = np.arange(-K, K + 1)
    return np.exp(1j * k[:, None, None] * fp.theta[None])


def _field_gradient(B: Field2D, r, th, h: float = 1e-6):
    """Central-difference ``∂b^a/∂x^c`` in reference coordinates."""
    rp, rm = np.minimum(r + h, B.grid.L), np.maximum(r - h, 1.0)
    brp, btp = B.evaluate(rp, th)
    brm, btm = B.evaluate(rm, th)
    hr = rp - rm
    brt, btt = B.evaluate(r, th + h)
    brs, bts = B.evaluate(r, th - h)
    return ((brp - brm) / hr, (brt - brs) / (2 * h), (btp - btm) / hr, (btt - bts) / (2 * h))


def flow_jacobian_check(B: Field2D, fp: FootpointMap | None = None, n_samples: int = 100,
                        n_r: int = 64, rtol: float = RTOL, atol: float = ATOL) -> float:
    """Max over sampled field lines of ``|J(ω,s)/|γ'| − B(ω)·ν(ω)|``.

    ``J(ω,s) = det[∂_sΦ, ∂_tΦ]`` is the area Jacobian of the flow map
    ``(t, s) ↦ Φ(γ(t), s)``, integrated with the variational equation, and
    ``ν`` is the unit normal pointing into the domain.  For a divergence-free
    field ``J`` does not depend on ``s``.  ``fp`` is accepted for interface
    symmetry; characteristics are sampled at equispaced footpoints.
    """
    t0 = 2 * np.pi * np.arange(n_samples) / n_samples
    L = B.grid.L
    m = n_samples

    def rhs(r, y):
        th, vr, vt = y[:m], y[m:2 * m], y[2 * m:]
        rr = np.full(m, r)
        br, bt = B.evaluate(rr, th)
        a, b, c, d = _field_gradient(B, rr, th)
        # d/ds (Φ, V) = (b, ∇b V); divide by dr/ds = b^r
        return np.concatenate([bt / br, (a * vr + b * vt) / br, (c * vr + d * vt) / br])

    y0 = np.concatenate([t0, np.zeros(m), np.ones(m)])
    r_eval = np.linspace(1.0, L, n_r)
    sol = solve_ivp(rhs, (1.0, L), y0, method="DOP853", rtol=rtol, atol=atol, t_eval=r_eval)
    if not sol.success:
        raise TransportError(f"variational integration failed: {sol.message}")
    dev = 0.0
    ch0 = B.domain.chart(np.ones(m), t0)
    speed = np.linalg.norm(ch0.Ft, axis=-1)
    br0, _ = B.evaluate(np.ones(m), t0)
    bnu = br0 / np.sqrt(ch0.ginv[:, 0, 0])
    for idx, r in enumerate(sol.t):
        th, vr, vt = sol.y[:m, idx], sol.y[m:2 * m, idx], sol.y[2 * m:, idx]
        br, bt = B.evaluate(np.full(m, r), th)
        sg = B.domain.chart(np.full(m, r), th).sqrtg
        J = sg * (br * vt - bt * vr)
        dev = max(dev, float(np.max(np.abs(J / speed - bnu))))
    return dev
