"""Numerical checks of kernel decay, principal symbols and field admissibility."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import j0

from .current2d import OperatorMatrix
from .divcurl2d import Field2D
from .geometry import outer_normal
from .shell3d import a3d_diagonal


@dataclass(frozen=True)
class AdmissibilityReport:
    """Grid and boundary scan of a field.

    ``min_inflow`` is ``min(-B·n)`` on the inner boundary and ``min_outflow``
    is ``min(B·n)`` on the outer one, both with outward normals, so all three
    numbers are positive for an admissible field.
    """

    min_magnitude: float
    min_inflow: float
    min_outflow: float
    location: tuple[float, float]
    passed: bool

    def as_dict(self) -> dict:
        return {"min_magnitude": self.min_magnitude, "min_inflow": self.min_inflow,
                "min_outflow": self.min_outflow, "location": list(self.location),
                "passed": self.passed}


def check_field_admissible(B: Field2D, floor: float = 1e-6) -> AdmissibilityReport:
    """Nonvanishing and inflow/outflow sign scan; ``location`` is the arg-min of ``|B|``."""
    mag = B.magnitude()
    i, j = np.unravel_index(np.argmin(mag), mag.shape)
    inflow = float(np.min(-B.normal_trace("inner")))
    outflow = float(np.min(B.normal_trace("outer")))
    m = float(mag[i, j])
    return AdmissibilityReport(m, inflow, outflow, (float(B.grid.r[i]), float(B.grid.phi[j])),
                               bool(min(m, inflow, outflow) > floor))


# kernel decay

KernelKind = Literal["one_sided_log", "symmetric_log", "power"]
MODELS = ("c/xi", "c*log(xi)/xi")


def cutoff(z) -> np.ndarray:
    """Smooth even cutoff: 1 for ``|z| ≤ 1``, 0 for ``|z| ≥ 2``."""
    t = np.clip(np.abs(np.asarray(z, dtype=float)) - 1.0, 0.0, 1.0)

    def h(s):
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
    return h(1.0 - t) / (h(1.0 - t) + h(t))


def _graded_nodes(N: int, R: float = 2.0, q: int = 10, levels: int = 40):
    """Gauss-Legendre nodes on ``[0, R]``: geometric panels toward 0, then N uniform ones."""
    h0 = R / N
    edges = np.concatenate([[0.0], h0 * 0.5 ** np.arange(levels, 0, -1), np.linspace(h0, R, N)])
    x, w = np.polynomial.legendre.leggauss(q)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w
    return nodes.ravel(), weights.ravel()


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fits of ``log|â(ξ)|`` against the decay models.

    ``residuals`` holds the RMS log-residual of each model, ``slope`` the
    plain log-log slope and ``model`` the best model.
    """

    kind: str
    xi: np.ndarray
    amplitude: np.ndarray
    model: str
    residual: float
    residuals: dict
    coefficient: float
    slope: float
    inconclusive: bool

    def __post_init__(self):
        xi = np.asarray(self.xi)
        if np.any(xi <= 0) or np.any(np.diff(xi) <= 0) or xi[-1] / xi[0] < 100:
            raise ValueError("ξ samples must be positive, increasing and span two decades")

    @property
    def discrimination(self) -> float:
        """Residual of the worse model over that of the better one."""
        r = sorted(self.residuals.values())
        return r[1] / max(r[0], 1e-300)

    def as_dict(self) -> dict:
        return {"kind": self.kind, "model": self.model, "residual": self.residual,
                "residuals": dict(self.residuals), "coefficient": self.coefficient,
                "slope": self.slope, "discrimination": self.discrimination,
                "inconclusive": self.inconclusive}


def kernel_transform(kind: KernelKind, xi: np.ndarray, N: int | None = None, p: float = 0.5,
                     chunk: int = 8) -> np.ndarray:
    """``|â(ξ)|`` of the cut-off kernel by graded composite quadrature.

    ``one_sided_log``: ``ln z · 1_{z>0}`` on the line; ``symmetric_log``:
    ``ln|z|``; ``power``: the radial kernel ``|z|^{-p}`` on the plane, whose
    transform is the Hankel integral ``2π ∫ z^{1-p} η J₀(ξz) dz``.
    ``N`` uniform panels cover ``[0, 2]``; by default enough that each panel
    spans at most 4 radians of the fastest oscillation.
    """
    xi = np.asarray(xi, dtype=float)
    if N is None:
        N = max(2**16, 1 << int(np.ceil(np.log2(2 * xi.max() / 4))))
    if N < 2**16 or N & (N - 1):
        raise ValueError("N must be a power of two ≥ 2^16")
    z, w = _graded_nodes(N)
    eta = cutoff(z)
    out = np.empty(xi.size)
    for s in range(0, xi.size, chunk):
        xs = xi[s:s + chunk, None]
        if kind == "one_sided_log":
            f = np.log(z) * eta * w
            val = np.abs(np.cos(xs * z) @ f + 1j * (np.sin(xs * z) @ f))
        elif kind == "symmetric_log":
            val = np.abs(2 * (np.cos(xs * z) @ (np.log(z) * eta * w)))
        elif kind == "power":
            if not 0 < p < 2:
                raise ValueError("power kernel needs 0 < p < 2")
            val = np.abs(2 * np.pi * (j0(xs * z) @ (z ** (1 - p) * eta * w)))
        else:
            raise ValueError(f"unknown kernel {kind!r}")
        out[s:s + chunk] = val
    return out


def kernel_ft_decay(kind: KernelKind, N: int | None = None, xi: np.ndarray | None = None,
                    p: float = 0.5, threshold: float = 0.1) -> DecayFit:
    """Sample ``|â(ξ)|`` on log-spaced ``ξ ∈ [10³, 10⁶]`` and select a decay model.

    The window starts at 10³ because the one-sided log transform behaves like
    ``√((ln ξ + γ)² + π²/4)/ξ``; the constant terms fade only logarithmically.
    """
    xi = np.geomspace(1e3, 1e6, 31) if xi is None else np.asarray(xi, dtype=float)
    amp = kernel_transform(kind, xi, N, p)
    la, lx = np.log(amp), np.log(xi)
    basis = {"c/xi": -lx, "c*log(xi)/xi": np.log(lx) - lx}
    residuals, coeffs = {}, {}
    for name, b in basis.items():
        c = np.mean(la - b)
        residuals[name] = float(np.sqrt(np.mean((la - b - c) ** 2)))
        coeffs[name] = float(np.exp(c))
    slope = float(np.polyfit(lx, la, 1)[0])
    best = min(residuals, key=residuals.get)
    return DecayFit(kind, xi, amp, best, residuals[best], residuals, coeffs[best], slope,
                    residuals[best] > threshold)


# principal symbols

@dataclass(frozen=True)
class SymbolSample:
    """Measured diagonal multiplier against the predicted principal symbol.

    ``normal_component`` is ``ν·B`` with ``ν`` the unit normal pointing into
    the domain and ``angle`` the angle between B and the boundary tangent.
    """

    k: int
    magnitude: float
    normal_component: float
    angle: float
    measured: complex
    predicted: complex
    leakage: float

    @property
    def relative_deviation(self) -> float:
        return abs(self.measured / self.predicted - 1)

    @property
    def magnitude_deviation(self) -> float:
        return abs(abs(self.measured) / abs(self.predicted) - 1)

    @property
    def phase_deviation(self) -> float:
        """``|arg m − arg p| / |arg p|`` (absolute difference if ``arg p = 0``)."""
        pa = np.angle(self.predicted)
        d = abs(np.angle(self.measured / self.predicted))
        return float(d / abs(pa)) if pa != 0 else float(d)

    def as_dict(self) -> dict:
        return {"k": self.k, "magnitude": self.magnitude,
                "normal_component": self.normal_component, "angle": self.angle,
                "measured": [self.measured.real, self.measured.imag],
                "predicted": [self.predicted.real, self.predicted.imag],
                "relative_deviation": self.relative_deviation,
                "phase_deviation": self.phase_deviation, "leakage": self.leakage}


def predicted_symbol(k: int, magnitude: float, normal_component: float, angle: float) -> complex:
    """``(ν·B) / (|k| |B| (i sgn(k) cos θ + |sin θ|))``."""
    return normal_component / (abs(k) * magnitude
                               * (1j * np.sign(k) * np.cos(angle) + abs(np.sin(angle))))


def numeric_symbol2d(A: OperatorMatrix, B: Field2D, k_range, probe_angle: float = 0.0
                     ) -> list[SymbolSample]:
    """Compare ``A_kk`` with the principal symbol at an inner-boundary probe point.

    ``A`` uses the outward normal derivative; with ``ν = −n`` the two agree
    without an extra sign.  Leakage is the off-diagonal row mass over the
    diagonal entry.
    """
    r1 = np.ones(1)
    t1 = np.array([probe_angle])
    br, bt = B.evaluate(r1, t1)
    ch = B.domain.chart(r1, t1)
    v = ch.to_cartesian(np.asarray(br), np.asarray(bt))[0]
    tan = B.domain.tangent("inner", t1)[0]
    nu = -outer_normal(B.domain, "inner", t1)[0]
    mag = float(np.linalg.norm(v))
    bn = float(v @ nu)
    angle = float(np.arctan2(abs(bn), v @ tan))
    out = []
    for k in k_range:
        k = int(k)
        if k == 0 or abs(k) > A.K:
            raise ValueError(f"mode {k} not probed by an operator with K={A.K}")
        row = A.matrix[k + A.K]
        diag = row[k + A.K]
        off = np.delete(row, k + A.K)
        leak = float(np.linalg.norm(off) / abs(diag))
        out.append(SymbolSample(k, mag, bn, angle, complex(diag),
                                predicted_symbol(k, mag, bn, angle), leak))
    return out


@dataclass(frozen=True)
class Symbol3DFit:
    """Growth of the 3D diagonal ``a_l`` in ``l``.

    ``slope`` comes from ``log|a_l| = s log l + c₀ + c₁/l + c₂/l²`` over
    ``l ≥ l_min``; ``naive_slope`` from a straight line over the same window.
    Below ``l_min`` the corrections of size ``l L^{3-l}`` are not yet small
    for moderate L (``2e-3`` at ``L = 2``, ``l = 16``).
    ``coefficient`` is ``a_l / l`` at the largest ``l``.
    """

    L: float
    l: np.ndarray
    values: np.ndarray
    slope: float
    naive_slope: float
    coefficient: float
    residual: float
    l_min: int

    def as_dict(self) -> dict:
        return {"L": self.L, "slope": self.slope, "naive_slope": self.naive_slope,
                "coefficient": self.coefficient, "residual": self.residual, "l_min": self.l_min}


def numeric_symbol3d(L: float, l_range=range(1, 33), l_min: int = 16,
                     multipliers: np.ndarray | None = None) -> Symbol3DFit:
    """Fit the growth exponent of ``a_l = l(l+1) m_l`` (linear growth predicted)."""
    ls = np.array(list(l_range))
    if ls.max() < 16:
        raise ValueError("l range must reach at least 16")
    a = (np.array([a3d_diagonal(int(l), L) for l in ls]) if multipliers is None
         else ls * (ls + 1.0) * np.asarray(multipliers, dtype=float))
    sel = ls >= max(l_min, 3)
    x, y = np.log(ls[sel]), np.log(np.abs(a[sel]))
    inv = 1.0 / ls[sel]
    M = np.column_stack([x, np.ones_like(x), inv, inv**2])
    coef, *_ = np.linalg.lstsq(M, y, rcond=None)
    resid = float(np.sqrt(np.mean((M @ coef - y) ** 2)))
    naive = float(np.polyfit(x, y, 1)[0])
    return Symbol3DFit(float(L), ls, a, float(coef[0]), naive, float(a[-1] / ls[-1]), resid,
                       int(l_min))
