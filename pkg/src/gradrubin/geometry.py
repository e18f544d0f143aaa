"""Annular and shell domains, near-annular diffeomorphisms, normals and grids.

Everything in the 2D solver lives on the reference annulus ``1 <= r <= L`` in
polar coordinates ``(r, θ)``.  A domain is the image of that annulus under a
chart ``F(r, θ) = γ(r e_r(θ))``; for the exact annulus ``γ`` is the identity.

Orientation: boundary curves run counterclockwise in θ with unit tangent
``t = F_θ / |F_θ|``.  The outward normal of the domain is ``t`` rotated by
-π/2 on the outer boundary and by +π/2 on the inner one, so the inner
normal of the exact annulus is ``-e_r``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

Boundary = Literal["inner", "outer"]


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class AnnulusSpec:
    """Annulus ``1 < |x| < L``."""

    L: float

    def __post_init__(self):
        if not self.L > 1:
            raise GeometryError(f"outer radius must exceed 1, got {self.L}")


@dataclass(frozen=True)
class ShellSpec:
    """Spherical shell ``1 < |x| < L``."""

    L: float

    def __post_init__(self):
        if not self.L > 1:
            raise GeometryError(f"outer radius must exceed 1, got {self.L}")


def _polar(pts):
    pts = np.asarray(pts, dtype=float)
    return np.hypot(pts[..., 0], pts[..., 1]), np.arctan2(pts[..., 1], pts[..., 0])


def _unit(th):
    er = np.stack([np.cos(th), np.sin(th)], axis=-1)
    et = np.stack([-np.sin(th), np.cos(th)], axis=-1)
    return er, et


class DiffeoMap:
    """Orientation preserving map of the plane, near the identity on the annulus.

    Subclasses implement ``forward``, ``jacobian`` and ``inverse`` on arrays of
    points with trailing dimension 2.
    """

    eps: float = 0.0

    def forward(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inverse(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict:
        return {"type": type(self).__name__}

    def chart(self, r, th):
        """``F``, ``F_r`` and ``F_θ`` of the polar chart ``F(r,θ) = γ(r e_r(θ))``."""
        r = np.asarray(r, dtype=float)
        er, et = _unit(th)
        x = r[..., None] * er
        jac = self.jacobian(x)
        Fr = np.einsum("...ij,...j->...i", jac, er)
        Ft = np.einsum("...ij,...j->...i", jac, et) * r[..., None]
        return self.forward(x), Fr, Ft

    def closeness(self, L: float, n: int = 64) -> tuple[float, float]:
        """Sampled ``max‖∇γ − Id‖`` and ``max‖∇γ⁻¹ − Id‖`` over the annulus (2-norms)."""
        r, th = np.meshgrid(np.linspace(1, L, n), 2 * np.pi * np.arange(n) / n,
                            indexing="ij")
        x = r[..., None] * np.stack([np.cos(th), np.sin(th)], axis=-1)
        jac = self.jacobian(x)
        eye = np.eye(2)
        d1 = np.linalg.norm(jac - eye, ord=2, axis=(-2, -1)).max()
        d2 = np.linalg.norm(np.linalg.inv(jac) - eye, ord=2, axis=(-2, -1)).max()
        return float(d1), float(d2)


class IdentityMap(DiffeoMap):
    def forward(self, pts):
        return np.array(pts, dtype=float)

    def jacobian(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.broadcast_to(np.eye(2), pts.shape[:-1] + (2, 2)).copy()

    def inverse(self, pts):
        return np.array(pts, dtype=float)


class RotationMap(DiffeoMap):
    """Rigid rotation by ``alpha``."""

    def __init__(self, alpha: float):
        self.alpha = float(alpha)
        c, s = np.cos(alpha), np.sin(alpha)
        self._R = np.array([[c, -s], [s, c]])

    def forward(self, pts):
        return np.asarray(pts, dtype=float) @ self._R.T

    def jacobian(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.broadcast_to(self._R, pts.shape[:-1] + (2, 2)).copy()

    def inverse(self, pts):
        return np.asarray(pts, dtype=float) @ self._R

    def params(self):
        return {"type": "rotation", "alpha": self.alpha}


def _smoothstep(t):
    """Quintic smoothstep and its first two derivatives, clamped to [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    s = t**3 * (10 - 15 * t + 6 * t**2)
    ds = 30 * t**2 * (1 - t) ** 2
    d2s = 60 * t * (1 - t) * (1 - 2 * t)
    return s, ds, d2s


class RadialBumpMap(DiffeoMap):
    """``γ(r,θ) = (r + ε s(r) c(θ)) e_r(θ)`` with a smooth radial cutoff ``s``.

    ``s`` equals 1 at ``r = 1`` and 0 at ``r = L`` (``cutoff="inner"``), or the
    reverse (``cutoff="outer"``), with vanishing first and second derivatives
    at both ends.  ``c(θ) = Σ a_m cos(mθ) + b_m sin(mθ)`` is given by
    ``harmonics = {m: (a_m, b_m)}``.  The map preserves angles, so its inverse
    reduces to a scalar Newton solve along each ray.
    """

    def __init__(self, eps: float, L: float, harmonics: dict | None = None,
                 cutoff: Literal["inner", "outer"] = "inner"):
        self.eps = float(eps)
        self.L = float(L)
        self.harmonics = {int(m): tuple(map(float, ab))
                          for m, ab in (harmonics or {2: (1.0, 0.0)}).items()}
        if cutoff not in ("inner", "outer"):
            raise GeometryError(f"unknown cutoff {cutoff!r}")
        self.cutoff = cutoff
        rr = np.linspace(1, L, 401)
        R_r = 1 + self.eps * self._s(rr)[1][:, None] * self._c(np.linspace(0, 2 * np.pi, 401))[0]
        if np.min(R_r) <= 0:
            raise GeometryError("bump amplitude too large: map folds")

    def params(self):
        return {"type": "radial_bump", "eps": self.eps, "L": self.L,
                "harmonics": {str(m): list(ab) for m, ab in self.harmonics.items()},
                "cutoff": self.cutoff}

    def _s(self, r):
        t = (np.asarray(r, dtype=float) - 1) / (self.L - 1)
        s, ds, d2s = _smoothstep(t)
        h = 1 / (self.L - 1)
        if self.cutoff == "inner":
            return 1 - s, -ds * h, -d2s * h * h
        return s, ds * h, d2s * h * h

    def _c(self, th):
        th = np.asarray(th, dtype=float)
        c = np.zeros_like(th)
        dc = np.zeros_like(th)
        for m, (a, b) in self.harmonics.items():
            c += a * np.cos(m * th) + b * np.sin(m * th)
            dc += m * (-a * np.sin(m * th) + b * np.cos(m * th))
        return c, dc

    def _R(self, r, th):
        s, ds, _ = self._s(r)
        c, dc = self._c(th)
        return r + self.eps * s * c, 1 + self.eps * ds * c, self.eps * s * dc

    def forward(self, pts):
        r, th = _polar(pts)
        R = self._R(r, th)[0]
        return R[..., None] * np.stack([np.cos(th), np.sin(th)], axis=-1)

    def chart(self, r, th):
        r = np.asarray(r, dtype=float)
        R, Rr, Rt = self._R(r, th)
        er, et = _unit(th)
        F = R[..., None] * er
        Fr = Rr[..., None] * er
        Ft = Rt[..., None] * er + R[..., None] * et
        return F, Fr, Ft

    def jacobian(self, pts):
        r, th = _polar(pts)
        _, Fr, Ft = self.chart(r, th)
        er, et = _unit(th)
        return (np.einsum("...i,...j->...ij", Fr, er)
                + np.einsum("...i,...j->...ij", Ft / r[..., None], et))

    def inverse(self, pts, tol: float = 1e-12, maxiter: int = 50):
        rho, th = _polar(pts)
        r = rho.copy()
        for _ in range(maxiter):
            R, Rr, _ = self._R(r, th)
            step = (R - rho) / Rr
            r = r - step
            if np.all(np.abs(step) <= tol * np.maximum(1.0, np.abs(r))):
                break
        else:
            raise GeometryError("per-ray Newton inverse did not converge")
        return r[..., None] * np.stack([np.cos(th), np.sin(th)], axis=-1)


@dataclass(frozen=True)
class Chart:
    """Chart quantities at a set of reference points.

    ``g`` is the covariant metric in (r, θ), ``ginv`` its inverse and
    ``sqrtg`` the area density ``F_r × F_θ``.
    """

    F: np.ndarray
    Fr: np.ndarray
    Ft: np.ndarray

    @property
    def sqrtg(self):
        return self.Fr[..., 0] * self.Ft[..., 1] - self.Fr[..., 1] * self.Ft[..., 0]

    @property
    def g(self):
        grr = np.sum(self.Fr * self.Fr, axis=-1)
        grt = np.sum(self.Fr * self.Ft, axis=-1)
        gtt = np.sum(self.Ft * self.Ft, axis=-1)
        return np.stack([np.stack([grr, grt], -1), np.stack([grt, gtt], -1)], -2)

    @property
    def ginv(self):
        g = self.g
        det = self.sqrtg**2
        return np.stack([np.stack([g[..., 1, 1], -g[..., 0, 1]], -1),
                         np.stack([-g[..., 1, 0], g[..., 0, 0]], -1)], -2) / det[..., None, None]

    def to_cartesian(self, br, bt):
        """Cartesian components of the vector with contravariant ``(br, bt)``."""
        return br[..., None] * self.Fr + bt[..., None] * self.Ft

    def to_contravariant(self, v):
        """Contravariant (r, θ) components of a Cartesian vector ``v``."""
        det = self.sqrtg
        br = (v[..., 0] * self.Ft[..., 1] - v[..., 1] * self.Ft[..., 0]) / det
        bt = (self.Fr[..., 0] * v[..., 1] - self.Fr[..., 1] * v[..., 0]) / det
        return br, bt


@dataclass(frozen=True)
class Domain2D:
    """Exact annulus (``map is None``) or its image under a :class:`DiffeoMap`."""

    L: float
    map: DiffeoMap | None = field(default=None, compare=False)

    def __post_init__(self):
        AnnulusSpec(self.L)
        if self.map is not None:
            r, th = np.meshgrid(np.linspace(1, self.L, 33),
                                2 * np.pi * np.arange(64) / 64, indexing="ij")
            if np.min(self.chart(r, th).sqrtg) <= 0:
                raise GeometryError("map is not orientation preserving on the annulus")

    @property
    def is_exact_annulus(self) -> bool:
        return self.map is None

    def chart(self, r, th) -> Chart:
        r, th = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(th, dtype=float))
        if self.map is None:
            er, et = _unit(th)
            return Chart(r[..., None] * er, er.copy(), r[..., None] * et)
        return Chart(*self.map.chart(r, th))

    def boundary_radius(self, boundary: Boundary) -> float:
        if boundary == "inner":
            return 1.0
        if boundary == "outer":
            return self.L
        raise GeometryError(f"unknown boundary id {boundary!r}")

    def tangent(self, boundary: Boundary, angle) -> np.ndarray:
        """Unit counterclockwise tangent at reference angle ``angle``."""
        r = np.full(np.shape(angle), self.boundary_radius(boundary))
        Ft = self.chart(r, angle).Ft
        return Ft / np.linalg.norm(Ft, axis=-1, keepdims=True)

    def arclength_density(self, boundary: Boundary, angle) -> np.ndarray:
        r = np.full(np.shape(angle), self.boundary_radius(boundary))
        return np.linalg.norm(self.chart(r, angle).Ft, axis=-1)

    def image(self, r, th) -> np.ndarray:
        return self.chart(r, th).F


def outer_normal(domain: Domain2D, boundary: Boundary, angle) -> np.ndarray:
    """Unit outward normal of the domain at reference angle ``angle``."""
    t = domain.tangent(boundary, angle)
    rot = np.stack([t[..., 1], -t[..., 0]], axis=-1)  # t rotated by -π/2
    return rot if boundary == "outer" else -rot


def pullback_metric(gmap: DiffeoMap, point) -> np.ndarray:
    """``g_ij = ⟨dγ e_i, dγ e_j⟩`` at a point of the reference annulus."""
    jac = gmap.jacobian(np.asarray(point, dtype=float))
    if np.any(np.linalg.det(jac) <= 0):
        raise GeometryError("orientation violation: det ∇γ <= 0")
    return np.einsum("...ki,...kj->...ij", jac, jac)


def inverse_metric(gmap: DiffeoMap, point) -> np.ndarray:
    return np.linalg.inv(pullback_metric(gmap, point))


def metric_divergence(gmap: DiffeoMap, point, h: float = 1e-5) -> np.ndarray:
    """``∂_k g^{jk}`` (Cartesian reference coordinates) by central differences."""
    point = np.asarray(point, dtype=float)
    out = np.zeros(point.shape)
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        dg = (inverse_metric(gmap, point + e) - inverse_metric(gmap, point - e)) / (2 * h)
        out += dg[..., :, k]
    return out


@dataclass(frozen=True)
class TensorGrid2D:
    """Radial nodes on ``[1, L]`` times ``n_phi`` equispaced angles."""

    r: np.ndarray
    n_phi: int
    K: int

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        if np.any(np.diff(r) <= 0) or r[0] != 1.0:
            raise GeometryError("radial nodes must increase from 1")
        if self.n_phi % 2 or self.n_phi < 4 * self.K + 2:
            raise GeometryError(f"n_phi={self.n_phi} violates the aliasing rule for K={self.K}")
        r = r.copy()
        r.setflags(write=False)
        object.__setattr__(self, "r", r)

    def __hash__(self):
        return hash((self.r.tobytes(), self.n_phi, self.K))

    def __eq__(self, other):
        return (isinstance(other, TensorGrid2D) and self.n_phi == other.n_phi
                and self.K == other.K and np.array_equal(self.r, other.r))

    @property
    def N_r(self) -> int:
        return len(self.r)

    @property
    def L(self) -> float:
        return float(self.r[-1])

    @property
    def phi(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_phi) / self.n_phi

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N_r, self.n_phi)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.r, self.phi, indexing="ij")


def angular_size(K: int) -> int:
    """Smallest power of two that is at least ``4K + 2``."""
    n = 1
    while n < 4 * K + 2:
        n *= 2
    return n


def make_grid(domain: Domain2D | AnnulusSpec | float, N_r: int, K: int,
              spacing: Literal["uniform", "cosine"] = "uniform") -> TensorGrid2D:
    L = domain if isinstance(domain, (int, float)) else domain.L
    if N_r < 16:
        raise GeometryError(f"N_r must be at least 16, got {N_r}")
    if K < 1:
        raise GeometryError(f"K must be at least 1, got {K}")
    if spacing == "uniform":
        r = np.linspace(1.0, L, N_r)
    elif spacing == "cosine":
        r = 1 + (L - 1) * 0.5 * (1 - np.cos(np.pi * np.arange(N_r) / (N_r - 1)))
    else:
        raise GeometryError(f"unknown spacing {spacing!r}")
    r[0], r[-1] = 1.0, L
    return TensorGrid2D(r, angular_size(K), K)
