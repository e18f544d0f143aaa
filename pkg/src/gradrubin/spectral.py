"""Truncated Fourier series on a boundary circle and angular transforms.

Functions of the reference angle are written ``f(θ) = Σ_k c_k e^{ikθ}`` with
``k = -K..K``; coefficients are stored in that order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class BoundaryFourier:
    """Coefficients ``c_k`` for ``k = -K..K`` of a function on a circle."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1 or len(c) % 2 != 1:
            raise ValueError("coefficient array must have odd length 2K+1")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def K(self) -> int:
        return (len(self.coeffs) - 1) // 2

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    @classmethod
    def zeros(cls, K: int) -> "BoundaryFourier":
        return cls(np.zeros(2 * K + 1, dtype=complex))

    @classmethod
    def from_modes(cls, K: int, modes: dict[int, complex]) -> "BoundaryFourier":
        c = np.zeros(2 * K + 1, dtype=complex)
        for k, v in modes.items():
            if abs(k) > K:
                raise ValueError(f"mode {k} exceeds cutoff {K}")
            c[k + K] = v
        return cls(c)

    @classmethod
    def constant(cls, value: float, K: int = 0) -> "BoundaryFourier":
        return cls.from_modes(K, {0: value})

    @classmethod
    def from_nodal(cls, values: np.ndarray, K: int | None = None) -> "BoundaryFourier":
        """Project equispaced samples ``values[j] = f(2πj/N)`` onto modes."""
        values = np.asarray(values)
        n = values.shape[-1]
        kmax = (n - 1) // 2 if K is None else K
        if 2 * kmax >= n:
            raise ValueError(f"{n} samples cannot resolve {kmax} modes")
        c = np.fft.fft(values) / n
        k = np.arange(-kmax, kmax + 1)
        return cls(c[k % n])

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], K: int,
                      n: int | None = None) -> "BoundaryFourier":
        n = n or max(8 * K + 8, 64)
        th = 2 * np.pi * np.arange(n) / n
        return cls.from_nodal(fn(th), K)

    def coefficient(self, k: int) -> complex:
        return complex(self.coeffs[k + self.K]) if abs(k) <= self.K else 0j

    def evaluate(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        out = np.zeros(theta.shape, dtype=complex)
        for k, c in zip(self.modes, self.coeffs):
            if c != 0:
                out += c * np.exp(1j * k * theta)
        return out.real if self.is_real() else out

    def to_nodal(self, n: int) -> np.ndarray:
        """Samples on ``n`` equispaced angles (exact for 2K < n)."""
        if 2 * self.K >= n:
            raise ValueError(f"{n} samples cannot represent {self.K} modes")
        c = np.zeros(n, dtype=complex)
        c[self.modes % n] = self.coeffs
        v = np.fft.ifft(c) * n
        return v.real if self.is_real() else v

    def is_real(self, tol: float = 1e-12) -> bool:
        c = self.coeffs
        scale = max(np.max(np.abs(c)), 1.0)
        return bool(np.max(np.abs(c - np.conj(c[::-1]))) <= tol * scale)

    def resized(self, K: int) -> "BoundaryFourier":
        c = np.zeros(2 * K + 1, dtype=complex)
        m = min(K, self.K)
        c[K - m:K + m + 1] = self.coeffs[self.K - m:self.K + m + 1]
        return BoundaryFourier(c)

    def derivative(self) -> "BoundaryFourier":
        return BoundaryFourier(1j * self.modes * self.coeffs)

    def mean(self) -> complex:
        return self.coeffs[self.K]

    def _aligned(self, other: "BoundaryFourier"):
        K = max(self.K, other.K)
        return self.resized(K).coeffs, other.resized(K).coeffs

    def __add__(self, other):
        if isinstance(other, BoundaryFourier):
            a, b = self._aligned(other)
            return BoundaryFourier(a + b)
        return self + BoundaryFourier.constant(other)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, scalar):
        return BoundaryFourier(self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return BoundaryFourier(self.coeffs / scalar)


def angular_wavenumbers(n: int) -> np.ndarray:
    """Integer wavenumbers in numpy FFT order, Nyquist kept as +n/2."""
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        k[n // 2] = n // 2
    return k


def ddtheta(values: np.ndarray, order: int = 1) -> np.ndarray:
    """Spectral θ-derivative along the last axis (Nyquist dropped for odd orders)."""
    n = values.shape[-1]
    k = angular_wavenumbers(n)
    mult = (1j * k) ** order
    if order % 2 and n % 2 == 0:
        mult[n // 2] = 0.0
    out = np.fft.ifft(np.fft.fft(values, axis=-1) * mult, axis=-1)
    return out.real if np.isrealobj(values) else out


def antiderivative(values: np.ndarray) -> tuple[np.ndarray, complex]:
    """Periodic antiderivative vanishing at θ=0, and the removed mean.

    Returns ``(F, mean)`` with ``F' = values - mean`` and ``F(0) = 0``.
    """
    n = values.shape[-1]
    c = np.fft.fft(values, axis=-1)
    mean = c[..., 0] / n
    k = angular_wavenumbers(n)
    div = np.zeros(n, dtype=complex)
    nz = k != 0
    div[nz] = 1.0 / (1j * k[nz])
    if n % 2 == 0:
        div[n // 2] = 0.0
    F = np.fft.ifft(c * div, axis=-1)
    F = F - F[..., :1]
    if np.isrealobj(values):
        return F.real, float(np.real(mean))
    return F, mean


def periodic_trapezoid(values: np.ndarray) -> np.ndarray:
    """∫_0^{2π} f dθ from equispaced samples (spectrally accurate)."""
    return values.mean(axis=-1) * 2 * np.pi
