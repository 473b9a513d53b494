"""The Chaplygin-Lamb dipole of the 2D Euler equations (s = 1).

Inside the disk r <= a = c0 / sqrt(lam) the stream function is

    Psi = W x2 - 2 W J1(sqrt(lam) r) x2 / (sqrt(lam) J1'(c0) r)

and outside it is the potential-flow exterior ``W a^2 x2 / r^2`` (the
factor W is what makes the two pieces join continuously at r = a).  The
vorticity is ``lam (Psi - W x2)_+`` in the upper half-plane and odd in x2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

SERIES_LIMIT = 8.0
C0_APPROX = 3.8317


def _series(z: np.ndarray, order: int) -> np.ndarray:
    # sum_k (-1)^k (z/2)^{2k+order} / (k! (k+order)!)
    half = 0.5 * z
    term = half**order / math.factorial(order)
    total = term.copy()
    q = -half * half
    for k in range(1, 60):
        term = term * q / (k * (k + order))
        total = total + term
    return total


def _integral(z: np.ndarray, order: int, n: int = 64) -> np.ndarray:
    # J_n(z) = (1/pi) int_0^pi cos(n t - z sin t) dt; the trapezoid rule is
    # spectrally accurate for this periodic integrand once n exceeds z
    n = max(n, int(2 * np.max(z)) + 32)
    t = (np.arange(n) + 0.5) * math.pi / n
    return np.cos(order * t[None, :] - z[:, None] * np.sin(t)[None, :]).mean(axis=1)


def _bessel(z, order: int):
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("argument must be nonnegative")
    flat = z.ravel()
    out = np.empty_like(flat)
    small = flat < SERIES_LIMIT
    out[small] = _series(flat[small], order)
    if np.any(~small):
        out[~small] = _integral(flat[~small], order)
    out = out.reshape(z.shape)
    return float(out) if out.ndim == 0 else out


def bessel_j0(z):
    return _bessel(z, 0)


def bessel_j1(z):
    """First-order Bessel function of the first kind, z >= 0."""
    return _bessel(z, 1)


def bessel_j1_prime(z):
    return bessel_j0(z) - bessel_j1(z) / z


@lru_cache(maxsize=None)
def first_zero_j1() -> float:
    """c0, the first positive zero of J1, refined from 3.8317."""
    return brentq(lambda z: bessel_j1(z), 3.5, 4.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class LambParams:
    W: float
    lam: float

    def __post_init__(self):
        if self.W <= 0 or self.lam <= 0:
            raise ValueError("W and lam must be positive")

    @property
    def k(self) -> float:
        return math.sqrt(self.lam)

    @property
    def radius(self) -> float:
        return first_zero_j1() / self.k

    @classmethod
    def from_impulse(cls, mu: float, lam: float) -> "LambParams":
        """Dipole with half-plane impulse ``mu``; that impulse equals pi a^2 W."""
        a = first_zero_j1() / math.sqrt(lam)
        return cls(mu / (math.pi * a * a), lam)


def lamb_stream(x1, x2, p: LambParams):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    c0 = first_zero_j1()
    r = np.hypot(x1, x2)
    kr = p.k * r
    inside = r <= p.radius
    # J1(kr)/(kr) -> 1/2 at the origin
    safe = np.where(kr > 0, kr, 1.0)
    ratio = np.where(kr > 0, bessel_j1(safe) / safe, 0.5)
    inner = p.W * x2 - 2.0 * p.W * ratio * x2 / bessel_j1_prime(c0)
    r2 = np.where(r > 0, r * r, 1.0)
    outer = p.W * c0**2 * x2 / (p.lam * r2)
    out = np.where(inside, inner, outer)
    return float(out) if out.ndim == 0 else out


def lamb_vorticity(x1, x2, p: LambParams):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    ax2 = np.abs(x2)
    upper = p.lam * np.maximum(lamb_stream(x1, ax2, p) - p.W * ax2, 0.0)
    upper = np.where(np.hypot(x1, x2) <= p.radius, upper, 0.0)
    out = np.sign(x2) * upper
    return float(out) if out.ndim == 0 else out


def lamb_field(grid, p: LambParams):
    """Upper-half-plane Lamb vorticity sampled on a grid."""
    from .grid import Field

    X1, X2 = grid.mesh()
    return Field(grid, lamb_vorticity(X1, X2, p))


def lamb_stream_field(grid, p: LambParams):
    from .grid import Field

    X1, X2 = grid.mesh()
    return Field(grid, lamb_stream(X1, X2, p), "stream")
