"""Grids, fields and the record types shared across the package.

The computational domain is the truncated upper half-plane
``[-L, L] x [0, H]`` sampled at cell centres

    x1 = (i + 1/2) h - L,   x2 = (j + 1/2) h,

so no sample ever sits on the boundary ``x2 = 0``.  Field arrays are indexed
``values[i, j]`` with ``i`` running along x1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np


class ConfigurationError(ValueError):
    """Inconsistent grid, parameter or configuration input."""


class TruncationError(RuntimeError):
    """A field reaches too close to the edge of the truncated domain."""


@dataclass(frozen=True)
class Grid:
    L: float
    H: float
    nx: int
    ny: int

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.nx

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def x1(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.h - self.L

    @property
    def x2(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.h

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def scaled(self, k: float) -> "Grid":
        """Same sample counts, every length multiplied by ``k``."""
        return Grid(self.L * k, self.H * k, self.nx, self.ny)

    def zeros(self, kind: str = "vorticity") -> "Field":
        return Field(self, np.zeros(self.shape), kind)


def make_grid(L: float, H: float, nx: int, ny: int) -> Grid:
    if L <= 0 or H <= 0:
        raise ConfigurationError(f"extents must be positive, got L={L}, H={H}")
    if nx < 8 or ny < 8:
        raise ConfigurationError(f"need at least 8 cells per axis, got {nx}x{ny}")
    if not math.isclose(2.0 * L / nx, H / ny, rel_tol=1e-12):
        raise ConfigurationError(
            f"cells must be square: 2L/nx={2.0 * L / nx} but H/ny={H / ny}"
        )
    return Grid(float(L), float(H), int(nx), int(ny))


@dataclass(frozen=True, eq=False)
class Field:
    """Samples on a grid.

    ``kind`` is 'vorticity' (nonnegative half-plane profile), 'stream', or
    'scalar' for signed data such as an evolved, band-limited state.
    """

    grid: Grid
    values: np.ndarray
    kind: str = "vorticity"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ConfigurationError(f"values shape {v.shape} != grid shape {self.grid.shape}")
        if self.kind not in ("vorticity", "stream", "scalar"):
            raise ConfigurationError(f"unknown field kind {self.kind!r}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        if self.kind == "vorticity" and v.size and v.min() < 0:
            raise ValueError(f"vorticity must be nonnegative (min {v.min():.3e})")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values, self.kind)

    def shift(self, cells: int) -> "Field":
        """Integer-cell translation in x1, zero filled."""
        out = np.zeros_like(self.values)
        if cells > 0:
            out[cells:] = self.values[:-cells]
        elif cells < 0:
            out[:cells] = self.values[-cells:]
        else:
            out[:] = self.values
        return self.with_values(out)


def _sum2(a: np.ndarray) -> float:
    # rows first, then the column of row sums: fixed order, reproducible
    return float(np.sum(np.sum(a, axis=1)))


def integrate(f: Field) -> float:
    """Midpoint rule, exact for cellwise-constant fields."""
    return _sum2(f.values) * f.grid.h**2


def impulse(f: Field) -> float:
    """Half-plane impulse: the integral of x2 times the field."""
    return _sum2(f.values * f.grid.x2[None, :]) * f.grid.h**2


def l2_norm(f: Field) -> float:
    return math.sqrt(_sum2(f.values**2) * f.grid.h**2)


def support_margin(f: Field, rel: float = 0.0) -> int:
    """Distance in cells from the support to the lateral and top edges."""
    v = f.values
    thresh = rel * v.max() if v.size else 0.0
    idx = np.argwhere(v > thresh)
    if idx.size == 0:
        return min(f.grid.nx // 2, f.grid.ny)
    i0, j0 = idx.min(axis=0)
    i1, j1 = idx.max(axis=0)
    return int(min(i0, f.grid.nx - 1 - i1, f.grid.ny - 1 - j1))


@dataclass(frozen=True)
class Params:
    s: float
    mu: float
    lam: float = 1.0
    nu: float = 1.0
    cap: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.s <= 1.0:
            raise ConfigurationError(f"s must lie in (0, 1], got {self.s}")
        for name in ("mu", "lam", "nu"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.cap is not None and not self.cap > 0:
            raise ConfigurationError("cap must be positive (or None / inf to disable)")

    @property
    def gamma_cap(self) -> float:
        return math.inf if self.cap is None else float(self.cap)

    @property
    def needs_cap(self) -> bool:
        """Orders s <= 1/2 iterate in the bounded class."""
        return self.s <= 0.5

    @property
    def p_s(self) -> float:
        return math.inf if self.s <= 0.5 else 2.0

    @property
    def normalized_mu(self) -> float:
        """Impulse after rescaling to lambda = nu = 1."""
        return self.mu / self.nu * self.lam ** (1.0 / (2.0 * self.s))

    def with_(self, **kw) -> "Params":
        return replace(self, **kw)


@dataclass(frozen=True)
class Multipliers:
    W: float
    gamma: float

    def __post_init__(self):
        if self.W < 0 or self.gamma < 0:
            raise ValueError(f"multipliers must be nonnegative, got W={self.W}, gamma={self.gamma}")


@dataclass
class SolutionRecord:
    omega: Field
    psi: Field
    mult: Multipliers
    energy: float
    kinetic: float
    mass: float
    impulse: float
    residual: float
    iterations: int
    params: Params
    grid: Grid
    diagnostics: dict = field(default_factory=dict)
