"""Riesz kernels on the half-plane and the stream-function operator.

For ``0 < s < 1`` the half-plane Green function is the Riesz potential with an
odd image,

    G(x, y) = c_{2,s} (|x - y|^{2s-2} - |x - y'|^{2s-2}),   y' = (y1, -y2),

and ``s = 1`` switches to the logarithmic (2D Euler) kernel
``(1/2pi) log(|x - y'| / |x - y|)``.

On a grid the operator is applied as one full-plane convolution of the odd
extension of the field with a table of cell-averaged kernel values.  Cells
near the singular diagonal are averaged by sub-cell quadrature and the self
cell by the equal-area disk, for which the integral is closed form.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from .grid import ConfigurationError, Field, Grid

NEAR_BAND = 2
SUBCELLS = 5


def riesz_coefficient(N: int, s: float) -> float:
    """c_{N,s} = pi^{-N/2} 2^{-2s} Gamma((N - 2s)/2) / Gamma(s)."""
    if N not in (2, 4):
        raise ValueError(f"dimension must be 2 or 4, got {N}")
    if not 0.0 < s < N / 2.0:
        raise ValueError(f"order s={s} outside (0, {N / 2})")
    return math.pi ** (-N / 2.0) * 2.0 ** (-2.0 * s) * math.gamma((N - 2.0 * s) / 2.0) / math.gamma(s)


def _radial(r: np.ndarray, s: float) -> np.ndarray:
    """Full-plane kernel as a function of distance."""
    if s == 1.0:
        return -np.log(r) / (2.0 * math.pi)
    return riesz_coefficient(2, s) * r ** (2.0 * s - 2.0)


def green_half_plane(x, y, s: float) -> float:
    x1, x2 = map(float, x)
    y1, y2 = map(float, y)
    if x2 <= 0 or y2 <= 0:
        raise ValueError("points must lie in the open upper half-plane")
    d = math.hypot(x1 - y1, x2 - y2)
    if d == 0.0:
        raise ZeroDivisionError("Green function is singular at x = y; use the cell-averaged tensor")
    dbar = math.hypot(x1 - y1, x2 + y2)
    if s == 1.0:
        return math.log(dbar / d) / (2.0 * math.pi)
    c = riesz_coefficient(2, s)
    return c * (d ** (2.0 * s - 2.0) - dbar ** (2.0 * s - 2.0))


def self_cell_value(h: float, s: float) -> float:
    """Kernel averaged over the disk with the same area as one cell."""
    r = h / math.sqrt(math.pi)
    if s == 1.0:
        return -(math.log(r) - 0.5) / (2.0 * math.pi)
    c = riesz_coefficient(2, s)
    return c * 2.0 * math.pi * r ** (2.0 * s) / (2.0 * s) / h**2


def kernel_table(h: float, s: float, mx: int, my: int) -> np.ndarray:
    """Cell-averaged kernel for offsets ``|di| <= mx``, ``|dj| <= my``.

    Entry ``[mx + di, my + dj]`` is the kernel at offset ``h (di, dj)``,
    averaged over the source cell inside the near band.
    """
    di = np.arange(-mx, mx + 1, dtype=float)
    dj = np.arange(-my, my + 1, dtype=float)
    D1, D2 = np.meshgrid(di, dj, indexing="ij")
    r = h * np.hypot(D1, D2)
    r[mx, my] = 1.0
    table = _radial(r, s)

    sub = (np.arange(SUBCELLS) + 0.5) / SUBCELLS - 0.5
    S1, S2 = np.meshgrid(sub, sub, indexing="ij")
    for a in range(-NEAR_BAND, NEAR_BAND + 1):
        for b in range(-NEAR_BAND, NEAR_BAND + 1):
            if (a, b) == (0, 0) or abs(a) > mx or abs(b) > my:
                continue
            rr = h * np.hypot(a + S1, b + S2)
            table[mx + a, my + b] = _radial(rr, s).mean()
    table[mx, my] = self_cell_value(h, s)
    return table


@dataclass(eq=False)
class KernelTensor:
    """Tabulated half-plane kernel for one grid and order.

    ``table[nx - 1 + di, 2 ny - 1 + dj]`` holds the cell-averaged full-plane
    kernel at offset (di, dj); the half-plane tensor between target cell
    (i, j) and source cell (k, l) is

        table[i - k, j - l] - table[i - k, j + l + 1]

    (offsets written relative to the table centre), the second term being
    the image of the source in x2 = 0.
    """

    grid: Grid
    s: float
    table: np.ndarray
    _fft_lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    _kernel_hat: np.ndarray | None = field(default=None, repr=False)

    @property
    def self_cell(self) -> float:
        return float(self.table[self.grid.nx - 1, 2 * self.grid.ny - 1])

    def entry(self, target: tuple[int, int], source: tuple[int, int]) -> float:
        i, j = target
        k, l = source
        ci, cj = self.grid.nx - 1, 2 * self.grid.ny - 1
        return float(self.table[ci + i - k, cj + j - l] - self.table[ci + i - k, cj + j + l + 1])

    @property
    def fft_shape(self) -> tuple[int, int]:
        nx, ny = self.grid.shape
        return (sfft.next_fast_len(2 * nx), sfft.next_fast_len(4 * ny))

    def kernel_hat(self) -> np.ndarray:
        # planning is the only mutation of a built tensor
        with self._fft_lock:
            if self._kernel_hat is None:
                nx, ny = self.grid.shape
                px, py = self.fft_shape
                buf = np.zeros((px, py))
                ci, cj = nx - 1, 2 * ny - 1
                # offsets di in [-(nx-1), nx-1], dj in [-(ny-1), 2ny-1], wrapped
                di = np.arange(-(nx - 1), nx)
                dj = np.arange(-(ny - 1), 2 * ny)
                buf[np.ix_(di % px, dj % py)] = self.table[np.ix_(ci + di, cj + dj)]
                self._kernel_hat = sfft.rfft2(buf)
            return self._kernel_hat


def build_kernel_tensor(grid: Grid, s: float) -> KernelTensor:
    if not 0.0 < s <= 1.0:
        raise ConfigurationError(f"order s={s} outside (0, 1]")
    table = kernel_table(grid.h, s, grid.nx - 1, 2 * grid.ny - 1)
    return KernelTensor(grid, float(s), table)


def _odd_extension(values: np.ndarray) -> np.ndarray:
    """Rows m = -ny..ny-1: the reflected, negated field below the original."""
    return np.concatenate([-values[:, ::-1], values], axis=1)


def apply_Gs(omega: Field, tensor: KernelTensor) -> Field:
    """Stream function of a half-plane vorticity field (FFT path)."""
    if omega.grid != tensor.grid:
        raise ConfigurationError("field and kernel tensor live on different grids")
    g = omega.grid
    nx, ny = g.shape
    px, py = tensor.fft_shape
    src = np.zeros((px, py))
    # extension row m sits at buffer index m (mod py)
    ext = _odd_extension(omega.values)
    src[:nx, :ny] = ext[:, ny:]
    src[:nx, py - ny:] = ext[:, :ny]
    out = sfft.irfft2(sfft.rfft2(src) * tensor.kernel_hat(), s=(px, py))
    psi = out[:nx, :ny] * g.h**2
    return Field(g, psi, "stream")


def tensor_matrix(tensor: KernelTensor) -> np.ndarray:
    """Dense (nx*ny) x (nx*ny) half-plane tensor; only sensible for small grids."""
    nx, ny = tensor.grid.shape
    ci, cj = nx - 1, 2 * ny - 1
    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    I, J = I.ravel(), J.ravel()
    di = I[:, None] - I[None, :]
    direct = tensor.table[ci + di, cj + J[:, None] - J[None, :]]
    image = tensor.table[ci + di, cj + J[:, None] + J[None, :] + 1]
    return direct - image


def apply_Gs_direct(omega: Field, tensor: KernelTensor) -> Field:
    """Quadrature oracle for :func:`apply_Gs`: explicit double sum."""
    g = omega.grid
    M = tensor_matrix(tensor)
    psi = (M @ omega.values.ravel()) * g.h**2
    return Field(g, psi.reshape(g.shape), "stream")


def kinetic_energy(omega: Field, tensor: KernelTensor) -> float:
    psi = apply_Gs(omega, tensor)
    return 0.5 * float(np.sum(omega.values * psi.values)) * omega.grid.h**2


def verify_kernel(s: float, tol: float = 1e-12, seed: int = 0) -> list[tuple[str, float, bool]]:
    """Invariant suite for one order: (check name, measured error, passed)."""
    checks = []
    if s < 1.0:
        c2, c4 = riesz_coefficient(2, s), riesz_coefficient(4, s)
        checks.append(("coefficient c2 = pi c4 / (1 - s)", abs(c2 - math.pi * c4 / (1.0 - s)) / c2, tol))
    if s == 0.5:
        checks.append(("c2 at s=1/2 equals 1/(2 pi)", abs(riesz_coefficient(2, 0.5) - 0.5 / math.pi), tol))
        checks.append(("G((0,1),(0,2)) = 1/(3 pi)", abs(green_half_plane((0, 1), (0, 2), 0.5) - 1 / (3 * math.pi)), tol))

    rng = np.random.default_rng(seed)
    pts = rng.uniform([-2.0, 0.1], [2.0, 3.0], size=(50, 2))
    sym = max(
        abs(green_half_plane(p, q, s) - green_half_plane(q, p, s)) / abs(green_half_plane(p, q, s))
        for p, q in zip(pts[:25], pts[25:])
    )
    checks.append(("symmetry G(x,y) = G(y,x)", sym, tol))
    edge = max(abs(green_half_plane(p, (p[0] + 0.3, 1e-14), s)) for p in pts)
    checks.append(("boundary vanishing y2 -> 0", edge, tol))
    positive = min(green_half_plane(p, q, s) for p, q in zip(pts[:25], pts[25:]))
    checks.append(("positivity on the half-plane", 0.0 if positive > 0 else 1.0, 0.0))

    g = Grid(2.0, 2.0, 16, 8)
    t = build_kernel_tensor(g, s)
    w = Field(g, rng.random(g.shape))
    fast = apply_Gs(w, t).values
    slow = apply_Gs_direct(w, t).values
    checks.append(("FFT path vs direct quadrature", float(np.abs(fast - slow).max() / np.abs(slow).max()), 1e-10))
    v = Field(g, rng.random(g.shape))
    a = float(np.sum(v.values * apply_Gs(w, t).values))
    b = float(np.sum(w.values * apply_Gs(v, t).values))
    checks.append(("discrete operator symmetry", abs(a - b) / abs(a), tol))
    return [(name, float(err), bool(err <= bound)) for name, err, bound in checks]
