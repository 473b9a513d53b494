"""Penalized energy, admissibility and the lambda = nu = 1 normalization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .grid import Field, Grid, Params, TruncationError, integrate, impulse
from .kernel import KernelTensor, kinetic_energy


def penalized_energy(omega: Field, tensor: KernelTensor, lam: float) -> float:
    """E(omega) - (1 / 2 lam) * integral of omega^2."""
    enstrophy = float(np.sum(omega.values**2)) * omega.grid.h**2
    return kinetic_energy(omega, tensor) - enstrophy / (2.0 * lam)


@dataclass(frozen=True)
class AdmissibilityReport:
    mass: float
    impulse: float
    sup: float
    massOk: bool
    impulseOk: bool
    capOk: bool

    @property
    def ok(self) -> bool:
        return self.massOk and self.impulseOk and self.capOk


def check_admissible(omega: Field, p: Params, tol: float) -> AdmissibilityReport:
    m = integrate(omega)
    imp = impulse(omega)
    sup = float(omega.values.max()) if omega.values.size else 0.0
    return AdmissibilityReport(
        mass=m,
        impulse=imp,
        sup=sup,
        massOk=m <= p.nu * (1.0 + tol),
        impulseOk=abs(imp - p.mu) <= tol * p.mu,
        capOk=sup <= p.gamma_cap * (1.0 + tol),
    )


def scale_factor(lam: float, s: float) -> float:
    """Length factor k = lam^{1/2s} of the normalizing dilation."""
    return lam ** (1.0 / (2.0 * s))


def rescale(
    omega: Field,
    lam: float,
    nu: float,
    s: float,
    target: Optional[Grid] = None,
) -> Field:
    """Dilate to the lambda = nu = 1 problem: w(x) = lam^{-1/s}/nu * omega(x / k).

    Without ``target`` the result lives on the grid scaled by ``k`` and the
    sample array is just multiplied, so the map is exact.  With a target grid
    the dilated field is resampled bilinearly (zero outside the source
    domain).  Use ``lam -> 1/lam`` and ``nu -> 1/nu`` to invert.
    """
    k = scale_factor(lam, s)
    amp = lam ** (-1.0 / s) / nu
    src = omega.grid.scaled(k)
    if target is None:
        return Field(src, omega.values * amp, omega.kind)

    interp = RegularGridInterpolator(
        (src.x1, src.x2), omega.values, method="linear", bounds_error=False, fill_value=None
    )
    X1, X2 = target.mesh()
    inside = (np.abs(X1) <= src.L) & (X2 <= src.H)
    vals = np.where(inside, interp(np.stack([X1, X2], axis=-1)), 0.0)
    # clamp extrapolation in the half cell below the first row
    vals = np.maximum(vals, 0.0) if omega.kind == "vorticity" else vals
    if omega.values.max() > 0:
        nz = np.argwhere(omega.values > 0)
        lo = src.x1[nz[:, 0].min()] - src.h
        hi = src.x1[nz[:, 0].max()] + src.h
        top = src.x2[nz[:, 1].max()] + src.h
        if lo < -target.L or hi > target.L or top > target.H:
            raise TruncationError("rescaled support leaves the target grid")
    return Field(target, vals * amp, omega.kind)


def energy_scaling_factor(lam: float, nu: float, s: float) -> float:
    """Factor relating the normalized energy to the original one."""
    return lam ** (1.0 - 1.0 / s) / nu**2


def unnormalize_multipliers(W1: float, gamma1: float, lam: float, nu: float, s: float) -> tuple[float, float]:
    """Multipliers of the (lam, nu) problem from those of the normalized one.

    With omega = lam (psi - W x2 - gamma)_+ in original units.
    """
    k = scale_factor(lam, s)
    amp = nu * lam ** (1.0 / s - 1.0)
    return amp * k * W1, amp * gamma1
