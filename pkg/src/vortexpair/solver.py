"""Energy maximizers of the travelling-pair problem.

A maximizer of ``E(w) - (1/2 lam) |w|_2^2`` over nonnegative ``w`` with
fixed impulse ``mu``, mass at most ``nu`` (and, for s <= 1/2, ``w <= cap``)
satisfies

    w = min(cap, lam (G_s w - W x2 - gamma)_+)

for a speed ``W >= 0`` and a mass multiplier ``gamma >= 0``.  The solver
iterates exactly this relation: compute the stream function, pick the
multipliers that restore the constraints, take the level set, Steiner
symmetrize and relax.  Everything runs on the normalized problem
(lam = nu = 1) on a dilated copy of the user's grid, which makes the change
of variables exact.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .functionals import penalized_energy, scale_factor, unnormalize_multipliers
from .grid import (
    ConfigurationError,
    Field,
    Grid,
    Multipliers,
    Params,
    SolutionRecord,
    TruncationError,
    impulse,
    integrate,
    l2_norm,
    support_margin,
)
from .kernel import KernelTensor, apply_Gs, build_kernel_tensor
from .steiner import even_part, steiner_symmetrize

log = logging.getLogger(__name__)

MIN_DAMPING = 2.0**-6


class InfeasibleError(RuntimeError):
    """The impulse target cannot be reached from the given stream function."""


class BracketError(RuntimeError):
    """Multiplier bisection could not bracket a root."""


class ConvergenceError(RuntimeError):
    def __init__(self, msg, record=None):
        super().__init__(msg)
        self.record = record


class CapActiveError(RuntimeError):
    def __init__(self, msg, record=None):
        super().__init__(msg)
        self.record = record


@dataclass
class SolverConfig:
    max_iter: int = 2000
    tol_residual: float = 1e-9
    tol_multiplier: float = 1e-9
    damping: float = 1.0
    cap: Optional[float] = None
    init: Union[str, Field] = "half-disk"
    seed: int = 0
    margin_cells: int = 10
    init_radius: Optional[float] = None
    mult: Optional[Multipliers] = None

    def __post_init__(self):
        if self.tol_residual <= 0 or self.tol_multiplier <= 0:
            raise ConfigurationError("tolerances must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ConfigurationError("damping must lie in (0, 1]")
        if isinstance(self.init, str) and self.init not in ("half-disk", "random-blob"):
            raise ConfigurationError(f"unknown init {self.init!r}")


# -- multipliers ---------------------------------------------------------------

def level_set(psi: np.ndarray, x2: np.ndarray, W: float, gamma: float, cap: float, lam: float = 1.0) -> np.ndarray:
    return np.minimum(cap, lam * np.maximum(psi - W * x2 - gamma, 0.0))


def _moments(psi, x2, W, gamma, cap, lam, h2):
    w = level_set(psi, x2, W, gamma, cap, lam)
    return float(np.sum(w * x2)) * h2, float(np.sum(w)) * h2


def _bisect_W(psi, x2, mu, gamma, cap, lam, h2, tol):
    """Largest-accuracy W with impulse(W) = mu; impulse is decreasing in W."""
    lo = 0.0
    if _moments(psi, x2, lo, gamma, cap, lam, h2)[0] < mu:
        raise InfeasibleError(
            f"impulse {mu:g} unattainable: level set at W=0, gamma={gamma:g} carries "
            f"only {_moments(psi, x2, lo, gamma, cap, lam, h2)[0]:g}"
        )
    hi = max(float(np.max(psi / x2)), 1e-300)
    f_lo = _moments(psi, x2, lo, gamma, cap, lam, h2)[0] - mu
    f_hi = _moments(psi, x2, hi, gamma, cap, lam, h2)[0] - mu
    tries = 0
    while f_hi > 0:
        hi *= 2.0
        f_hi = _moments(psi, x2, hi, gamma, cap, lam, h2)[0] - mu
        tries += 1
        if tries > 60:
            raise BracketError(f"no upper bracket for W (hi={hi:g})")
    for _ in range(200):
        if hi - lo <= tol * max(hi, 1e-300):
            break
        mid = 0.5 * (lo + hi)
        f_mid = _moments(psi, x2, mid, gamma, cap, lam, h2)[0] - mu
        if f_mid > 0:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    # impulse is piecewise linear in W; inside a tight bracket one secant step is exact
    if f_lo != f_hi:
        W = lo + (hi - lo) * f_lo / (f_lo - f_hi)
        W = min(max(W, lo), hi)
    else:
        W = 0.5 * (lo + hi)
    return W


def solve_multipliers(
    psi: Field,
    mu: float,
    nu: float,
    cap: float = math.inf,
    lam: float = 1.0,
    tol: float = 1e-13,
) -> Multipliers:
    """Multipliers making ``min(cap, lam (psi - W x2 - gamma)_+)`` admissible.

    Tries gamma = 0 first; if the resulting mass exceeds ``nu`` the mass
    constraint binds and gamma is bisected (with W re-solved at each gamma)
    until mass = nu.
    """
    g = psi.grid
    x2 = g.x2[None, :]
    v = psi.values
    h2 = g.h**2
    if not np.any(v > 0):
        raise InfeasibleError("stream function vanishes; no positive impulse attainable")

    W = _bisect_W(v, x2, mu, 0.0, cap, lam, h2, tol)
    mass = _moments(v, x2, W, 0.0, cap, lam, h2)[1]
    if mass <= nu or math.isinf(nu):
        return Multipliers(W, 0.0)

    # mass binds: mass(gamma) with impulse held at mu is decreasing in gamma
    lo, hi = 0.0, float(np.max(v))
    tries = 0
    while True:
        try:
            Wh = _bisect_W(v, x2, mu, hi, cap, lam, h2, tol)
            if _moments(v, x2, Wh, hi, cap, lam, h2)[1] <= nu:
                break
            lo = hi
            hi *= 2.0
        except InfeasibleError:
            break
        tries += 1
        if tries > 60:
            raise BracketError("no bracket for gamma")

    for _ in range(200):
        if hi - lo <= tol * max(hi, 1e-300):
            break
        mid = 0.5 * (lo + hi)
        try:
            Wm = _bisect_W(v, x2, mu, mid, cap, lam, h2, tol)
        except InfeasibleError:
            hi = mid
            continue
        if _moments(v, x2, Wm, mid, cap, lam, h2)[1] > nu:
            lo = mid
        else:
            hi = mid
    gamma = lo
    W = _bisect_W(v, x2, mu, gamma, cap, lam, h2, tol)
    mass = _moments(v, x2, W, gamma, cap, lam, h2)[1]
    if mass > nu * (1.0 + 1e-6):
        # W has hit zero: no level set of this stream function meets both constraints
        raise InfeasibleError(f"mass bound {nu:g} unattainable at impulse {mu:g} (least mass {mass:g})")
    return Multipliers(W, gamma)


# -- diagnostics ---------------------------------------------------------------

def residual(omega: Field, psi: Field, mult: Multipliers, p: Params, cap: Optional[float] = None) -> float:
    """Relative L2 mismatch in ``omega = min(cap, lam (psi - W x2 - gamma)_+)``."""
    n = l2_norm(omega)
    if n == 0:
        raise ValueError("residual undefined for a zero field")
    cap = p.gamma_cap if cap is None else cap
    target = level_set(psi.values, omega.grid.x2[None, :], mult.W, mult.gamma, cap, p.lam)
    return l2_norm(omega.with_values(np.abs(omega.values - target))) / n


def recenter(omega: Field) -> tuple[Field, int]:
    """Integer-cell x1 shift putting the mass centroid within one cell of 0."""
    m = float(np.sum(omega.values))
    if m == 0:
        raise ValueError("cannot recentre a zero field")
    xc = float(np.sum(omega.values * omega.grid.x1[:, None])) / m
    shift = -int(round(xc / omega.grid.h))
    return omega.shift(shift), shift


def support_circularity(omega: Field, level_fraction: float = 0.0) -> float:
    """Area of the (super)level set over that of the smallest origin-centred half disk holding it.

    Cells count as squares: the enclosing radius is the farthest cell centre
    plus half a cell diagonal, so the ratio never exceeds 1.
    """
    v = omega.values
    mask = v > level_fraction * float(v.max())
    if not mask.any():
        raise ValueError("empty level set")
    g = omega.grid
    X1, X2 = g.mesh()
    R = float(np.sqrt(X1[mask] ** 2 + X2[mask] ** 2).max()) + g.h / math.sqrt(2.0)
    area = mask.sum() * g.h**2
    return float(area / (0.5 * math.pi * R**2))


def radiality_check(omega: Field, psi: Field, bin_width: Optional[float] = None) -> float:
    """Largest within-shell relative spread of psi / x2 over the support.

    By default shells are exact: cells whose centres have the same distance
    to the origin (the grid is symmetric, so these come in mirror and
    diagonal-swap groups).  ``bin_width`` switches to annuli of that width.
    """
    g = omega.grid
    mask = omega.values > 0
    if not mask.any():
        raise ValueError("empty support")
    q = psi.values[mask] / g.mesh()[1][mask]
    if bin_width is None:
        a = 2 * np.arange(g.nx) + 1 - g.nx
        b = 2 * np.arange(g.ny) + 1
        A, B = np.meshgrid(a, b, indexing="ij")
        key = (A**2 + B**2)[mask]
    else:
        X1, X2 = g.mesh()
        key = np.floor(np.hypot(X1, X2)[mask] / bin_width).astype(np.int64)
    order = np.argsort(key, kind="stable")
    key, q = key[order], q[order]
    starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    counts = np.diff(np.r_[starts, key.size])
    worst = 0.0
    for st, c in zip(starts, counts):
        if c < 2:
            continue
        chunk = q[st:st + c]
        mean = abs(float(chunk.mean()))
        if mean > 0:
            worst = max(worst, float(chunk.std()) / mean)
    return worst


# -- iteration -----------------------------------------------------------------

@dataclass
class StepResult:
    omega: Field
    mult: Multipliers
    energy_delta: float
    residual: float
    damping: float
    energy: float


def fixed_point_step(
    omega: Field,
    tensor: KernelTensor,
    p: Params,
    cfg: SolverConfig,
    damping: Optional[float] = None,
) -> StepResult:
    """One relaxation of the Euler-Lagrange relation.

    Works in whatever units ``p`` describes; the driver calls it with
    lam = nu = 1.  ``residual`` is measured on the incoming iterate.
    """
    alpha = cfg.damping if damping is None else damping
    psi = apply_Gs(omega, tensor)
    cap = p.gamma_cap
    mult = solve_multipliers(psi, p.mu, p.nu, cap, p.lam)
    x2 = omega.grid.x2[None, :]
    cand = omega.with_values(level_set(psi.values, x2, mult.W, mult.gamma, cap, p.lam))
    res = residual(omega, psi, mult, p) if np.any(omega.values) else math.inf
    cand = even_part(steiner_symmetrize(cand))

    e0 = penalized_energy(omega, tensor, p.lam)
    while True:
        new = omega.with_values((1.0 - alpha) * omega.values + alpha * cand.values)
        e1 = penalized_energy(new, tensor, p.lam)
        if e1 >= e0 - cfg.tol_residual * abs(e0) or alpha <= MIN_DAMPING:
            break
        alpha *= 0.5
    return StepResult(new, mult, e1 - e0, res, alpha, e1)


def _half_disk(grid: Grid, radius: float) -> np.ndarray:
    X1, X2 = grid.mesh()
    return (X1**2 + X2**2 < radius**2).astype(float)


def _random_blob(grid: Grid, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    X1, X2 = grid.mesh()
    v = np.zeros(grid.shape)
    span = 0.25 * min(grid.L, grid.H)
    for _ in range(rng.integers(3, 7)):
        c1 = rng.uniform(-span, span)
        c2 = rng.uniform(0.3 * span, 1.5 * span)
        w = rng.uniform(0.15, 0.4) * span
        v += rng.uniform(0.5, 1.5) * np.exp(-((X1 - c1) ** 2 + (X2 - c2) ** 2) / (2 * w * w))
    v[v < 1e-3 * v.max()] = 0.0
    return v


def initial_field(grid: Grid, mu: float, nu: float, cfg: SolverConfig) -> Field:
    """Starting iterate on the (normalized) grid with impulse ``mu`` and mass <= ``nu``."""
    if isinstance(cfg.init, Field):
        v = cfg.init.values.copy()
    elif cfg.init == "half-disk":
        r = cfg.init_radius or 0.5 * min(grid.L, grid.H)
        # mass of the impulse-normalized half disk is 3 pi mu / (4 r)
        r = max(r, 3.0 * math.pi * mu / (4.0 * nu) * 1.01, 2.0 * grid.h)
        v = _half_disk(grid, r)
    else:
        v = _random_blob(grid, cfg.seed)
    f = Field(grid, v)
    imp = impulse(f)
    if imp <= 0:
        raise InfeasibleError("initial field has no impulse")
    f = f.with_values(v * (mu / imp))
    if integrate(f) > nu * (1 + 1e-12):
        raise InfeasibleError(
            f"initial field violates the mass bound ({integrate(f):g} > {nu:g}); spread it out"
        )
    return f


def solve_dipole(
    p: Params,
    grid: Grid,
    cfg: Optional[SolverConfig] = None,
    callback: Optional[Callable[[int, Field, Multipliers, float], None]] = None,
) -> SolutionRecord:
    """Maximize the penalized energy over the admissible class on ``grid``.

    Raises ConvergenceError, TruncationError or CapActiveError when the
    corresponding postcondition fails; the partial record is attached to
    the convergence and cap errors.
    """
    cfg = cfg or SolverConfig()
    s = p.s
    k = scale_factor(p.lam, s)
    amp = p.lam ** (-1.0 / s) / p.nu  # physical -> normalized values
    ngrid = grid.scaled(k)
    tensor = build_kernel_tensor(ngrid, s)
    mu1 = p.normalized_mu

    if isinstance(cfg.init, Field):
        if cfg.init.grid != grid:
            raise ConfigurationError("initial field must live on the solve grid")
        init_cfg = SolverConfig(**{**cfg.__dict__, "init": Field(ngrid, cfg.init.values * amp)})
    else:
        init_cfg = cfg
    omega = even_part(steiner_symmetrize(initial_field(ngrid, mu1, 1.0, init_cfg)))

    if p.cap is not None:
        cap = p.cap * amp
    elif cfg.cap is not None:
        cap = cfg.cap * amp
    elif p.needs_cap:
        cap = 10.0 * float(omega.values.max())
    else:
        cap = math.inf
    np_ = Params(s=s, mu=mu1, lam=1.0, nu=1.0, cap=None if math.isinf(cap) else cap)

    history = []
    prev_W = None
    damping = cfg.damping
    res = math.inf
    mult = cfg.mult
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        step = fixed_point_step(omega, tensor, np_, cfg, damping)
        res = step.residual
        drift = math.inf if prev_W is None else abs(step.mult.W - prev_W) / max(step.mult.W, 1e-300)
        history.append((res, step.mult.W, step.mult.gamma, step.energy, step.damping))
        if res < cfg.tol_residual and drift < cfg.tol_multiplier:
            # the incoming iterate already satisfies the relation; keep it
            mult = step.mult
            converged = True
            break
        prev_W = step.mult.W
        omega, mult = step.omega, step.mult
        # recover full steps once the energy is rising again
        damping = min(cfg.damping, step.damping * 2.0)
        if callback is not None:
            callback(it, omega, mult, res)

    omega, shift = recenter(omega)
    psi1 = apply_Gs(omega, tensor)
    mult1 = solve_multipliers(psi1, mu1, 1.0, cap, 1.0)
    res = residual(omega, psi1, mult1, np_)
    margin = support_margin(omega)

    # back to the user's units
    back = 1.0 / amp
    omega_p = Field(grid, omega.values * back)
    psi_p = Field(grid, psi1.values * p.nu * p.lam ** (1.0 / s - 1.0), "stream")
    W, gam = unnormalize_multipliers(mult1.W, mult1.gamma, p.lam, p.nu, s)
    h2 = grid.h**2
    kinetic = 0.5 * float(np.sum(omega_p.values * psi_p.values)) * h2
    energy = kinetic - float(np.sum(omega_p.values**2)) * h2 / (2.0 * p.lam)
    vmax = float(omega.values.max())
    record = SolutionRecord(
        omega=omega_p,
        psi=psi_p,
        mult=Multipliers(W, gam),
        energy=energy,
        kinetic=kinetic,
        mass=integrate(omega_p),
        impulse=impulse(omega_p),
        residual=res,
        iterations=it,
        params=p,
        grid=grid,
        diagnostics={
            "converged": converged,
            "regime": "gamma=0" if gam == 0.0 else "gamma>0",
            "normalized_mu": mu1,
            "normalized_W": mult1.W,
            "normalized_gamma": mult1.gamma,
            "normalized_energy": float(penalized_energy(omega, tensor, 1.0)),
            "cap": (cap / amp) if not math.isinf(cap) else None,
            "cap_ratio": vmax / cap if not math.isinf(cap) else 0.0,
            "margin_cells": margin,
            "recenter_shift": shift,
            "history": history,
        },
    )
    if not converged:
        raise ConvergenceError(
            f"no convergence in {cfg.max_iter} iterations (residual {res:.3e})", record
        )
    if margin < cfg.margin_cells:
        raise TruncationError(
            f"support within {margin} cells of the domain edge (need {cfg.margin_cells})"
        )
    if not math.isinf(cap) and vmax >= cap * (1.0 - 1e-3):
        raise CapActiveError(f"cap still active at convergence (max {vmax:g}, cap {cap:g})", record)
    log.info("converged in %d iterations, residual %.2e, W=%.6g", it, res, W)
    return record
