import math

import numpy as np
import pytest

from vortexpair.grid import Field, Multipliers, Params, impulse, integrate, make_grid
from vortexpair.kernel import apply_Gs, build_kernel_tensor
from vortexpair.solver import (
    InfeasibleError,
    SolverConfig,
    fixed_point_step,
    level_set,
    radiality_check,
    recenter,
    residual,
    solve_dipole,
    solve_multipliers,
    support_circularity,
)
from vortexpair.grid import ConfigurationError

from conftest import half_disk


@pytest.fixture(scope="module")
def stream():
    g = make_grid(2, 2, 32, 16)
    X1, X2 = g.mesh()
    return Field(g, X2 * np.exp(-(X1**2 + X2**2)), "stream")


def moments(psi, W, gamma, cap=math.inf):
    x2 = psi.grid.x2[None, :]
    w = Field(psi.grid, level_set(psi.values, x2, W, gamma, cap))
    return impulse(w), integrate(w)


def test_multipliers_mass_free_against_scan(stream):
    mu = 0.5 * moments(stream, 0.0, 0.0)[0]
    m = solve_multipliers(stream, mu, math.inf)
    assert m.gamma == 0.0
    # brute scan: impulse is continuous and decreasing in W
    Ws = np.linspace(0, 1, 2001)
    imps = np.array([moments(stream, W, 0.0)[0] for W in Ws])
    W_scan = np.interp(-mu, -imps, Ws)
    assert m.W == pytest.approx(W_scan, abs=2 * (Ws[1] - Ws[0]))
    assert moments(stream, m.W, 0.0)[0] == pytest.approx(mu, rel=1e-10)


def test_multipliers_mass_bound_against_scan(stream):
    mu = 0.3 * moments(stream, 0.0, 0.0)[0]
    free_mass = moments(stream, solve_multipliers(stream, mu, math.inf).W, 0.0)[1]
    nu = 0.9 * free_mass
    m = solve_multipliers(stream, mu, nu)
    assert m.gamma > 0
    imp, mass = moments(stream, m.W, m.gamma)
    assert imp == pytest.approx(mu, rel=1e-9) and mass == pytest.approx(nu, rel=1e-9)
    # 200 x 200 scan of the multiplier plane
    Wmax = float(np.max(stream.values / stream.grid.x2[None, :]))
    Ws = np.linspace(0, Wmax, 200)
    gs = np.linspace(0, float(stream.values.max()), 200)
    best = min(
        (abs(i / mu - 1) + abs(ms / nu - 1), W, gm)
        for W in Ws for gm in gs for i, ms in [moments(stream, W, gm)]
    )
    assert m.W == pytest.approx(best[1], abs=3 * (Ws[1] - Ws[0]))
    assert m.gamma == pytest.approx(best[2], abs=3 * (gs[1] - gs[0]))


def test_mass_bound_below_least_mass_is_infeasible(stream):
    mu = 0.3 * moments(stream, 0.0, 0.0)[0]
    free_mass = moments(stream, solve_multipliers(stream, mu, math.inf).W, 0.0)[1]
    with pytest.raises(InfeasibleError):
        solve_multipliers(stream, mu, 0.6 * free_mass)


def test_multipliers_infeasible():
    g = make_grid(1, 1, 16, 8)
    with pytest.raises(InfeasibleError):
        solve_multipliers(g.zeros("stream"), 0.1, 1.0)


def test_unbounded_mass_means_no_mass_multiplier(stream):
    mu = 0.9 * moments(stream, 0.0, 0.0)[0]
    assert solve_multipliers(stream, mu, math.inf, math.inf).gamma == 0.0


def test_first_step_raises_energy():
    g = make_grid(3, 3, 64, 32)
    t = build_kernel_tensor(g, 0.5)
    p = Params(s=0.5, mu=0.05, cap=20.0)
    w = half_disk(g, 1.0)
    w = w.with_values(w.values * p.mu / impulse(w))
    step = fixed_point_step(w, t, p, SolverConfig())
    assert step.energy_delta > 0
    assert impulse(step.omega) == pytest.approx(p.mu, rel=1e-9)


def test_recenter():
    g = make_grid(2, 2, 32, 16)
    w = half_disk(g, 0.5).shift(10)
    out, shift = recenter(w)
    assert shift == -10
    assert np.array_equal(out.values, half_disk(g, 0.5).values)
    with pytest.raises(ValueError):
        recenter(g.zeros())


def test_residual_examples(stream):
    p = Params(s=0.5, mu=0.1)
    x2 = stream.grid.x2[None, :]
    m = Multipliers(0.1, 0.0)
    exact = Field(stream.grid, level_set(stream.values, x2, m.W, m.gamma, math.inf))
    assert residual(exact, stream, m, p) == 0.0
    doubled = exact.with_values(2 * exact.values)
    assert residual(doubled, stream, m, p) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        residual(stream.grid.zeros(), stream, m, p)


def test_circularity():
    g = make_grid(4, 4, 256, 128)
    assert support_circularity(half_disk(g, 2.0)) == pytest.approx(1.0, abs=0.02)
    X1, X2 = g.mesh()
    square = Field(g, ((np.abs(X1) < 1) & (X2 < 2)).astype(float))
    # half-width 1, height 2: area 4 in a half disk of radius sqrt(5)
    assert support_circularity(square) == pytest.approx(4 / (0.5 * math.pi * 5), abs=0.02)


def test_radiality():
    g = make_grid(2, 2, 64, 32)
    X1, X2 = g.mesh()
    r = np.hypot(X1, X2)
    w = half_disk(g, 1.5)
    radial = Field(g, X2 * np.exp(-r**2) * (1 + r), "stream")
    assert radiality_check(w, radial) < 1e-10
    skew = Field(g, X2 * (1 + 0.1 * X1), "stream")
    assert radiality_check(w, skew) > 0.01


def test_config_validation():
    with pytest.raises(ConfigurationError):
        SolverConfig(damping=0.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(init="square")


def test_reference_dipole(dipole):
    # values frozen from the first converged run on this grid
    assert dipole.mult.W == pytest.approx(1.16997e-4, rel=1e-4)
    assert dipole.mult.gamma == 0.0
    assert dipole.mass == pytest.approx(0.0108, rel=1e-2)
    assert dipole.impulse == pytest.approx(0.02, rel=1e-12)
    assert dipole.diagnostics["converged"]
    assert dipole.residual < 1e-8
    assert dipole.diagnostics["cap_ratio"] < 1
    assert dipole.omega.values.min() >= 0


def test_solution_satisfies_relation(dipole):
    t = build_kernel_tensor(dipole.grid, 0.5)
    psi = apply_Gs(dipole.omega, t)
    assert np.abs(psi.values - dipole.psi.values).max() < 1e-12 * np.abs(psi.values).max()
    assert residual(dipole.omega, psi, dipole.mult, dipole.params) < 1e-8


def test_random_start_reaches_same_speed(small_dipole):
    grid = make_grid(6, 6, 128, 64)
    other = solve_dipole(Params(s=0.5, mu=0.02), grid, SolverConfig(init="random-blob", seed=3))
    assert other.mult.W == pytest.approx(small_dipole.mult.W, rel=1e-6)
