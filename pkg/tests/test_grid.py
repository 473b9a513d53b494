import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vortexpair.grid import (
    ConfigurationError,
    Field,
    Multipliers,
    Params,
    impulse,
    integrate,
    l2_norm,
    make_grid,
    support_margin,
)

from conftest import half_disk


def test_spacing_examples():
    assert make_grid(2, 2, 64, 32).h == 0.0625
    assert make_grid(4, 2, 256, 64).h == 0.03125


@pytest.mark.parametrize(
    "args",
    [(1, 1, 16, 16), (0, 1, 16, 8), (1, -1, 16, 8), (1, 1, 4, 2)],
)
def test_invalid_grids(args):
    with pytest.raises(ConfigurationError):
        make_grid(*args)


def test_cell_centres_are_interior():
    g = make_grid(2, 2, 64, 32)
    assert g.x2.min() == pytest.approx(g.h / 2)
    assert np.all(g.x2 > 0)
    assert g.x1[0] == pytest.approx(-2 + g.h / 2)
    assert np.allclose(g.x1, -g.x1[::-1])


def test_rectangle_mass_and_impulse():
    g = make_grid(2, 2, 64, 32)
    X1, X2 = g.mesh()
    box = Field(g, ((np.abs(X1) < 1) & (X2 < 1)).astype(float))
    assert integrate(box) == pytest.approx(2.0, abs=1e-12)
    assert impulse(box) == pytest.approx(1.0, abs=1e-12)
    assert integrate(g.zeros()) == 0.0


def test_linear_profile_impulse_second_order():
    errs = []
    for n in (32, 64, 128):
        g = make_grid(1, 1, 2 * n, n)
        X1, X2 = g.mesh()
        f = Field(g, X2 * (X2 < 1))
        errs.append(abs(impulse(f) - 2.0 / 3.0))
    assert errs[-1] < 1e-4
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_half_disk_area_converges():
    errs = []
    for n in (64, 128, 256):
        g = make_grid(2, 2, 2 * n, n)
        errs.append(abs(integrate(half_disk(g, 1.0)) - math.pi / 2))
    assert errs[-1] < errs[0]
    assert errs[-1] < 5e-3


def test_vertical_translation_adds_tau_mass():
    g = make_grid(2, 2, 64, 32)
    f = half_disk(g, 0.5, (0.0, 0.6))
    tau_cells = 5
    shifted = np.zeros(g.shape)
    shifted[:, tau_cells:] = f.values[:, :-tau_cells]
    tau = tau_cells * g.h
    assert impulse(Field(g, shifted)) == pytest.approx(impulse(f) + tau * integrate(f), rel=1e-12)


def test_vorticity_must_be_nonnegative_and_finite():
    g = make_grid(1, 1, 16, 8)
    v = np.zeros(g.shape)
    v[3, 3] = -1e-3
    with pytest.raises(ValueError):
        Field(g, v)
    v[3, 3] = np.nan
    with pytest.raises(ValueError):
        Field(g, v, "stream")
    Field(g, -np.ones(g.shape), "stream")


def test_fields_are_read_only():
    g = make_grid(1, 1, 16, 8)
    f = g.zeros()
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


def test_params_and_multipliers():
    p = Params(s=0.5, mu=0.02)
    assert p.needs_cap and p.p_s == math.inf and p.gamma_cap == math.inf
    assert Params(s=0.75, mu=1).p_s == 2.0
    assert Params(s=0.5, mu=0.02, lam=4.0, nu=2.0).normalized_mu == pytest.approx(0.02 / 2 * 4.0)
    for bad in (dict(s=0.0, mu=1), dict(s=1.2, mu=1), dict(s=0.5, mu=0), dict(s=0.5, mu=1, lam=-1)):
        with pytest.raises(ConfigurationError):
            Params(**bad)
    with pytest.raises(ValueError):
        Multipliers(-1.0, 0.0)


def test_support_margin():
    g = make_grid(2, 2, 64, 32)
    f = half_disk(g, 0.5)
    idx = np.argwhere(f.values > 0)
    # radius 0.5 = 8 cells around the centre of a 64-cell row, 8 cells of 32 in height
    assert idx[:, 0].min() == 24 and idx[:, 0].max() == 39 and idx[:, 1].max() == 7
    assert support_margin(f) == 24


small_fields = st.integers(min_value=0, max_value=2**32 - 1)


@settings(max_examples=30, deadline=None)
@given(seed=small_fields, shift=st.integers(-5, 5), a=st.floats(0.1, 10), b=st.floats(0.1, 10))
def test_quadratures_linear_and_shift_invariant(seed, shift, a, b):
    g = make_grid(2, 2, 32, 16)
    rng = np.random.default_rng(seed)
    u = np.zeros(g.shape)
    w = np.zeros(g.shape)
    u[8:24, :10] = rng.random((16, 10))
    w[8:24, :10] = rng.random((16, 10))
    fu, fw = Field(g, u), Field(g, w)
    comb = Field(g, a * u + b * w)
    assert integrate(comb) == pytest.approx(a * integrate(fu) + b * integrate(fw), rel=1e-12)
    assert impulse(comb) == pytest.approx(a * impulse(fu) + b * impulse(fw), rel=1e-12)
    assert integrate(fu.shift(shift)) == pytest.approx(integrate(fu), rel=1e-13)
    assert impulse(fu.shift(shift)) == pytest.approx(impulse(fu), rel=1e-13)
    assert impulse(fu) <= g.H * integrate(fu)
    assert l2_norm(fu) >= 0


def test_reductions_are_reproducible():
    g = make_grid(2, 2, 64, 32)
    v = np.random.default_rng(1).random(g.shape)
    assert integrate(Field(g, v)) == integrate(Field(g, v.copy()))
