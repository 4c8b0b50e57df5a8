import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balancewaves.evolve1d import ConstantRef, evolve_characteristics
from balancewaves.model import ModelSpec, get_model
from balancewaves.multid import (Field2D, InvertibilityError, MultipleCrossingError,
                                 NoCrossingError, NonTransversalError, RHSurfaceError,
                                 UnsupportedProfileError, build_multid_profile,
                                 characteristic_levelset, compute_Z, evolve_planar_split,
                                 periodic_grid, solve_rh_surface, tanh_levelset_run,
                                 transverse_speed, z_ode_residual)
from balancewaves.norms import GridFunction
from balancewaves.profile import build_characteristic_front

# tanh front with a quadratic transverse flux derivative F'(u) = 0.3 + 0.5 u + 0.2 u^2
MODEL = ModelSpec((0.0, 0.0, 0.5), (0.0, 1.0, 0.0, -1.0), (0.3, 0.5, 0.2), (-2.0, 2.0))
FRONT = build_characteristic_front(MODEL, 0.0, 0.0)


def test_transverse_speed_and_Z_closed_form():
    sp = transverse_speed(MODEL, FRONT)
    assert sp == pytest.approx(0.3)
    Z = compute_Z(MODEL, FRONT, sp)
    x = np.linspace(-6, 6, 241)
    # Z' = (F'(u) - F'(0)) / u = 0.5 + 0.2 tanh x
    assert np.max(np.abs(Z(x) - (0.5 * x + 0.2 * np.log(np.cosh(x))))) <= 1e-7
    assert Z.crosscheck <= 1e-8
    assert z_ode_residual(MODEL, FRONT, Z, sp, x) <= 1e-6


def test_bent_profile_solves_planar_equation():
    y = periodic_grid(16)
    pw = build_multid_profile(MODEL, FRONT, lambda q: 0.1 * np.cos(q),
                              np.linspace(-6, 6, 1201), y)
    assert pw.residual() <= 1e-4
    with pytest.raises(InvertibilityError):
        build_multid_profile(MODEL, FRONT, lambda q: 3.0 * np.cos(q), np.linspace(-6, 6, 101), y)
    with pytest.raises(UnsupportedProfileError):
        build_multid_profile(get_model("burgers_monostable"), FRONT, np.cos,
                             np.linspace(-6, 6, 101), y)


def _column_field(x, y, vals):
    return Field2D(x, y, np.broadcast_to(vals, (y.size, x.size)).copy())


def test_split_reduces_to_1d():
    x, y = np.linspace(-12, 12, 601), periodic_grid(8)
    u0 = np.tanh(x) + 0.05 / np.cosh(x - 1.0)
    one = evolve_characteristics(MODEL, 0.0, GridFunction(x, u0), 2.0, 0.05, reference=FRONT)
    two = evolve_planar_split(MODEL, 0.0, _column_field(x, y, u0), 2.0, 0.05, FRONT, 0.3)
    assert np.max(np.abs(two.u[-1] - one.snapshots[-1].values[None, :])) <= 1e-6


@settings(max_examples=5, deadline=None)
@given(c=st.floats(-1.0, 1.0), sp=st.floats(-0.5, 0.5))
def test_constant_transverse_speed_translates_Y(c, sp):
    m = ModelSpec((0.0, 0.0, 0.5), (0.0, 1.0, 0.0, -1.0), (c,), (-2.0, 2.0))
    x, y = np.linspace(-8, 8, 321), periodic_grid(8)
    tr = evolve_planar_split(m, 0.0, _column_field(x, y, np.tanh(x) + 0.02 / np.cosh(x)),
                             2.0, 0.05, FRONT, sp, save_every=10)
    for t, Y in zip(tr.times, tr.Y):
        assert np.max(np.abs(Y - (y[:, None] + (c - sp) * t))) <= 1e-10


def _bump(q):
    s = np.clip(1.0 - q**2, 0.0, None)
    return s**3


def test_finite_speed_of_propagation():
    x, y = np.linspace(-10, 10, 801), periodic_grid(8)
    X, Yg = np.meshgrid(x, y)
    u0 = Field2D(x, y, np.tanh(X) + 0.05 * _bump(X - 4.0) * (1 + 0.5 * np.cos(Yg)))
    T = 1.0
    tr = evolve_planar_split(MODEL, 0.0, u0, T, 0.05, FRONT, 0.3)
    a = 1.2  # sup |f'(u) - sigma| over the values visited
    dev = np.abs(tr.u[-1] - np.tanh(x)[None, :])
    outside = (x < 3.0 - a * T - 0.1) | (x > 5.0 + a * T + 0.1)
    # cubic splines of the feet are global, so the leak is tiny but not zero
    assert np.max(dev[:, outside]) <= 1e-9
    assert np.max(dev) > 1e-3


def test_levelset_is_stationary():
    r = tanh_levelset_run(MODEL, FRONT, nx=513, ny=8, T=2.0, dt=0.05, window=(0.5, 2.0))
    assert np.max(r["drift"]) <= 2 * r["dx"]
    assert r["norms"][-1] < r["norms"][0]


def test_levelset_errors():
    x, y = np.linspace(-3, 3, 61), periodic_grid(4)
    with pytest.raises(NoCrossingError):
        characteristic_levelset(_column_field(x, y, np.full(x.size, 0.5)), 0.0)
    with pytest.raises(MultipleCrossingError):
        characteristic_levelset(_column_field(x, y, np.sin(2 * x)), 0.0)
    with pytest.raises(NonTransversalError):
        characteristic_levelset(_column_field(x, y, np.clip(x, -0.0, 0.0) + np.where(
            np.abs(x) > 1, x, 0.0)), 0.0)
    ls = characteristic_levelset(_column_field(x, y, np.tanh(x - 0.33)), 0.0)
    assert np.allclose(ls, 0.33, atol=1e-4)


def _coth_sides(s):
    # stationary branches u = coth(x + c) with |u| > 1; [g]/[u] < 0 at the jump
    return (lambda X, Y: 1 / np.tanh(X - s(Y) + 1.0),
            lambda X, Y: 1 / np.tanh(X - s(Y) - 1.0))


def test_rh_surface():
    y = periodic_grid(32)
    m0 = ModelSpec((0.0, 0.0, 0.5), (0.0, 1.0, 0.0, -1.0), None, (-3.0, 3.0))
    Ul, Ur = _coth_sides(lambda q: 0.2 * np.cos(q))
    s = solve_rh_surface(m0, Ul, Ur, 0.0, y)
    assert np.max(np.abs(s.psi - 0.2 * np.cos(y))) <= 1e-7
    s = solve_rh_surface(MODEL, Ul, Ur, 0.0, y, sigma_perp=0.3)
    assert s.unique
    Ul, Ur = (lambda X, Y: np.tanh(X + 1.0)), (lambda X, Y: np.tanh(X - 1.0))
    with pytest.raises(RHSurfaceError):
        solve_rh_surface(m0, Ul, Ur, 0.0, y)


def test_constant_reference_split():
    x, y = np.linspace(-5, 5, 201), periodic_grid(4)
    tr = evolve_planar_split(MODEL, 0.0, _column_field(x, y, np.ones(x.size)), 1.0, 0.1,
                             ConstantRef(1.0), 0.0)
    assert np.max(np.abs(tr.u[-1] - 1.0)) == 0.0
