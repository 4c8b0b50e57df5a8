import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balancewaves.model import get_model
from balancewaves.norms import (EmptyWindowError, GridFunction, NotSubexponentialError,
                                UnresolvedWeightError, WeightSpec, check_subexponential,
                                fit_decay_rate, orbital_distance, rho_factory,
                                space_modulated_distance, sup_norm, weighted_norm)
from balancewaves.profile import build_riemann_shock, build_smooth_front

X = np.linspace(-10, 10, 801)
WEIGHTS = [WeightSpec(), WeightSpec(1.0), WeightSpec(0.5, ("algebraic", 2.0)),
           WeightSpec(0.3, ("dyadic", 1.0), side="both")]

coef = st.lists(st.floats(-2, 2), min_size=3, max_size=3)


def _gf(c, jump=None):
    v = c[0] * np.exp(-X**2 / 4) + c[1] * np.sin(X) / (1 + X**2) + c[2] * np.tanh(X - 1)
    d = () if jump is None else (jump,)
    if jump is not None:
        v = v + np.where(X > jump, 0.3, 0.0)
    return GridFunction(X, v, d)


@settings(max_examples=40, deadline=None)
@given(a=coef, b=coef, s=st.floats(-5, 5), wi=st.integers(0, len(WEIGHTS) - 1))
def test_homogeneity_and_triangle(a, b, s, wi):
    w = WEIGHTS[wi]
    u, v = _gf(a, 0.0125), _gf(b, 0.0125)
    nu, nv = weighted_norm(u, w), weighted_norm(v, w)
    su = GridFunction(X, s * u.values, u.discontinuities)
    assert weighted_norm(su, w) == pytest.approx(abs(s) * nu, rel=1e-12, abs=1e-300)
    uv = GridFunction(X, u.values + v.values, u.discontinuities)
    assert weighted_norm(uv, w) <= (nu + nv) * (1 + 1e-12) + 1e-300


def test_weight_values_and_ident():
    w = WeightSpec(2.0, ("algebraic", 1.0))
    assert w(-3.0) == 1.0
    assert w(1.0) == pytest.approx(np.exp(-2.0) / 2.0)
    assert w.ident == "k2-algebraic1"
    assert WeightSpec(1.0, side="both")(-1.0) == pytest.approx(np.exp(-1.0))
    with pytest.raises(ValueError):
        WeightSpec(-1.0)
    with pytest.raises(ValueError):
        rho_factory("nope", 1.0)


def test_unresolved_weight():
    g = GridFunction(np.linspace(0, 10, 11), np.ones(11))
    with pytest.raises(UnresolvedWeightError):
        weighted_norm(g, WeightSpec(0.5))
    assert weighted_norm(g, WeightSpec(0.5), check=False) > 0


def test_norm_ignores_jump():
    v = GridFunction(X, np.where(X > 0.0125, 1.0, 0.0), (0.0125,))
    assert weighted_norm(v, WeightSpec()) == pytest.approx(1.0)
    assert sup_norm(v) == 1.0


def test_grid_validation():
    with pytest.raises(ValueError):
        GridFunction([0, 0, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        GridFunction([0, 1, 2], [1, 2])
    with pytest.raises(ValueError):
        GridFunction([0, 1, 2], [1, 2, 3], (1.0,))


# -- distances ------------------------------------------------------------

def _front():
    m = get_model("burgers_monostable")
    return build_smooth_front(m, 0.0, 1.0, 2.0)


@settings(max_examples=10, deadline=None)
@given(phi=st.floats(-0.4, 0.4), eps=st.floats(0, 0.05))
def test_distance_hierarchy(phi, eps):
    p = _front()
    v = GridFunction(X, p.value(X - phi) + eps * np.exp(-(X - 2) ** 2))
    w = WeightSpec(0.0)
    plain = weighted_norm(GridFunction(X, v.values - p.value(X)), w)
    orb, _ = orbital_distance(v, p, w)
    assert orb <= plain * (1 + 1e-9)
    mod = space_modulated_distance(v, p, w, K=2, maxiter=150)
    assert mod.value <= orb * (1 + 1e-9) + 1e-12


def test_orbital_recovers_translation():
    p = _front()
    v = GridFunction(X, p.value(X + 0.3))
    d, phi = orbital_distance(v, p, WeightSpec())
    assert phi == pytest.approx(-0.3, abs=1e-3)
    assert d < 1e-3


def test_orbital_through_shock():
    m = get_model("burgers_bistable")
    p = build_riemann_shock(m, 1.0, -1.0)[1]
    x = np.linspace(-5, 5, 401) + 0.0125
    v = GridFunction(x, p.value(x - 0.2), (0.2,))
    d, phi = orbital_distance(v, p, WeightSpec())
    # node norms cannot see a jump offset below one cell
    assert abs(phi - 0.2) < x[1] - x[0] and d < 1e-6


# -- sub-exponential weights ----------------------------------------------

@pytest.mark.parametrize("rho", [("algebraic", 1.0), ("algebraic", 3.0),
                                 ("exponential", 0.5), ("dyadic", 1.0)])
def test_subexponential_catalog(rho):
    r = check_subexponential(rho, T=30.0, n=6001)
    assert r.passed and r.cond1 and r.cond2


def test_gaussian_not_subexponential():
    with pytest.raises(NotSubexponentialError):
        check_subexponential(("gaussian", 0), T=30.0, n=6001)


# -- fits -------------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(omega=st.floats(0.05, 3.0), A=st.floats(1e-3, 1e3))
def test_fit_recovers_rate(omega, A):
    t = np.linspace(0, 10, 201)
    f = fit_decay_rate(t, A * np.exp(-omega * t))
    assert f.omega == pytest.approx(omega, rel=1e-9, abs=1e-12)
    assert f.r2 == pytest.approx(1.0)


def test_fit_loglog_and_edge_cases():
    t = np.linspace(1, 100, 400)
    f = fit_decay_rate(t, 5.0 * t**-2.0, window=(10, 100))
    assert f.loglog_slope == pytest.approx(-2.0)
    flat = fit_decay_rate(t, np.full_like(t, 0.7))
    assert flat.zero_variance and flat.omega == 0.0
    with pytest.raises(EmptyWindowError):
        fit_decay_rate(t, t, window=(200, 300))
