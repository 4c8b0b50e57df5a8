import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balancewaves.evolve1d import (RangeExitError, SignViolationError, evolve_characteristics,
                                   evolve_fv_oracle, evolve_halfline, evolve_with_tracking,
                                   locate_shock)
from balancewaves.model import get_model
from balancewaves.norms import GridFunction
from balancewaves.profile import build_riemann_shock, build_smooth_front

BI = get_model("burgers_bistable")


def _cells(N, L):
    return -L + (np.arange(N) + 0.5) * 2 * L / N


def test_characteristics_preserve_front():
    x = np.linspace(-15, 15, 1501)
    tr = evolve_characteristics(BI, 0.0, GridFunction(x, np.tanh(x)), 10.0, 0.05)
    assert np.max(np.abs(tr.snapshots[-1].values - np.tanh(x))) <= 1e-6
    tr.check_invariants()


def test_characteristics_preserve_moving_front():
    m = get_model("burgers_monostable")
    p = build_smooth_front(m, 0.0, 1.0, 2.0)
    x = np.linspace(-20, 10, 1201)
    tr = evolve_characteristics(m, 2.0, GridFunction(x, p.value(x)), 10.0, 0.05, reference=p)
    assert np.max(np.abs(tr.snapshots[-1].values - p.value(x))) <= 1e-6


def test_fv_preserves_front_to_first_order():
    errs = {}
    for N in (400, 800):
        xc = _cells(N, 10.0)
        tr = evolve_fv_oracle(BI, 0.0, np.tanh, 10.0, x=xc, save_times=[2.0, 10.0])
        errs[N] = [np.max(np.abs(s.values - np.tanh(xc))) for s in tr.snapshots]
        assert errs[N][1] <= 4 * (xc[1] - xc[0])
    assert np.log2(errs[400][0] / errs[800][0]) >= 0.9


def test_characteristics_agree_with_fv():
    L, T = 16.0, 0.5

    def u0(q):
        return 1.0 + 0.1 / np.cosh(q)

    xc = _cells(2048, L)
    ref = evolve_characteristics(BI, 0.0, GridFunction(xc, u0(xc)), T, 0.005)
    err = []
    for N in (512, 1024):
        x = _cells(N, L)
        fv = evolve_fv_oracle(BI, 0.0, u0, T, x=x)
        err.append(np.max(np.abs(fv.snapshots[-1].values - np.interp(x, xc, ref.snapshots[-1].values))))
    assert err[1] < err[0]
    assert np.log2(err[0] / err[1]) >= 0.8


@settings(max_examples=6, deadline=None)
@given(amp=st.floats(0.05, 0.4), c=st.floats(-2, 2))
def test_kruzhkov_l1_contraction(amp, c):
    T, xc = 1.0, _cells(800, 10.0)

    def w0(q):
        return -np.tanh(q)

    def v0(q):
        return w0(q) + amp * np.exp(-(q - c) ** 2)

    a = evolve_fv_oracle(BI, 0.0, w0, T, x=xc).snapshots[-1].values
    b = evolve_fv_oracle(BI, 0.0, v0, T, x=xc).snapshots[-1].values
    dx = xc[1] - xc[0]
    vals = np.r_[w0(xc), v0(xc), a, b]
    Lg = float(np.max(np.abs(BI.dg(np.linspace(vals.min(), vals.max(), 200)))))
    l1_0 = dx * np.sum(np.abs(w0(xc) - v0(xc)))
    assert dx * np.sum(np.abs(a - b)) <= np.exp(Lg * T) * l1_0


def test_tracking_matches_fv_shock_location():
    p = build_riemann_shock(BI, 1.0, -1.0)[1]

    def pert(q):
        return 0.05 / np.cosh(q - 1.0)

    tr = evolve_with_tracking(BI, p, pert, 2.0, 0.02, L=8.0, dx=0.01)
    tr.check_invariants()
    xc = _cells(1600, 8.0)
    fv = evolve_fv_oracle(BI, 0.0, lambda q: p.value(q) + pert(q), 2.0, x=xc)
    shock = locate_shock(xc, fv.snapshots[-1].values)
    assert abs(tr.psi[-1][0] - shock) <= 2 * (xc[1] - xc[0])
    # the jump speed is the chord slope of the flux
    assert len(tr.meta["all_dpsi"]) == len(tr.meta["all_times"])


def test_unperturbed_shock_stays_put():
    p = build_riemann_shock(BI, 1.0, -1.0)[1]
    tr = evolve_with_tracking(BI, p, lambda q: 0.0 * q, 1.0, 0.05, L=5.0, dx=0.02)
    assert np.max(np.abs(tr.psi_array())) <= 1e-12


def test_errors():
    x = np.linspace(-5, 5, 101)
    with pytest.raises(ValueError):
        evolve_characteristics(BI, 0.0, GridFunction(x, np.sign(x - 0.05), (0.05,)), 1.0, 0.1)
    with pytest.raises(ValueError):
        evolve_fv_oracle(BI, 0.0, np.tanh, 1.0, x=_cells(200, 5.0), cfl=1.2)
    with pytest.raises(ValueError):
        evolve_fv_oracle(BI, 0.0, np.tanh, 1.0, x=_cells(32, 5.0))
    with pytest.raises(ValueError):
        evolve_with_tracking(BI, build_smooth_front(get_model("burgers_monostable"), 0.0, 1.0, 2.0),
                             lambda q: 0 * q, 1.0, 0.1)
    with pytest.raises(SignViolationError):
        evolve_halfline(BI, 0.0, np.linspace(0, 5, 51), np.full(51, 0.5), 1.0, 0.1, 1.0)
    with pytest.raises(RangeExitError):
        evolve_characteristics(BI, 0.0, GridFunction(x, 1.0 + 1.5 * np.exp(-x**2)), 1.0, 0.1)
