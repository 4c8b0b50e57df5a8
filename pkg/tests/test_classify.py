import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balancewaves.classify import (CONVECTIVE, UNSTABLE, WEIGHTLESS, DegeneracyError,
                                   StableEndstateError, SubcriticalWeightError,
                                   classify_wave, critical_weight, decay_rate_prediction,
                                   weightless_triggers)
from balancewaves.model import ModelSpec, get_model, source_zeros
from balancewaves.profile import (build_characteristic_front, build_constant,
                                  build_riemann_shock, build_smooth_front)

from _waves import PROFILES


def _summary(c):
    return (c.verdict, c.case_id, sorted(c.kappa_plus_per_side.values()),
            sorted(c.omega.values()), sorted(w.trigger for w in c.witnesses), c.isolated)


def _close(a, b):
    for x, y in zip(a, b):
        if isinstance(x, list):
            assert len(x) == len(y)
            if x and not isinstance(x[0], str):
                np.testing.assert_allclose(x, y, rtol=1e-7, atol=1e-9)
            else:
                assert x == y
        else:
            assert x == y


@pytest.mark.parametrize("name", sorted(PROFILES))
def test_deterministic(name):
    model, p = PROFILES[name]
    assert classify_wave(model, p).to_json(sort_keys=True) == \
        classify_wave(model, p).to_json(sort_keys=True)


@pytest.mark.parametrize("name", sorted(PROFILES))
@pytest.mark.parametrize("delta", [-3.7, 0.25, 11.0])
def test_translation_invariant(name, delta):
    model, p = PROFILES[name]
    _close(_summary(classify_wave(model, p)), _summary(classify_wave(model, p.shifted(delta))))


@pytest.mark.parametrize("name", sorted(PROFILES))
def test_weightless_iff_no_triggers(name):
    model, p = PROFILES[name]
    c = classify_wave(model, p)
    assert (not weightless_triggers(model, p)) == (c.verdict == WEIGHTLESS)
    if c.verdict == CONVECTIVE:
        assert all(w.trigger == "endstate" for w in c.witnesses)


def test_constants_over_catalog():
    for mid, model in [(k, get_model(k)) for k in
                       ("burgers_monostable", "burgers_bistable", "burgers_three_zero")]:
        for u, dg in source_zeros(model):
            c = classify_wave(model, build_constant(model, u))
            assert (c.verdict == WEIGHTLESS) == (dg < 0), (mid, u)
            assert c.verdict in (WEIGHTLESS, UNSTABLE)


@settings(max_examples=25, deadline=None)
@given(sigma=st.floats(2.05, 4.0))
def test_convective_front_spectrum_line(sigma):
    model = get_model("burgers_monostable")
    p = build_smooth_front(model, 0.0, 1.0, sigma)
    c = classify_wave(model, p)
    assert c.verdict == CONVECTIVE and c.case_id == "case2"
    kp, line = critical_weight(model, p, "plus")
    assert kp > 0
    assert kp == pytest.approx(1.0 / (sigma - 1.0))
    ks = np.linspace(0, 3 * kp, 50)
    assert np.all(np.diff(line(ks)) < 0)
    assert line(kp) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(StableEndstateError):
        critical_weight(model, p, "minus")


# -- symmetry (u, x) -> (eps u, eps' x) -----------------------------------

def _flip_model(model, eps, epsp):
    f = [a * eps * epsp * eps ** k for k, a in enumerate(model.f_coeffs)]
    g = [b * eps * eps ** k for k, b in enumerate(model.g_coeffs)]
    lo, hi = model.u_range
    return ModelSpec(f, g, None, tuple(sorted((eps * lo, eps * hi))))


def _waves(kind, s):
    if kind == "front":
        m = get_model("burgers_monostable")
        return m, lambda mm, e, ep: build_smooth_front(mm, *((e * 0.0, e * 1.0) if ep > 0
                                                            else (e * 1.0, e * 0.0)), ep * s)
    if kind == "char":
        m = get_model("burgers_bistable")
        return m, lambda mm, e, ep: build_characteristic_front(mm, 0.0, 0.0)
    m = get_model("burgers_three_zero")
    return m, lambda mm, e, ep: build_riemann_shock(mm, *((e * 1.0, 0.0) if ep > 0
                                                          else (0.0, e * 1.0)))[1]


@settings(max_examples=12, deadline=None)
@given(kind=st.sampled_from(["front", "char", "shock"]), eps=st.sampled_from([-1, 1]),
       epsp=st.sampled_from([-1, 1]), sigma=st.floats(2.05, 3.5))
def test_symmetry_equivariance(kind, eps, epsp, sigma):
    model, make = _waves(kind, sigma)
    base = classify_wave(model, make(model, 1, 1))
    m2 = _flip_model(model, eps, epsp)
    c2 = classify_wave(m2, make(m2, eps, epsp))
    _close(_summary(base), _summary(c2))
    if epsp < 0 and base.kappa_plus_per_side:
        swap = {"plus": "minus", "minus": "plus"}
        assert {swap[k] for k in base.kappa_plus_per_side} == set(c2.kappa_plus_per_side)


# -- worked examples ---------------------------------------------------------

def test_worked_examples():
    expect = {
        "monostable": (CONVECTIVE, "case2", {"plus": 1.0}),
        "monostable_fast": (CONVECTIVE, "case2", {"plus": 0.4}),
        "tanh": (WEIGHTLESS, "case3", {}),
        "shock_bistable": (WEIGHTLESS, "case4", {}),
        "shock_three": (CONVECTIVE, "case4", {"plus": 4.0}),
        "two_jump": (WEIGHTLESS, "case4", {}),
    }
    for name, (verdict, case, kp) in expect.items():
        c = classify_wave(*PROFILES[name])
        assert (c.verdict, c.case_id) == (verdict, case), name
        assert c.kappa_plus_per_side == pytest.approx(kp), name
    assert classify_wave(*PROFILES["tanh"]).omega == {0.0: pytest.approx(1.0)}
    assert classify_wave(*PROFILES["shock_bistable"]).omega == {0.0: pytest.approx(2.0)}
    assert classify_wave(*PROFILES["two_jump"]).omega == {0.0: pytest.approx(1.44)}
    c = classify_wave(*PROFILES["two_jump"])
    assert c.subcase == "constant|characteristic|constant"
    assert all(r < 0 for r in c.jump_ratios)


def test_weighted_rate_and_errors():
    model, p = PROFILES["monostable"]
    assert decay_rate_prediction(model, p, 1.5) == pytest.approx(0.5)
    assert decay_rate_prediction(model, p, 5.0) == pytest.approx(1.0)
    with pytest.raises(SubcriticalWeightError):
        decay_rate_prediction(model, p, 0.5)
    bi = get_model("burgers_bistable")
    with pytest.raises(ValueError):
        decay_rate_prediction(bi, build_constant(bi, 0.0))


def test_degenerate_rejected():
    model = ModelSpec((0.0, 0.0, 0.5), (0.0, 0.0, 0.0, -1.0), None, (-2.0, 2.0))
    with pytest.raises(DegeneracyError):
        classify_wave(model, build_constant(model, 0.0))
