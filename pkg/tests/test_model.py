import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balancewaves.model import (ComponentAbsentError, DegenerateRootWarning, ModelError,
                                ModelSpec, catalog, characteristic_values,
                                divided_difference, evaluate, get_model, source_zeros)

coef = st.floats(-3, 3, allow_nan=False)
polys = st.lists(coef, min_size=1, max_size=7)


@settings(max_examples=60, deadline=None)
@given(polys, st.integers(0, 2**31 - 1))
def test_derivative_matches_centered_difference(c, seed):
    m = ModelSpec(c, (0.0, 1.0), None, (-2.0, 2.0))
    u = np.random.default_rng(seed).uniform(-2, 2, 100)
    h = 1e-5
    fd = (evaluate(m, "f", u + h) - evaluate(m, "f", u - h)) / (2 * h)
    ex = evaluate(m, "f'", u)
    scale = np.maximum(np.abs(ex), sum(abs(a) for a in c) * 1e-4 + 1e-12)
    assert np.all(np.abs(fd - ex) <= 1e-6 * scale + 1e-9)


def _bisect_roots(m, res=1e-4):
    lo, hi = m.u_range
    u = np.arange(lo, hi + res, res)
    v = evaluate(m, "g", u)
    out = []
    for i in np.flatnonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0):
        a, b = u[i], u[i + 1]
        for _ in range(60):
            c = 0.5 * (a + b)
            if np.sign(evaluate(m, "g", c)) == np.sign(evaluate(m, "g", a)):
                a = c
            else:
                b = c
        out.append(0.5 * (a + b))
    out += [float(x) for x in u[v == 0.0]]
    return sorted(out)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1.8, 1.8), min_size=1, max_size=5, unique=True), st.floats(0.5, 2))
def test_source_zeros_match_bisection_oracle(roots, scale):
    roots = sorted(roots)
    if np.min(np.diff(roots), initial=1.0) < 1e-2:
        return  # the oracle cannot separate nearly double roots at 1e-4
    g = scale * np.polynomial.polynomial.polyfromroots(roots)
    m = ModelSpec((0, 0, 0.5), g, None, (-2.0, 2.0))
    found = [z for z, _ in source_zeros(m)]
    oracle = _bisect_roots(m)
    assert len(found) == len(oracle)
    assert np.allclose(found, oracle, atol=1e-8)
    assert found == sorted(found)
    assert np.all(np.diff(found) > 1e-10)


def test_catalog_models():
    cat = catalog()
    assert {"burgers_monostable", "burgers_bistable", "burgers_three_zero"} <= set(cat)
    zs = [z for z, _ in source_zeros(cat["burgers_three_zero"])]
    assert np.allclose(zs, [0, 1, 2])
    assert source_zeros(cat["burgers_bistable"])[1][1] == pytest.approx(1.0)


def test_unknown_component_and_catalog_id():
    m = get_model("burgers_monostable")
    with pytest.raises(ModelError):
        evaluate(m, "h", 0.0)
    with pytest.raises(ComponentAbsentError):
        evaluate(m, "F'", 0.0)
    with pytest.raises(ModelError):
        get_model("nope")


def test_degenerate_zero_warns():
    m = ModelSpec((0, 0, 0.5), (0, 0, 1.0), None, (-1, 1))
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        source_zeros(m)
    assert any(issubclass(x.category, DegenerateRootWarning) for x in w)


def test_characteristic_values():
    cv = characteristic_values(get_model("burgers_bistable"), 0.3)
    assert len(cv) == 1 and cv[0].value == pytest.approx(0.3) and not cv[0].degenerate


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_divided_difference_is_chord(a, b):
    c = (1.0, -2.0, 0.5, 0.25)
    dd = divided_difference(c, a, b)
    p = np.polynomial.polynomial.polyval
    if abs(a - b) > 1e-3:
        assert dd == pytest.approx((p(a, c) - p(b, c)) / (a - b), rel=1e-9, abs=1e-9)
    else:
        assert dd == pytest.approx(p(0.5 * (a + b), np.polynomial.polynomial.polyder(c)), abs=1e-2)


def test_bad_range():
    with pytest.raises(ModelError):
        ModelSpec((0, 1), (0, 1), None, (1.0, 1.0))
