"""Polynomial balance-law data ``u_t + f(u)_x = g(u)`` (plus a transverse flux).

Every flux and source is a polynomial stored lowest degree first, so that
derivatives, divided differences and roots are exact up to rounding.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

ROOT_TOL = 1e-10


class ModelError(ValueError):
    pass


class ComponentAbsentError(ModelError):
    pass


class DegenerateRootWarning(UserWarning):
    pass


def _as_coeffs(c, name):
    arr = np.atleast_1d(np.asarray(c, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise ModelError(f"{name}: coefficient list must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{name}: coefficients must be finite")
    return tuple(float(v) for v in arr)


def horner(coeffs, u):
    """Evaluate a polynomial (lowest degree first) by Horner's rule."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u) + coeffs[-1]
    for c in coeffs[-2::-1]:
        out = out * u + c
    return out


def derivative_coeffs(coeffs, m=1):
    c = np.asarray(coeffs, dtype=float)
    if c.size <= m:
        return (0.0,)
    return tuple(float(v) for v in P.polyder(c, m))


def divided_difference(coeffs, a, b):
    """(p(a) - p(b)) / (a - b), with p'(a) on the diagonal.

    Computed as sum_k c_k sum_j a^j b^(k-1-j), which has no cancellation,
    so tiny ``a - b`` keep full relative precision.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    # q_k = sum_{j<k} a^j b^(k-1-j) obeys q_{k+1} = a q_k + b^k
    out = np.zeros(a.shape)
    q = np.zeros(a.shape)
    bk = np.ones(a.shape)
    for c in coeffs[1:]:
        q = a * q + bk
        bk = bk * b
        out = out + c * q
    return out


@dataclass(frozen=True)
class ModelSpec:
    """Coefficient lists (lowest degree first) for f, g and optionally F_perp'."""

    f_coeffs: tuple
    g_coeffs: tuple
    fperp_coeffs: tuple | None = None
    u_range: tuple = (-10.0, 10.0)
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "f_coeffs", _as_coeffs(self.f_coeffs, "f"))
        object.__setattr__(self, "g_coeffs", _as_coeffs(self.g_coeffs, "g"))
        if self.fperp_coeffs is not None:
            object.__setattr__(self, "fperp_coeffs",
                               _as_coeffs(self.fperp_coeffs, "fperp"))
        lo, hi = (float(v) for v in self.u_range)
        if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
            raise ModelError(f"u_range must have positive length, got {self.u_range}")
        object.__setattr__(self, "u_range", (lo, hi))

    # derived coefficient lists, cached lazily on the frozen instance
    def _coeffs(self, which):
        cache = self.__dict__.setdefault("_cache", {})
        if which in cache:
            return cache[which]
        if which == "f":
            c = self.f_coeffs
        elif which == "f'":
            c = derivative_coeffs(self.f_coeffs, 1)
        elif which == "f''":
            c = derivative_coeffs(self.f_coeffs, 2)
        elif which == "f'''":
            c = derivative_coeffs(self.f_coeffs, 3)
        elif which == "g":
            c = self.g_coeffs
        elif which == "g'":
            c = derivative_coeffs(self.g_coeffs, 1)
        elif which == "g''":
            c = derivative_coeffs(self.g_coeffs, 2)
        elif which in ("F'", "Fperp'"):
            if self.fperp_coeffs is None:
                raise ComponentAbsentError("model has no transverse flux F_perp'")
            c = self.fperp_coeffs
        elif which in ("F", "Fperp"):
            if self.fperp_coeffs is None:
                raise ComponentAbsentError("model has no transverse flux F_perp'")
            c = tuple(float(v) for v in P.polyint(self.fperp_coeffs))
        else:
            raise ModelError(f"unknown component {which!r}")
        cache[which] = c
        return c

    def f(self, u):
        return horner(self.f_coeffs, u)

    def df(self, u):
        return horner(self._coeffs("f'"), u)

    def d2f(self, u):
        return horner(self._coeffs("f''"), u)

    def g(self, u):
        return horner(self.g_coeffs, u)

    def dg(self, u):
        return horner(self._coeffs("g'"), u)

    def fperp_prime(self, u):
        return horner(self._coeffs("F'"), u)

    def fperp(self, u):
        return horner(self._coeffs("F"), u)

    @property
    def has_transverse(self):
        return self.fperp_coeffs is not None

    def to_dict(self):
        d = {"f": list(self.f_coeffs), "g": list(self.g_coeffs),
             "u_range": list(self.u_range)}
        if self.fperp_coeffs is not None:
            d["fperp"] = list(self.fperp_coeffs)
        return d


_WHICH = {"f": "f", "f'": "f'", "f''": "f''", "g": "g", "g'": "g'",
          "F'": "F'", "Fperp'": "F'", "F": "F"}


def evaluate(model: ModelSpec, which: str, u):
    """Evaluate one component (``f``, ``f'``, ``f''``, ``g``, ``g'``, ``F'``)."""
    if which not in _WHICH:
        raise ModelError(f"unknown component {which!r}")
    val = horner(model._coeffs(_WHICH[which]), u)
    return float(val) if np.ndim(val) == 0 else val


def _poly_roots_in(coeffs, lo, hi, tol=ROOT_TOL):
    """Real roots of a polynomial inside [lo, hi], polished and de-duplicated."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    if c.size <= 1:
        return []
    raw = P.polyroots(c)
    # complex pairs from a multiple real root can carry imaginary parts ~sqrt(eps)
    scale = max(1.0, np.max(np.abs(raw.real)))
    cand = sorted(r.real for r in raw if abs(r.imag) <= 1e-6 * scale)
    dc = P.polyder(c)
    roots = []
    for r in cand:
        x = r
        for _ in range(50):
            d = horner(tuple(dc), x)
            if d == 0.0:
                break
            step = horner(tuple(c), x) / d
            x -= step
            if abs(step) < 1e-15 * max(1.0, abs(x)):
                break
        # Newton stalls on multiple roots; keep the companion value then
        if not np.isfinite(x) or abs(x - r) > 1e-4 * max(1.0, abs(r)):
            x = r
        if lo - tol <= x <= hi + tol:
            roots.append(float(min(max(x, lo), hi)))
    roots.sort()
    out = []
    for r in roots:
        if not out or abs(r - out[-1]) > tol:
            out.append(r)
    return out


def source_zeros(model: ModelSpec, tol=1e-9):
    """Zeros of g inside ``u_range`` with the exact g' value at each.

    A zero with ``|g'| < tol`` is degenerate; it is still returned and a
    :class:`DegenerateRootWarning` is emitted.
    """
    g = np.asarray(model.g_coeffs)
    if np.all(g == 0.0):
        raise ModelError("g vanishes identically")
    lo, hi = model.u_range
    out = []
    for r in _poly_roots_in(model.g_coeffs, lo, hi):
        dg = float(model.dg(r))
        if abs(dg) < tol:
            warnings.warn(f"degenerate zero of g at u={r:.6g} (g'={dg:.3g})",
                          DegenerateRootWarning, stacklevel=2)
        out.append((r, dg))
    return out


@dataclass(frozen=True)
class CharacteristicValue:
    value: float
    f2: float
    degenerate: bool


def characteristic_values(model: ModelSpec, sigma: float, tol=1e-10):
    """Roots of ``f'(u) = sigma`` in ``u_range`` annotated with f''."""
    c = list(model._coeffs("f'"))
    c[0] -= sigma
    lo, hi = model.u_range
    out = []
    for r in _poly_roots_in(c, lo, hi):
        f2 = float(model.d2f(r))
        out.append(CharacteristicValue(r, f2, abs(f2) < tol))
    return out


# ---------------------------------------------------------------- catalog

BURGERS = (0.0, 0.0, 0.5)


def catalog():
    """Worked example models keyed by id."""
    return {
        "burgers_monostable": ModelSpec(BURGERS, (0.0, -1.0, 1.0), None, (-1.0, 2.0),
                                        name="burgers_monostable"),
        "burgers_bistable": ModelSpec(BURGERS, (0.0, 1.0, 0.0, -1.0), (0.0, 0.0),
                                      (-2.0, 2.0), name="burgers_bistable"),
        "burgers_three_zero": ModelSpec(BURGERS, (0.0, 2.0, -3.0, 1.0), None,
                                        (-0.5, 2.5), name="burgers_three_zero"),
        "burgers_conservation": ModelSpec(BURGERS, (0.0,), None, (-3.0, 3.0),
                                          name="burgers_conservation"),
        # double-well flux: admits 1.2 | characteristic | -1.2 with two Lax jumps
        "quartic_two_jump": ModelSpec((0.0, 0.0, -0.5, 0.0, 0.25), (0.0, 1.44, 0.0, -1.0),
                                      None, (-2.0, 2.0), name="quartic_two_jump"),
    }


def get_model(model_id):
    cat = catalog()
    if model_id not in cat:
        raise ModelError(f"unknown catalog model {model_id!r}")
    return cat[model_id]
