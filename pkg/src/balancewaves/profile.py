"""Traveling-wave profiles: smooth fronts, Riemann shocks and glued composites.

Smooth branches solve ``(f'(u) - sigma) u' = g(u)``.  Each branch is stored
as ``u = base + w`` where ``base`` is the zero of g the branch approaches,
so exponentially small tails keep their relative precision.  The right-hand
side is written with exact divided differences: ``g(u) = w * dd_g(u, base)``
away from characteristic values, and ``dd_g(u, c) / dd_{f'}(u, c)`` near a
characteristic value ``c`` (where ``g(c) = 0`` too), which removes the 0/0.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .model import ModelSpec, characteristic_values, divided_difference, source_zeros

RH_TOL = 1e-8
ZERO_TOL = 1e-10
TAIL_GAP = 1e-10
L_CAP = 60.0


class ProfileError(ValueError):
    pass


class CharacteristicInRangeError(ProfileError):
    pass


class NonConsecutiveZerosError(ProfileError):
    pass


class DegenerateCharacteristicError(ProfileError):
    pass


class NoAdjacentZeroError(ProfileError):
    pass


class OleinikViolationError(ProfileError):
    pass


class RHMismatchError(ProfileError):
    pass


class CharacteristicLimitError(ProfileError):
    pass


class NoConvergenceError(ProfileError):
    pass


# --------------------------------------------------------------- segments

@dataclass
class SmoothSegment:
    """Dense samples of one smooth block of a profile.

    ``base`` holds, per sample, the constant the block is expanded around;
    it is piecewise constant and the interpolant is built per constant run.
    ``lo``/``hi`` are the block bounds (``-inf``/``inf`` for infinite ends),
    and ``rate_lo``/``rate_hi`` the linearized exponential rates used to
    extend ``w`` beyond the samples on infinite ends.
    """

    x: np.ndarray
    w: np.ndarray
    up: np.ndarray
    kind: str
    base: np.ndarray
    lo: float = -np.inf
    hi: float = np.inf
    rate_lo: float = 0.0
    rate_hi: float = 0.0
    _branches: list = field(default=None, repr=False)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        self.up = np.asarray(self.up, dtype=float)
        self.base = np.broadcast_to(np.asarray(self.base, dtype=float), self.x.shape).copy()
        if self.kind == "constant":
            self.up = np.zeros_like(self.x)
            self.w = np.zeros_like(self.x)
        self._build()

    @property
    def u(self):
        return self.base + self.w

    @classmethod
    def constant(cls, value, lo, hi, L):
        a = max(lo, -L) if np.isfinite(lo) else -L
        b = min(hi, L) if np.isfinite(hi) else L
        if not a < b:
            a, b = (lo, lo + 1e-9) if np.isfinite(lo) else (hi - 1e-9, hi)
        x = np.array([a, b])
        return cls(x, np.zeros(2), np.zeros(2), "constant", float(value), lo, hi)

    def _build(self):
        self._branches = []
        if self.kind == "constant":
            return
        cuts = np.flatnonzero(np.diff(self.base) != 0.0) + 1
        starts = np.r_[0, cuts]
        ends = np.r_[cuts, self.x.size]
        for s, e in zip(starts, ends):
            b = float(self.base[s])
            xs, ws, dps = self.x[s:e], self.w[s:e], self.up[s:e]
            if s > 0:
                # runs share their boundary sample so the union covers every gap
                xs = np.r_[self.x[s - 1], xs]
                ws = np.r_[self.w[s - 1] + self.base[s - 1] - b, ws]
                dps = np.r_[self.up[s - 1], dps]
            if xs.size == 1:
                xs = np.r_[xs, xs + 1e-12]
                ws = np.r_[ws, ws]
                dps = np.r_[dps, dps]
            spl = CubicHermiteSpline(xs, ws, dps, extrapolate=True)
            self._branches.append((xs[0], xs[-1], b, spl))

    @property
    def value_const(self):
        return float(self.base[0])

    def _parts2(self, x):
        """(base, w, u') with u = base + w."""
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full(x.shape, self.value_const), np.zeros(x.shape), np.zeros(x.shape)
        br = self._branches
        w = np.empty(x.shape)
        wp = np.empty(x.shape)
        bases = np.empty(x.shape)
        if len(br) == 1:
            groups = [(br[0], slice(None))]
        else:
            starts = np.array([b[0] for b in br])
            idx = np.searchsorted(starts, x, side="right") - 1
            groups = [(b, (idx == k) | ((idx < 0) if k == 0 else False)) for k, b in enumerate(br)]
        for (a, b, base, spl), m in groups:
            xm = x[m]
            w[m] = spl(xm)
            wp[m] = spl(xm, 1)
            bases[m] = base
        # outside the samples: exponential tails on infinite ends, Taylor otherwise
        for side in ("lo", "hi"):
            if side == "lo":
                m = x < br[0][0]
                a, _, base, spl = br[0]
                x0, rate, inf_end = a, self.rate_lo, not np.isfinite(self.lo)
            else:
                m = x > br[-1][1]
                _, b, base, spl = br[-1]
                x0, rate, inf_end = b, self.rate_hi, not np.isfinite(self.hi)
            if not m.any():
                continue
            w0 = float(spl(x0))
            bases[m] = base
            if inf_end:
                e = w0 * np.exp(rate * (x[m] - x0))
                w[m] = e
                wp[m] = rate * e
            else:
                dx = x[m] - x0
                d1 = float(spl(x0, 1))
                d2 = float(spl(x0, 2))
                w[m] = w0 + d1 * dx + 0.5 * d2 * dx**2
                wp[m] = d1 + d2 * dx
        return bases, w, wp

    def parts(self, x, nu=0):
        """(base, w) with u = base + w (nu=0), or (base, u') (nu=1)."""
        b, w, wp = self._parts2(x)
        return (b, w) if nu == 0 else (b, wp)

    def _eval(self, x, nu):
        base, v = self.parts(x, nu)
        return base + v if nu == 0 else v

    def value_deriv(self, x):
        """(u, u') in one pass; the hot path of the evolution solvers."""
        b, w, wp = self._parts2(x)
        return b + w, wp

    def value(self, x):
        return self._eval(x, 0)

    def deriv(self, x):
        return self._eval(x, 1)


# ---------------------------------------------------------------- profiles

@dataclass
class WaveProfile:
    sigma: float
    segments: list
    discontinuities: list
    endstate_minus: float
    endstate_plus: float
    characteristic_points: list
    L: float
    model: ModelSpec = field(default=None, repr=False)
    jump_ratios: list = field(default_factory=list)
    label: str = ""

    def _segment_index(self, x):
        return np.searchsorted(np.asarray(self.discontinuities, dtype=float), x, side="right")

    def _dispatch(self, x, nu):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        idx = self._segment_index(x)
        out = np.empty(x.shape)
        for k, seg in enumerate(self.segments):
            m = idx == k
            if np.any(m):
                out[m] = seg._eval(x[m], nu)
        return float(out[0]) if scalar else out

    def value(self, x):
        return self._dispatch(x, 0)

    __call__ = value

    def deriv(self, x):
        return self._dispatch(x, 1)

    def value_deriv(self, x):
        if len(self.segments) == 1:
            return self.segments[0].value_deriv(x)
        return self.value(x), self.deriv(x)

    def one_sided(self, k):
        """(u(d-), u(d+)) at the k-th discontinuity."""
        d = self.discontinuities[k]
        return (float(self.segments[k]._eval(np.array([d]), 0)[0]),
                float(self.segments[k + 1]._eval(np.array([d]), 0)[0]))

    def one_sided_derivs(self, k):
        d = self.discontinuities[k]
        return (float(self.segments[k]._eval(np.array([d]), 1)[0]),
                float(self.segments[k + 1]._eval(np.array([d]), 1)[0]))

    @property
    def is_constant(self):
        return all(s.kind == "constant" for s in self.segments) and len(self.segments) == 1

    @property
    def is_smooth(self):
        return len(self.discontinuities) == 0

    def samples(self):
        xs, us, ups, ids = [], [], [], []
        for k, s in enumerate(self.segments):
            xs.append(s.x)
            us.append(s.u)
            ups.append(s.up)
            ids.append(np.full(s.x.size, k))
        return np.concatenate(xs), np.concatenate(us), np.concatenate(ups), np.concatenate(ids)

    def shifted(self, delta):
        """The profile translated by ``delta`` (``x -> x + delta``)."""
        segs = []
        for s in self.segments:
            segs.append(SmoothSegment(s.x + delta, s.w.copy(), s.up.copy(), s.kind,
                                      s.base.copy(), s.lo + delta, s.hi + delta,
                                      s.rate_lo, s.rate_hi))
        return WaveProfile(self.sigma, segs, [d + delta for d in self.discontinuities],
                           self.endstate_minus, self.endstate_plus,
                           [(x + delta, u) for x, u in self.characteristic_points],
                           self.L, self.model, list(self.jump_ratios), self.label)

    def to_csv(self, path):
        x, u, up, sid = self.samples()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "u", "u'", "segment_id"])
            for row in zip(x, u, up, sid):
                w.writerow([repr(float(row[0])), repr(float(row[1])),
                            repr(float(row[2])), int(row[3])])


# ------------------------------------------------------- branch integration

def _zero_values(model):
    return [z for z, _ in source_zeros(model)]


def _regular_char_values(model, sigma):
    out = []
    for cv in characteristic_values(model, sigma):
        if abs(float(model.g(cv.value))) < ZERO_TOL:
            out.append(cv.value)
    return out


def profile_rhs(model, sigma, u, base, char_vals=(), w=None):
    """u' for the profile ODE, evaluated without cancellation.

    ``w`` (when given) is ``u - base`` carried exactly; tails depend on it.
    """
    if w is None:
        w = u - base
    for c in char_vals:
        if abs(u - c) < 0.05 * max(1.0, abs(c)):
            den = float(divided_difference(model._coeffs("f'"), u, c))
            return float(divided_difference(model.g_coeffs, u, c)) / den
    den = float(model.df(u)) - sigma
    if abs(float(model.g(base))) < ZERO_TOL:
        num = w * float(divided_difference(model.g_coeffs, u, base))
    else:
        num = float(model.g(u))
    return num / den


def _branch(model, sigma, x0, u0, x_end, base, char_vals, h, tail_gap=None):
    """Integrate the profile ODE from (x0, u0) to x_end, tracking w = u - base.

    Stops early once |w| <= tail_gap (when given). Returns (x, w, u').
    """
    lo, hi = model.u_range
    direction = 1.0 if x_end > x0 else -1.0

    def rhs(_, y):
        return [profile_rhs(model, sigma, base + y[0], base, char_vals, y[0])]

    events = []

    def leave(_, y):
        u = base + y[0]
        return min(u - lo, hi - u)
    leave.terminal = True
    events.append(leave)
    if tail_gap is not None:
        def small(_, y):
            return abs(y[0]) - tail_gap
        small.terminal = True
        small.direction = -1
        events.append(small)

    n = int(np.ceil(abs(x_end - x0) / h))
    grid = x0 + direction * h * np.arange(n + 1)
    grid[-1] = x_end
    # tiny atol keeps exponentially small tails relative; a zero start needs a floor
    atol = 1e-300 if u0 != base else 1e-15
    sol = solve_ivp(rhs, (x0, x_end), [u0 - base], method="DOP853", rtol=1e-12,
                    atol=atol, dense_output=True, events=events)
    if sol.status == -1:
        raise ProfileError(f"profile integration failed: {sol.message}")
    if sol.t_events[0].size:
        raise NoAdjacentZeroError(
            f"profile left u_range {model.u_range} at x={sol.t_events[0][0]:.4g}")
    x_stop = sol.t[-1]
    keep = grid[(grid - x_stop) * direction <= 0]
    if keep.size == 0 or keep[-1] != x_stop:
        keep = np.r_[keep, x_stop]
    w = sol.sol(keep)[0]
    u = base + w
    up = np.array([profile_rhs(model, sigma, ui, base, char_vals, wi) for ui, wi in zip(u, w)])
    return keep, w, up


def _tail_rate(model, sigma, base):
    den = float(model.df(base)) - sigma
    return float(model.dg(base)) / den if den != 0 else 0.0


def _adjacent_zero(zeros, u, direction):
    if direction > 0:
        c = [z for z in zeros if z > u + ZERO_TOL]
        return min(c) if c else None
    c = [z for z in zeros if z < u - ZERO_TOL]
    return max(c) if c else None


def _sample_step(model, zeros):
    rates = [abs(float(model.dg(z))) for z in zeros] or [1.0]
    return min(0.01, 0.05 / max(rates))


def stationary_branch(model, sigma, x0, u0, lo, hi, L=L_CAP, h=None):
    """Segment of the stationary solution through (x0, u0) on (lo, hi).

    Infinite ends are integrated until the tail gap drops below ``TAIL_GAP``
    (or |x| = L) and extended by the linearized exponential tail.
    """
    zeros = _zero_values(model)
    if h is None:
        h = _sample_step(model, zeros)
        if np.isfinite(lo) and np.isfinite(hi):
            h = min(h, (hi - lo) / 400.0)  # short pieces between jumps are cheap to refine
    chars = _regular_char_values(model, sigma)
    at_star = any(abs(u0 - c) < ZERO_TOL for c in chars)
    if not at_star and any(abs(u0 - z) < ZERO_TOL for z in zeros):
        return SmoothSegment.constant(u0, lo, hi, L)
    slope0 = profile_rhs(model, sigma, u0, u0, chars)
    pieces = []
    for direction, end in ((-1.0, lo), (1.0, hi)):
        finite = np.isfinite(end)
        x_end = end if finite else direction * max(L, abs(x0) + 1.0)
        if (x_end - x0) * direction <= 0:
            continue
        moving = np.sign(slope0) * direction
        target = _adjacent_zero(zeros, u0, moving)
        base = target if target is not None else u0
        # crossing the characteristic value changes the approached zero only
        # through the ODE itself; base is just the expansion point
        xs, ws, ups = _branch(model, sigma, x0, u0, x_end, base, chars, h,
                              None if finite else TAIL_GAP)
        if not finite and target is None:
            raise NoAdjacentZeroError("no zero of g for the branch to approach")
        pieces.append((direction, xs, ws, ups, base))
    xs_all, us_all, ups_all, base_all = [], [], [], []
    rate_lo = rate_hi = 0.0
    for direction, xs, us, ups, base in pieces:
        if direction < 0:
            xs, us, ups = xs[::-1], us[::-1], ups[::-1]
            rate_lo = _tail_rate(model, sigma, base)
        else:
            rate_hi = _tail_rate(model, sigma, base)
            if xs_all:
                xs, us, ups = xs[1:], us[1:], ups[1:]
        xs_all.append(xs)
        us_all.append(us)
        ups_all.append(ups)
        base_all.append(np.full(xs.size, base))
    x = np.concatenate(xs_all)
    w = np.concatenate(us_all)
    up = np.concatenate(ups_all)
    base = np.concatenate(base_all)
    u = base + w
    kind = "monotone-noncharacteristic"
    if any(np.min(u) - 1e-12 <= c <= np.max(u) + 1e-12 for c in chars):
        kind = "characteristic-crossing"
    return SmoothSegment(x, w, up, kind, base, lo, hi, rate_lo, rate_hi)


# ------------------------------------------------------------- builders

def _check_zero(model, u, name):
    gv = float(model.g(u))
    if abs(gv) > 1e-9:
        raise ProfileError(f"{name}={u} is not a zero of g (g={gv:.3g})")


def _front_L(seg):
    return max(abs(seg.x[0]), abs(seg.x[-1]))


def build_smooth_front(model: ModelSpec, u_minus, u_plus, sigma, L=None):
    """Non-characteristic front from u_minus (-inf) to u_plus (+inf) at speed sigma."""
    _check_zero(model, u_minus, "u_minus")
    _check_zero(model, u_plus, "u_plus")
    a, b = sorted((u_minus, u_plus))
    zeros = _zero_values(model)
    if any(a + ZERO_TOL < z < b - ZERO_TOL for z in zeros):
        raise NonConsecutiveZerosError(f"g vanishes strictly between {a} and {b}")
    for z in (u_minus, u_plus):
        if abs(float(model.dg(z))) < 1e-9:
            raise ProfileError(f"endstate {z} is a degenerate zero of g")
    for cv in characteristic_values(model, sigma):
        if a - ZERO_TOL <= cv.value <= b + ZERO_TOL:
            raise CharacteristicInRangeError(
                f"f'(u)=sigma at u={cv.value:.6g} inside [{a}, {b}]")
    mid = 0.5 * (u_minus + u_plus)
    slope = profile_rhs(model, sigma, mid, mid)
    if np.sign(slope) != np.sign(u_plus - u_minus):
        raise ProfileError("no front with these endstates at this speed "
                           "(profile ODE drives the midpoint the wrong way)")
    seg = _two_sided(model, sigma, 0.0, mid, u_minus, u_plus, L, ())
    prof = WaveProfile(sigma, [seg], [], u_minus, u_plus, [], _front_L(seg), model,
                       label="smooth_front")
    return prof


def _two_sided(model, sigma, x0, u0, base_minus, base_plus, L, chars):
    zeros = _zero_values(model)
    h = _sample_step(model, zeros)
    cap = L_CAP if L is None else L
    gap = TAIL_GAP if L is None else None
    xl, wl, upl = _branch(model, sigma, x0, u0, x0 - cap, base_minus, chars, h, gap)
    xr, wr, upr = _branch(model, sigma, x0, u0, x0 + cap, base_plus, chars, h, gap)
    x = np.r_[xl[::-1], xr[1:]]
    w = np.r_[wl[::-1], wr[1:]]
    up = np.r_[upl[::-1], upr[1:]]
    base = np.r_[np.full(xl.size, base_minus), np.full(xr.size - 1, base_plus)]
    kind = "characteristic-crossing" if chars else "monotone-noncharacteristic"
    return SmoothSegment(x, w, up, kind, base, -np.inf, np.inf,
                         _tail_rate(model, sigma, base_minus),
                         _tail_rate(model, sigma, base_plus))


def build_characteristic_front(model: ModelSpec, u_star, sigma, L=None):
    """Smooth front through the characteristic point (0, u_star)."""
    f2 = float(model.d2f(u_star))
    if abs(f2) < 1e-10:
        raise DegenerateCharacteristicError(f"f''({u_star}) = {f2:.3g}")
    if abs(float(model.df(u_star)) - sigma) > 1e-9:
        raise ProfileError(f"f'({u_star}) != sigma")
    _check_zero(model, u_star, "u_star")
    g1 = float(model.dg(u_star))
    if abs(g1) < 1e-10:
        raise ProfileError(f"g'({u_star}) = 0")
    slope = g1 / f2
    zeros = _zero_values(model)
    up_zero = _adjacent_zero(zeros, u_star, 1.0)
    down_zero = _adjacent_zero(zeros, u_star, -1.0)
    if slope > 0:
        base_plus, base_minus = up_zero, down_zero
    else:
        base_plus, base_minus = down_zero, up_zero
    if base_plus is None or base_minus is None:
        raise NoAdjacentZeroError(f"no zero of g on both sides of u_star={u_star} in u_range")
    seg = _two_sided(model, sigma, 0.0, u_star, base_minus, base_plus, L, (u_star,))
    return WaveProfile(sigma, [seg], [], base_minus, base_plus, [(0.0, float(u_star))],
                       _front_L(seg), model, label="characteristic_front")


def profile_distance(model, sigma, u0, u1):
    """x1 - x0 along a profile going from value u0 to value u1.

    Quadrature of (f'(u) - sigma) / g(u), written with divided differences
    when u0 is a characteristic zero so the integrand stays regular.
    """
    from scipy.integrate import quad

    star = abs(float(model.df(u0)) - sigma) < 1e-9 and abs(float(model.g(u0))) < ZERO_TOL

    def integrand(u):
        if star:
            return float(divided_difference(model._coeffs("f'"), u, u0)
                         / divided_difference(model.g_coeffs, u, u0))
        return (float(model.df(u)) - sigma) / float(model.g(u))

    val, _ = quad(integrand, u0, u1, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def characteristic_initial_slope(model, u_star):
    return float(model.dg(u_star)) / float(model.d2f(u_star))


def build_constant(model: ModelSpec, value, sigma=None, L=20.0):
    """Constant wave; any frame works, the default one is f'(value) - 1 (non-characteristic)."""
    _check_zero(model, value, "value")
    if sigma is None:
        sigma = float(model.df(value)) - 1.0
    seg = SmoothSegment.constant(value, -np.inf, np.inf, L)
    return WaveProfile(sigma, [seg], [], value, value, [], L, model, label="constant")


def rh_speed(model, u_left, u_right):
    return float(divided_difference(model.f_coeffs, u_left, u_right))


def oleinik_margin(model, sigma, u_left, u_right, n=200):
    """Minimum slack of the strict Oleinik conditions at a jump (>0 iff strict).

    Endpoint clauses f'(u_l) > sigma > f'(u_r) and, at ``n`` interior points v,
    the chord clauses [f](u_l, v) > sigma > [f](v, u_r).
    """
    fl = float(model.df(u_left)) - sigma
    fr = sigma - float(model.df(u_right))
    v = u_left + (u_right - u_left) * (np.arange(1, n + 1) / (n + 1))
    cl = divided_difference(model.f_coeffs, v, u_left) - sigma
    cr = sigma - divided_difference(model.f_coeffs, v, u_right)
    chord = float(min(np.min(cl), np.min(cr)))
    return min(fl, fr, chord), {"endpoint_left": fl, "endpoint_right": fr, "chord": chord}


def build_riemann_shock(model: ModelSpec, u_left, u_right, L=20.0):
    """Piecewise-constant entropic shock with its single jump at 0."""
    _check_zero(model, u_left, "u_left")
    _check_zero(model, u_right, "u_right")
    if u_left == u_right:
        raise ProfileError("u_left == u_right")
    sigma = rh_speed(model, u_left, u_right)
    margin, parts = oleinik_margin(model, sigma, u_left, u_right)
    if not margin > RH_TOL:
        raise OleinikViolationError(f"strict Oleinik fails at 0: {parts}")
    segs = [SmoothSegment.constant(u_left, -np.inf, 0.0, L),
            SmoothSegment.constant(u_right, 0.0, np.inf, L)]
    ratio = (float(model.g(u_right)) - float(model.g(u_left))) / (u_right - u_left)
    prof = WaveProfile(sigma, segs, [0.0], u_left, u_right, [], L, model, [ratio],
                       label="riemann_shock")
    return sigma, prof


def _piece_anchor(model, sigma, desc):
    kind = desc["kind"]
    if kind == "constant":
        return None, float(desc["value"])
    if kind == "characteristic":
        return float(desc.get("x_star", 0.0)), float(desc["u_star"])
    if kind == "smooth":
        return float(desc["x"]), float(desc["u"])
    raise ProfileError(f"unknown piece kind {kind!r}")


def build_composite(model: ModelSpec, sigma, pieces, jumps, L=30.0):
    """Glue smooth pieces at the jump positions; checks RH and strict Oleinik.

    ``pieces`` has ``len(jumps) + 1`` descriptors, each one of
    ``{"kind": "constant", "value": u}``,
    ``{"kind": "characteristic", "u_star": u, "x_star": x}`` or
    ``{"kind": "smooth", "x": x0, "u": u0}`` (the stationary solution through
    that point).
    """
    jumps = [float(d) for d in jumps]
    if len(pieces) != len(jumps) + 1:
        raise ProfileError("need one more piece than jumps")
    if any(b <= a for a, b in zip(jumps, jumps[1:])):
        raise ProfileError("jumps must be strictly increasing")
    bounds = [-np.inf] + jumps + [np.inf]
    segs = []
    chars_pts = []
    for k, desc in enumerate(pieces):
        lo, hi = bounds[k], bounds[k + 1]
        x0, u0 = _piece_anchor(model, sigma, desc)
        if x0 is None:
            _check_zero(model, u0, "constant piece")
            segs.append(SmoothSegment.constant(u0, lo, hi, L))
            continue
        if desc["kind"] == "characteristic":
            if abs(float(model.df(u0)) - sigma) > 1e-9:
                raise ProfileError(f"f'({u0}) != sigma for characteristic piece")
            _check_zero(model, u0, "u_star")
            chars_pts.append((x0, u0))
        if not lo < x0 < hi and not (desc["kind"] == "smooth"):
            raise ProfileError(f"anchor x={x0} outside piece ({lo}, {hi})")
        seg = stationary_branch(model, sigma, x0, u0, lo, hi, L)
        segs.append(seg)
    prof = WaveProfile(sigma, segs, jumps, 0.0, 0.0, chars_pts, L, model,
                       label="composite")
    prof.endstate_minus = _endstate(segs[0], -1)
    prof.endstate_plus = _endstate(segs[-1], 1)
    ratios = []
    for k, d in enumerate(jumps):
        ul, ur = prof.one_sided(k)
        res = sigma * (ur - ul) - (float(model.f(ur)) - float(model.f(ul)))
        if abs(res) > RH_TOL * max(1.0, abs(ur - ul)):
            raise RHMismatchError(f"RH residual {res:.3g} at x={d}")
        for v in (ul, ur):
            if abs(float(model.df(v)) - sigma) < 1e-9:
                raise CharacteristicLimitError(f"one-sided value {v} at x={d} is characteristic")
        margin, parts = oleinik_margin(model, sigma, ul, ur)
        if not margin > RH_TOL:
            raise OleinikViolationError(f"strict Oleinik fails at x={d}: {parts}")
        ratios.append((float(model.g(ur)) - float(model.g(ul))) / (ur - ul))
    prof.jump_ratios = ratios
    return prof


def _endstate(seg, side):
    if seg.kind == "constant":
        return seg.value_const
    base = seg.base[0] if side < 0 else seg.base[-1]
    return float(base)


# ------------------------------------------------------- non-degeneracy

@dataclass
class NondegeneracyReport:
    characteristic_ok: bool
    discontinuity_ok: bool
    endstate_ok: bool
    witnesses: list = field(default_factory=list)
    chord_margins: list = field(default_factory=list)

    @property
    def ok(self):
        return self.characteristic_ok and self.discontinuity_ok and self.endstate_ok


def profile_characteristic_values(model, profile):
    """Characteristic values actually taken by the profile (on its smooth parts)."""
    out = []
    for seg in profile.segments:
        if seg.kind == "constant":
            continue
        lo, hi = float(np.min(seg.u)), float(np.max(seg.u))
        for cv in characteristic_values(model, profile.sigma):
            if lo - 1e-12 <= cv.value <= hi + 1e-12:
                out.append(cv)
    return out


def check_nondegenerate(model, profile, n_chord=200):
    """Clause-by-clause report of non-degeneracy; never raises."""
    wit = []
    char_ok = True
    for cv in profile_characteristic_values(model, profile):
        if abs(cv.f2) < 1e-10:
            char_ok = False
            wit.append(("characteristic_f2", cv.value, cv.f2))
    disc_ok = True
    margins = []
    for k, d in enumerate(profile.discontinuities):
        ul, ur = profile.one_sided(k)
        for v in (ul, ur):
            if abs(float(model.df(v)) - profile.sigma) < 1e-9:
                disc_ok = False
                wit.append(("characteristic_limit", d, v))
        m, parts = oleinik_margin(model, profile.sigma, ul, ur, n_chord)
        margins.append(m)
        if not m > RH_TOL:
            disc_ok = False
            wit.append(("oleinik", d, parts))
    end_ok = True
    for side, u in (("minus", profile.endstate_minus), ("plus", profile.endstate_plus)):
        dg = float(model.dg(u))
        a = float(model.df(u)) - profile.sigma
        if abs(dg) < 1e-9:
            end_ok = False
            wit.append(("endstate_degenerate", side, dg))
        if abs(a) < 1e-9:
            end_ok = False
            wit.append(("endstate_characteristic", side, a))
    return NondegeneracyReport(char_ok, disc_ok, end_ok, wit, margins)


# ------------------------------------------------------ nearby profiles

def extend_side(model, profile, k, side, L=None):
    """Full-line smooth extension of the piece on one side of jump k."""
    d = profile.discontinuities[k]
    ul, ur = profile.one_sided(k)
    u0 = ul if side == "left" else ur
    L = profile.L if L is None else L
    return stationary_branch(model, profile.sigma, d, u0, -np.inf, np.inf, L)


def nearby_profile_shift(model, profile, phi_left, radius=0.1, k=0):
    """Solve (f - sigma u)(u_r(psi)) = (f - sigma u)(u_l(psi - phi_left)) for psi.

    ``u_l``/``u_r`` are the smooth extensions of the two sides of the jump.
    Safeguarded Newton inside ``[-2 radius, 2 radius]``.
    """
    if abs(phi_left) > radius:
        raise NoConvergenceError(f"|phi_left|={abs(phi_left):.3g} beyond radius {radius}")
    ratio = profile.jump_ratios[k] if profile.jump_ratios else None
    if ratio is None or not ratio < 0:
        raise ProfileError("nearby profiles need [g]/[u] < 0 at the jump")
    left = extend_side(model, profile, k, "left")
    right = extend_side(model, profile, k, "right")
    d = profile.discontinuities[k]
    s = profile.sigma

    def h(u):
        return model.f(u) - s * u

    def F(psi):
        return float(h(right.value(d + psi)) - h(left.value(d + psi - phi_left)))

    def dF(psi):
        return float(model.g(right.value(d + psi)) - model.g(left.value(d + psi - phi_left)))

    if phi_left == 0.0:
        return 0.0
    # grow a bracket around the linear prediction; F is monotone only locally
    slope = nearby_shift_slope(model, profile, k)
    delta = 2.0 * (abs(slope) + 1.0) * abs(phi_left)
    while True:
        lo, hi = -delta, delta
        flo, fhi = F(lo), F(hi)
        if flo * fhi <= 0:
            break
        delta *= 2.0
        if delta > 2.0 * radius:
            raise NoConvergenceError("no sign change of the RH mismatch in the bracket")
    psi = slope * phi_left
    for _ in range(100):
        fv = F(psi)
        if fv == 0.0:
            return psi
        if fv * flo < 0:
            hi = psi
        else:
            lo, flo = psi, fv
        der = dF(psi)
        step = fv / der if der != 0 else np.inf
        cand = psi - step
        if not lo < cand < hi:
            cand = 0.5 * (lo + hi)
        if abs(cand - psi) < 1e-15:
            return cand
        psi = cand
    return brentq(F, lo, hi, xtol=1e-15)


def nearby_shift_slope(model, profile, k=0):
    """d psi_r / d phi_left at 0 from implicit differentiation."""
    ul, ur = profile.one_sided(k)
    gl, gr = float(model.g(ul)), float(model.g(ur))
    return gl / (gl - gr)
