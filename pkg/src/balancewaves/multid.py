"""Planar waves in two dimensions, x along the wave and y periodic.

The equation is u_t + f(u)_x + F(u)_y = g(u) with F' the transverse flux.
A planar profile u(x) is bent into a genuinely 2-D wave by a transverse
shift psi0(y): the wave is U(x, y) = u(Phi) where Phi inverts
x -> x + psi0(y - Z(x)), and Z transports the bend along characteristics.

Arrays on (x, y) grids are stored with shape (Ny, Nx): one row per y-line.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.optimize import brentq

from .evolve1d import CROSS_FRAC, CrossingError
from .model import divided_difference
from .norms import fit_decay_rate

CHAR_BAND = 0.05


class UnsupportedProfileError(ValueError):
    pass


class SingularIntegrandError(ValueError):
    pass


class InvertibilityError(ValueError):
    pass


class YInversionError(RuntimeError):
    pass


class LevelSetError(ValueError):
    pass


class NoCrossingError(LevelSetError):
    pass


class MultipleCrossingError(LevelSetError):
    pass


class NonTransversalError(LevelSetError):
    pass


class RHSurfaceError(RuntimeError):
    pass


def periodic_grid(n, P=2 * np.pi):
    return P * np.arange(n) / n


# ------------------------------------------------------------- fields

@dataclass
class Field2D:
    """Values on a uniform (x, y) grid, y periodic with period P."""

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray  # (Ny, Nx)
    P: float = 2 * np.pi
    Y: np.ndarray = None  # transverse position field, Y(0) = y

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.y.size, self.x.size):
            raise ValueError(f"values shape {self.values.shape} != (Ny, Nx) = "
                             f"({self.y.size}, {self.x.size})")
        dy = np.diff(self.y)
        if not np.allclose(dy, self.P / self.y.size, rtol=1e-12, atol=1e-12):
            raise ValueError("y must be the uniform periodic grid P*j/Ny")
        if self.Y is None:
            self.Y = np.broadcast_to(self.y[:, None], self.values.shape).copy()

    @property
    def dx(self):
        return float(self.x[1] - self.x[0])

    @property
    def dy(self):
        return self.P / self.y.size

    @classmethod
    def from_function(cls, fn, x, y, P=2 * np.pi):
        X, Yg = np.meshgrid(x, y)
        return cls(x, y, fn(X, Yg), P)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "u", "Y"])
            for j, yj in enumerate(self.y):
                for i, xi in enumerate(self.x):
                    w.writerow([repr(float(xi)), repr(float(yj)),
                                repr(float(self.values[j, i])), repr(float(self.Y[j, i]))])


def _periodic_spline(samples, P):
    """Periodic cubic spline through samples on P*j/N (callable, derivative via nu)."""
    s = np.asarray(samples, dtype=float)
    n = s.size
    yy = P * np.arange(n + 1) / n
    spl = CubicSpline(yy, np.append(s, s[0]), bc_type="periodic")

    def ev(y, nu=0):
        return spl(np.mod(y, P), nu)
    return ev


def _as_periodic(psi0, P, n=512):
    if callable(psi0):
        return _periodic_spline(psi0(periodic_grid(n, P)), P)
    return _periodic_spline(psi0, P)


# ------------------------------------------------------ transverse speed

def _profile_kind(profile):
    if profile.is_constant:
        return "constant"
    if not profile.is_smooth:
        if len(profile.discontinuities) == 1 and all(s.kind == "constant" for s in profile.segments):
            return "riemann"
        return "composite"
    if profile.characteristic_points:
        return "characteristic"
    return "front"


def _unstable_side(model, profile):
    sides = [s for s, u in (("minus", profile.endstate_minus), ("plus", profile.endstate_plus))
             if float(model.dg(u)) > 0]
    return sides[0] if len(sides) == 1 else None


def transverse_speed(model, profile):
    """sigma_perp selecting a bounded Z for the profile kind."""
    kind = _profile_kind(profile)
    if kind == "characteristic":
        return float(model.fperp_prime(profile.characteristic_points[0][1]))
    if kind == "front":
        side = _unstable_side(model, profile)
        if side is None:
            raise UnsupportedProfileError("smooth front without a single unstable endstate")
        u = profile.endstate_plus if side == "plus" else profile.endstate_minus
        return float(model.fperp_prime(u))
    if kind == "riemann":
        ul, ur = profile.one_sided(0)
        return float((model.fperp(ur) - model.fperp(ul)) / (ur - ul))
    raise UnsupportedProfileError(f"no transverse speed rule for a {kind} profile")


# ------------------------------------------------------------------ Z

@dataclass
class ZFunction:
    """Z sampled on nodes (Hermite data) with linear continuation outside."""

    nodes: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    anchor: float
    kind: str
    crosscheck: float = float("nan")  # max |x-form - u-form| on the nodes
    slope_fn: object = field(default=None, repr=False)

    def __post_init__(self):
        self._spl = CubicHermiteSpline(self.nodes, self.values, self.slopes)

    def __call__(self, x):
        return self._eval(x, 0)

    def deriv(self, x):
        return self._eval(x, 1)

    def _eval(self, x, nu):
        x = np.asarray(x, dtype=float)
        a, b = self.nodes[0], self.nodes[-1]
        xc = np.clip(x, a, b)
        out = self._spl(xc, nu)
        if nu == 0:
            out = out + np.where(x < a, (x - a) * self.slopes[0], 0.0)
            out = out + np.where(x > b, (x - b) * self.slopes[-1], 0.0)
        else:
            out = np.where(x < a, self.slopes[0], np.where(x > b, self.slopes[-1], out))
        return out


def _z_slope(model, profile, sigma_perp, anchor_u):
    """x -> Z'(x) = (F'(u) - sigma_perp)/(f'(u) - sigma), regular at the anchor value."""
    fpc = model._coeffs("F'")
    dfc = model._coeffs("f'")
    s = profile.sigma

    def zp(x):
        u = np.atleast_1d(profile.value(np.asarray(x, dtype=float)))
        num = model.fperp_prime(u) - sigma_perp
        den = model.df(u) - s
        out = np.empty(u.shape)
        near = np.zeros(u.shape, bool)
        if anchor_u is not None:
            near = np.abs(u - anchor_u) < CHAR_BAND * max(1.0, abs(anchor_u))
        if np.any(near):
            un = u[near]
            out[near] = (divided_difference(fpc, un, anchor_u)
                         / divided_difference(dfc, un, anchor_u))
        far = ~near
        out[far] = num[far] / den[far]
        return out
    return zp


def _u_form(model, sigma_perp, u_anchor, u):
    """int_{u_anchor}^{u} (F' - sigma_perp)/g, using divided differences at the anchor."""
    fpc = model._coeffs("F'")

    def integrand(v):
        if abs(v - u_anchor) < 1e-3:
            return float(divided_difference(fpc, v, u_anchor)
                         / divided_difference(model.g_coeffs, v, u_anchor))
        return float((model.fperp_prime(v) - sigma_perp) / model.g(v))
    val, _ = quad(integrand, u_anchor, u, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def compute_Z(model, profile, sigma_perp, n=401, L=None, tol=1e-9):
    """Z with (f'(u) - sigma) Z' = F'(u) - sigma_perp.

    Anchors: Z(x*) = 0 at a characteristic point, Z(+inf) = 0 (unstable
    side) for fronts without one, Z(d) = 0 at the jump of a Riemann shock.
    The x-form integral is computed by adaptive quadrature between nodes and
    cross-checked against the u-form wherever g(u) is not tiny.
    """
    kind = _profile_kind(profile)
    L = profile.L if L is None else L
    if kind == "riemann":
        d = profile.discontinuities[0]
        ul, ur = profile.one_sided(0)
        sl = float((model.fperp_prime(ul) - sigma_perp) / (model.df(ul) - profile.sigma))
        sr = float((model.fperp_prime(ur) - sigma_perp) / (model.df(ur) - profile.sigma))
        # Z is piecewise linear; the slope jumps at d
        return ZFunction(np.array([d - L, d - 1e-12, d + 1e-12, d + L]),
                         np.array([-sl * L, -sl * 1e-12, sr * 1e-12, sr * L]),
                         np.array([sl, sl, sr, sr]), d, kind)
    if kind == "characteristic":
        x0, u0 = profile.characteristic_points[0]
        if abs(float(model.fperp_prime(u0)) - sigma_perp) > tol:
            raise SingularIntegrandError(
                f"sigma_perp={sigma_perp:.6g} != F'(u*)={float(model.fperp_prime(u0)):.6g}")
        anchor, anchor_u = x0, u0
    elif kind == "front":
        side = _unstable_side(model, profile)
        if side is None:
            raise UnsupportedProfileError("smooth front without a single unstable endstate")
        u0 = profile.endstate_plus if side == "plus" else profile.endstate_minus
        if abs(float(model.fperp_prime(u0)) - sigma_perp) > tol:
            raise SingularIntegrandError(
                f"sigma_perp={sigma_perp:.6g} != F'(u_inf)={float(model.fperp_prime(u0)):.6g}")
        anchor, anchor_u = (np.inf if side == "plus" else -np.inf), u0
    else:
        raise UnsupportedProfileError(f"Z is not defined for a {kind} profile")

    zp = _z_slope(model, profile, sigma_perp, anchor_u if kind == "characteristic" else None)
    x0 = 0.0 if not np.isfinite(anchor) else anchor
    nodes = np.linspace(x0 - L, x0 + L, n)
    if np.isfinite(anchor):
        nodes = np.union1d(nodes, [anchor])

    def f1(t):
        return float(zp(t)[0])

    incr = np.array([quad(f1, a, b, epsabs=1e-14, epsrel=1e-12)[0]
                     for a, b in zip(nodes[:-1], nodes[1:])])
    Zc = np.concatenate([[0.0], np.cumsum(incr)])
    if np.isfinite(anchor):
        Zc -= Zc[int(np.argmin(np.abs(nodes - anchor)))]
    elif anchor > 0:
        tail = quad(f1, nodes[-1], np.inf, epsabs=1e-14, limit=200)[0]
        Zc = Zc - Zc[-1] - tail
    else:
        tail = quad(f1, -np.inf, nodes[0], epsabs=1e-14, limit=200)[0]
        Zc = Zc + tail

    # u-form cross-check
    u_nodes = np.atleast_1d(profile.value(nodes))
    ok = np.abs(model.g(u_nodes)) > 1e-6
    diffs = [abs(_u_form(model, sigma_perp, anchor_u, float(u)) - z)
             for u, z, m in zip(u_nodes, Zc, ok) if m]
    zf = ZFunction(nodes, Zc, zp(nodes), float(anchor), kind,
                   float(max(diffs)) if diffs else float("nan"), zp)
    return zf


def z_ode_residual(model, profile, Z, sigma_perp, x):
    """max |(f'(u) - sigma) Z' - (F'(u) - sigma_perp)| over x."""
    u = profile.value(np.asarray(x, dtype=float))
    r = (model.df(u) - profile.sigma) * Z.deriv(x) - (model.fperp_prime(u) - sigma_perp)
    return float(np.max(np.abs(r)))


# ------------------------------------------------------ planar waves

@dataclass
class PlanarWave2D:
    model: object = field(repr=False)
    profile: object = field(repr=False)
    sigma_par: float
    sigma_perp: float
    Z: ZFunction
    psi0: object  # periodic callable psi0(y, nu=0)
    P: float
    x: np.ndarray
    y: np.ndarray
    U: np.ndarray = None  # (Ny, Nx)
    Phi: np.ndarray = None

    def field(self):
        return Field2D(self.x, self.y, self.U, self.P)

    def invert(self, X, Yg):
        """Phi: the xi with xi + psi(xi, y) = x (Newton, vectorized)."""
        ps, Z = self.psi0, self.Z
        xi = X - ps(Yg - Z(X))
        for _ in range(50):
            arg = Yg - Z(xi)
            step = (xi + ps(arg) - X) / (1.0 - ps(arg, 1) * Z.deriv(xi))
            xi = xi - step
            if np.max(np.abs(step)) < 1e-14 * max(1.0, np.max(np.abs(X))):
                return xi
        raise InvertibilityError("Newton inversion of x + psi(x, y) did not converge")

    def value(self, X, Yg):
        """U at arbitrary points."""
        X, Yg = np.broadcast_arrays(np.asarray(X, dtype=float), np.asarray(Yg, dtype=float))
        xi = self.invert(X, Yg)
        return np.asarray(self.profile.value(xi.ravel())).reshape(xi.shape)

    def psi(self, x, y):
        return self.psi0(y - self.Z(x))

    def dx_psi_bound(self, n=2001):
        xs = np.linspace(self.x[0], self.x[-1], n)
        ys = periodic_grid(256, self.P)
        return float(np.max(np.abs(self.psi0(ys, 1))) * np.max(np.abs(self.Z.deriv(xs))))

    def residual(self):
        """Max planar-wave PDE residual on interior nodes (4th-order differences)."""
        return planar_residual(self.model, self.U, self.x, self.y, self.P,
                               self.sigma_par, self.sigma_perp)


def _d4(a, h, axis, periodic):
    if periodic:
        r = lambda k: np.roll(a, -k, axis=axis)  # noqa: E731
        return (-r(2) + 8 * r(1) - 8 * r(-1) + r(-2)) / (12 * h)
    out = np.full(a.shape, np.nan)
    sl = [slice(None)] * a.ndim

    def s(lo, hi):
        q = list(sl)
        q[axis] = slice(lo, a.shape[axis] + hi if hi <= 0 else hi)
        return a[tuple(q)]
    core = (-s(4, 0) + 8 * s(3, -1) - 8 * s(1, -3) + s(0, -4)) / (12 * h)
    q = list(sl)
    q[axis] = slice(2, a.shape[axis] - 2)
    out[tuple(q)] = core
    return out


def planar_residual(model, U, x, y, P, sigma_par, sigma_perp):
    Ux = _d4(U, x[1] - x[0], 1, False)
    Uy = _d4(U, P / y.size, 0, True)
    fp = model.fperp_prime(U) if model.has_transverse else np.zeros_like(U)
    r = (model.df(U) - sigma_par) * Ux + (fp - sigma_perp) * Uy - model.g(U)
    return float(np.nanmax(np.abs(r)))


def build_multid_profile(model, profile, psi0, x, y, P=2 * np.pi, sigma_perp=None, Z=None,
                         bound=0.5):
    """Assemble U(x, y) = u(Phi(x, y)) on the grid for a transverse shift psi0.

    ``psi0`` is a callable of y or samples on ``y``.  Raises
    InvertibilityError unless sup |d_x psi| < ``bound``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not model.has_transverse:
        raise UnsupportedProfileError("model has no transverse flux")
    sp = transverse_speed(model, profile) if sigma_perp is None else float(sigma_perp)
    Z = compute_Z(model, profile, sp) if Z is None else Z
    ps = _as_periodic(psi0, P)
    pw = PlanarWave2D(model, profile, profile.sigma, sp, Z, ps, P, x, y)
    b = pw.dx_psi_bound()
    if not b < bound:
        raise InvertibilityError(f"sup |d_x psi| = {b:.3g} >= {bound}")
    X, Yg = np.meshgrid(x, y)
    xi = pw.invert(X, Yg)
    pw.Phi = xi
    pw.U = np.asarray(profile.value(xi.ravel())).reshape(xi.shape)
    return pw


# --------------------------------------------------- row-wise splines

class _RowSplines:
    """Cubic splines along axis 1 of an (Ny, Nx) array on a uniform x grid."""

    def __init__(self, x, A):
        self.x0 = float(x[0])
        self.dx = float(x[1] - x[0])
        self.n = x.size
        self.c = CubicSpline(x, A, axis=1).c  # (4, Nx-1, Ny)
        self.rows = np.arange(A.shape[0])[:, None]

    def __call__(self, xq):
        """Values at xq (same row count); NaN outside the grid."""
        t = (xq - self.x0) / self.dx
        i = np.clip(np.floor(t).astype(int), 0, self.n - 2)
        s = xq - (self.x0 + i * self.dx)
        c = self.c
        r = self.rows
        out = ((c[0, i, r] * s + c[1, i, r]) * s + c[2, i, r]) * s + c[3, i, r]
        outside = (t < -1e-12) | (t > self.n - 1 + 1e-12)
        return np.where(outside, np.nan, out)


# ------------------------------------------------------- split evolution

@dataclass
class SplitTrajectory:
    times: list = field(default_factory=list)
    v: list = field(default_factory=list)  # shape solution (Ny, Nx)
    Y: list = field(default_factory=list)  # transverse position (Ny, Nx)
    u: list = field(default_factory=list)  # reconstructed u in the co-moving frame
    meta: dict = field(default_factory=dict)

    def fields(self):
        x, y, P = self.meta["x"], self.meta["y"], self.meta["P"]
        return [Field2D(x, y, u, P, Yk) for u, Yk in zip(self.u, self.Y)]


class _LineBundle:
    """All y-lines of the shape equation, with the position equation carried along."""

    def __init__(self, model, sigma, sigma_perp, ref, x, D, W):
        self.model = model
        self.sigma = float(sigma)
        self.sigma_perp = float(sigma_perp)
        self.ref = ref
        self.x = np.asarray(x, dtype=float)
        self.dx = float(self.x[1] - self.x[0])
        self.D = np.array(D, dtype=float)
        self.W = np.array(W, dtype=float)
        self.t = 0.0
        self._fp = model._coeffs("f'")
        self._g = model.g_coeffs
        self._disp = None
        self.max_residual = 0.0

    def _rhs(self, X, D):
        ub, ubp = self.ref.value_deriv(X.ravel())
        ub = ub.reshape(X.shape)
        ubp = ubp.reshape(X.shape)
        U = ub + D
        dX = self.model.df(U) - self.sigma
        dD = D * (divided_difference(self._g, U, ub) - ubp * divided_difference(self._fp, U, ub))
        return dX, dD, U

    def _source(self, U):
        if not self.model.has_transverse:
            return -self.sigma_perp * np.ones_like(U)
        return self.model.fperp_prime(U) - self.sigma_perp

    def _rk4(self, X, D, h, with_w=False):
        k1x, k1d, U1 = self._rhs(X, D)
        k2x, k2d, U2 = self._rhs(X + 0.5 * h * k1x, D + 0.5 * h * k1d)
        k3x, k3d, U3 = self._rhs(X + 0.5 * h * k2x, D + 0.5 * h * k2d)
        k4x, k4d, U4 = self._rhs(X + h * k3x, D + h * k3d)
        Xn = X + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        Dn = D + h / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d)
        if not with_w:
            return Xn, Dn, None
        dW = h / 6.0 * (self._source(U1) + 2 * self._source(U2)
                        + 2 * self._source(U3) + self._source(U4))
        return Xn, Dn, dW

    def _at(self, spl, xi, outside):
        v = spl(xi)
        bad = np.isnan(v)
        if np.any(bad):
            v = np.where(bad, outside(xi), v)
        return v

    def step(self, dt, iters=8):
        xg = np.broadcast_to(self.x, self.D.shape)
        sD = _RowSplines(self.x, self.D)
        sW = _RowSplines(self.x, self.W)
        # deviation vanishes outside; position data continues constantly
        zero = lambda q: 0.0  # noqa: E731
        Wl, Wr = self.W[:, :1], self.W[:, -1:]
        wout = lambda q: np.where(q < self.x[0], Wl, Wr)  # noqa: E731
        if self._disp is None:
            a = self.model.df(self.ref.value(xg.ravel()).reshape(xg.shape) + self.D) - self.sigma
            xi = xg - a * dt
        else:
            xi = xg - self._disp
        tol = 1e-13 * max(1.0, float(np.max(np.abs(self.x))))
        for _ in range(iters):
            Xe, _, _ = self._rk4(xi, self._at(sD, xi, zero), dt)
            r = Xe - xg
            if np.max(np.abs(r)) < tol:
                break
            J = np.empty_like(Xe)
            J[:, 1:-1] = (Xe[:, 2:] - Xe[:, :-2]) / (xi[:, 2:] - xi[:, :-2])
            J[:, 0] = (Xe[:, 1] - Xe[:, 0]) / (xi[:, 1] - xi[:, 0])
            J[:, -1] = (Xe[:, -1] - Xe[:, -2]) / (xi[:, -1] - xi[:, -2])
            J = np.where(J > 0.05, J, 1.0)
            xi = xi - r / J
        gaps = np.diff(xi, axis=1)
        if np.min(gaps) < CROSS_FRAC * self.dx:
            j, i = np.unravel_index(int(np.argmin(gaps)), gaps.shape)
            raise CrossingError(self.t + dt, float(self.x[i]))
        D0 = self._at(sD, xi, zero)
        Xe, De, dW = self._rk4(xi, D0, dt, with_w=True)
        self.max_residual = max(self.max_residual, float(np.max(np.abs(Xe - xg))))
        self.W = self._at(sW, xi, wout) + dW
        self.D = De
        self._disp = xg - xi
        self.t += dt

    def v(self):
        xg = np.broadcast_to(self.x, self.D.shape)
        return self.ref.value(xg.ravel()).reshape(xg.shape) + self.D


def reconstruct(v, Y, y, P, check=True):
    """Co-moving u on the (x, y) grid from v and Y: u(x, Y(x, y)) = v(x, y).

    Per x column, y -> Y is inverted by monotone linear interpolation (with
    periodic continuation) and v is read off with a periodic cubic spline.
    """
    Ny, Nx = v.shape
    dY = np.diff(np.vstack([Y, Y[:1] + P]), axis=0)
    if check and np.min(dY) <= 0:
        raise YInversionError("Y is not monotone in y: left the small-perturbation regime")
    yext = np.concatenate([y - P, y, y + P])
    out = np.empty_like(v)
    for i in range(Nx):
        Yc = np.concatenate([Y[:, i] - P, Y[:, i], Y[:, i] + P])
        ystar = np.interp(y, Yc, yext)
        col = _periodic_spline(v[:, i], P)
        out[:, i] = col(ystar)
    return out


def evolve_planar_split(model, sigma, u0, T, dt, reference, sigma_perp=0.0, save_every=1,
                        check_monotone=True):
    """Shape/position splitting: v solves the 1-D equation on each y-line and
    Y is transported along the same characteristics with source
    F'(v) - sigma_perp.  ``reference`` (a 1-D profile or constant) is the
    expansion point of v; ``u0`` is a Field2D in the frame moving at
    (sigma, sigma_perp).  Returns a SplitTrajectory with the reconstructed
    co-moving u at every saved step.
    """
    x, y, P = u0.x, u0.y, u0.P
    xg = np.broadcast_to(x, u0.values.shape)
    D0 = u0.values - reference.value(xg.ravel()).reshape(xg.shape)
    W0 = u0.Y - y[:, None]
    lb = _LineBundle(model, sigma, sigma_perp, reference, x, D0, W0)
    tr = SplitTrajectory(meta={"x": x, "y": y, "P": P, "dt": dt, "sigma": sigma,
                               "sigma_perp": sigma_perp})
    nsteps = int(round(T / dt))

    def save():
        v = lb.v()
        Yf = lb.W + y[:, None]
        tr.times.append(lb.t)
        tr.v.append(v)
        tr.Y.append(Yf)
        tr.u.append(reconstruct(v, Yf, y, P, check_monotone))

    save()
    for k in range(1, nsteps + 1):
        lb.step(dt)
        if k % save_every == 0 or k == nsteps:
            save()
    tr.meta["max_foot_residual"] = lb.max_residual
    return tr


# ----------------------------------------------------------- level sets

def _row_crossing(x, row, u_star, tol=1e-12, exact=None):
    d = row - u_star
    touch = np.abs(d) <= tol
    if np.any(touch[1:] & touch[:-1]):
        raise NonTransversalError("u0 has a plateau at the characteristic value")
    s = np.sign(np.where(touch, 0.0, d))
    idx = np.flatnonzero(s != 0)
    if idx.size == 0:
        raise NoCrossingError("row identically at the characteristic value")
    changes = np.flatnonzero(s[idx][1:] != s[idx][:-1])
    if changes.size == 0:
        raise NoCrossingError("row never crosses the characteristic value")
    if changes.size > 1:
        raise MultipleCrossingError(f"{changes.size} crossings in one row")
    a, b = idx[changes[0]], idx[changes[0] + 1]
    lo, hi = max(a - 3, 0), min(b + 4, x.size)
    spl = CubicSpline(x[lo:hi], row[lo:hi])
    if touch[a + 1: b].any():
        r = float(x[a + 1 + int(np.flatnonzero(touch[a + 1:b])[0])])
    else:
        r = brentq(lambda q: float(spl(q)) - u_star, x[a], x[b], xtol=1e-15)
        if exact is not None:
            # polish on the exact data, bracketing inside the grid cell
            r = brentq(lambda q: float(exact(q)) - u_star, x[a], x[b], xtol=1e-15)
    slope = float(spl(r, 1))
    if abs(slope) < 1e-8:
        raise NonTransversalError(f"crossing at x={r:.6g} has slope {slope:.3g}")
    return r


def characteristic_levelset(u0, u_star, exact=None):
    """psi_char(y): the single x with u0(x, y) = u_star on each y-line.

    Roots come from a local cubic spline of each row; pass ``exact(x, y)``
    to polish them on the underlying function instead.
    """
    out = []
    for yj, row in zip(u0.y, u0.values):
        fn = None if exact is None else (lambda q, yj=yj: exact(np.array([q]), np.array([yj]))[0])
        out.append(_row_crossing(u0.x, row, u_star, exact=fn))
    return np.array(out)


def write_levelset_series(path, times, y, series):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "y", "psi_char"])
        for t, ps in zip(times, series):
            for yj, p in zip(y, ps):
                w.writerow([repr(float(t)), repr(float(yj)), repr(float(p))])


def w1inf_par(diff, dx):
    """Anisotropic norm max(|w|, |d_x w|) on the grid."""
    return float(max(np.max(np.abs(diff)), np.max(np.abs(np.gradient(diff, dx, axis=1, edge_order=2)))))


# ------------------------------------------------------- RH surface

@dataclass
class RHSurface:
    psi: np.ndarray
    t: float
    steps: int
    restart_diff: float
    unique: bool


def _relax(model, U_l, U_r, x0, y, P, sigma, sigma_perp, jump0, psi, dt, tol, t_max):
    dy = P / y.size

    def h(u):
        return model.f(u) - sigma * u

    def H(u):
        if not model.has_transverse:
            return np.zeros_like(u)
        return model.fperp(u) - sigma_perp * u

    def rate(ps):
        ul = U_l(x0 + ps, y)
        ur = U_r(x0 + ps, y)
        c = (H(ur) - H(ul)) / jump0
        back = (ps - np.roll(ps, 1)) / dy
        fwd = (np.roll(ps, -1) - ps) / dy
        py = np.where(c > 0, back, fwd)
        return (h(ur) - h(ul)) / jump0 - c * py, c

    t = 0.0
    k = 0
    while t < t_max:
        r1, c = rate(psi)
        if np.max(np.abs(r1)) < tol:
            return psi, t, k
        cmax = float(np.max(np.abs(c)))
        h_ = dt if cmax == 0 else min(dt, 0.5 * dy / cmax)
        p1 = psi + h_ * r1
        r2, _ = rate(p1)
        psi = psi + 0.5 * h_ * (r1 + r2)
        t += h_
        k += 1
    raise RHSurfaceError(f"relaxation did not reach |psi_t| < {tol} by t={t_max}")


def solve_rh_surface(model, U_l, U_r, sigma, y, x0=0.0, P=2 * np.pi, sigma_perp=0.0,
                     psi_init=None, tol=1e-9, t_max=500.0, restart_amp=1e-3, agree=1e-7):
    """Steady jump surface x = x0 + psi(y) by time relaxation.

    ``U_l(x, y)``, ``U_r(x, y)`` are the two sides continued across the jump.
    Relaxes [u]_0 psi_t + [F - sigma_perp u] psi_y = [f - sigma u] (upwind in
    y, RK2 in t) until |psi_t| < tol, then restarts from a second datum and
    reports the agreement of the two steady states.
    """
    y = np.asarray(y, dtype=float)
    jump0 = float(np.mean(U_r(x0, y) - U_l(x0, y)))
    dg = float(np.mean(model.g(U_r(x0, y)) - model.g(U_l(x0, y))))
    ratio = dg / jump0
    if not ratio < 0:
        raise RHSurfaceError(f"[g]/[u] = {ratio:.3g} is not negative: no contraction")
    dt = 0.5 / abs(ratio)
    p0 = np.zeros(y.size) if psi_init is None else np.array(psi_init, dtype=float)
    psi, t, k = _relax(model, U_l, U_r, x0, y, P, sigma, sigma_perp, jump0, p0, dt, tol, t_max)
    p1 = p0 + restart_amp * np.cos(2 * np.pi * y / P) + restart_amp
    psi2, _, _ = _relax(model, U_l, U_r, x0, y, P, sigma, sigma_perp, jump0, p1, dt, tol, t_max)
    diff = float(np.max(np.abs(psi - psi2)))
    return RHSurface(psi, t, k, diff, diff <= agree)


# ------------------------------------------------------- experiments

def tanh_levelset_run(model, profile, psi_amp=0.05, pert=0.01, x_half=8.0, nx=2049, ny=16,
                      P=2 * np.pi, T=12.0, dt=0.05, save_every=4, window=(2.0, 9.0)):
    """Perturbed bent characteristic front: level-set drift and decay to the selected wave."""
    x = np.linspace(-x_half, x_half, nx)
    y = periodic_grid(ny, P)
    sp = transverse_speed(model, profile) if model.has_transverse else 0.0
    X, Yg = np.meshgrid(x, y)
    bent = build_multid_profile(model, profile, lambda q: psi_amp * np.cos(2 * np.pi * q / P),
                                x, y, P, sigma_perp=sp)
    def u0_fn(xq, yq):
        return bent.value(xq, yq) + pert / np.cosh(xq) * np.cos(2 * np.pi * yq / P)

    u0 = Field2D(x, y, u0_fn(X, Yg), P)
    u_star = profile.characteristic_points[0][1]
    psi_char = characteristic_levelset(u0, u_star, exact=u0_fn)
    target = build_multid_profile(model, profile, psi_char, x, y, P, sigma_perp=sp, Z=bent.Z)
    tr = evolve_planar_split(model, profile.sigma, u0, T, dt, profile, sp, save_every)
    drift, norms = [], []
    for uk in tr.u:
        ls = characteristic_levelset(Field2D(x, y, uk, P), u_star)
        drift.append(float(np.max(np.abs(ls - psi_char))))
        norms.append(w1inf_par(uk - target.U, x[1] - x[0]))
    t = np.array(tr.times)
    fit = fit_decay_rate(t, np.array(norms), window=window)
    return {"times": t, "drift": np.array(drift), "norms": np.array(norms), "fit": fit,
            "dx": float(x[1] - x[0]), "psi_char": psi_char, "trajectory": tr, "target": target}

