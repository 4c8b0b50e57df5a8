"""Weighted W^{1,inf} norms, orbital / space-modulated distances and rate fits."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize, minimize_scalar


class UnresolvedWeightError(ValueError):
    pass


class NotSubexponentialError(ValueError):
    pass


class EmptyWindowError(ValueError):
    pass


# ---------------------------------------------------------------- weights

def rho_factory(kind, param):
    """Closed-form sub-exponential factor on [0, inf): returns (rho, log rho)."""
    if kind == "algebraic":
        r = float(param)
        if r <= 0:
            raise ValueError("algebraic weight needs r > 0")
        return (lambda t: (1.0 + t) ** (-r)), (lambda t: -r * np.log1p(t))
    if kind == "exponential":
        a = float(param)
        return (lambda t: np.exp(-a * t)), (lambda t: -a * np.asarray(t, dtype=float))
    if kind == "dyadic":
        # rho = sum_j 2^-j 1_[t_j, t_j+1), t_j = j * step
        step = float(param)
        return ((lambda t: 2.0 ** (-np.floor(np.asarray(t) / step))),
                (lambda t: -np.log(2.0) * np.floor(np.asarray(t) / step)))
    if kind == "gaussian":
        return (lambda t: np.exp(-np.asarray(t, dtype=float) ** 2)), (lambda t: -np.asarray(t, dtype=float) ** 2)
    raise ValueError(f"unknown weight kind {kind!r}")


@dataclass
class WeightSpec:
    """Weight exp(-kappa x_+) * rho(x_+) (side "plus") or of |x| (side "both")."""

    kappa: float = 0.0
    rho: tuple | None = None  # (kind, param)
    side: str = "plus"
    constants: tuple | None = None

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.side not in ("plus", "both"):
            raise ValueError("side must be 'plus' or 'both'")
        if self.rho is not None:
            self.rho = (str(self.rho[0]), float(self.rho[1]))

    def _arg(self, x):
        x = np.asarray(x, dtype=float)
        return np.maximum(x, 0.0) if self.side == "plus" else np.abs(x)

    def log_weight(self, x):
        y = self._arg(x)
        out = -self.kappa * y
        if self.rho is not None:
            out = out + rho_factory(*self.rho)[1](y)
        return out

    def __call__(self, x):
        return np.exp(self.log_weight(x))

    @property
    def ident(self):
        s = f"k{self.kappa:g}"
        if self.rho is not None:
            s += f"-{self.rho[0]}{self.rho[1]:g}"
        return s if self.side == "plus" else s + "-both"


@dataclass
class SubexpResult:
    passed: bool
    cond1: tuple | None  # (C, omega)
    cond2: tuple | None
    ratio: tuple | None  # (C', omega') of the sufficient ratio condition
    reason: str = ""


def _cond2_integral(rho_vals, t, omega):
    """I(t) = int_0^t exp(-omega (t - s)) rho(s) ds on a uniform grid."""
    dt = t[1] - t[0]
    decay = np.exp(-omega * dt)
    inc = 0.5 * (rho_vals[1:] + rho_vals[:-1]) * (-np.expm1(-omega * dt)) / omega
    out = np.empty_like(t)
    out[0] = 0.0
    acc = 0.0
    for i in range(1, t.size):
        acc = acc * decay + inc[i - 1]
        out[i] = acc
    return out


def check_subexponential(rho, T=50.0, omega_grid=None, C_grid=None, n=20001):
    """Search (C, omega) for both sub-exponential inequalities on [0, T].

    ``rho`` is a catalog pair ``(kind, param)``.  Raises when no candidate
    passes one of the conditions.
    """
    if omega_grid is None:
        omega_grid = [0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0]
    if C_grid is None:
        C_grid = [1.0, 0.5, 0.1, 1e-2, 1e-3, 2.0, 4.0, 10.0, 100.0]
    f, logf = rho_factory(*rho)
    t = np.linspace(0.0, T, n)
    vals = f(t)
    logs = logf(t)
    if np.any(np.diff(logs) > 1e-12):
        raise NotSubexponentialError("rho is not nonincreasing")
    c1 = None
    for om in omega_grid:
        for C in C_grid:
            if np.all(np.log(C) - om * t <= logs + 1e-12):
                c1 = (C, om)
                break
        if c1:
            break
    c2 = None
    tm = 0.5 * (t[1:] + t[:-1])
    vm = f(tm)  # midpoint values handle the staircase jumps
    for om in sorted(omega_grid):
        integ = _cond2_integral(np.r_[vm[0], vm], t, om)
        ratio = np.max(integ[1:] / vals[1:]) if np.all(vals[1:] > 0) else np.inf
        for C in sorted(C_grid):
            if ratio <= C:
                c2 = (C, om)
                break
        if c2:
            break
    # sufficient condition: log rho(s) - log rho(t) <= log C' + omega'(t - s)
    rc = None
    for om in omega_grid:
        a = logs + om * t
        gap = float(np.max(np.maximum.accumulate(a) - a))
        if gap <= np.log(10.0):
            rc = (float(np.exp(gap)), om)
            break
    passed = c1 is not None and c2 is not None
    reason = "" if passed else ("condition 1 fails" if c1 is None else "condition 2 fails")
    res = SubexpResult(passed, c1, c2, rc, reason)
    if not passed:
        raise NotSubexponentialError(reason)
    return res


# ---------------------------------------------------------- grid functions

@dataclass
class GridFunction:
    x: np.ndarray
    values: np.ndarray
    discontinuities: tuple = ()
    _splines: list = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.x.ndim != 1 or self.x.size < 2 or np.any(np.diff(self.x) <= 0):
            raise ValueError("grid must be strictly increasing with >= 2 nodes")
        if self.values.shape != self.x.shape:
            raise ValueError("values/grid shape mismatch")
        d = np.asarray(sorted(float(v) for v in self.discontinuities))
        if d.size and np.any(np.isin(d, self.x)):
            raise ValueError("discontinuities must lie strictly between nodes")
        self.discontinuities = tuple(d)

    @property
    def dx(self):
        return float(self.x[1] - self.x[0])

    def blocks(self):
        """Index slices of the blocks between discontinuities (possibly empty)."""
        cuts = np.searchsorted(self.x, np.asarray(self.discontinuities))
        edges = np.r_[0, cuts, self.x.size]
        return [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]

    def derivative(self):
        out = np.zeros_like(self.values)
        for sl in self.blocks():
            xs, vs = self.x[sl], self.values[sl]
            if xs.size >= 3:
                out[sl] = np.gradient(vs, xs, edge_order=2)
            elif xs.size == 2:
                out[sl] = (vs[1] - vs[0]) / (xs[1] - xs[0])
        return out

    def __call__(self, xq):
        """Blockwise cubic interpolation; constant extension outside the grid."""
        if self._splines is None:
            self._splines = []
            for sl in self.blocks():
                xs, vs = self.x[sl], self.values[sl]
                if xs.size >= 4:
                    self._splines.append(CubicSpline(xs, vs))
                elif xs.size >= 2:
                    self._splines.append(lambda q, xs=xs, vs=vs: np.interp(q, xs, vs))
                elif xs.size == 1:
                    self._splines.append(lambda q, v=vs[0]: np.full(np.shape(q), v))
                else:
                    self._splines.append(None)
        xq = np.clip(np.asarray(xq, dtype=float), self.x[0], self.x[-1])
        idx = np.searchsorted(np.asarray(self.discontinuities), xq, side="right")
        out = np.empty(xq.shape)
        # an empty block borrows the nearest nonempty neighbour
        for k in range(len(self._splines)):
            m = idx == k
            if not np.any(m):
                continue
            spl = self._splines[k]
            j = 1
            while spl is None:
                for kk in (k - j, k + j):
                    if 0 <= kk < len(self._splines) and self._splines[kk] is not None:
                        spl = self._splines[kk]
                        break
                j += 1
            out[m] = spl(xq[m])
        return out


def weighted_norm(v: GridFunction, w: WeightSpec, check=True):
    """max over nodes of (|v|, |v_x|) / weight with stencils not crossing jumps."""
    if check and w.kappa * v.dx >= 0.1:
        raise UnresolvedWeightError(f"kappa*dx = {w.kappa * v.dx:.3g} >= 0.1")
    lw = w.log_weight(v.x)
    d = v.derivative()
    with np.errstate(divide="ignore"):
        a = np.log(np.abs(v.values)) - lw
        b = np.log(np.abs(d)) - lw
    m = max(np.max(a), np.max(b))
    return float(np.exp(m)) if np.isfinite(m) else 0.0


def sup_norm(v: GridFunction):
    return float(np.max(np.abs(v.values)))


# -------------------------------------------------------------- distances

def _profile_on(profile, x, extra_d=()):
    d = [float(s) for s in profile.discontinuities] + list(extra_d)
    return profile.value(x), d


def _clean_d(x, ds):
    """Drop positions that coincide with nodes (nudge them just right)."""
    out = []
    for d in ds:
        if x[0] < d < x[-1]:
            if np.any(x == d):
                d = np.nextafter(d, np.inf)
            out.append(d)
    return tuple(sorted(set(out)))


def shifted_difference(v: GridFunction, profile, phi):
    """Grid function v(. + phi) - profile, with the union of jump sets.

    Only nodes with x + phi inside v's grid are kept: extending v by a
    constant would be amplified by growing weights.
    """
    x = v.x
    inside = (x + phi >= v.x[0]) & (x + phi <= v.x[-1])
    if np.count_nonzero(inside) >= 2:
        x = x[inside]
    vals = v(x + phi) - profile.value(x)
    ds = [d - phi for d in v.discontinuities] + [float(d) for d in profile.discontinuities]
    return GridFunction(x, vals, _clean_d(x, ds))


def orbital_distance(v: GridFunction, profile, w: WeightSpec, bracket=(-1.0, 1.0),
                     tol=1e-6, n_scan=41):
    """(min over phi of ||v(.+phi) - profile||_w, argmin phi)."""
    def obj(phi):
        return weighted_norm(shifted_difference(v, profile, phi), w, check=False)

    lo, hi = bracket
    grid = np.linspace(lo, hi, n_scan)
    vals = np.array([obj(p) for p in grid])
    best = np.flatnonzero(vals == vals.min())
    i = int(best[np.argmin(np.abs(grid[best]))])
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, n_scan - 1)]
    res = minimize_scalar(obj, bounds=(a, b), method="bounded", options={"xatol": tol})
    if res.fun <= vals[i]:
        return float(res.fun), float(res.x)
    return float(vals[i]), float(grid[i])


@dataclass
class ModulationResult:
    value: float
    knots: np.ndarray
    shifts: np.ndarray
    converged: bool


def _spline_shift(knots, c):
    if knots.size == 2:
        slope = (c[1] - c[0]) / (knots[1] - knots[0])
        return (lambda x: c[0] + slope * (np.asarray(x) - knots[0])), (lambda x: np.full(np.shape(x), slope))
    s = CubicSpline(knots, c)
    return s, s.derivative()


def space_modulated_distance(v: GridFunction, profile, w: WeightSpec, K=4,
                             start=None, maxiter=400):
    """Upper bound on the space-modulated distance over Psi = Id + spline(K knots).

    Objective: ||v o Psi - profile||_w + sup |(Psi - Id)'|, Psi' > 0.5 enforced.
    Starts from Psi = Id, from the best translation, and (K > 2) from the
    optimum of the K = 2 family, so the bound is nonincreasing in K.
    """
    if K < 2:
        raise ValueError("need K >= 2 knots")
    x = v.x
    knots = np.linspace(x[0], x[-1], K)

    def obj(c):
        s, ds = _spline_shift(knots, c)
        sp = ds(x)
        if np.min(1.0 + sp) <= 0.5:
            return 1e30
        psi = x + s(x)
        # same node rule as shifted_difference: no constant extension of v
        keep = (psi >= x[0]) & (psi <= x[-1])
        if np.count_nonzero(keep) < 2:
            return 1e30
        xk, psik = x[keep], psi[keep]
        vals = v(psik) - profile.value(xk)
        # jumps of v o Psi sit at Psi^{-1}(d)
        ds_v = [float(np.interp(d, psik, xk)) for d in v.discontinuities]
        g = GridFunction(xk, vals, _clean_d(xk, ds_v + [float(d) for d in profile.discontinuities]))
        return weighted_norm(g, w, check=False) + float(np.max(np.abs(sp)))

    starts = [np.zeros(K)]
    _, phi = orbital_distance(v, profile, w)
    starts.append(np.full(K, phi))
    if start is not None:
        starts.append(np.asarray(start, dtype=float))
    if K > 2:
        r2 = space_modulated_distance(v, profile, w, 2, maxiter=maxiter)
        lift = r2.shifts[0] + (r2.shifts[1] - r2.shifts[0]) * (knots - knots[0]) / (knots[-1] - knots[0])
        starts.append(lift)
    best_val, best_c, conv = np.inf, starts[0], True
    for c0 in starts:
        f0 = obj(c0)
        if f0 < best_val:
            best_val, best_c = f0, c0
        res = minimize(obj, c0, method="Nelder-Mead",
                       options={"maxiter": maxiter, "xatol": 1e-7, "fatol": 1e-10})
        if res.fun < best_val:
            best_val, best_c, conv = float(res.fun), res.x, bool(res.success)
    return ModulationResult(float(best_val), knots, np.asarray(best_c), conv)


# ------------------------------------------------------------------ fits

@dataclass
class DecayFit:
    omega: float
    r2: float
    loglog_slope: float
    r2_loglog: float
    zero_variance: bool = False
    window: tuple = ()


def _linfit(a, b):
    A = np.vstack([a, np.ones_like(a)]).T
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = b - A @ coef
    ss = np.sum((b - b.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else float("nan")
    return coef[0], r2, ss == 0


def fit_decay_rate(t, n, window=None):
    """Exponential rate (slope of -log n vs t) and log-log slope on a window."""
    t = np.asarray(t, dtype=float)
    n = np.asarray(n, dtype=float)
    if window is None:
        T = t[-1]
        window = (0.2 * T, 0.9 * T)
    m = (t >= window[0]) & (t <= window[1])
    if np.count_nonzero(m) < 2:
        raise EmptyWindowError(f"fewer than 2 samples in window {window}")
    tw, nw = t[m], n[m]
    if np.any(nw <= 0):
        raise ValueError("norm series must be positive on the window")
    ln = np.log(nw)
    slope, r2, zv = _linfit(tw, ln)
    if np.all(tw > 0):
        sl2, r22, _ = _linfit(np.log(tw), ln)
    else:
        sl2, r22 = float("nan"), float("nan")
    omega = 0.0 if zv else -float(slope)
    return DecayFit(omega, float(r2), float(sl2), float(r22), bool(zv), tuple(window))


def write_norm_series(path, t, norms, weight_id):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "norm", "weight_id"])
        for ti, ni in zip(t, norms):
            w.writerow([repr(float(ti)), repr(float(ni)), weight_id])
