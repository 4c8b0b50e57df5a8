"""Time evolution of perturbed waves in the co-moving frame.

Smooth blocks are advanced by a semi-Lagrangian characteristics scheme:
every grid node is traced back over one step to its foot, and the
characteristic system is integrated forward from there by RK4.  The
unknown is the deviation ``D = u - ref`` from a stationary reference
``ref`` (profile, extended profile or constant), which obeys

    X' = f'(ref(X) + D) - sigma,
    D' = D * ( dd_g(ref + D, ref) - ref'(X) * dd_{f'}(ref + D, ref) ),

so tiny deviations (weighted tails) keep full relative precision.
Discontinuities are tracked by psi' = F(u_r, u_l) - sigma with F the
averaged flux, each side being a separately evolved extended block.
"""
from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .model import divided_difference
from .norms import GridFunction, fit_decay_rate, weighted_norm

log = logging.getLogger(__name__)

CROSS_FRAC = 0.05


class CrossingError(RuntimeError):
    def __init__(self, t, where):
        super().__init__(f"characteristic crossing at t={t:.4g} near x={where:.4g}")
        self.t = t
        self.where = where


class SignViolationError(ValueError):
    pass


class TrackingEscapeError(RuntimeError):
    pass


class RangeExitError(RuntimeError):
    pass


def averaged_flux(model, v1, v2):
    """int_0^1 f'(tau v1 + (1 - tau) v2) dtau, i.e. the chord slope of f."""
    out = divided_difference(model.f_coeffs, v1, v2)
    return float(out) if np.ndim(out) == 0 else out


# ------------------------------------------------------------ references

class ConstantRef:
    def __init__(self, value):
        self.c = float(value)

    def value(self, x):
        return np.full(np.shape(x), self.c)

    def deriv(self, x):
        return np.zeros(np.shape(x))

    def value_deriv(self, x):
        return self.value(x), self.deriv(x)


def smoothstep_cut(s):
    """1 at s <= 0, 0 at s >= 1, C^2 in between."""
    s = np.clip(s, 0.0, 1.0)
    return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s * s)


# ---------------------------------------------------------------- blocks

class Block:
    """Deviation field on a uniform grid, advanced by semi-Lagrangian RK4."""

    def __init__(self, model, sigma, ref, x, D, inflow=None, name="block", sign=None):
        self.model = model
        self.sigma = float(sigma)
        self.ref = ref
        self.x = np.asarray(x, dtype=float)
        self.D = np.asarray(D, dtype=float).copy()
        self.inflow = inflow
        self.name = name
        self.sign = sign  # required sign of f'(u) - sigma (half-line use)
        self.t = 0.0
        self.dx = float(self.x[1] - self.x[0])
        self._fp = model._coeffs("f'")
        self._g = model.g_coeffs
        self._interp = None
        self.max_residual = 0.0
        self._check_sign()

    # -- pieces of the characteristic system
    def _rhs(self, X, D):
        ub, ubp = self.ref.value_deriv(X)
        U = ub + D
        dX = self.model.df(U) - self.sigma
        dD = D * (divided_difference(self._g, U, ub) - ubp * divided_difference(self._fp, U, ub))
        return dX, dD

    def _rk4(self, X, D, h):
        k1x, k1d = self._rhs(X, D)
        k2x, k2d = self._rhs(X + 0.5 * h * k1x, D + 0.5 * h * k1d)
        k3x, k3d = self._rhs(X + 0.5 * h * k2x, D + 0.5 * h * k2d)
        k4x, k4d = self._rhs(X + h * k3x, D + h * k3d)
        return (X + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x),
                D + h / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d))

    def D_at(self, xq):
        """Current deviation at arbitrary points; inflow data outside the grid."""
        if self._interp is None:
            self._interp = CubicSpline(self.x, self.D, extrapolate=False)
        xq = np.asarray(xq, dtype=float)
        out = self._interp(xq)
        out = np.where(np.isnan(out), 0.0, out)
        outside = (xq < self.x[0]) | (xq > self.x[-1])
        if np.any(outside) and self.inflow is not None:
            out[outside] = self.inflow(self.t, xq[outside])
        return out

    def u_at(self, xq):
        return self.ref.value(xq) + self.D_at(xq)

    def _trace(self, xq, tau, iters=6):
        """Feet xi, arrival X and deviation D at time t + tau for points xq."""
        xq = np.asarray(xq, dtype=float)
        if tau == 0.0:
            return xq, xq, self.D_at(xq)
        a = self.model.df(self.u_at(xq)) - self.sigma
        xi = xq - a * tau
        small = xq.size < 8
        J = None
        for _ in range(iters):
            Xe, De = self._rk4(xi, self.D_at(xi), tau)
            r = Xe - xq
            if np.max(np.abs(r)) < 1e-13 * max(1.0, np.max(np.abs(xq))):
                break
            if small:
                # chord method: one finite-difference slope, reused
                if J is None:
                    dlt = 1e-6
                    Xp, _ = self._rk4(xi + dlt, self.D_at(xi + dlt), tau)
                    J = (Xp - Xe) / dlt
            else:
                J = np.gradient(Xe, xi)
            J = np.where(J > 0.05, J, 1.0)
            xi = xi - r / J
        Xe, De = self._rk4(xi, self.D_at(xi), tau)
        res = np.max(np.abs(Xe - xq))
        self.max_residual = max(self.max_residual, float(res))
        return xi, Xe, De

    def sample(self, xq, tau):
        """u at (t + tau, xq) without advancing the block."""
        _, _, De = self._trace(np.atleast_1d(xq), tau)
        return self.ref.value(np.atleast_1d(xq)) + De

    def step(self, dt):
        xi, _, De = self._trace(self.x, dt)
        gaps = np.diff(xi)
        if np.min(gaps) < CROSS_FRAC * self.dx:
            i = int(np.argmin(gaps))
            raise CrossingError(self.t + dt, float(self.x[i]))
        self.D = De
        self.t += dt
        self._interp = None
        self._check_sign()

    def _check_sign(self):
        if self.sign is None:
            return
        a = self.model.df(self.ref.value(self.x) + self.D) - self.sigma
        bad = a * self.sign <= 0
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise SignViolationError(
                f"f'(u) - sigma = {a[i]:.3g} has the wrong sign at x={self.x[i]:.4g}")

    @property
    def u(self):
        return self.ref.value(self.x) + self.D


# ------------------------------------------------------------ trajectory

@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)  # GridFunction of u (frame x - sigma t)
    deviations: list = field(default_factory=list)  # GridFunction of u(., +psi) - profile
    psi: list = field(default_factory=list)  # per time: list of psi_i
    dpsi: list = field(default_factory=list)
    norm_times: list = field(default_factory=list)
    norms: dict = field(default_factory=dict)  # weight id -> list
    psi_inf: list = field(default_factory=list)
    psi_inf_fit: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def psi_array(self):
        return np.asarray(self.psi, dtype=float).reshape(len(self.psi), -1)

    def dpsi_array(self):
        return np.asarray(self.dpsi, dtype=float).reshape(len(self.dpsi), -1)

    def norm_series(self, wid):
        return np.asarray(self.norm_times), np.asarray(self.norms[wid])

    def check_invariants(self):
        t = np.asarray(self.times)
        if np.any(np.diff(t) <= 0):
            raise AssertionError("times must increase")
        if self.psi and len(self.psi[0]):
            p = self.psi_array()
            dp = np.abs(self.dpsi_array())
            jump = np.abs(np.diff(p, axis=0))
            bound = 1.5 * np.maximum(dp[1:], dp[:-1]) * np.diff(t)[:, None] + 1e-12
            if np.any(jump > bound):
                raise AssertionError("psi is not continuous at the recorded cadence")
        return True

    def to_csv(self, directory, prefix="run"):
        os.makedirs(directory, exist_ok=True)
        for k, (t, snap) in enumerate(zip(self.times, self.snapshots)):
            with open(os.path.join(directory, f"{prefix}_snap{k:04d}.csv"), "w",
                      newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(["x", "u"])
                for xi, ui in zip(snap.x, snap.values):
                    w.writerow([repr(float(xi)), repr(float(ui))])
        wids = sorted(self.norms)
        with open(os.path.join(directory, f"{prefix}_series.csv"), "w", newline="",
                  encoding="utf-8") as fh:
            w = csv.writer(fh)
            nj = len(self.psi[0]) if self.psi else 0
            head = ["t"] + [f"psi_{i}" for i in range(nj)] + [f"dpsi_{i}" for i in range(nj)]
            w.writerow(head + [f"norm_{wid}" for wid in wids])
            nt = dict(zip(self.norm_times, range(len(self.norm_times))))
            for k, t in enumerate(self.times):
                row = [repr(float(t))]
                if nj:
                    row += [repr(float(v)) for v in self.psi[k]] + [repr(float(v)) for v in self.dpsi[k]]
                j = nt.get(t)
                row += [repr(float(self.norms[wid][j])) if j is not None else "" for wid in wids]
                w.writerow(row)


def _record_norms(traj, t, dev, monitors, window=None):
    if not monitors:
        return
    if window is not None:
        m = (dev.x >= window[0]) & (dev.x <= window[1])
        dev = GridFunction(dev.x[m], dev.values[m],
                           tuple(d for d in dev.discontinuities if window[0] < d < window[1]))
    traj.norm_times.append(t)
    for wid, ws in monitors.items():
        traj.norms.setdefault(wid, []).append(weighted_norm(dev, ws, check=False))


def _check_range(model, u, t):
    lo, hi = model.u_range
    if np.min(u) < lo or np.max(u) > hi:
        raise RangeExitError(f"solution left u_range {model.u_range} at t={t:.4g}")


def _grid(lo, hi, dx):
    n = int(round((hi - lo) / dx))
    return lo + dx * np.arange(n + 1)


# ------------------------------------------------------ smooth evolution

def _default_reference(model, values):
    g = np.asarray(model.g_coeffs)
    edge = float(values[-1])
    if np.all(g == 0):
        return ConstantRef(edge)
    from .model import source_zeros
    zs = [z for z, _ in source_zeros(model)]
    return ConstantRef(min(zs, key=lambda z: abs(z - edge)) if zs else edge)


def evolve_characteristics(model, sigma, u0, T, dt, reference=None, monitors=None,
                           save_every=1, inflow=None, sign=None, keep_snapshots=True,
                           norm_window=None, deviation=None, d0=None):
    """Evolve smooth data ``u0`` (GridFunction) in the frame moving at ``sigma``.

    ``reference`` is a stationary solution used as the expansion point
    (default: a constant zero of g).  ``monitors`` maps ids to WeightSpec;
    their norms of u - reference (restricted to ``norm_window``) are
    recorded every step.  ``deviation`` optionally maps the grid deviation D
    to the monitored quantity (e.g. distance to a shifted profile).  Pass
    ``d0`` (initial u - reference on the grid) to keep tails exact; otherwise
    it is formed from ``u0`` by subtraction.
    """
    if u0.discontinuities:
        raise ValueError("evolve_characteristics needs smooth data (no discontinuities)")
    ref = reference if reference is not None else _default_reference(model, u0.values)
    x = u0.x
    D0 = u0.values - ref.value(x) if d0 is None else np.asarray(d0, dtype=float)
    blk = Block(model, sigma, ref, x, D0, inflow=inflow, name="smooth", sign=sign)
    traj = Trajectory(meta={"solver": "characteristics", "dx": blk.dx, "dt": dt,
                            "sigma": sigma, "model": model.to_dict()})
    nsteps = int(round(T / dt))

    def save(k):
        u = blk.u
        _check_range(model, u, blk.t)
        dev = GridFunction(x, blk.D.copy() if deviation is None else deviation(x, blk.D))
        _record_norms(traj, blk.t, dev, monitors, norm_window)
        if k % save_every == 0 or k == nsteps:
            traj.times.append(blk.t)
            traj.psi.append([])
            traj.dpsi.append([])
            if keep_snapshots:
                traj.snapshots.append(GridFunction(x, u))
                traj.deviations.append(dev)

    save(0)
    for k in range(1, nsteps + 1):
        blk.step(dt)
        save(k)
    traj.meta["max_foot_residual"] = blk.max_residual
    return traj


def evolve_halfline(model, sigma, x, u0_values, T, dt, u_inf, monitors=None,
                    save_every=1, inflow=None):
    """Half-line (0, X) evolution with f'(u) - sigma < 0; no boundary condition at 0.

    Inflow at x = X carries the endstate ``u_inf`` by default.  The reported
    region at time t is [0, X - a_max t] (domain of dependence of the data).
    """
    x = np.asarray(x, dtype=float)
    u0 = GridFunction(x, np.asarray(u0_values, dtype=float))
    a = model.df(u0.values) - sigma
    if np.any(a >= 0):
        raise SignViolationError("f'(u) - sigma must be negative on the half-line data")
    traj = evolve_characteristics(model, sigma, u0, T, dt, reference=ConstantRef(u_inf),
                                  monitors=monitors, save_every=save_every, inflow=inflow,
                                  sign=-1.0)
    a_max = float(np.max(np.abs(a)))
    traj.meta["solver"] = "halfline"
    traj.meta["valid_upto"] = [float(x[-1] - a_max * t) for t in traj.times]
    return traj


# ----------------------------------------------------------- tracking

def _taylor_extension(pert, d, side, collar, h=1e-4):
    """C^2 extension of a one-sided function across d, damped over the collar."""
    s = -1.0 if side == "left" else 1.0
    p0 = float(pert(np.array([d - s * 1e-12]))[0])
    p1 = float(pert(np.array([d - s * h]))[0])
    p2 = float(pert(np.array([d - s * 2 * h]))[0])
    # one-sided derivatives at d from the ``side`` of the data
    d1 = (3 * p0 - 4 * p1 + p2) / (2 * h) * s
    d2 = (p0 - 2 * p1 + p2) / (h * h)

    def ext(xq):
        y = xq - d
        return (p0 + d1 * y + 0.5 * d2 * y * y) * smoothstep_cut(np.abs(y) / collar)
    return ext


def extended_initial_deviation(x, pert, jumps, k, collar):
    """Initial deviation of block k: the data on its own piece, blended beyond."""
    lo = jumps[k - 1] if k > 0 else -np.inf
    hi = jumps[k] if k < len(jumps) else np.inf
    out = np.asarray(pert(x), dtype=float).copy()
    if np.isfinite(hi):
        ext = _taylor_extension(pert, hi, "left", collar)
        m = x >= hi
        out[m] = ext(x[m])
    if np.isfinite(lo):
        ext = _taylor_extension(pert, lo, "right", collar)
        m = x <= lo
        out[m] = ext(x[m])
    return out


def _psi_extrapolation(times, dpsi, psi_T):
    """psi_inf from psi(T) plus the tail integral of the fitted psi' decay."""
    t = np.asarray(times)
    dp = np.asarray(dpsi)
    a = np.abs(dp)
    m = a > 0
    if np.count_nonzero(m) < 4:
        return psi_T, {"form": "none", "r2": float("nan")}
    try:
        fit = fit_decay_rate(t[m], a[m])
    except Exception:
        return psi_T, {"form": "none", "r2": float("nan")}
    T = t[-1]
    last = dp[-1]
    cands = []
    if fit.omega > 0 and np.isfinite(fit.r2):
        cands.append((fit.r2, "exponential", last / fit.omega, fit.omega))
    if np.isfinite(fit.r2_loglog) and fit.loglog_slope < -1:
        cands.append((fit.r2_loglog, "algebraic", last * T / (-fit.loglog_slope - 1), fit.loglog_slope))
    if not cands:
        return psi_T, {"form": "none", "r2": float("nan")}
    r2, form, tail, par = max(cands, key=lambda c: c[0])
    return psi_T + tail, {"form": form, "r2": float(r2), "param": float(par), "tail": float(tail)}


def evolve_with_tracking(model, profile, pert, T, dt, L=None, dx=0.01, collar=2.0,
                         monitors=None, save_every=1, references=None, inflows=None,
                         keep_snapshots=True, pad=(0.0, 0.0)):
    """Glued evolution of a discontinuous wave perturbed by ``pert`` (callable).

    Block k lives on its piece widened by ``collar`` on each jump side and
    evolves the smooth extension of that piece (``references[k]``, default
    the stationary extension through the one-sided limits).  Each jump moves
    by psi' = F(u_r, u_l) - sigma evaluated at x = d + psi.
    """
    from .profile import extend_side

    sigma = profile.sigma
    jumps = [float(d) for d in profile.discontinuities]
    nj = len(jumps)
    if nj == 0 or nj > 2:
        raise ValueError("tracking needs one or two discontinuities")
    L = profile.L if L is None else L
    refs = []
    for k in range(nj + 1):
        if references is not None:
            refs.append(references[k])
            continue
        seg = profile.segments[k]
        if seg.kind == "constant":
            refs.append(ConstantRef(seg.value_const))
        elif k < nj:
            refs.append(extend_side(model, profile, k, "left"))
        else:
            refs.append(extend_side(model, profile, k - 1, "right"))
    blocks = []
    for k in range(nj + 1):
        # outer blocks are padded so inflowing data are exact on [-L, L]
        lo = jumps[k - 1] - collar if k > 0 else -L - pad[0]
        hi = jumps[k] + collar if k < nj else L + pad[1]
        x = _grid(lo, hi, dx)
        # the wave's own piece k minus its reference, plus the perturbation
        D0 = extended_initial_deviation(x, lambda q, k=k: pert(q) + profile.segments[k].value(q)
                                        - refs[k].value(q), jumps, k, collar)
        inflow = inflows[k] if inflows is not None else None
        blocks.append(Block(model, sigma, refs[k], x, D0, inflow=inflow, name=f"block{k}"))
    psi = np.zeros(nj)
    traj = Trajectory(meta={"solver": "tracking", "dx": dx, "dt": dt, "sigma": sigma,
                            "collar": collar, "model": model.to_dict(), "jumps": jumps})
    xs_out = _grid(-L, L, dx)

    def speeds(tau, ps):
        out = np.empty(nj)
        for i in range(nj):
            p = np.array([jumps[i] + ps[i]])
            ul = float(blocks[i].sample(p, tau)[0])
            ur = float(blocks[i + 1].sample(p, tau)[0])
            out[i] = averaged_flux(model, ur, ul) - sigma
        return out

    def check_escape(ps, t):
        for i in range(nj):
            if abs(ps[i]) >= 0.9 * collar:
                raise TrackingEscapeError(f"jump {i} left the overlap (psi={ps[i]:.4g}) at t={t:.4g}")

    def assemble():
        u = np.empty_like(xs_out)
        idx = np.searchsorted(np.array(jumps) + psi, xs_out, side="right")
        for k in range(nj + 1):
            m = idx == k
            if np.any(m):
                u[m] = blocks[k].u_at(xs_out[m])
        return u

    def deviation():
        # u(t, x + psi) - profile(x) piece by piece (psi of the nearest jump)
        dev = np.empty_like(xs_out)
        idx = np.searchsorted(np.array(jumps), xs_out, side="right")
        for k in range(nj + 1):
            m = idx == k
            if not np.any(m):
                continue
            xq = xs_out[m]
            sh = psi[min(k, nj - 1)] if k == nj else psi[k]
            if 0 < k < nj:
                # middle piece: interpolate the shift between its two jumps
                w = (xq - jumps[k - 1]) / (jumps[k] - jumps[k - 1])
                sh = (1 - w) * psi[k - 1] + w * psi[k]
            dev[m] = blocks[k].u_at(xq + sh) - profile.segments[k].value(xq)
        return GridFunction(xs_out, dev, tuple(np.array(jumps) + 0.5 * dx * 1e-3))

    nsteps = int(round(T / dt))
    dps = speeds(0.0, psi)
    t = 0.0

    def save(k, t, dps):
        dev = deviation()
        _record_norms(traj, t, dev, monitors)
        if k % save_every == 0 or k == nsteps:
            u = assemble()
            _check_range(model, u, t)
            traj.times.append(t)
            traj.psi.append(psi.tolist())
            traj.dpsi.append(dps.tolist())
            if keep_snapshots:
                traj.snapshots.append(GridFunction(xs_out, u, tuple(
                    d for d in np.array(jumps) + psi if not np.any(xs_out == d))))
                traj.deviations.append(dev)

    all_t, all_dpsi = [0.0], [dps.copy()]
    save(0, t, dps)
    for k in range(1, nsteps + 1):
        k1 = dps
        k2 = speeds(0.5 * dt, psi + 0.5 * dt * k1)
        k3 = speeds(0.5 * dt, psi + 0.5 * dt * k2)
        k4 = speeds(dt, psi + dt * k3)
        new_psi = psi + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        check_escape(new_psi, t + dt)
        for b in blocks:
            b.step(dt)
        t += dt
        psi = new_psi
        dps = speeds(0.0, psi)
        # psi' is F(u_r, u_l) - sigma by construction; cross-check with the chord
        for i in range(nj):
            p = np.array([jumps[i] + psi[i]])
            ul = float(blocks[i].u_at(p)[0])
            ur = float(blocks[i + 1].u_at(p)[0])
            if abs(ur - ul) > 1e-3:
                chord = (float(model.f(ur)) - float(model.f(ul))) / (ur - ul) - sigma
                assert abs(chord - dps[i]) <= 1e-10 * max(1.0, abs(chord)), "psi' mismatch"
        all_t.append(t)
        all_dpsi.append(dps.copy())
        save(k, t, dps)
    for i in range(nj):
        val, info = _psi_extrapolation(all_t, [d[i] for d in all_dpsi], psi[i])
        traj.psi_inf.append(float(val))
        traj.psi_inf_fit.append(info)
    traj.meta["max_foot_residual"] = max(b.max_residual for b in blocks)
    traj.meta["all_times"] = all_t
    traj.meta["all_dpsi"] = [d.tolist() for d in all_dpsi]
    return traj


# ------------------------------------------------------------- FV oracle

def _godunov_flux(ul, ur, h, crit):
    """Exact Godunov flux for a scalar flux h with critical points ``crit``."""
    lo = np.minimum(ul, ur)
    hi = np.maximum(ul, ur)
    hl, hr = h(ul), h(ur)
    fmin = np.minimum(hl, hr)
    fmax = np.maximum(hl, hr)
    for c in crit:
        inside = (lo < c) & (c < hi)
        hc = h(c)
        fmin = np.where(inside, np.minimum(fmin, hc), fmin)
        fmax = np.where(inside, np.maximum(fmax, hc), fmax)
    return np.where(ul <= ur, fmin, fmax)


def locate_shock(x, u):
    """Steepest-gradient locator: midpoint of the largest jump between cells."""
    i = int(np.argmax(np.abs(np.diff(u))))
    return 0.5 * (x[i] + x[i + 1])


def evolve_fv_oracle(model, sigma, u0, T, N=None, cfl=0.45, save_times=None, x=None,
                     source=True):
    """Godunov finite volumes in the moving frame, Strang-split RK2 source.

    ``u0`` is a callable (cell centres) or a GridFunction whose nodes are the
    cell centres.  Boundaries are transmissive.
    """
    if not 0 < cfl < 1:
        raise ValueError("cfl must lie in (0, 1)")
    if isinstance(u0, GridFunction):
        x = u0.x
        u = u0.values.copy()
    else:
        if x is None:
            raise ValueError("give cell centres x with a callable datum")
        u = np.asarray(u0(x), dtype=float).copy()
    if x.size < 64:
        raise ValueError("need at least 64 cells")
    dx = float(x[1] - x[0])
    fc = list(model.f_coeffs)
    if len(fc) < 2:
        fc = fc + [0.0]
    hc = np.array(fc, dtype=float)
    hc[1] -= sigma

    def h(v):
        from .model import horner
        return horner(tuple(hc), v)

    dh = np.polynomial.polynomial.polyder(hc)
    crit = [r.real for r in np.polynomial.polynomial.polyroots(dh) if abs(r.imag) < 1e-12] \
        if np.any(np.trim_zeros(dh, "b")) and len(np.trim_zeros(dh, "b")) > 1 else []

    g = model.g

    def src(v, tau):
        if not source:
            return v
        k1 = g(v)
        return v + 0.5 * tau * (k1 + g(v + tau * k1))

    traj = Trajectory(meta={"solver": "fv", "dx": dx, "cfl": cfl, "sigma": sigma,
                            "model": model.to_dict(), "dt_changes": 0})
    save_times = sorted(save_times) if save_times is not None else [T]
    si = 0
    if save_times and save_times[0] <= 0:
        traj.times.append(0.0)
        traj.snapshots.append(GridFunction(x, u.copy()))
        traj.psi.append([])
        traj.dpsi.append([])
        si = 1
    t = 0.0
    dt_prev = None
    while t < T - 1e-14:
        a = float(np.max(np.abs(model.df(u) - sigma)))
        dt = cfl * dx / max(a, 1e-12)
        if dt_prev is not None and dt < 0.99 * dt_prev:
            traj.meta["dt_changes"] += 1
            log.debug("fv: dt reduced to %.3g at t=%.4g", dt, t)
        target = save_times[si] if si < len(save_times) else T
        dt = min(dt, target - t)
        dt_prev = dt
        u = src(u, 0.5 * dt)
        ue = np.r_[u[0], u, u[-1]]
        F = _godunov_flux(ue[:-1], ue[1:], h, crit)
        u = u - dt / dx * (F[1:] - F[:-1])
        u = src(u, 0.5 * dt)
        t += dt
        if si < len(save_times) and t >= save_times[si] - 1e-12:
            traj.times.append(t)
            traj.snapshots.append(GridFunction(x, u.copy()))
            traj.psi.append([])
            traj.dpsi.append([])
            si += 1
    return traj
