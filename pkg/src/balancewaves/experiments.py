"""Experiment procedures behind the CLI and the acceptance suite.

Every procedure takes an ExperimentConfig and returns ``(metrics, extra)``:
``metrics`` is a flat dict of named numbers/strings that the config's
checks are evaluated against, ``extra`` holds arrays and objects for output
files.  ``run_experiment`` wraps a procedure into a RunSummary dict.
"""
from __future__ import annotations

import logging
import os
import platform
import time

import numpy as np
import scipy
from scipy.optimize import brentq

from . import config as cfgmod
from .classify import UNSTABLE, classify_wave, critical_weight, decay_rate_prediction
from .evolve1d import (ConstantRef, evolve_characteristics, evolve_fv_oracle,
                       evolve_with_tracking)
from .model import ModelSpec
from .norms import (GridFunction, WeightSpec, fit_decay_rate, orbital_distance,
                    weighted_norm, write_norm_series)
from .profile import (ProfileError, build_characteristic_front, build_composite,
                      build_constant, build_riemann_shock, build_smooth_front,
                      check_nondegenerate, nearby_profile_shift, profile_distance)

log = logging.getLogger(__name__)

__version__ = "0.1.0"


class UnstableRunError(RuntimeError):
    pass


# ------------------------------------------------------------- builders

def build_wave(model: ModelSpec, wb):
    k = wb.kind
    if k == "constant":
        return build_constant(model, wb.value, wb.sigma, wb.L or 20.0)
    if k == "smooth_front":
        return build_smooth_front(model, wb.u_minus, wb.u_plus, wb.sigma, wb.L)
    if k == "characteristic_front":
        return build_characteristic_front(model, wb.u_star, wb.sigma, wb.L)
    if k == "riemann_shock":
        return build_riemann_shock(model, wb.u_left, wb.u_right, wb.L or 20.0)[1]
    if k == "composite":
        return build_composite(model, wb.sigma, wb.pieces, wb.jumps, wb.L or 30.0)
    if k == "mixed":
        # characteristic piece through u_star ending at u_left on the jump at 0,
        # smooth piece through u_right on the other side
        xs = -profile_distance(model, wb.sigma, wb.u_star, wb.u_left)
        return build_composite(model, wb.sigma,
                               [{"kind": "characteristic", "u_star": wb.u_star, "x_star": xs},
                                {"kind": "smooth", "x": 0.0, "u": wb.u_right}],
                               [0.0], wb.L or 12.0)
    raise ValueError(f"unknown wave kind {k!r}")


def smooth_cut(x, x0):
    """C^2 step from 0 (x <= x0) to 1 (x >= x0 + 1)."""
    s = np.clip(np.asarray(x, dtype=float) - x0, 0.0, 1.0)
    return s**3 * (10 - 15 * s + 6 * s**2)


def kappa_plus_of(model, profile):
    for side in ("plus", "minus"):
        u = profile.endstate_plus if side == "plus" else profile.endstate_minus
        if float(model.dg(u)) > 0:
            return critical_weight(model, profile, side)[0]
    return 0.0


def x_star_of(profile):
    if not profile.characteristic_points:
        raise ValueError("profile has no characteristic point")
    return profile.characteristic_points[0][0]


def build_perturbation(pb, model, profile):
    """Closed-form perturbation family as a callable of x."""
    fam = pb.family
    A = pb.sign * pb.amplitude
    c = x_star_of(profile) if pb.center == "x_star" else float(pb.center or 0.0)
    kap = pb.kappa
    if kap == "kappa_plus":
        kap = kappa_plus_of(model, profile)
    kap = float(kap or 0.0)

    def mask(x):
        if pb.side == "left":
            return (x < 0).astype(float)
        if pb.side == "right":
            return (x > 0).astype(float)
        return np.ones_like(x)

    if fam == "none":
        return lambda x: np.zeros_like(np.asarray(x, dtype=float))
    if fam == "sech":
        return lambda x: A / np.cosh(np.asarray(x) - c) * mask(np.asarray(x))
    if fam == "sech2":
        return lambda x: A / np.cosh(np.asarray(x) - c) ** 2 * mask(np.asarray(x))
    if fam in ("exp_tail", "algebraic_tail"):
        p = 0.0
        if fam == "algebraic_tail":
            rho = pb.rho or {"kind": "algebraic", "param": 2.0}
            p = float(rho.get("param", 2.0))

        def tail(x):
            x = np.asarray(x, dtype=float)
            xp = np.maximum(x, 0.0)
            cut = smooth_cut(x, pb.cutoff) if pb.cutoff is not None else (x > 0).astype(float)
            return A * np.exp(-kap * xp) * (1.0 + xp) ** (-p) * cut
        return tail
    raise ValueError(f"family {fam!r} is not a 1-D perturbation")


def _grid(sb, pad_right=0.0, pad_left=0.0):
    lo, hi = sb.x_min - pad_left, sb.x_max + pad_right
    if sb.dx is not None:
        n = int(round((hi - lo) / sb.dx))
        return lo + sb.dx * np.arange(n + 1)
    return np.linspace(lo, hi, sb.N or 4096)


def _weights(model, profile, mb):
    out = {}
    kp = kappa_plus_of(model, profile)
    for w in mb.weights:
        k = w.get("kappa", 0.0)
        k = kp if k == "kappa_plus" else float(k)
        rho = w.get("rho")
        ws = WeightSpec(k, (rho["kind"], rho["param"]) if rho else None, w.get("side", "plus"))
        out[w.get("id", ws.ident)] = ws
    return out


# ------------------------------------------------------------ procedures

def _classification(model, profile):
    try:
        return classify_wave(model, profile)
    except Exception as e:  # noqa: BLE001 - reported, not fatal
        log.warning("classification failed: %s", e)
        return None


def proc_classify(cfg):
    model = cfg.model.build()
    profile = build_wave(model, cfg.wave)
    rep = check_nondegenerate(model, profile)
    cls = classify_wave(model, profile)
    m = {"verdict": cls.verdict, "case_id": cls.case_id, "isolated": cls.isolated,
         "nondegenerate": rep.ok, "n_witnesses": len(cls.witnesses)}
    for side, k in cls.kappa_plus_per_side.items():
        m[f"kappa_plus.{side}"] = k
    if cls.verdict != UNSTABLE:
        if cls.kappa_plus_per_side:
            kp = max(cls.kappa_plus_per_side.values())
            m["omega_at_kappa_plus"] = decay_rate_prediction(model, profile, kp)
            m["omega_at_2kappa_plus"] = decay_rate_prediction(model, profile, 2 * kp)
        else:
            m["omega0"] = decay_rate_prediction(model, profile, 0.0)
    return m, {"classification": cls, "profile": profile}


def proc_profile(cfg):
    model = cfg.model.build()
    profile = build_wave(model, cfg.wave)
    x, u, up, _ = profile.samples()
    m = {"sigma": profile.sigma, "n_samples": int(x.size),
         "endstate_minus": profile.endstate_minus, "endstate_plus": profile.endstate_plus,
         "n_discontinuities": len(profile.discontinuities)}
    return m, {"profile": profile}


def _star_deviation(profile, u0, x):
    """Deviation from the profile shifted so its u* point sits at u0's u* crossing."""
    xs, us = profile.characteristic_points[0]
    x0 = brentq(lambda q: float(u0(np.array([q]))[0]) - us, xs - 1.0, xs + 1.0, xtol=1e-15)
    shift = x0 - xs
    delta = profile.value(x) - profile.value(x - shift)
    return shift, (lambda xx, D: D + delta)


def proc_evolve(cfg, override_unstable=False):
    model = cfg.model.build()
    profile = build_wave(model, cfg.wave)
    cls = _classification(model, profile)
    exploratory = cls is not None and cls.verdict == UNSTABLE
    if exploratory and not override_unstable:
        raise UnstableRunError(f"wave classified unstable ({cls.case_id}); "
                               "pass --override-unstable to run it anyway")
    sb, mb = cfg.solver, cfg.measurement
    pert = build_perturbation(cfg.perturbation, model, profile)
    pad = sb.pad or [0.0, 0.0]
    x = _grid(sb, pad_right=pad[1], pad_left=pad[0])
    ref = profile if not profile.is_constant else ConstantRef(profile.endstate_minus)
    d0 = pert(x)
    u0 = GridFunction(x, ref.value(x) + d0)
    deviation = None
    m = {"exploratory": bool(exploratory)}
    if mb.deviation == "star_shift":
        shift, deviation = _star_deviation(profile, lambda q: profile.value(q) + pert(q), x)
        m["star_shift"] = shift
    monitors = _weights(model, profile, mb) or {"sup": WeightSpec(0.0)}
    t0 = time.perf_counter()
    tr = evolve_characteristics(model, profile.sigma, u0, sb.T, sb.dt, reference=ref,
                                monitors=monitors, save_every=cfg.output.cadence,
                                keep_snapshots=cfg.output.directory is not None,
                                norm_window=mb.window, deviation=deviation, d0=d0)
    m["runtime_s"] = time.perf_counter() - t0
    m["max_foot_residual"] = tr.meta["max_foot_residual"]
    kp = kappa_plus_of(model, profile)
    stable = cls is not None and cls.verdict != UNSTABLE
    for wid, ws in monitors.items():
        t, n = tr.norm_series(wid)
        m[f"{wid}.initial"] = float(n[0])
        m[f"{wid}.final"] = float(n[-1])
        m[f"{wid}.max"] = float(np.max(n))
        if n[0] > 0:
            m[f"{wid}.max_ratio"] = float(np.max(n) / n[0])
            m[f"{wid}.min_ratio"] = float(np.min(n) / n[0])
        if np.all(n > 0):
            fit = fit_decay_rate(t, n, mb.fit_window)
            m[f"{wid}.omega"] = fit.omega
            m[f"{wid}.r2"] = fit.r2
            m[f"{wid}.loglog_slope"] = fit.loglog_slope
            m[f"{wid}.r2_loglog"] = fit.r2_loglog
            if exploratory:
                m[f"{wid}.growth_rate"] = -fit.omega
        if stable and ws.kappa >= kp - 1e-12:
            m[f"{wid}.omega_pred"] = decay_rate_prediction(model, profile, ws.kappa)
    m["max_deviation"] = max(m[f"{w}.max"] for w in monitors)
    if exploratory:
        m["growth_rate_pred"] = float(model.dg(profile.endstate_minus))
    return m, {"trajectory": tr, "monitors": monitors, "classification": cls}


def proc_tail_shift(cfg):
    """Terminal orbital shift of a monostable front under +-a exp(-kappa+ x) tails."""
    model = cfg.model.build()
    profile = build_wave(model, cfg.wave)
    kp = kappa_plus_of(model, profile)
    xs = np.linspace(15.0, 30.0, 31)
    alpha = np.exp(kp * xs) * profile.deriv(xs)
    alpha_plus = float(alpha[-1])
    m = {"kappa_plus": kp, "alpha_plus": alpha_plus,
         "alpha_plus_spread": float(np.max(alpha) - np.min(alpha))}
    sb, mb = cfg.solver, cfg.measurement
    pad = sb.pad or [0.0, 0.0]
    x = _grid(sb, pad_right=pad[1], pad_left=pad[0])
    win = mb.window or [sb.x_min, sb.x_max]
    keep = (x >= win[0]) & (x <= win[1])
    w = WeightSpec(kp)
    extra = {}
    for label, sign in (("plus", 1), ("minus", -1)):
        pb = cfgmod.PerturbationBlock(**{**cfg.perturbation.__dict__, "sign": sign})
        pert = build_perturbation(pb, model, profile)
        a_inf = sign * pb.amplitude
        pred = float(np.log(1.0 - kp * a_inf / alpha_plus) / kp)
        d0 = pert(x)
        tr = evolve_characteristics(model, profile.sigma, GridFunction(x, profile.value(x) + d0),
                                    sb.T, sb.dt, reference=profile, save_every=10**9,
                                    keep_snapshots=True, d0=d0)
        u = tr.snapshots[-1]
        v = GridFunction(x[keep], u.values[keep])
        dist, phi = orbital_distance(v, profile, w, bracket=(-0.1, 0.1))
        m[f"{label}.a_inf"] = a_inf
        m[f"{label}.psi_pred"] = pred
        m[f"{label}.psi_measured"] = phi
        m[f"{label}.rel_err"] = abs(phi - pred) / abs(pred)
        m[f"{label}.residual"] = dist
        extra[label] = tr
    m["max_rel_err"] = max(m["plus.rel_err"], m["minus.rel_err"])
    return m, extra


def proc_tracking(cfg):
    model = cfg.model.build()
    profile = build_wave(model, cfg.wave)
    sb, mb = cfg.solver, cfg.measurement
    pert = build_perturbation(cfg.perturbation, model, profile)
    cls = _classification(model, profile)
    m = {}
    if cls is not None:
        m["verdict"] = cls.verdict
    ratio = profile.jump_ratios[0] if profile.jump_ratios else 0.0
    m["jump_ratio"] = ratio
    L = sb.L or profile.L

    def run(T):
        pad = sb.pad if sb.pad is not None else [0.0, 0.0]
        # inflow speed times T plus a margin keeps the window's data exact
        pad = [pad[0] * T + (2.0 if pad[0] else 0.0), pad[1] * T + (2.0 if pad[1] else 0.0)]
        t0 = time.perf_counter()
        tr = evolve_with_tracking(model, profile, pert, T, sb.dt, L=L, dx=sb.dx or 0.01,
                                  collar=sb.collar, save_every=cfg.output.cadence,
                                  keep_snapshots=cfg.output.directory is not None, pad=tuple(pad))
        return tr, time.perf_counter() - t0

    tr, rt = run(sb.T)
    m["runtime_s"] = rt
    t = np.array(tr.meta["all_times"])
    dpsi = np.array(tr.meta["all_dpsi"])[:, 0]
    psi_T = tr.psi[-1][0]
    m["psi_T"] = psi_T
    m["psi_inf"] = tr.psi_inf[0]
    m["max_foot_residual"] = tr.meta["max_foot_residual"]
    win = mb.fit_window
    fit = fit_decay_rate(t[1:], np.abs(dpsi[1:]), win)
    m["dpsi.omega"] = fit.omega
    m["dpsi.loglog_slope"] = fit.loglog_slope
    m["dpsi.r2_loglog"] = fit.r2_loglog
    m["dpsi.r2"] = fit.r2
    extra = {"trajectory": tr}
    if ratio < 0:
        m["rate_pred"] = abs(ratio)
        # |psi - psi_inf| from the saved series
        ts = np.array(tr.times)
        ps = np.array([p[0] for p in tr.psi])
        gap = np.abs(ps - tr.psi_inf[0])
        ok = gap > 0
        f2 = fit_decay_rate(ts[ok], gap[ok], win)
        m["psi_gap.omega"] = f2.omega
        m["psi_gap.r2"] = f2.r2
        m["psi_gap.rate_ratio"] = f2.omega / abs(ratio)
        if profile.characteristic_points:
            xs, us = profile.characteristic_points[0]
            u0 = lambda q: profile.value(q) + pert(q)  # noqa: E731
            d = profile.discontinuities[0]
            x0 = brentq(lambda q: float(np.atleast_1d(u0(np.array([q])))[0]) - us,
                        xs - 0.1, min(xs + 0.1, d - 1e-9), xtol=1e-15)
            phi = x0 - xs
            m["phi_left"] = phi
            m["psi_inf_pred"] = nearby_profile_shift(model, profile, phi, radius=0.01)
            m["psi_inf_abs_err"] = abs(m["psi_inf"] - m["psi_inf_pred"])
    if mb.doubling:
        tr2, rt2 = run(2 * sb.T)
        m["psi_inf_2T"] = tr2.psi_inf[0]
        m["psi_inf_doubling_diff"] = abs(tr2.psi_inf[0] - tr.psi_inf[0])
        m["runtime_s"] += rt2
        extra["trajectory_2T"] = tr2
    return m, extra


MIN_FIT_POINTS = 20


def read_norm_series(paths):
    """{weight_id: (t, norm)} from CSV files with columns t, norm, weight_id."""
    import csv
    out = {}
    for path in paths:
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                t, n = out.setdefault(row["weight_id"], ([], []))
                t.append(float(row["t"]))
                n.append(float(row["norm"]))
    return {k: (np.asarray(t), np.asarray(n)) for k, (t, n) in out.items()}


def proc_decay(cfg, series=None):
    """Exponential and algebraic fits of norm series (files, or a synthetic e^{-t}).

    Weight ids that match a measurement weight get the predicted rate of the
    configured wave attached.
    """
    from .norms import EmptyWindowError
    mb = cfg.measurement
    if series is None:
        t = np.linspace(0.0, cfg.solver.T, 201)
        series = {"synthetic": (t, np.exp(-t))}
    preds = {}
    if mb.weights:
        try:
            model = cfg.model.build()
            profile = build_wave(model, cfg.wave)
            ws = _weights(model, profile, mb)
            kp = kappa_plus_of(model, profile)
            for wid, w in ws.items():
                if w.kappa >= kp - 1e-12:
                    preds[wid] = decay_rate_prediction(model, profile, w.kappa)
        except (ProfileError, ValueError) as e:
            log.warning("no predictions: %s", e)
    if "synthetic" in series:
        preds.setdefault("synthetic", 1.0)
    m = {}
    for wid, (t, n) in series.items():
        fit = fit_decay_rate(t, n, mb.fit_window)
        npts = int(np.count_nonzero((t >= fit.window[0]) & (t <= fit.window[1])))
        if npts < MIN_FIT_POINTS:
            raise EmptyWindowError(f"{wid}: {npts} points in window {fit.window}, "
                                   f"need {MIN_FIT_POINTS}")
        m[f"{wid}.omega"] = fit.omega
        m[f"{wid}.r2"] = fit.r2
        m[f"{wid}.loglog_slope"] = fit.loglog_slope
        m[f"{wid}.r2_loglog"] = fit.r2_loglog
        m[f"{wid}.n_points"] = npts
        if wid in preds:
            m[f"{wid}.omega_pred"] = preds[wid]
    return m, {}


def proc_multid(cfg):
    from .multid import compute_Z, transverse_speed, tanh_levelset_run
    md = cfg.multid
    base = cfg.model.build()
    model = ModelSpec(base.f_coeffs, base.g_coeffs, (0.0, md.b), base.u_range, name=base.name)
    profile = build_wave(model, cfg.wave)
    sb = cfg.solver
    nx = sb.N or int(round(2 * md.x_half / (sb.dx or 0.0078125))) + 1
    t0 = time.perf_counter()
    r = tanh_levelset_run(model, profile, psi_amp=md.psi_amp, pert=cfg.perturbation.amplitude,
                          x_half=md.x_half, nx=nx, ny=md.ny, P=md.P, T=sb.T, dt=sb.dt,
                          save_every=cfg.output.cadence, window=tuple(cfg.measurement.fit_window))
    sp = transverse_speed(model, profile)
    Z = compute_Z(model, profile, sp)
    m = {"runtime_s": time.perf_counter() - t0, "drift_max": float(r["drift"].max()),
         "two_dx": 2 * r["dx"], "drift_over_2dx": float(r["drift"].max() / (2 * r["dx"])),
         "w1inf.omega": r["fit"].omega, "w1inf.r2": r["fit"].r2,
         "w1inf.loglog_slope": r["fit"].loglog_slope, "w1inf.r2_loglog": r["fit"].r2_loglog,
         "w1inf.omega_pred": decay_rate_prediction(model, profile, 0.0),
         "sigma_perp": sp, "z_crosscheck": Z.crosscheck,
         "z_minus_bx": float(np.max(np.abs(Z(np.linspace(-5, 5, 101)) - md.b * np.linspace(-5, 5, 101)))),
         "target_residual": r["target"].residual()}
    return m, r


def proc_fv_crosscheck(cfg):
    """Characteristics vs Godunov on a pre-shock run, grid doubling and the L1 bound.

    The smooth comparison perturbs the configured wave; the L1 contraction
    check uses a compressive datum that forms a shock before ``l1_T``.
    """
    model = cfg.model.build()
    sb = cfg.solver
    profile = build_wave(model, cfg.wave)
    sigma = profile.sigma
    pert = build_perturbation(cfg.perturbation, model, profile)
    ref = profile if not profile.is_constant else ConstantRef(profile.endstate_minus)

    def u0(x):
        return ref.value(x) + pert(x)

    errs = []
    m = {}
    Ns = [sb.N // 4, sb.N // 2, sb.N]
    for N in Ns:
        dx = (sb.x_max - sb.x_min) / N
        x = sb.x_min + dx * (np.arange(N) + 0.5)
        # compare at five checkpoints; the characteristic step divides each
        nsteps = 5 * int(np.ceil(sb.T / (5 * min(sb.dt, 0.5 * dx))))
        fv = evolve_fv_oracle(model, sigma, u0, sb.T, cfl=sb.cfl, x=x,
                              save_times=[sb.T * k / 5 for k in range(1, 6)])
        ch = evolve_characteristics(model, sigma, GridFunction(x, u0(x)), sb.T, sb.T / nsteps,
                                    reference=ref, d0=pert(x), save_every=nsteps // 5)
        e = max(float(np.max(np.abs(a.values - b.values)))
                for a, b in zip(fv.snapshots, ch.snapshots[1:]))
        errs.append(e)
        m[f"linf.N{N}"] = e
    m["linf_finest"] = errs[-1]
    m["order"] = float(np.log2(errs[-2] / errs[-1]))
    m["order_coarse"] = float(np.log2(errs[0] / errs[1]))

    # ||u - v||_1(T) <= exp(L_g T) ||u0 - v0||_1 with L_g = max |g'|, through a shock
    T2 = cfg.measurement.l1_T
    N = sb.N
    dx = (sb.x_max - sb.x_min) / N
    x = sb.x_min + dx * (np.arange(N) + 0.5)
    lo, hi = model.u_range
    mid = 0.5 * (lo + hi)
    amp = 0.25 * (hi - lo)

    def w0(q):
        return mid - amp * np.tanh(q)

    def v0(q):
        return w0(q) + 0.1 * amp * np.exp(-(q - 1.0) ** 2)

    fu = evolve_fv_oracle(model, 0.0, w0, T2, cfl=sb.cfl, x=x, save_times=[T2 / 4 * k for k in range(5)])
    fv2 = evolve_fv_oracle(model, 0.0, v0, T2, cfl=sb.cfl, x=x, save_times=[T2 / 4 * k for k in range(5)])
    # value range actually visited by the two solutions
    vals = np.concatenate([s.values for s in fu.snapshots + fv2.snapshots])
    us = np.linspace(vals.min(), vals.max(), 2001)
    gamma = float(np.max(np.abs(model.dg(us))))
    l1_0 = float(np.sum(np.abs(w0(x) - v0(x))) * dx)
    l1_T = float(np.sum(np.abs(fu.snapshots[-1].values - fv2.snapshots[-1].values)) * dx)
    bound = np.exp(gamma * T2) * l1_0
    m["kruzhkov.l1_T"] = l1_T
    m["kruzhkov.bound"] = float(bound)
    m["kruzhkov.ratio"] = l1_T / bound
    m["kruzhkov.gamma"] = gamma
    m["kruzhkov.max_jump"] = float(np.max(np.abs(np.diff(fu.snapshots[-1].values))))
    return m, {}


# ------------------------------------------------------------ golden table

def golden_entries():
    """The eight catalog waves of the classification table (builders only)."""
    from .model import get_model
    bi = get_model("burgers_bistable")
    mono = get_model("burgers_monostable")
    three = get_model("burgers_three_zero")
    return [
        ("stable_constant", lambda: (bi, build_constant(bi, 1.0))),
        ("unstable_constant", lambda: (bi, build_constant(bi, 0.0))),
        ("monostable_front", lambda: (mono, build_smooth_front(mono, 0.0, 1.0, 2.0))),
        ("blocked_sigma_front", lambda: (mono, build_smooth_front(mono, 0.0, 1.0, 0.5))),
        ("tanh_front", lambda: (bi, build_characteristic_front(bi, 0.0, 0.0))),
        ("stable_riemann_shock", lambda: (bi, build_riemann_shock(bi, 1.0, -1.0)[1])),
        ("monostable_riemann_shock", lambda: (three, build_riemann_shock(three, 1.0, 0.0)[1])),
        ("two_jump_composite", two_jump_composite),
    ]


def two_jump_composite():
    """1.2 | characteristic through 0 | -1.2 for the double-well flux model."""
    from .model import get_model
    m = get_model("quartic_two_jump")
    u1 = float(np.sqrt(1.0 - np.sqrt(1.0 - 0.8064)))  # f(u1) = f(1.2), 0 < u1 < 1
    d1 = profile_distance(m, 0.0, 0.0, u1)
    d2 = profile_distance(m, 0.0, 0.0, -u1)
    pieces = [{"kind": "constant", "value": 1.2},
              {"kind": "characteristic", "u_star": 0.0, "x_star": 0.0},
              {"kind": "constant", "value": -1.2}]
    return m, build_composite(m, 0.0, pieces, [d1, d2], 30.0)


def proc_golden(cfg):
    m = {}
    for name, make in golden_entries():
        try:
            model, prof = make()
            c = classify_wave(model, prof)
            m[f"{name}.verdict"] = c.verdict
            m[f"{name}.case_id"] = c.case_id
            m[f"{name}.rescuable"] = bool(c.rescuable)
            m[f"{name}.isolated"] = bool(c.isolated)
            for side, k in c.kappa_plus_per_side.items():
                m[f"{name}.kappa_plus.{side}"] = k
            if c.subcase:
                m[f"{name}.subcase"] = c.subcase
        except (ProfileError, ValueError) as e:
            m[f"{name}.error"] = type(e).__name__
    return m, {}


PROCEDURES = {
    "classify": proc_classify,
    "profile": proc_profile,
    "evolve": proc_evolve,
    "tracking": proc_tracking,
    "decay": proc_decay,
    "multid": proc_multid,
    "golden": proc_golden,
    "fv_crosscheck": proc_fv_crosscheck,
    "tail_shift": proc_tail_shift,
}


# ----------------------------------------------------------- checks

def evaluate_check(chk, metrics):
    name, key = chk["name"], chk["metric"]
    out = {"name": name, "metric": key}
    if key not in metrics:
        out.update(value=None, passed=False, reason="metric missing")
        return out
    v = metrics[key]
    out["value"] = v
    if isinstance(v, str) != isinstance(chk.get("target", 0), str):
        out.update(passed=False, reason="type mismatch")
        return out
    ok = True
    tgt = chk.get("target")
    if tgt is not None:
        out["target"] = tgt
        if isinstance(tgt, (str, bool)):
            ok = ok and v == tgt
        elif "rel_tol" in chk:
            out["rel_err"] = abs(v - tgt) / abs(tgt)
            ok = ok and out["rel_err"] <= chk["rel_tol"]
        elif "abs_tol" in chk:
            ok = ok and abs(v - tgt) <= chk["abs_tol"]
        elif "factor" in chk:
            ok = ok and tgt / chk["factor"] <= v <= tgt * chk["factor"]
        else:
            ok = ok and v == tgt
    if "max" in chk:
        ok = ok and v <= chk["max"]
    if "min" in chk:
        ok = ok and v >= chk["min"]
    for k in ("rel_tol", "abs_tol", "max", "min", "factor"):
        if k in chk:
            out[k] = chk[k]
    out["passed"] = bool(ok)
    return out


def rate_table(metrics):
    """One row per fitted rate: value, R^2, log-log slope, prediction, relative error."""
    rows = []
    for k in sorted(metrics):
        if not k.endswith(".omega"):
            continue
        wid = k[: -len(".omega")]
        om = metrics[k]
        pred = metrics.get(f"{wid}.omega_pred")
        if pred is None and wid in ("psi_gap", "dpsi"):
            pred = metrics.get("rate_pred")
        if pred is None and "growth_rate_pred" in metrics:
            pred = -metrics["growth_rate_pred"]  # growth as a negative decay rate
        row = {"id": wid, "omega": om, "r2": metrics.get(f"{wid}.r2"),
               "loglog_slope": metrics.get(f"{wid}.loglog_slope"),
               "r2_loglog": metrics.get(f"{wid}.r2_loglog"), "prediction": pred}
        if pred:
            row["rel_err"] = abs(om - pred) / abs(pred)
        elif pred is None:
            row["note"] = "no decay predicted for this norm"
        rows.append(row)
    return rows


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


def run_experiment(cfg, override_unstable=False, series=None):
    """Run one config and return its RunSummary dict (never raises on solver errors)."""
    proc = PROCEDURES[cfg.experiment]
    summary = {"schema_version": cfgmod.SCHEMA_VERSION, "name": cfg.name,
               "experiment": cfg.experiment,
               "provenance": {"config_hash": cfg.hash(), "package": __version__,
                              "numpy": np.__version__, "scipy": scipy.__version__,
                              "python": platform.python_version()}}
    extra = {}
    try:
        if cfg.experiment == "evolve":
            metrics, extra = proc(cfg, override_unstable=override_unstable)
        elif cfg.experiment == "decay":
            metrics, extra = proc(cfg, series=series)
        else:
            metrics, extra = proc(cfg)
        summary["status"] = "ok"
    except Exception as e:  # noqa: BLE001 - recorded as a failed run
        log.error("%s failed: %s", cfg.name, e)
        metrics = {}
        summary["status"] = "failed"
        summary["error"] = f"{type(e).__name__}: {e}"
    metrics = {k: _jsonable(v) for k, v in metrics.items()}
    # wall-clock values are metadata so identical configs give identical metrics
    meta = {k: metrics.pop(k) for k in list(metrics) if "runtime" in k}
    summary["metadata"] = meta
    summary["metrics"] = metrics
    summary["rates"] = rate_table(metrics)
    cls = extra.get("classification") if isinstance(extra, dict) else None
    if cls is not None:
        summary["classification"] = cls.to_dict()
    checks = [evaluate_check(c, {**metrics, **{f"metadata.{k}": v for k, v in meta.items()}})
              for c in cfg.checks]
    summary["checks"] = checks
    summary["exploratory"] = bool(metrics.get("exploratory", False))
    summary["passed"] = summary["status"] == "ok" and all(c["passed"] for c in checks)
    return summary, extra


def write_outputs(cfg, summary, extra, out_dir):
    """Summary JSON plus series CSVs; a FAILED marker when the run failed."""
    import json
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_jsonable)
    if summary["status"] != "ok":
        with open(os.path.join(out_dir, "FAILED"), "w", encoding="utf-8") as fh:
            fh.write(summary.get("error", "") + "\n")
    if not isinstance(extra, dict):
        return
    tr = extra.get("trajectory")
    if tr is not None and hasattr(tr, "norm_series"):
        for wid in tr.norms:
            t, n = tr.norm_series(wid)
            write_norm_series(os.path.join(out_dir, f"norm_{wid}.csv"), t, n, wid)
        if tr.snapshots or any(tr.psi):
            tr.to_csv(out_dir, prefix="run")
    prof = extra.get("profile")
    if prof is not None:
        prof.to_csv(os.path.join(out_dir, "profile.csv"))
    if "target" in extra and "trajectory" in extra:
        from .multid import Field2D, write_levelset_series
        tr2 = extra["trajectory"]
        x, y, P = tr2.meta["x"], tr2.meta["y"], tr2.meta["P"]
        Field2D(x, y, tr2.u[-1], P, tr2.Y[-1]).to_csv(os.path.join(out_dir, "field_final.csv"))
        write_levelset_series(os.path.join(out_dir, "levelset.csv"), [0.0], y,
                              [extra["psi_char"]])
    _ = weighted_norm  # norms used by procedures via monitors
