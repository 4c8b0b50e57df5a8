"""Stability taxonomy of non-degenerate waves.

Three features trigger instability without weights: an endstate with
g' > 0, a jump with [g]/[u] > 0, or a characteristic value with g' < 0.
Unstable endstates (and only those) can be rescued by an exponential weight
on their side, which gives convective stability.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import source_zeros
from .profile import check_nondegenerate, profile_characteristic_values

SIGN_TOL = 1e-9

WEIGHTLESS = "weightless_stable"
CONVECTIVE = "convectively_stable"
UNSTABLE = "unstable"


class DegeneracyError(ValueError):
    pass


class UnclassifiableError(ValueError):
    pass


class StableEndstateError(ValueError):
    pass


class CharacteristicEndstateError(ValueError):
    pass


class SubcriticalWeightError(ValueError):
    pass


class GenericAssumptionWarning(UserWarning):
    pass


@dataclass
class Witness:
    trigger: str  # "endstate" | "jump" | "characteristic"
    location: object
    value: float


@dataclass
class Classification:
    verdict: str
    case_id: str
    witnesses: list
    kappa_plus_per_side: dict
    omega: dict
    spectrum_lines: list
    isolated: bool
    subcase: str = ""
    jump_ratios: list = field(default_factory=list)
    rescuable: bool = True
    warnings: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        d["witnesses"] = [asdict(w) for w in self.witnesses]
        d["omega"] = {repr(float(k)): v for k, v in self.omega.items()}
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _signed(v, what):
    if abs(v) <= SIGN_TOL:
        raise DegeneracyError(f"{what}={v:.3g} is inside the sign band: degenerate, unclassifiable")
    return v


def _endstates(profile):
    return (("minus", profile.endstate_minus), ("plus", profile.endstate_plus))


def _require_nondegenerate(model, profile):
    rep = check_nondegenerate(model, profile)
    if not rep.ok:
        raise DegeneracyError(f"profile fails non-degeneracy: {rep.witnesses}")
    return rep


def _char_values_used(model, profile):
    return [cv.value for cv in profile_characteristic_values(model, profile)]


def weightless_triggers(model, profile):
    """All instability features of the wave in unweighted spaces."""
    _require_nondegenerate(model, profile)
    out = []
    sides = _endstates(profile)
    if profile.is_constant:
        sides = sides[:1]
    for side, u in sides:
        dg = _signed(float(model.dg(u)), f"g'({side})")
        if dg > 0:
            out.append(Witness("endstate", side, dg))
    for d, ratio in zip(profile.discontinuities, profile.jump_ratios):
        # ratio 0 (jump between two zeros of g) is neutral, never a trigger
        if ratio > SIGN_TOL:
            out.append(Witness("jump", float(d), float(ratio)))
    for u in _char_values_used(model, profile):
        dg = _signed(float(model.dg(u)), "g'(u*)")
        if dg < 0:
            out.append(Witness("characteristic", float(u), dg))
    return out


def critical_weight(model, profile, side):
    """(kappa+, kappa -> Re line) for an unstable endstate on ``side``."""
    u = profile.endstate_plus if side == "plus" else profile.endstate_minus
    dg = float(model.dg(u))
    a = float(model.df(u)) - profile.sigma
    if dg <= 0:
        raise StableEndstateError(f"g'({u})={dg:.3g} <= 0: no critical weight")
    if a == 0:
        raise CharacteristicEndstateError(f"f'({u}) = sigma")
    kappa = dg / abs(a)

    def line(k):
        return dg - np.asarray(k) * abs(a)
    return kappa, line


def spectrum_line_value(model, profile, side, kappa):
    u = profile.endstate_plus if side == "plus" else profile.endstate_minus
    return float(model.dg(u)) - kappa * abs(float(model.df(u)) - profile.sigma)


def check_generic_assumption(model, tol=1e-9):
    """Pairs of distinct zeros with g' >= 0 and equal f' values (should be none)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        zs = [(z, d) for z, d in source_zeros(model) if d >= -tol]
    bad = []
    for i in range(len(zs)):
        for j in range(i + 1, len(zs)):
            u, v = zs[i][0], zs[j][0]
            if abs(float(model.df(u)) - float(model.df(v))) < tol:
                bad.append((u, v))
    return bad


def _piece_kind(seg):
    if seg.kind == "constant":
        return "constant"
    return "characteristic" if seg.kind == "characteristic-crossing" else "smooth"


def _shape(profile):
    kinds = [_piece_kind(s) for s in profile.segments]
    return "|".join(kinds), kinds


def classify_wave(model, profile, kappa_grid=None):
    """Verdict, case and predicted rates for a non-degenerate wave."""
    wit = weightless_triggers(model, profile)
    chars = _char_values_used(model, profile)
    shape, kinds = _shape(profile)
    njump = len(profile.discontinuities)
    notes = []
    bad = check_generic_assumption(model)
    if bad:
        msg = f"generic assumption fails for zero pairs {bad}"
        warnings.warn(msg, GenericAssumptionWarning, stacklevel=2)
        notes.append(msg)

    isolated = True
    for k in range(njump):
        if kinds[k] != "constant" and kinds[k + 1] != "constant":
            isolated = False

    kplus = {}
    sides = _endstates(profile)[:1] if profile.is_constant else _endstates(profile)
    for side, u in sides:
        if float(model.dg(u)) > 0 and not profile.is_constant:
            kplus[side] = critical_weight(model, profile, side)[0]

    rescuable = all(w.trigger == "endstate" for w in wit) and not profile.is_constant
    if not wit:
        verdict = WEIGHTLESS
    elif rescuable:
        verdict = CONVECTIVE
    else:
        verdict = UNSTABLE

    if verdict == UNSTABLE:
        kinds_hit = sorted({w.trigger for w in wit})
        case_id = "unstable:" + "+".join(kinds_hit)
        if profile.is_constant:
            case_id = "unstable:constant"
    elif profile.is_constant:
        case_id = "case1"
    elif njump == 0 and not chars:
        case_id = "case2"
    elif njump == 0 and len(chars) == 1:
        case_id = "case3"
    elif 1 <= njump <= 2 and len(chars) <= 1:
        case_id = "case4"
    else:
        raise UnclassifiableError(f"stable wave outside the four cases: {shape}")

    lines = []
    for side, u in sides:
        lines.append((side, 0.0, spectrum_line_value(model, profile, side, 0.0)))
        if side in kplus:
            lines.append((side, kplus[side], 0.0))

    omega = {}
    if verdict != UNSTABLE:
        if kplus:
            kp = max(kplus.values())
            grid = kappa_grid if kappa_grid is not None else [kp, kp + 0.5, kp + 1.0, 2 * kp]
            for k in grid:
                if k >= kp:
                    omega[float(k)] = decay_rate_prediction(model, profile, k, _cls=(case_id, kplus))
        else:
            omega[0.0] = decay_rate_prediction(model, profile, 0.0, _cls=(case_id, kplus))

    return Classification(verdict, case_id, wit, kplus, omega, lines, isolated,
                          shape if case_id == "case4" else "",
                          list(profile.jump_ratios), rescuable or not wit, notes)


def decay_rate_prediction(model, profile, kappa=0.0, _cls=None):
    """Predicted exponential decay rate in the natural (weighted) norm.

    Stable endstates contribute |g'|, characteristic points g'(u*), jumps
    with negative ratio |[g]/[u]|, and each unstable endstate the weighted
    margin (kappa - kappa+) |f'(u) - sigma|; the rate is the minimum.
    """
    if _cls is None:
        c = classify_wave(model, profile)
        if c.verdict == UNSTABLE:
            raise ValueError(f"no decay rate for an unstable wave ({c.case_id})")
        case_id, kplus = c.case_id, c.kappa_plus_per_side
    else:
        case_id, kplus = _cls
    rates = []
    sides = _endstates(profile)[:1] if profile.is_constant else _endstates(profile)
    for side, u in sides:
        dg = float(model.dg(u))
        if dg < 0:
            rates.append(-dg)
        else:
            kp = kplus[side]
            if kappa < kp - 1e-12:
                raise SubcriticalWeightError(f"kappa={kappa} below kappa+={kp} ({side})")
            rates.append(max(kappa - kp, 0.0) * abs(float(model.df(u)) - profile.sigma))
    for u in _char_values_used(model, profile):
        rates.append(float(model.dg(u)))
    for r in profile.jump_ratios:
        if r < -SIGN_TOL:
            rates.append(-r)
    return float(min(rates))
