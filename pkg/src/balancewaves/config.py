"""Experiment configuration: nested dataclasses, a JSON schema and YAML I/O.

A config names an experiment procedure and carries the model, wave,
perturbation, solver, measurement and output blocks, plus the checks
(metric, target, tolerance) that decide pass/fail.  Thresholds live here,
never in the report code.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

import jsonschema
import yaml

from .model import ModelSpec, catalog

SCHEMA_VERSION = "1.0"

EXPERIMENTS = ("classify", "profile", "evolve", "tracking", "decay", "multid",
               "golden", "fv_crosscheck", "tail_shift")

_num = {"type": "number"}
_numlist = {"type": "array", "items": _num}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "balancewaves experiment config",
    "type": "object",
    "required": ["name", "experiment", "model"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "experiment": {"enum": list(EXPERIMENTS)},
        "description": {"type": "string"},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "catalog": {"type": "string"},
                "f": _numlist, "g": _numlist,
                "fperp": {"anyOf": [_numlist, {"type": "null"}]},
                "u_range": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "source_roots": _numlist, "source_scale": _num,
            },
        },
        "wave": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["constant", "smooth_front", "characteristic_front",
                                  "riemann_shock", "composite", "mixed"]},
                "value": _num, "u_minus": _num, "u_plus": _num, "u_star": _num,
                "u_left": _num, "u_right": _num,
                "sigma": {"anyOf": [_num, {"type": "null"}]},
                "L": {"anyOf": [_num, {"type": "null"}]},
                "pieces": {"type": "array", "items": {"type": "object"}},
                "jumps": _numlist,
            },
        },
        "perturbation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "family": {"enum": ["none", "sech", "sech2", "exp_tail", "algebraic_tail",
                                    "sech_cos"]},
                "amplitude": {"type": "number", "exclusiveMinimum": 0},
                "sign": {"enum": [-1, 1]},
                "center": {"anyOf": [_num, {"enum": ["x_star"]}]},
                "side": {"enum": ["both", "left", "right"]},
                "kappa": {"anyOf": [_num, {"enum": ["kappa_plus"]}]},
                "cutoff": _num,
                "rho": {"type": "object"},
                "seed": {"type": "integer"},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "N": {"type": "integer", "minimum": 16},
                "dx": {"type": "number", "exclusiveMinimum": 0},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "cfl": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "T": {"type": "number", "exclusiveMinimum": 0},
                "collar": {"type": "number", "exclusiveMinimum": 0},
                "x_min": _num, "x_max": _num,
                "pad": _numlist,
                "L": _num,
            },
        },
        "measurement": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "weights": {"type": "array", "items": {"type": "object"}},
                "fit_window": {"anyOf": [_numlist, {"type": "null"}]},
                "window": {"anyOf": [_numlist, {"type": "null"}]},
                "deviation": {"enum": ["reference", "star_shift", "orbital"]},
                "doubling": {"type": "boolean"},
                "l1_T": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "multid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "P": {"type": "number", "exclusiveMinimum": 0},
                "ny": {"type": "integer", "minimum": 4},
                "psi_amp": _num,
                "b": _num,
                "x_half": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "cadence": {"type": "integer", "minimum": 1},
            },
        },
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "metric"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "metric": {"type": "string"},
                    "target": {"anyOf": [_num, {"type": "string"}, {"type": "boolean"}]},
                    "rel_tol": _num, "abs_tol": _num, "max": _num, "min": _num,
                    "factor": _num,
                },
            },
        },
    },
}


class ConfigError(ValueError):
    pass


@dataclass
class ModelBlock:
    catalog: str | None = None
    f: list | None = None
    g: list | None = None
    fperp: list | None = None
    u_range: list | None = None
    source_roots: list | None = None  # g = source_scale * prod (u - r)
    source_scale: float | None = None

    def build(self) -> ModelSpec:
        if self.catalog is not None:
            base = catalog()[self.catalog]
            if self.fperp is None and self.u_range is None:
                return base
            return ModelSpec(base.f_coeffs, base.g_coeffs,
                             self.fperp if self.fperp is not None else base.fperp_coeffs,
                             self.u_range or base.u_range, name=base.name)
        g = self.g
        if self.source_roots is not None:
            from numpy.polynomial import polynomial as P
            g = list(P.polyfromroots(self.source_roots) * (self.source_scale or 1.0))
        return ModelSpec(self.f, g, self.fperp, self.u_range or (-10.0, 10.0))


@dataclass
class WaveBlock:
    kind: str = "constant"
    value: float | None = None
    u_minus: float | None = None
    u_plus: float | None = None
    u_star: float | None = None
    u_left: float | None = None
    u_right: float | None = None
    sigma: float | None = None
    L: float | None = None
    pieces: list | None = None
    jumps: list | None = None


@dataclass
class PerturbationBlock:
    family: str = "none"
    amplitude: float = 0.01
    sign: int = 1
    center: object = 0.0
    side: str = "both"
    kappa: object = None
    cutoff: float | None = None
    rho: dict | None = None
    seed: int | None = None


@dataclass
class SolverBlock:
    N: int | None = None
    dx: float | None = None
    dt: float = 0.05
    cfl: float = 0.45
    T: float = 10.0
    collar: float = 2.0
    x_min: float = -15.0
    x_max: float = 15.0
    pad: list | None = None
    L: float | None = None


@dataclass
class MeasurementBlock:
    weights: list = field(default_factory=list)  # [{"kappa":..,"rho":{..},"side":..,"id":..}]
    fit_window: list | None = None
    window: list | None = None  # spatial window for the norms
    deviation: str = "reference"
    doubling: bool = False
    l1_T: float = 2.0  # horizon of the L1 contraction check (runs through shocks)


@dataclass
class MultidBlock:
    P: float = 6.283185307179586
    ny: int = 16
    psi_amp: float = 0.05
    b: float = 0.0
    x_half: float = 8.0


@dataclass
class OutputBlock:
    directory: str | None = None
    cadence: int = 1


@dataclass
class ExperimentConfig:
    name: str
    experiment: str
    model: ModelBlock
    description: str = ""
    wave: WaveBlock = field(default_factory=WaveBlock)
    perturbation: PerturbationBlock = field(default_factory=PerturbationBlock)
    solver: SolverBlock = field(default_factory=SolverBlock)
    measurement: MeasurementBlock = field(default_factory=MeasurementBlock)
    multid: MultidBlock = field(default_factory=MultidBlock)
    output: OutputBlock = field(default_factory=OutputBlock)
    checks: list = field(default_factory=list)

    _BLOCKS = {"model": ModelBlock, "wave": WaveBlock, "perturbation": PerturbationBlock,
               "solver": SolverBlock, "measurement": MeasurementBlock, "multid": MultidBlock,
               "output": OutputBlock}

    @classmethod
    def from_dict(cls, d):
        validate(d)
        d = copy.deepcopy(d)
        kw = {}
        for f in fields(cls):
            if f.name not in d:
                continue
            blk = cls._BLOCKS.get(f.name)
            kw[f.name] = blk(**d[f.name]) if blk is not None else d[f.name]
        return cls(**kw)

    def to_dict(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in self._BLOCKS:
                v = {k: x for k, x in asdict(v).items() if x is not None}
            out[f.name] = v
        return out

    def hash(self):
        """Content hash of everything that affects results (not the output block)."""
        d = self.to_dict()
        d.pop("output", None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def validate(d):
    """Schema check plus the semantic rules the schema cannot express."""
    try:
        jsonschema.validate(d, SCHEMA)
    except jsonschema.ValidationError as e:
        path = "/".join(str(p) for p in e.absolute_path)
        raise ConfigError(f"{path or '<root>'}: {e.message}") from None
    m = d["model"]
    if "catalog" in m:
        if m["catalog"] not in catalog():
            raise ConfigError(f"model/catalog: unknown catalog id {m['catalog']!r}")
    elif "f" not in m or ("g" not in m and "source_roots" not in m):
        raise ConfigError("model: give a catalog id or f and g (or source_roots)")


def load(path):
    with open(path, encoding="utf-8") as fh:
        d = yaml.safe_load(fh)
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return ExperimentConfig.from_dict(d)


def dump(cfg, path=None):
    text = yaml.safe_dump(cfg.to_dict(), sort_keys=False)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def apply_overrides(d, pairs):
    """Dotted ``block.key=value`` overrides (values parsed as YAML scalars)."""
    d = copy.deepcopy(d)
    for p in pairs:
        key, _, val = p.partition("=")
        if not _:
            raise ConfigError(f"override {p!r} is not key=value")
        node = d
        parts = key.split(".")
        for k in parts[:-1]:
            node = node.setdefault(k, {})
        node[parts[-1]] = yaml.safe_load(val)
    return d
