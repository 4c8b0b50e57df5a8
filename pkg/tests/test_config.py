import pathlib

import pytest
import yaml

from balancewaves.config import ConfigError, ExperimentConfig, apply_overrides, dump, load
from balancewaves.experiments import evaluate_check

ROOT = pathlib.Path(__file__).resolve().parents[1]
BASE = {"name": "t", "experiment": "classify", "model": {"catalog": "burgers_bistable"},
        "wave": {"kind": "characteristic_front", "u_star": 0.0, "sigma": 0.0}}


@pytest.mark.parametrize("path", sorted(ROOT.glob("configs/*/*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs_round_trip(path, tmp_path):
    cfg = load(path)
    out = tmp_path / "c.yaml"
    dump(cfg, out)
    again = load(out)
    assert again.to_dict() == cfg.to_dict()
    assert again.hash() == cfg.hash()


@pytest.mark.parametrize("patch, msg", [
    ({"model": {"catalog": "nope"}}, "unknown catalog"),
    ({"experiment": "bogus"}, "experiment"),
    ({"perturbation": {"amplitude": -1.0}}, "perturbation/amplitude"),
    ({"solver": {"cfl": 1.5}}, "solver/cfl"),
    ({"model": {"f": [0, 0, 0.5]}}, "catalog id or f and g"),
    ({"extra": 1}, "Additional properties"),
    ({"checks": [{"metric": "x"}]}, "name"),
])
def test_schema_errors(patch, msg):
    d = {**BASE, **patch}
    with pytest.raises(ConfigError, match=msg):
        ExperimentConfig.from_dict(d)


def test_overrides_and_hash():
    d = apply_overrides(BASE, ["solver.T=5", "wave.sigma=0.5"])
    assert d["solver"]["T"] == 5 and d["wave"]["sigma"] == 0.5
    assert "solver" not in BASE
    a, b = ExperimentConfig.from_dict(BASE), ExperimentConfig.from_dict(d)
    assert a.hash() != b.hash()
    with pytest.raises(ConfigError):
        apply_overrides(BASE, ["solverT"])


def test_top_level_must_be_mapping(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text(yaml.safe_dump([1, 2]))
    with pytest.raises(ConfigError):
        load(p)


def test_check_evaluation():
    m = {"a": 1.05, "s": "case3", "b": True}
    assert evaluate_check({"name": "x", "metric": "a", "target": 1.0, "rel_tol": 0.1}, m)["passed"]
    assert not evaluate_check({"name": "x", "metric": "a", "target": 1.0, "rel_tol": 0.01}, m)["passed"]
    assert evaluate_check({"name": "x", "metric": "a", "max": 2.0, "min": 1.0}, m)["passed"]
    assert evaluate_check({"name": "x", "metric": "a", "target": 2.0, "factor": 2.0}, m)["passed"]
    assert evaluate_check({"name": "x", "metric": "s", "target": "case3"}, m)["passed"]
    assert evaluate_check({"name": "x", "metric": "b", "target": True}, m)["passed"]
    assert not evaluate_check({"name": "x", "metric": "s", "target": 1.0}, m)["passed"]
    assert not evaluate_check({"name": "x", "metric": "missing", "max": 1.0}, m)["passed"]
