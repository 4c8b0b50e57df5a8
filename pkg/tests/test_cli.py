import json
import pathlib
import shutil

import pytest

from balancewaves.cli import main

ROOT = pathlib.Path(__file__).resolve().parents[1]
EX = ROOT / "configs" / "examples"


def _summary(d):
    return json.loads((d / "summary.json").read_text())


def test_classify_json(tmp_path, capsys):
    assert main(["classify", "--config", str(EX / "classify_tanh.yaml"),
                 "--out", str(tmp_path), "--json"]) == 0
    s = _summary(tmp_path)
    assert s["passed"] and s["classification"]["case_id"] == "case3"
    assert "[PASS]" in capsys.readouterr().out


def test_wrong_subcommand_rejected(tmp_path):
    with pytest.raises(SystemExit):
        main(["multid", "--config", str(EX / "classify_tanh.yaml"), "--out", str(tmp_path)])


def test_unstable_needs_override(tmp_path):
    cfg = str(EX / "evolve_unstable_constant.yaml")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["evolve", "--config", cfg, "--out", str(a), "--set", "solver.T=2"]) == 1
    s = _summary(a)
    assert s["status"] == "failed" and "UnstableRunError" in s["error"]
    assert (a / "FAILED").exists()
    main(["evolve", "--config", cfg, "--out", str(b), "--set", "solver.T=4",
          "--override-unstable"])
    s = _summary(b)
    assert s["exploratory"] and s["status"] != "failed"
    assert s["metrics"]["sup.growth_rate"] == pytest.approx(1.0, rel=0.1)


def test_suite_with_corrupt_config(tmp_path):
    cdir = tmp_path / "cfg"
    cdir.mkdir()
    for n in ("classify_tanh.yaml", "classify_monostable.yaml"):
        shutil.copy(EX / n, cdir / n)
    (cdir / "zz_broken.yaml").write_text("name: broken\nexperiment: classify\nmodel: {catalog: nope}\n")
    out = tmp_path / "out"
    assert main(["suite", "--config", str(cdir), "--out", str(out)]) == 1
    agg = json.loads((out / "suite_summary.json").read_text())
    assert agg["n_configs"] == 3 and agg["n_passed"] == 2
    bad = [e for e in agg["entries"] if e["config"] == "zz_broken.yaml"][0]
    assert bad["status"] == "failed" and "catalog" in bad["error"]
    assert (out / "zz_broken" / "FAILED").exists()


def test_suite_empty_directory(tmp_path):
    with pytest.raises(SystemExit):
        main(["suite", "--config", str(tmp_path)])


def test_summaries_are_reproducible(tmp_path):
    cdir = tmp_path / "cfg"
    cdir.mkdir()
    for n in ("classify_tanh.yaml", "profile_monostable.yaml", "decay_synthetic.yaml"):
        shutil.copy(EX / n, cdir / n)
    runs = []
    for k, jobs in enumerate(("1", "2")):
        out = tmp_path / f"o{k}"
        assert main(["suite", "--config", str(cdir), "--out", str(out), "--jobs", jobs]) == 0
        blobs = {}
        for p in sorted(out.rglob("summary.json")):
            s = json.loads(p.read_text())
            s.get("metadata", {}).pop("runtime_s", None)
            blobs[p.parent.name] = json.dumps(s, sort_keys=True)
        runs.append(blobs)
    assert runs[0] == runs[1]
