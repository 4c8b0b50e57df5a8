"""Command line entry point: balancewaves {classify,profile,evolve,decay,multid,suite}."""
from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import config as cfgmod
from .experiments import read_norm_series, run_experiment, write_outputs

log = logging.getLogger("balancewaves")

# subcommand -> experiment kinds it accepts
ACCEPTS = {
    "classify": {"classify", "golden"},
    "profile": {"profile"},
    "evolve": {"evolve", "tracking", "tail_shift", "fv_crosscheck"},
    "decay": {"decay"},
    "multid": {"multid"},
}


def _load(path, overrides):
    with open(path, encoding="utf-8") as fh:
        import yaml
        d = yaml.safe_load(fh)
    if not isinstance(d, dict):
        raise cfgmod.ConfigError(f"{path}: top level must be a mapping")
    if overrides:
        d = cfgmod.apply_overrides(d, overrides)
    return cfgmod.ExperimentConfig.from_dict(d)


def _print_summary(s):
    state = "PASS" if s["passed"] else "FAIL"
    tag = " (exploratory)" if s.get("exploratory") else ""
    print(f"[{state}] {s['name']} ({s['experiment']}){tag}")
    if s.get("error"):
        print(f"    error: {s['error']}")
    for r in s.get("rates", []):
        pred = r.get("prediction")
        ps = f" pred={pred:.4g}" if isinstance(pred, (int, float)) else ""
        print(f"    rate {r['id']}: omega={r['omega']:.4g} R2={r['r2']:.4f}{ps}")
    for c in s["checks"]:
        mark = "ok " if c["passed"] else "BAD"
        print(f"    {mark} {c['name']}: {c['metric']} = {c.get('value')!r}")


def run_one(path, out, overrides=(), override_unstable=False, series=None, kind=None):
    """Load, run and write one config; returns its summary (never raises)."""
    try:
        cfg = _load(path, overrides)
    except (cfgmod.ConfigError, OSError, ValueError) as e:
        s = {"schema_version": cfgmod.SCHEMA_VERSION, "name": os.path.basename(path),
             "experiment": None, "status": "failed", "error": f"{type(e).__name__}: {e}",
             "metrics": {}, "checks": [], "rates": [], "passed": False}
        if out:
            os.makedirs(out, exist_ok=True)
            write_outputs(None, s, {}, out)
        return s
    if kind is not None and cfg.experiment not in ACCEPTS[kind]:
        raise SystemExit(f"config {path} is a {cfg.experiment!r} experiment, "
                         f"not accepted by '{kind}'")
    if out:
        cfg.output.directory = out
    s, extra = run_experiment(cfg, override_unstable=override_unstable, series=series)
    s["config_path"] = path
    if out:
        write_outputs(cfg, s, extra, out)
    return s


def _suite_worker(args):
    path, out, overrides, override_unstable = args
    logging.basicConfig(level=logging.WARNING)
    return run_one(path, out, overrides, override_unstable)


def cmd_suite(args):
    cdir = args.config
    if not os.path.isdir(cdir):
        raise SystemExit(f"suite needs a config directory, got {cdir!r}")
    paths = sorted(glob.glob(os.path.join(cdir, "*.yaml")) + glob.glob(os.path.join(cdir, "*.yml")))
    if not paths:
        raise SystemExit(f"no configs in {cdir!r}")
    out = args.out or "suite_out"
    os.makedirs(out, exist_ok=True)
    jobs = [(p, os.path.join(out, os.path.splitext(os.path.basename(p))[0]), args.set,
             args.override_unstable) for p in paths]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_suite_worker, jobs))
    else:
        results = [_suite_worker(j) for j in jobs]
    # deterministic fold in config order
    entries = []
    for p, s in zip(paths, results):
        _print_summary(s)
        entries.append({"config": os.path.basename(p), "name": s["name"],
                        "status": s["status"], "passed": s["passed"],
                        "failed_checks": [c["name"] for c in s["checks"] if not c["passed"]],
                        "error": s.get("error")})
    agg = {"schema_version": cfgmod.SCHEMA_VERSION, "n_configs": len(entries),
           "n_passed": sum(e["passed"] for e in entries),
           "passed": all(e["passed"] for e in entries), "entries": entries}
    with open(os.path.join(out, "suite_summary.json"), "w", encoding="utf-8") as fh:
        json.dump(agg, fh, indent=2)
    print(f"{agg['n_passed']}/{agg['n_configs']} configs passed")
    return 0 if agg["passed"] else 1


def cmd_single(args):
    series = None
    if args.command == "decay" and args.series:
        series = read_norm_series(args.series)
    s = run_one(args.config, args.out, args.set, args.override_unstable, series, args.command)
    _print_summary(s)
    if args.json:
        print(json.dumps(s, indent=2, sort_keys=True, default=str))
    return 0 if s["passed"] else 1


def build_parser():
    p = argparse.ArgumentParser(prog="balancewaves",
                                description="Traveling waves of scalar balance laws: "
                                            "profiles, stability classes, decay experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, hlp in [("classify", "build the wave and classify its stability"),
                      ("profile", "build and export a wave profile"),
                      ("evolve", "run a 1-D perturbation experiment"),
                      ("decay", "fit decay rates of norm series"),
                      ("multid", "run the 2-D planar-front experiment"),
                      ("suite", "run every config in a directory")]:
        sp = sub.add_parser(name, help=hlp)
        sp.add_argument("--config", required=True,
                        help="config directory" if name == "suite" else "YAML config file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--override-unstable", action="store_true",
                        help="allow runs of waves classified unstable (marked exploratory)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. solver.T=5")
        if name == "suite":
            sp.add_argument("--jobs", type=int, default=1, help="worker processes")
        else:
            sp.add_argument("--json", action="store_true", help="print the full summary")
        if name == "decay":
            sp.add_argument("--series", nargs="*", help="CSV files with t, norm, weight_id")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "suite":
        return cmd_suite(args)
    return cmd_single(args)


if __name__ == "__main__":
    sys.exit(main())
