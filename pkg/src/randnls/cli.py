"""
Command line entry point.

Exit codes: 0 ok, 1 configuration error, 2 blow-up, 3 partial ensemble
(``check`` also returns 1 when any row fails).
"""
import argparse
import json
import logging
import sys
from pathlib import Path

from randnls.errors import ConfigurationError, RandNLSError
from randnls.harness import config as cfgmod
from randnls.harness.checks import all_passed, check_suite, format_table
from randnls.harness.runner import (
    EXIT_CONFIG,
    EXIT_OK,
    canonical_json,
    diagnose,
    run_ensemble,
    run_single,
)


def _load_config(args):
    if args.config:
        cfg = cfgmod.load(args.config, paper_regime=args.paper_regime)
    else:
        cfg = cfgmod.RunConfig()
        cfgmod.validate(cfg, paper_regime=args.paper_regime)
    if getattr(args, "linear_only", False):
        cfg = cfg.replace(evolution={"linear_only": True})
    if getattr(args, "out", None):
        cfg = cfg.replace(output={"directory": args.out})
    return cfg


def cmd_simulate(args):
    cfg = _load_config(args)
    res = run_single(cfg, seed=args.seed)
    diag = res.results.get("diagnostics", {})
    summary = {"exit_code": res.exit_code, "out": str(res.out_dir),
               "blowup": res.results.get("blowup"),
               "mass_drift": diag.get("conserved", {}).get("mass_drift"),
               "energy_drift": diag.get("conserved", {}).get("energy_drift"),
               "scattered": diag.get("scattering", {}).get("scattered")}
    print(json.dumps(summary, indent=1))
    return res.exit_code


def cmd_ensemble(args):
    cfg = _load_config(args)
    rng = cfgmod.parse_seed_range(args.seeds) if args.seeds else cfg.randomization.seeds
    if rng is None:
        raise ConfigurationError("ensemble needs --seeds A..B or randomization.seeds")
    seeds = range(rng[0], rng[1] + 1)
    res = run_ensemble(cfg, seeds, workers=args.workers)
    agg = res.report.get("aggregate", res.report)
    print(canonical_json({"exit_code": res.exit_code, "out": str(res.out_dir), "aggregate": agg}))
    return res.exit_code


def cmd_diagnose(args):
    run_dir = Path(args.run)
    cfg = cfgmod.load(args.config) if args.config else None
    out = diagnose(run_dir, cfg)
    text = canonical_json(out)
    target = Path(args.out) if args.out else run_dir / "diagnostics.json"
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text)
    print(f"wrote {target}")
    return EXIT_OK


def cmd_check(args):
    cfg = _load_config(args)
    if args.d1:
        cfg = cfg.replace(grid={"d": 1, "n": max(cfg.grid.n, 64)})
    rows = check_suite(cfg, fault=args.inject_fault)
    print(format_table(rows))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "checks.json").write_text(canonical_json([r.as_dict() for r in rows]))
    return EXIT_OK if all_passed(rows) else 1


def cmd_embedding(args):
    from randnls.harness.experiments import embedding_experiment

    cfg = _load_config(args)
    out = embedding_experiment(cfg, ns=args.n, deltas=args.delta)
    text = canonical_json(out)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "embedding.json").write_text(text)
    print(text)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="randnls", description=__doc__.strip().splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", metavar="PATH", help="YAML run configuration")
        sp.add_argument("--paper-regime", action="store_true",
                        help="reject (s, sigma) outside 3/7 < s <= 1, 6/7 < sigma < 2s")
        sp.add_argument("--out", metavar="DIR", help="output directory")

    sp = sub.add_parser("simulate", help="single run with diagnostics")
    common(sp)
    sp.add_argument("--seed", type=int, metavar="N")
    sp.add_argument("--linear-only", action="store_true", help="validation run without the nonlinearity")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("ensemble", help="seed ensemble with aggregate fits")
    common(sp)
    sp.add_argument("--seeds", metavar="A..B")
    sp.add_argument("--workers", type=int, metavar="K")
    sp.add_argument("--linear-only", action="store_true")
    sp.set_defaults(func=cmd_ensemble)

    sp = sub.add_parser("diagnose", help="recompute diagnostics of a stored run")
    sp.add_argument("run", metavar="RUN_DIR")
    sp.add_argument("--config", metavar="PATH", help="override the stored config")
    sp.add_argument("--out", metavar="PATH", help="output file (default RUN_DIR/diagnostics.json)")
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("check", help="invariant suite")
    common(sp)
    sp.add_argument("--d1", action="store_true", help="fast one-dimensional mode")
    sp.add_argument("--inject-fault", choices=["normalization"], help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("embedding", help="weighted square-function experiment")
    common(sp)
    sp.add_argument("--n", type=int, nargs="+", default=[32, 64])
    sp.add_argument("--delta", type=float, nargs="+", default=[0.05, 0.1, 0.2])
    sp.set_defaults(func=cmd_embedding)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RandNLSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
