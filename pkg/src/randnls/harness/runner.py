"""
Single runs and seed ensembles.

A run directory holds ``config.yaml``, ``report.json``, ``checkpoints.csv``,
``u0.nlsf`` / ``f0_omega.nlsf`` / ``final.nlsf`` and, optionally,
``trajectory/`` with every checkpoint.  ``report.json`` separates the
deterministic ``results`` payload from ``provenance`` (timestamps, backend).
"""
import csv
import json
import logging
import math
import multiprocessing
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from randnls import _kernels
from randnls.diagnostics import (
    commutator_H,
    conserved_set,
    energy_increment_series,
    f_norm_bundle,
    interaction_morawetz_report,
    morawetz_record,
    power_law_fit,
    scattering_detect,
    theta_monitor,
    wrap_horizon,
    zI_bundle,
)
from randnls.diagnostics.energy import modified_energy
from randnls.errors import BlowUpError, ConfigurationError, EstimationError, RandNLSError
from randnls.evolution import EvolutionConfig, Trajectory, evolve, forced_remainder, linear_propagate, linear_trajectory
from randnls.harness import config as cfgmod
from randnls.harness.config import RunConfig
from randnls.harness.fieldio import load_field, save_field
from randnls.randomization import (
    RadialProfile,
    complex_gaussians,
    generator,
    randomize,
    synthesize_profile,
    tail_fit,
)
from randnls.spectral import Field, GridSpec, IOperatorSpec, PHYSICAL

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BLOWUP = 2
EXIT_PARTIAL = 3


@dataclass
class RunResult:
    exit_code: int
    results: dict
    out_dir: Optional[Path] = None

    def payload(self) -> str:
        return canonical_json(self.results)


def canonical_json(obj) -> str:
    return json.dumps(_sanitize(obj), sort_keys=True, indent=1)


def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    return obj


# --------------------------------------------------------------------------
# setup


def build_grid(cfg: RunConfig) -> GridSpec:
    return GridSpec(cfg.grid.n, cfg.grid.L, cfg.grid.d)


def build_profile(cfg: RunConfig) -> Field:
    g = build_grid(cfg)
    p = cfg.profile
    if p.kind == "power":
        return synthesize_profile(RadialProfile(p.s, p.decay_margin, p.amplitude, g))
    if p.kind == "gaussian":
        r = g.radius()
        return Field.physical(g, (p.amplitude * np.exp(-r * r / (2.0 * p.width ** 2))).astype(complex))
    return Field.physical(g, np.full(g.shape, p.amplitude, dtype=complex))


def build_initial(cfg: RunConfig, seed: int):
    """``(f0, f0_omega)``; without randomisation the two coincide."""
    f0 = build_profile(cfg)
    if cfg.randomization.enabled:
        return f0, randomize(f0, seed).field
    return f0, f0


def i_specs(cfg: RunConfig) -> List[IOperatorSpec]:
    io = cfg.i_operator
    return [IOperatorSpec(N, io.sigma, io.transition) for N in io.N]


def evolution_config(cfg: RunConfig, linear_only: bool = False) -> EvolutionConfig:
    ev = cfg.evolution
    return EvolutionConfig(ev.dt, ev.t_end, ev.checkpoint_every, ev.dealias, 1,
                           ev.halve_on_guard, ev.linear_only or linear_only)


# --------------------------------------------------------------------------
# diagnostics


def _section(fn):
    try:
        return fn()
    except (EstimationError, ConfigurationError) as exc:
        return {"skipped": str(exc)}


def _rel(a, b):
    return abs(b - a) / abs(a) if a != 0 else abs(b - a)


def _fmtN(N):
    return f"{N:g}"


def checkpoint_rows(traj: Trajectory, f0_omega: Field, specs) -> List[dict]:
    rows = []
    for t, u in zip(traj.times, traj.checkpoints):
        c = conserved_set(u)
        row = {"t": t, "mass": c.mass, "kinetic": c.kinetic, "potential": c.potential,
               "energy": c.energy, "max_abs": _kernels.abs_max(u.values())}
        f = linear_propagate(f0_omega, t)
        for spec in specs:
            row[f"modified_energy_N{_fmtN(spec.N)}"] = modified_energy(u - f, f, spec)
        rows.append(row)
    return rows


def compute_diagnostics(traj: Trajectory, f0_omega: Field, cfg: RunConfig, rows=None) -> dict:
    """Every configured functional on one trajectory, as a JSON-ready dict."""
    dg = cfg.diagnostics
    want = set(dg.functionals)
    specs = i_specs(cfg)
    g = traj.grid
    out = {}
    rows = rows if rows is not None else checkpoint_rows(traj, f0_omega, specs)

    if "conserved" in want:
        first, last = rows[0], rows[-1]
        out["conserved"] = {
            "initial": {k: first[k] for k in ("mass", "kinetic", "potential", "energy")},
            "final": {k: last[k] for k in ("mass", "kinetic", "potential", "energy")},
            "mass_drift": max(_rel(first["mass"], r["mass"]) for r in rows),
            "energy_drift": max(_rel(first["energy"], r["energy"]) for r in rows),
        }

    if "increments" in want:
        def inc():
            rep = energy_increment_series(traj, f0_omega, specs)
            d = {"total_variation": {_fmtN(N): s.total_variation for N, s in rep.series.items()},
                 "max_increment": {_fmtN(N): float(s.increments.max()) for N, s in rep.series.items()}}
            if rep.fit is not None:
                d["fit"] = {"exponent": rep.fit.exponent, "prefactor": rep.fit.prefactor,
                            "residual_rms": rep.fit.residual_rms, "n_points": rep.fit.n_points}
            return d
        out["increments"] = _section(inc)

    if "commutator" in want:
        out["commutator"] = {
            _fmtN(s.N): {"initial": commutator_H(traj.checkpoints[0], s).l2_norm,
                         "final": commutator_H(traj.checkpoints[-1], s).l2_norm}
            for s in specs}

    if "morawetz" in want:
        if g.d != 3:
            out["morawetz"] = {"skipped": "Morawetz weights are defined for d=3 only"}
        else:
            def mor():
                d = {}
                for s in specs:
                    rep = interaction_morawetz_report(traj, s).as_dict()
                    rec = morawetz_record(traj.checkpoints[-1], s)
                    rep.update({"action_origin_final": rec.action_origin,
                                "interaction_final": rec.interaction})
                    d[_fmtN(s.N)] = rep
                return d
            out["morawetz"] = _section(mor)

    if "norms" in want:
        def norms():
            lin = linear_trajectory(f0_omega, traj.times)
            v = forced_remainder(traj, f0_omega)
            d = {"zI": {}, "F": None, "F_inf": None, "F2": {}, "constituents": {}}
            for s in specs:
                d["zI"][_fmtN(s.N)] = zI_bundle(v, s, dg.pairs)
                b = f_norm_bundle(lin, s, dg.s_bundle, dg.include_l10_3)
                d["F"], d["F_inf"] = b.F, b.F_inf
                d["F2"][_fmtN(s.N)] = b.F2
                d["constituents"][_fmtN(s.N)] = b.constituents
            return d
        out["norms"] = _section(norms)

    if "scattering" in want:
        def scat():
            hz = dg.scattering_horizon
            horizon = wrap_horizon(traj.checkpoints[0]) if hz == "wrap" else (
                None if hz == "none" else float(hz))
            if horizon is not None and not math.isfinite(horizon):
                horizon = None
            window = min(dg.scattering_window,
                         max(1, sum(1 for t in traj.times if horizon is None or t <= horizon) - 1))
            v = scattering_detect(traj, dg.scattering_sigma, dg.scattering_tol, window,
                                  f0_omega, horizon)
            d = v.as_dict()
            d.update({"horizon": horizon, "window": window, "tol": dg.scattering_tol})
            return d
        out["scattering"] = _section(scat)

    if "theta" in want:
        out["theta"] = {
            _fmtN(s.N): theta_monitor(traj, f0_omega, s, dg.M_cap, dg.energy_unit).as_dict()
            for s in specs}
    return out


# --------------------------------------------------------------------------
# persistence


def _write_csv(rows, path):
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(float(v)) for k, v in r.items()})


def save_trajectory(traj: Trajectory, directory):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    names = []
    for i, u in enumerate(traj.checkpoints):
        name = f"cp_{i:05d}.nlsf"
        save_field(u, d / name)
        names.append(name)
    meta = {"times": list(map(float, traj.times)), "files": names,
            "meta": _sanitize({k: v for k, v in traj.meta.items()
                               if isinstance(v, (int, float, str, bool))})}
    (d / "trajectory.json").write_text(json.dumps(meta, indent=1))


def load_trajectory(directory) -> Trajectory:
    d = Path(directory)
    meta = json.loads((d / "trajectory.json").read_text())
    cps = [load_field(d / name) for name in meta["files"]]
    return Trajectory(meta["times"], cps, cps[0], None, meta.get("meta", {}))


def _provenance():
    from randnls import __version__
    return {"generated_at": time.strftime("%Y-%m-%dT%H:%M:%S"), "version": __version__,
            "backend": _kernels.BACKEND}


def write_report(out_dir: Path, results: dict, cfg: RunConfig):
    out_dir.mkdir(parents=True, exist_ok=True)
    cfgmod.save(cfg, out_dir / "config.yaml")
    doc = {"results": _sanitize(results), "provenance": _provenance()}
    (out_dir / "report.json").write_text(json.dumps(doc, sort_keys=True, indent=1))


# --------------------------------------------------------------------------
# single run


def run_single(cfg: RunConfig, seed: Optional[int] = None, out_dir=None,
               linear_only: bool = False, write: bool = True) -> RunResult:
    """
    Evolve one draw and evaluate every configured diagnostic.

    Exit code 0 on success, 2 on blow-up (diagnostics of the partial
    trajectory are still reported).
    """
    seed = cfg.randomization.seed if seed is None else int(seed)
    out = Path(out_dir if out_dir is not None else cfg.output.directory)
    f0, f0w = build_initial(cfg, seed)
    econf = evolution_config(cfg, linear_only)
    exit_code = EXIT_OK
    blowup = None
    try:
        traj = evolve(f0w.to_physical(), econf)
    except BlowUpError as exc:
        traj = exc.trajectory
        exit_code = EXIT_BLOWUP
        blowup = {"time": exc.time, "message": str(exc)}
    specs = i_specs(cfg)
    results = {
        "seed": seed,
        "grid": {"n": cfg.grid.n, "L": cfg.grid.L, "d": cfg.grid.d},
        "linear_only": econf.linear_only,
        "evolution": {k: traj.meta.get(k) for k in ("dt_effective", "n_steps", "guard_violations", "halvings")},
        "times": list(map(float, traj.times)),
        "blowup": blowup,
    }
    rows = None
    with np.errstate(over="ignore", invalid="ignore"):
        rows = checkpoint_rows(traj, f0w, specs)
        if len(traj) >= 2:
            results["diagnostics"] = compute_diagnostics(traj, f0w, cfg, rows)
        else:
            results["diagnostics"] = {"skipped": "fewer than two checkpoints"}
    if write:
        write_report(out, results, cfg)
        if cfg.output.csv:
            _write_csv(rows, out / "checkpoints.csv")
        save_field(f0, out / "u0.nlsf")
        save_field(f0w, out / "f0_omega.nlsf")
        save_field(traj.checkpoints[-1], out / "final.nlsf")
        if cfg.output.save_trajectory:
            save_trajectory(traj, out / "trajectory")
    return RunResult(exit_code, results, out if write else None)


def diagnose(run_dir, cfg: Optional[RunConfig] = None) -> dict:
    """Recompute diagnostics from a stored run directory."""
    d = Path(run_dir)
    if cfg is None:
        cfg = cfgmod.load(d / "config.yaml")
    traj = load_trajectory(d / "trajectory")
    f0w = load_field(d / "f0_omega.nlsf")
    return _sanitize(compute_diagnostics(traj, f0w, cfg))


# --------------------------------------------------------------------------
# ensembles


@dataclass
class EnsembleResult:
    exit_code: int
    report: dict
    out_dir: Optional[Path] = None


def _seed_task(args):
    cfg_text, seed, out_dir, write = args
    cfg = cfgmod.loads(cfg_text)
    try:
        res = run_single(cfg, seed, out_dir, write=write)
        return seed, res.exit_code, res.results, None
    except RandNLSError as exc:
        return seed, None, None, f"{type(exc).__name__}: {exc}"


def _median(xs):
    return float(np.median(xs)) if len(xs) else None


def _stats(xs):
    xs = [float(x) for x in xs if x is not None and math.isfinite(float(x))]
    if not xs:
        return {"count": 0}
    a = np.array(xs)
    return {"count": a.size, "mean": float(a.mean()), "median": float(np.median(a)),
            "std": float(a.std()), "min": float(a.min()), "max": float(a.max())}


def _fit_dict(fit):
    return {"exponent": fit.exponent, "prefactor": fit.prefactor,
            "residual_rms": fit.residual_rms, "n_points": fit.n_points}


def _tail_dict(samples, min_samples):
    try:
        fit = tail_fit(samples, min_samples=min_samples)
    except EstimationError as exc:
        return {"skipped": str(exc), "n_samples": len(samples)}
    return {"slope": fit.slope, "intercept": fit.intercept, "residual_rms": fit.residual_rms,
            "n_samples": fit.n_samples, "n_used": fit.n_used}


def aggregate(per_seed: Dict[int, dict], cfg: RunConfig) -> dict:
    """Deterministic reduce over seeds in sorted order."""
    seeds = sorted(per_seed)
    ok = [s for s in seeds if per_seed[s].get("status") == "ok"]
    res = [per_seed[s]["results"] for s in ok]
    diags = [r.get("diagnostics", {}) for r in res]
    agg = {"n_seeds": len(seeds), "n_ok": len(ok), "partial": len(ok) != len(seeds)}

    drift = [d.get("conserved", {}) for d in diags]
    agg["mass_drift"] = _stats([c.get("mass_drift") for c in drift])
    agg["energy_drift"] = _stats([c.get("energy_drift") for c in drift])

    Ns = [_fmtN(N) for N in cfg.i_operator.N]
    tv = {N: [d["increments"]["total_variation"][N] for d in diags
              if "total_variation" in d.get("increments", {})] for N in Ns}
    agg["increments"] = {"median_total_variation": {N: _median(v) for N, v in tv.items()},
                         "count": {N: len(v) for N, v in tv.items()}}
    med = [(float(N), _median(tv[N])) for N in Ns if tv[N]]
    if len(med) >= 2 and all(m is not None and m > 0 for _, m in med):
        agg["increments"]["fit"] = _fit_dict(power_law_fit(*zip(*med)))

    norms = [d["norms"] for d in diags if "F2" in d.get("norms", {})]
    f2 = {N: [n["F2"][N] for n in norms] for N in Ns}
    agg["F2"] = {"median": {N: _median(v) for N, v in f2.items()}, "count": len(norms)}
    med = [(float(N), _median(f2[N])) for N in Ns if f2[N]]
    if len(med) >= 2 and all(m is not None and m > 0 for _, m in med):
        agg["F2"]["fit"] = _fit_dict(power_law_fit(*zip(*med)))

    tails = {}
    if norms:
        for label in norms[0]["constituents"][Ns[0]]:
            samples = [n["constituents"][Ns[0]][label] for n in norms]
            tails[label] = _tail_dict(samples, cfg.diagnostics.tail_min_samples)
    agg["tails"] = tails

    scat = [d["scattering"]["scattered"] for d in diags if "scattered" in d.get("scattering", {})]
    agg["scattering"] = {"scattered": int(sum(scat)), "count": len(scat)}
    ratios = []
    for d in diags:
        for rec in d.get("morawetz", {}).values():
            if isinstance(rec, dict) and rec.get("ratio") is not None:
                ratios.append(rec["ratio"])
    agg["morawetz_ratio"] = _stats(ratios)
    return agg


def gaussian_tail_samples(seeds) -> Dict[int, float]:
    """``|g|`` for the first Gaussian of each seed's stream."""
    return {int(s): float(abs(complex_gaussians(generator(s), 1)[0])) for s in sorted(seeds)}


def run_ensemble(cfg: RunConfig, seeds, workers: Optional[int] = None, out_dir=None,
                 write: bool = True) -> EnsembleResult:
    """
    Run every seed (concurrently up to ``workers``) and reduce in sorted seed order.

    Exit code 3 when any seed failed; aggregates then cover the successful seeds.
    """
    seeds = sorted(set(int(s) for s in seeds))
    if len(seeds) < 2:
        raise ConfigurationError("an ensemble needs at least two seeds")
    workers = int(workers or cfg.ensemble.workers)
    out = Path(out_dir if out_dir is not None else cfg.output.directory)

    if cfg.ensemble.mode == "gaussian-tail":
        samples = gaussian_tail_samples(seeds)
        vals = [samples[s] for s in seeds]
        report = {"mode": "gaussian-tail", "n_seeds": len(seeds), "partial": False,
                  "samples": _stats(vals), "tail": _tail_dict(vals, cfg.diagnostics.tail_min_samples)}
        if write:
            out.mkdir(parents=True, exist_ok=True)
            (out / "ensemble.json").write_text(canonical_json(report))
        return EnsembleResult(EXIT_OK, report, out if write else None)

    text = cfgmod.dumps(cfg)
    tasks = [(text, s, str(out / f"seed_{s:06d}") if write else None, write) for s in seeds]
    per_seed = {}
    if workers == 1:
        outcomes = map(_seed_task, tasks)
    else:
        ctx = multiprocessing.get_context("spawn")
        pool = ProcessPoolExecutor(max_workers=workers, mp_context=ctx)
        outcomes = pool.map(_seed_task, tasks)
    try:
        for seed, code, results, err in outcomes:
            if err is not None:
                per_seed[seed] = {"status": "error", "error": err}
            elif code != EXIT_OK:
                per_seed[seed] = {"status": "blowup" if code == EXIT_BLOWUP else "error",
                                  "exit_code": code, "results": results}
            else:
                per_seed[seed] = {"status": "ok", "results": results}
    finally:
        if workers != 1:
            pool.shutdown()
    report = {"mode": "simulate", "seeds": seeds,
              "per_seed": {str(s): per_seed[s] for s in seeds},
              "aggregate": aggregate(per_seed, cfg)}
    code = EXIT_PARTIAL if report["aggregate"]["partial"] else EXIT_OK
    if write:
        out.mkdir(parents=True, exist_ok=True)
        (out / "ensemble.json").write_text(canonical_json(report))
    return EnsembleResult(code, _sanitize(report), out if write else None)
