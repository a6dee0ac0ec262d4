"""Command line front end: one scenario file in, a directory of reports and clouds out.

Exit codes: 0 success, 1 schema or contract error, 2 non-commuting generators,
3 ill-conditioned spectrum, 4 no linearization at a base point, 5 inconclusive
experiment.
"""
from __future__ import annotations

import argparse
import functools
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (IllDefinedLinearization, InconclusiveExperiment,
                     NotDominantAtPoint, OrbitaError)
from .group import (build_sampled_operators, dominance_report,
                    normalize_fixed_point, realize_word)
from .jets import jacobian_at_zero
from .linear import (canonical_u0, classify_stratum, linear_dominance,
                     psi_x_matrix, simultaneous_block_triangularize)
from .linearization import (_is_affine, affine_baseline_check, build_phi_x,
                            closure_compatibility_check,
                            pushforward_orbit_check, verify_orbit_bijection)
from .orbits import (Polydisc, classify_point, density_experiment,
                     omega_image_check, openness_probe, relative_minimality_experiment,
                     sample_orbit)
from .scenario import (COMMANDS, REPORT_SCHEMA, load_scenario,
                       write_cloud_csv, write_json, write_triples_csv)
from .words import default_budget

log = logging.getLogger("orbita")


class Run:
    """Everything a command needs: the scenario, derived points and the output directory."""

    def __init__(self, scenario, out: Path, jobs: int = 1, budget_override: int | None = None, seed: int = 0):
        self.scenario = scenario
        self.out = out
        self.jobs = max(1, int(jobs))
        self.seed = seed
        m = len(scenario.generators)
        self.budget = budget_override or scenario.budget or default_budget(m)
        self.tol = scenario.tolerances
        rng = np.random.default_rng(seed)
        n = scenario.n
        extra = rng.normal(size=(scenario.random_probes, n)) + 1j * rng.normal(size=(scenario.random_probes, n))
        self.raw_probes = list(scenario.probes) + list(extra)

    @functools.cached_property
    def original(self):
        return self.scenario.group(self.budget)

    @functools.cached_property
    def spec(self):
        return normalize_fixed_point(self.original)

    def local(self, points):
        """Scenario coordinates -> coordinates centered at the common fixed point."""
        return [np.asarray(p, dtype=np.complex128) - self.spec.origin for p in points]

    @property
    def base_points(self):
        return self.local(self.scenario.base_points)

    @property
    def probes(self):
        return self.local(self.raw_probes)

    def pmap(self, fn, items):
        items = list(items)
        if self.jobs == 1 or len(items) < 2:
            return [fn(i) for i in items]
        with ThreadPoolExecutor(max_workers=self.jobs) as pool:
            return list(pool.map(fn, items))

    def header(self, command: str) -> dict:
        sc = self.scenario
        return {
            "schema": REPORT_SCHEMA,
            "command": command,
            "tool_version": __version__,
            "scenario": sc.name,
            "scenario_hash": sc.hash,
            "seed": self.seed,
            "budgets": {"word": self.budget, "density": list(sc.density_budgets),
                        "minimality": list(sc.minimality_budgets)},
            "tolerances": self.tol,
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }


def _error(exc: OrbitaError) -> dict:
    return {"type": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}


def _point_error(fn):
    """Run a per-point job, turning library errors into a report entry."""
    def wrapped(item):
        try:
            return fn(item), None
        except OrbitaError as exc:
            return None, exc
    return wrapped


# -- commands ------------------------------------------------------------------

def cmd_normal_form(run: Run) -> tuple[dict, int]:
    lin = run.spec.linear_spec(run.budget)
    bs = simultaneous_block_triangularize(lin, run.tol["eig"])
    u0, v0 = canonical_u0(bs)
    dom = linear_dominance(lin, bs, probes=run.probes, tol=run.tol["rank"])
    points = []
    for i, x in enumerate(run.base_points):
        psi = psi_x_matrix(lin, x, run.tol["rank"])
        points.append({"point": i, "stratum": str(classify_stratum(x, bs, run.tol["rank"])),
                       "psi_rank": psi.rank, "psi_injective": psi.injective})
    result = {
        "eta": list(bs.eta), "r": bs.r, "P": bs.P, "P_inv": bs.P_inv,
        "block_eigenvalues": bs.block_eigenvalues, "residuals": bs.residuals,
        "u0_normal": u0, "v0": v0, "span_dim": lin.span_dim,
        "linear_dominant": dom.dominant, "rank_at_v0": dom.rank_at_v0.rank,
        "probes": dom.probes, "diagnostics": dom.diagnostics, "base_points": points,
    }
    return result, 0


def _dominance_entry(rep) -> dict:
    k = rep.kernel
    return {"r": rep.r, "r_tilde": rep.r_tilde, "dominant_at_x": rep.dominant_at_x,
            "gram_determinant": rep.gram_determinant, "sigma": rep.sigma,
            "kernel": {"verdict": str(k), "null_dim_eval": k.null_dim_eval, "null_dim_deriv": k.null_dim_deriv,
                       "max_angle": k.max_angle, "witness": k.witness, "witness_side": k.witness_side,
                       "witness_image_norm": k.witness_image_norm}}


def cmd_dominance(run: Run) -> tuple[dict, int]:
    spec = run.spec

    def job(x):
        return _dominance_entry(dominance_report(spec, x, run.budget, run.tol["rank"]))

    entries = run.pmap(job, run.base_points)
    for i, e in enumerate(entries):
        e["point"] = i
    return {"points": entries}, 0


def cmd_linearize(run: Run) -> tuple[dict, int]:
    spec, K, tol = run.spec, run.budget, run.tol
    probes = run.probes

    def job(item):
        i, x = item
        ops = build_sampled_operators(spec, x, K)
        lmap = build_phi_x(ops, tol=tol["linearization"], rank_tol=tol["rank"])
        sample = sample_orbit(spec, x, K)
        rng = np.random.default_rng(run.seed + i)
        noise = rng.normal(size=sample.points.shape) + 1j * rng.normal(size=sample.points.shape)
        near = sample.points + 1e-9 * noise
        entry = {
            "point": i, "M": lmap.M, "basis_words": lmap.basis_words,
            "well_definedness_residual": lmap.well_definedness_residual, "worst_word": lmap.worst_word,
            "condition_number": lmap.condition_number,
            "orbit_bijection": verify_orbit_bijection(lmap, spec, K=K, tol=tol["linearization"]),
            "pushforward": [pushforward_orbit_check(lmap, spec, y, K, tol["linearization"]) for y in probes],
            "closure_compatibility": closure_compatibility_check(lmap, spec, sample, near, tol=tol["linearization"]),
            "omega_image": omega_image_check(lmap, probes, spec, K, tol["rank"]),
        }
        lins = ops.linear_images()
        write_triples_csv(run.out / f"linearize_x{i}.csv", ops.words, ops.eval_matrix, lmap.M @ ops.eval_matrix, lins)
        return entry

    results = run.pmap(_point_error(job), enumerate(run.base_points))
    entries, code = [], 0
    for i, (entry, exc) in enumerate(results):
        if exc is not None:
            entries.append({"point": i, "error": _error(exc)})
            code = code or exc.exit_code
        else:
            entries.append(entry)
    result = {"points": entries}
    if all(_is_affine(g) for g in run.original.generators):
        base = affine_baseline_check(run.original, points=run.scenario.base_points + run.raw_probes, K=K)
        base.pop("map", None)
        result["affine_baseline"] = base
    return result, code


def cmd_orbit(run: Run) -> tuple[dict, int]:
    spec, K, tol = run.spec, run.budget, run.tol["rank"]
    try:
        bs = simultaneous_block_triangularize(spec.linear_spec(K), run.tol["eig"])
    except OrbitaError as exc:
        log.warning("no normal form for stratum labels: %s", exc)
        bs = None
    words = spec.words(K)
    rng = np.random.default_rng(run.seed)
    picks = [words[j] for j in rng.integers(0, len(words), size=run.scenario.invariance_words)]

    def record(rec):
        return {"r": rec.r, "r_tilde": rec.r_tilde, "gram_determinant": rec.gram_determinant,
                "in_Omega_n": rec.in_Omega_n, "in_Omega_tilde_n": rec.in_Omega_tilde_n, "in_U": rec.in_U,
                "in_U_k": rec.in_U_k, "stratum": rec.stratum}

    ks = tuple(range(1, spec.n + 1))

    def job(item):
        i, x = item
        sample = sample_orbit(spec, x, K)
        write_cloud_csv(run.out / f"orbit_x{i}.csv", sample.words, sample.points + spec.origin)
        base = classify_point(spec, x, K, tol, ks, bs)
        violations = []
        for w in picks:
            y = realize_word(spec, w).evaluate(x)
            r = classify_point(spec, y, K, tol).r
            if r != base.r:
                violations.append({"word": w, "r": r})
        openness = openness_probe(spec, x, base.r, K, tol, seed=run.seed + i) if base.r else {"skipped": True}
        return {"point": i, "size": len(sample), "classification": record(base),
                "invariance": {"words": len(picks), "violations": violations, "passed": not violations},
                "openness": openness}

    entries = run.pmap(job, enumerate(run.base_points))
    probes = run.pmap(lambda y: record(classify_point(spec, y, K, tol, ks, bs)), run.probes)
    return {"origin": spec.origin, "points": entries, "probes": probes}, 0


def _region(run: Run, x) -> Polydisc:
    sc = run.scenario
    center = x if sc.region_center is None else sc.region_center - run.spec.origin
    return Polydisc(center, sc.region_radius)


def cmd_minimality(run: Run) -> tuple[dict, int]:
    spec, sc = run.spec, run.scenario
    candidates = run.local(sc.candidates)
    jobs = [(i, x, K) for i, x in enumerate(run.base_points) for K in sc.minimality_budgets]

    def job(item):
        i, x, K = item
        rep = relative_minimality_experiment(spec, x, K, _region(run, x), run.tol["rank"],
                                             extra_candidates=candidates, perturbations=sc.perturbations,
                                             seed=run.seed + i)
        rep["point"] = i
        return rep

    entries, code = [], 0
    for (i, _, K), (rep, exc) in zip(jobs, run.pmap(_point_error(job), jobs)):
        if exc is not None:
            entries.append({"point": i, "budget": K, "error": _error(exc)})
            code = code or exc.exit_code
        else:
            entries.append(rep)
    return {"experiments": entries, "passed": code == 0 and all(e["passed"] for e in entries)}, code


def cmd_density(run: Run) -> tuple[dict, int]:
    spec, sc = run.spec, run.scenario

    def job(item):
        i, x = item
        rep = density_experiment(spec, x, sc.density_budgets, _region(run, x), sc.grid_step)
        sample = sample_orbit(spec, x, max(sc.density_budgets))
        write_cloud_csv(run.out / f"density_x{i}.csv", sample.words, sample.points + spec.origin)
        rep["point"] = i
        return rep

    return {"points": run.pmap(job, enumerate(run.base_points))}, 0


HANDLERS = {
    "normal-form": cmd_normal_form,
    "dominance": cmd_dominance,
    "linearize": cmd_linearize,
    "orbit": cmd_orbit,
    "minimality": cmd_minimality,
    "density": cmd_density,
}


def execute(run: Run, command: str) -> int:
    """Run one command and write ``<command>.json``; returns the exit code."""
    report = run.header(command)
    try:
        result, code = HANDLERS[command](run)
        report["result"] = result
    except OrbitaError as exc:
        code = exc.exit_code
        report["error"] = _error(exc)
    report["exit_code"] = code
    write_json(run.out / f"{command}.json", report)
    status = "ok" if code == 0 else f"exit {code}"
    print(f"{command}: {status} -> {run.out / (command + '.json')}")
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="orbita", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS + ("run",):
        p = sub.add_parser(name, help="every command listed in the scenario" if name == "run" else None)
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", default=None, help="output directory (default: scenario output_dir or ./orbita-out)")
        p.add_argument("--jobs", type=int, default=1, help="worker threads for per-point work")
        p.add_argument("--budget-override", type=int, default=None, help="replace the scenario word budget")
        p.add_argument("--seed", type=int, default=0, help="seed for random probes and perturbations")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=os.environ.get("ORBITA_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        scenario = load_scenario(args.scenario)
    except (OrbitaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return getattr(exc, "exit_code", 1)
    if args.budget_override is not None and args.budget_override < 1:
        print("error: --budget-override must be positive", file=sys.stderr)
        return 1
    out = Path(args.out or scenario.output_dir or "orbita-out")
    out.mkdir(parents=True, exist_ok=True)
    run = Run(scenario, out, args.jobs, args.budget_override, args.seed)
    commands = scenario.commands if args.command == "run" else (args.command,)
    code = 0
    for command in commands:
        status = execute(run, command)
        code = code or status  # first failure wins
    return code


if __name__ == "__main__":
    raise SystemExit(main())
