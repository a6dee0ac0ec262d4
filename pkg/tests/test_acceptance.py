"""Acceptance criteria at their stated tolerances.

Each test records one PASS/FAIL line that is printed in the terminal summary
(and immediately, under ``pytest -s``).
"""
from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
import pytest

from orbita import fixtures
from orbita.cli import main
from orbita.errors import InconclusiveExperiment
from orbita.group import (GroupSpec, build_sampled_operators, dominance_report, kernel_consistency,
                          normalize_fixed_point, realize_word)
from orbita.jets import JetMap, compose, formal_inverse, jacobian_at_zero, max_coeff_diff, power
from orbita.linear import LinearGroupSpec, simultaneous_block_triangularize
from orbita.linearization import build_phi_x
from orbita.orbits import Polydisc, classify_point, closure_distance, density_experiment, \
    relative_minimality_experiment, sample_orbit
from orbita.scenario import parse_scenario

from conftest import ACCEPTANCE_LINES, random_jet, resonant_shear

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"


def record(num: int, passed: bool, detail: str):
    line = f"criterion {num}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[num] = line
    print(line)
    return passed


def partitions(n, largest=None):
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for first in range(min(n, largest), 0, -1):
        for rest in partitions(n - first, first):
            yield (first,) + rest


def local(raw, budget=None):
    """Normalized group and base points in local coordinates."""
    sc = parse_scenario(raw)
    spec = normalize_fixed_point(sc.group(budget))
    return sc, spec, [p - spec.origin for p in sc.base_points]


def linear_group(mats, budget, d=2):
    return GroupSpec([JetMap.linear(A, d) for A in mats], budget=budget)


# -- 1 -------------------------------------------------------------------------

def test_criterion_1_jet_algebra():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst_morph = worst_inv = 0.0
    for i in range(1000):
        n, d = 1 + i % 4, 2 + (i // 4) % 5
        phi = random_jet(rng, n, d)
        phi_inv = formal_inverse(phi)
        diags = [np.diag(rng.uniform(0.7, 1.5, n) * np.exp(1j * rng.uniform(0, 2 * np.pi, n))) for _ in range(2)]
        f, g = (compose(compose(phi, JetMap.linear(D, d)), phi_inv) for D in diags)
        worst_morph = max(worst_morph, np.abs(jacobian_at_zero(compose(f, g))
                                              - jacobian_at_zero(f) @ jacobian_at_zero(g)).max())
        ident = JetMap.identity(n, d)
        for h in (f, g):
            h_inv = formal_inverse(h)
            worst_inv = max(worst_inv, max_coeff_diff(compose(h, h_inv), ident),
                            max_coeff_diff(compose(h_inv, h), ident))
    elapsed = time.perf_counter() - start
    ok = worst_morph <= 1e-12 and worst_inv <= 1e-10 and elapsed < 10
    assert record(1, ok, f"morphism {worst_morph:.1e}, inverse {worst_inv:.1e}, {elapsed:.1f}s")


# -- 2 -------------------------------------------------------------------------

def planted_block_eigenvalues(mat, Q, eta):
    T = np.linalg.solve(Q, mat @ Q)
    offsets = np.concatenate([[0], np.cumsum(eta)[:-1]])
    return [T[o, o] for o in offsets]


def test_criterion_2_normal_form():
    etas = [p for n in range(1, 5) for p in partitions(n)]
    start = time.perf_counter()
    mismatches, worst = 0, 0.0
    for case in range(100):
        eta = etas[case % len(etas)]
        mats, Q = planted_matrices_for(eta, case)
        spec = LinearGroupSpec(mats, budget=2)
        bs = simultaneous_block_triangularize(spec)
        # match recovered blocks to planted ones through the first generator's eigenvalues
        planted = planted_block_eigenvalues(mats[0], Q, eta)
        recovered = [planted_size(bs.block_eigenvalues[0, b], planted, eta) for b in range(bs.r)]
        if tuple(recovered) != bs.eta:
            mismatches += 1
        mask = bs.pattern_mask()
        for w in spec.words:
            A = spec.word_matrix(w)
            worst = max(worst, np.abs(bs.conjugate(A)[~mask]).max(initial=0) / np.linalg.norm(A, 2))
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and worst <= 1e-8 and elapsed < 30
    assert record(2, ok, f"{mismatches} partition mismatches, off-pattern {worst:.1e}*|A|, {elapsed:.1f}s")


def planted_matrices_for(eta, case):
    return fixtures.planted_matrices(eta, m=1 + case % 3, seed=case)


def planted_size(mu, planted, eta):
    return eta[int(np.argmin([abs(mu - lam) for lam in planted]))]


# -- 3 -------------------------------------------------------------------------

def test_criterion_3_dominance_equivalence():
    rng = np.random.default_rng(3)
    errors = checked = 0
    for case, eta in enumerate([(1, 1), (2,), (2, 1), (1, 1, 1), (3, 1), (2, 2), (1, 1, 1, 1)]):
        mats, _ = fixtures.planted_matrices(eta, m=1 + case % 2, seed=100 + case)
        n = sum(eta)
        spec = linear_group(mats, budget=n)
        bs = simultaneous_block_triangularize(spec.linear_spec())
        for _ in range(100):
            w = rng.normal(size=n) + 1j * rng.normal(size=n)
            errors += classify_point(spec, bs.P @ w, tol=1e-9).r != n
            checked += 1
        for off in bs.offsets:
            for _ in range(100):
                w = rng.normal(size=n) + 1j * rng.normal(size=n)
                w[off] = 0
                errors += classify_point(spec, bs.P @ w, tol=1e-9).r >= n
                checked += 1
    assert record(3, errors == 0, f"{errors} misclassifications over {checked} probes")


# -- 4 -------------------------------------------------------------------------

NOT_DOMINANT = {"identity"}  # the identity group has r(x) = 1 < n everywhere


def linear_and_affine_fixtures():
    out = {}
    for name, raw in fixtures.suite().items():
        sc = parse_scenario(raw)
        if all(not np.any(g.coeffs[:, g.table.degrees > 1]) for g in sc.generators):
            out[name] = raw
    return out


def test_criterion_4_linearization():
    worst_M = worst_res = 0.0
    skipped, failures = [], []
    for name, raw in linear_and_affine_fixtures().items():
        _, spec, points = local(raw, budget=6)
        for x in points:
            if not dominance_report(spec, x, 6).dominant_at_x:
                skipped.append(name)
                continue
            try:
                lmap = build_phi_x(build_sampled_operators(spec, x, 6))
            except Exception as exc:  # report, do not hide
                failures.append(f"{name}: {type(exc).__name__}")
                continue
            worst_M = max(worst_M, np.abs(lmap.M - np.eye(spec.n)).max())
            for k in spec.words(6):
                w = realize_word(spec, k)
                worst_res = max(worst_res, np.linalg.norm(lmap.M @ w(x) - jacobian_at_zero(w) @ x))
    ok = not failures and set(skipped) == NOT_DOMINANT and worst_M <= 1e-10 and worst_res <= 1e-8
    detail = f"|M-I| {worst_M:.1e}, word residual {worst_res:.1e}, non-dominant {sorted(set(skipped))}"
    if failures:
        detail += f", failures {failures}"
    assert record(4, ok, detail)


# -- 5 -------------------------------------------------------------------------

def test_criterion_5_resonance(tmp_path):
    h = resonant_shear(8)
    # oracle first: c_k = k 4^(k-1) against plain iteration
    oracle_ok = True
    y = np.array([1.0, 1.0])
    for k in range(1, 7):
        y = h(y)
        oracle_ok &= y[1] == 4 ** k + k * 4 ** (k - 1)
        oracle_ok &= abs(power(h, k).terms.get((1, (2, 0)), 0) - k * 4 ** (k - 1)) <= 1e-9 * 4 ** k
    # minimal relation 8 id - 6 h + h^2 over the words id, h, h^2
    ops = build_sampled_operators(GroupSpec([h]), [1, 1], words=[(0,), (1,), (2,)])
    v = kernel_consistency(ops)
    norm_ok = not v.consistent and abs(v.witness_image_norm - 2) <= 1e-9
    # at the full budget the witness differs, but its image must follow the closed form
    ops = build_sampled_operators(GroupSpec([h], budget=3), [1, 1])
    wide = kernel_consistency(ops)
    c = np.array([k[0] * 4.0 ** (k[0] - 1) for k in ops.words])
    closed = abs(np.dot(wide.witness, c))
    norm_ok &= not wide.consistent and abs(wide.witness_image_norm - closed) <= 1e-9 * max(1.0, closed)
    path = tmp_path / "resonant.json"
    path.write_text(json.dumps(fixtures.resonant()))
    code = main(["linearize", "--scenario", str(path), "--out", str(tmp_path / "out")])
    ok = oracle_ok and norm_ok and code == 4
    assert record(5, ok, f"oracle {'ok' if oracle_ok else 'bad'}, consistent={v.consistent}, "
                         f"|Phi(witness)|={v.witness_image_norm:.12f} on id,h,h^2, "
                         f"budget 3 {wide.witness_image_norm:.6g} vs closed form {closed:.6g}, exit {code}")


# -- 6 -------------------------------------------------------------------------

def test_criterion_6_rank_invariance():
    rng = np.random.default_rng(6)
    violations = checked = 0
    for name, raw in fixtures.suite().items():
        sc, spec, points = local(raw)
        K = spec.budget
        m = len(spec.generators)
        x = points[0]
        r = classify_point(spec, x, K).r
        for _ in range(50):
            k = tuple(int(e) for e in rng.integers(-3, 4, size=m))
            y = realize_word(spec, k)(x)
            violations += classify_point(spec, y, K).r != r
            checked += 1
    assert record(6, violations == 0, f"{violations} violations over {checked} words")


# -- 7 -------------------------------------------------------------------------

DIAGONAL = ("diag23", "diag235", "diag-2-half")


def test_criterion_7_minimality():
    suite = fixtures.suite()
    failures = []
    for name in DIAGONAL:
        _, spec, points = local(suite[name], budget=6)
        for K in (4, 5, 6):
            rep = relative_minimality_experiment(spec, points[0], K, perturbations=3)
            if not rep["passed"]:
                worst = max(c["distance"] for c in rep["candidates"])
                failures.append(f"{name} K={K}: {worst:.3g} > {rep['threshold']:.3g}")

    # counterexample: y on a coordinate axis is outside U and its orbit closure is far away
    _, spec, _ = local(suite["diag23"], budget=6)
    x, y = np.array([1.0, 1.0]), np.array([0.0, 1.0])
    region = Polydisc(x, 1.0)
    gap = closure_distance(sample_orbit(spec, x, 4), sample_orbit(spec, y, 4), region)
    rep = relative_minimality_experiment(spec, x, 4, extra_candidates=[y], region=region)
    excluded = any(np.allclose(e["y"], y) for e in rep["excluded"])
    excluded &= not any(np.allclose(c["y"], y) for c in rep["candidates"])
    try:
        relative_minimality_experiment(spec, x, 4, extra_candidates=[y], include_orbit=False)
        alone_passes = True
    except InconclusiveExperiment:
        alone_passes = False
    counter_ok = gap > rep["threshold"] and excluded and not alone_passes
    ok = not failures and counter_ok
    detail = f"{len(DIAGONAL)} fixtures x K=4,5,6 {'all within 4*delta' if not failures else failures}; " \
             f"counterexample gap {gap:.2f} excluded={excluded}, alone inconclusive={not alone_passes}"
    assert record(7, ok, detail)


def test_criterion_7_dense_fixture_informational():
    """Not part of the criterion: long words of the dense group shift the sample beyond 4*delta."""
    _, spec, points = local(fixtures.dense_line(), budget=6)
    lines = []
    for K in (4, 5, 6):
        rep = relative_minimality_experiment(spec, points[0], K)
        worst = max(c["distance"] for c in rep["candidates"])
        lines.append(f"K={K} worst {worst:.3f} vs {rep['threshold']:.3f}")
        inner = [c for c in rep["candidates"] if max(map(abs, c["word"])) <= K // 2]
        assert all(c["distance"] <= rep["threshold"] for c in inner)
    print("dense fixture (informational): " + "; ".join(lines))


# -- 8 -------------------------------------------------------------------------

def test_criterion_8_density_trend():
    _, dense, pts = local(fixtures.dense_line())
    d = [row["eps_cover"] for row in density_experiment(dense, pts[0])["table"]]
    _, flat, pts = local(fixtures.scalar_two())
    f = [row["eps_cover"] for row in density_experiment(flat, pts[0])["table"]]
    decreasing = all(b < a for a, b in zip(d, d[1:]))
    spread = (max(f) - min(f)) / max(f)
    ok = decreasing and spread <= 0.05
    assert record(8, ok, f"dense eps {[round(v, 3) for v in d]}, 2I eps {[round(v, 3) for v in f]} "
                         f"(spread {spread:.1%})")


# -- 9 -------------------------------------------------------------------------

def test_criterion_9_determinism(tmp_path):
    files = sorted(SCENARIO_DIR.glob("*.json"))
    assert files
    diffs = []
    for path in files:
        outs = []
        for jobs in ("1", "8"):
            out = tmp_path / f"{path.stem}-{jobs}"
            main(["run", "--scenario", str(path), "--out", str(out), "--jobs", jobs])
            outs.append(out)
        names = sorted(p.name for p in outs[0].iterdir())
        if names != sorted(p.name for p in outs[1].iterdir()):
            diffs.append(f"{path.stem}: file sets differ")
            continue
        for f in names:
            a, b = ((o / f).read_text() for o in outs)
            if f.endswith(".json"):
                a, b = json.loads(a), json.loads(b)
                a.pop("timestamp", None), b.pop("timestamp", None)
            if a != b:
                diffs.append(f"{path.stem}/{f}")
    assert record(9, not diffs, f"{len(files)} scenarios, jobs 1 vs 8, differences: {diffs or 'none'}")
