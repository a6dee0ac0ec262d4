"""The linear map sending a sampled orbit to the orbit of the linearized group.

At a point ``x`` where evaluation and derivative have the same kernel on the
sampled span, ``M w(x) = D_0 w x`` defines a linear map ``M``. It is solved
from ``n`` well-conditioned basis words and then validated on every other
word; a large held-out residual is the numerical footprint of a kernel
mismatch.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (ContractViolation, IllDefinedLinearization,
                     NotDominantAtPoint)
from .group import (GroupSpec, SampledOperators, build_sampled_operators,
                    dominance_report, greedy_volume_selection,
                    normalize_fixed_point, realize_word)
from .jets import jacobian_at_zero
from .linear import RANK_TOL

TOL = 1e-8
SEPARATION = 1e-9


@dataclass
class LinearizationMap:
    M: np.ndarray
    x: np.ndarray
    basis_words: list
    well_definedness_residual: float
    worst_word: tuple | None
    condition_number: float
    residuals: list = field(default_factory=list)  # (word, relative residual) for held-out words

    @property
    def n(self) -> int:
        return self.M.shape[0]

    def __call__(self, y) -> np.ndarray:
        return self.M @ np.asarray(y, dtype=np.complex128)

    @property
    def operator_norm(self) -> float:
        return float(np.linalg.norm(self.M, 2))


def _relative(err, ref):
    return err / (1.0 + ref)


def build_phi_x(ops: SampledOperators, tol: float = TOL, basis=None, rank_tol: float = RANK_TOL,
                check_dominance: bool = True) -> LinearizationMap:
    """Solve ``M [w_1(x) .. w_n(x)] = [D_0 w_1 x .. D_0 w_n x]`` and validate on held-out words.

    Basis words are picked greedily to maximize the Gram determinant of their
    evaluation vectors unless ``basis`` (column indices) is given.
    """
    if check_dominance:
        report = dominance_report(None, ops.x, ops=ops, tol=rank_tol)
        if not report.dominant_at_x:
            raise NotDominantAtPoint(
                f"not dominant at x: r={report.r}, r~={report.r_tilde}, kernels {report.kernel}", report)
    n = ops.n
    idx = list(basis) if basis is not None else greedy_volume_selection(ops.eval_matrix.T, n)
    if len(idx) != n:
        raise ContractViolation(f"need exactly n={n} basis words, got {len(idx)}")
    X = ops.eval_matrix[:, idx]
    lin = ops.linear_images()
    M = np.linalg.solve(X.T, lin[:, idx].T).T
    residuals = []
    held = [j for j in range(ops.size) if j not in set(idx)]
    for j in held:
        err = np.linalg.norm(M @ ops.eval_matrix[:, j] - lin[:, j])
        residuals.append((ops.words[j], float(_relative(err, np.linalg.norm(lin[:, j])))))
    worst_word, worst = max(residuals, key=lambda t: t[1]) if residuals else (None, 0.0)
    lmap = LinearizationMap(M, ops.x, [ops.words[j] for j in idx], worst, worst_word,
                            float(np.linalg.cond(X)), residuals)
    if worst > tol:
        raise IllDefinedLinearization(
            f"held-out word {worst_word} violates M w(x) = D0w x by {worst:.3e} (tol {tol:g})",
            worst_word, worst)
    return lmap


def _orbit_errors(M, evals, lins):
    errs = np.linalg.norm(M @ evals - lins, axis=0)
    return errs / (1.0 + np.linalg.norm(lins, axis=0))


def _distinct_count(points, sep):
    """Greedy count of points pairwise farther than ``sep`` (relative to the cloud scale)."""
    pts = np.asarray(points).T
    scale = max(1.0, float(np.abs(pts).max(initial=0.0)))
    kept = []
    for p in pts:
        if all(np.linalg.norm(p - q) > sep * scale for q in kept):
            kept.append(p)
    return len(kept)


def verify_orbit_bijection(lmap: LinearizationMap, spec: GroupSpec, x=None, K=None,
                           tol: float = TOL, sep: float = SEPARATION) -> dict:
    """Check ``M w(x) = D_0 w x`` on every budget word and that the pairing is one to one."""
    x = lmap.x if x is None else np.asarray(x, dtype=np.complex128)
    ops = build_sampled_operators(spec, x, K)
    lins = ops.linear_images()
    errs = _orbit_errors(lmap.M, ops.eval_matrix, lins)
    distinct_orbit = _distinct_count(ops.eval_matrix, sep)
    distinct_linear = _distinct_count(lins, sep)
    max_err = float(errs.max(initial=0.0))
    return {
        "max_error": max_err,
        "pairing": [(w, float(e)) for w, e in zip(ops.words, errs)],
        "distinct_orbit_points": distinct_orbit,
        "distinct_linear_points": distinct_linear,
        "injective": distinct_orbit == distinct_linear,
        "passed": max_err <= tol and distinct_orbit == distinct_linear,
    }


def pushforward_orbit_check(lmap: LinearizationMap, spec: GroupSpec, y, K=None, tol: float = TOL) -> dict:
    """With ``z = M y``, check ``M w(y) = D_0 w z`` for every budget word."""
    y = np.asarray(y, dtype=np.complex128)
    z = lmap(y)
    ops = build_sampled_operators(spec, y, K)
    errs = _orbit_errors(lmap.M, ops.eval_matrix, ops.linear_images(z))
    max_err = float(errs.max(initial=0.0))
    return {"y": y, "z": z, "max_error": max_err, "passed": max_err <= tol}


def closure_compatibility_check(lmap: LinearizationMap, spec: GroupSpec, sample, candidates,
                                eps: float = 1e-6, tol: float = TOL) -> dict:
    """Points near the sampled orbit of ``x`` must map near the sampled linear orbit.

    ``sample`` provides ``points`` (p, n) and ``words``; candidates farther than
    ``eps`` from the cloud are reported as out of scope rather than violations.
    """
    cloud = np.asarray(sample.points)
    linear_cloud = np.stack([jacobian_at_zero(realize_word(spec, w)) @ lmap.x for w in sample.words])
    bound = lmap.operator_norm * eps + tol
    checked, out_of_scope, violations = [], [], []
    for i, y in enumerate(candidates):
        y = np.asarray(y, dtype=np.complex128)
        d = float(np.linalg.norm(cloud - y, axis=1).min())
        if d > eps:
            out_of_scope.append({"candidate": i, "distance": d})
            continue
        dz = float(np.linalg.norm(linear_cloud - lmap(y), axis=1).min())
        record = {"candidate": i, "distance": d, "mapped_distance": dz, "bound": bound}
        checked.append(record)
        if dz > bound:
            violations.append(record)
    return {"checked": checked, "out_of_scope": out_of_scope, "violations": violations,
            "passed": not violations}


def _is_affine(g) -> bool:
    return not np.any(g.coeffs[:, g.table.degrees > 1])


def _affine_parts(g):
    return np.array(g.coeffs[:, 1:g.n + 1]), np.array(g.coeffs[:, 0])


def affine_word_point(generators, k, x) -> np.ndarray:
    """Apply ``g_1**k_1 o ... o g_m**k_m`` to ``x`` by iterating the affine maps."""
    y = np.asarray(x, dtype=np.complex128)
    for g, e in reversed(list(zip(generators, k))):
        A, b = _affine_parts(g)
        if e < 0:
            A_inv = np.linalg.inv(A)
        for _ in range(abs(e)):
            y = A @ y + b if e > 0 else A_inv @ (y - b)
    return y


def affine_baseline_check(spec: GroupSpec, points=None, K=None, tol: float = 1e-10, seed: int = 0) -> dict:
    """Translation conjugacy of an affine group to its linear part, and ``M = I`` after normalization."""
    if not all(_is_affine(g) for g in spec.generators):
        raise ContractViolation("affine baseline needs generators of degree at most 1")
    normalized = normalize_fixed_point(spec)
    p = normalized.origin
    if points is None:
        rng = np.random.default_rng(seed)
        points = rng.normal(size=(10, spec.n)) + 1j * rng.normal(size=(10, spec.n))
    words = normalized.words(K)
    conj_err = 0.0
    for x in points:
        for w in words:
            direct = affine_word_point(spec.generators, w, x)
            A_w = jacobian_at_zero(realize_word(normalized, w))
            via_linear = p + A_w @ (np.asarray(x) - p)
            conj_err = max(conj_err, float(_relative(np.linalg.norm(direct - via_linear), np.linalg.norm(direct))))
    result = {"fixed_point": p, "conjugacy_error": conj_err, "conjugacy_passed": conj_err <= tol}
    base = np.asarray(points[0], dtype=np.complex128) - p
    ops = build_sampled_operators(normalized, base, K)
    try:
        lmap = build_phi_x(ops)
    except (NotDominantAtPoint, IllDefinedLinearization) as exc:
        result.update(identity_error=None, phi_x_error=f"{type(exc).__name__}: {exc}", passed=False)
        return result
    ident_err = float(np.abs(lmap.M - np.eye(spec.n)).max())
    result.update(identity_error=ident_err, map=lmap,
                  passed=result["conjugacy_passed"] and ident_err <= tol)
    return result
