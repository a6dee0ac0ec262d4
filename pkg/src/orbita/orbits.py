"""Sampled orbits, stratum membership and the closure experiments.

Closures are never computed. Every statement about an orbit closure is
replaced by a point cloud of words up to a budget, and each verdict is
reported next to the baseline that shows how much the cloud moves when the
budget grows by one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .errors import EmptyRegion, InconclusiveExperiment, NotDominantAtPoint
from .group import (GroupSpec, build_sampled_operators, dominance_report,
                    greedy_volume_selection, realize_word)
from .linear import (RANK_TOL, BlockStructure, classify_stratum,
                     gram_determinant, normalized_rows)

DEDUP_RADIUS = 1e-12
SAFETY_FACTOR = 4.0
FLAT_BAND = 0.05


@dataclass
class OrbitSample:
    x: np.ndarray
    budget: int
    words: list
    points: np.ndarray  # (p, n)
    dedup_radius: float = DEDUP_RADIUS

    def __len__(self):
        return len(self.words)


@dataclass(frozen=True)
class Polydisc:
    center: np.ndarray
    radius: float = 1.0

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.complex128))
        return np.all(np.abs(pts - self.center) <= self.radius * (1 + 1e-12), axis=1)


def as_real(points) -> np.ndarray:
    """(p, n) complex -> (p, 2n) real with re/im interleaved."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.complex128))
    out = np.empty((pts.shape[0], 2 * pts.shape[1]))
    out[:, 0::2] = pts.real
    out[:, 1::2] = pts.imag
    return out


def nearest_distances(points, cloud) -> np.ndarray:
    return np.sqrt(kernels.nearest_sq_dist(as_real(points), as_real(cloud)))


def sample_orbit(spec: GroupSpec, x, K=None, dedup_radius: float = DEDUP_RADIUS) -> OrbitSample:
    """Evaluate every budget word at ``x``; later duplicates (within the radius) are dropped."""
    x = np.asarray(x, dtype=np.complex128)
    K = spec.budget if K is None else K
    words, points = [], []
    for w in spec.words(K):
        y = realize_word(spec, w).evaluate(x)
        if points and nearest_distances(y[None, :], np.array(points))[0] <= dedup_radius:
            continue
        words.append(w)
        points.append(y)
    return OrbitSample(x, K, words, np.array(points), dedup_radius)


@dataclass
class StratumRecord:
    x: np.ndarray
    r: int
    r_tilde: int
    gram_determinant: complex
    in_Omega_n: bool
    in_Omega_tilde_n: bool
    in_U: bool
    in_U_k: dict = field(default_factory=dict)
    stratum: str | None = None
    sigma: dict = field(default_factory=dict)


def classify_point(spec: GroupSpec, x, K=None, tol: float = RANK_TOL, ks=(),
                   bs: BlockStructure | None = None) -> StratumRecord:
    """Ranks ``r(x)``, ``r~(x)`` and the memberships derived from them."""
    x = np.asarray(x, dtype=np.complex128)
    ops = build_sampled_operators(spec, x, K)
    rep = dominance_report(spec, x, ops=ops, tol=tol)
    n = spec.n
    rec = StratumRecord(x, rep.r, rep.r_tilde, rep.gram_determinant, rep.r == n, rep.r_tilde == n,
                        rep.r == n and rep.r_tilde == n, {k: rep.r >= k for k in ks}, sigma=rep.sigma)
    if bs is not None:
        rec.stratum = str(classify_stratum(x, bs, tol))
    return rec


def _unit_gram(spec, y, words):
    pts = normalized_rows(build_sampled_operators(spec, y, words=words).eval_matrix.T)
    return abs(gram_determinant(pts))


def openness_probe(spec: GroupSpec, x, k: int, K=None, tol: float = RANK_TOL, count: int = 20,
                   seed: int = 0) -> dict:
    """Perturb ``x`` inside a ball where the Gram determinant cannot reach zero; ``r >= k`` must persist.

    The radius is ``delta / (2 L)`` with ``L`` a finite-difference estimate of
    the determinant's local Lipschitz constant. Points with ``delta < 10 tol``
    are skipped as too close to the boundary of ``U_k``.
    """
    x = np.asarray(x, dtype=np.complex128)
    rec = classify_point(spec, x, K, tol)
    if rec.r < k:
        return {"skipped": True, "r": rec.r, "gram": 0.0}
    # freeze the k words chosen at x so the determinant varies continuously
    ops = build_sampled_operators(spec, x, K)
    words = [ops.words[j] for j in greedy_volume_selection(ops.eval_matrix.T, k)]
    delta = _unit_gram(spec, x, words)
    if delta < 10 * tol:
        return {"skipped": True, "r": rec.r, "gram": delta}
    rng = np.random.default_rng(seed)
    h = 1e-6 * max(1.0, float(np.linalg.norm(x)))
    slopes = []
    for _ in range(8):
        e = rng.normal(size=spec.n) + 1j * rng.normal(size=spec.n)
        e /= np.linalg.norm(e)
        slopes.append(abs(_unit_gram(spec, x + h * e, words) - delta) / h)
    lipschitz = max(max(slopes), 1e-12)
    radius = delta / (2 * lipschitz)
    violations = []
    for _ in range(count):
        e = rng.normal(size=spec.n) + 1j * rng.normal(size=spec.n)
        y = x + radius * rng.uniform() * e / np.linalg.norm(e)
        r = classify_point(spec, y, K, tol).r
        if r < k:
            violations.append({"y": y, "r": r})
    return {"skipped": False, "r": rec.r, "gram": delta, "radius": radius, "violations": violations,
            "passed": not violations}


def omega_image_check(lmap, probes, spec: GroupSpec, K=None, tol: float = RANK_TOL) -> dict:
    """Full orbit rank at ``y`` must match full linear rank at ``M y``."""
    mismatches, rows = [], []
    for i, y in enumerate(probes):
        a = classify_point(spec, y, K, tol)
        b = classify_point(spec, lmap(y), K, tol)
        rows.append({"probe": i, "in_Omega_n": a.in_Omega_n, "image_in_Omega_tilde_n": b.in_Omega_tilde_n})
        if a.in_Omega_n != b.in_Omega_tilde_n:
            mismatches.append({"probe": i, "sigma_probe": a.sigma["eval"], "sigma_image": b.sigma["linear"]})
    return {"probes": rows, "mismatches": mismatches, "passed": not mismatches}


def _points(cloud):
    return cloud.points if isinstance(cloud, OrbitSample) else np.atleast_2d(np.asarray(cloud, dtype=np.complex128))


def closure_distance(sample_a, sample_b, region: Polydisc | None = None) -> float:
    """Symmetric Hausdorff distance between two clouds restricted to ``region``."""
    a, b = _points(sample_a), _points(sample_b)
    if region is not None:
        a, b = a[region.contains(a)], b[region.contains(b)]
    if len(a) == 0 or len(b) == 0:
        raise EmptyRegion(f"restriction to the region leaves {len(a)} and {len(b)} points")
    return float(max(nearest_distances(a, b).max(), nearest_distances(b, a).max()))


def relative_minimality_experiment(spec: GroupSpec, x, K=None, region: Polydisc | None = None,
                                   tol: float = RANK_TOL, extra_candidates=(), perturbations: int = 0,
                                   perturbation_radius: float = 1e-3, snap_radius: float = 1e-2,
                                   include_orbit: bool = True, seed: int = 0) -> dict:
    """Compare the sampled closure of ``G(x)`` with that of ``G(y)`` for candidates ``y`` in U.

    Candidates are the sampled orbit points of ``x`` inside the region, random
    perturbations of them and any ``extra_candidates``, each snapped to the
    nearest orbit point when within ``snap_radius``. Candidates outside U are
    excluded. The experiment passes when every distance is at most
    ``SAFETY_FACTOR`` times the distance between the budget-K and budget-(K-1)
    samples of ``G(x)``.
    """
    x = np.asarray(x, dtype=np.complex128)
    K = spec.budget if K is None else K
    rep = dominance_report(spec, x, K, tol)
    if not rep.dominant_at_x:
        raise NotDominantAtPoint(f"experiment needs dominance at x (r={rep.r}, r~={rep.r_tilde}, {rep.kernel})", rep)
    region = Polydisc(x, 1.0) if region is None else region
    sample = sample_orbit(spec, x, K)
    inside = region.contains(sample.points)
    raw = [("orbit", sample.words[i], sample.points[i]) for i in np.nonzero(inside)[0]] if include_orbit else []
    rng = np.random.default_rng(seed)
    for _ in range(perturbations):
        i = int(rng.choice(np.nonzero(inside)[0])) if inside.any() else None
        if i is None:
            break
        noise = rng.normal(size=spec.n) + 1j * rng.normal(size=spec.n)
        raw.append(("perturbation", None, sample.points[i] + perturbation_radius * noise / np.linalg.norm(noise)))
    raw.extend(("extra", None, np.asarray(y, dtype=np.complex128)) for y in extra_candidates)

    candidates, excluded = [], []
    for origin, word, y in raw:
        if word is None:
            d = nearest_distances(y[None, :], sample.points)[0]
            j = int(np.argmin(np.linalg.norm(sample.points - y, axis=1)))
            if d <= snap_radius:
                word, y = sample.words[j], sample.points[j]
        rec = classify_point(spec, y, K, tol)
        entry = {"origin": origin, "word": word, "y": y, "r": rec.r, "r_tilde": rec.r_tilde}
        (candidates if rec.in_U else excluded).append(entry)
    if not candidates:
        raise InconclusiveExperiment("no candidate lies in U inside the region")
    baseline = closure_distance(sample, sample_orbit(spec, x, K - 1), region)
    threshold = SAFETY_FACTOR * baseline

    seen = {}
    for c in candidates:
        key = c["word"] if c["word"] is not None else tuple(np.round(c["y"], 12))
        if key not in seen:
            seen[key] = closure_distance(sample, sample_orbit(spec, c["y"], K), region)
        c["distance"] = seen[key]
        c["passed"] = c["distance"] <= threshold
    return {
        "budget": K,
        "baseline": baseline,
        "threshold": threshold,
        "candidates": candidates,
        "excluded": excluded,
        "passed": all(c["passed"] for c in candidates),
    }


def polydisc_grid(region: Polydisc, step: float) -> np.ndarray:
    """Grid with real and imaginary parts stepped by ``step`` inside each coordinate disc."""
    m = int(np.floor(region.radius / step + 1e-9))
    ticks = step * np.arange(-m, m + 1)
    offsets = (ticks[:, None] + 1j * ticks[None, :]).ravel()
    offsets = offsets[np.abs(offsets) <= region.radius * (1 + 1e-12)]
    n = len(region.center)
    mesh = np.meshgrid(*([offsets] * n), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1) + region.center


def cover_radius(grid, cloud) -> float:
    return float(nearest_distances(grid, _points(cloud)).max())


def classify_trend(values, band: float = FLAT_BAND) -> str:
    values = list(values)
    if len(values) >= 4 and all(b < a for a, b in zip(values, values[1:])):
        return "consistent with density"
    if max(values) > 0 and (max(values) - min(values)) / max(values) <= band:
        return "flat"
    return "inconclusive"


def density_experiment(spec: GroupSpec, x, budgets=(3, 4, 5, 6), polydisc: Polydisc | None = None,
                       grid_step: float = 0.25, grid=None) -> dict:
    """Cover radius of the sampled orbit over a grid, as the budget grows."""
    x = np.asarray(x, dtype=np.complex128)
    region = Polydisc(x, 1.0) if polydisc is None else polydisc
    grid = polydisc_grid(region, grid_step) if grid is None else np.atleast_2d(np.asarray(grid, dtype=np.complex128))
    table = []
    for K in budgets:
        sample = sample_orbit(spec, x, K)
        table.append({"budget": K, "points": len(sample), "eps_cover": cover_radius(grid, sample)})
    return {"grid_points": len(grid), "grid_step": grid_step, "table": table,
            "trend": classify_trend([row["eps_cover"] for row in table])}
