"""Finitely generated abelian groups of polynomial automorphisms and their sampled spans.

The span of all group elements is infinite dimensional; here it is replaced
by the span of words with ``|k_i| <= K``. On that span, evaluation at ``x``
and the derivative at 0 become two matrices with one column per word, and
dominance at ``x`` reduces to comparing their null spaces.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ContractViolation, NoCommonFixedPoint, NotAbelian
from .jets import (JetMap, PolyMap, commutator_defect, compose, formal_inverse,
                   jacobian_at_zero, power)
from .linear import (RANK_TOL, LinearGroupSpec, gram_determinant,
                     normalized_rows, rank_verdict)
from .words import default_budget, enumerate_words

log = logging.getLogger(__name__)

TAU_COMM = 1e-9
TAU_INV = 1e-12
FIXED_POINT_TOL = 1e-12
DETECT_TOL = 1e-8
ANGLE_TOL = 1e-7
NEWTON_STEPS = 50


class GroupSpec:
    """Generators of an abelian group of polynomial automorphisms with a common fixed point.

    Generators carrying constant terms are kept as :class:`PolyMap` until
    :func:`normalize_fixed_point` moves the fixed point to the origin; only a
    normalized spec can realize words.
    """

    def __init__(self, generators, inverses=None, fixed_point=None, budget=None,
                 tau_comm=TAU_COMM, tau_inv=TAU_INV, origin=None):
        if not generators:
            raise ContractViolation("a group spec needs at least one generator")
        n, d = generators[0].n, generators[0].d
        for g in generators:
            if (g.n, g.d) != (n, d):
                raise ContractViolation("all generators must share dimension and truncation degree")
        self.n, self.d, self.m = n, d, len(generators)
        self.budget = default_budget(self.m) if budget is None else int(budget)
        self.tau_comm, self.tau_inv = tau_comm, tau_inv
        self.fixed_point = None if fixed_point is None else np.asarray(fixed_point, dtype=np.complex128)
        self.origin = np.zeros(n, dtype=np.complex128) if origin is None else np.asarray(origin, dtype=np.complex128)
        self.normalized = all(np.all(g.coeffs[:, 0] == 0) for g in generators) and \
            (self.fixed_point is None or not np.any(self.fixed_point))
        if self.normalized:
            generators = [g if isinstance(g, JetMap) else g.to_jet() for g in generators]
            if inverses is not None:
                inverses = [g if isinstance(g, JetMap) else g.to_jet() for g in inverses]
        self.generators = tuple(generators)
        self.inverses = None if inverses is None else tuple(inverses)
        self._powers = {}
        self._words = {}
        if self.normalized:
            self._validate()

    def _validate(self):
        for i, g in enumerate(self.generators):
            s = np.linalg.svd(jacobian_at_zero(g), compute_uv=False)
            if s[-1] <= self.tau_inv * max(s[0], 1.0):
                raise ContractViolation(f"generator {i} has a singular linear part")
        for i in range(self.m):
            for j in range(i + 1, self.m):
                f, g = self.generators[i], self.generators[j]
                scale = max(1.0, float(np.abs(f.coeffs).max()), float(np.abs(g.coeffs).max()))
                defect = commutator_defect(f, g)
                if defect > self.tau_comm * scale ** 2:
                    raise NotAbelian(f"generators {i} and {j} do not commute at degree {self.d} "
                                     f"(defect {defect:.3e})", defect)

    def _require_normalized(self):
        if not self.normalized:
            raise ContractViolation("spec has a nonzero fixed point; call normalize_fixed_point first")

    def inverse(self, i: int) -> JetMap:
        self._require_normalized()
        key = (i, -1)
        if key not in self._powers:
            self._powers[key] = self.inverses[i] if self.inverses is not None else \
                formal_inverse(self.generators[i], self.tau_inv)
        return self._powers[key]

    def generator_power(self, i: int, e: int) -> JetMap:
        key = (i, e)
        if key not in self._powers:
            if e == 0:
                self._powers[key] = JetMap.identity(self.n, self.d)
            elif e > 0:
                self._powers[key] = power(self.generators[i], e)
            else:
                self._powers[key] = power(self.inverse(i), -e)
        return self._powers[key]

    def linear_parts(self) -> list:
        return [jacobian_at_zero(g) for g in self.generators]

    def linear_spec(self, budget=None) -> LinearGroupSpec:
        self._require_normalized()
        inverses = [jacobian_at_zero(self.inverse(i)) for i in range(self.m)]
        return LinearGroupSpec(self.linear_parts(), budget=self.budget if budget is None else budget,
                               inverses=inverses)

    def words(self, K=None) -> list:
        return enumerate_words(self.m, self.budget if K is None else K)


def realize_word(spec: GroupSpec, k) -> JetMap:
    """Jet of ``g_1**k_1 o ... o g_m**k_m``, memoized per multi-exponent."""
    spec._require_normalized()
    k = tuple(int(e) for e in k)
    if len(k) != spec.m:
        raise ContractViolation(f"word {k} has {len(k)} exponents for {spec.m} generators")
    if k not in spec._words:
        result = spec.generator_power(0, k[0])
        for i in range(1, spec.m):
            if k[i]:
                result = compose(result, spec.generator_power(i, k[i]))
        spec._words[k] = result
    return spec._words[k]


# -- fixed points --------------------------------------------------------------

def _newton_fixed_point(f: PolyMap, start, steps=NEWTON_STEPS):
    x = np.array(start, dtype=np.complex128)
    eye = np.eye(f.n)
    F = f.evaluate(x) - x
    for _ in range(steps):
        res = np.linalg.norm(F)
        if res <= FIXED_POINT_TOL:
            break
        step, *_ = np.linalg.lstsq(f.jacobian(x) - eye, F, rcond=None)
        t = 1.0
        while t > 1e-6:
            trial = x - t * step
            Ft = f.evaluate(trial) - trial
            if np.linalg.norm(Ft) < res:
                x, F = trial, Ft
                break
            t /= 2
        else:
            break
    return x


def _fixed_point_residuals(spec, p):
    return [float(np.linalg.norm(g.evaluate(p) - p)) for g in spec.generators]


def normalize_fixed_point(spec: GroupSpec) -> GroupSpec:
    """Conjugate every generator by the translation taking the common fixed point to 0."""
    if spec.normalized:
        return spec
    p = spec.fixed_point
    if p is not None:
        res = _fixed_point_residuals(spec, p)
        if max(res) > FIXED_POINT_TOL * max(1.0, float(np.linalg.norm(p))):
            raise NoCommonFixedPoint(f"declared fixed point is not fixed (residuals {res})", res)
    else:
        best = None
        for g in spec.generators:
            cand = _newton_fixed_point(g, np.zeros(spec.n))
            res = _fixed_point_residuals(spec, cand)
            if max(res) <= DETECT_TOL * max(1.0, float(np.linalg.norm(cand))):
                p = cand
                break
            if best is None or max(res) < max(best):
                best = res
        if p is None:
            raise NoCommonFixedPoint(f"generators share no fixed point (best residuals {best})", best)
        log.info("detected common fixed point %s", p)

    def shift(g):
        c = np.array(g.translate_conjugate(p).coeffs)
        c[:, 0] = 0.0  # fixed to tolerance above
        return JetMap(g.n, g.d, c)

    gens = [shift(g) for g in spec.generators]
    invs = None if spec.inverses is None else [shift(g) for g in spec.inverses]
    return GroupSpec(gens, inverses=invs, budget=spec.budget, tau_comm=spec.tau_comm,
                     tau_inv=spec.tau_inv, origin=spec.origin + p)


# -- sampled evaluation and derivative operators ------------------------------

@dataclass
class SampledOperators:
    """Evaluation at ``x`` and derivative at 0, one column per word."""

    words: list
    eval_matrix: np.ndarray  # (n, s): column j is w_j(x)
    deriv_matrix: np.ndarray  # (n*n, s): column j is vec(D_0 w_j), row-major
    x: np.ndarray
    budget: int | None = None

    @property
    def n(self) -> int:
        return self.eval_matrix.shape[0]

    @property
    def size(self) -> int:
        return len(self.words)

    def jacobian(self, j: int) -> np.ndarray:
        return self.deriv_matrix[:, j].reshape(self.n, self.n)

    def linear_images(self, y=None) -> np.ndarray:
        """Columns ``D_0 w_j @ y`` (default ``y = x``)."""
        y = self.x if y is None else np.asarray(y, dtype=np.complex128)
        n, s = self.n, self.size
        return np.einsum("ijs,j->is", self.deriv_matrix.reshape(n, n, s), y)


def build_sampled_operators(spec: GroupSpec, x, K=None, words=None) -> SampledOperators:
    """Realize every budget word (or the explicit ``words``) and fill both matrices."""
    spec._require_normalized()
    x = np.asarray(x, dtype=np.complex128)
    if x.shape != (spec.n,):
        raise ContractViolation(f"base point has shape {x.shape}, expected ({spec.n},)")
    budget = spec.budget if K is None else K
    if words is None:
        words = spec.words(budget)
    else:
        words, budget = [tuple(w) for w in words], None
    jets = [realize_word(spec, w) for w in words]
    eval_matrix = np.stack([j.evaluate(x) for j in jets], axis=1)
    deriv_matrix = np.stack([jacobian_at_zero(j).reshape(-1) for j in jets], axis=1)
    return SampledOperators(list(words), eval_matrix, deriv_matrix, x, budget)


# -- kernel consistency ----------------------------------------------------------

@dataclass
class KernelVerdict:
    consistent: bool
    null_dim_eval: int
    null_dim_deriv: int
    max_angle: float | None
    witness: np.ndarray | None = None
    witness_side: str | None = None  # which null space the witness lies in
    witness_image: np.ndarray | None = None
    witness_image_norm: float | None = None
    extra: dict = field(default_factory=dict)

    def __str__(self):
        return "CONSISTENT" if self.consistent else "INCONSISTENT"


def _null_basis(M, tol):
    s_full = M.shape[1]
    _, s, Vh = np.linalg.svd(M)
    rank = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    return Vh[rank:].conj().T, rank, s_full - rank


def _monic(alpha):
    big = np.abs(alpha) > 1e-8 * np.abs(alpha).max()
    j = np.nonzero(big)[0][-1]
    return alpha / alpha[j]


def kernel_consistency(ops: SampledOperators, tol: float = RANK_TOL, angle_tol: float = ANGLE_TOL) -> KernelVerdict:
    """Compare the null spaces of the evaluation and derivative matrices.

    Both matrices get the same per-word column scaling, which leaves the
    comparison unchanged and evens out magnitudes. An inconsistent verdict
    carries a witness: coefficients in one null space with a nonzero image
    under the other operator, normalized so its last significant entry is 1.
    """
    if ops.size < ops.n:
        raise ContractViolation(f"need at least n={ops.n} words, got {ops.size}")
    norms = np.maximum(np.linalg.norm(ops.eval_matrix, axis=0), np.linalg.norm(ops.deriv_matrix, axis=0))
    scale = 1.0 / np.where(norms > 0, norms, 1.0)
    E = ops.eval_matrix * scale
    D = ops.deriv_matrix * scale
    NE, _, dim_e = _null_basis(E, tol)
    ND, _, dim_d = _null_basis(D, tol)
    angle = None
    if dim_e == dim_d:
        if dim_e == 0:
            return KernelVerdict(True, 0, 0, 0.0)
        angle = float(np.max(sla.subspace_angles(NE, ND)))
        if angle <= angle_tol:
            return KernelVerdict(True, dim_e, dim_d, angle)

    candidates = []
    if dim_d:
        candidates.append(("deriv_null", ND, E, ops.eval_matrix))
    if dim_e:
        candidates.append(("eval_null", NE, D, ops.deriv_matrix))
    for side, N, other, raw in candidates:
        U, s, Vh = np.linalg.svd(other @ N, full_matrices=False)
        if s[0] > angle_tol:
            alpha = _monic(scale * (N @ Vh[0].conj()))
            image = raw @ alpha
            return KernelVerdict(False, dim_e, dim_d, angle, alpha, side, image, float(np.linalg.norm(image)))
    return KernelVerdict(False, dim_e, dim_d, angle)


@dataclass
class DominanceReport:
    x: np.ndarray
    budget: int | None
    r: int
    r_tilde: int
    kernel: KernelVerdict
    dominant_at_x: bool
    gram_determinant: complex
    sigma: dict


def dominance_report(spec: GroupSpec, x, K=None, tol: float = RANK_TOL, words=None,
                     ops: SampledOperators | None = None) -> DominanceReport:
    """Ranks of the sampled orbit and linear orbit at ``x`` plus the kernel verdict."""
    if ops is None:
        ops = build_sampled_operators(spec, x, K, words)
    ev = rank_verdict(normalized_rows(ops.eval_matrix.T), tol)
    lin = rank_verdict(normalized_rows(ops.linear_images().T), tol)
    verdict = kernel_consistency(ops, tol) if ops.size >= ops.n else KernelVerdict(False, 0, 0, None)
    n = ops.n
    dominant = ev.rank == n and lin.rank == n and verdict.consistent
    gram = independent_gram(ops.eval_matrix.T, ev.rank, tol)
    return DominanceReport(ops.x, ops.budget, ev.rank, lin.rank, verdict, dominant, gram,
                           {"eval": (ev.sigma_above, ev.sigma_below), "linear": (lin.sigma_above, lin.sigma_below)})


def greedy_volume_selection(vectors, count: int) -> list:
    """Indices of ``count`` rows chosen one at a time to maximize the Gram determinant."""
    vectors = normalized_rows(vectors)
    chosen = []
    residual = vectors.copy()
    for _ in range(count):
        norms = np.linalg.norm(residual, axis=1)
        norms[chosen] = -1.0
        j = int(np.argmax(norms))
        if norms[j] <= 0:
            break  # nothing independent left
        chosen.append(j)
        q = residual[j] / norms[j]
        residual = residual - np.outer(residual @ q.conj(), q)
    return chosen


def independent_gram(vectors, r: int, tol: float = RANK_TOL) -> complex:
    """Gram determinant of ``r`` greedily chosen unit vectors (1.0 when ``r == 0``)."""
    if r == 0:
        return 1.0 + 0j
    unit = normalized_rows(vectors)
    idx = greedy_volume_selection(unit, r)
    return gram_determinant(unit[idx]) if len(idx) == r else 0j
