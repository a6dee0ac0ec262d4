"""Abelian matrix groups: ranks, Gram determinants and the block-triangular normal form.

Every abelian subgroup of GL(n, C) can be conjugated into block-diagonal form
whose blocks are lower triangular with a single eigenvalue. This module
computes such a conjugation numerically, classifies points against the
invariant hyperplanes it exposes, and checks dominance on sampled words.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (ContractViolation, IllConditionedSpectrum, NotAbelian,
                     NotInOrbitSpan)
from .words import default_budget, enumerate_words

RANK_TOL = 1e-9
SPAN_TOL = 1e-10
TAU_COMM = 1e-8
TAU_INV = 1e-12
TAU_PATTERN = 1e-8
TAU_SOLVE = 1e-9
AMBIGUITY_FACTOR = 10.0
_EPS = np.finfo(float).eps


# -- ranks and Gram determinants ---------------------------------------------

@dataclass(frozen=True)
class RankVerdict:
    rank: int
    tol: float
    singular_values: np.ndarray
    sigma_above: float  # smallest singular value counted
    sigma_below: float  # largest singular value discarded


def _as_rows(vectors) -> np.ndarray:
    arr = np.asarray(vectors, dtype=np.complex128)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ContractViolation("expected a nonempty list of vectors of a shared dimension")
    return arr


def rank_verdict(vectors, tol: float = RANK_TOL) -> RankVerdict:
    arr = _as_rows(vectors)
    s = np.linalg.svd(arr, compute_uv=False)
    if s[0] == 0:
        return RankVerdict(0, tol, s, 0.0, 0.0)
    rank = int(np.sum(s > tol * s[0]))
    above = float(s[rank - 1]) if rank else 0.0
    below = float(s[rank]) if rank < len(s) else 0.0
    return RankVerdict(rank, tol, s, above, below)


def numerical_rank(vectors, tol: float = RANK_TOL) -> int:
    """Count singular values above ``tol`` times the largest one."""
    return rank_verdict(vectors, tol).rank


def normalized_rows(vectors) -> np.ndarray:
    """Scale nonzero rows to unit norm; orbit vectors span many magnitudes."""
    arr = _as_rows(vectors)
    norms = np.linalg.norm(arr, axis=1)
    scale = np.where(norms > 0, norms, 1.0)
    return arr / scale[:, None]


def gram_matrix(vectors) -> np.ndarray:
    arr = _as_rows(vectors)
    return arr @ arr.conj().T


def gram_determinant(vectors) -> complex:
    """Determinant of the Hermitian Gram matrix ``<v_i, v_j> = sum v_i conj(v_j)``."""
    arr = _as_rows(vectors)
    if arr.shape[0] > arr.shape[1]:
        raise ContractViolation(f"{arr.shape[0]} vectors in dimension {arr.shape[1]}; Gram determinant needs r <= n")
    return complex(np.linalg.det(gram_matrix(arr)))


# -- linear groups -----------------------------------------------------------

def _check_generators(gens, tau_comm, tau_inv):
    if not gens:
        raise ContractViolation("a linear group needs at least one generator")
    n = gens[0].shape[0]
    for A in gens:
        if A.shape != (n, n):
            raise ContractViolation(f"generator of shape {A.shape}, expected {(n, n)}")
        s = np.linalg.svd(A, compute_uv=False)
        if s[-1] <= tau_inv * s[0]:
            raise ContractViolation(f"generator is singular (smallest singular value {s[-1]:.3e})")
    for i, A in enumerate(gens):
        for j in range(i + 1, len(gens)):
            B = gens[j]
            defect = np.linalg.norm(A @ B - B @ A) / (np.linalg.norm(A) * np.linalg.norm(B))
            if defect > tau_comm:
                raise NotAbelian(f"generators {i} and {j} do not commute (relative defect {defect:.3e})", defect)


class LinearGroupSpec:
    """Finitely generated abelian subgroup of GL(n, C) sampled up to a word budget."""

    def __init__(self, generators, budget: int | None = None, inverses=None,
                 tau_comm: float = TAU_COMM, tau_inv: float = TAU_INV):
        gens = [np.array(A, dtype=np.complex128) for A in generators]
        _check_generators(gens, tau_comm, tau_inv)
        self.generators = tuple(gens)
        self.n = gens[0].shape[0]
        self.m = len(gens)
        self.inverses = tuple(np.array(B, dtype=np.complex128) for B in inverses) if inverses \
            else tuple(np.linalg.inv(A) for A in gens)
        self.budget = default_budget(self.m) if budget is None else budget
        self.words = enumerate_words(self.m, self.budget)
        self._cache = {}
        self.span_basis = self._span_basis()

    def word_matrix(self, k) -> np.ndarray:
        k = tuple(k)
        if k not in self._cache:
            M = np.eye(self.n, dtype=np.complex128)
            for e, A, B in zip(k, self.generators, self.inverses):
                if e:
                    M = M @ np.linalg.matrix_power(A if e > 0 else B, abs(e))
            self._cache[k] = M
        return self._cache[k]

    def word_matrices(self, words=None) -> list:
        return [self.word_matrix(k) for k in (self.words if words is None else words)]

    def _span_basis(self):
        cols = np.stack([M.reshape(-1) for M in self.word_matrices()], axis=1)
        cols = cols / np.linalg.norm(cols, axis=0)
        Q, R, _ = sla.qr(cols, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        dim = int(np.sum(diag > SPAN_TOL * diag[0]))
        return tuple(Q[:, j].reshape(self.n, self.n) for j in range(dim))

    @property
    def span_dim(self) -> int:
        return len(self.span_basis)

    def orbit_vectors(self, u, words=None) -> np.ndarray:
        u = np.asarray(u, dtype=np.complex128)
        return np.stack([M @ u for M in self.word_matrices(words)])


# -- block-triangular normal form ---------------------------------------------

@dataclass
class BlockStructure:
    n: int
    eta: tuple
    P: np.ndarray
    block_eigenvalues: np.ndarray  # (generators, blocks)
    residuals: dict = field(default_factory=dict)

    @property
    def r(self) -> int:
        return len(self.eta)

    @functools.cached_property
    def P_inv(self) -> np.ndarray:
        return np.linalg.inv(self.P)

    @property
    def offsets(self) -> tuple:
        return tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.eta)[:-1]]))

    def pattern_mask(self) -> np.ndarray:
        mask = np.zeros((self.n, self.n), dtype=bool)
        for off, size in zip(self.offsets, self.eta):
            mask[off:off + size, off:off + size] = np.tril(np.ones((size, size), dtype=bool))
        return mask

    def to_normal(self, u) -> np.ndarray:
        return self.P_inv @ np.asarray(u, dtype=np.complex128)

    def conjugate(self, A) -> np.ndarray:
        return self.P_inv @ A @ self.P


def _cluster(values, radius):
    """Single-linkage clusters of complex numbers at ``radius``."""
    values = np.asarray(values)
    k = len(values)
    labels = list(range(k))

    def find(i):
        while labels[i] != i:
            labels[i] = labels[labels[i]]
            i = labels[i]
        return i

    for i in range(k):
        for j in range(i + 1, k):
            if abs(values[i] - values[j]) <= radius:
                labels[find(i)] = find(j)
    groups = {}
    for i in range(k):
        groups.setdefault(find(i), []).append(i)
    clusters = sorted(groups.values(), key=lambda g: (values[g].mean().real, values[g].mean().imag))
    return clusters


def _cluster_radius(scale, dim, tol_eig):
    if tol_eig is not None:
        return tol_eig * scale
    # a defective eigenvalue of multiplicity m spreads like eps**(1/m) under round-off
    return scale * max(1e-8, (1e6 * _EPS) ** (1.0 / max(dim, 1)))


def _split(Q, A, tol_eig):
    """Split the invariant subspace spanned by orthonormal ``Q`` into A's spectral subspaces."""
    dim = Q.shape[1]
    if dim == 1:
        return [Q]
    As = Q.conj().T @ A @ Q
    eigs = np.linalg.eigvals(As)
    scale = max(np.linalg.norm(A, 2), 1e-300)
    radius = _cluster_radius(scale, dim, tol_eig)
    clusters = _cluster(eigs, radius)
    if len(clusters) == 1:
        return [Q]
    gap = min(abs(eigs[i] - eigs[j]) for a in range(len(clusters)) for b in range(a + 1, len(clusters))
              for i in clusters[a] for j in clusters[b])
    if gap < AMBIGUITY_FACTOR * radius:
        raise IllConditionedSpectrum(
            f"eigenvalue gap {gap:.3e} at a cluster boundary is within {AMBIGUITY_FACTOR:g}x "
            f"the clustering radius {radius:.3e}", gap)
    centers = np.array([eigs[c].mean() for c in clusters])
    parts = []
    for idx, members in enumerate(clusters):
        _, Z, sdim = sla.schur(As, output="complex",
                               sort=lambda z, idx=idx: int(np.argmin(np.abs(z - centers))) == idx)
        if sdim != len(members):
            raise IllConditionedSpectrum(
                f"Schur reordering selected {sdim} eigenvalues for a cluster of {len(members)}", gap)
        parts.append(Q @ Z[:, :sdim])
    return parts


def _joint_flag(nilpotents):
    """Unitary W with every ``W^H N W`` strictly lower triangular, for commuting nilpotents."""
    m = nilpotents[0].shape[0]
    U = np.eye(m, dtype=np.complex128)
    cur = list(nilpotents)
    tail = []
    while U.shape[1]:
        _, _, Vh = np.linalg.svd(np.vstack(cur))
        v = Vh[-1].conj()
        full, _ = np.linalg.qr(np.column_stack([v, np.eye(len(v), dtype=np.complex128)]))
        comp = full[:, 1:len(v)]
        tail.insert(0, U @ v)
        U = U @ comp
        cur = [comp.conj().T @ N @ comp for N in cur]
    return np.column_stack(tail)


def _block_order_key(radius):
    def cmp(a, b):
        for x, y in zip(a, b):
            for part in (x.real - y.real, x.imag - y.imag):
                if abs(part) > radius:
                    return -1 if part < 0 else 1
        return 0
    return functools.cmp_to_key(cmp)


def _pattern_residuals(bs, gens):
    mask = bs.pattern_mask()
    pattern, diag_spread, recon = [], [], []
    for A in gens:
        T = bs.conjugate(A)
        scale = np.linalg.norm(A, 2)
        pattern.append(float(np.abs(T[~mask]).max(initial=0.0) / scale))
        spread = 0.0
        for off, size in zip(bs.offsets, bs.eta):
            d = np.diag(T)[off:off + size]
            spread = max(spread, float(np.abs(d - d.mean()).max()))
        diag_spread.append(spread / scale)
        recon.append(float(np.linalg.norm(A - bs.P @ T @ bs.P_inv, 2) / scale))
    return {"pattern": pattern, "diagonal_spread": diag_spread, "reconstruction": recon}


def simultaneous_block_triangularize(spec, tol_eig: float | None = None) -> BlockStructure:
    """Conjugate commuting generators into block lower-triangular form.

    Joint spectral subspaces are found by splitting along each generator in
    turn; inside each, a common flag is built from joint kernel vectors of the
    nilpotent parts. Blocks are ordered by their per-generator eigenvalues.
    ``tol_eig`` is a relative clustering radius; by default it widens with the
    subspace dimension to absorb the spread of defective eigenvalues.
    """
    gens = list(spec.generators) if isinstance(spec, LinearGroupSpec) else \
        [np.asarray(A, dtype=np.complex128) for A in spec]
    if not isinstance(spec, LinearGroupSpec):
        _check_generators(gens, TAU_COMM, TAU_INV)
    n = gens[0].shape[0]
    subspaces = [np.eye(n, dtype=np.complex128)]
    for A in gens:
        subspaces = [part for Q in subspaces for part in _split(Q, A, tol_eig)]

    blocks = []
    for Q in subspaces:
        size = Q.shape[1]
        restricted = [Q.conj().T @ A @ Q for A in gens]
        mus = [np.trace(R) / size for R in restricted]
        W = _joint_flag([R - mu * np.eye(size) for R, mu in zip(restricted, mus)])
        blocks.append((tuple(complex(mu) for mu in mus), Q @ W))
    scale = max(np.linalg.norm(A, 2) for A in gens)
    order_key = _block_order_key(_cluster_radius(scale, n, tol_eig))
    blocks.sort(key=lambda b: order_key(b[0]))

    P = np.column_stack([basis for _, basis in blocks])
    eta = tuple(basis.shape[1] for _, basis in blocks)
    eigen_table = np.array([[mus[g] for mus, _ in blocks] for g in range(len(gens))])
    bs = BlockStructure(n, eta, P, eigen_table)
    bs.residuals = _pattern_residuals(bs, gens)
    worst = max(bs.residuals["pattern"])
    if worst > TAU_PATTERN:
        raise IllConditionedSpectrum(f"off-pattern residual {worst:.3e} exceeds {TAU_PATTERN:g} relative")
    return bs


def canonical_u0(bs: BlockStructure) -> tuple[np.ndarray, np.ndarray]:
    """First basis vector of every block, in normal and in original coordinates."""
    u0 = np.zeros(bs.n, dtype=np.complex128)
    u0[list(bs.offsets)] = 1.0
    return u0, bs.P @ u0


@dataclass(frozen=True)
class Stratum:
    """``IN_V`` (``block is None``) or ``IN_H(k)`` with ``k`` the 1-based block index."""

    block: int | None = None

    @property
    def in_V(self) -> bool:
        return self.block is None

    def __str__(self):
        return "IN_V" if self.block is None else f"IN_H({self.block})"


def classify_stratum(u, bs: BlockStructure, tol: float = RANK_TOL) -> Stratum:
    """Locate ``u`` relative to the invariant hyperplanes; ``tol`` is relative to ``|P^-1 u|``."""
    w = bs.to_normal(u)
    scale = np.linalg.norm(w)
    for k, off in enumerate(bs.offsets, start=1):
        if not abs(w[off]) > tol * scale:
            return Stratum(k)
    return Stratum(None)


@dataclass(frozen=True)
class Transition:
    B: np.ndarray
    coefficients: np.ndarray
    residual: float


def solve_transition(spec: LinearGroupSpec, u, v, tau_solve: float = TAU_SOLVE) -> Transition:
    """Least-squares element ``B`` of the sampled span of the group with ``B u = v``."""
    u = np.asarray(u, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    basis = spec.span_basis
    cols = np.stack([B @ u for B in basis], axis=1)
    coef, *_ = np.linalg.lstsq(cols, v, rcond=None)
    B = sum(c * Bj for c, Bj in zip(coef, basis))
    residual = float(np.linalg.norm(B @ u - v))
    if residual > tau_solve * max(1.0, float(np.linalg.norm(v))):
        raise NotInOrbitSpan(f"no element of the span maps u to v (residual {residual:.3e})", residual)
    return Transition(B, coef, residual)


@dataclass
class LinearDominanceReport:
    dominant: bool
    budget: int
    rank_at_v0: RankVerdict
    probes: list
    diagnostics: list


def linear_dominance(spec: LinearGroupSpec, bs: BlockStructure, probes=(), word_budget: int | None = None,
                     tol: float = RANK_TOL) -> LinearDominanceReport:
    """Rank of the orbit of ``v0``, cross-checked against the stratum of each probe."""
    K = spec.budget if word_budget is None else word_budget
    words = enumerate_words(spec.m, K)
    _, v0 = canonical_u0(bs)
    verdict = rank_verdict(normalized_rows(spec.orbit_vectors(v0, words)), tol)
    dominant = verdict.rank == spec.n
    records, diagnostics = [], []
    for i, u in enumerate(probes):
        stratum = classify_stratum(u, bs, tol)
        pv = rank_verdict(normalized_rows(spec.orbit_vectors(u, words)), tol)
        records.append({"probe": i, "stratum": str(stratum), "rank": pv.rank,
                        "sigma_above": pv.sigma_above, "sigma_below": pv.sigma_below})
        full = pv.rank == spec.n
        if dominant and full != stratum.in_V:
            diagnostics.append({"kind": "InconsistentStratification", "probe": i,
                                "stratum": str(stratum), "rank": pv.rank})
        elif not dominant and full:
            diagnostics.append({"kind": "InconsistentStratification", "probe": i,
                                "stratum": str(stratum), "rank": pv.rank,
                                "detail": "full orbit rank although v0 is deficient"})
    return LinearDominanceReport(dominant, K, verdict, records, diagnostics)


@dataclass(frozen=True)
class PsiReport:
    matrix: np.ndarray
    rank: int
    span_dim: int
    injective: bool


def psi_x_matrix(spec: LinearGroupSpec, x, tol: float = RANK_TOL) -> PsiReport:
    """Matrix of ``B -> B x`` on the span basis, with its injectivity verdict."""
    x = np.asarray(x, dtype=np.complex128)
    M = np.stack([B @ x for B in spec.span_basis], axis=1)
    rank = numerical_rank(M.T, tol) if np.any(M) else 0
    return PsiReport(M, rank, spec.span_dim, rank == spec.span_dim)
