"""Truncated polynomial maps of C^n (jets at the origin).

A map is stored densely: ``coeffs[i, a]`` is the coefficient of the monomial
``alphas[a]`` in output component ``i``. Monomials of degree ``0..d`` are laid
out in graded lexicographic order (degree first, then ``x_1 > x_2 > ...``), so
column 0 is always the constant term.

:class:`PolyMap` allows a constant term and is only used for raw generators
before they are conjugated to fix the origin. :class:`JetMap` is the working
type: constant term zero, composition truncated at degree ``d``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._backend import kernels
from .errors import ContractViolation, NotAnAutomorphismGerm, SchemaError

DEDUP_EPS = 1e-14
TAU_INV = 1e-12


@dataclass(frozen=True)
class MonomialTable:
    n: int
    d: int
    alphas: tuple
    index: dict
    degrees: np.ndarray
    parent: np.ndarray  # index of alpha - e_var
    var: np.ndarray
    ti: np.ndarray  # product table: alphas[ti] + alphas[tj] == alphas[tk]
    tj: np.ndarray
    tk: np.ndarray
    dsrc: np.ndarray  # dsrc[j, a]: index of alpha - e_j, or -1
    dmul: np.ndarray  # dmul[j, a]: alpha_j

    @property
    def size(self):
        return len(self.alphas)


def _graded_monomials(n, d):
    out = []
    for deg in range(d + 1):
        block = [a for a in itertools.product(range(deg + 1), repeat=n) if sum(a) == deg]
        out.extend(sorted(block, reverse=True))
    return out


@lru_cache(maxsize=None)
def monomial_table(n: int, d: int) -> MonomialTable:
    alphas = tuple(_graded_monomials(n, d))
    index = {a: i for i, a in enumerate(alphas)}
    size = len(alphas)
    degrees = np.array([sum(a) for a in alphas], dtype=np.int64)
    parent = np.zeros(size, dtype=np.int64)
    var = np.zeros(size, dtype=np.int64)
    for i, a in enumerate(alphas[1:], start=1):
        v = next(j for j, e in enumerate(a) if e)
        b = list(a)
        b[v] -= 1
        parent[i] = index[tuple(b)]
        var[i] = v
    ti, tj, tk = [], [], []
    for i, a in enumerate(alphas):
        for j, b in enumerate(alphas):
            if degrees[i] + degrees[j] > d:
                continue
            ti.append(i)
            tj.append(j)
            tk.append(index[tuple(x + y for x, y in zip(a, b))])
    dsrc = -np.ones((n, size), dtype=np.int64)
    dmul = np.zeros((n, size), dtype=np.float64)
    for i, a in enumerate(alphas):
        for j in range(n):
            if a[j]:
                b = list(a)
                b[j] -= 1
                dsrc[j, i] = index[tuple(b)]
                dmul[j, i] = a[j]
    as_i64 = lambda xs: np.ascontiguousarray(xs, dtype=np.int64)
    return MonomialTable(n, d, alphas, index, degrees, parent, var,
                         as_i64(ti), as_i64(tj), as_i64(tk), dsrc, dmul)


def monomial_values(table: MonomialTable, points: np.ndarray) -> np.ndarray:
    """Values of every monomial at each point; ``points`` has shape (p, n)."""
    points = np.asarray(points, dtype=np.complex128)
    vals = np.empty((points.shape[0], table.size), dtype=np.complex128)
    vals[:, 0] = 1.0
    for a in range(1, table.size):
        vals[:, a] = vals[:, table.parent[a]] * points[:, table.var[a]]
    return vals


class PolyMap:
    """Polynomial map C^n -> C^n of degree at most ``d``; constant term allowed."""

    __slots__ = ("n", "d", "coeffs", "table")

    def __init__(self, n: int, d: int, coeffs):
        if n < 1 or d < 1:
            raise ContractViolation(f"need n >= 1 and d >= 1, got n={n}, d={d}")
        table = monomial_table(n, d)
        coeffs = np.array(coeffs, dtype=np.complex128)
        if coeffs.shape != (n, table.size):
            raise ContractViolation(f"coefficient array must have shape {(n, table.size)}, got {coeffs.shape}")
        coeffs[np.abs(coeffs) < DEDUP_EPS] = 0.0
        coeffs.flags.writeable = False
        self.n, self.d, self.coeffs, self.table = n, d, coeffs, table

    @classmethod
    def from_terms(cls, n, d, terms):
        """Build from ``{(component, alpha): coefficient}``."""
        table = monomial_table(n, d)
        coeffs = np.zeros((n, table.size), dtype=np.complex128)
        for (i, alpha), c in terms.items():
            alpha = tuple(int(e) for e in alpha)
            if len(alpha) != n or min(alpha) < 0:
                raise SchemaError(f"bad monomial {alpha} for n={n}")
            if sum(alpha) > d:
                raise SchemaError(f"monomial {alpha} exceeds truncation degree {d}")
            if not 0 <= i < n:
                raise SchemaError(f"component {i} out of range for n={n}")
            coeffs[i, table.index[alpha]] += c
        return cls(n, d, coeffs)

    @classmethod
    def affine(cls, A, b, d=1):
        A = np.asarray(A, dtype=np.complex128)
        n = A.shape[0]
        table = monomial_table(n, d)
        coeffs = np.zeros((n, table.size), dtype=np.complex128)
        coeffs[:, 0] = b
        coeffs[:, 1:n + 1] = A
        return cls(n, d, coeffs)

    @property
    def constant(self) -> np.ndarray:
        return self.coeffs[:, 0].copy()

    @property
    def terms(self) -> dict:
        """Nonzero coefficients as ``{(component, alpha): c}`` in graded order."""
        rows, cols = np.nonzero(self.coeffs)
        order = np.lexsort((rows, cols))
        return {(int(rows[k]), self.table.alphas[cols[k]]): complex(self.coeffs[rows[k], cols[k]])
                for k in order}

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128)
        if x.shape != (self.n,):
            raise ContractViolation(f"point has shape {x.shape}, map expects ({self.n},)")
        return self.evaluate_many(x[None, :])[0]

    def evaluate_many(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.complex128)
        if points.ndim != 2 or points.shape[1] != self.n:
            raise ContractViolation(f"points must have shape (p, {self.n}), got {points.shape}")
        return monomial_values(self.table, points) @ self.coeffs.T

    __call__ = evaluate

    def jacobian(self, x) -> np.ndarray:
        """Jacobian matrix at an arbitrary point."""
        x = np.asarray(x, dtype=np.complex128)
        if x.shape != (self.n,):
            raise ContractViolation(f"point has shape {x.shape}, map expects ({self.n},)")
        vals = monomial_values(self.table, x[None, :])[0]
        J = np.zeros((self.n, self.n), dtype=np.complex128)
        for j in range(self.n):
            src = self.table.dsrc[j]
            mask = src >= 0
            J[:, j] = self.coeffs[:, mask] @ (self.table.dmul[j, mask] * vals[src[mask]])
        return J

    def translate_conjugate(self, p) -> PolyMap:
        """``x -> f(x + p) - p``; exact because ``(x + p)**alpha`` keeps degree ``|alpha|``."""
        p = np.asarray(p, dtype=np.complex128)
        shift = np.zeros_like(self.coeffs)
        shift[:, 0] = p
        shift[:, 1:self.n + 1] = np.eye(self.n)
        out = _compose_dense(self.coeffs, shift, self.table)
        out[:, 0] -= p
        return PolyMap(self.n, self.d, out)

    def to_jet(self) -> JetMap:
        if np.any(self.coeffs[:, 0] != 0):
            raise ContractViolation("map has a constant term; conjugate to the fixed point first")
        return JetMap(self.n, self.d, self.coeffs)

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, d={self.d}, nnz={np.count_nonzero(self.coeffs)})"


class JetMap(PolyMap):
    """Jet of order ``d`` at 0 of a map fixing the origin."""

    __slots__ = ()

    def __init__(self, n, d, coeffs):
        super().__init__(n, d, coeffs)
        if np.any(self.coeffs[:, 0] != 0):
            raise SchemaError("jets fixing the origin cannot carry a constant term")

    @classmethod
    def identity(cls, n, d):
        return cls.linear(np.eye(n), d)

    @classmethod
    def linear(cls, A, d):
        A = np.asarray(A, dtype=np.complex128)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ContractViolation(f"expected a square matrix, got shape {A.shape}")
        return cls.affine(A, np.zeros(A.shape[0]), d).to_jet()

    def degree_part(self, m: int) -> np.ndarray:
        return np.where(self.table.degrees == m, self.coeffs, 0)

    def __matmul__(self, other):
        return compose(self, other)


def _compose_dense(f_coeffs, g_coeffs, table):
    powers = kernels.monomial_powers(g_coeffs, table.parent, table.var, table.ti, table.tj, table.tk)
    return f_coeffs @ powers


def _check_pair(f, g):
    if f.n != g.n or f.d != g.d:
        raise ContractViolation(f"mismatched jets: (n={f.n}, d={f.d}) vs (n={g.n}, d={g.d})")


def evaluate(f: PolyMap, x) -> np.ndarray:
    return f.evaluate(x)


def compose(f: JetMap, g: JetMap) -> JetMap:
    """Jet of ``f o g`` truncated at the common degree."""
    _check_pair(f, g)
    return JetMap(f.n, f.d, _compose_dense(f.coeffs, g.coeffs, f.table))


def jacobian_at_zero(f: PolyMap) -> np.ndarray:
    return np.array(f.coeffs[:, 1:f.n + 1])


def formal_inverse(f: JetMap, tau_inv: float = TAU_INV) -> JetMap:
    """Compositional inverse, solved one homogeneous degree at a time.

    With ``g`` correct through degree ``m - 1``, the degree-``m`` part of
    ``f o g - id`` equals ``A @ delta_m`` for the missing degree-``m`` part of
    ``g``, where ``A`` is the linear part of ``f``.
    """
    A = jacobian_at_zero(f)
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] <= tau_inv * max(s[0], 1.0):
        raise NotAnAutomorphismGerm(f"linear part is singular (smallest singular value {s[-1]:.3e})")
    A_inv = np.linalg.inv(A)
    table = f.table
    g = np.zeros_like(f.coeffs)
    g[:, 1:f.n + 1] = A_inv
    ident = np.zeros_like(f.coeffs)
    ident[:, 1:f.n + 1] = np.eye(f.n)
    for m in range(2, f.d + 1):
        resid = _compose_dense(f.coeffs, g, table) - ident
        cols = table.degrees == m
        g[:, cols] -= A_inv @ resid[:, cols]
    return JetMap(f.n, f.d, g)


def commutator_defect(f: JetMap, g: JetMap) -> float:
    """Largest coefficient magnitude of ``f o g - g o f``."""
    _check_pair(f, g)
    diff = compose(f, g).coeffs - compose(g, f).coeffs
    return float(np.abs(diff).max(initial=0.0))


def max_coeff_diff(f: PolyMap, g: PolyMap) -> float:
    _check_pair(f, g)
    return float(np.abs(f.coeffs - g.coeffs).max(initial=0.0))


def power(f: JetMap, k: int, inverse: JetMap | None = None) -> JetMap:
    """``f**k`` by repeated squaring; negative ``k`` uses ``inverse`` (computed if absent)."""
    if k < 0:
        base = inverse if inverse is not None else formal_inverse(f)
        k = -k
    else:
        base = f
    result = JetMap.identity(f.n, f.d)
    while k:
        if k & 1:
            result = compose(result, base)
        k >>= 1
        if k:
            base = compose(base, base)
    return result


def to_records(f: PolyMap) -> list:
    return [{"component": i, "monomial": list(alpha), "re": c.real, "im": c.imag}
            for (i, alpha), c in f.terms.items()]


def from_records(n: int, d: int, records, allow_constant=False) -> PolyMap:
    terms = {}
    for rec in records:
        try:
            i = int(rec["component"])
            alpha = tuple(int(e) for e in rec["monomial"])
            c = complex(float(rec.get("re", 0.0)), float(rec.get("im", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed jet record {rec!r}") from exc
        if sum(alpha) == 0 and not allow_constant:
            raise SchemaError(f"constant term in jet record {rec!r}")
        terms[(i, alpha)] = terms.get((i, alpha), 0) + c
    poly = PolyMap.from_terms(n, d, terms)
    return poly if allow_constant else poly.to_jet()
