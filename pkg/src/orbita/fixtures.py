"""Reference groups used by the tests, the acceptance suite and the bundled scenarios.

Each fixture is a plain scenario dictionary, so the same object can be
written to disk, hashed and fed to the command line.
"""
from __future__ import annotations

import numpy as np

from .scenario import to_jsonable


def matrix_generator(A, constant=None) -> dict:
    gen = {"matrix": to_jsonable(np.asarray(A, dtype=np.complex128))}
    if constant is not None:
        gen["constant"] = to_jsonable(np.asarray(constant, dtype=np.complex128))
    return gen


def _scenario(name, n, generators, base_points, **extra) -> dict:
    raw = {"schema_version": 1, "name": name, "n": n, "generators": generators,
           "base_points": to_jsonable(np.asarray(base_points, dtype=np.complex128))}
    for key, value in extra.items():
        raw[key] = to_jsonable(value)
    return raw


def identity(n: int = 2) -> dict:
    return _scenario("identity", n, [matrix_generator(np.eye(n))], [np.ones(n)], degree=2,
                     commands=["normal-form", "dominance", "orbit"])


def diag23() -> dict:
    return _scenario("diag23", 2, [matrix_generator(np.diag([2.0, 3.0]))], [[1, 1]], degree=4,
                     probes=[[5, 7], [1, 0], [0, 1]], random_probes=4, perturbations=3,
                     candidates=[[0, 1]])


def diag235() -> dict:
    return _scenario("diag235", 3, [matrix_generator(np.diag([2.0, 3.0, 5.0]))], [[1, 1, 1]], degree=2,
                     probes=[[1, 0, 1]], random_probes=2,
                     commands=["normal-form", "dominance", "linearize", "orbit", "minimality"])


def diag_expanding_contracting() -> dict:
    return _scenario("diag-2-half", 2, [matrix_generator(np.diag([2.0, 0.5]))], [[1, 1]], degree=2,
                     commands=["normal-form", "dominance", "linearize", "orbit", "minimality"])


def jordan() -> dict:
    return _scenario("jordan", 2, [matrix_generator([[2.0, 0.0], [1.0, 2.0]])], [[1, 1]], degree=2,
                     commands=["normal-form", "dominance", "linearize", "orbit"])


def resonant() -> dict:
    """``h(z, w) = (2z, 4w + z^2)``: the eigenvalues satisfy ``4 = 2^2``."""
    terms = [{"component": 0, "monomial": [1, 0], "re": 2.0, "im": 0.0},
             {"component": 1, "monomial": [0, 1], "re": 4.0, "im": 0.0},
             {"component": 1, "monomial": [2, 0], "re": 1.0, "im": 0.0}]
    return _scenario("resonant", 2, [terms], [[1, 1]], degree=8, budget=3,
                     commands=["normal-form", "dominance", "linearize", "orbit"])


def affine() -> dict:
    """``f(x) = A (x - p) + p`` with ``A = diag(2, 3)`` and ``p = (1, 0)``."""
    A, p = np.diag([2.0, 3.0]), np.array([1.0, 0.0])
    return _scenario("affine", 2, [matrix_generator(A, p - A @ p)], [[2, 1]], degree=1,
                     random_probes=2, commands=["normal-form", "dominance", "linearize", "orbit"])


def scalar_two() -> dict:
    """``2 I`` on the line: the orbit of 1 is a geometric sequence, never dense."""
    return _scenario("scalar-two", 1, [matrix_generator([[2.0]])], [[1.0]], degree=2,
                     commands=["dominance", "orbit", "density"])


DENSE_LOGS = (complex(0.11, 2.0), complex(-0.07, 1.3))


def dense_line() -> dict:
    """Two multipliers whose log-moduli and arguments are rationally independent.

    The subgroup they generate in the punctured line is dense, so the cover
    radius of sampled orbits on the unit disc keeps shrinking as the budget grows.
    """
    gens = [matrix_generator([[np.exp(c)]]) for c in DENSE_LOGS]
    return _scenario("dense-line", 1, gens, [[1.0]], degree=2, commands=["dominance", "orbit", "density"])


def planted_matrices(eta, m: int = 1, seed: int = 0, cond_max: float = 4.0):
    """Commuting matrices ``Q T_i Q^-1`` with ``T_i`` block lower triangular of block sizes ``eta``.

    Each block of ``T_i`` is ``lambda I + c N`` with ``N`` a shared strictly lower
    nilpotent, so all ``T_i`` commute. Returns the matrices and ``Q``.
    """
    rng = np.random.default_rng(seed)
    n = int(sum(eta))
    while True:
        Q = np.eye(n) + 0.3 * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
        if np.linalg.cond(Q) <= cond_max:
            break
    nil = []
    for size in eta:
        N = np.tril(rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size)), -1)
        nil.append(N)
    used = set()
    mats = []
    for _ in range(m):
        T = np.zeros((n, n), dtype=np.complex128)
        off = 0
        for size, N in zip(eta, nil):
            while True:
                lam = rng.uniform(0.5, 2.0) * np.exp(1j * rng.uniform(0, 2 * np.pi))
                if all(abs(lam - u) > 0.3 for u in used):
                    break
            used.add(lam)
            c = rng.uniform(0.5, 1.5)
            T[off:off + size, off:off + size] = lam * np.eye(size) + c * N
            off += size
        mats.append(Q @ T @ np.linalg.inv(Q))
    return mats, Q


def planted(eta=(2, 1), m: int = 1, seed: int = 0) -> dict:
    mats, _ = planted_matrices(eta, m, seed)
    n = int(sum(eta))
    return _scenario(f"planted-{'-'.join(map(str, eta))}-s{seed}", n, [matrix_generator(A) for A in mats],
                     [np.ones(n)], degree=2, commands=["normal-form", "dominance"])


def suite() -> dict:
    """Every named fixture, keyed by scenario name."""
    items = [identity(), diag23(), diag235(), diag_expanding_contracting(), jordan(), resonant(), affine(),
             scalar_two(), dense_line(), planted((2, 1), 1, 0), planted((1, 1), 2, 1)]
    return {raw["name"]: raw for raw in items}
