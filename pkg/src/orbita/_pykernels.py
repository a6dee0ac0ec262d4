"""NumPy fallback for the compiled kernels; same signatures and results."""
import numpy as np

BACKEND = "python"

_CHUNK = 4096


def trunc_mul(a, b, ti, tj, tk):
    n = len(a)
    prod = a[ti] * b[tj]
    out = np.empty(n, dtype=np.complex128)
    out.real = np.bincount(tk, weights=prod.real, minlength=n)
    out.imag = np.bincount(tk, weights=prod.imag, minlength=n)
    return out


def monomial_powers(g, parent, var, ti, tj, tk):
    g = np.asarray(g, dtype=np.complex128)
    nmono = g.shape[1]
    powers = np.zeros((nmono, nmono), dtype=np.complex128)
    powers[0, 0] = 1.0
    for a in range(1, nmono):
        powers[a] = trunc_mul(powers[parent[a]], g[var[a]], ti, tj, tk)
    return powers


def nearest_sq_dist(points, cloud):
    points = np.asarray(points, dtype=np.float64)
    cloud = np.asarray(cloud, dtype=np.float64)
    out = np.empty(points.shape[0], dtype=np.float64)
    for start in range(0, points.shape[0], _CHUNK):
        block = points[start:start + _CHUNK]
        d2 = ((block[:, None, :] - cloud[None, :, :]) ** 2).sum(axis=2)
        out[start:start + _CHUNK] = d2.min(axis=1)
    return out
