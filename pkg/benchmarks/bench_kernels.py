"""Time the compiled kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py --repeat 5
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from orbita import _pykernels
from orbita.jets import monomial_table

try:
    from orbita import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases(rng):
    for n, d in ((2, 8), (3, 6), (4, 6)):
        t = monomial_table(n, d)
        a = rng.normal(size=t.size) + 1j * rng.normal(size=t.size)
        b = rng.normal(size=t.size) + 1j * rng.normal(size=t.size)
        yield f"trunc_mul n={n} d={d}", "trunc_mul", (a, b, t.ti, t.tj, t.tk)
        g = 0.5 * (rng.normal(size=(n, t.size)) + 1j * rng.normal(size=(n, t.size)))
        g[:, 0] = 0
        yield f"monomial_powers n={n} d={d}", "monomial_powers", (g, t.parent, t.var, t.ti, t.tj, t.tk)
    for p, q, dim in ((300, 2000, 2), (1000, 5000, 4)):
        yield (f"nearest_sq_dist {p}x{q} dim={dim}", "nearest_sq_dist",
               (rng.normal(size=(p, dim)), rng.normal(size=(q, dim))))


def best_time(fn, args, repeat):
    number = max(1, int(0.05 / max(timeit.timeit(lambda: fn(*args), number=1), 1e-7)))
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    print(f"{'case':34s}" + "".join(f"{name:>14s}" for name, _ in backends) + f"{'speedup':>10s}")
    for label, fname, fargs in cases(rng):
        times = [best_time(getattr(mod, fname), fargs, args.repeat) for _, mod in backends]
        if len(backends) == 2:
            ref = getattr(_pykernels, fname)(*fargs)
            assert np.allclose(getattr(_ckernels, fname)(*fargs), ref), label
        speed = f"{times[0] / times[-1]:9.1f}x" if len(times) == 2 else ""
        print(f"{label:34s}" + "".join(f"{t * 1e3:12.3f}ms" for t in times) + speed)


if __name__ == "__main__":
    main()
