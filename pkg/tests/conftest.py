from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from orbita.jets import JetMap

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def resonant_shear(d: int = 8) -> JetMap:
    """h(z, w) = (2z, 4w + z^2)."""
    return JetMap.from_terms(2, d, {(0, (1, 0)): 2, (1, (0, 1)): 4, (1, (2, 0)): 1})


def shear(d: int = 4, c: complex = 1.0) -> JetMap:
    """S(z, w) = (z, w + c z^2)."""
    return JetMap.from_terms(2, d, {(0, (1, 0)): 1, (1, (0, 1)): 1, (1, (2, 0)): c})


def random_jet(rng, n: int, d: int, scale: float = 0.3, linear=None) -> JetMap:
    """Random jet with a well-conditioned linear part."""
    from orbita.jets import monomial_table
    t = monomial_table(n, d)
    c = scale * (rng.normal(size=(n, t.size)) + 1j * rng.normal(size=(n, t.size)))
    c[:, 0] = 0
    if linear is None:
        q, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
        linear = q * rng.uniform(0.7, 1.5, size=n)
    c[:, 1:n + 1] = linear
    return JetMap(n, d, c)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria record one line each here; printed after the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
