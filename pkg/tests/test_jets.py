from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orbita.errors import ContractViolation, NotAnAutomorphismGerm, SchemaError
from orbita.jets import (DEDUP_EPS, JetMap, PolyMap, commutator_defect, compose, evaluate,
                         formal_inverse, from_records, jacobian_at_zero, max_coeff_diff,
                         monomial_table, power, to_records)

from conftest import random_jet, resonant_shear, shear


def direct_eval(f, x):
    """Sum of c * prod(x_j ** alpha_j), term by term."""
    out = np.zeros(f.n, dtype=complex)
    for (i, alpha), c in f.terms.items():
        out[i] += c * np.prod([xj ** a for xj, a in zip(x, alpha)])
    return out


class TestMonomials:
    def test_graded_lex_order(self):
        t = monomial_table(2, 2)
        assert t.alphas == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))

    def test_product_table_consistent(self):
        t = monomial_table(3, 4)
        for i, j, k in zip(t.ti, t.tj, t.tk):
            assert tuple(a + b for a, b in zip(t.alphas[i], t.alphas[j])) == t.alphas[k]


class TestEvaluate:
    def test_identity(self):
        assert np.allclose(evaluate(JetMap.identity(2, 3), [3, -1]), [3, -1])

    def test_resonant_shear(self):
        assert np.allclose(evaluate(resonant_shear(), [1, 1]), [2, 5])

    def test_linear_part_only(self):
        assert np.allclose(JetMap.linear(np.diag([2, 3]), 5)([1, 1]), [2, 3])

    def test_dimension_mismatch(self):
        with pytest.raises(ContractViolation):
            evaluate(JetMap.identity(2, 2), [1, 2, 3])

    def test_origin_is_fixed_exactly(self, rng):
        f = random_jet(rng, 3, 4)
        assert np.all(f(np.zeros(3)) == 0)

    def test_matches_direct_substitution(self, rng):
        f = random_jet(rng, 3, 4)
        for _ in range(5):
            x = rng.normal(size=3) + 1j * rng.normal(size=3)
            assert np.allclose(f(x), direct_eval(f, x), rtol=1e-12, atol=1e-12)

    def test_jacobian_at_point_matches_finite_difference(self, rng):
        f = random_jet(rng, 2, 3)
        x = rng.normal(size=2) + 0j
        h = 1e-6
        fd = np.stack([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(2)], axis=1)
        assert np.allclose(f.jacobian(x), fd, atol=1e-7)


class TestCompose:
    def test_right_identity(self, rng):
        f = random_jet(rng, 2, 5)
        assert max_coeff_diff(compose(f, JetMap.identity(2, 5)), f) == 0

    def test_resonant_square(self):
        h = resonant_shear(4)
        expected = JetMap.from_terms(2, 4, {(0, (1, 0)): 4, (1, (0, 1)): 16, (1, (2, 0)): 8})
        assert max_coeff_diff(compose(h, h), expected) < 1e-14
        rng = np.random.default_rng(0)
        for _ in range(5):
            x = rng.normal(size=2) + 1j * rng.normal(size=2)
            assert np.allclose(compose(h, h)(x), h(h(x)))

    def test_commuting_pair(self):
        f = shear(3)
        g = JetMap.linear(np.diag([2, 4]), 3)
        expected = JetMap.from_terms(2, 3, {(0, (1, 0)): 2, (1, (0, 1)): 4, (1, (2, 0)): 4})
        assert max_coeff_diff(compose(f, g), expected) < 1e-14
        assert max_coeff_diff(compose(g, f), expected) < 1e-14

    def test_mismatch(self):
        with pytest.raises(ContractViolation):
            compose(JetMap.identity(2, 2), JetMap.identity(2, 3))
        with pytest.raises(ContractViolation):
            compose(JetMap.identity(2, 2), JetMap.identity(3, 2))

    def test_exact_when_degree_fits(self, rng):
        # deg f * deg g <= d, so truncation drops nothing
        f = random_jet(rng, 2, 6).degree_part(1) + random_jet(rng, 2, 6).degree_part(2)
        g = random_jet(rng, 2, 6).degree_part(1) + random_jet(rng, 2, 6).degree_part(3)
        f, g = JetMap(2, 6, f), JetMap(2, 6, g)
        for _ in range(5):
            x = rng.normal(size=2) + 1j * rng.normal(size=2)
            assert np.allclose(compose(f, g)(x), f(g(x)), rtol=1e-11, atol=1e-11)

    def test_power_closed_form(self):
        h = resonant_shear(8)
        for k in range(1, 7):
            c_k = k * 4 ** (k - 1)
            expected = JetMap.from_terms(2, 8, {(0, (1, 0)): 2 ** k, (1, (0, 1)): 4 ** k, (1, (2, 0)): c_k})
            assert max_coeff_diff(power(h, k), expected) < 1e-9 * 4 ** k


class TestJacobianAtZero:
    def test_examples(self):
        assert np.allclose(jacobian_at_zero(JetMap.identity(3, 2)), np.eye(3))
        assert np.allclose(jacobian_at_zero(resonant_shear()), np.diag([2, 4]))
        assert np.allclose(jacobian_at_zero(shear()), np.eye(2))


class TestInverse:
    def test_identity(self):
        assert max_coeff_diff(formal_inverse(JetMap.identity(2, 4)), JetMap.identity(2, 4)) == 0

    def test_shear(self):
        inv = formal_inverse(shear(4))
        expected = JetMap.from_terms(2, 4, {(0, (1, 0)): 1, (1, (0, 1)): 1, (1, (2, 0)): -1})
        assert max_coeff_diff(inv, expected) < 1e-14
        assert max_coeff_diff(compose(shear(4), inv), JetMap.identity(2, 4)) < 1e-14

    def test_linear(self):
        inv = formal_inverse(JetMap.linear(np.diag([2, 3]), 3))
        assert np.allclose(jacobian_at_zero(inv), np.diag([0.5, 1 / 3]))

    def test_resonant(self):
        inv = formal_inverse(resonant_shear(4))
        expected = JetMap.from_terms(2, 4, {(0, (1, 0)): 0.5, (1, (0, 1)): 0.25, (1, (2, 0)): -1 / 16})
        assert max_coeff_diff(inv, expected) < 1e-14

    def test_singular(self):
        with pytest.raises(NotAnAutomorphismGerm):
            formal_inverse(JetMap.linear(np.diag([1, 0]), 3))


class TestCommutatorDefect:
    def test_examples(self, rng):
        f = random_jet(rng, 2, 4)
        assert commutator_defect(f, f) == 0
        assert commutator_defect(shear(3), JetMap.linear(np.diag([2, 4]), 3)) < 1e-14
        a = JetMap.linear(np.diag([2, 1]), 2)
        b = JetMap.linear([[1, 1], [0, 1]], 2)
        assert commutator_defect(a, b) > 0.5


class TestRecords:
    def test_round_trip(self, rng):
        f = random_jet(rng, 2, 3)
        g = from_records(2, 3, to_records(f))
        assert max_coeff_diff(f, g) == 0

    def test_rejects_constant(self):
        with pytest.raises(SchemaError):
            from_records(1, 2, [{"component": 0, "monomial": [0], "re": 1.0, "im": 0.0}])

    def test_rejects_bad_monomial(self):
        with pytest.raises(SchemaError):
            from_records(2, 2, [{"component": 0, "monomial": [3, 0], "re": 1.0, "im": 0.0}])
        with pytest.raises(SchemaError):
            from_records(2, 2, [{"component": 2, "monomial": [1, 0], "re": 1.0, "im": 0.0}])

    def test_dedup(self):
        f = JetMap.from_terms(1, 2, {(0, (1,)): 1, (0, (2,)): DEDUP_EPS / 10})
        assert len(f.terms) == 1

    def test_jets_are_immutable(self):
        f = JetMap.identity(2, 2)
        with pytest.raises(ValueError):
            f.coeffs[0, 1] = 5

    def test_polymap_constant(self):
        p = PolyMap.affine(np.eye(1), [3.0])
        assert np.allclose(p([1.0]), [4.0])
        with pytest.raises(ContractViolation):
            p.to_jet()
        q = PolyMap.affine([[2.0]], [-1.0])  # fixes 1
        moved = q.translate_conjugate([1.0])
        assert np.allclose(moved.constant, 0.0)
        assert np.allclose(jacobian_at_zero(moved), [[2.0]])


# -- properties ----------------------------------------------------------------

dims = st.tuples(st.integers(1, 3), st.integers(1, 5), st.integers(0, 2 ** 31 - 1))


@given(dims)
def test_morphism_property(params):
    n, d, seed = params
    rng = np.random.default_rng(seed)
    f, g = random_jet(rng, n, d), random_jet(rng, n, d)
    err = np.abs(jacobian_at_zero(compose(f, g)) - jacobian_at_zero(f) @ jacobian_at_zero(g)).max()
    assert err <= 1e-12


@given(dims)
def test_associative(params):
    n, d, seed = params
    rng = np.random.default_rng(seed)
    f, g, h = (random_jet(rng, n, d) for _ in range(3))
    assert max_coeff_diff(compose(compose(f, g), h), compose(f, compose(g, h))) <= 1e-10


@given(dims)
def test_inverse_round_trip(params):
    n, d, seed = params
    rng = np.random.default_rng(seed)
    f = random_jet(rng, n, d)
    inv = formal_inverse(f)
    ident = JetMap.identity(n, d)
    assert max_coeff_diff(compose(f, inv), ident) <= 1e-10
    assert max_coeff_diff(compose(inv, f), ident) <= 1e-10


@given(dims)
def test_translate_conjugate_matches_pointwise(params):
    n, d, seed = params
    rng = np.random.default_rng(seed)
    f = PolyMap(n, d, random_jet(rng, n, d).coeffs)
    p = rng.normal(size=n) * 0.5
    g = f.translate_conjugate(p)
    x = rng.normal(size=n) * 0.5
    assert np.allclose(g(x), f(x + p) - p, atol=1e-10)


@given(st.integers(-4, 4), st.integers(-4, 4))
def test_power_group_law(a, b):
    h = resonant_shear(6)
    assert max_coeff_diff(compose(power(h, a), power(h, b)), power(h, a + b)) <= 1e-10 * 4.0 ** (abs(a) + abs(b))
