import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pscm.errors import ParameterError
from pscm.galois import (PRIMITIVE_POLYNOMIALS, Poly2, bch_generator, cyclotomic_coset,
                         field_new, minimal_polynomial)


def clmul_mod(a, b, poly, v):
    """Shift-and-add multiplication in GF(2^v): an oracle independent of the tables."""
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a >> v:
            a ^= poly
    return out


class TestFieldConstruction:
    @pytest.mark.parametrize("v", range(2, 17))
    def test_tables_round_trip(self, v):
        f = field_new(v)
        assert f.size == 1 << v
        nz = np.arange(1, f.size)
        assert np.array_equal(f.exp[f.log[nz]], nz)

    def test_v10_uses_x10_x3_1(self):
        f = field_new(10)
        assert f.primitive_polynomial == (1 << 10) | (1 << 3) | 1
        assert f.pow(f.alpha, 1023) == 1
        assert f.alpha_pow(0) == 1

    def test_alpha_has_full_order(self):
        f = field_new(10)
        seen = {f.alpha_pow(i) for i in range(1023)}
        assert len(seen) == 1023

    @pytest.mark.parametrize("v", [0, 1, 17, 32])
    def test_unsupported_degree(self, v):
        with pytest.raises(ParameterError):
            field_new(v)

    def test_shared_instance(self):
        assert field_new(8) is field_new(8)


class TestArithmetic:
    def test_gf16_matches_shift_and_add(self):
        f = field_new(4)
        for a, b in itertools.product(range(16), repeat=2):
            assert f.mul(a, b) == clmul_mod(a, b, f.primitive_polynomial, 4)

    def test_gf16_axioms_exhaustive(self):
        f = field_new(4)
        els = range(16)
        for a, b, c in itertools.product(els, repeat=3):
            assert f.mul(f.mul(a, b), c) == f.mul(a, f.mul(b, c))
            assert f.mul(a, f.add(b, c)) == f.add(f.mul(a, b), f.mul(a, c))
        for a in range(1, 16):
            assert f.mul(a, f.inv(a)) == 1

    @given(st.integers(0, 1023), st.integers(0, 1023), st.integers(0, 1023))
    def test_gf1024_sampled_axioms(self, a, b, c):
        f = field_new(10)
        assert f.mul(a, b) == clmul_mod(a, b, f.primitive_polynomial, 10)
        assert f.mul(a, f.add(b, c)) == f.add(f.mul(a, b), f.mul(a, c))
        assert f.mul(1, a) == a
        assert f.mul(0, a) == 0

    @given(st.integers(1, 1023), st.integers(-3000, 3000))
    def test_pow_matches_repeated_mul(self, a, e):
        f = field_new(10)
        expect = 1
        base = a if e >= 0 else f.inv(a)
        for _ in range(abs(e) % 1023):
            expect = f.mul(expect, base)
        assert f.pow(a, e) == expect

    def test_inverse_and_division(self):
        f = field_new(10)
        with pytest.raises(ZeroDivisionError):
            f.inv(0)
        for a in (1, 2, 77, 1023):
            assert f.div(f.mul(a, 5), 5) == a


class TestPolynomials:
    def test_poly_ops(self):
        p = Poly2.from_coefficients([1, 0, 1, 1])  # x^3 + x + 1
        assert p.degree == 3
        assert p.coefficients == [1, 0, 1, 1]
        assert (p * Poly2(0b11)).bits == 0b11101
        assert (Poly2(0b11101) % p).bits == 0

    def test_cyclotomic_coset(self):
        f = field_new(4)
        assert cyclotomic_coset(f, 1) == [1, 2, 4, 8]
        assert cyclotomic_coset(f, 5) == [5, 10]

    def test_minimal_polynomial_of_alpha_is_the_field_polynomial(self):
        for v in (4, 6, 10):
            f = field_new(v)
            assert minimal_polynomial(f, 1).bits == PRIMITIVE_POLYNOMIALS[v]


class TestBchGenerator:
    def test_v10_t3_degree(self):
        assert bch_generator(field_new(10), 3).degree == 30

    def test_v4_t1_is_hamming(self):
        g = bch_generator(field_new(4), 1)
        assert g.bits == 0b10011

    @pytest.mark.parametrize("v,t", [(4, 1), (4, 2), (6, 2), (8, 4), (10, 3)])
    def test_roots_and_divisibility(self, v, t):
        f = field_new(v)
        g = bch_generator(f, t)
        for i in range(1, 2 * t + 1):
            assert f.poly_eval(g, f.alpha_pow(i)) == 0
        x_n_plus_1 = Poly2((1 << f.order) | 1)
        assert (x_n_plus_1 % g).bits == 0

    @pytest.mark.parametrize("t", [0, -1, 512])
    def test_invalid_t(self, t):
        with pytest.raises(ParameterError):
            bch_generator(field_new(10), t)
