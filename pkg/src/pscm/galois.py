"""Arithmetic in GF(2^v) and BCH generator polynomials.

Elements are plain integers ``0 <= a < 2**v`` in the polynomial basis.
Multiplication goes through log/antilog tables built once per field.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ParameterError

# Primitive polynomials, bit i = coefficient of x^i.
PRIMITIVE_POLYNOMIALS = {
    2: 0b111,  # x^2 + x + 1
    3: 0b1011,  # x^3 + x + 1
    4: 0b10011,  # x^4 + x + 1
    5: 0b100101,  # x^5 + x^2 + 1
    6: 0b1000011,  # x^6 + x + 1
    7: 0b10001001,  # x^7 + x^3 + 1
    8: 0x11D,  # x^8 + x^4 + x^3 + x^2 + 1
    9: 0x211,  # x^9 + x^4 + 1
    10: 0x409,  # x^10 + x^3 + 1
    11: 0x805,  # x^11 + x^2 + 1
    12: 0x1053,  # x^12 + x^6 + x^4 + x + 1
    13: 0x201B,  # x^13 + x^4 + x^3 + x + 1
    14: 0x4443,  # x^14 + x^10 + x^6 + x + 1
    15: 0x8003,  # x^15 + x + 1
    16: 0x1100B,  # x^16 + x^12 + x^3 + x + 1
}


@dataclass(frozen=True)
class Poly2:
    """Polynomial over GF(2) stored as an integer bit mask (bit i is x^i)."""

    bits: int

    @classmethod
    def from_coefficients(cls, coeffs) -> Poly2:
        """Build from coefficients listed from the highest degree down."""
        value = 0
        for c in coeffs:
            value = (value << 1) | (int(c) & 1)
        return cls(value)

    @property
    def degree(self) -> int:
        return self.bits.bit_length() - 1

    @property
    def coefficients(self) -> list[int]:
        """Coefficients from the highest degree down; ``[]`` for zero."""
        return [(self.bits >> i) & 1 for i in range(self.degree, -1, -1)]

    def __mul__(self, other: Poly2) -> Poly2:
        a, b, out = self.bits, other.bits, 0
        while b:
            if b & 1:
                out ^= a
            a <<= 1
            b >>= 1
        return Poly2(out)

    def __mod__(self, other: Poly2) -> Poly2:
        if other.bits == 0:
            raise ZeroDivisionError("polynomial modulo zero")
        a, dg = self.bits, other.degree
        while a and a.bit_length() - 1 >= dg:
            a ^= other.bits << (a.bit_length() - 1 - dg)
        return Poly2(a)

    def __add__(self, other: Poly2) -> Poly2:
        return Poly2(self.bits ^ other.bits)

    def __repr__(self) -> str:
        if self.bits == 0:
            return "Poly2(0)"
        terms = []
        for d in range(self.degree, -1, -1):
            if (self.bits >> d) & 1:
                terms.append("1" if d == 0 else ("x" if d == 1 else f"x^{d}"))
        return "Poly2(" + " + ".join(terms) + ")"


@dataclass(frozen=True, eq=False)
class GaloisField:
    """GF(2^v) with a fixed primitive polynomial.

    ``exp`` has length ``2 * order`` so that ``exp[log[a] + log[b]]`` never
    needs a modulo.
    """

    v: int
    primitive_polynomial: int
    exp: np.ndarray = field(repr=False)
    log: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return 1 << self.v

    @property
    def order(self) -> int:
        """Multiplicative order of the primitive element, 2^v - 1."""
        return (1 << self.v) - 1

    @property
    def alpha(self) -> int:
        return 2

    def add(self, a: int, b: int) -> int:
        return a ^ b

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return int(self.exp[self.log[a] + self.log[b]])

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("zero has no inverse in GF(2^v)")
        return int(self.exp[(self.order - self.log[a]) % self.order])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        if a == 0:
            if e < 0:
                raise ZeroDivisionError("zero has no inverse in GF(2^v)")
            return 1 if e == 0 else 0
        return int(self.exp[(int(self.log[a]) * e) % self.order])

    def alpha_pow(self, e: int) -> int:
        return int(self.exp[e % self.order])

    def poly_eval(self, poly: Poly2, x: int) -> int:
        """Evaluate a binary polynomial at a field element (Horner)."""
        acc = 0
        for c in poly.coefficients:
            acc = self.mul(acc, x) ^ c
        return acc


@lru_cache(maxsize=None)
def field_new(v: int) -> GaloisField:
    """Return GF(2^v) built from the fixed primitive polynomial for ``v``."""
    if v not in PRIMITIVE_POLYNOMIALS:
        raise ParameterError(f"unsupported extension degree v={v}; need 2 <= v <= 16")
    poly = PRIMITIVE_POLYNOMIALS[v]
    order = (1 << v) - 1
    exp = np.zeros(2 * order, dtype=np.int64)
    log = np.full(1 << v, -1, dtype=np.int64)
    x = 1
    for i in range(order):
        if i > 0 and x == 1:
            raise ParameterError(f"polynomial {poly:#x} is not primitive")
        exp[i] = x
        log[x] = i
        x <<= 1
        if x >> v:
            x ^= poly
    if x != 1:
        raise ParameterError(f"polynomial {poly:#x} is not primitive")
    exp[order:] = exp[:order]
    exp.setflags(write=False)
    log.setflags(write=False)
    return GaloisField(v, poly, exp, log)


def cyclotomic_coset(field: GaloisField, i: int) -> list[int]:
    coset, j = [], i % field.order
    while j not in coset:
        coset.append(j)
        j = (2 * j) % field.order
    return coset


def minimal_polynomial(field: GaloisField, i: int) -> Poly2:
    """Minimal polynomial of alpha^i over GF(2)."""
    # Product of (x - alpha^j) over the conjugates; coefficients land in {0, 1}.
    coeffs = [1]  # lowest degree first, field elements
    for j in cyclotomic_coset(field, i):
        root = field.alpha_pow(j)
        nxt = [0] * (len(coeffs) + 1)
        for d, c in enumerate(coeffs):
            nxt[d + 1] ^= c
            nxt[d] ^= field.mul(c, root)
        coeffs = nxt
    if any(c not in (0, 1) for c in coeffs):
        raise ArithmeticError("minimal polynomial has non-binary coefficients")
    return Poly2(sum(c << d for d, c in enumerate(coeffs)))


def bch_generator(field: GaloisField, t: int) -> Poly2:
    """LCM of the minimal polynomials of alpha, alpha^2, ..., alpha^(2t)."""
    if t < 1 or 2 * t >= field.order:
        raise ParameterError(f"need 1 <= t and 2t < 2^v - 1, got t={t}")
    seen: set[int] = set()
    g = Poly2(1)
    for i in range(1, 2 * t + 1):
        rep = min(cyclotomic_coset(field, i))
        if rep in seen:
            continue
        seen.add(rep)
        g = g * minimal_polynomial(field, rep)
    return g
