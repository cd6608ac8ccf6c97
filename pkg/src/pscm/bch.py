"""Shortened binary BCH codes with bounded-distance decoding.

A ``(v, t, s)`` code is the narrow-sense primitive BCH code of length
``2^v - 1`` with its ``s`` leading information positions fixed to zero and
dropped from the wire.  Codeword index ``j`` carries the coefficient of
``x^(n_c - 1 - j)``, information first, parity last.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ParameterError
from .galois import GaloisField, Poly2, bch_generator, field_new


class DecodeStatus(enum.Enum):
    CORRECTED = "corrected"
    FAILURE = "decoding_failure"


@dataclass(frozen=True)
class DecodeOutcome:
    status: DecodeStatus
    flips: tuple[int, ...]
    corrected_word: np.ndarray

    @property
    def corrected(self) -> bool:
        return self.status is DecodeStatus.CORRECTED


@njit(cache=True)
def _gf_mul(a, b, exp, log):
    if a == 0 or b == 0:
        return 0
    return exp[log[a] + log[b]]


@njit(cache=True)
def locate_errors(s_odd, t, n_c, exp, log, order, out):
    """Bounded-distance decode from the odd syndromes S_1, S_3, ..., S_{2t-1}.

    Writes error positions (codeword indices, ascending) into ``out`` and
    returns their count, or -1 on decoding failure.  Roots that fall on the
    shortened positions are never searched, so they surface as a root-count
    mismatch and hence as failure.
    """
    nz = False
    for k in range(t):
        if s_odd[k] != 0:
            nz = True
            break
    if not nz:
        return 0
    two_t = 2 * t
    S = np.zeros(two_t, np.int64)
    for i in range(1, two_t + 1):
        if i % 2 == 1:
            S[i - 1] = s_odd[(i - 1) // 2]
        else:
            h = S[i // 2 - 1]
            S[i - 1] = 0 if h == 0 else exp[2 * log[h]]
    # Berlekamp-Massey
    C = np.zeros(two_t + 2, np.int64)
    B = np.zeros(two_t + 2, np.int64)
    T = np.zeros(two_t + 2, np.int64)
    C[0] = 1
    B[0] = 1
    L = 0
    gap = 1
    b = 1
    for n in range(two_t):
        d = S[n]
        for i in range(1, L + 1):
            d ^= _gf_mul(C[i], S[n - i], exp, log)
        if d == 0:
            gap += 1
            continue
        coef = exp[(log[d] - log[b]) % order]
        if 2 * L <= n:
            T[:] = C
            for i in range(two_t + 2 - gap):
                if B[i] != 0:
                    C[i + gap] ^= _gf_mul(coef, B[i], exp, log)
            L = n + 1 - L
            B[:] = T
            b = d
            gap = 1
        else:
            for i in range(two_t + 2 - gap):
                if B[i] != 0:
                    C[i + gap] ^= _gf_mul(coef, B[i], exp, log)
            gap += 1
    if L > t or C[L] == 0:
        return -1
    for i in range(L + 1, two_t + 2):
        if C[i] != 0:
            return -1
    logc = np.full(L + 1, -1, np.int64)
    for i in range(L + 1):
        if C[i] != 0:
            logc[i] = log[C[i]]
    # Chien search over the transmitted positions only.
    count = 0
    for p in range(n_c):
        neg = order - (n_c - 1 - p) % order
        acc = 1
        for i in range(1, L + 1):
            if logc[i] >= 0:
                acc ^= exp[(logc[i] + i * neg) % order]
        if acc == 0:
            out[count] = p
            count += 1
            if count == L:
                break
    if count != L:
        return -1
    return L


@dataclass(frozen=True, eq=False)
class BchCode:
    field: GaloisField
    t: int
    shortening: int
    n: int
    k: int
    generator: Poly2
    parity_matrix: np.ndarray = field(repr=False)
    # pos_syndrome[j, i] = contribution of codeword bit j to S_{2i+1}
    pos_syndrome: np.ndarray = field(repr=False)

    @property
    def v(self) -> int:
        return self.field.v

    @property
    def redundancy(self) -> int:
        return self.n - self.k

    @property
    def rate(self) -> float:
        return self.k / self.n

    def encode(self, info) -> np.ndarray:
        return encode(self, info)

    def decode(self, word) -> DecodeOutcome:
        return decode_bdd(self, word)


def bch_new(v: int, t: int, s: int, require_even: bool = True) -> BchCode:
    """Build the shortened ``(v, t, s)`` BCH code.

    Staircase components need an even length, so odd ``n_c`` is rejected
    unless ``require_even`` is False.
    """
    if t < 1:
        raise ParameterError(f"t must be >= 1, got {t}")
    if s < 0:
        raise ParameterError(f"shortening must be >= 0, got {s}")
    gf = field_new(v)
    if 2 * t >= gf.order:
        raise ParameterError(f"t={t} too large for GF(2^{v})")
    g = bch_generator(gf, t)
    r = g.degree
    n = gf.order - s
    k = gf.order - r - s
    if k <= 0:
        raise ParameterError(f"shortening s={s} leaves no information bits (k_c={k})")
    if require_even and n % 2:
        raise ParameterError(f"code length n_c={n} is odd")

    # x^d mod g for every transmitted degree d < n
    rems = np.zeros(n, dtype=object)
    cur = 1
    for d in range(n):
        rems[d] = cur
        cur <<= 1
        if cur >> r:
            cur ^= g.bits
    parity = np.zeros((k, r), dtype=np.uint8)
    for i in range(k):
        rem = rems[n - 1 - i]
        for j in range(r):
            parity[i, j] = (rem >> (r - 1 - j)) & 1

    pos = np.zeros((n, t), dtype=np.int64)
    for j in range(n):
        deg = n - 1 - j
        for i in range(t):
            pos[j, i] = gf.alpha_pow((2 * i + 1) * deg)
    parity.setflags(write=False)
    pos.setflags(write=False)
    return BchCode(gf, t, s, n, k, g, parity, pos)


def _as_bits(word, length: int, what: str) -> np.ndarray:
    arr = np.asarray(word, dtype=np.uint8)
    if arr.shape[-1] != length:
        raise ParameterError(f"{what} must have length {length}, got {arr.shape[-1]}")
    return arr


def parity_bits(code: BchCode, info) -> np.ndarray:
    """Parity bits for one or many information words (last axis = k_c)."""
    info = _as_bits(info, code.k, "info")
    prod = np.matmul(info.astype(np.float64), code.parity_matrix.astype(np.float64))
    return (prod.astype(np.int64) & 1).astype(np.uint8)


def encode(code: BchCode, info) -> np.ndarray:
    """Systematic encoding: ``info`` followed by ``n_c - k_c`` parity bits."""
    info = _as_bits(info, code.k, "info")
    return np.concatenate([info, parity_bits(code, info)], axis=-1)


def syndromes(code: BchCode, word) -> np.ndarray:
    """All syndromes ``S_1 .. S_{2t}`` of a received word."""
    word = _as_bits(word, code.n, "word")
    odd = np.bitwise_xor.reduce(code.pos_syndrome[word.astype(bool)], axis=0) if word.any() else np.zeros(code.t, np.int64)
    gf = code.field
    out = []
    for i in range(1, 2 * code.t + 1):
        if i % 2:
            out.append(int(odd[(i - 1) // 2]))
        else:
            out.append(gf.mul(out[i // 2 - 1], out[i // 2 - 1]))
    return np.array(out, dtype=np.int64)


def is_codeword(code: BchCode, word) -> bool:
    return not syndromes(code, word).any()


def decode_bdd(code: BchCode, word) -> DecodeOutcome:
    """Correct up to ``t`` errors or report failure.

    Beyond the radius the decoder may also land on a wrong codeword
    (miscorrection); that outcome is reported as ``CORRECTED``.
    """
    word = _as_bits(word, code.n, "word").copy()
    s_odd = syndromes(code, word)[0::2].copy()
    out = np.zeros(code.t, np.int64)
    gf = code.field
    cnt = locate_errors(s_odd, code.t, code.n, gf.exp, gf.log, gf.order, out)
    if cnt < 0:
        return DecodeOutcome(DecodeStatus.FAILURE, (), word)
    flips = tuple(int(p) for p in out[:cnt])
    word[list(flips)] ^= 1
    return DecodeOutcome(DecodeStatus.CORRECTED, flips, word)
