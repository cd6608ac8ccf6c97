"""Constant-composition distribution matching by multiset-permutation ranking.

The matcher reads ``k_a = floor(log2 multinomial(n; counts))`` uniform
bits as a big-endian integer rank and returns the sequence of that rank in
the lexicographic list of all sequences with the given composition.  The
dematcher is the exact inverse.

Unranking walks the sequence left to right.  With ``M`` sequences left
and ``r`` free positions, ``M * P_a / r`` of them start with a symbol below
``a`` (``P_a`` = prefix count sum).  The per-step choice depends only on
the ratio rank/M, so several steps are taken from a short fixed-point
interval around that ratio and the exact big integers are updated once
per run of steps.  The interval is conservative: whenever it straddles
a symbol boundary the run ends and the exact state decides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numba import njit

from .errors import CompositionError, ParameterError, RankOutOfRange

try:
    from gmpy2 import mpz as _big
except ImportError:  # pragma: no cover - gmpy2 only speeds things up
    _big = int

_PREC = 192  # fractional bits of the fixed-point ratio


def multinomial(counts) -> int:
    total, out = 0, 1
    for c in counts:
        total += c
        out *= math.comb(total, c)
    return out


@dataclass(frozen=True)
class Composition:
    n: int
    counts: tuple[int, ...]
    input_length: int = field(init=False)

    def __post_init__(self):
        if any(c < 0 for c in self.counts) or sum(self.counts) != self.n:
            raise ParameterError(f"counts {self.counts} do not sum to n={self.n}")
        object.__setattr__(self, "input_length", self.num_sequences.bit_length() - 1)

    @cached_property
    def num_sequences(self) -> int:
        return multinomial(self.counts)

    @property
    def k_a(self) -> int:
        return self.input_length

    @property
    def rate(self) -> float:
        """Matcher input bits per output symbol."""
        return self.input_length / self.n

    @property
    def distribution(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.n


def composition_for(p_a, n: int) -> Composition:
    """Largest-remainder quantization of ``n * p_a``; ties go to the larger index."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    p = np.asarray(p_a, dtype=float)
    if p.ndim != 1 or np.any(p < 0) or not math.isclose(p.sum(), 1.0, abs_tol=1e-9):
        raise ParameterError("p_a must be a probability vector")
    target = n * p / p.sum()
    base = np.floor(target).astype(np.int64)
    left = n - int(base.sum())
    frac = target - base
    order = sorted(range(p.size), key=lambda a: (-frac[a], -a))
    for a in order[:left]:
        base[a] += 1
    return Composition(n, tuple(int(c) for c in base))


def _bits_to_int(bits: np.ndarray) -> int:
    if bits.size == 0:
        return 0
    pad = (-bits.size) % 8
    raw = np.packbits(np.concatenate([np.zeros(pad, np.uint8), bits])).tobytes()
    return int.from_bytes(raw, "big")


def _int_to_bits(value: int, length: int) -> np.ndarray:
    if length == 0:
        return np.zeros(0, np.uint8)
    nbytes = (length + 7) // 8
    raw = np.frombuffer(int(value).to_bytes(nbytes, "big"), dtype=np.uint8)
    return np.unpackbits(raw)[8 * nbytes - length :]


_LIMB = 32
_FRAC_LIMBS = _PREC // _LIMB
_NL = _FRAC_LIMBS + 2  # fixed-point interval limbs (integer part < 2^64)
_CAP = 5 * _PREC // _LIMB + 4  # limbs for the run accumulators S, N, D


@njit(cache=True)
def _mul_small(x, f):
    carry = np.uint64(0)
    for i in range(x.size):
        cur = x[i] * f + carry
        x[i] = cur & np.uint64(0xFFFFFFFF)
        carry = cur >> np.uint64(32)


@njit(cache=True)
def _div_small(x, d):
    """Floor-divide in place; returns the remainder."""
    rem = np.uint64(0)
    for i in range(x.size - 1, -1, -1):
        cur = (rem << np.uint64(32)) | x[i]
        x[i] = cur // d
        rem = cur % d
    return rem


@njit(cache=True)
def _add_one(x):
    for i in range(x.size):
        x[i] += np.uint64(1)
        if x[i] <= np.uint64(0xFFFFFFFF):
            return
        x[i] = np.uint64(0)


@njit(cache=True)
def _top(x, f):
    return x[f] | (x[f + 1] << np.uint64(32))


@njit(cache=True)
def _set_top(x, f, v):
    x[f] = v & np.uint64(0xFFFFFFFF)
    x[f + 1] = v >> np.uint64(32)


@njit(cache=True)
def _interval_run(lo, hi, cnt, prefix, r, out, pos, S, N, D, f):
    """Take symbols while the ratio interval [lo, hi) fixes them.

    ``lo``/``hi`` are fixed-point ratios with ``f`` fractional limbs; S, N, D
    accumulate the exact rank update as in the pure-integer walk.  Returns
    the number of symbols emitted.
    """
    K = cnt.size
    tl = np.empty_like(lo)
    th = np.empty_like(hi)
    steps = 0
    while r > 0 and D[D.size - 2] == 0:
        ru = np.uint64(r)
        tl[:] = lo
        _mul_small(tl, ru)
        th[:] = hi
        _mul_small(th, ru)
        q_lo = _top(tl, f)
        low_zero = True
        for i in range(f):
            if th[i] != 0:
                low_zero = False
                break
        q_hi = _top(th, f)
        if low_zero:
            q_hi -= np.uint64(1)
        a = 0
        while a + 1 < K and np.uint64(prefix[a + 1]) <= q_lo:
            a += 1
        if q_hi >= np.uint64(prefix[a + 1]):
            break
        c = np.uint64(cnt[a])
        pa = np.uint64(prefix[a])
        _set_top(tl, f, q_lo - pa)
        _div_small(tl, c)
        lo[:] = tl
        _set_top(th, f, _top(th, f) - pa)
        if _div_small(th, c) != 0:
            _add_one(th)
        hi[:] = th
        _mul_small(S, ru)
        carry = np.uint64(0)
        for i in range(S.size):
            cur = S[i] + N[i] * pa + carry
            S[i] = cur & np.uint64(0xFFFFFFFF)
            carry = cur >> np.uint64(32)
        _mul_small(N, c)
        _mul_small(D, ru)
        cnt[a] -= 1
        for b in range(a + 1, K + 1):
            prefix[b] -= 1
        out[pos + steps] = a
        steps += 1
        r -= 1
    return steps


def _to_limbs(value: int, size: int) -> np.ndarray:
    raw = int(value).to_bytes(4 * size, "little")
    return np.frombuffer(raw, dtype="<u4").astype(np.uint64)


def _from_limbs(limbs: np.ndarray) -> int:
    return int.from_bytes(limbs.astype("<u4").tobytes(), "little")


def unrank(comp: Composition, rank: int) -> np.ndarray:
    """Sequence of lexicographic ``rank`` among all arrangements of ``comp``."""
    total = comp.num_sequences
    if not 0 <= rank < total:
        raise RankOutOfRange(f"rank must lie in [0, {total})")
    cnt = np.array(comp.counts, dtype=np.int64)
    K = cnt.size
    prefix = np.zeros(K + 1, dtype=np.int64)
    prefix[1:] = np.cumsum(cnt)
    R, M = _big(rank), _big(total)
    r = comp.n
    out = np.empty(comp.n, dtype=np.int64)
    pos = 0
    one = np.zeros(_CAP, np.uint64)
    one[0] = 1
    while r > 0:
        lo_int = int((R << _PREC) // M)
        lo = _to_limbs(lo_int, _NL)
        hi = _to_limbs(lo_int + 1, _NL)
        S = np.zeros(_CAP, np.uint64)
        N, D = one.copy(), one.copy()
        steps = _interval_run(lo, hi, cnt, prefix, r, out, pos, S, N, D, _FRAC_LIMBS)
        if steps:
            Dv = _from_limbs(D)
            R -= (M * _from_limbs(S)) // Dv
            M = (M * _from_limbs(N)) // Dv
            pos += steps
            r -= steps
            continue
        # ambiguous at full precision: one exact step
        q = int((R * r) // M)
        a = int(np.searchsorted(prefix, q, side="right")) - 1
        R -= (M * int(prefix[a])) // r
        M = (M * int(cnt[a])) // r
        cnt[a] -= 1
        prefix[a + 1 :] -= 1
        out[pos] = a
        pos += 1
        r -= 1
    return out


def rank_of(comp: Composition, seq) -> int:
    """Lexicographic rank of ``seq``; raises if its composition differs."""
    seq = np.asarray(seq, dtype=np.int64).reshape(-1)
    K = len(comp.counts)
    if seq.size != comp.n or (seq.size and (seq.min() < 0 or seq.max() >= K)):
        raise CompositionError("sequence length or alphabet does not match the composition")
    if tuple(np.bincount(seq, minlength=K)) != comp.counts:
        raise CompositionError("sequence composition does not match")
    cnt = list(comp.counts)
    prefix = [0] * (K + 1)
    for a in range(K):
        prefix[a + 1] = prefix[a] + cnt[a]
    R, M = _big(0), _big(comp.num_sequences)
    r = comp.n
    chunk = 48
    for start in range(0, comp.n, chunk):
        S, N, D = 0, 1, 1
        for a in seq[start : start + chunk].tolist():
            S = S * r + N * prefix[a]
            N *= cnt[a]
            D *= r
            cnt[a] -= 1
            for b in range(a + 1, K + 1):
                prefix[b] -= 1
            r -= 1
        R += (M * S) // D
        M = (M * N) // D
    return int(R)


def match(comp: Composition, bits) -> np.ndarray:
    """Map ``k_a`` bits to an amplitude-index sequence with composition ``comp``."""
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    if bits.size != comp.input_length:
        raise ParameterError(f"need {comp.input_length} input bits, got {bits.size}")
    return unrank(comp, _bits_to_int(bits))


def dematch(comp: Composition, seq) -> np.ndarray:
    rank = rank_of(comp, seq)
    if rank >> comp.input_length:
        raise RankOutOfRange("sequence rank exceeds the matcher input range")
    return _int_to_bits(rank, comp.input_length)
