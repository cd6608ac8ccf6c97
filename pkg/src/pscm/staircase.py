"""Staircase codes over shortened BCH components.

Block ``B_i`` is an ``L x L`` bit matrix with ``L = n_c / 2``.  Row ``r`` of
``[B_{i-1}^T, B_i]`` is a component codeword: its first ``L`` bits are
column ``r`` of ``B_{i-1}`` and the rest is row ``r`` of ``B_i``.  Inside
``B_i`` the information bits fill columns ``0 .. k_c - L - 1`` row-major and
the last ``n_c - k_c`` columns hold parity.

Every bit therefore sits in two component codewords: the one of pair
``(i-1, i)`` (where it is in the right half) and the one of pair
``(i, i+1)`` (left half).  The window decoder keeps, per bit, the value each
of the two codewords proposes for it.  In extrinsic mode a codeword's
decoder reads the channel bit corrected by the *other* codeword's proposal
only.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .bch import BchCode, bch_new, locate_errors, parity_bits
from .errors import ParameterError, StreamUnderrun

MODES = ("extrinsic", "plain_bdd")


@dataclass(frozen=True, eq=False)
class StaircaseSchema:
    component: BchCode
    block_side: int
    info_cols: int

    @property
    def parity_cols(self) -> int:
        return self.component.redundancy

    @property
    def rate(self) -> float:
        return 1.0 - 2.0 * self.component.redundancy / self.component.n

    @property
    def info_bits_per_block(self) -> int:
        return self.info_cols * self.block_side

    @property
    def parity_bits_per_block(self) -> int:
        return self.block_side * self.component.redundancy

    @property
    def bits_per_block(self) -> int:
        return self.block_side**2


def schema_new(code: BchCode) -> StaircaseSchema:
    if code.n % 2:
        raise ParameterError(f"staircase needs an even component length, got n_c={code.n}")
    side = code.n // 2
    if code.k <= side:
        raise ParameterError(f"k_c={code.k} leaves no information columns (need k_c > n_c/2={side})")
    return StaircaseSchema(code, side, code.k - side)


@dataclass
class StaircaseBlock:
    bits: np.ndarray
    index: int

    @classmethod
    def zero(cls, schema: StaircaseSchema) -> StaircaseBlock:
        side = schema.block_side
        return cls(np.zeros((side, side), dtype=np.uint8), 0)

    def info(self, schema: StaircaseSchema) -> np.ndarray:
        return self.bits[:, : schema.info_cols].reshape(-1)

    def parity(self, schema: StaircaseSchema) -> np.ndarray:
        return self.bits[:, schema.info_cols :].reshape(-1)


def encode_block(schema: StaircaseSchema, previous: StaircaseBlock, info) -> StaircaseBlock:
    """Encode one staircase block from the previous one and fresh info bits."""
    info = np.asarray(info, dtype=np.uint8).reshape(-1)
    if info.size != schema.info_bits_per_block:
        raise ParameterError(
            f"info must have {schema.info_bits_per_block} bits, got {info.size}"
        )
    side = schema.block_side
    info = info.reshape(side, schema.info_cols)
    component_info = np.concatenate([previous.bits.T, info], axis=1)
    par = parity_bits(schema.component, component_info)
    return StaircaseBlock(np.concatenate([info, par], axis=1), previous.index + 1)


class StaircaseEncoder:
    """Chains blocks starting from the all-zero ``B_0``."""

    def __init__(self, schema: StaircaseSchema):
        self.schema = schema
        self.previous = StaircaseBlock.zero(schema)

    def encode(self, info) -> StaircaseBlock:
        self.previous = encode_block(self.schema, self.previous, info)
        return self.previous


def row_syndromes(schema: StaircaseSchema, previous: np.ndarray, current: np.ndarray) -> np.ndarray:
    """Odd syndromes of every row of ``[previous^T, current]``, shape (L, t)."""
    words = np.concatenate([previous.T, current], axis=1).astype(bool)
    pos = schema.component.pos_syndrome
    out = np.zeros((words.shape[0], pos.shape[1]), dtype=np.int64)
    for r, w in enumerate(words):
        if w.any():
            out[r] = np.bitwise_xor.reduce(pos[w], axis=0)
    return out


# ---------------------------------------------------------------------------
# window kernels


@njit(cache=True)
def _init_pair(b, bp, ch, prop_r, prop_l, synd, dirty, pos, side, t, extrinsic):
    for r in range(side):
        for k in range(t):
            synd[b, r, k] = 0
        dirty[b, r] = 1
    for j in range(side):
        for r in range(side):
            val = ch[bp, j, r]
            if extrinsic:
                val ^= prop_r[bp, j, r]
            if val:
                for k in range(t):
                    synd[b, r, k] ^= pos[j, k]
    for r in range(side):
        for c in range(side):
            val = ch[b, r, c]
            if extrinsic:
                val ^= prop_l[b, r, c]
            if val:
                for k in range(t):
                    synd[b, r, k] ^= pos[side + c, k]


@njit(cache=True)
def _iterate(order, na, ch, prop_r, prop_l, synd, dirty, succ, pos, exp, log, gf_order,
             t, side, iterations, extrinsic, stats):
    n_c = 2 * side
    errs = np.zeros(t, np.int64)
    for _ in range(iterations):
        busy = False
        for k in range(1, na + 1):
            b = order[k]
            bp = order[k - 1]
            nb = order[k + 1] if k < na else -1
            left_frozen = k == 1
            for r in range(side):
                if not dirty[b, r]:
                    continue
                busy = True
                dirty[b, r] = 0
                stats[0] += 1
                cnt = locate_errors(synd[b, r], t, n_c, exp, log, gf_order, errs)
                ok = cnt >= 0
                succ[b, r] = 1 if ok else 0
                if not ok:
                    stats[1] += 1
                if extrinsic:
                    e = 0
                    if not left_frozen:
                        for j in range(side):
                            hit = 0
                            if ok and e < cnt and errs[e] == j:
                                hit = 1
                                e += 1
                            new = (prop_r[bp, j, r] ^ hit) if ok else 0
                            if new != prop_l[bp, j, r]:
                                prop_l[bp, j, r] = new
                                for q in range(t):
                                    synd[bp, j, q] ^= pos[side + r, q]
                                dirty[bp, j] = 1
                    else:
                        while e < cnt and errs[e] < side:
                            e += 1
                    for c in range(side):
                        hit = 0
                        if ok and e < cnt and errs[e] == side + c:
                            hit = 1
                            e += 1
                        new = (prop_l[b, r, c] ^ hit) if ok else 0
                        if new != prop_r[b, r, c]:
                            prop_r[b, r, c] = new
                            if nb >= 0:
                                for q in range(t):
                                    synd[nb, c, q] ^= pos[r, q]
                                dirty[nb, c] = 1
                elif ok:
                    for e in range(cnt):
                        p = errs[e]
                        stats[2] += 1
                        for q in range(t):
                            synd[b, r, q] ^= pos[p, q]
                        if p < side:
                            ch[bp, p, r] ^= 1
                            if not left_frozen:
                                for q in range(t):
                                    synd[bp, p, q] ^= pos[side + r, q]
                                dirty[bp, p] = 1
                        else:
                            c = p - side
                            ch[b, r, c] ^= 1
                            if nb >= 0:
                                for q in range(t):
                                    synd[nb, c, q] ^= pos[r, q]
                                dirty[nb, c] = 1
        if not busy:
            break


@njit(cache=True)
def _commit(b, nb, ch, prop_r, prop_l, synd, dirty, succ, pos, side, t, extrinsic):
    """Fix the bits of block ``b``; return them.  ``nb`` is the next slot or -1."""
    final = ch[b].copy()
    if extrinsic:
        for r in range(side):
            from_row = succ[b, r] == 1
            for c in range(side):
                v = ch[b, r, c] ^ (prop_r[b, r, c] if from_row else prop_l[b, r, c])
                final[r, c] = v
                if nb >= 0 and v != (ch[b, r, c] ^ prop_r[b, r, c]):
                    for q in range(t):
                        synd[nb, c, q] ^= pos[r, q]
        for r in range(side):
            for c in range(side):
                ch[b, r, c] = final[r, c]
                prop_r[b, r, c] = 0
                prop_l[b, r, c] = 0
    if nb >= 0:
        for c in range(side):
            dirty[nb, c] = 1
    return final


# ---------------------------------------------------------------------------


@dataclass
class DecodedBlock:
    index: int
    bits: np.ndarray
    flips: int


class StaircaseDecoder:
    """Sliding-window iterative decoder.

    Blocks are pushed as received; once ``window`` blocks are buffered each
    push runs ``iterations`` decoding rounds over every component codeword
    whose input changed, then finalizes and returns the oldest block.  The
    block preceding the window is already emitted: component solutions may
    still touch it, but only their effect on the live blocks is kept.
    """

    def __init__(self, schema: StaircaseSchema, window: int = 9, iterations: int = 8,
                 mode: str = "extrinsic"):
        if window < 1:
            raise ParameterError(f"window must be >= 1, got {window}")
        if iterations < 1:
            raise ParameterError(f"iterations must be >= 1, got {iterations}")
        if mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
        self.schema = schema
        self.window = window
        self.iterations = iterations
        self.mode = mode
        self.extrinsic = mode == "extrinsic"
        side, t = schema.block_side, schema.component.t
        nslots = window + 1
        self.ch = np.zeros((nslots, side, side), np.uint8)
        self.received = np.zeros((nslots, side, side), np.uint8)
        self.prop_r = np.zeros((nslots, side, side), np.uint8)
        self.prop_l = np.zeros((nslots, side, side), np.uint8)
        self.synd = np.zeros((nslots, side, t), np.int64)
        self.dirty = np.zeros((nslots, side), np.uint8)
        self.succ = np.zeros((nslots, side), np.uint8)
        # decodes, failures, in-place flips (plain mode)
        self.stats = np.zeros(3, np.int64)
        # slot 0 holds the all-zero B_0, already final
        self._order: deque[int] = deque([0])
        self._free = list(range(nslots - 1, 0, -1))
        self._next_index = 1
        self._indices: dict[int, int] = {0: 0}

    @property
    def buffered(self) -> int:
        return len(self._order) - 1

    def _kernel_args(self):
        code = self.schema.component
        return code.pos_syndrome, code.field.exp, code.field.log, code.field.order

    def push(self, bits) -> list[DecodedBlock]:
        side = self.schema.block_side
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.shape != (side, side):
            raise ParameterError(f"block must be {side}x{side}, got {bits.shape}")
        slot = self._free.pop()
        self.ch[slot] = bits
        self.received[slot] = bits
        self.prop_r[slot] = 0
        self.prop_l[slot] = 0
        self.succ[slot] = 0
        pos = self.schema.component.pos_syndrome
        _init_pair(slot, self._order[-1], self.ch, self.prop_r, self.prop_l, self.synd,
                   self.dirty, pos, side, self.schema.component.t, self.extrinsic)
        self._order.append(slot)
        self._indices[slot] = self._next_index
        self._next_index += 1
        if self.buffered < self.window:
            return []
        return [self._advance()]

    def _advance(self) -> DecodedBlock:
        pos, exp, log, gf_order = self._kernel_args()
        order = np.array(self._order, dtype=np.int64)
        na = len(order) - 1
        _iterate(order, na, self.ch, self.prop_r, self.prop_l, self.synd, self.dirty,
                 self.succ, pos, exp, log, gf_order, self.schema.component.t,
                 self.schema.block_side, self.iterations, self.extrinsic, self.stats)
        oldest = int(order[1])
        nb = int(order[2]) if na >= 2 else -1
        final = _commit(oldest, nb, self.ch, self.prop_r, self.prop_l, self.synd, self.dirty,
                        self.succ, pos, self.schema.block_side, self.schema.component.t,
                        self.extrinsic)
        flips = int(np.count_nonzero(final != self.received[oldest]))
        self._free.append(self._order.popleft())
        return DecodedBlock(self._indices[oldest], final, flips)

    def pop(self) -> DecodedBlock:
        """Finalize the oldest buffered block without waiting for a full window."""
        if self.buffered == 0:
            raise StreamUnderrun("no buffered blocks to finalize")
        return self._advance()

    def flush(self) -> list[DecodedBlock]:
        out = []
        while self.buffered:
            out.append(self._advance())
        return out

    def input_syndromes_consistent(self) -> bool:
        """Recompute every active codeword's input syndrome from scratch.

        In extrinsic mode the input of the pair ``(i-1, i)`` codeword is the
        channel bits corrected by pair ``(i-2, i-1)`` proposals on its left
        half and by pair ``(i, i+1)`` proposals on its right half; never by its
        own.  Returns True when the incremental state agrees.
        """
        pos = self.schema.component.pos_syndrome
        order = list(self._order)
        for k in range(1, len(order)):
            b, bp = order[k], order[k - 1]
            left = self.ch[bp] ^ (self.prop_r[bp] if self.extrinsic else 0)
            right = self.ch[b] ^ (self.prop_l[b] if self.extrinsic else 0)
            words = np.concatenate([left.T, right], axis=1).astype(bool)
            for r, w in enumerate(words):
                expect = np.bitwise_xor.reduce(pos[w], axis=0) if w.any() else 0
                if np.any(self.synd[b, r] != expect):
                    return False
        return True


def decode_stream(schema: StaircaseSchema, blocks, window: int = 9, iterations: int = 8,
                  mode: str = "extrinsic") -> tuple[list[np.ndarray], list[int]]:
    """Decode a finite received stream and flush the tail."""
    blocks = list(blocks)
    if len(blocks) < window:
        raise StreamUnderrun(f"need at least {window} blocks, got {len(blocks)}")
    dec = StaircaseDecoder(schema, window, iterations, mode)
    out: list[DecodedBlock] = []
    for blk in blocks:
        out.extend(dec.push(blk))
    out.extend(dec.flush())
    return [d.bits for d in out], [d.flips for d in out]


# ---------------------------------------------------------------------------
# test-vector files


def _row_hex(row: np.ndarray) -> str:
    pad = (-row.size) % 4
    bits = np.concatenate([row, np.zeros(pad, np.uint8)]).reshape(-1, 4)
    return "".join(f"{int(''.join(map(str, nib)), 2):x}" for nib in bits)


def _hex_row(text: str, side: int) -> np.ndarray:
    bits = [int(b) for ch in text for b in f"{int(ch, 16):04b}"]
    return np.array(bits[:side], dtype=np.uint8)


def write_test_vectors(path, v: int, t: int, s: int, window: int, iterations: int,
                       mode: str, blocks) -> None:
    """Header ``v t s W ell mode``; then each block as ``L`` hex rows, blank-line separated."""
    lines = [f"{v} {t} {s} {window} {iterations} {mode}"]
    for blk in blocks:
        lines.append("")
        lines.extend(_row_hex(np.asarray(row, np.uint8)) for row in blk)
    Path(path).write_text("\n".join(lines) + "\n")


def read_test_vectors(path) -> tuple[dict, list[np.ndarray]]:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if not ln.startswith("#")]
    v, t, s, window, iterations, mode = lines[0].split()
    header = dict(v=int(v), t=int(t), s=int(s), window=int(window),
                  iterations=int(iterations), mode=mode)
    side = (2 ** header["v"] - 1 - header["s"]) // 2
    rows = [ln for ln in lines[1:] if ln]
    if len(rows) % side:
        raise ParameterError(f"row count {len(rows)} is not a multiple of block side {side}")
    blocks = [np.stack([_hex_row(r, side) for r in rows[i : i + side]])
              for i in range(0, len(rows), side)]
    return header, blocks


def schema_for(v: int, t: int, s: int) -> StaircaseSchema:
    return schema_new(bch_new(v, t, s))
