"""The coded-modulation chain: shaping, labeling, staircase coding, signs.

Per staircase block of ``n`` symbols the information block ``u`` of ``k``
bits splits into ``u^s`` (the first ``2 gamma n`` bits) and ``u^a`` (the
rest).  ``u^a`` goes through the matcher to ``n`` amplitudes whose labels
``b_1 .. b_n`` fill the staircase information region, followed by ``u^s``.
The sign stream is the block's parity bits followed by ``u^s``, consumed
two per symbol as (real sign, imaginary sign).  In uniform mode the
amplitude labels are taken straight from ``u^a``.
"""

from __future__ import annotations

import csv
from decimal import ROUND_HALF_UP, Decimal
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import ccdm
from .air import ShapingSolution, optimize_shaping, uniform_solution
from .bch import BchCode, bch_new
from .ccdm import Composition, composition_for
from .constellation import (Constellation, amplitude_bits, amplitude_indices, build,
                            points_from_labels)
from .errors import CompositionError, ParameterError, RankOutOfRange
from .galois import bch_generator, field_new
from .staircase import StaircaseDecoder, StaircaseEncoder, StaircaseSchema, schema_new

# Reference shortenings for v=10, t=3, 64-QAM.
REFERENCE_SHORTENINGS = {(10, 3, 6): (63, 255, 375, 507, 603, 663)}


def round_half_up(x: Fraction, places: int = 4) -> float:
    """Exact decimal rounding of a rational (49/32 -> 1.5313)."""
    q = Decimal(x.numerator) / Decimal(x.denominator)
    return float(q.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class DesignRow:
    v: int
    t: int
    m: int
    shortening: int
    n_c: int
    k_c: int
    two_gamma: Fraction
    rate: Fraction
    n: int

    @property
    def parity_bits(self) -> int:
        return int(self.n * (2 - self.two_gamma))

    @property
    def sign_info_bits(self) -> int:
        """Length of u^s, 2 gamma n."""
        return int(self.n * self.two_gamma)

    @property
    def gamma(self) -> Fraction:
        return self.two_gamma / 2

    def as_dict(self) -> dict:
        return {"2gamma": round_half_up(self.two_gamma), "s": self.shortening,
                "R_s": round_half_up(self.rate), "n_c": self.n_c, "k_c": self.k_c,
                "n": self.n}


def _row(v: int, t: int, m: int, s: int, redundancy: int) -> DesignRow | None:
    n_c = (1 << v) - 1 - s
    k_c = n_c - redundancy
    if n_c % 2 or k_c <= n_c // 2:
        return None
    rate = 1 - Fraction(2 * redundancy, n_c)
    two_gamma = m * rate - m + 2
    if not 1 <= two_gamma < 2:
        return None
    n = Fraction((k_c - n_c // 2) * (n_c // 2)) / (m - 2 + two_gamma)
    if n.denominator != 1 or n <= 0:
        return None
    if (n * (2 - two_gamma)).denominator != 1 or (n * two_gamma).denominator != 1:
        return None
    return DesignRow(v, t, m, s, n_c, k_c, two_gamma, rate, int(n))


def enumerate_designs(v: int, t: int, m: int) -> list[DesignRow]:
    """Every shortening giving an integral staircase/CM accounting, 2 gamma descending."""
    if m < 3:
        raise ParameterError(f"need m >= 3, got {m}")
    redundancy = bch_generator(field_new(v), t).degree
    rows = [_row(v, t, m, s, redundancy) for s in range((1 << v) - 1)]
    return sorted((r for r in rows if r is not None), key=lambda r: -r.two_gamma)


def design(v: int, t: int, m: int, two_gamma=None, reference: bool = True) -> list[DesignRow]:
    """Design rows for ``(v, t, m)``.

    With ``reference`` the reference design points are returned when a
    set exists for ``(v, t, m)``; otherwise the full enumeration.  A
    ``two_gamma`` list keeps only rows matching those values to 4 decimals.
    """
    rows = enumerate_designs(v, t, m)
    ref = REFERENCE_SHORTENINGS.get((v, t, m))
    if reference and ref is not None:
        rows = [r for r in rows if r.shortening in ref]
    if two_gamma is not None:
        wanted = [float(x) for x in np.atleast_1d(two_gamma)]
        rows = [r for r in rows if any(abs(float(r.two_gamma) - w) < 5e-5 for w in wanted)]
    return rows


def design_row(v: int, t: int, m: int, s: int) -> DesignRow:
    for r in enumerate_designs(v, t, m):
        if r.shortening == s:
            return r
    raise ParameterError(f"s={s} is not a feasible design for v={v}, t={t}, m={m}")


def write_design_csv(path_or_file, rows: list[DesignRow], designs: list[CmDesign] | None = None):
    fields = ["2gamma", "s", "R_s", "n_c", "k_c", "n", "k_a", "k"]
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for i, r in enumerate(rows):
            d = r.as_dict()
            if designs is not None:
                d["k_a"], d["k"] = designs[i].k_a, designs[i].k
            else:
                d["k_a"], d["k"] = "", ""
            w.writerow(d)
    finally:
        if own:
            fh.close()


@dataclass(frozen=True, eq=False)
class CmDesign:
    row: DesignRow
    constellation: Constellation
    code: BchCode
    schema: StaircaseSchema
    shaping: ShapingSolution
    composition: Composition | None

    @property
    def shaped(self) -> bool:
        return self.composition is not None

    @property
    def m(self) -> int:
        return self.row.m

    @property
    def n(self) -> int:
        return self.row.n

    @property
    def two_gamma(self) -> Fraction:
        return self.row.two_gamma

    @property
    def k_a(self) -> int:
        if self.composition is None:
            return self.n * (self.m - 2)
        return self.composition.input_length

    @property
    def k(self) -> int:
        return self.k_a + self.row.sign_info_bits

    @property
    def scale(self) -> float:
        return self.shaping.Lambda_star

    @property
    def spectral_efficiency(self) -> float:
        """Achieved information bits per symbol, k/n."""
        return self.k / self.n

    @property
    def nominal_rate(self) -> float:
        """Asymptotic transmission rate H(A) + 2 gamma."""
        return self.shaping.H_A + float(self.two_gamma)


def build_design(row: DesignRow, snr_db: float, shaped: bool = True,
                 shaping: ShapingSolution | None = None) -> CmDesign:
    """Attach the operating-point shaping (and matcher composition) to a row."""
    c = build(row.m)
    code = bch_new(row.v, row.t, row.shortening)
    schema = schema_new(code)
    if schema.info_bits_per_block != row.n * (row.m - 2) + row.sign_info_bits:
        raise ArithmeticError("staircase info region does not match the CM accounting")
    if schema.parity_bits_per_block != row.parity_bits:
        raise ArithmeticError("staircase parity count does not match n(2 - 2 gamma)")
    if shaping is None:
        shaping = optimize_shaping(c, snr_db) if shaped else uniform_solution(c, snr_db)
    comp = composition_for(np.asarray(shaping.p_amplitudes), row.n) if shaped else None
    return CmDesign(row, c, code, schema, shaping, comp)


@dataclass
class BlockFrame:
    u: np.ndarray
    amplitudes: np.ndarray
    parities: np.ndarray
    signs: np.ndarray
    point_indices: np.ndarray
    symbols: np.ndarray
    block_index: int
    block_bits: np.ndarray


def _symbol_labels(design: CmDesign, signs: np.ndarray, amps: np.ndarray) -> np.ndarray:
    lab = np.empty((design.n, design.m), dtype=np.uint8)
    lab[:, 0] = signs[0::2]
    lab[:, 1] = signs[1::2]
    lab[:, 2:] = amplitude_bits(design.constellation, amps)
    return lab


class CmEncoder:
    def __init__(self, design: CmDesign):
        self.design = design
        self.staircase = StaircaseEncoder(design.schema)

    def encode(self, u) -> BlockFrame:
        d = self.design
        u = np.asarray(u, dtype=np.uint8).reshape(-1)
        if u.size != d.k:
            raise ParameterError(f"information block must have k={d.k} bits, got {u.size}")
        n_s = d.row.sign_info_bits
        u_s, u_a = u[:n_s], u[n_s:]
        if d.shaped:
            amps = ccdm.match(d.composition, u_a)
        else:
            amps = amplitude_indices(d.constellation, u_a)
        b = amplitude_bits(d.constellation, amps).reshape(-1)
        blk = self.staircase.encode(np.concatenate([b, u_s]))
        parities = blk.parity(d.schema)
        signs = np.concatenate([parities, u_s])
        idx = points_from_labels(d.constellation, _symbol_labels(d, signs, amps))
        symbols = d.scale * d.constellation.points[idx]
        return BlockFrame(u, amps, parities, signs, idx, symbols, blk.index, blk.bits)


def cm_encode(design: CmDesign, u, encoder: CmEncoder | None = None) -> BlockFrame:
    """One-shot helper; pass an encoder to continue an existing stream."""
    return (encoder or CmEncoder(design)).encode(u)


def received_block(design: CmDesign, point_indices) -> np.ndarray:
    """Rebuild the noisy staircase block from one block of hard decisions."""
    d = design
    idx = np.asarray(point_indices, dtype=np.int64).reshape(-1)
    if idx.size != d.n:
        raise ParameterError(f"need {d.n} detected symbols, got {idx.size}")
    lab = d.constellation.labels[idx]
    signs = lab[:, :2].reshape(-1)
    n_p = d.row.parity_bits
    info = np.concatenate([lab[:, 2:].reshape(-1), signs[n_p:]])
    side, k_cols = d.schema.block_side, d.schema.info_cols
    blk = np.empty((side, side), dtype=np.uint8)
    blk[:, :k_cols] = info.reshape(side, k_cols)
    blk[:, k_cols:] = signs[:n_p].reshape(side, -1)
    return blk


@dataclass
class DecodedFrame:
    block_index: int
    info_bits: np.ndarray
    u_hat: np.ndarray | None
    flips: int

    @property
    def flagged(self) -> bool:
        """Decoded amplitudes violated the composition (counted as a block error)."""
        return self.u_hat is None


class CmDecoder:
    """Hard decisions in, information blocks out (delayed by the decoder window)."""

    def __init__(self, design: CmDesign, window: int = 9, iterations: int = 8,
                 mode: str = "extrinsic", dematch: bool = True):
        self.design = design
        self.staircase = StaircaseDecoder(design.schema, window, iterations, mode)
        self.dematch = dematch

    def _finish(self, dec) -> DecodedFrame:
        d = self.design
        info = dec.bits[:, : d.schema.info_cols].reshape(-1)
        if not self.dematch:
            return DecodedFrame(dec.index, info, None, dec.flips)
        n_b = d.n * (d.m - 2)
        amps = amplitude_indices(d.constellation, info[:n_b])
        u_s = info[n_b:]
        if d.shaped:
            try:
                u_a = ccdm.dematch(d.composition, amps)
            except (CompositionError, RankOutOfRange):
                return DecodedFrame(dec.index, info, None, dec.flips)
        else:
            u_a = info[:n_b]
        return DecodedFrame(dec.index, info, np.concatenate([u_s, u_a]), dec.flips)

    def push(self, point_indices) -> list[DecodedFrame]:
        blk = received_block(self.design, point_indices)
        return [self._finish(d) for d in self.staircase.push(blk)]

    def flush(self) -> list[DecodedFrame]:
        return [self._finish(d) for d in self.staircase.flush()]


def cm_decode(design: CmDesign, detected_blocks, window: int = 9, iterations: int = 8,
              mode: str = "extrinsic") -> list[DecodedFrame]:
    """Decode a finite stream of hard-decision blocks, flushing the tail."""
    dec = CmDecoder(design, window, iterations, mode)
    out = []
    for idx in detected_blocks:
        out.extend(dec.push(idx))
    out.extend(dec.flush())
    return out
