"""QAM constellations with binary reflected Gray labels.

Points live on the odd-integer grid; all power scaling happens outside.
Label bit 0 is the sign of the real part and bit 1 the sign of the
imaginary part (1 for positive).  The remaining bits are the per-dimension
Gray-coded magnitudes, interleaved I, Q, I, Q, ...  Magnitude index 0 is
the innermost level; the negative half mirrors the positive one.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ParameterError


def gray(i: int) -> int:
    return i ^ (i >> 1)


def _pam_levels(bits: int) -> np.ndarray:
    size = 1 << bits
    return np.arange(-(size - 1), size, 2, dtype=np.int64)


def _pam_label(level: int, bits: int) -> list[int]:
    """Sign bit followed by the Gray code of the magnitude index."""
    sign = 1 if level > 0 else 0
    mag = (abs(level) - 1) // 2
    g = gray(mag)
    return [sign] + [(g >> (bits - 2 - b)) & 1 for b in range(bits - 1)]


@dataclass(frozen=True)
class SymbolFactorization:
    amplitude: complex
    sign_real: int
    sign_imag: int


@dataclass(frozen=True, eq=False)
class Constellation:
    m: int
    bits_i: int
    bits_q: int
    levels_i: np.ndarray = field(repr=False)
    levels_q: np.ndarray = field(repr=False)
    # point index p = i * len(levels_q) + q
    points: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)
    amplitudes: np.ndarray = field(repr=False)
    amplitude_points: np.ndarray = field(repr=False)
    label_to_point: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return 1 << self.m

    @property
    def amplitude_bits(self) -> int:
        return self.m - 2

    @property
    def energies(self) -> np.ndarray:
        return np.abs(self.points) ** 2

    def point_index(self, x: complex) -> int:
        hits = np.flatnonzero(np.isclose(self.points, x, rtol=0.0, atol=1e-9))
        if hits.size != 1:
            raise ParameterError(f"{x!r} is not a point of the {self.size}-QAM grid")
        return int(hits[0])

    def label_value(self) -> np.ndarray:
        """Labels as integers with bit 0 as the most significant."""
        weights = 1 << np.arange(self.m - 1, -1, -1)
        return self.labels.astype(np.int64) @ weights

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["real", "imag", "label"])
            for x, lab in zip(self.points, self.labels):
                w.writerow([int(x.real), int(x.imag), "".join(map(str, lab))])


@lru_cache(maxsize=None)
def build(m: int) -> Constellation:
    """Square 2^m-QAM for even ``m``; ``m = 3`` gives the 4 x 2 rectangular 8-QAM."""
    if m == 3:
        bits_i, bits_q = 2, 1
    elif m % 2 == 0 and 2 <= m <= 10:
        bits_i = bits_q = m // 2
    else:
        raise ParameterError(f"unsupported bits per symbol m={m}")
    li, lq = _pam_levels(bits_i), _pam_levels(bits_q)
    points, labels = [], []
    for a in li:
        la = _pam_label(int(a), bits_i)
        for b in lq:
            lb = _pam_label(int(b), bits_q)
            mag_i, mag_q = la[1:], lb[1:]
            tail = []
            for k in range(max(len(mag_i), len(mag_q))):
                if k < len(mag_i):
                    tail.append(mag_i[k])
                if k < len(mag_q):
                    tail.append(mag_q[k])
            points.append(complex(a, b))
            labels.append([la[0], lb[0]] + tail)
    points = np.array(points, dtype=np.complex128)
    labels = np.array(labels, dtype=np.uint8)

    weights = 1 << np.arange(m - 1, -1, -1)
    value = labels.astype(np.int64) @ weights
    label_to_point = np.full(1 << m, -1, dtype=np.int64)
    label_to_point[value] = np.arange(points.size)

    # X+ ordered by the integer value of label bits 2..m-1
    first = (points.real > 0) & (points.imag > 0)
    amp_idx = np.flatnonzero(first)
    amp_val = value[amp_idx] & ((1 << (m - 2)) - 1)
    amp_idx = amp_idx[np.argsort(amp_val)]
    for arr in (points, labels, label_to_point, amp_idx, li, lq):
        arr.setflags(write=False)
    return Constellation(m, bits_i, bits_q, li, lq, points, labels, points[amp_idx], amp_idx,
                         label_to_point)


def factorize(c: Constellation, x: complex) -> SymbolFactorization:
    c.point_index(x)
    return SymbolFactorization(complex(abs(x.real), abs(x.imag)),
                               1 if x.real > 0 else -1, 1 if x.imag > 0 else -1)


def compose(a: complex, sign_real: int, sign_imag: int) -> complex:
    if a.real <= 0 or a.imag <= 0:
        raise ParameterError(f"amplitude {a!r} is not in the first quadrant")
    if sign_real not in (1, -1) or sign_imag not in (1, -1):
        raise ParameterError("signs must be +1 or -1")
    return complex(sign_real * a.real, sign_imag * a.imag)


def amplitude_index(c: Constellation, a: complex) -> int:
    hits = np.flatnonzero(np.isclose(c.amplitudes, a, rtol=0.0, atol=1e-9))
    if hits.size != 1:
        raise ParameterError(f"{a!r} is not an amplitude of the {c.size}-QAM grid")
    return int(hits[0])


def phi(c: Constellation, a: complex) -> np.ndarray:
    """Label bits 2..m-1 of amplitude ``a``."""
    return c.labels[c.amplitude_points[amplitude_index(c, a)], 2:].copy()


def phi_inv(c: Constellation, bits) -> complex:
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape != (c.m - 2,) or np.any((bits != 0) & (bits != 1)):
        raise ParameterError(f"need {c.m - 2} binary digits, got {bits!r}")
    idx = int(bits @ (1 << np.arange(c.m - 3, -1, -1))) if c.m > 2 else 0
    return complex(c.amplitudes[idx])


def amplitude_bits(c: Constellation, indices) -> np.ndarray:
    """Vectorized Phi on amplitude indices: shape (n, m-2)."""
    indices = np.asarray(indices, dtype=np.int64)
    shifts = np.arange(c.m - 3, -1, -1)
    return ((indices[:, None] >> shifts) & 1).astype(np.uint8)


def amplitude_indices(c: Constellation, bits) -> np.ndarray:
    """Vectorized inverse Phi on rows of m-2 bits."""
    bits = np.asarray(bits, dtype=np.int64).reshape(-1, c.m - 2)
    return bits @ (1 << np.arange(c.m - 3, -1, -1))


def points_from_labels(c: Constellation, labels) -> np.ndarray:
    """Point indices for rows of m label bits."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1, c.m)
    return c.label_to_point[labels @ (1 << np.arange(c.m - 1, -1, -1))]


def _thresholds(levels: np.ndarray) -> np.ndarray:
    return (levels[:-1] + levels[1:]) / 2


def detect_indices(c: Constellation, y, scale: float) -> np.ndarray:
    """Hard decisions as point indices.

    Each dimension is thresholded at the midpoints between adjacent scaled
    levels; a sample exactly on a threshold goes to the lower level.
    """
    if not scale > 0:
        raise ParameterError(f"scale must be positive, got {scale}")
    y = np.asarray(y, dtype=np.complex128)
    if not np.all(np.isfinite(y)):
        raise ParameterError("received samples must be finite")
    ti = scale * _thresholds(c.levels_i)
    tq = scale * _thresholds(c.levels_q)
    ii = np.searchsorted(ti, y.real, side="left")
    qq = np.searchsorted(tq, y.imag, side="left")
    return ii * c.levels_q.size + qq


def hard_detect(c: Constellation, y, scale: float):
    """Nearest scaled point to ``y`` (unscaled coordinates returned)."""
    idx = detect_indices(c, y, scale)
    out = c.points[idx]
    return complex(out) if np.ndim(out) == 0 else out
