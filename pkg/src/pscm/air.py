"""Hard-decision achievable rates and Maxwell-Boltzmann shaping.

The channel is ``Y = Lambda * X + Z`` with ``Z`` unit-variance circular
Gaussian noise, so SNR = E[|Lambda X|^2] in linear units.  Detection is
per-dimension nearest level, which makes the discrete channel a product of
two PAM transition matrices.  All expectations are exact finite sums.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .constellation import Constellation
from .errors import ParameterError

NOISE_STD_PER_DIM = math.sqrt(0.5)
S_MAX = 64.0
LAMBDA_GRID = np.concatenate([[0.0], np.logspace(-4, 0, 64)])
_GOLDEN = (math.sqrt(5) - 1) / 2


def db_to_linear(snr_db: float) -> float:
    return 10.0 ** (snr_db / 10.0)


def binary_entropy(p):
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -p * np.log2(p) - (1 - p) * np.log2(1 - p)
    return np.where((p <= 0) | (p >= 1), 0.0, h)


def entropy_bits(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


@dataclass(frozen=True, eq=False)
class InputDistribution:
    lam: float
    probabilities: np.ndarray = field(repr=False)
    normalizer: float


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    entries: np.ndarray = field(repr=False)
    per_dim: tuple[np.ndarray, np.ndarray] = field(repr=False)
    scale: float


@dataclass(frozen=True)
class ShapingSolution:
    snr_db: float
    lambda_star: float
    Lambda_star: float
    gmi: float
    s_star: float
    H_A: float
    p_amplitudes: tuple[float, ...] = field(repr=False, default=())


def mb_distribution(c: Constellation, lam: float) -> InputDistribution:
    if lam < 0:
        raise ParameterError(f"lambda must be >= 0, got {lam}")
    e = c.energies
    w = np.exp(-lam * (e - e.min()))
    total = w.sum()
    with np.errstate(over="ignore"):
        normalizer = float(math.exp(lam * e.min()) / total) if lam * e.min() < 700 else math.inf
    return InputDistribution(float(lam), w / total, normalizer)


def amplitude_distribution(c: Constellation, dist: InputDistribution) -> np.ndarray:
    """p_A(a) = 4 p_X(a) over X+, in amplitude-index order."""
    return 4.0 * dist.probabilities[c.amplitude_points]


def scale_for_power(c: Constellation, dist: InputDistribution, power: float) -> float:
    if not power > 0:
        raise ParameterError(f"power must be positive, got {power}")
    return math.sqrt(power / float(dist.probabilities @ c.energies))


def _interval_prob(lo, hi):
    """P(lo < N(0,1) < hi), elementwise, accurate in both tails."""
    upper = lo >= 0
    direct = ndtr(hi) - ndtr(lo)
    mirrored = ndtr(-lo) - ndtr(-hi)
    return np.where(upper, mirrored, direct)


def pam_transitions(levels: np.ndarray, scale: float) -> np.ndarray:
    thr = scale * (levels[:-1] + levels[1:]) / 2
    edges = np.concatenate([[-np.inf], thr, [np.inf]])
    mu = scale * levels
    lo = (edges[None, :-1] - mu[:, None]) / NOISE_STD_PER_DIM
    hi = (edges[None, 1:] - mu[:, None]) / NOISE_STD_PER_DIM
    return _interval_prob(lo, hi)


def transition_matrix(c: Constellation, scale: float) -> TransitionMatrix:
    if not scale > 0:
        raise ParameterError(f"scale must be positive, got {scale}")
    ti = pam_transitions(c.levels_i.astype(float), scale)
    tq = pam_transitions(c.levels_q.astype(float), scale)
    return TransitionMatrix(np.kron(ti, tq), (ti, tq), float(scale))


def hamming_matrix(labels: np.ndarray) -> np.ndarray:
    return (labels[:, None, :] != labels[None, :, :]).sum(axis=-1)


def gmi_hdd(dist: InputDistribution, trans: TransitionMatrix, labels: np.ndarray,
            eps: float = 0.1) -> tuple[float, float]:
    """Bit-wise Hamming-metric GMI in bits/symbol, and the optimizing ``s``.

    With ``beta = (eps / (1 - eps))^s`` the metric ratio reduces to
    ``beta^d(x, y) / sum_x' p(x') beta^d(x', y)``; the objective is concave
    in ``s`` and is maximized by ternary search on ``(0, S_MAX]``.
    """
    if not 0 < eps < 0.5:
        raise ParameterError(f"eps must lie in (0, 1/2), got {eps}")
    p = dist.probabilities
    joint = p[:, None] * trans.entries
    d = hamming_matrix(labels)
    m = labels.shape[1]
    p_y = joint.sum(axis=0)
    mean_d = float((joint * d).sum())
    # by_dist[y, k] = sum of p(x') over x' at Hamming distance k from y
    by_dist = np.zeros((p.size, m + 1))
    for k in range(m + 1):
        by_dist[:, k] = p @ (d == k)
    ks = np.arange(m + 1)
    slope = math.log(eps / (1 - eps))
    keep = p_y > 0

    def objective(s: float) -> float:
        lb = s * slope
        den = by_dist[keep] @ np.exp(lb * ks)
        return (lb * mean_d - float(p_y[keep] @ np.log(den))) / math.log(2)

    lo, hi = 0.0, S_MAX
    while hi - lo > 1e-8 * max(hi, 1e-12):
        a = lo + (hi - lo) / 3
        b = hi - (hi - lo) / 3
        if objective(a) < objective(b):
            lo = a
        else:
            hi = b
    s_star = (lo + hi) / 2
    return max(objective(s_star), 0.0), s_star


def symbol_mutual_information(dist: InputDistribution, trans: TransitionMatrix) -> float:
    joint = dist.probabilities[:, None] * trans.entries
    p_y = joint.sum(axis=0)
    ratio = np.divide(trans.entries, p_y[None, :], out=np.ones_like(joint), where=joint > 0)
    return float((joint * np.log2(ratio)).sum())


def evaluate(c: Constellation, lam: float, snr_db: float, eps: float = 0.1) -> ShapingSolution:
    """GMI and amplitude entropy for a fixed shaping parameter."""
    dist = mb_distribution(c, lam)
    scale = scale_for_power(c, dist, db_to_linear(snr_db))
    g, s = gmi_hdd(dist, transition_matrix(c, scale), c.labels, eps)
    pa = amplitude_distribution(c, dist)
    return ShapingSolution(float(snr_db), float(lam), scale, g, s, entropy_bits(pa),
                           tuple(float(x) for x in pa))


def uniform_solution(c: Constellation, snr_db: float) -> ShapingSolution:
    return evaluate(c, 0.0, snr_db)


def optimize_shaping(c: Constellation, snr_db: float, eps: float = 0.1) -> ShapingSolution:
    """Maximize the GMI over lambda; Lambda follows from the power constraint."""
    if not math.isfinite(snr_db):
        raise ParameterError("SNR must be finite")
    sols = [evaluate(c, lam, snr_db, eps) for lam in LAMBDA_GRID]
    i = int(np.argmax([s.gmi for s in sols]))
    best = sols[i]
    lo = LAMBDA_GRID[max(i - 1, 0)]
    hi = LAMBDA_GRID[min(i + 1, LAMBDA_GRID.size - 1)]
    # golden-section refinement inside the bracketing grid cell pair
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = evaluate(c, x1, snr_db, eps), evaluate(c, x2, snr_db, eps)
    while hi - lo > 1e-7 * max(hi, 1e-4):
        if f1.gmi < f2.gmi:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = evaluate(c, x2, snr_db, eps)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = evaluate(c, x1, snr_db, eps)
    for cand in (f1, f2):
        if cand.gmi > best.gmi:
            best = cand
    return best


def solution_at(c: Constellation, snr_db: float, shaped: bool) -> ShapingSolution:
    return optimize_shaping(c, snr_db) if shaped else uniform_solution(c, snr_db)


def rate_margin(c: Constellation, snr_db: float, two_gamma: float, shaped: bool = True) -> float:
    """GMI minus the transmission rate H(A) + 2 gamma at one SNR."""
    sol = solution_at(c, snr_db, shaped)
    return sol.gmi - (sol.H_A + two_gamma)


@dataclass
class FeasibilityResult:
    two_gamma: float
    threshold_db: float | None
    curves: list[dict]

    @property
    def bounded(self) -> bool:
        return self.threshold_db is not None


def feasible_snr(c: Constellation, gamma: float, snr_grid, shaped: bool = True) -> FeasibilityResult:
    """Smallest grid SNR where H(A) + 2 gamma < GMI at the optimized shaping."""
    if not 0.5 <= gamma < 1:
        raise ParameterError(f"gamma must lie in [1/2, 1), got {gamma}")
    two_gamma = 2 * gamma
    curves, threshold = [], None
    for snr in snr_grid:
        sol = solution_at(c, float(snr), shaped)
        rate = sol.H_A + two_gamma
        curves.append(dict(snr_db=float(snr), gmi=sol.gmi, H_A=sol.H_A, rate=rate,
                           lambda_star=sol.lambda_star, Lambda_star=sol.Lambda_star))
        if threshold is None and rate < sol.gmi:
            threshold = float(snr)
    return FeasibilityResult(two_gamma, threshold, curves)


def _bisect(f, lo: float, hi: float, tol: float) -> float:
    flo = f(lo)
    if flo >= 0 or f(hi) < 0:
        raise ValueError("root not bracketed")
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def crossing_snr(c: Constellation, two_gamma: float, lo: float = 0.0, hi: float = 40.0,
                 shaped: bool = True, tol: float = 1e-3) -> float:
    """SNR where GMI meets H(A) + 2 gamma (the feasibility boundary)."""
    return _bisect(lambda s: rate_margin(c, s, two_gamma, shaped), lo, hi, tol)


def snr_for_rate(c: Constellation, rate: float, shaped: bool = True, lo: float = -5.0,
                 hi: float = 45.0, tol: float = 1e-3) -> float:
    """SNR at which the (shaped or uniform) GMI reaches ``rate``."""
    return _bisect(lambda s: solution_at(c, s, shaped).gmi - rate, lo, hi, tol)


def air_curves(c: Constellation, snr_grid, two_gammas=()) -> list[dict]:
    rows = []
    for snr in snr_grid:
        shaped = optimize_shaping(c, float(snr))
        row = dict(snr_db=float(snr), gmi_uniform=uniform_solution(c, float(snr)).gmi,
                   gmi_shaped=shaped.gmi)
        for tg in two_gammas:
            row[f"H_A_plus_{tg:g}"] = shaped.H_A + tg
        row["lambda_star"] = shaped.lambda_star
        row["Lambda_star"] = shaped.Lambda_star
        rows.append(row)
    return rows


def write_csv(path, rows: list[dict]) -> None:
    if not rows:
        raise ParameterError("no rows to write")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
