"""Monte Carlo block-error estimation and minimum-SNR search.

A run streams staircase blocks through the whole chain.  Blocks are split
into ``shards``; shard ``j`` owns its own bit source, channel, encoder and
decoder, seeded from ``(seed, j)``.  Work proceeds in rounds of a fixed
number of counted blocks per shard and the stopping rules are evaluated
only between rounds, so the result depends on the seed and shard count but
not on how many processes execute the shards.
"""

from __future__ import annotations

import csv
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np
from scipy.special import betaincinv

from . import __version__
from .air import crossing_snr, optimize_shaping, snr_for_rate
from .channel import NOISE_METHOD, AwgnChannel
from .constellation import build, detect_indices
from .errors import ParameterError
from .transceiver import CmDecoder, CmDesign, CmEncoder, DesignRow, build_design

MODES = ("shaped", "uniform")
TARGET_PE = 3e-3
BIT_ERROR_NOTE = "target P_e = 3e-3 corresponds to a bit error probability of roughly 1e-7"


@dataclass
class SimConfig:
    design: CmDesign
    snr_db: float
    target_pe: float = TARGET_PE
    max_blocks: int | None = None
    min_error_events: int = 50
    warmup_blocks: int | None = None
    seed: int = 1
    window: int = 9
    iterations: int = 8
    decoder_mode: str = "extrinsic"
    shards: int = 1
    workers: int = 1
    blocks_per_round: int = 50
    early_stop: bool = True
    dematch: bool = False

    def __post_init__(self):
        if self.min_error_events < 10:
            raise ParameterError("min_error_events must be >= 10")
        if not 0 < self.target_pe < 1:
            raise ParameterError("target_pe must lie in (0, 1)")
        if self.shards < 1 or self.workers < 1 or self.blocks_per_round < 1:
            raise ParameterError("shards, workers and blocks_per_round must be positive")
        if self.warmup_blocks is None:
            self.warmup_blocks = self.window
        if self.max_blocks is None:
            self.max_blocks = int(math.ceil(4 * self.min_error_events / self.target_pe))

    @property
    def mode(self) -> str:
        return "shaped" if self.design.shaped else "uniform"


def clopper_pearson(errors: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    a = (1 - level) / 2
    lo = 0.0 if errors == 0 else float(betaincinv(errors, trials - errors + 1, a))
    hi = 1.0 if errors == trials else float(betaincinv(errors + 1, trials - errors, 1 - a))
    return lo, hi


@dataclass
class SimReport:
    snr_db: float
    mode: str
    v: int
    t: int
    shortening: int
    two_gamma: float
    blocks_simulated: int
    block_errors: int
    pe_estimate: float
    ci_low: float
    ci_high: float
    flips_mean: float
    flips_max: int
    component_decodes: int
    component_failures: int
    spectral_efficiency: float
    nominal_rate: float
    lambda_star: float
    Lambda_star: float
    stopped_by: str
    seed: int
    shards: int
    runtime_s: float = field(default=0.0, compare=False)

    def meets(self, target_pe: float) -> bool:
        """P_e at or below target with the CI upper bound under twice the target."""
        return self.pe_estimate <= target_pe and self.ci_high < 2 * target_pe

    def to_dict(self) -> dict:
        return asdict(self)


class _Shard:
    """One independent stream: bits, encoder, channel, decoder and counters."""

    def __init__(self, cfg: SimConfig, shard: int):
        d = cfg.design
        self.index = shard
        self.design = d
        self.bits = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, shard, 1])))
        self.channel = AwgnChannel(cfg.seed, worker=shard)
        self.encoder = CmEncoder(d)
        self.decoder = CmDecoder(d, cfg.window, cfg.iterations, cfg.decoder_mode, cfg.dematch)
        self.warmup = cfg.warmup_blocks
        self.dematch = cfg.dematch
        self.sent: dict[int, np.ndarray] = {}
        self.counted = 0
        self.errors = 0
        self.flips_sum = 0
        self.flips_max = 0

    def advance(self, target: int) -> _Shard:
        d = self.design
        k_info = d.schema.info_cols
        while self.counted < target:
            u = self.bits.integers(0, 2, d.k, dtype=np.uint8)
            frame = self.encoder.encode(u)
            if frame.block_index > self.warmup:
                self.sent[frame.block_index] = u if self.dematch else \
                    frame.block_bits[:, :k_info].reshape(-1)
            y = self.channel.transmit(frame.symbols)
            for out in self.decoder.push(detect_indices(d.constellation, y, d.scale)):
                ref = self.sent.pop(out.block_index, None)
                if ref is None:
                    continue
                got = out.u_hat if self.dematch else out.info_bits
                self.errors += int(got is None or not np.array_equal(got, ref))
                self.counted += 1
                self.flips_sum += out.flips
                self.flips_max = max(self.flips_max, out.flips)
        return self

    @property
    def decoder_stats(self) -> np.ndarray:
        return self.decoder.staircase.stats


def _advance(job):
    shard, target = job
    return shard.advance(target)


def _stop_reason(cfg: SimConfig, blocks: int, errors: int) -> str | None:
    if errors >= cfg.min_error_events:
        return "min_error_events"
    if blocks >= cfg.max_blocks:
        return "max_blocks"
    if cfg.early_stop:
        lo, hi = clopper_pearson(errors, blocks)
        if hi < cfg.target_pe:
            return "ci_below_target"
        if lo > cfg.target_pe:
            return "ci_above_target"
    return None


def run_bler(cfg: SimConfig) -> SimReport:
    """Estimate P_e = Pr(u != u_hat) at ``cfg.snr_db``."""
    start = time.perf_counter()
    shards = [_Shard(cfg, j) for j in range(cfg.shards)]
    per_round = max(1, math.ceil(cfg.blocks_per_round / cfg.shards))
    pool = ProcessPoolExecutor(min(cfg.workers, cfg.shards)) if cfg.workers > 1 and cfg.shards > 1 else None
    reason = None
    try:
        r = 0
        while reason is None:
            r += 1
            jobs = [(s, r * per_round) for s in shards]
            shards = list(pool.map(_advance, jobs)) if pool else [_advance(j) for j in jobs]
            blocks = sum(s.counted for s in shards)
            errors = sum(s.errors for s in shards)
            reason = _stop_reason(cfg, blocks, errors)
    finally:
        if pool:
            pool.shutdown()
    blocks = sum(s.counted for s in shards)
    errors = sum(s.errors for s in shards)
    stats = sum(s.decoder_stats for s in shards)
    lo, hi = clopper_pearson(errors, blocks)
    d = cfg.design
    return SimReport(
        snr_db=float(cfg.snr_db), mode=cfg.mode, v=d.row.v, t=d.row.t, shortening=d.row.shortening,
        two_gamma=float(d.two_gamma), blocks_simulated=blocks, block_errors=errors,
        pe_estimate=errors / blocks, ci_low=lo, ci_high=hi,
        flips_mean=sum(s.flips_sum for s in shards) / blocks,
        flips_max=max(s.flips_max for s in shards),
        component_decodes=int(stats[0]), component_failures=int(stats[1]),
        spectral_efficiency=d.spectral_efficiency, nominal_rate=d.nominal_rate,
        lambda_star=d.shaping.lambda_star, Lambda_star=d.shaping.Lambda_star,
        stopped_by=reason, seed=cfg.seed, shards=cfg.shards,
        runtime_s=time.perf_counter() - start)


def simulate_at(row: DesignRow, mode: str, snr_db: float, **kwargs) -> SimReport:
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    design = build_design(row, snr_db, shaped=mode == "shaped")
    return run_bler(SimConfig(design, snr_db, **kwargs))


@dataclass
class SearchResult:
    snr_min: float | None
    mode: str
    row: DesignRow
    target_pe: float
    resolution_db: float
    trace: list[SimReport]
    air_threshold_db: float
    bracket_failed: bool = False

    @property
    def report(self) -> SimReport | None:
        for r in self.trace:
            if r.snr_db == self.snr_min:
                return r
        return None

    def to_dict(self) -> dict:
        best = self.report
        return {"snr_min": self.snr_min, "mode": self.mode, "s": self.row.shortening,
                "two_gamma": float(self.row.two_gamma), "target_pe": self.target_pe,
                "resolution_db": self.resolution_db, "air_threshold_db": self.air_threshold_db,
                "bracket_failed": self.bracket_failed,
                "spectral_efficiency": best.spectral_efficiency if best else None,
                "ci": [best.ci_low, best.ci_high] if best else None,
                "trace": [r.to_dict() for r in self.trace]}


def air_threshold(row: DesignRow, mode: str) -> float:
    """SNR where the transmission rate meets the GMI for this design."""
    return crossing_snr(build(row.m), float(row.two_gamma), shaped=mode == "shaped")


def search_min_snr(row: DesignRow, mode: str = "shaped", target_pe: float = TARGET_PE,
                   resolution_db: float = 0.1, start_db: float | None = None,
                   step_db: float = 0.5, max_span_db: float = 12.0, lower_db: float | None = None,
                   **sim) -> SearchResult:
    """Smallest probed SNR meeting the target, by bracketing and bisection.

    The bracket starts at the AIR feasibility threshold of the design (or
    ``start_db``) and widens in ``step_db`` increments; probes are snapped
    to the resolution grid.  ``lower_db`` declares an SNR already known to
    fail, which skips the downward bracket step.
    """
    if resolution_db < 0.05:
        raise ParameterError("resolution_db must be >= 0.05")
    thr = air_threshold(row, mode)
    snap = lambda x: round(round(x / resolution_db) * resolution_db, 10)
    trace: list[SimReport] = []
    results: dict[float, bool] = {}

    def probe(snr: float) -> bool:
        snr = snap(snr)
        if snr not in results:
            rep = simulate_at(row, mode, snr, target_pe=target_pe, **sim)
            trace.append(rep)
            results[snr] = rep.meets(target_pe)
        return results[snr]

    x0 = snap(start_db if start_db is not None else math.ceil(thr / resolution_db) * resolution_db)
    lo = hi = None
    if lower_db is not None:
        lo = snap(lower_db)
    if probe(x0):
        hi = x0
        x = x0
        while lo is None and x0 - x < max_span_db:
            x = snap(x - step_db)
            if probe(x):
                hi = x
            else:
                lo = x
    else:
        lo = x0 if lo is None or x0 > lo else lo
        x = x0
        while hi is None and x - x0 < max_span_db:
            x = snap(x + step_db)
            if probe(x):
                hi = x
            else:
                lo = x
    if hi is None:
        return SearchResult(None, mode, row, target_pe, resolution_db, trace, thr, True)
    if lo is None:
        return SearchResult(hi, mode, row, target_pe, resolution_db, trace, thr, True)
    while hi - lo > resolution_db + 1e-9:
        mid = snap((lo + hi) / 2)
        if mid <= lo or mid >= hi:
            mid = snap(lo + resolution_db)
        if probe(mid):
            hi = mid
        else:
            lo = mid
    return SearchResult(hi, mode, row, target_pe, resolution_db, trace, thr)


def trace_monotone(trace: list[SimReport]) -> bool:
    """P_e non-increasing in SNR along the trace, up to CI overlap."""
    pts = sorted(trace, key=lambda r: r.snr_db)
    return all(b.ci_low <= a.ci_high for a, b in zip(pts, pts[1:]))


@dataclass
class SweepPoint:
    two_gamma: float
    s: int
    mode: str
    se: float
    rate: float
    snr_min: float | None
    air_snr: float | None
    gap_db: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def sweep_point(res: SearchResult) -> SweepPoint:
    """Operating point of one search and its distance to the GMI curve at equal rate."""
    rep = res.report
    if rep is None:
        return SweepPoint(float(res.row.two_gamma), res.row.shortening, res.mode, math.nan,
                          math.nan, None, None, None)
    c = build(res.row.m)
    air = snr_for_rate(c, rep.nominal_rate, shaped=res.mode == "shaped")
    return SweepPoint(float(res.row.two_gamma), res.row.shortening, res.mode,
                      rep.spectral_efficiency, rep.nominal_rate, res.snr_min, air,
                      res.snr_min - air)


def sweep(rows: list[DesignRow], modes=MODES, **search) -> tuple[list[SweepPoint], list[SearchResult]]:
    """Minimum-SNR search for each design row and mode."""
    points, results = [], []
    for mode in modes:
        for row in rows:
            res = search_min_snr(row, mode, **search)
            results.append(res)
            points.append(sweep_point(res))
    return points, results


def shaped_snr_for_rate(row: DesignRow, rate: float, lo: float = 5.0, hi: float = 40.0) -> float:
    """SNR at which this design's transmission rate H(A) + 2 gamma equals ``rate``.

    H(A) at the optimized shaping grows with SNR, so this is a bisection;
    returns inf when the rate is never reached below ``hi``.
    """
    c = build(row.m)
    f = lambda s: optimize_shaping(c, s).H_A + float(row.two_gamma) - rate
    if f(hi) < 0:
        return math.inf
    if f(lo) >= 0:
        return lo
    while hi - lo > 1e-3:
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if f(mid) < 0 else (lo, mid)
    return hi


@dataclass
class RateOperatingPoint:
    """Cheapest SNR at which some design reaches a target SE and meets P_e."""

    se: float
    mode: str
    snr_db: float
    row: DesignRow | None
    candidates: list[dict]
    searches: list[SearchResult]

    def to_dict(self) -> dict:
        return {"se": self.se, "mode": self.mode, "snr_db": self.snr_db,
                "s": self.row.shortening if self.row else None, "candidates": self.candidates}


def snr_at_rate(rows: list[DesignRow], se: float, mode: str = "shaped",
                target_pe: float = TARGET_PE, resolution_db: float = 0.1,
                **sim) -> RateOperatingPoint:
    """Minimum SNR to transmit at ``se`` bits/symbol with P_e at the target.

    A shaped design operates anywhere on its H(A) + 2 gamma curve at or
    above its own minimum SNR, so its cost at ``se`` is the larger of the
    two.  Uniform designs have the fixed SE ``m - 2 + 2 gamma`` and qualify
    when it is at least ``se``.  Candidates are visited in order of the
    AIR lower bound on their cost; simulation stops once that bound exceeds
    the best cost found.
    """
    c_rows = []
    for row in rows:
        c = build(row.m)
        if mode == "uniform":
            if row.m - 2 + float(row.two_gamma) < se - 1e-12:
                continue
            on_curve = -math.inf
        else:
            on_curve = shaped_snr_for_rate(row, se)
            if not math.isfinite(on_curve):
                continue
        bound = max(air_threshold(row, mode), on_curve)
        c_rows.append((bound, on_curve, row))
    c_rows.sort(key=lambda x: x[0])
    best, best_row, cands, searches = math.inf, None, [], []
    snap = lambda x: round(math.ceil(x / resolution_db - 1e-9) * resolution_db, 10)
    for bound, on_curve, row in c_rows:
        if bound >= best:
            cands.append({"s": row.shortening, "bound": bound, "pruned": True})
            continue
        if math.isfinite(on_curve):
            # one probe on the rate curve; success settles this design
            x = snap(on_curve)
            rep = simulate_at(row, mode, x, target_pe=target_pe, **sim)
            if rep.meets(target_pe):
                cost = x
                cands.append({"s": row.shortening, "bound": bound, "cost": cost,
                              "on_curve": True, "probe": rep.to_dict()})
                if cost < best:
                    best, best_row = cost, row
                continue
            res = search_min_snr(row, mode, target_pe, resolution_db, start_db=x,
                                 lower_db=x, **sim)
        else:
            res = search_min_snr(row, mode, target_pe, resolution_db, **sim)
        searches.append(res)
        cost = math.inf if res.snr_min is None else max(res.snr_min, on_curve)
        cands.append({"s": row.shortening, "bound": bound, "cost": cost, "on_curve": False,
                      "snr_min": res.snr_min})
        if cost < best:
            best, best_row = cost, row
    return RateOperatingPoint(se, mode, best, best_row, cands, searches)


def manifest(command: str, params: dict, seed: int | None = None, **extra) -> dict:
    """Run manifest: everything needed to rerun a result bit-exactly."""
    return {"command": command, "parameters": params, "seed": seed,
            "noise_generation": NOISE_METHOD, "tool_version": __version__,
            "python": platform.python_version(), "numpy": np.__version__,
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "note": BIT_ERROR_NOTE, **extra}


def write_sweep_csv(path, points: list[SweepPoint]) -> None:
    fields = ["two_gamma", "s", "mode", "se", "rate", "snr_min", "air_snr", "gap_db"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for p in points:
            w.writerow(p.to_dict())


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
