import json
import math

import numpy as np
import pytest
from scipy.stats import binomtest

from pscm import simulate
from pscm.errors import ParameterError
from pscm.simulate import (SimConfig, SimReport, clopper_pearson, manifest, run_bler,
                           search_min_snr, simulate_at, snr_at_rate, sweep, trace_monotone,
                           write_json, write_sweep_csv)
from pscm.transceiver import build_design, design, design_row


@pytest.fixture(scope="module")
def row663():
    return design_row(10, 3, 6, 663)


def fake_report(snr, pe, mode="shaped", row=None, blocks=4000):
    errors = int(round(pe * blocks))
    lo, hi = clopper_pearson(errors, blocks)
    rate = 5.0 + 0.02 * (snr - 18) if mode == "shaped" else 5.0
    return SimReport(snr, mode, 10, 3, row.shortening if row else 663,
                     float(row.two_gamma) if row else 1.0, blocks, errors, errors / blocks, lo, hi,
                     0.0, 0, 0, 0, rate - 0.01, rate, 0.05, 0.3, "max_blocks", 1, 1)


@pytest.fixture
def waterfall(monkeypatch):
    """Replace the Monte Carlo run by a deterministic cliff at a per-design SNR."""
    cliff = {}
    calls = []

    def fake(row, mode, snr, **kw):
        calls.append((row.shortening, mode, snr))
        thr = cliff[(row.shortening, mode)]
        pe = 1.0 if snr < thr else 1e-4
        return fake_report(snr, pe, mode, row)

    monkeypatch.setattr(simulate, "simulate_at", fake)
    return cliff, calls


class TestConfidence:
    @pytest.mark.parametrize("k,n", [(0, 100), (3, 1000), (50, 16000), (100, 100)])
    def test_matches_exact_binomial(self, k, n):
        ci = binomtest(k, n).proportion_ci(0.95, method="exact")
        assert clopper_pearson(k, n) == pytest.approx((ci.low, ci.high), abs=1e-12)

    def test_meets_rule(self):
        assert fake_report(18, 1e-3).meets(3e-3)
        assert not fake_report(18, 5e-3).meets(3e-3)
        assert not fake_report(18, 2e-3, blocks=1000).meets(3e-3)  # 2 errors: CI too wide


class TestRunBler:
    def test_config_floor(self, row663):
        d = build_design(row663, 19.0, shaped=False)
        with pytest.raises(ParameterError):
            SimConfig(d, 19.0, min_error_events=5)
        assert SimConfig(d, 19.0).warmup_blocks == 9
        assert SimConfig(d, 19.0).max_blocks >= 50 / 3e-3

    def test_deep_waterfall(self, row663):
        rep = simulate_at(row663, "uniform", 24.0, max_blocks=1000, early_stop=False)
        assert rep.blocks_simulated == 1000
        assert rep.block_errors == 0
        assert rep.ci_low == 0 and rep.ci_high < 4e-3
        assert rep.spectral_efficiency == 5.0

    def test_below_threshold(self, row663):
        rep = simulate_at(row663, "uniform", 15.0, min_error_events=10)
        assert rep.pe_estimate > 0.9
        assert rep.stopped_by == "min_error_events"

    def test_deterministic(self, row663):
        a = simulate_at(row663, "shaped", 17.2, max_blocks=60, early_stop=False, seed=4)
        b = simulate_at(row663, "shaped", 17.2, max_blocks=60, early_stop=False, seed=4)
        a.runtime_s = b.runtime_s = 0.0
        assert a == b

    def test_shard_merge_equivalence(self, row663):
        kw = dict(max_blocks=40, early_stop=False, shards=2, seed=11, blocks_per_round=20)
        one = simulate_at(row663, "uniform", 19.1, workers=1, **kw)
        two = simulate_at(row663, "uniform", 19.1, workers=2, **kw)
        for f in ("blocks_simulated", "block_errors", "component_decodes", "flips_max"):
            assert getattr(one, f) == getattr(two, f)

    def test_dematch_path_counts_the_same(self, row663):
        kw = dict(max_blocks=40, early_stop=False, seed=3)
        fast = simulate_at(row663, "shaped", 16.4, **kw)
        full = simulate_at(row663, "shaped", 16.4, dematch=True, **kw)
        assert fast.block_errors == full.block_errors
        assert 0 < fast.block_errors

    def test_early_stop_on_clear_failure(self, row663):
        rep = simulate_at(row663, "uniform", 16.0)
        assert rep.stopped_by in ("ci_above_target", "min_error_events")
        assert rep.blocks_simulated <= 100


class TestSearch:
    def test_bisection_finds_cliff(self, waterfall, row663):
        cliff, calls = waterfall
        cliff[(663, "shaped")] = 15.37
        res = search_min_snr(row663, "shaped")
        assert res.snr_min == pytest.approx(15.4)
        assert not res.bracket_failed
        probed = sorted({c[2] for c in calls})
        assert max(b - a for a, b in zip(probed, probed[1:])) <= 0.5 + 1e-9
        assert trace_monotone(res.trace)

    def test_start_passes_moves_down(self, waterfall, row663):
        cliff, _ = waterfall
        cliff[(663, "uniform")] = 16.0
        res = search_min_snr(row663, "uniform", start_db=18.0)
        assert res.snr_min == pytest.approx(16.0)

    def test_bracket_failure(self, waterfall, row663):
        cliff, _ = waterfall
        cliff[(663, "shaped")] = 60.0
        res = search_min_snr(row663, "shaped", max_span_db=2.0)
        assert res.snr_min is None and res.bracket_failed

    def test_resolution_floor(self, row663):
        with pytest.raises(ParameterError):
            search_min_snr(row663, "shaped", resolution_db=0.01)

    def test_monotone_check_flags_inversion(self):
        good = [fake_report(17, 0.5), fake_report(18, 1e-3)]
        bad = [fake_report(17, 1e-3), fake_report(18, 0.5)]
        assert trace_monotone(good) and not trace_monotone(bad)


class TestRateOperatingPoint:
    def test_envelope_and_pruning(self, waterfall):
        cliff, calls = waterfall
        rows = design(10, 3, 6)
        for r in rows:
            cliff[(r.shortening, "shaped")] = simulate.air_threshold(r, "shaped") + 0.8
        op = snr_at_rate(rows, 5.0, "shaped")
        assert len(op.candidates) == len(rows)
        settled = [c["cost"] for c in op.candidates if "cost" in c]
        assert op.snr_db == pytest.approx(min(settled))
        assert any(c.get("pruned") for c in op.candidates)
        for c in op.candidates:
            if "cost" in c:
                assert c["cost"] >= c["bound"] - 0.1
            if c.get("pruned"):
                assert c["bound"] >= op.snr_db

    def test_uniform_needs_se(self, waterfall):
        cliff, _ = waterfall
        rows = design(10, 3, 6)
        for r in rows:
            cliff[(r.shortening, "uniform")] = 19.0 + float(r.two_gamma)
        op = snr_at_rate(rows, 5.0, "uniform")
        assert op.row.shortening == 663
        assert op.snr_db == pytest.approx(20.0)


class TestOutputs:
    def test_sweep_csv(self, waterfall, tmp_path):
        cliff, _ = waterfall
        rows = design(10, 3, 6, two_gamma=[1.0])
        cliff[(663, "shaped")] = 14.0
        cliff[(663, "uniform")] = 19.3
        points, results = sweep(rows)
        assert [p.mode for p in points] == ["shaped", "uniform"]
        assert points[0].gap_db == pytest.approx(points[0].snr_min - points[0].air_snr)
        write_sweep_csv(tmp_path / "s.csv", points)
        head = (tmp_path / "s.csv").read_text().splitlines()[0]
        assert head == "two_gamma,s,mode,se,rate,snr_min,air_snr,gap_db"
        json.dumps(results[0].to_dict())

    def test_manifest(self, tmp_path):
        m = manifest("simulate", {"snr": 18.0}, seed=7, window=9)
        for key in ("command", "parameters", "seed", "noise_generation", "tool_version",
                    "timestamp"):
            assert key in m
        write_json(tmp_path / "m.json", {"m": m, "x": np.float64(1.5), "n": np.int64(2)})
        assert json.loads((tmp_path / "m.json").read_text())["n"] == 2
